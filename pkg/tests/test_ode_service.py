import numpy as np
import pytest

from reliability.services.markov_service import BernoulliBeta, Deterministic, mean_initial_vector
from reliability.services.ode_service import (
    analytic_dual_processor,
    analytic_trajectory,
    reliability_from_probs,
    solve_forward_kolmogorov,
    solve_from_vector,
)


@pytest.mark.parametrize("t, tolerancia", [(3.0, 1e-3), (7.0, 1e-3), (8.0, 2e-3), (13.0, 1e-3)])
def test_baseline_matches_inspection_table(model, inspection_table, t, tolerancia):
    rk4 = solve_forward_kolmogorov(model, [0.0, t]).probs[-1]
    np.testing.assert_allclose(analytic_dual_processor(t), inspection_table[t], atol=tolerancia)
    np.testing.assert_allclose(rk4, inspection_table[t], atol=tolerancia)


def test_reliability_at_thirteen(model):
    traj = solve_forward_kolmogorov(model, np.arange(14.0))
    assert traj.reliability(model.up_states)[-1] == pytest.approx(0.3049, abs=1e-4)
    assert traj.reliability(model.up_states)[-1] == pytest.approx(0.3053, abs=1e-3)


def test_rk4_agrees_with_analytic(model):
    grade = np.arange(0.0, 30.0 + 1e-9, 0.5)
    rk4 = solve_forward_kolmogorov(model, grade, step=0.01)
    assert np.max(np.abs(rk4.probs - analytic_trajectory(grade).probs)) < 1e-6


def test_trajectory_is_valid(model, grid31):
    traj = solve_forward_kolmogorov(model, grid31)
    assert traj.is_valid()
    np.testing.assert_array_equal(traj.probs[0], [1.0, 0.0, 0.0, 0.0])


def test_analytic_scalar_and_vector():
    assert analytic_dual_processor(0.0).tolist() == [1.0, 0.0, 0.0, 0.0]
    assert analytic_dual_processor(np.array([1.0, 2.0])).shape == (2, 4)
    with pytest.raises(ValueError):
        analytic_dual_processor(-1.0)


def test_reliability_from_probs():
    assert reliability_from_probs([0.2, 0.3, 0.4, 0.1], {0, 1}) == pytest.approx(0.5)


def test_grid_preconditions(model):
    with pytest.raises(ValueError, match="start at t >= 0"):
        solve_forward_kolmogorov(model, [-1.0, 2.0])
    with pytest.raises(ValueError, match="strictly increasing"):
        solve_forward_kolmogorov(model, [0.0, 2.0, 2.0])
    with pytest.raises(ValueError, match="exceeds"):
        solve_forward_kolmogorov(model, [0.0, 0.5, 1.0], step=0.75)


def test_distributional_initial_condition_needs_explicit_vector(model):
    from dataclasses import replace

    incerto = replace(model, initial=BernoulliBeta(5.0, 1.5, 0, 1))
    with pytest.raises(ValueError, match="Bernoulli-Beta"):
        solve_forward_kolmogorov(incerto, [0.0, 1.0])


def test_solution_is_linear_in_initial_vector(model):
    from dataclasses import replace

    grade = np.arange(0.0, 31.0, 5.0)
    a = solve_forward_kolmogorov(model, grade).probs
    b = solve_forward_kolmogorov(replace(model, initial=Deterministic(1)), grade).probs
    ic = BernoulliBeta(5.0, 1.5, 0, 1)
    media = solve_from_vector(model, mean_initial_vector(ic, 4), grade).probs
    np.testing.assert_allclose(media, ic.mean * a + (1 - ic.mean) * b, atol=1e-12)


def test_grid_starting_after_zero_integrates_from_zero(model):
    grade = np.arange(5.0, 31.0, 5.0)
    traj = solve_forward_kolmogorov(model, grade)
    np.testing.assert_array_equal(traj.times, grade)
    assert traj.probs.shape == (6, 4)
    np.testing.assert_allclose(traj.probs, analytic_dual_processor(grade), atol=1e-6)
    completa = solve_forward_kolmogorov(model, np.arange(0.0, 31.0, 5.0))
    np.testing.assert_allclose(traj.probs, completa.probs[1:], atol=1e-12)


def test_rk4_error_shrinks_at_fourth_order(model):
    grade = np.arange(0.0, 31.0, 1.0)
    exato = analytic_dual_processor(grade)
    erro_h = np.abs(solve_forward_kolmogorov(model, grade, step=1.0).probs - exato).max()
    erro_meio = np.abs(solve_forward_kolmogorov(model, grade, step=0.5).probs - exato).max()
    assert erro_meio > 0
    assert erro_h / erro_meio >= 8.0


def test_absorbing_states_never_lose_mass(model):
    traj = solve_forward_kolmogorov(model, np.arange(0.0, 30.0 + 1e-9, 0.25))
    assert np.all(np.diff(traj.probs[:, 2]) >= -1e-15)
    assert np.all(np.diff(traj.probs[:, 3]) >= -1e-15)
