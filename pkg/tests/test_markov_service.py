import numpy as np
import pytest

from reliability.services.config_service import load_model
from reliability.services.markov_service import (
    BernoulliBeta,
    Deterministic,
    GeneratorViolation,
    MeasurementError,
    MeasurementSet,
    MultiStateModel,
    Simplex,
    StateSpace,
    Transition,
    TransitionRateModel,
    initial_support,
    initial_vector,
    mean_initial_vector,
    rate_matrix_at,
    sample_initial_state,
    sample_initial_states,
    sample_initial_vectors,
    validate_generator,
    validate_measurements,
    weibull_transition_rate,
)
from reliability.utils import make_rng


def test_rate_matrix_at_one(model):
    esperado = np.array([
        [-0.04, 0.036, 0.0, 0.004],
        [0.0, -0.02, 0.018, 0.002],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.0],
    ])
    np.testing.assert_allclose(rate_matrix_at(model, 1.0), esperado, atol=1e-15)


def test_rate_matrix_at_zero_is_zero(model):
    assert not np.any(rate_matrix_at(model, 0.0))


@pytest.mark.parametrize("t", [0.0, 0.3, 5.0, 13.0, 30.0])
def test_rate_matrix_is_generator(model, t):
    matriz = rate_matrix_at(model, t)
    assert np.all(np.abs(matriz.sum(axis=1)) <= 1e-12)
    assert validate_generator(matriz).ok


def test_negative_time_rejected(model):
    with pytest.raises(ValueError):
        rate_matrix_at(model, -1.0)


def test_validate_generator_reports_negative_off_diagonal():
    matriz = np.array([[0.1, -0.1], [0.0, 0.0]])
    relatorio = validate_generator(matriz)
    assert not relatorio.ok
    assert relatorio.violation == "negative off-diagonal"
    assert relatorio.location == (0, 1)


def test_validate_generator_reports_row_sum():
    matriz = np.array([[-0.1, 0.2], [0.0, 0.0]])
    relatorio = validate_generator(matriz)
    assert relatorio.violation == "row sum nonzero"
    assert relatorio.location == (0,)

def test_validate_generator_requires_square():
    with pytest.raises(GeneratorViolation):
        validate_generator(np.zeros((2, 3)))


def test_dual_processor_model_shape(model):
    assert model.state_count == 4
    assert model.up_states == frozenset({0, 1})
    assert model.mission_time == 30.0
    assert model.initial == Deterministic(0)


def test_bundled_model_file_matches_constructor(model):
    do_arquivo = load_model()
    for t in (0.0, 1.0, 7.5, 30.0):
        np.testing.assert_array_equal(rate_matrix_at(do_arquivo, t), rate_matrix_at(model, t))
    assert do_arquivo.up_states == model.up_states


def test_weibull_rate():
    assert weibull_transition_rate(0.01, 2.0, 3.0) == pytest.approx(0.06)
    assert weibull_transition_rate(0.5, 1.0, 0.0) == 0.5
    with pytest.raises(ValueError):
        weibull_transition_rate(0.01, 0.5, 0.0)


def test_exits_must_share_shape():
    with pytest.raises(ValueError, match="share one shape"):
        MultiStateModel(
            states=StateSpace(3),
            rates=TransitionRateModel((Transition(0, 1, 1.0, 0.1, 2.0), Transition(0, 2, 1.0, 0.1, 1.0))),
            initial=Deterministic(0),
            up_states=frozenset({0}),
            mission_time=10.0,
        )


def test_invalid_up_state_rejected():
    with pytest.raises(ValueError):
        MultiStateModel(StateSpace(2), TransitionRateModel(()), Deterministic(0), frozenset({5}), 1.0)


def test_deterministic_initial_state_is_constant():
    rng = make_rng(11)
    assert {sample_initial_state(Deterministic(2), rng) for _ in range(50)} == {2}


@pytest.mark.parametrize("alpha, beta, media, banda", [(5.0, 1.5, 5.0 / 6.5, 0.004), (1.0, 1.0, 0.5, 0.005)])
def test_bernoulli_beta_marginal_frequency(alpha, beta, media, banda):
    estados = sample_initial_states(BernoulliBeta(alpha, beta, 0, 1), make_rng(2024), 100_000)
    assert set(np.unique(estados)) <= {0, 1}
    assert abs(np.mean(estados == 0) - media) <= banda


def test_single_draw_matches_ic_states():
    ic = BernoulliBeta(5.0, 1.5, 0, 1)
    rng = make_rng(3)
    assert {sample_initial_state(ic, rng) for _ in range(200)} <= {0, 1}


def test_simplex_initial_state_draws_from_support():
    ic = Simplex((0.0, 0.5, 0.5, 0.0))
    estados = sample_initial_states(ic, make_rng(5), 1000)
    assert set(np.unique(estados)) == {1, 2}


def test_initial_vectors():
    np.testing.assert_array_equal(initial_vector(Deterministic(1), 3), [0.0, 1.0, 0.0])
    ic = BernoulliBeta(5.0, 1.5, 0, 1)
    np.testing.assert_allclose(mean_initial_vector(ic, 4), [5 / 6.5, 1.5 / 6.5, 0.0, 0.0])
    with pytest.raises(ValueError):
        initial_vector(ic, 4)
    vetores = sample_initial_vectors(ic, 50, make_rng(0), 4)
    assert vetores.shape == (50, 4)
    np.testing.assert_allclose(vetores.sum(axis=1), 1.0, atol=1e-15)
    assert np.all(vetores[:, 2:] == 0.0)


def test_simplex_must_sum_to_one():
    with pytest.raises(ValueError):
        Simplex((0.5, 0.6))


def test_measurement_set_validation():
    with pytest.raises(MeasurementError, match="sums to"):
        MeasurementSet([1.0], [[0.5, 0.4]])
    with pytest.raises(MeasurementError):
        MeasurementSet([2.0, 1.0], [[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(MeasurementError, match="strictly increasing"):
        MeasurementSet([1.0, 1.0], [[1.0, 0.0], [1.0, 0.0]])


def test_measurement_set_allows_repeated_initial_entries():
    dados = MeasurementSet([0.0, 0.0, 0.0, 4.0], [[0.7, 0.3], [0.8, 0.2], [0.9, 0.1], [0.5, 0.5]])
    assert len(dados) == 4
    assert dados.real_entries() == slice(0, None)


def test_validate_measurements_checks_initial_condition(model):
    dados = MeasurementSet([0.0, 5.0], [[0.0, 1.0, 0.0, 0.0], [0.9, 0.1, 0.0, 0.0]])
    with pytest.raises(MeasurementError, match="initial condition"):
        validate_measurements(dados, model)
    with pytest.raises(MeasurementError, match="states"):
        validate_measurements(MeasurementSet([1.0], [[1.0, 0.0]]), model)
    with pytest.raises(MeasurementError, match="within"):
        validate_measurements(MeasurementSet([40.0], [[1.0, 0.0, 0.0, 0.0]]), model)


def test_initial_support_by_condition():
    assert initial_support(Deterministic(2), 4) == (2,)
    assert initial_support(Simplex((0.5, 0.0, 0.5, 0.0)), 4) == (0, 2)
    assert initial_support(BernoulliBeta(5.0, 1.5, 1, 0), 4) == (0, 1)
