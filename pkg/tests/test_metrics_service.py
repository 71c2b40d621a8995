import numpy as np
import pytest

from reliability.services.metrics_service import (
    EnsembleStats,
    ReplicationEnsemble,
    ReplicationError,
    absolute_difference,
    compare_ensembles,
    composite_std,
    ensemble_statistics,
    mean_trajectory,
    reliability_statistics,
    replication_run,
    rmse_by_state,
    summarize_over_time,
)
from reliability.services.ode_service import ProbabilityTrajectory

TEMPOS = np.array([0.0, 1.0, 2.0])


def trajetoria(p0):
    p0 = np.asarray(p0, dtype=np.float64)
    return ProbabilityTrajectory(TEMPOS, np.column_stack([p0, 1.0 - p0]))


def ensemble_aleatorio(n=6, seed=0):
    rng = np.random.default_rng(seed)
    return ReplicationEnsemble([trajetoria(rng.uniform(0, 1, TEMPOS.size)) for _ in range(n)])


def test_rmse_is_zero_against_itself():
    traj = trajetoria([1.0, 0.7, 0.4])
    ens = ReplicationEnsemble([traj, traj, traj])
    np.testing.assert_array_equal(rmse_by_state(ens, traj), np.zeros((3, 2)))


def test_rmse_of_constant_offset():
    referencia = trajetoria([0.9, 0.6, 0.3])
    ens = ReplicationEnsemble([trajetoria([0.8, 0.5, 0.2]), trajetoria([1.0, 0.7, 0.4])])
    np.testing.assert_allclose(rmse_by_state(ens, referencia), 0.1)


def test_rmse_matches_brute_force():
    ens = ensemble_aleatorio()
    referencia = trajetoria([0.5, 0.5, 0.5])
    esperado = np.zeros((TEMPOS.size, 2))
    for k in range(TEMPOS.size):
        for j in range(2):
            quadrados = [(traj.probs[k, j] - referencia.probs[k, j]) ** 2 for traj in ens.trajectories]
            esperado[k, j] = np.sqrt(sum(quadrados) / len(quadrados))
    np.testing.assert_allclose(rmse_by_state(ens, referencia), esperado, rtol=1e-14)


def test_rmse_rejects_mismatched_grid():
    ens = ensemble_aleatorio()
    outra = ProbabilityTrajectory(np.array([0.0, 1.0]), np.array([[1.0, 0.0], [0.5, 0.5]]))
    with pytest.raises(ValueError, match="time grids differ"):
        rmse_by_state(ens, outra)
    with pytest.raises(ValueError):
        ReplicationEnsemble([trajetoria([1, 1, 1]), outra])
    with pytest.raises(ValueError):
        ReplicationEnsemble([])


def test_difference_and_composite_std():
    np.testing.assert_allclose(absolute_difference([0.2, 0.5], [0.5, 0.1]), [0.3, 0.4])
    np.testing.assert_allclose(composite_std([3.0, 0.0], [4.0, 0.0]), [5.0, 0.0])
    with pytest.raises(ValueError):
        composite_std([-0.1], [0.1])


def test_compare_ensembles():
    a = EnsembleStats(TEMPOS, np.full((3, 2), 0.5), np.full((3, 2), 0.3))
    b = EnsembleStats(TEMPOS, np.full((3, 2), 0.2), np.full((3, 2), 0.4))
    delta_p, delta_sigma = compare_ensembles(a, b)
    np.testing.assert_allclose(delta_p, 0.3)
    np.testing.assert_allclose(delta_sigma, 0.5)


def test_streaming_statistics_match_two_pass():
    ens = ensemble_aleatorio(n=25, seed=3)
    direto = ensemble_statistics(ens)
    streaming = ensemble_statistics(ens, streaming=True)
    np.testing.assert_allclose(streaming.mean, direto.mean, atol=1e-12)
    np.testing.assert_allclose(streaming.std, direto.std, atol=1e-12)


def test_single_replication_has_zero_std():
    ens = ReplicationEnsemble([trajetoria([1.0, 0.5, 0.2])])
    for streaming in (False, True):
        stats = ensemble_statistics(ens, streaming=streaming)
        np.testing.assert_array_equal(stats.std, np.zeros((3, 2)))
    _, r_desvio = reliability_statistics(ens, [0])
    np.testing.assert_array_equal(r_desvio, np.zeros(3))


def test_reliability_statistics_and_mean_trajectory():
    ens = ReplicationEnsemble([trajetoria([1.0, 0.6, 0.2]), trajetoria([1.0, 0.8, 0.4])])
    media, desvio = reliability_statistics(ens, [0])
    np.testing.assert_allclose(media, [1.0, 0.7, 0.3])
    np.testing.assert_allclose(desvio, [0.0, np.sqrt(0.02), np.sqrt(0.02)])
    np.testing.assert_allclose(mean_trajectory(ens).probs[:, 0], [1.0, 0.7, 0.3])


def test_replication_run_is_deterministic_and_ordered():
    def tarefa(seed):
        rng = np.random.default_rng(seed)
        return trajetoria(rng.uniform(size=TEMPOS.size))

    a = replication_run(tarefa, n=5, master_seed=11)
    b = replication_run(tarefa, n=5, master_seed=11, workers=3)
    assert a.seeds == b.seeds
    assert len(set(a.seeds)) == 5
    assert len(a.durations) == 5
    for x, y in zip(a.trajectories, b.trajectories):
        np.testing.assert_array_equal(x.probs, y.probs)
    assert replication_run(tarefa, n=5, master_seed=12).seeds != a.seeds


def test_replication_failure_names_index_and_seed():
    sementes = []

    def tarefa(seed):
        sementes.append(seed)
        if len(sementes) == 2:
            raise RuntimeError("boom")
        return trajetoria([1.0, 1.0, 1.0])

    with pytest.raises(ReplicationError) as erro:
        replication_run(tarefa, n=3, master_seed=0)
    assert erro.value.index == 1
    assert erro.value.seed == sementes[1]
    assert "boom" in str(erro.value)
    with pytest.raises(ValueError):
        replication_run(tarefa, n=0)


def test_summarize_over_time():
    valores = np.column_stack([np.arange(101.0), np.zeros(101)])
    resumo = summarize_over_time(valores, ["p0", "p1"])
    assert list(resumo.columns) == ["q05", "median", "mean", "q95"]
    assert resumo.loc["p0", "q05"] == pytest.approx(5.0)
    assert resumo.loc["p0", "median"] == pytest.approx(50.0)
    assert resumo.loc["p0", "q95"] == pytest.approx(95.0)
    assert resumo.loc["p1", "mean"] == 0.0
