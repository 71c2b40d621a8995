import json

import numpy as np
import pytest

from reliability.services import csv_service
from reliability.services.csv_service import RunManifest
from reliability.services.markov_service import MeasurementSet
from reliability.services.metrics_service import ReplicationEnsemble
from reliability.services.ode_service import ProbabilityTrajectory, analytic_trajectory
from reliability.services.pigan_service import PredictionStats


def test_trajectory_roundtrip_is_bit_exact(tmp_path):
    traj = analytic_trajectory(np.linspace(0, 30, 61))
    caminho = csv_service.write_trajectory(tmp_path / "ode.csv", traj, [0, 1])
    relida = csv_service.read_trajectory(caminho)
    np.testing.assert_array_equal(relida.times, traj.times)
    np.testing.assert_array_equal(relida.probs, traj.probs)
    cabecalho = caminho.read_text(encoding="utf-8").splitlines()[0]
    assert cabecalho == "t,p0,p1,p2,p3,R"


def test_rewriting_a_csv_preserves_bytes(tmp_path):
    traj = analytic_trajectory(np.arange(31.0))
    primeiro = csv_service.write_trajectory(tmp_path / "a.csv", traj, [0, 1])
    segundo = csv_service.write_trajectory(tmp_path / "b.csv", csv_service.read_trajectory(primeiro), [0, 1])
    assert primeiro.read_bytes() == segundo.read_bytes()


def test_stats_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    stats = PredictionStats(np.arange(3.0), rng.uniform(size=(3, 4)), rng.uniform(size=(3, 4)),
                            rng.uniform(size=3), rng.uniform(size=3))
    relida = csv_service.read_stats(csv_service.write_stats(tmp_path / "stats.csv", stats))
    for campo in ("times", "mean", "std", "reliability_mean", "reliability_std"):
        np.testing.assert_array_equal(getattr(relida, campo), getattr(stats, campo))
    colunas = (tmp_path / "stats.csv").read_text(encoding="utf-8").splitlines()[0].split(",")
    assert colunas[:3] == ["t", "p0_mean", "p0_std"]
    assert colunas[-2:] == ["R_mean", "R_std"]


def test_bands(tmp_path):
    stats = PredictionStats(np.array([0.0, 1.0]), np.zeros((2, 2)), np.zeros((2, 2)),
                            np.array([1.0, 0.8]), np.array([0.0, 0.05]))
    df = csv_service.read_table(csv_service.write_bands(tmp_path / "bands.csv", stats, [1.0, 0.85]))
    assert list(df.columns) == ["t", "R_mean", "R_std", "R_lower", "R_upper", "R_baseline"]
    np.testing.assert_allclose(df["R_lower"], [1.0, 0.7])
    np.testing.assert_allclose(df["R_upper"], [1.0, 0.9])


def test_ensemble_directory_roundtrip(tmp_path):
    trajs = [analytic_trajectory(np.arange(5.0)) for _ in range(3)]
    ens = ReplicationEnsemble(trajs, seeds=[1, 2, 3], durations=[0.1, 0.2, 0.3])
    caminhos = csv_service.write_ensemble(tmp_path / "reps", ens, [0, 1])
    assert [c.name for c in caminhos] == ["rep_000.csv", "rep_001.csv", "rep_002.csv"]
    relido = csv_service.read_ensemble(tmp_path / "reps")
    assert len(relido) == 3
    np.testing.assert_array_equal(relido.stack(), ens.stack())
    with pytest.raises(FileNotFoundError):
        csv_service.read_ensemble(tmp_path / "vazio")


def test_long_format_metrics(tmp_path):
    rmse = np.array([[0.0, 0.1], [0.2, 0.3]])
    df = csv_service.read_table(csv_service.write_rmse(tmp_path / "rmse.csv", [0.0, 5.0], rmse))
    assert list(df.columns) == ["t", "state", "rmse"]
    assert df["t"].tolist() == [0.0, 0.0, 5.0, 5.0]
    assert df["state"].tolist() == [0, 1, 0, 1]
    assert df["rmse"].tolist() == [0.0, 0.1, 0.2, 0.3]
    deltas = csv_service.read_table(csv_service.write_deltas(tmp_path / "d.csv", [0.0, 5.0], rmse, rmse * 2))
    assert list(deltas.columns) == ["t", "state", "delta_p", "delta_sigma"]


def test_mc_summary_has_no_timings(tmp_path):
    traj = ProbabilityTrajectory(np.array([0.0, 1.0]), np.array([[1.0, 0.0], [0.5, 0.5]]))
    ens = ReplicationEnsemble([traj, traj], seeds=[10, 20], durations=[1.5, 2.5])
    resumo = csv_service.read_table(csv_service.write_mc_summary(tmp_path / "mc.csv", ens))
    assert list(resumo.columns) == ["replication", "seed", "t", "p0", "p1"]
    assert resumo["seed"].tolist() == [10, 10, 20, 20]
    assert "duration" not in " ".join(resumo.columns)


def test_measurements_roundtrip(tmp_path):
    dados = MeasurementSet(np.array([0.0, 0.0, 4.0]), np.array([[0.7, 0.3], [0.9, 0.1], [0.5, 0.5]]))
    relidos = csv_service.read_measurements(csv_service.write_measurements(tmp_path / "m.csv", dados))
    np.testing.assert_array_equal(relidos.times, dados.times)
    np.testing.assert_array_equal(relidos.values, dados.values)
    assert not relidos.initial_entry


def test_missing_csv(tmp_path):
    with pytest.raises(FileNotFoundError):
        csv_service.read_trajectory(tmp_path / "nada.csv")


def test_manifest_is_written_atomically(tmp_path):
    manifesto = RunManifest("run ode", {"method": {"name": "ode"}}, seed=3)
    manifesto.add(tmp_path / "trajectory_ode.csv")
    manifesto.durations["ode"] = 0.25
    manifesto.status = "ok"
    caminho = csv_service.write_manifest(tmp_path / "manifest.json", manifesto)
    assert [p.name for p in tmp_path.iterdir()] == ["manifest.json"]
    dados = csv_service.read_manifest(caminho)
    assert dados["status"] == "ok"
    assert dados["seed"] == 3
    assert dados["durations"] == {"ode": 0.25}
    assert dados["outputs"] == [str(tmp_path / "trajectory_ode.csv")]
    assert json.loads(caminho.read_text(encoding="utf-8"))["command"] == "run ode"
