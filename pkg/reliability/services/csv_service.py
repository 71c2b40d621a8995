"""
Leitura e escrita dos artefatos CSV e do manifesto de execução.

Todos os reais saem com 17 dígitos significativos e são relidos com
`float_precision="round_trip"`, então ler e reescrever preserva os bits.
"""
import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from reliability import __version__
from reliability.services.markov_service import MeasurementSet
from reliability.services.metrics_service import ReplicationEnsemble
from reliability.services.ode_service import ProbabilityTrajectory
from reliability.services.pigan_service import PredictionStats

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def write_frame(path, df: pd.DataFrame) -> Path:
    caminho = Path(path)
    caminho.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(caminho, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("💾 %s (%d linhas)", caminho, len(df))
    return caminho


def read_table(path) -> pd.DataFrame:
    caminho = Path(path)
    if not caminho.is_file():
        raise FileNotFoundError(f"CSV file '{path}' does not exist")
    return pd.read_csv(caminho, float_precision="round_trip")


def _state_columns(df: pd.DataFrame, prefixo: str, sufixo: str = "") -> list[str]:
    colunas = []
    j = 0
    while f"{prefixo}{j}{sufixo}" in df.columns:
        colunas.append(f"{prefixo}{j}{sufixo}")
        j += 1
    if not colunas:
        raise ValueError(f"no '{prefixo}0{sufixo}' column found")
    return colunas


# ---------------------- TRAJETÓRIAS ----------------------

def trajectory_frame(traj: ProbabilityTrajectory, up_states) -> pd.DataFrame:
    df = pd.DataFrame({"t": traj.times})
    for j in range(traj.state_count):
        df[f"p{j}"] = traj.probs[:, j]
    df["R"] = traj.reliability(up_states)
    return df


def write_trajectory(path, traj: ProbabilityTrajectory, up_states) -> Path:
    return write_frame(path, trajectory_frame(traj, up_states))


def read_trajectory(path) -> ProbabilityTrajectory:
    df = read_table(path)
    return ProbabilityTrajectory(df["t"].to_numpy(), df[_state_columns(df, "p")].to_numpy())


def write_ensemble(directory, ensemble: ReplicationEnsemble, up_states) -> list[Path]:
    pasta = Path(directory)
    return [
        write_trajectory(pasta / f"rep_{i:03d}.csv", traj, up_states)
        for i, traj in enumerate(ensemble.trajectories)
    ]


def read_ensemble(directory) -> ReplicationEnsemble:
    arquivos = sorted(Path(directory).glob("*.csv"))
    if not arquivos:
        raise FileNotFoundError(f"no trajectory CSV files in '{directory}'")
    return ReplicationEnsemble([read_trajectory(a) for a in arquivos])


def write_mc_summary(path, ensemble: ReplicationEnsemble) -> Path:
    partes = []
    for i, traj in enumerate(ensemble.trajectories):
        df = pd.DataFrame({"replication": i, "seed": ensemble.seeds[i] if ensemble.seeds else 0, "t": traj.times})
        for j in range(traj.state_count):
            df[f"p{j}"] = traj.probs[:, j]
        partes.append(df)
    return write_frame(path, pd.concat(partes, ignore_index=True))


# ---------------------- ESTATÍSTICAS ----------------------

def stats_frame(stats: PredictionStats) -> pd.DataFrame:
    df = pd.DataFrame({"t": stats.times})
    for j in range(stats.mean.shape[1]):
        df[f"p{j}_mean"] = stats.mean[:, j]
        df[f"p{j}_std"] = stats.std[:, j]
    df["R_mean"] = stats.reliability_mean
    df["R_std"] = stats.reliability_std
    return df


def write_stats(path, stats: PredictionStats) -> Path:
    return write_frame(path, stats_frame(stats))


def read_stats(path) -> PredictionStats:
    df = read_table(path)
    return PredictionStats(
        df["t"].to_numpy(),
        df[_state_columns(df, "p", "_mean")].to_numpy(),
        df[_state_columns(df, "p", "_std")].to_numpy(),
        df["R_mean"].to_numpy(),
        df["R_std"].to_numpy(),
    )


def write_bands(path, stats: PredictionStats, baseline, width: float = 2.0) -> Path:
    inferior, superior = stats.band(width)
    df = pd.DataFrame(
        {
            "t": stats.times,
            "R_mean": stats.reliability_mean,
            "R_std": stats.reliability_std,
            "R_lower": inferior,
            "R_upper": superior,
            "R_baseline": np.asarray(baseline, dtype=np.float64),
        }
    )
    return write_frame(path, df)


# ---------------------- MÉTRICAS ----------------------

def _long_frame(times, **tabelas) -> pd.DataFrame:
    primeira = next(iter(tabelas.values()))
    n_tempos, n_estados = primeira.shape
    df = pd.DataFrame(
        {
            "t": np.repeat(np.asarray(times, dtype=np.float64), n_estados),
            "state": np.tile(np.arange(n_estados), n_tempos),
        }
    )
    for nome, tabela in tabelas.items():
        df[nome] = np.asarray(tabela, dtype=np.float64).reshape(-1)
    return df


def write_rmse(path, times, rmse) -> Path:
    return write_frame(path, _long_frame(times, rmse=rmse))


def write_deltas(path, times, delta_p, delta_sigma) -> Path:
    return write_frame(path, _long_frame(times, delta_p=delta_p, delta_sigma=delta_sigma))


def write_summary(path, linhas: list[dict]) -> Path:
    return write_frame(path, pd.DataFrame(linhas))


# ---------------------- MEDIÇÕES ----------------------

def write_measurements(path, data: MeasurementSet) -> Path:
    df = pd.DataFrame({"t": data.times})
    for j in range(data.state_count):
        df[f"y{j}"] = data.values[:, j]
    return write_frame(path, df)


def read_measurements(path) -> MeasurementSet:
    df = read_table(path)
    return MeasurementSet(df["t"].to_numpy(), df[_state_columns(df, "y")].to_numpy())


# ---------------------- MANIFESTO ----------------------

@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    version: str = __version__
    status: str = "running"
    durations: dict[str, float] = field(default_factory=dict)
    # tempos ficam só aqui: os CSVs não carregam relógio
    replication_durations: dict[str, list[float]] = field(default_factory=dict)
    efficiency: dict = field(default_factory=dict)
    outputs: list[str] = field(default_factory=list)
    seeds: dict[str, int] = field(default_factory=dict)
    error: str | None = None

    def add(self, *paths):
        for caminho in paths:
            self.outputs.append(str(caminho))


def write_manifest(path, manifest: RunManifest) -> Path:
    """Grava o manifesto de forma atômica (arquivo temporário + os.replace)."""
    caminho = Path(path)
    caminho.parent.mkdir(parents=True, exist_ok=True)
    fd, temporario = tempfile.mkstemp(dir=caminho.parent, prefix=".manifest-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(asdict(manifest), f, ensure_ascii=False, indent=2)
        os.replace(temporario, caminho)
    except BaseException:
        Path(temporario).unlink(missing_ok=True)
        raise
    logger.info("🧾 Manifesto gravado em %s (%s)", caminho, manifest.status)
    return caminho


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
