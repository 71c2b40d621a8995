"""
Estatísticas de validação entre métodos ao longo de replicações.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from reliability.services.ode_service import ProbabilityTrajectory
from reliability.utils import derive_seed, progress

logger = logging.getLogger(__name__)

DEFAULT_REPLICATIONS = 60
SUMMARY_QUANTILES = (0.05, 0.5, 0.95)


class ReplicationError(RuntimeError):
    def __init__(self, index: int, seed: int, message: str):
        super().__init__(f"replication {index} (seed {seed}) failed: {message}")
        self.index = index
        self.seed = seed


def _check_same_grid(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape or not np.array_equal(a, b):
        raise ValueError(f"time grids differ ({a.size} vs {b.size} points)")


@dataclass
class ReplicationEnsemble:
    trajectories: list[ProbabilityTrajectory]
    seeds: list[int] = field(default_factory=list)
    durations: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.trajectories:
            raise ValueError("ensemble needs at least one replication")
        base = self.trajectories[0]
        for traj in self.trajectories[1:]:
            _check_same_grid(base.times, traj.times)
            if traj.state_count != base.state_count:
                raise ValueError("all replications must have the same state count")

    def __len__(self) -> int:
        return len(self.trajectories)

    @property
    def times(self) -> np.ndarray:
        return self.trajectories[0].times

    @property
    def state_count(self) -> int:
        return self.trajectories[0].state_count

    def stack(self) -> np.ndarray:
        """Matriz N × tempos × estados."""
        return np.stack([traj.probs for traj in self.trajectories])


@dataclass
class EnsembleStats:
    times: np.ndarray
    mean: np.ndarray
    std: np.ndarray


def rmse_by_state(ensemble: ReplicationEnsemble, reference: ProbabilityTrajectory) -> np.ndarray:
    """RMSE_j(t) = sqrt((1/N)·Σᵢ (p_jⁱ(t) − p_j*(t))²), matriz tempos × estados."""
    _check_same_grid(ensemble.times, reference.times)
    if reference.state_count != ensemble.state_count:
        raise ValueError("reference and ensemble have different state counts")
    erros = ensemble.stack() - reference.probs[None, :, :]
    return np.sqrt((erros**2).mean(axis=0))


def absolute_difference(mean_a, mean_b):
    return np.abs(np.asarray(mean_a, dtype=np.float64) - np.asarray(mean_b, dtype=np.float64))


def composite_std(std_a, std_b):
    a = np.asarray(std_a, dtype=np.float64)
    b = np.asarray(std_b, dtype=np.float64)
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("standard deviations must be >= 0")
    return np.hypot(a, b)


def _run_one(task, index: int, seed: int) -> tuple[ProbabilityTrajectory, float]:
    inicio = time.perf_counter()
    try:
        traj = task(seed)
    except Exception as exc:
        logger.exception("❌ Replicação %d (semente %d) falhou", index, seed)
        raise ReplicationError(index, seed, str(exc)) from exc
    return traj, time.perf_counter() - inicio


def replication_run(task, n: int = DEFAULT_REPLICATIONS, master_seed: int = 0,
                    workers: int = 1) -> ReplicationEnsemble:
    """
    Executa `task(seed)` N vezes com sementes derivadas de (master_seed, i).

    A ordem das replicações no ensemble segue o índice, mesmo com várias threads.
    """
    if n < 1:
        raise ValueError(f"replication count must be >= 1, got {n}")
    sementes = [derive_seed(master_seed, i) for i in range(n)]
    logger.info("🔁 %d replicações (semente mestre %d)", n, master_seed)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            resultados = list(progress(pool.map(_run_one, [task] * n, range(n), sementes), total=n, desc="replicações"))
    else:
        resultados = [_run_one(task, i, s) for i, s in progress(enumerate(sementes), total=n, desc="replicações")]
    trajetorias, duracoes = zip(*resultados)
    return ReplicationEnsemble(list(trajetorias), sementes, list(duracoes))


def ensemble_statistics(ensemble: ReplicationEnsemble, streaming: bool = False) -> EnsembleStats:
    """
    Média e desvio padrão (divisor N−1) por (tempo, estado). Com uma única
    replicação o desvio é zero.
    """
    if streaming:
        # Welford
        media = np.zeros_like(ensemble.trajectories[0].probs)
        m2 = np.zeros_like(media)
        for k, traj in enumerate(ensemble.trajectories, start=1):
            delta = traj.probs - media
            media = media + delta / k
            m2 = m2 + delta * (traj.probs - media)
        n = len(ensemble)
        desvio = np.sqrt(m2 / (n - 1)) if n > 1 else np.zeros_like(media)
        return EnsembleStats(ensemble.times, media, desvio)

    pilha = ensemble.stack()
    media = pilha.mean(axis=0)
    desvio = pilha.std(axis=0, ddof=1) if len(ensemble) > 1 else np.zeros_like(media)
    return EnsembleStats(ensemble.times, media, desvio)


def compare_ensembles(a: EnsembleStats, b: EnsembleStats) -> tuple[np.ndarray, np.ndarray]:
    """(|média_a − média_b|, sqrt(σ_a² + σ_b²)) por (tempo, estado)."""
    _check_same_grid(a.times, b.times)
    return absolute_difference(a.mean, b.mean), composite_std(a.std, b.std)


def summarize_over_time(values, labels=None) -> pd.DataFrame:
    """Quantil de 5%, mediana, média e quantil de 95% de uma métrica tempos × estados."""
    tabela = pd.DataFrame(np.asarray(values, dtype=np.float64), columns=labels)
    quantis = tabela.quantile(list(SUMMARY_QUANTILES))
    return pd.DataFrame(
        {
            "q05": quantis.loc[0.05],
            "median": quantis.loc[0.5],
            "mean": tabela.mean(),
            "q95": quantis.loc[0.95],
        }
    )


def mean_trajectory(ensemble: ReplicationEnsemble) -> ProbabilityTrajectory:
    return ProbabilityTrajectory(ensemble.times, ensemble_statistics(ensemble).mean)


def reliability_statistics(ensemble: ReplicationEnsemble, up_states) -> tuple[np.ndarray, np.ndarray]:
    """Média e desvio (N−1) da confiabilidade de cada replicação por tempo."""
    r = np.stack([traj.reliability(up_states) for traj in ensemble.trajectories])
    desvio = r.std(axis=0, ddof=1) if len(ensemble) > 1 else np.zeros(r.shape[1])
    return r.mean(axis=0), desvio
