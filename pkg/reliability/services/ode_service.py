"""
Solução de referência das equações progressivas de Kolmogorov p'(t) = p(t)·Q(t).
"""
import logging
from dataclasses import dataclass

import numpy as np

from reliability.services.markov_service import (
    BernoulliBeta,
    MultiStateModel,
    initial_vector,
    rate_matrix_at,
)

logger = logging.getLogger(__name__)

DEFAULT_STEP = 0.01
TRAJECTORY_TOL = 1e-9


@dataclass
class ProbabilityTrajectory:
    times: np.ndarray
    probs: np.ndarray
    extrapolated: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2 or self.probs.shape[0] != self.times.shape[0]:
            raise ValueError(f"expected one probability vector per time, got {self.probs.shape}")

    @property
    def state_count(self) -> int:
        return int(self.probs.shape[1])

    def reliability(self, up_states) -> np.ndarray:
        return self.probs[:, sorted(up_states)].sum(axis=1)

    def is_valid(self, tol: float = TRAJECTORY_TOL) -> bool:
        dentro = np.all(self.probs >= -tol) and np.all(self.probs <= 1 + tol)
        return bool(dentro and np.all(np.abs(self.probs.sum(axis=1) - 1.0) <= tol))


def reliability_from_probs(p, up_states) -> float:
    """R = Σ_{j∈U} p_j."""
    p = np.asarray(p, dtype=np.float64)
    return float(sum(p[j] for j in sorted(up_states)))


def _rk4_step(model: MultiStateModel, t: float, p: np.ndarray, h: float) -> np.ndarray:
    # sistema linear linha-vetor: f(t, p) = p·Q(t)
    k1 = p @ rate_matrix_at(model, t)
    k2 = (p + 0.5 * h * k1) @ rate_matrix_at(model, t + 0.5 * h)
    k3 = (p + 0.5 * h * k2) @ rate_matrix_at(model, t + 0.5 * h)
    k4 = (p + h * k3) @ rate_matrix_at(model, t + h)
    return p + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def solve_from_vector(model: MultiStateModel, s0, grid, step: float = DEFAULT_STEP) -> ProbabilityTrajectory:
    """
    RK4 de passo fixo a partir de um vetor inicial explícito.

    s0 é o estado em t = 0. Se a grade começa depois de 0, a integração parte
    de 0 mesmo assim e só os tempos pedidos são devolvidos. Entre dois pontos
    o intervalo é dividido em ceil(Δ/step) subpassos iguais, então os tempos
    da grade são atingidos exatamente.
    """
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if grid.size == 0 or grid[0] < 0.0:
        raise ValueError("grid must be non-empty and start at t >= 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if grid.size > 1 and step > np.diff(grid).min() + 1e-12:
        raise ValueError(f"step {step} exceeds the minimum grid spacing {np.diff(grid).min()}")

    desde_zero = grid[0] == 0.0
    pontos = grid if desde_zero else np.concatenate([[0.0], grid])
    p = np.asarray(s0, dtype=np.float64).copy()
    saida = np.empty((pontos.size, p.size), dtype=np.float64)
    saida[0] = p
    for k in range(1, pontos.size):
        t0, t1 = pontos[k - 1], pontos[k]
        subpassos = max(1, int(np.ceil((t1 - t0) / step - 1e-9)))
        h = (t1 - t0) / subpassos
        for i in range(subpassos):
            p = _rk4_step(model, t0 + i * h, p, h)
        saida[k] = p
    return ProbabilityTrajectory(grid, saida if desde_zero else saida[1:])


def solve_forward_kolmogorov(model: MultiStateModel, grid, step: float = DEFAULT_STEP) -> ProbabilityTrajectory:
    if isinstance(model.initial, BernoulliBeta):
        raise ValueError(
            "Bernoulli-Beta initial condition is distributional; sample initial vectors "
            "or use solve_from_vector with mean_initial_vector"
        )
    s0 = initial_vector(model.initial, model.state_count)
    logger.info("🧮 RK4: %d pontos na grade, passo %.4g", len(np.atleast_1d(grid)), step)
    return solve_from_vector(model, s0, grid, step)


def analytic_dual_processor(t) -> np.ndarray:
    """
    Solução fechada do sistema de dois processadores (fatores integrantes no
    sistema triangular):

        p0 = e^{-0.02t²}
        p1 = 1.8·(e^{-0.01t²} − e^{-0.02t²})
        p2 = 0.81·(1 − e^{-0.01t²})²
        p3 = 1 − p0 − p1 − p2

    Aceita escalar (retorna vetor de 4) ou vetor de tempos (retorna matriz T×4).
    """
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise ValueError("time must be >= 0")
    e1 = np.exp(-0.01 * t_arr**2)
    e2 = np.exp(-0.02 * t_arr**2)
    p0 = e2
    p1 = 1.8 * (e1 - e2)
    p2 = 0.81 * (1.0 - e1) ** 2
    p3 = 1.0 - p0 - p1 - p2
    return np.stack([p0, p1, p2, p3], axis=-1)


def analytic_trajectory(grid) -> ProbabilityTrajectory:
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    return ProbabilityTrajectory(grid, analytic_dual_processor(grid))
