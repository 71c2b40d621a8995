"""
Simulação de Monte Carlo de trajetórias de CTMC não homogêneas.

Os tempos de permanência são sorteados por inversão do risco acumulado:
para saídas c·λ₀·α·t^(α−1) com α comum, ∫ₛᵗ λ(u)du = K·(t^α − s^α), com
K = Σ c·λ₀, e a saída é t = (s^α + E/K)^(1/α) para E ~ Exp(1).
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from reliability.services.markov_service import (
    BernoulliBeta,
    MultiStateModel,
    Simplex,
    sample_beta,
    sample_initial_state,
    sample_initial_states,
)
from reliability.services.metrics_service import replication_run
from reliability.services.ode_service import ProbabilityTrajectory
from reliability.utils import default_workers, make_rng, progress

logger = logging.getLogger(__name__)

DEFAULT_PATHS = 100_000
BLOCK_SIZE = 4096


@dataclass(frozen=True)
class SamplePath:
    jumps: tuple[tuple[float, int], ...]

    def state_at(self, t: float) -> int:
        estado = self.jumps[0][1]
        for tempo, novo in self.jumps:
            if tempo > t:
                break
            estado = novo
        return estado


@dataclass(frozen=True)
class _ExitTable:
    """Saídas de cada estado em forma vetorizável."""
    total: np.ndarray       # K por estado (0 = absorvente)
    shape: np.ndarray       # α comum das saídas
    cumulative: np.ndarray  # probabilidade acumulada de destino, linha por estado


def _exit_table(model: MultiStateModel) -> _ExitTable:
    n = model.state_count
    total = np.zeros(n)
    shape = np.ones(n)
    cumulative = np.zeros((n, n))
    for estado in range(n):
        saidas = model.rates.exits(estado)
        if not saidas:
            continue
        pesos = np.zeros(n)
        for tr in saidas:
            pesos[tr.target] += tr.hazard_coefficient
        total[estado] = pesos.sum()
        shape[estado] = saidas[0].shape
        # α comum: as razões de destino não dependem do tempo
        cumulative[estado] = np.cumsum(pesos / total[estado])
        ultimo = np.flatnonzero(pesos)[-1]
        cumulative[estado, ultimo:] = 1.0
    return _ExitTable(total, shape, cumulative)


def sample_sojourn(model: MultiStateModel, state: int, entry_time: float, rng: np.random.Generator,
                   draw: float | None = None) -> float | None:
    """
    Instante de saída do estado `state`, ou None quando não há saída antes do
    fim da missão (inclusive estados absorventes).
    """
    if not 0 <= entry_time <= model.mission_time:
        raise ValueError(f"entry time {entry_time} outside [0, {model.mission_time}]")
    saidas = model.rates.exits(state)
    if not saidas:
        return None
    total = sum(tr.hazard_coefficient for tr in saidas)
    alpha = saidas[0].shape
    e = rng.exponential() if draw is None else float(draw)
    saida = (entry_time**alpha + e / total) ** (1.0 / alpha)
    if saida > model.mission_time:
        return None
    return float(saida)


def simulate_path(model: MultiStateModel, rng: np.random.Generator) -> SamplePath:
    tabela = _exit_table(model)
    estado = sample_initial_state(model.initial, rng)
    tempo = 0.0
    saltos = [(0.0, estado)]
    while True:
        saida = sample_sojourn(model, estado, tempo, rng)
        if saida is None:
            break
        destino = int(np.searchsorted(tabela.cumulative[estado], rng.random(), side="right"))
        tempo, estado = saida, destino
        saltos.append((tempo, estado))
    return SamplePath(tuple(saltos))


def _simulate_block(model: MultiStateModel, tabela: _ExitTable, grid: np.ndarray, n: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Contagem (grade × estado) de ocupação para `n` trajetórias independentes."""
    estados = sample_initial_states(model.initial, rng, n)
    entrada = np.zeros(n)
    ocupacao = np.full((n, grid.size), -1, dtype=np.int64)
    ativos = np.arange(n)

    while ativos.size:
        atual = estados[ativos]
        inicio = entrada[ativos]
        k = tabela.total[atual]
        alpha = tabela.shape[atual]
        e = rng.exponential(size=ativos.size)
        saida = np.full(ativos.size, np.inf)
        vivos = k > 0
        saida[vivos] = (inicio[vivos] ** alpha[vivos] + e[vivos] / k[vivos]) ** (1.0 / alpha[vivos])
        saida[saida > model.mission_time] = np.inf

        cobre = (grid[None, :] >= inicio[:, None]) & (grid[None, :] < saida[:, None])
        linhas = ocupacao[ativos]
        linhas[cobre] = np.broadcast_to(atual[:, None], cobre.shape)[cobre]
        ocupacao[ativos] = linhas

        segue = np.isfinite(saida)
        ativos, atual, saida = ativos[segue], atual[segue], saida[segue]
        u = rng.random(ativos.size)
        destinos = (tabela.cumulative[atual] <= u[:, None]).sum(axis=1)
        estados[ativos] = destinos
        entrada[ativos] = saida

    return np.stack([(ocupacao == j).sum(axis=0) for j in range(model.state_count)], axis=1)


def estimate_state_probabilities(model: MultiStateModel, n_paths: int, grid, seed: int,
                                 workers: int | None = None) -> ProbabilityTrajectory:
    """
    Frequência empírica de ocupação em cada tempo da grade.

    As trajetórias são agrupadas em blocos de tamanho fixo; o bloco b usa o
    subfluxo (seed, b), então o resultado não depende do número de threads.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    grid = np.asarray(grid, dtype=np.float64).reshape(-1)
    if np.any(grid < 0) or np.any(grid > model.mission_time):
        raise ValueError(f"grid must lie within [0, {model.mission_time}]")
    tabela = _exit_table(model)
    tamanhos = [min(BLOCK_SIZE, n_paths - inicio) for inicio in range(0, n_paths, BLOCK_SIZE)]
    workers = workers or default_workers()

    def rodar_bloco(b: int) -> np.ndarray:
        return _simulate_block(model, tabela, grid, tamanhos[b], make_rng(seed, b))

    with ThreadPoolExecutor(max_workers=workers) as pool:
        contagens = list(progress(pool.map(rodar_bloco, range(len(tamanhos))), total=len(tamanhos), desc="MC"))
    total = np.sum(contagens, axis=0)
    logger.info("🎲 MC: %d trajetórias em %d blocos (%d threads)", n_paths, len(tamanhos), workers)
    return ProbabilityTrajectory(grid, total / n_paths)


def replication_task(model: MultiStateModel, n_paths: int, grid, epistemic: bool = False,
                     workers: int | None = None):
    """
    Tarefa semeada para o harness de replicações.

    Com `epistemic=True` e condição Bernoulli-Beta, cada replicação sorteia um
    único ρ₀ e simula todas as trajetórias a partir de [ρ₀, 1−ρ₀]; a incerteza
    epistêmica aparece entre replicações, não dentro delas.
    """
    def tarefa(seed: int) -> ProbabilityTrajectory:
        modelo = model
        if epistemic and isinstance(model.initial, BernoulliBeta):
            ic = model.initial
            rho = float(sample_beta(ic, make_rng(seed)))
            vetor = [0.0] * model.state_count
            vetor[ic.high_state] = rho
            vetor[ic.low_state] = 1.0 - rho
            modelo = replace(model, initial=Simplex(tuple(vetor)))
        return estimate_state_probabilities(modelo, n_paths, grid, seed, workers)

    return tarefa


def simulate_replications(model: MultiStateModel, n_replications: int, n_paths: int, grid, seed: int,
                          epistemic: bool = False, workers: int | None = None):
    return replication_run(replication_task(model, n_paths, grid, epistemic, workers), n_replications, seed)
