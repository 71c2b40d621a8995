"""
Modelos de confiabilidade multiestado governados por cadeias de Markov de tempo
contínuo não homogêneas.

As taxas de transição ficam restritas à família Weibull escalonada
c·λ₀·α·t^(α−1), que admite inversão do risco acumulado em forma fechada.
"""
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12
SIMPLEX_SUM_TOL = 1e-12
MEASUREMENT_SUM_TOL = 1e-6


class GeneratorViolation(ValueError):
    pass


class MeasurementError(ValueError):
    pass


def weibull_transition_rate(scale: float, shape: float, t: float) -> float:
    """Taxa de risco Weibull λ₀·α·t^(α−1)."""
    if scale < 0:
        raise ValueError(f"rate scale must be >= 0, got {scale}")
    if shape <= 0:
        raise ValueError(f"shape must be > 0, got {shape}")
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    if t == 0 and shape < 1:
        raise ValueError(f"hazard is singular at t=0 for shape {shape} < 1")
    if shape == 1:
        return float(scale)
    return float(scale * shape * t ** (shape - 1))


@dataclass(frozen=True)
class StateSpace:
    count: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.count < 2:
            raise ValueError(f"state space needs at least 2 states, got {self.count}")
        if self.labels is not None and len(self.labels) != self.count:
            raise ValueError(f"expected {self.count} labels, got {len(self.labels)}")

    @property
    def indices(self) -> range:
        return range(self.count)


@dataclass(frozen=True)
class Transition:
    """
    Uma transição source → target com taxa c·λ₀·α·t^(α−1).

    `coefficient` é o multiplicador adimensional c (probabilidade de ramo vezes
    o número de componentes que podem disparar a transição).
    """
    source: int
    target: int
    coefficient: float
    scale: float
    shape: float

    def __post_init__(self):
        if self.source == self.target:
            raise ValueError(f"self-transition {self.source}->{self.target} is not allowed")
        if self.coefficient < 0 or self.scale < 0:
            raise ValueError(f"transition {self.source}->{self.target} has a negative rate")
        if self.shape <= 0:
            raise ValueError(f"transition {self.source}->{self.target} needs shape > 0")

    @property
    def hazard_coefficient(self) -> float:
        # ∫ c·λ₀·α·u^(α−1) du = c·λ₀·(t^α − s^α)
        return self.coefficient * self.scale

    def rate(self, t: float) -> float:
        return self.coefficient * weibull_transition_rate(self.scale, self.shape, t)


@dataclass(frozen=True)
class TransitionRateModel:
    transitions: tuple[Transition, ...]

    def exits(self, state: int) -> tuple[Transition, ...]:
        return tuple(tr for tr in self.transitions if tr.source == state and tr.hazard_coefficient > 0)


@dataclass(frozen=True)
class Deterministic:
    state: int


@dataclass(frozen=True)
class Simplex:
    probabilities: tuple[float, ...]

    def __post_init__(self):
        vetor = np.asarray(self.probabilities, dtype=np.float64)
        if np.any(vetor < 0) or np.any(vetor > 1):
            raise ValueError("simplex entries must lie in [0, 1]")
        if abs(vetor.sum() - 1.0) > SIMPLEX_SUM_TOL:
            raise ValueError(f"simplex entries must sum to 1, got {vetor.sum()!r}")


@dataclass(frozen=True)
class BernoulliBeta:
    alpha: float
    beta: float
    high_state: int
    low_state: int

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("Beta shape parameters must be > 0")
        if self.high_state == self.low_state:
            raise ValueError("high and low states must differ")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


InitialCondition = Deterministic | Simplex | BernoulliBeta


@dataclass(frozen=True)
class MultiStateModel:
    states: StateSpace
    rates: TransitionRateModel
    initial: InitialCondition
    up_states: frozenset[int]
    mission_time: float

    def __post_init__(self):
        validos = set(self.states.indices)
        if not set(self.up_states) <= validos:
            raise ValueError(f"up-states {sorted(self.up_states)} are not all valid state indices")
        if self.mission_time <= 0:
            raise ValueError(f"mission time must be > 0, got {self.mission_time}")
        for tr in self.rates.transitions:
            if tr.source not in validos or tr.target not in validos:
                raise ValueError(f"transition {tr.source}->{tr.target} references an unknown state")
        for estado in self.states.indices:
            formas = {tr.shape for tr in self.rates.exits(estado)}
            if len(formas) > 1:
                raise ValueError(f"all exits from state {estado} must share one shape, got {sorted(formas)}")
        self._check_initial()

    def _check_initial(self):
        ic = self.initial
        n = self.states.count
        if isinstance(ic, Deterministic) and not 0 <= ic.state < n:
            raise ValueError(f"initial state {ic.state} out of range")
        if isinstance(ic, Simplex) and len(ic.probabilities) != n:
            raise ValueError(f"initial vector needs {n} entries, got {len(ic.probabilities)}")
        if isinstance(ic, BernoulliBeta) and not (0 <= ic.high_state < n and 0 <= ic.low_state < n):
            raise ValueError("Bernoulli-Beta states out of range")

    @property
    def state_count(self) -> int:
        return self.states.count


def rate_matrix_at(model: MultiStateModel, t: float) -> np.ndarray:
    if t < 0:
        raise ValueError(f"time must be >= 0, got {t}")
    n = model.state_count
    matriz = np.zeros((n, n), dtype=np.float64)
    for tr in model.rates.transitions:
        matriz[tr.source, tr.target] += tr.rate(t)
    np.fill_diagonal(matriz, 0.0)
    np.fill_diagonal(matriz, -matriz.sum(axis=1))
    return matriz


def rate_matrices(model: MultiStateModel, times) -> np.ndarray:
    return np.stack([rate_matrix_at(model, float(t)) for t in np.asarray(times, dtype=np.float64)])


@dataclass(frozen=True)
class GeneratorReport:
    ok: bool
    violation: str | None = None
    location: tuple[int, ...] | None = None


def validate_generator(matrix) -> GeneratorReport:
    """
    Confere a estrutura de gerador: fora da diagonal ≥ 0 e linhas somando 0.
    Reporta a primeira entrada/linha problemática.
    """
    matriz = np.asarray(matrix, dtype=np.float64)
    if matriz.ndim != 2 or matriz.shape[0] != matriz.shape[1]:
        raise GeneratorViolation(f"generator must be square, got shape {matriz.shape}")
    n = matriz.shape[0]
    for i in range(n):
        for j in range(n):
            if i != j and matriz[i, j] < 0:
                return GeneratorReport(False, "negative off-diagonal", (i, j))
        if abs(matriz[i].sum()) > ROW_SUM_TOL:
            return GeneratorReport(False, "row sum nonzero", (i,))
    return GeneratorReport(True)


def dual_processor_model() -> MultiStateModel:
    """
    Sistema computacional com dois processadores (4 estados, taxas Weibull α=2).

    c₂ = 0.9 (falha detectada), c₁ = 0.9 (desligamento seguro), λ₀ = 0.01.
    Do estado 0 qualquer um dos dois processadores pode falhar, daí o fator 2.
    """
    scale, shape = 0.01, 2.0
    # 2·c₂, 2·(1 − c₂), c₁, 1 − c₁
    transicoes = (
        Transition(0, 1, 1.8, scale, shape),
        Transition(0, 3, 0.2, scale, shape),
        Transition(1, 2, 0.9, scale, shape),
        Transition(1, 3, 0.1, scale, shape),
    )
    return MultiStateModel(
        states=StateSpace(4, ("dois processadores", "modo degradado", "desligamento seguro", "falha insegura")),
        rates=TransitionRateModel(transicoes),
        initial=Deterministic(0),
        up_states=frozenset({0, 1}),
        mission_time=30.0,
    )


def initial_vector(ic: InitialCondition, state_count: int) -> np.ndarray:
    if isinstance(ic, Deterministic):
        vetor = np.zeros(state_count, dtype=np.float64)
        vetor[ic.state] = 1.0
        return vetor
    if isinstance(ic, Simplex):
        return np.asarray(ic.probabilities, dtype=np.float64)
    raise ValueError("Bernoulli-Beta initial condition is distributional; sample or use mean_initial_vector")


def mean_initial_vector(ic: InitialCondition, state_count: int) -> np.ndarray:
    if isinstance(ic, BernoulliBeta):
        vetor = np.zeros(state_count, dtype=np.float64)
        vetor[ic.high_state] = ic.mean
        vetor[ic.low_state] = 1.0 - ic.mean
        return vetor
    return initial_vector(ic, state_count)


def initial_support(ic: InitialCondition, state_count: int) -> tuple[int, ...]:
    """Estados que podem ter massa em t = 0."""
    if isinstance(ic, BernoulliBeta):
        return tuple(sorted({ic.high_state, ic.low_state}))
    return tuple(int(j) for j in np.flatnonzero(initial_vector(ic, state_count) > 0))


def sample_beta(ic: BernoulliBeta, rng: np.random.Generator, size=None):
    return rng.beta(ic.alpha, ic.beta, size=size)


def sample_initial_state(ic: InitialCondition, rng: np.random.Generator) -> int:
    if isinstance(ic, Deterministic):
        return ic.state
    if isinstance(ic, Simplex):
        return int(rng.choice(len(ic.probabilities), p=np.asarray(ic.probabilities)))
    rho = sample_beta(ic, rng)
    return ic.high_state if rng.random() < rho else ic.low_state


def sample_initial_states(ic: InitialCondition, rng: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(ic, Deterministic):
        return np.full(n, ic.state, dtype=np.int64)
    if isinstance(ic, Simplex):
        return rng.choice(len(ic.probabilities), size=n, p=np.asarray(ic.probabilities)).astype(np.int64)
    rho = sample_beta(ic, rng, size=n)
    return np.where(rng.random(n) < rho, ic.high_state, ic.low_state).astype(np.int64)


def sample_initial_vectors(ic: InitialCondition, n: int, rng: np.random.Generator, state_count: int) -> np.ndarray:
    if not isinstance(ic, BernoulliBeta):
        return np.tile(initial_vector(ic, state_count), (n, 1))
    rho = sample_beta(ic, rng, size=n)
    vetores = np.zeros((n, state_count), dtype=np.float64)
    vetores[:, ic.high_state] = rho
    vetores[:, ic.low_state] = 1.0 - rho
    return vetores


@dataclass(frozen=True)
class MeasurementSet:
    """
    Observações (t_k, y(t_k)). Com `initial_entry=True` a primeira entrada é a
    condição inicial s₀, que o discriminador não vê como dado real.
    """
    times: np.ndarray
    values: np.ndarray
    initial_entry: bool = False

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[0] != times.shape[0]:
            raise MeasurementError(f"expected one probability vector per time, got {values.shape} for {times.shape[0]} times")
        if times.size == 0:
            raise MeasurementError("measurement set is empty")
        if np.any(times < 0):
            raise MeasurementError("measurement times must be >= 0")
        somas = values.sum(axis=1)
        ruins = np.flatnonzero(np.abs(somas - 1.0) > MEASUREMENT_SUM_TOL)
        if ruins.size:
            k = int(ruins[0])
            raise MeasurementError(f"entry {k} at t={times[k]} sums to {somas[k]!r}, not 1")
        if np.any(np.diff(times) < 0):
            raise MeasurementError("measurement times must be increasing")
        positivos = times[times > 0]
        # várias entradas em t=0 só para condições iniciais distribucionais
        if np.any(np.diff(positivos) <= 0):
            raise MeasurementError("measurement times after t=0 must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def state_count(self) -> int:
        return int(self.values.shape[1])

    def real_entries(self) -> slice:
        return slice(1, None) if self.initial_entry else slice(0, None)

    def head(self, n: int) -> "MeasurementSet":
        return MeasurementSet(self.times[:n], self.values[:n], self.initial_entry)


def validate_measurements(data: MeasurementSet, model: MultiStateModel) -> None:
    if data.state_count != model.state_count:
        raise MeasurementError(f"measurements have {data.state_count} states, model has {model.state_count}")
    if np.any(data.times > model.mission_time):
        raise MeasurementError(f"measurement times must be within [0, {model.mission_time}]")
    if isinstance(model.initial, Deterministic | Simplex):
        s0 = initial_vector(model.initial, model.state_count)
        for t, y in zip(data.times, data.values):
            if t == 0 and not np.allclose(y, s0, atol=MEASUREMENT_SUM_TOL):
                raise MeasurementError(f"entry at t=0 {y.tolist()} differs from the initial condition {s0.tolist()}")
