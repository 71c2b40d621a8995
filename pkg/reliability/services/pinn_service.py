"""
Substituto PINN determinístico para a confiabilidade do sistema.

Perda composta: ‖N(0) − s₀‖² + λ·(1/N_r)·Σᵢ ‖N(tᵢ)·Q(tᵢ) − dN(tᵢ)/dt‖².
"""
import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch

from reliability.services.markov_service import MultiStateModel, initial_vector, rate_matrices
from reliability.services.neural_service import (
    DTYPE,
    DenseNetwork,
    NetworkSpec,
    TrainingDivergedError,
    TrainingSchedule,
    forward_with_time_derivative,
    initialize_parameters,
    make_optimizer,
    save_parameters,
)
from reliability.services.ode_service import ProbabilityTrajectory
from reliability.utils import progress

logger = logging.getLogger(__name__)

DEFAULT_COLLOCATION = 40
DEFAULT_HIDDEN = (50, 50)


def default_pinn_spec(state_count: int) -> NetworkSpec:
    return NetworkSpec.dense(1, DEFAULT_HIDDEN, "tanh", state_count, "softmax")


@dataclass(frozen=True)
class PinnConfig:
    network: NetworkSpec | None = None
    collocation_count: int = DEFAULT_COLLOCATION
    weight: float = 1.0
    schedule: TrainingSchedule = field(default_factory=TrainingSchedule)
    seed: int = 0

    def __post_init__(self):
        if self.collocation_count < 2:
            raise ValueError(f"collocation count must be >= 2, got {self.collocation_count}")
        if self.weight <= 0:
            raise ValueError(f"loss weight must be > 0, got {self.weight}")

    def network_for(self, model: MultiStateModel) -> NetworkSpec:
        spec = self.network or default_pinn_spec(model.state_count)
        if spec.input_width != 1:
            raise ValueError(f"PINN input width must be 1, got {spec.input_width}")
        if spec.output.width != model.state_count:
            raise ValueError(f"output width {spec.output.width} != state count {model.state_count}")
        return spec

    def snapshot(self) -> dict:
        dados = asdict(self)
        dados["network"] = self.network.to_dict() if self.network else None
        return dados


@dataclass
class TrainedSurrogate:
    network: DenseNetwork
    model: MultiStateModel
    config: PinnConfig
    final_loss: float
    loss_history: np.ndarray


def collocation_grid(count: int, t_max: float) -> np.ndarray:
    if count < 2:
        raise ValueError(f"collocation count must be >= 2, got {count}")
    if t_max <= 0:
        raise ValueError(f"t_max must be > 0, got {t_max}")
    return np.linspace(0.0, t_max, count)


def kolmogorov_residual(p: torch.Tensor, dp_dt: torch.Tensor, rates: torch.Tensor) -> torch.Tensor:
    """Resíduo p(t)·Q(t) − dp/dt ponto a ponto (N × estados)."""
    return torch.einsum("nk,nkj->nj", p, rates) - dp_dt


def _loss_terms(network: DenseNetwork, s0: torch.Tensor, tempos: torch.Tensor, rates: torch.Tensor):
    p0 = network(torch.zeros(1, 1, dtype=DTYPE))[0]
    termo_inicial = ((p0 - s0) ** 2).sum()
    p, dp = forward_with_time_derivative(network, tempos)
    residuo = kolmogorov_residual(p, dp, rates)
    return termo_inicial, (residuo**2).sum(dim=1).mean()


def _tensors(model: MultiStateModel, collocation):
    s0 = torch.as_tensor(initial_vector(model.initial, model.state_count), dtype=DTYPE)
    tempos = torch.as_tensor(np.asarray(collocation, dtype=np.float64), dtype=DTYPE)
    rates = torch.as_tensor(rate_matrices(model, collocation), dtype=DTYPE)
    return s0, tempos, rates


def pinn_loss_terms(network: DenseNetwork, model: MultiStateModel, collocation) -> tuple[torch.Tensor, torch.Tensor]:
    """(termo da condição inicial, termo de resíduo) separados."""
    return _loss_terms(network, *_tensors(model, collocation))


def pinn_loss(network: DenseNetwork, model: MultiStateModel, collocation, weight: float) -> torch.Tensor:
    termo_inicial, termo_residuo = pinn_loss_terms(network, model, collocation)
    return termo_inicial + weight * termo_residuo


def train_pinn(model: MultiStateModel, config: PinnConfig | None = None) -> TrainedSurrogate:
    config = config or PinnConfig()
    spec = config.network_for(model)
    schedule = config.schedule
    rede = initialize_parameters(spec, config.seed)
    s0, tempos, rates = _tensors(model, collocation_grid(config.collocation_count, model.mission_time))
    otimizador, agendador = make_optimizer(rede, schedule)
    historico = np.empty(schedule.iterations, dtype=np.float64)

    logger.info("🧠 Treinando PINN: %d iterações, %d pontos de colocação, semente %d",
                schedule.iterations, config.collocation_count, config.seed)
    for it in progress(range(schedule.iterations), desc="PINN"):
        otimizador.zero_grad()
        termo_inicial, termo_residuo = _loss_terms(rede, s0, tempos, rates)
        perda = termo_inicial + config.weight * termo_residuo
        if not torch.isfinite(perda):
            logger.error("❌ Perda não finita na iteração %d", it)
            raise TrainingDivergedError(f"PINN loss became non-finite at iteration {it}", it)
        perda.backward()
        otimizador.step()
        agendador.step()
        historico[it] = perda.item()

    termo_inicial, termo_residuo = _loss_terms(rede, s0, tempos, rates)
    final = float((termo_inicial + config.weight * termo_residuo).item())
    if not np.isfinite(final):
        raise TrainingDivergedError("PINN final loss is not finite", schedule.iterations)
    logger.info("✅ PINN treinada: perda inicial %.3e → final %.3e", historico[0], final)
    return TrainedSurrogate(rede, model, config, final, historico)


def predict_state_probabilities(surrogate: TrainedSurrogate, times) -> ProbabilityTrajectory:
    tempos = np.asarray(times, dtype=np.float64).reshape(-1)
    fora = bool(np.any(tempos < 0) or np.any(tempos > surrogate.model.mission_time))
    if fora:
        logger.warning("⚠️ Previsão fora da janela de treino [0, %g]", surrogate.model.mission_time)
    with torch.no_grad():
        probs = surrogate.network(torch.as_tensor(tempos, dtype=DTYPE).reshape(-1, 1))
    return ProbabilityTrajectory(tempos, probs.numpy(), extrapolated=fora)


def predict_reliability(surrogate: TrainedSurrogate, times, up_states=None) -> np.ndarray:
    up = surrogate.model.up_states if up_states is None else up_states
    return predict_state_probabilities(surrogate, times).reliability(up)


def save_surrogate(surrogate: TrainedSurrogate, path):
    header = {"method": "pinn", "config": surrogate.config.snapshot(), "final_loss": surrogate.final_loss}
    return save_parameters(surrogate.network, path, header)


def replication_task(model: MultiStateModel, config: PinnConfig, grid):
    """Uma replicação = treino completo com a semente recebida + previsão na grade."""
    def tarefa(seed: int) -> ProbabilityTrajectory:
        return predict_state_probabilities(train_pinn(model, replace(config, seed=seed)), grid)

    return tarefa
