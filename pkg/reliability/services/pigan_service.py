"""
GAN informada pela física para quantificar incerteza na confiabilidade.

O gerador G(t, z) devolve um vetor de probabilidades de estado e é penalizado
pelo resíduo de Kolmogorov; o discriminador D(t, y) separa medições reais de
amostras geradas. As estatísticas de previsão saem de N_s passagens
estocásticas do gerador treinado.
"""
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from reliability.services.markov_service import (
    MeasurementSet,
    MultiStateModel,
    initial_support,
    rate_matrices,
    validate_measurements,
)
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
from reliability.services.pinn_service import collocation_grid, kolmogorov_residual
from reliability.utils import derive_seed, progress

logger = logging.getLogger(__name__)

LOG_CLAMP = 1e-8
DEFAULT_SAMPLES = 5_000
NOISE_MODES = ("per_point", "shared")

# sementes derivadas de GanConfig.seed
_SEED_GENERATOR, _SEED_DISCRIMINATOR, _SEED_NOISE, _SEED_EVALUATION = range(4)


def default_generator_spec(state_count: int, latent_dim: int = 1) -> NetworkSpec:
    return NetworkSpec.dense(1 + latent_dim, (50, 50, 50, 50), "tanh", state_count, "softmax")


def default_discriminator_spec(state_count: int) -> NetworkSpec:
    return NetworkSpec.dense(1 + state_count, (50, 50), "tanh", 1, "sigmoid")


@dataclass(frozen=True)
class GanConfig:
    generator: NetworkSpec | None = None
    discriminator: NetworkSpec | None = None
    latent_dim: int = 1
    schedule: TrainingSchedule = field(default_factory=lambda: TrainingSchedule(1e-2, 0.9, 1000, 100_000))
    weight: float = 1.0
    discriminator_steps: int = 1
    sample_count: int = DEFAULT_SAMPLES
    collocation_count: int = 40
    noise: str = "per_point"
    seed: int = 0
    normalize_time: bool = True
    gate_initial_support: bool = True

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError(f"latent dimension must be >= 1, got {self.latent_dim}")
        if self.weight <= 0:
            raise ValueError(f"loss weight must be > 0, got {self.weight}")
        if self.discriminator_steps < 1:
            raise ValueError("discriminator steps must be >= 1")
        if self.sample_count < 2:
            raise ValueError(f"sample count must be >= 2, got {self.sample_count}")
        if self.collocation_count < 2:
            raise ValueError(f"collocation count must be >= 2, got {self.collocation_count}")
        if self.noise not in NOISE_MODES:
            raise ValueError(f"noise mode must be one of {NOISE_MODES}, got '{self.noise}'")

    def generator_for(self, model: MultiStateModel) -> NetworkSpec:
        spec = self.generator or default_generator_spec(model.state_count, self.latent_dim)
        if spec.input_width != 1 + self.latent_dim:
            raise ValueError(f"generator input width must be {1 + self.latent_dim}, got {spec.input_width}")
        if spec.output.width != model.state_count:
            raise ValueError(f"generator output width {spec.output.width} != state count {model.state_count}")
        if self.normalize_time and spec.time_horizon is None:
            spec = replace(spec, time_horizon=model.mission_time)
        if self.gate_initial_support and spec.initial_support is None:
            spec = replace(spec, time_horizon=spec.time_horizon or model.mission_time,
                           initial_support=initial_support(model.initial, model.state_count))
        return spec

    def discriminator_for(self, model: MultiStateModel) -> NetworkSpec:
        spec = self.discriminator or default_discriminator_spec(model.state_count)
        if spec.input_width != 1 + model.state_count:
            raise ValueError(f"discriminator input width must be {1 + model.state_count}, got {spec.input_width}")
        if spec.output.width != 1:
            raise ValueError("discriminator must have a single output")
        if self.normalize_time and spec.time_horizon is None:
            spec = replace(spec, time_horizon=model.mission_time)
        return spec

    def snapshot(self) -> dict:
        dados = asdict(self)
        dados["generator"] = self.generator.to_dict() if self.generator else None
        dados["discriminator"] = self.discriminator.to_dict() if self.discriminator else None
        return dados


def sequential_config(seed: int = 0, iterations: int = 20_000) -> GanConfig:
    """Configuração das atualizações por inspeção: Adam 1e-3, decaimento 0.9 a cada 1000."""
    return GanConfig(schedule=TrainingSchedule(1e-3, 0.9, 1000, iterations), seed=seed)


@dataclass
class TrainedGan:
    generator: DenseNetwork
    discriminator: DenseNetwork
    model: MultiStateModel
    config: GanConfig
    generator_history: np.ndarray
    discriminator_history: np.ndarray


@dataclass
class PredictionStats:
    times: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    reliability_mean: np.ndarray
    reliability_std: np.ndarray

    def band(self, width: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
        return self.reliability_mean - width * self.reliability_std, self.reliability_mean + width * self.reliability_std


def evaluation_seed(config: GanConfig) -> int:
    return derive_seed(config.seed, _SEED_EVALUATION)


def noise_stream(seed: int) -> torch.Generator:
    gerador = torch.Generator()
    gerador.manual_seed(int(seed))
    return gerador


def _latent_dim(generator) -> int:
    return generator.spec.input_width - 1


def _draw(rng: torch.Generator, n: int, latent_dim: int) -> torch.Tensor:
    return torch.randn(n, latent_dim, generator=rng, dtype=DTYPE)


def _data_tensors(data: MeasurementSet) -> tuple[torch.Tensor, torch.Tensor]:
    return (
        torch.as_tensor(data.times, dtype=DTYPE).reshape(-1, 1),
        torch.as_tensor(data.values, dtype=DTYPE),
    )


def _clamped_log(x: torch.Tensor) -> torch.Tensor:
    return torch.log(torch.clamp(x, min=LOG_CLAMP))


def _generator_objective(generator, discriminator, t_dados, y_dados, z_dados, t_col, rates, z_col, weight):
    falso = generator(torch.cat([t_dados, z_dados], dim=1))
    d_falso = discriminator(torch.cat([t_dados, falso], dim=1))
    termo_adversario = _clamped_log(1.0 - d_falso).mean()
    termo_dados = ((y_dados - falso) ** 2).sum(dim=1).mean()
    g, dg = forward_with_time_derivative(generator, t_col, aux=z_col)
    residuo = kolmogorov_residual(g, dg, rates)
    return termo_adversario + termo_dados + weight * (residuo**2).sum(dim=1).mean()


def _discriminator_objective(discriminator, t_dados, y_dados, falso, reais: slice):
    n = t_dados.shape[0]
    d_real = discriminator(torch.cat([t_dados[reais], y_dados[reais]], dim=1))
    d_falso = discriminator(torch.cat([t_dados, falso], dim=1))
    return _clamped_log(d_real).sum() / n + _clamped_log(1.0 - d_falso).sum() / n


def generator_loss(generator, discriminator, data: MeasurementSet, collocation, model: MultiStateModel,
                   weight: float, z_data, z_collocation) -> torch.Tensor:
    """
    Perda do gerador: média de log(1 − D(t, G)) nos dados, erro quadrático
    contra as medições e resíduo de Kolmogorov ponderado por `weight`.

    `z_data` tem uma linha por entrada de `data`; `z_collocation` uma por
    ponto de colocação.
    """
    t_dados, y_dados = _data_tensors(data)
    t_col = torch.as_tensor(np.asarray(collocation, dtype=np.float64), dtype=DTYPE)
    rates = torch.as_tensor(rate_matrices(model, collocation), dtype=DTYPE)
    z_dados = torch.as_tensor(z_data, dtype=DTYPE).reshape(len(data), -1)
    z_col = torch.as_tensor(z_collocation, dtype=DTYPE).reshape(t_col.shape[0], -1)
    return _generator_objective(generator, discriminator, t_dados, y_dados, z_dados, t_col, rates, z_col, weight)


def discriminator_loss(discriminator, generator, data: MeasurementSet, z_data) -> torch.Tensor:
    """
    Objetivo do discriminador (a ser maximizado). A soma real pula a entrada
    da condição inicial quando `data.initial_entry`; ambas as somas dividem
    pelo total de entradas.
    """
    t_dados, y_dados = _data_tensors(data)
    z_dados = torch.as_tensor(z_data, dtype=DTYPE).reshape(len(data), -1)
    with torch.no_grad():
        falso = generator(torch.cat([t_dados, z_dados], dim=1))
    return _discriminator_objective(discriminator, t_dados, y_dados, falso, data.real_entries())


def _check_finite(perda: torch.Tensor, nome: str, it: int):
    if not torch.isfinite(perda):
        logger.error("❌ Perda do %s não finita na iteração %d", nome, it)
        raise TrainingDivergedError(f"{nome} loss became non-finite at iteration {it}", it)


def train_pigan(model: MultiStateModel, data: MeasurementSet, config: GanConfig | None = None) -> TrainedGan:
    config = config or GanConfig()
    validate_measurements(data, model)
    schedule = config.schedule
    gerador = initialize_parameters(config.generator_for(model), derive_seed(config.seed, _SEED_GENERATOR))
    discriminador = initialize_parameters(config.discriminator_for(model), derive_seed(config.seed, _SEED_DISCRIMINATOR))
    ruido = noise_stream(derive_seed(config.seed, _SEED_NOISE))

    t_dados, y_dados = _data_tensors(data)
    colocacao = collocation_grid(config.collocation_count, model.mission_time)
    t_col = torch.as_tensor(colocacao, dtype=DTYPE)
    rates = torch.as_tensor(rate_matrices(model, colocacao), dtype=DTYPE)
    reais = data.real_entries()
    n_dados, n_col, d_z = len(data), colocacao.size, config.latent_dim

    opt_g, sched_g = make_optimizer(gerador, schedule)
    opt_d, sched_d = make_optimizer(discriminador, schedule)
    hist_g = np.empty(schedule.iterations, dtype=np.float64)
    hist_d = np.empty(schedule.iterations, dtype=np.float64)

    logger.info("🎭 Treinando PIGAN: %d iterações, %d medições, semente %d",
                schedule.iterations, n_dados, config.seed)
    for it in progress(range(schedule.iterations), desc="PIGAN"):
        for _ in range(config.discriminator_steps):
            with torch.no_grad():
                falso = gerador(torch.cat([t_dados, _draw(ruido, n_dados, d_z)], dim=1))
            objetivo_d = _discriminator_objective(discriminador, t_dados, y_dados, falso, reais)
            _check_finite(objetivo_d, "discriminator", it)
            opt_d.zero_grad()
            (-objetivo_d).backward()
            opt_d.step()
        sched_d.step()

        z_dados = _draw(ruido, n_dados, d_z)
        if config.noise == "shared":
            z_col = _draw(ruido, 1, d_z).expand(n_col, d_z)
        else:
            z_col = _draw(ruido, n_col, d_z)
        perda_g = _generator_objective(gerador, discriminador, t_dados, y_dados, z_dados, t_col, rates, z_col,
                                       config.weight)
        _check_finite(perda_g, "generator", it)
        opt_g.zero_grad()
        perda_g.backward()
        opt_g.step()
        sched_g.step()

        hist_g[it] = perda_g.item()
        hist_d[it] = objetivo_d.item()

    logger.info("✅ PIGAN treinada: perda do gerador %.3e, objetivo do discriminador %.3e", hist_g[-1], hist_d[-1])
    return TrainedGan(gerador, discriminador, model, config, hist_g, hist_d)


def sample_generator(generator, t: float, n_samples: int, rng: torch.Generator) -> np.ndarray:
    """N_s passagens estocásticas de G em um único instante (N_s × estados)."""
    z = _draw(rng, n_samples, _latent_dim(generator))
    tempos = torch.full((n_samples, 1), float(t), dtype=DTYPE)
    with torch.no_grad():
        return generator(torch.cat([tempos, z], dim=1)).numpy()


def _require_samples(n_samples: int):
    if n_samples < 2:
        raise ValueError(f"need at least 2 samples, got {n_samples}")


def sample_state_statistics(generator, t: float, n_samples: int, rng: torch.Generator) -> tuple[np.ndarray, np.ndarray]:
    _require_samples(n_samples)
    amostras = sample_generator(generator, t, n_samples, rng)
    return amostras.mean(axis=0), amostras.std(axis=0, ddof=1)


def sample_reliability_statistics(generator, t: float, n_samples: int, up_states,
                                  rng: torch.Generator) -> tuple[float, float]:
    _require_samples(n_samples)
    amostras = sample_generator(generator, t, n_samples, rng)
    # confiabilidade por amostra, não a partir das estatísticas por estado
    r = amostras[:, sorted(up_states)].sum(axis=1)
    return float(r.mean()), float(r.std(ddof=1))


def predict_statistics(generator, times, n_samples: int, up_states, seed: int) -> PredictionStats:
    """Estatísticas por estado e de confiabilidade a partir do mesmo conjunto de amostras em cada t."""
    _require_samples(n_samples)
    tempos = np.asarray(times, dtype=np.float64).reshape(-1)
    rng = noise_stream(seed)
    up = sorted(up_states)
    medias, desvios, r_medias, r_desvios = [], [], [], []
    for t in tempos:
        amostras = sample_generator(generator, t, n_samples, rng)
        r = amostras[:, up].sum(axis=1)
        medias.append(amostras.mean(axis=0))
        desvios.append(amostras.std(axis=0, ddof=1))
        r_medias.append(r.mean())
        r_desvios.append(r.std(ddof=1))
    return PredictionStats(tempos, np.array(medias), np.array(desvios), np.array(r_medias), np.array(r_desvios))


def synthesize_shifted_measurements(oracle, inspections, shifts, direction: str) -> MeasurementSet:
    """
    Medições sintéticas deslocando o instante de inspeção: sistema melhor vê
    p*(t − Δt), sistema pior vê p*(t + Δt). `oracle(t)` devolve o vetor de
    probabilidades de referência.
    """
    inspecoes = np.asarray(inspections, dtype=np.float64).reshape(-1)
    deslocamentos = np.asarray(shifts, dtype=np.float64).reshape(-1)
    if inspecoes.shape != deslocamentos.shape:
        raise ValueError(f"got {inspecoes.size} inspections but {deslocamentos.size} shifts")
    if direction not in ("better", "worse"):
        raise ValueError(f"direction must be 'better' or 'worse', got '{direction}'")
    sinal = -1.0 if direction == "better" else 1.0
    efetivos = inspecoes + sinal * deslocamentos
    if np.any(efetivos < 0):
        k = int(np.flatnonzero(efetivos < 0)[0])
        raise ValueError(f"shifted time {efetivos[k]} for inspection t={inspecoes[k]} is negative")
    valores = np.array([np.asarray(oracle(float(t)), dtype=np.float64) for t in efetivos])
    return MeasurementSet(inspecoes, valores)


def with_initial_condition(data: MeasurementSet, s0) -> MeasurementSet:
    if data.initial_entry:
        raise ValueError("measurement set already carries the initial condition")
    s0 = np.asarray(s0, dtype=np.float64).reshape(1, -1)
    return MeasurementSet(np.concatenate([[0.0], data.times]), np.vstack([s0, data.values]), initial_entry=True)


@dataclass
class SequentialStage:
    inspections: int
    data: MeasurementSet
    stats: PredictionStats
    trained: TrainedGan


def sequential_update(model: MultiStateModel, data: MeasurementSet, s0, times,
                      config: GanConfig | None = None) -> list[SequentialStage]:
    """
    Retreina do zero com as medições acumuladas após cada inspeção (uma
    etapa por prefixo de `data`).
    """
    config = config or sequential_config()
    etapas = []
    for n in range(1, len(data) + 1):
        acumulado = with_initial_condition(data.head(n), s0)
        logger.info("🔁 Etapa %d/%d: %d inspeções acumuladas", n, len(data), n)
        treinado = train_pigan(model, acumulado, config)
        stats = predict_statistics(treinado.generator, times, config.sample_count, model.up_states,
                                   evaluation_seed(config))
        etapas.append(SequentialStage(n, acumulado, stats, treinado))
    return etapas


def save_gan(trained: TrainedGan, directory) -> list[Path]:
    pasta = Path(directory)
    header = {"method": "pigan", "config": trained.config.snapshot()}
    return [
        save_parameters(trained.generator, pasta / "generator.pt", {**header, "role": "generator"}),
        save_parameters(trained.discriminator, pasta / "discriminator.pt", {**header, "role": "discriminator"}),
    ]
