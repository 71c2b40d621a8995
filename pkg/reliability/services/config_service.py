"""
Configurações de execução em JSON validadas com pydantic.

Chaves desconhecidas são rejeitadas em todos os níveis; os padrões repetem os
hiperparâmetros dos exemplos de referência.
"""
import json
import logging
import os
from pathlib import Path
from typing import Annotated, Literal

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from reliability.services.markov_service import (
    BernoulliBeta,
    Deterministic,
    MultiStateModel,
    Simplex,
    StateSpace,
    Transition,
    TransitionRateModel,
)
from reliability.services.neural_service import NetworkSpec, TrainingSchedule
from reliability.services.pigan_service import GanConfig
from reliability.services.pinn_service import PinnConfig
from reliability.utils import time_grid

load_dotenv()
logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
DEFAULT_MODEL_FILE = DATA_DIR / "dual_processor.json"


class ConfigError(ValueError):
    pass


def default_output_dir() -> str:
    return os.getenv("RELIABILITY_OUTPUT_DIR", "outputs")


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# ---------------------- MODELO ----------------------

class TransitionConfig(StrictModel):
    source: int = Field(ge=0)
    target: int = Field(ge=0)
    coefficient: float = Field(ge=0)
    scale: float = Field(ge=0)
    shape: float = Field(gt=0)


class InitialConfig(StrictModel):
    kind: Literal["deterministic", "simplex", "bernoulli_beta"]
    state: int | None = Field(default=None, ge=0)
    probabilities: list[float] | None = None
    alpha: float | None = Field(default=None, gt=0)
    beta: float | None = Field(default=None, gt=0)
    high_state: int = Field(default=0, ge=0)
    low_state: int = Field(default=1, ge=0)

    def build(self):
        if self.kind == "deterministic":
            if self.state is None:
                raise ValueError("deterministic initial condition needs 'state'")
            return Deterministic(self.state)
        if self.kind == "simplex":
            if self.probabilities is None:
                raise ValueError("simplex initial condition needs 'probabilities'")
            return Simplex(tuple(self.probabilities))
        if self.alpha is None or self.beta is None:
            raise ValueError("bernoulli_beta initial condition needs 'alpha' and 'beta'")
        return BernoulliBeta(self.alpha, self.beta, self.high_state, self.low_state)


class ModelConfig(StrictModel):
    states: int = Field(ge=2)
    labels: list[str] | None = None
    transitions: list[TransitionConfig]
    up_states: list[int]
    initial: InitialConfig
    mission_time: float = Field(gt=0)

    @model_validator(mode="after")
    def check_model(self):
        self.build()
        return self

    def build(self) -> MultiStateModel:
        return MultiStateModel(
            states=StateSpace(self.states, tuple(self.labels) if self.labels else None),
            rates=TransitionRateModel(tuple(Transition(**t.model_dump()) for t in self.transitions)),
            initial=self.initial.build(),
            up_states=frozenset(self.up_states),
            mission_time=self.mission_time,
        )


def _resolve(caminho: str, info: ValidationInfo) -> Path:
    base = (info.context or {}).get("base_dir")
    path = Path(caminho)
    if not path.is_absolute() and base is not None:
        path = Path(base) / path
    if not path.is_file():
        raise ValueError(f"file '{caminho}' does not exist")
    return path


def _load_model_section(valor, info: ValidationInfo):
    if isinstance(valor, str):
        return json.loads(_resolve(valor, info).read_text(encoding="utf-8"))
    return valor


def load_model(path=DEFAULT_MODEL_FILE) -> MultiStateModel:
    texto = Path(path).read_text(encoding="utf-8")
    try:
        return ModelConfig.model_validate_json(texto).build()
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc


def bundled_model_config() -> ModelConfig:
    return ModelConfig.model_validate_json(DEFAULT_MODEL_FILE.read_text(encoding="utf-8"))


# ---------------------- GRADE E MÉTODOS ----------------------

class GridConfig(StrictModel):
    start: float = Field(default=0.0, ge=0)
    end: float = 30.0
    step: float = 1.0

    @field_validator("step")
    @classmethod
    def step_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("step must be positive")
        return v

    @model_validator(mode="after")
    def check_order(self):
        if self.end < self.start:
            raise ValueError(f"grid end {self.end} is before start {self.start}")
        return self

    def times(self):
        return time_grid(self.start, self.end, self.step)


class ScheduleConfig(StrictModel):
    initial_lr: float = Field(default=1e-3, gt=0)
    decay_rate: float = Field(default=0.9, gt=0, le=1)
    decay_steps: int = Field(default=1000, ge=1)
    iterations: int = Field(default=20_000, ge=1)

    def build(self, iterations: int | None = None) -> TrainingSchedule:
        return TrainingSchedule(self.initial_lr, self.decay_rate, self.decay_steps, iterations or self.iterations)


Activation = Literal["tanh", "sigmoid", "identity"]


class OdeMethod(StrictModel):
    name: Literal["ode"]
    step: float = Field(default=0.01, gt=0)


class McMethod(StrictModel):
    name: Literal["mc"]
    paths: int = Field(default=100_000, ge=1)
    epistemic: bool = True


class PinnMethod(StrictModel):
    name: Literal["pinn"]
    hidden: list[Annotated[int, Field(ge=1)]] = [50, 50]
    activation: Activation = "tanh"
    collocation: int = Field(default=40, ge=2)
    weight: float = Field(default=1.0, gt=0)
    schedule: ScheduleConfig = ScheduleConfig()

    def build(self, state_count: int, seed: int, iterations: int | None = None) -> PinnConfig:
        return PinnConfig(
            network=NetworkSpec.dense(1, self.hidden, self.activation, state_count, "softmax"),
            collocation_count=self.collocation,
            weight=self.weight,
            schedule=self.schedule.build(iterations),
            seed=seed,
        )


class PiganMethod(StrictModel):
    name: Literal["pigan"]
    generator_hidden: list[Annotated[int, Field(ge=1)]] = [50, 50, 50, 50]
    discriminator_hidden: list[Annotated[int, Field(ge=1)]] = [50, 50]
    activation: Activation = "tanh"
    latent_dim: int = Field(default=1, ge=1)
    schedule: ScheduleConfig = ScheduleConfig(initial_lr=1e-2, iterations=100_000)
    weight: float = Field(default=1.0, gt=0)
    discriminator_steps: int = Field(default=1, ge=1)
    samples: int = Field(default=5_000, ge=2)
    collocation: int = Field(default=40, ge=2)
    noise: Literal["per_point", "shared"] = "per_point"
    normalize_time: bool = True
    gate_initial_support: bool = True
    measurements: str | None = None
    initial_samples: int = Field(default=50, ge=1)

    @field_validator("measurements")
    @classmethod
    def measurements_exist(cls, v, info: ValidationInfo):
        return None if v is None else str(_resolve(v, info))

    def build(self, state_count: int, seed: int, iterations: int | None = None) -> GanConfig:
        return GanConfig(
            generator=NetworkSpec.dense(1 + self.latent_dim, self.generator_hidden, self.activation,
                                        state_count, "softmax"),
            discriminator=NetworkSpec.dense(1 + state_count, self.discriminator_hidden, self.activation,
                                            1, "sigmoid"),
            latent_dim=self.latent_dim,
            schedule=self.schedule.build(iterations),
            weight=self.weight,
            discriminator_steps=self.discriminator_steps,
            sample_count=self.samples,
            collocation_count=self.collocation,
            noise=self.noise,
            seed=seed,
            normalize_time=self.normalize_time,
            gate_initial_support=self.gate_initial_support,
        )


MethodConfig = Annotated[OdeMethod | McMethod | PinnMethod | PiganMethod, Field(discriminator="name")]


def _method_shorthand(valor):
    # "method": "pinn" equivale a {"name": "pinn"}
    return {"name": valor} if isinstance(valor, str) else valor


class RunConfig(StrictModel):
    model: ModelConfig = Field(default_factory=bundled_model_config)
    method: MethodConfig
    output_dir: str = Field(default_factory=default_output_dir)
    seed: int = Field(default=0, ge=0)
    grid: GridConfig = GridConfig()
    replications: int = Field(default=1, ge=1)

    @field_validator("model", mode="before")
    @classmethod
    def load_model_file(cls, v, info: ValidationInfo):
        return _load_model_section(v, info)

    @field_validator("method", mode="before")
    @classmethod
    def expand_method_name(cls, v):
        return _method_shorthand(v)

    @model_validator(mode="after")
    def grid_within_mission(self):
        if self.grid.end > self.model.mission_time:
            raise ValueError(f"grid end {self.grid.end} exceeds mission time {self.model.mission_time}")
        return self

    def snapshot(self) -> dict:
        return self.model_dump(mode="json")


# ---------------------- EXEMPLOS ----------------------

class ScenarioConfig(StrictModel):
    inspections: list[float]
    shifts: list[Annotated[float, Field(ge=0)]]

    @model_validator(mode="after")
    def same_length(self):
        if len(self.inspections) != len(self.shifts):
            raise ValueError("inspections and shifts must have the same length")
        return self


class FullScaleConfig(StrictModel):
    replications: int | None = Field(default=None, ge=1)
    mc_paths: int | None = Field(default=None, ge=1)
    iterations: int | None = Field(default=None, ge=1)


class ExampleConfig(StrictModel):
    example: Literal[1, 2, 3]
    description: str = ""
    model: ModelConfig = Field(default_factory=bundled_model_config)
    initial: InitialConfig | None = None
    grid: GridConfig = GridConfig()
    replications: int = Field(default=1, ge=1)
    ode: OdeMethod = OdeMethod(name="ode")
    mc: McMethod | None = None
    pinn: PinnMethod | None = None
    pigan: PiganMethod | None = None
    scenarios: dict[Literal["better", "worse"], ScenarioConfig] = {}
    full_scale: FullScaleConfig = FullScaleConfig()

    @field_validator("model", mode="before")
    @classmethod
    def load_model_file(cls, v, info: ValidationInfo):
        return _load_model_section(v, info)

    def build_model(self) -> MultiStateModel:
        modelo = self.model
        if self.initial is not None:
            modelo = modelo.model_copy(update={"initial": self.initial})
        return modelo.build()


def _describe(exc: ValidationError) -> str:
    mensagens = []
    for erro in exc.errors():
        local = ".".join(str(p) for p in erro["loc"]) or "<root>"
        if erro["type"] == "extra_forbidden":
            mensagens.append(f"unknown key '{local}'")
        elif erro["type"] == "missing":
            mensagens.append(f"missing required section '{local}'")
        else:
            mensagens.append(f"{local}: {erro['msg']}")
    return "; ".join(mensagens)


def parse_config(text: str, base_dir=None) -> RunConfig:
    try:
        return RunConfig.model_validate_json(text, context={"base_dir": base_dir})
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc


def load_config(path) -> RunConfig:
    caminho = Path(path)
    if not caminho.is_file():
        raise ConfigError(f"config file '{path}' does not exist")
    logger.info("📄 Lendo configuração %s", caminho)
    return parse_config(caminho.read_text(encoding="utf-8"), base_dir=caminho.parent)


def load_example_config(n: int) -> ExampleConfig:
    if n not in (1, 2, 3):
        raise ConfigError(f"example must be 1, 2 or 3, got {n}")
    caminho = DATA_DIR / f"example{n}.json"
    try:
        return ExampleConfig.model_validate_json(caminho.read_text(encoding="utf-8"), context={"base_dir": DATA_DIR})
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc


def with_overrides(config: RunConfig, **mudancas) -> RunConfig:
    """Reaplica a validação completa após sobrescrever campos de topo (flags da CLI)."""
    dados = config.model_dump()
    dados.update({chave: valor for chave, valor in mudancas.items() if valor is not None})
    try:
        return RunConfig.model_validate(dados)
    except ValidationError as exc:
        raise ConfigError(_describe(exc)) from exc
