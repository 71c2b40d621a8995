"""
Núcleo das redes densas usadas pelos substitutos PINN e PIGAN.

Tudo roda em float64: as checagens de gradiente por diferenças finitas
precisam dessa precisão.
"""
import copy
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import torch
from torch import nn

logger = logging.getLogger(__name__)

DTYPE = torch.float64
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

ACTIVATIONS = {
    "tanh": nn.Tanh,
    "sigmoid": nn.Sigmoid,
    "identity": nn.Identity,
    "softmax": partial(nn.Softmax, dim=-1),
}


class TrainingDivergedError(RuntimeError):
    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class LayerSpec:
    width: int
    activation: str


@dataclass(frozen=True)
class NetworkSpec:
    input_width: int
    hidden: tuple[LayerSpec, ...]
    output: LayerSpec
    # horizonte T: a coluna de tempo entra como 2t/T − 1
    time_horizon: float | None = None
    # estados com massa possível em t = 0; os demais são multiplicados por t/T
    initial_support: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.input_width < 1:
            raise ValueError(f"input width must be >= 1, got {self.input_width}")
        if self.time_horizon is not None and self.time_horizon <= 0:
            raise ValueError(f"time horizon must be > 0, got {self.time_horizon}")
        if self.initial_support is not None:
            self._check_support()
        for camada in (*self.hidden, self.output):
            if camada.width < 1:
                raise ValueError(f"layer width must be >= 1, got {camada.width}")
            if camada.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation '{camada.activation}', expected one of {sorted(ACTIVATIONS)}")
        if any(camada.activation == "softmax" for camada in self.hidden):
            raise ValueError("softmax is only allowed on the output layer")

    def _check_support(self):
        suporte = self.initial_support
        if self.output.activation != "softmax":
            raise ValueError("an initial support gate needs a softmax output")
        if self.time_horizon is None:
            raise ValueError("an initial support gate needs a time horizon")
        if not suporte or any(not 0 <= j < self.output.width for j in suporte):
            raise ValueError(f"initial support {suporte} must name output states in [0, {self.output.width})")
        if len(set(suporte)) != len(suporte):
            raise ValueError(f"initial support {suporte} has repeated states")

    @classmethod
    def dense(cls, input_width: int, hidden_widths, hidden_activation: str, output_width: int,
              output_activation: str) -> "NetworkSpec":
        return cls(
            input_width,
            tuple(LayerSpec(w, hidden_activation) for w in hidden_widths),
            LayerSpec(output_width, output_activation),
        )

    @classmethod
    def from_dict(cls, dados: dict) -> "NetworkSpec":
        return cls(
            dados["input_width"],
            tuple(LayerSpec(**c) for c in dados["hidden"]),
            LayerSpec(**dados["output"]),
            dados.get("time_horizon"),
            tuple(dados["initial_support"]) if dados.get("initial_support") is not None else None,
        )

    def to_dict(self) -> dict:
        # só listas/dicts, para o arquivo de parâmetros carregar com weights_only
        return json.loads(json.dumps(asdict(self)))

    def digest(self) -> str:
        texto = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(texto.encode("utf-8")).hexdigest()[:16]

    @property
    def layers(self) -> tuple[LayerSpec, ...]:
        return (*self.hidden, self.output)


class DenseNetwork(nn.Module):
    """Composição afim → ativação por camada; os parâmetros são o θ da rede."""

    def __init__(self, spec: NetworkSpec):
        super().__init__()
        self.spec = spec
        larguras = [spec.input_width] + [c.width for c in spec.layers]
        self.linears = nn.ModuleList(
            nn.Linear(larguras[i], larguras[i + 1], dtype=DTYPE) for i in range(len(spec.layers))
        )
        self.activations = nn.ModuleList(ACTIVATIONS[c.activation]() for c in spec.layers)
        if spec.initial_support is not None:
            mascara = torch.zeros(spec.output.width, dtype=torch.bool)
            mascara[list(spec.initial_support)] = True
            self.register_buffer("suporte", mascara, persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        horizonte = self.spec.time_horizon
        tau = x[:, :1] / horizonte if horizonte is not None else None
        if tau is not None:
            x = torch.cat([2.0 * tau - 1.0, x[:, 1:]], dim=1)
        for linear, ativacao in zip(self.linears, self.activations):
            x = ativacao(linear(x))
        if self.spec.initial_support is not None:
            # fora do suporte a massa é exatamente 0 em t = 0
            peso = torch.where(self.suporte, torch.ones_like(x), tau.expand_as(x))
            x = x * peso
            x = x / x.sum(dim=1, keepdim=True)
        return x


@dataclass(frozen=True)
class TrainingSchedule:
    initial_lr: float = 1e-3
    decay_rate: float = 0.9
    decay_steps: int = 1000
    iterations: int = 20_000

    def __post_init__(self):
        if self.initial_lr <= 0:
            raise ValueError("initial learning rate must be > 0")
        if not 0 < self.decay_rate <= 1:
            raise ValueError("decay rate must lie in (0, 1]")
        if self.decay_steps < 1 or self.iterations < 1:
            raise ValueError("decay steps and iterations must be >= 1")


def learning_rate_at(schedule: TrainingSchedule, iteration: int) -> float:
    """Decaimento exponencial contínuo: lr₀ · taxa^(iteração / passos)."""
    if iteration < 0:
        raise ValueError(f"iteration must be >= 0, got {iteration}")
    return schedule.initial_lr * schedule.decay_rate ** (iteration / schedule.decay_steps)


def initialize_parameters(spec: NetworkSpec, seed: int) -> DenseNetwork:
    """Glorot-uniforme nos pesos, vieses zerados; determinístico por semente."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        rede = DenseNetwork(spec)
        for linear in rede.linears:
            nn.init.xavier_uniform_(linear.weight)
            nn.init.zeros_(linear.bias)
    return rede


def forward(network: DenseNetwork, inputs) -> torch.Tensor:
    x = torch.as_tensor(inputs, dtype=DTYPE)
    if x.ndim == 1:
        x = x.unsqueeze(0)
    if x.shape[-1] != network.spec.input_width:
        raise ValueError(f"expected input width {network.spec.input_width}, got {x.shape[-1]}")
    if not torch.all(torch.isfinite(x)):
        raise ValueError("network input contains non-finite values")
    return network(x)


def forward_with_time_derivative(network: DenseNetwork, t, aux=None) -> tuple[torch.Tensor, torch.Tensor]:
    """
    Saída da rede em (t, aux) e a derivada exata de cada componente em t.

    A entrada é a concatenação (t, aux); `aux` é vazio na PINN e o ruído
    latente no gerador da PIGAN. Cada ponto só depende do próprio t, então o
    gradiente da soma de uma coluna dá a derivada ponto a ponto. O grafo é
    mantido para que a perda possa ser derivada de novo nos parâmetros.
    """
    with torch.enable_grad():
        tempos = torch.as_tensor(t, dtype=DTYPE).reshape(-1, 1)
        if not tempos.requires_grad:
            tempos = tempos.detach().clone().requires_grad_(True)
        entrada = tempos
        if aux is not None:
            aux = torch.as_tensor(aux, dtype=DTYPE).reshape(tempos.shape[0], -1)
            entrada = torch.cat([tempos, aux], dim=1)
        saida = network(entrada)
        derivadas = []
        for k in range(saida.shape[1]):
            (d,) = torch.autograd.grad(
                saida[:, k], tempos,
                grad_outputs=torch.ones_like(saida[:, k]),
                create_graph=True, allow_unused=True,
            )
            derivadas.append(torch.zeros_like(tempos) if d is None else d)
    return saida, torch.cat(derivadas, dim=1)


def parameter_gradients(network: DenseNetwork, loss_fn) -> dict[str, torch.Tensor]:
    """
    Gradiente exato de `loss_fn(network)` em todos os parâmetros, inclusive a
    parcela que passa pela derivada temporal.
    """
    perda = loss_fn(network)
    if not torch.isfinite(perda):
        raise TrainingDivergedError(f"loss is not finite: {perda.item()!r}")
    nomes, params = zip(*network.named_parameters())
    grads = torch.autograd.grad(perda, params, allow_unused=True)
    return {
        nome: (torch.zeros_like(p) if g is None else g.detach())
        for nome, p, g in zip(nomes, params, grads)
    }


def make_optimizer(network: DenseNetwork, schedule: TrainingSchedule):
    """Adam + LambdaLR reproduzindo `learning_rate_at` a cada iteração."""
    otimizador = torch.optim.Adam(network.parameters(), lr=schedule.initial_lr, betas=ADAM_BETAS, eps=ADAM_EPS)
    agendador = torch.optim.lr_scheduler.LambdaLR(
        otimizador, lambda it: learning_rate_at(schedule, it) / schedule.initial_lr
    )
    return otimizador, agendador


@dataclass(frozen=True)
class OptimizerState:
    exp_avg: dict[str, torch.Tensor] = field(default_factory=dict)
    exp_avg_sq: dict[str, torch.Tensor] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def zeros_like(cls, network: DenseNetwork) -> "OptimizerState":
        zeros = {nome: torch.zeros_like(p) for nome, p in network.named_parameters()}
        return cls(zeros, {nome: z.clone() for nome, z in zeros.items()}, 0)


def adam_update(state: OptimizerState, network: DenseNetwork, grads: dict[str, torch.Tensor],
                lr: float) -> tuple[OptimizerState, DenseNetwork]:
    """
    Um passo de Adam (β₁=0.9, β₂=0.999, ε=1e-8, com correção de viés) sem
    tocar nas entradas: devolve estado e rede novos.
    """
    nova = copy.deepcopy(network)
    params = dict(nova.named_parameters())
    otimizador = torch.optim.Adam(params.values(), lr=lr, betas=ADAM_BETAS, eps=ADAM_EPS, foreach=False)
    for nome, p in params.items():
        p.grad = grads[nome].detach().clone()
        otimizador.state[p] = {
            "step": torch.tensor(float(state.step)),
            "exp_avg": state.exp_avg[nome].detach().clone(),
            "exp_avg_sq": state.exp_avg_sq[nome].detach().clone(),
        }
    otimizador.step()
    novo_estado = OptimizerState(
        {nome: otimizador.state[p]["exp_avg"].clone() for nome, p in params.items()},
        {nome: otimizador.state[p]["exp_avg_sq"].clone() for nome, p in params.items()},
        state.step + 1,
    )
    return novo_estado, nova


def save_parameters(network: DenseNetwork, path, header: dict | None = None) -> Path:
    caminho = Path(path)
    caminho.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "spec": network.spec.to_dict(),
            "digest": network.spec.digest(),
            "shapes": [list(linear.weight.shape) for linear in network.linears],
            "header": header or {},
            "state_dict": network.state_dict(),
        },
        caminho,
    )
    logger.info("💾 Parâmetros salvos em %s", caminho)
    return caminho


def load_parameters(path) -> tuple[DenseNetwork, dict]:
    dados = torch.load(Path(path), weights_only=True)
    spec = NetworkSpec.from_dict(dados["spec"])
    if spec.digest() != dados["digest"]:
        raise ValueError(f"parameter file {path} has a digest mismatch")
    rede = DenseNetwork(spec)
    rede.load_state_dict(dados["state_dict"])
    return rede, dados["header"]
