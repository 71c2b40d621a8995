import os

os.environ.setdefault("RELIABILITY_PROGRESS", "0")

import numpy as np
import pytest
import torch
from torch import nn

from reliability.services.markov_service import dual_processor_model
from reliability.services.neural_service import NetworkSpec

# valores de referência (t, [p0, p1, p2, p3])
TABELA_INSPECOES = {
    3.0: [8.35e-01, 1.42e-01, 6.20e-03, 1.72e-02],
    7.0: [3.75e-01, 4.27e-01, 1.22e-01, 7.60e-02],
    8.0: [2.79e-01, 4.47e-01, 1.81e-01, 9.23e-02],
    13.0: [3.43e-02, 2.71e-01, 5.38e-01, 1.56e-01],
}


@pytest.fixture
def model():
    return dual_processor_model()


@pytest.fixture
def grid31():
    return np.arange(31, dtype=np.float64)


class AnalyticGenerator(nn.Module):
    """Gerador que ignora o ruído e devolve a solução fechada do modelo de dois processadores."""

    spec = NetworkSpec.dense(2, (), "identity", 4, "softmax")

    def forward(self, x):
        t = x[:, :1]
        e1 = torch.exp(-0.01 * t**2)
        e2 = torch.exp(-0.02 * t**2)
        p0 = e2
        p1 = 1.8 * (e1 - e2)
        p2 = 0.81 * (1.0 - e1) ** 2
        return torch.cat([p0, p1, p2, 1.0 - p0 - p1 - p2], dim=1)


class TwoPointGenerator(nn.Module):
    """p0 ∈ {0.6, 0.8} conforme o sinal do ruído."""

    spec = NetworkSpec.dense(2, (), "identity", 4, "softmax")

    def forward(self, x):
        z = x[:, 1:2]
        p0 = torch.where(z < 0, torch.full_like(z, 0.6), torch.full_like(z, 0.8))
        return torch.cat([p0, 1.0 - p0, torch.zeros_like(z), torch.zeros_like(z)], dim=1)


class ConstantDiscriminator(nn.Module):
    def __init__(self, value: float):
        super().__init__()
        self.value = value

    def forward(self, x):
        return torch.full((x.shape[0], 1), self.value, dtype=x.dtype)


@pytest.fixture
def analytic_generator():
    return AnalyticGenerator()


@pytest.fixture
def two_point_generator():
    return TwoPointGenerator()


@pytest.fixture
def constant_discriminator():
    return ConstantDiscriminator


@pytest.fixture
def inspection_table():
    return {t: np.array(p) for t, p in TABELA_INSPECOES.items()}
