import logging
import os
import time
from contextlib import contextmanager

import numpy as np
from dotenv import load_dotenv
from tqdm import tqdm

load_dotenv()
logger = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-9


def derive_seed(master_seed: int, index: int) -> int:
    """
    Semente derivada de (semente mestre, índice), independente da ordem de execução.
    """
    sequencia = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return int(sequencia.generate_state(1, dtype=np.uint32)[0])


def make_rng(master_seed: int, index: int | None = None) -> np.random.Generator:
    if index is None:
        return np.random.default_rng(master_seed)
    sequencia = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(sequencia))


def default_workers() -> int:
    return max(1, int(os.getenv("RELIABILITY_WORKERS", "1")))


def progress(iterable=None, **kwargs):
    # barra desligada fora de terminal ou com RELIABILITY_PROGRESS=0
    desligado = os.getenv("RELIABILITY_PROGRESS", "1") == "0"
    kwargs.setdefault("leave", False)
    return tqdm(iterable, disable=True if desligado else None, **kwargs)


def time_grid(start: float, end: float, step: float) -> np.ndarray:
    if step <= 0:
        raise ValueError("step must be positive")
    if end < start:
        raise ValueError(f"grid end {end} is before start {start}")
    n = int(np.floor((end - start) / step + 1e-9)) + 1
    return start + step * np.arange(n, dtype=np.float64)


def parse_grid(texto: str) -> np.ndarray:
    """Converte 'inicio:fim:passo' em uma grade de tempos."""
    partes = texto.split(":")
    if len(partes) != 3:
        raise ValueError(f"grid must be start:end:step, got '{texto}'")
    start, end, step = (float(p) for p in partes)
    return time_grid(start, end, step)


def is_simplex(probs: np.ndarray, tol: float = SIMPLEX_TOL) -> bool:
    probs = np.asarray(probs, dtype=np.float64)
    if not np.all(np.isfinite(probs)):
        return False
    dentro = np.all(probs >= -tol) and np.all(probs <= 1 + tol)
    return bool(dentro and np.all(np.abs(probs.sum(axis=-1) - 1.0) <= tol))


@contextmanager
def log_duration(fase: str, registro: dict | None = None):
    """
    Mede o tempo de uma fase, loga e opcionalmente guarda em `registro[fase]`.
    """
    inicio = time.perf_counter()
    try:
        yield
    finally:
        duracao = time.perf_counter() - inicio
        if registro is not None:
            registro[fase] = duracao
        logger.info("⏱️ Fase '%s' concluída em %.2fs", fase, duracao)
