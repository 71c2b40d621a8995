import numpy as np
import pytest

from reliability.utils import derive_seed, is_simplex, log_duration, make_rng, parse_grid, time_grid


def test_derived_seeds_are_stable_and_distinct():
    assert derive_seed(0, 1) == derive_seed(0, 1)
    assert len({derive_seed(0, i) for i in range(100)}) == 100
    assert derive_seed(0, 1) != derive_seed(1, 1)
    assert make_rng(3, 2).random() == make_rng(3, 2).random()


def test_time_grid_includes_end():
    np.testing.assert_array_equal(time_grid(0, 30, 1), np.arange(31.0))
    assert time_grid(0, 1, 0.1).size == 11
    assert time_grid(2, 2, 1).tolist() == [2.0]
    with pytest.raises(ValueError, match="step must be positive"):
        time_grid(0, 1, 0)
    with pytest.raises(ValueError):
        time_grid(5, 1, 1)


def test_parse_grid():
    np.testing.assert_array_equal(parse_grid("0:10:5"), [0.0, 5.0, 10.0])
    with pytest.raises(ValueError):
        parse_grid("0:10")


def test_is_simplex():
    assert is_simplex(np.array([[0.2, 0.8], [1.0, 0.0]]))
    assert not is_simplex(np.array([[0.2, 0.7]]))
    assert not is_simplex(np.array([[1.1, -0.1]]))
    assert not is_simplex(np.array([[np.nan, 1.0]]))


def test_log_duration_records_phase():
    registro = {}
    with log_duration("fase", registro):
        pass
    assert registro["fase"] >= 0
    with pytest.raises(RuntimeError):
        with log_duration("falha", registro):
            raise RuntimeError("x")
    assert "falha" in registro
