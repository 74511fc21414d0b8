import math

import numpy as np
import pytest

from hybridqos.errors import NoBracketError
from hybridqos.numerics import bisect_root, log_spectral_radius, maximize_bounded


def _log(matrix):
    matrix = np.asarray(matrix, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(matrix)


def test_bisect_root_finds_square_root():
    root = bisect_root(lambda x: x * x - 2.0, 0.0, 2.0, "x^2 - 2")
    assert abs(root - math.sqrt(2.0)) < 1e-10


def test_bisect_root_returns_exact_endpoint():
    assert bisect_root(lambda x: x - 1.0, 1.0, 3.0, "x - 1") == 1.0


def test_bisect_root_without_sign_change():
    with pytest.raises(NoBracketError) as excinfo:
        bisect_root(lambda x: x * x + 1.0, -1.0, 1.0, "x^2 + 1")
    assert "x^2 + 1" in str(excinfo.value)
    assert excinfo.value.lo == -1.0


def test_maximize_bounded_interior():
    x, value = maximize_bounded(lambda x: -(x - 0.3) ** 2, 0.0, 1.0)
    assert abs(x - 0.3) < 1e-5
    assert abs(value) < 1e-9


def test_maximize_bounded_checks_endpoints():
    x, value = maximize_bounded(lambda x: x, 0.0, 1.0)
    assert x == 1.0
    assert value == 1.0


def test_spectral_radius_of_symmetric_matrix():
    assert abs(log_spectral_radius(_log([[2.0, 1.0], [1.0, 2.0]])) - math.log(3.0)) < 1e-9


def test_spectral_radius_of_periodic_matrix():
    assert abs(log_spectral_radius(_log([[0.0, 1.0], [1.0, 0.0]]))) < 1e-9
    assert abs(log_spectral_radius(_log([[0.0, 4.0], [1.0, 0.0]])) - math.log(2.0)) < 1e-9


def test_spectral_radius_of_long_cycle_with_shift():
    size = 12
    matrix = np.zeros((size, size))
    for i in range(size):
        matrix[(i + 1) % size, i] = 2.0
    value = log_spectral_radius(_log(matrix), log_shift=math.log(2.0) - 1.0)
    assert abs(value - math.log(2.0)) < 1e-8
