import math

import numpy as np
import pytest
from scipy import integrate

from privtab.errors import ParameterError
from privtab.privacy import erfc


def erfc_quadrature(x: float) -> float:
    """Independent oracle: adaptive quadrature of the Gaussian tail."""
    if x < 0:
        return 2.0 - erfc_quadrature(-x)
    val, err = integrate.quad(lambda u: math.exp(-u * u), x, x + 40.0,
                              epsabs=1e-14, epsrel=1e-13, limit=400)
    assert err < 1e-12
    return 2.0 / math.sqrt(math.pi) * val


def test_erfc_zero_is_one():
    assert erfc(0.0) == 1.0


@pytest.mark.parametrize("x", [0.5, 1.0, 3.0])
def test_symmetry_sums_to_two(x):
    assert erfc(x) + erfc(-x) == pytest.approx(2.0, abs=1e-14)


def test_spec_point_value_against_quadrature():
    assert erfc(2.5) == pytest.approx(4.0695e-4, abs=1e-8)
    assert abs(erfc(2.5) - erfc_quadrature(2.5)) < 1e-9


@pytest.mark.parametrize("x", [-6.0, -2.1, -0.7, 0.01, 0.4, 1.2, 1.9999, 2.0, 2.7, 4.5, 8.0, 12.0])
def test_quadrature_oracle_grid(x):
    assert abs(erfc(x) - erfc_quadrature(x)) < 1e-10


def test_dense_grid_against_libm():
    xs = np.linspace(-12.0, 12.0, 4001)
    worst = max(abs(erfc(float(x)) - math.erfc(float(x))) for x in xs)
    assert worst < 1e-13


def test_range_and_underflow():
    for x in np.linspace(-5, 26, 200):
        v = erfc(float(x))
        assert 0.0 < v < 2.0
    assert erfc(40.0) == 0.0  # exp(-x^2) underflow: treated as the q -> 0 branch


def test_nonfinite_rejected():
    with pytest.raises(ParameterError):
        erfc(float("nan"))
    with pytest.raises(ParameterError):
        erfc(float("inf"))
