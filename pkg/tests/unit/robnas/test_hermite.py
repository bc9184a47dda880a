import math

import numpy as np
import pytest

from robnas.algo.hermite import hermite_coefficient, hermite_coefficient_mc, hermite_coefficients_mc
from robnas.data.network import Activation
from robnas.errors import NumericalError, ValidationError

# E[relu(z)·He_r(z)] / sqrt(r!), from half-Gaussian moments
RELU = {0: 1 / math.sqrt(2 * math.pi), 1: 0.5, 2: 1 / math.sqrt(4 * math.pi), 3: 0.0,
        4: -1 / math.sqrt(48 * math.pi), 5: 0.0, 6: 3 / math.sqrt(1440 * math.pi)}


@pytest.mark.parametrize('r, expected', RELU.items())
def test_relu(r, expected):
    assert hermite_coefficient(Activation.RELU, r) == pytest.approx(expected, abs=1e-9)


def test_identity():
    assert hermite_coefficient('identity', 1) == pytest.approx(1.0, abs=1e-12)
    for r in (0, 2, 3, 4, 5):
        assert hermite_coefficient('identity', r) == pytest.approx(0.0, abs=1e-12)


def test_leaky_relu():
    # leaky_relu(z) = (1 - a)·relu(z) + a·z
    slope = 0.1
    assert hermite_coefficient(Activation.LEAKY_RELU, 1, slope=slope) == pytest.approx(0.9 * 0.5 + 0.1, abs=1e-9)
    assert hermite_coefficient(Activation.LEAKY_RELU, 2, slope=slope) == pytest.approx(0.9 * RELU[2], abs=1e-9)


def test_odd_and_even():
    # erf is odd, so its even coefficients vanish
    for r in (0, 2, 4):
        assert hermite_coefficient(Activation.ERF, r) == pytest.approx(0.0, abs=1e-12)
    # μ_1(erf) = E[z·erf(z)] = 2/sqrt(3π)
    assert hermite_coefficient(Activation.ERF, 1) == pytest.approx(2 / math.sqrt(3 * math.pi), abs=1e-10)
    assert hermite_coefficient(Activation.SIGMOID, 0) == pytest.approx(0.5, abs=1e-12)


def test_callable():
    assert hermite_coefficient(np.square, 2) == pytest.approx(math.sqrt(2), abs=1e-10)
    assert hermite_coefficient(np.square, 0) == pytest.approx(1, abs=1e-10)


def test_fast_growth():
    with pytest.raises(NumericalError, match='grows too fast'):
        hermite_coefficient(lambda z: np.exp(z * z), 1)


def test_invalid_order():
    with pytest.raises(ValidationError):
        hermite_coefficient(Activation.RELU, -1)
    with pytest.raises(ValidationError):
        hermite_coefficient(Activation.RELU, 1.5)


@pytest.mark.parametrize('activation', [Activation.RELU, Activation.ERF])
def test_monte_carlo_agrees(activation):
    estimates = hermite_coefficients_mc(activation, 6, samples=10**7, seed=0)
    for r, estimate in enumerate(estimates):
        exact = hermite_coefficient(activation, r)
        if abs(exact) < 1e-6:
            assert abs(estimate) < 1e-3
        else:
            assert estimate == pytest.approx(exact, rel=1e-2)


def test_monte_carlo_single():
    assert hermite_coefficient_mc(Activation.RELU, 1, samples=10**5, seed=1) == pytest.approx(0.5, rel=1e-2)
