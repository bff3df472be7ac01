import math

import numpy as np
import pytest

import oracles
from detshock.errors import DomainError, RangeError
from detshock.gas_model import (
    FlowState,
    GasParams,
    bernoulli_residual,
    enthalpy,
    h_function,
    h_function_prime,
    incoming_state,
    mach,
    mach_of_rho,
    rho_hat,
    rho_max,
    rho_sonic,
    sonic_momentum_sq,
)

G2 = GasParams(2.0, 1.0)


def test_gas_params_reject_bad_values():
    with pytest.raises(DomainError):
        GasParams(1.0, 1.0)
    with pytest.raises(DomainError):
        GasParams(2.0, 0.0)
    with pytest.raises(DomainError):
        GasParams(float("nan"), 1.0)


def test_enthalpy_closed_form():
    assert enthalpy(G2, 0.5) == pytest.approx(0.5)
    g = GasParams(1.4, 1.0)
    assert enthalpy(g, 2.0) == pytest.approx(2.0**0.4 / 0.4, rel=1e-14)


def test_unit_state_is_sonic():
    assert mach(G2, FlowState(1.0, 1.0, 0.0)) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("eps", [0.1, 0.05, 0.01])
def test_incoming_state_matches_oracle(eps):
    rho, u = oracles.incoming(2.0, 1.0, eps)
    inc = incoming_state(G2, eps)
    assert inc.rho == pytest.approx(rho, rel=1e-13)
    assert inc.u1 == pytest.approx(u, rel=1e-13)
    assert inc.u2 == 0.0
    assert mach(G2, inc) == pytest.approx(1.0 / eps, rel=1e-10)
    assert abs(bernoulli_residual(G2, inc)) <= 1e-12


def test_incoming_state_reference_numbers():
    inc = incoming_state(G2, 0.1)
    assert inc.u1 == pytest.approx(1.400280, abs=1e-6)
    assert inc.rho == pytest.approx(1.0 / 51.0, rel=1e-12)


@pytest.mark.parametrize("eps", [0.0, 1.0, -0.1])
def test_incoming_state_domain(eps):
    with pytest.raises(DomainError):
        incoming_state(G2, eps)


def test_h_function_values():
    assert h_function(G2, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert h_function(G2, 2.0 / 3.0) == pytest.approx(4.0 / 27.0, rel=1e-14)
    assert h_function(GasParams(3.0, 2.0), 0.0) == 0.0
    with pytest.raises(DomainError):
        h_function(G2, -0.1)


@pytest.mark.parametrize("gamma,b0,sonic,top", [(2.0, 1.0, 2.0 / 3.0, 1.0), (3.0, 2.0, math.sqrt(2.0), 2.0)])
def test_sonic_and_max_density(gamma, b0, sonic, top):
    g = GasParams(gamma, b0)
    assert rho_sonic(g) == pytest.approx(sonic, rel=1e-14)
    assert rho_max(g) == pytest.approx(top, rel=1e-14)
    assert rho_sonic(g) < rho_max(g)


@pytest.mark.parametrize("gamma,b0", [(1.4, 1.0), (2.0, 1.0), (3.0, 2.0), (1.1, 0.3)])
def test_h_peaks_at_sonic_density(gamma, b0):
    g = GasParams(gamma, b0)
    r = rho_sonic(g)
    step = 1e-6 * r
    fd = (h_function(g, r + step) - h_function(g, r - step)) / (2.0 * step)
    assert abs(fd) <= 1e-10 * max(1.0, h_function(g, r) / r)
    assert abs(h_function_prime(g, r)) <= 1e-12


def test_h_prime_sign_pattern():
    rng = np.random.default_rng(3)
    for gamma, b0 in [(1.4, 1.0), (2.0, 1.0), (3.0, 2.0)]:
        g = GasParams(gamma, b0)
        rho = rng.uniform(0.0, rho_max(g), 1000)
        step = 1e-7 * rho_max(g)
        fd = (h_function(g, rho + step) - h_function(g, np.maximum(rho - step, 0.0))) / (
            rho + step - np.maximum(rho - step, 0.0)
        )
        away = np.abs(rho - rho_sonic(g)) > 1e-5 * rho_max(g)
        below = away & (rho < rho_sonic(g))
        above = away & (rho > rho_sonic(g))
        assert np.all(fd[below] > 0.0)
        assert np.all(fd[above] < 0.0)


def test_rho_hat_endpoints():
    assert rho_hat(G2, 0.0) == pytest.approx(1.0, rel=1e-12)
    near = sonic_momentum_sq(G2) * (1.0 - 1e-12)
    assert rho_hat(G2, near) == pytest.approx(2.0 / 3.0, abs=1e-5)


def test_rho_hat_matches_bisection_oracle():
    zeta = np.linspace(0.0, 0.99 * sonic_momentum_sq(G2), 25)
    got = rho_hat(G2, zeta)
    from scipy.optimize import brentq

    for z, r in zip(zeta, got):
        ref = brentq(lambda x: x * x * (1.0 - x) - 0.5 * z, 2.0 / 3.0, 1.0, xtol=1e-15)
        assert r == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("gamma,b0", [(1.4, 1.0), (2.0, 1.0), (3.0, 2.0)])
def test_rho_hat_round_trip(gamma, b0):
    g = GasParams(gamma, b0)
    rho = np.linspace(rho_sonic(g), rho_max(g), 200)[1:]
    back = rho_hat(g, 2.0 * h_function(g, rho))
    assert np.max(np.abs(back - rho) / rho) <= 1e-10


def test_rho_hat_rejects_sonic_momentum():
    with pytest.raises(RangeError):
        rho_hat(G2, sonic_momentum_sq(G2))
    with pytest.raises(RangeError):
        rho_hat(G2, np.array([0.1, 10.0]))


def test_subsonic_branch():
    zeta = np.linspace(1e-6, 0.999999, 400) * sonic_momentum_sq(G2)
    assert np.all(mach_of_rho(G2, rho_hat(G2, zeta)) < 1.0)


def test_mach_of_rho_values():
    assert mach_of_rho(G2, 2.0 / 3.0) == pytest.approx(1.0, rel=1e-13)
    assert mach_of_rho(G2, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert mach_of_rho(G2, 0.7) > mach_of_rho(G2, 0.9)
    rho = np.linspace(0.01, 1.0, 300)
    assert np.all(np.diff(mach_of_rho(G2, rho)) < 0.0)
    with pytest.raises(DomainError):
        mach_of_rho(G2, 0.0)
