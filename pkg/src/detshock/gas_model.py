"""Polytropic thermodynamics for steady irrotational flow.

All relations follow from the pressure law ``p = rho**gamma / gamma`` together
with the Bernoulli constant ``B0``.  Scalars and numpy arrays are both
accepted wherever a density appears.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, RangeError

RHO_HAT_RTOL = 1e-12


@dataclass(frozen=True)
class GasParams:
    """Adiabatic exponent and Bernoulli constant.

    Parameters
    ----------
    gamma : float
        Adiabatic exponent, strictly greater than one.
    b0_bernoulli : float
        Bernoulli constant ``B0 > 0``.
    """

    gamma: float
    b0_bernoulli: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.gamma) and self.gamma > 1.0):
            raise DomainError(f"gamma must exceed 1, got {self.gamma!r}")
        if not (math.isfinite(self.b0_bernoulli) and self.b0_bernoulli > 0.0):
            raise DomainError(f"B0 must be positive, got {self.b0_bernoulli!r}")

    @property
    def c0_sq(self) -> float:
        """Squared sound speed at rest, ``(gamma - 1) B0``."""
        return (self.gamma - 1.0) * self.b0_bernoulli


@dataclass(frozen=True)
class FlowState:
    """Density and velocity at a point."""

    rho: float
    u1: float
    u2: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.rho) and self.rho > 0.0):
            raise DomainError(f"density must be positive, got {self.rho!r}")

    @property
    def speed(self) -> float:
        return math.hypot(self.u1, self.u2)


def _check_nonneg(rho):
    arr = np.asarray(rho, dtype=float)
    if np.any(~(arr >= 0.0)):
        raise DomainError("density must be non-negative")
    return arr


def _check_pos(rho):
    arr = np.asarray(rho, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError("density must be positive")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def enthalpy(g: GasParams, rho):
    """Enthalpy-like function ``rho**(gamma-1) / (gamma-1)``."""
    arr = _check_nonneg(rho)
    return _out(arr ** (g.gamma - 1.0) / (g.gamma - 1.0))


def enthalpy_inverse(g: GasParams, value):
    """Density whose enthalpy equals ``value`` (``value >= 0``)."""
    arr = np.asarray(value, dtype=float)
    if np.any(~(arr >= 0.0)):
        raise DomainError("enthalpy value must be non-negative")
    return _out(((g.gamma - 1.0) * arr) ** (1.0 / (g.gamma - 1.0)))


def sound_speed(g: GasParams, rho):
    """Local sound speed ``rho**((gamma-1)/2)``."""
    arr = _check_pos(rho)
    return _out(arr ** (0.5 * (g.gamma - 1.0)))


def mach(g: GasParams, state: FlowState) -> float:
    """Mach number of a flow state."""
    return state.speed / sound_speed(g, state.rho)


def bernoulli_residual(g: GasParams, state: FlowState) -> float:
    """``|u|^2/2 + h(rho) - B0``; zero for states on the Bernoulli surface."""
    return 0.5 * state.speed**2 + enthalpy(g, state.rho) - g.b0_bernoulli


def h_function(g: GasParams, rho):
    """Squared momentum density over two, ``rho**2 (B0 - h(rho))``."""
    arr = _check_nonneg(rho)
    return _out(arr**2 * (g.b0_bernoulli - arr ** (g.gamma - 1.0) / (g.gamma - 1.0)))


def h_function_prime(g: GasParams, rho):
    """Derivative of :func:`h_function` in density."""
    arr = _check_nonneg(rho)
    gm = g.gamma
    return _out(2.0 * arr * g.b0_bernoulli - (gm + 1.0) / (gm - 1.0) * arr**gm)


def rho_sonic(g: GasParams) -> float:
    """Density at which the flow is exactly sonic (maximiser of H)."""
    gm = g.gamma
    return (2.0 * (gm - 1.0) * g.b0_bernoulli / (gm + 1.0)) ** (1.0 / (gm - 1.0))


def rho_max(g: GasParams) -> float:
    """Stagnation density, the positive zero of H."""
    return ((g.gamma - 1.0) * g.b0_bernoulli) ** (1.0 / (g.gamma - 1.0))


def sonic_momentum_sq(g: GasParams) -> float:
    """Upper bound ``2 H(rho_sonic)`` for admissible ``|grad psi|^2``."""
    return 2.0 * h_function(g, rho_sonic(g))


def rho_hat(g: GasParams, grad_psi_sq, rtol: float = RHO_HAT_RTOL):
    """Subsonic density carrying a given squared momentum density.

    Solves ``H(rho) = grad_psi_sq / 2`` on ``(rho_sonic, rho_max]``.

    Parameters
    ----------
    g : GasParams
    grad_psi_sq : float or ndarray
        Squared stream-function gradient, ``0 <= zeta < 2 H(rho_sonic)``.
    rtol : float
        Relative tolerance on the density.

    Returns
    -------
    float or ndarray
        Density on the subsonic branch.

    Raises
    ------
    RangeError
        If any value reaches the sonic bound.
    """
    zeta = np.asarray(grad_psi_sq, dtype=float)
    limit = sonic_momentum_sq(g)
    if np.any(~(zeta >= 0.0)):
        raise DomainError("squared momentum density must be non-negative")
    if np.any(zeta >= limit):
        worst = float(np.max(zeta))
        raise RangeError(
            f"|grad psi|^2 = {worst:.6g} reached the sonic bound {limit:.6g}"
        )
    flat = np.ascontiguousarray(zeta.ravel())
    rho = kernels.rho_hat_array(
        flat, g.gamma, g.b0_bernoulli, rho_sonic(g), rho_max(g), rtol, 200
    )
    return _out(rho.reshape(zeta.shape))


def mach_of_rho(g: GasParams, rho):
    """Mach number of the Bernoulli state with density ``rho``."""
    arr = _check_pos(rho)
    hval = np.maximum(np.asarray(h_function(g, arr)), 0.0)
    return _out(np.sqrt(2.0 * hval / arr ** (g.gamma + 1.0)))


def incoming_state(g: GasParams, eps: float) -> FlowState:
    """Horizontal supersonic state with Mach number ``1/eps``.

    Parameters
    ----------
    g : GasParams
    eps : float
        Inverse Mach number in ``(0, 1)``.
    """
    if not (0.0 < eps < 1.0):
        raise DomainError(f"eps must lie in (0, 1), got {eps!r}")
    gm1 = g.gamma - 1.0
    base = gm1 * g.b0_bernoulli / (0.5 * gm1 + eps**2)
    u_inf = math.sqrt(base)
    rho_inf = eps ** (2.0 / gm1) * base ** (1.0 / gm1)
    return FlowState(rho=rho_inf, u1=u_inf, u2=0.0)
