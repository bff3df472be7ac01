"""Oblique-shock Rankine-Hugoniot relations for a straight wedge.

Downstream of a straight shock attached to a wedge of half-angle ``theta_w``
the velocity is ``u * (1, kappa_w)`` with ``kappa_w = tan(theta_w)``; the
shock has slope ``s = dx1/dx2``.  Two roots exist below the detachment angle:
the strong branch (small ``u``, near-normal shock) and the weak branch.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .csvio import write_table
from .errors import BranchCollisionError, ConvergenceError, DomainError
from .gas_model import (
    FlowState,
    GasParams,
    enthalpy,
    enthalpy_inverse,
    incoming_state,
)

EPS_GUARD = 0.25
_NEWTON_MAXITER = 60


class Branch(enum.Enum):
    STRONG = "strong"
    WEAK = "weak"


@dataclass(frozen=True)
class PolarSolution:
    """One root ``(rho, u, s)`` of the wedge Rankine-Hugoniot system.

    ``u`` scales the downstream velocity ``u * (1, kappa_w)`` and ``s`` is the
    shock slope ``dx1/dx2``.
    """

    rho: float
    u: float
    s: float
    branch: Branch
    kappa_w: float

    @property
    def velocity(self) -> tuple[float, float]:
        return (self.u, self.u * self.kappa_w)

    @property
    def speed(self) -> float:
        return self.u * math.hypot(1.0, self.kappa_w)

    def normal(self) -> np.ndarray:
        """Unit shock normal ``(1, -s)/sqrt(1 + s^2)``."""
        return np.array([1.0, -self.s]) / math.hypot(1.0, self.s)

    def entropy_margins(self, incoming: FlowState) -> dict[str, float]:
        """Density jump and the two normal-velocity margins (all must be > 0).

        Valid at a converged root, where the normal mass flux is continuous.
        """
        # mass balance gives u.nu without the cancellation in u (1 - kappa s)
        nu = self.normal()
        un = incoming.rho * incoming.u1 * nu[0] / self.rho
        un_inf = incoming.u1 * nu[0]
        return {
            "density_jump": self.rho - incoming.rho,
            "normal_velocity": un,
            "normal_velocity_drop": un_inf - un,
        }


@dataclass
class PolarCurve:
    """Sampled shock polar ``v = f_polar(u)`` on ``[u0, u_inf]``."""

    samples: np.ndarray
    u0: float
    u_inf: float
    dropped: list[float] = field(default_factory=list)

    @property
    def u(self) -> np.ndarray:
        return self.samples[:, 0]

    @property
    def v(self) -> np.ndarray:
        return self.samples[:, 1]

    def second_differences(self) -> np.ndarray:
        """Divided second differences of ``v(u)`` at interior samples."""
        u, v = self.u, self.v
        d1 = np.diff(v) / np.diff(u)
        return 2.0 * np.diff(d1) / (u[2:] - u[:-2])


def _incoming_pair(incoming) -> tuple[float, float]:
    if isinstance(incoming, FlowState):
        return incoming.rho, incoming.u1
    rho_inf, u_inf = incoming
    return float(rho_inf), float(u_inf)


def rh_residual(g: GasParams, incoming, kappa_w: float, rho: float, u: float, s: float) -> np.ndarray:
    """Residuals of mass, tangential velocity and Bernoulli across the shock.

    Parameters
    ----------
    g : GasParams
    incoming : FlowState or (rho_inf, u_inf)
        Upstream state.  A plain pair admits the ``eps -> 0`` limit where the
        upstream density vanishes.
    kappa_w : float
        Wedge slope ``tan(theta_w)``.
    rho, u, s : float
        Downstream density, speed scale and shock slope.
    """
    if rho <= 0.0:
        raise DomainError("downstream density must be positive")
    rho_inf, u_inf = _incoming_pair(incoming)
    r1 = rho * u * (s * kappa_w - 1.0) + rho_inf * u_inf
    r2 = u * (s + kappa_w) - s * u_inf
    r3 = 0.5 * u * u * (1.0 + kappa_w**2) + enthalpy(g, rho) - g.b0_bernoulli
    return np.array([r1, r2, r3])


def rh_jacobian(g: GasParams, incoming, kappa_w: float, rho: float, u: float, s: float) -> np.ndarray:
    """Jacobian of :func:`rh_residual` with respect to ``(rho, u, s)``."""
    _, u_inf = _incoming_pair(incoming)
    sk = s * kappa_w - 1.0
    return np.array(
        [
            [u * sk, rho * sk, rho * u * kappa_w],
            [0.0, s + kappa_w, u - u_inf],
            [rho ** (g.gamma - 2.0), u * (1.0 + kappa_w**2), 0.0],
        ]
    )


def limit_roots(g: GasParams, kappa_w: float) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form roots at vanishing ``eps`` (strong, weak)."""
    b0 = g.b0_bernoulli
    strong = np.array([enthalpy_inverse(g, b0), 0.0, 0.0])
    weak = np.array(
        [
            enthalpy_inverse(g, b0 * kappa_w**2 / (1.0 + kappa_w**2)),
            math.sqrt(2.0 * b0) / (1.0 + kappa_w**2),
            1.0 / kappa_w,
        ]
    )
    return strong, weak


def _scaled_residual(g, incoming, kappa_w, x) -> float:
    rho, u, s = x
    rho_inf, u_inf = _incoming_pair(incoming)
    r = rh_residual(g, incoming, kappa_w, rho, u, s)
    tiny = 1e-300
    scale = np.array(
        [
            abs(rho * u) * (abs(s * kappa_w) + 1.0) + rho_inf * u_inf + tiny,
            abs(u) * (abs(s) + kappa_w) + abs(s * u_inf) + tiny,
            g.b0_bernoulli,
        ]
    )
    return float(np.max(np.abs(r) / scale))


def _newton(g, incoming, kappa_w, x0) -> np.ndarray:
    """Newton on the 3x3 system with step halving to keep ``rho, u > 0``."""
    x = np.array(x0, dtype=float)
    history = []
    for _ in range(_NEWTON_MAXITER):
        r = rh_residual(g, incoming, kappa_w, *x)
        jac = rh_jacobian(g, incoming, kappa_w, *x)
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular RH Jacobian", history, x) from exc
        lam = 1.0
        while lam > 1e-6:
            trial = x + lam * step
            if trial[0] > 0.0 and trial[1] > 0.0:
                break
            lam *= 0.5
        else:
            raise ConvergenceError("Newton step left the positive cone", history, x)
        x = trial
        history.append(_scaled_residual(g, incoming, kappa_w, x))
        if np.all(np.abs(lam * step) <= 1e-14 * np.maximum(np.abs(x), 1e-300)):
            break
    if not history or history[-1] > 1e-10:
        raise ConvergenceError("RH Newton did not converge", history, x)
    return x


def _eps_path(eps: float) -> np.ndarray:
    steps = max(0, math.ceil(math.log2(eps / 1e-4)))
    return eps * 0.5 ** np.arange(steps, -1, -1, dtype=float)


def solve_branches(
    g: GasParams, eps: float, theta_w: float, eps_guard: float = EPS_GUARD
) -> tuple[PolarSolution, PolarSolution]:
    """Strong and weak oblique-shock roots by continuation in ``eps``.

    Newton is seeded at the closed-form ``eps = 0`` roots and carried along a
    geometric ``eps`` path up to the target.

    Raises
    ------
    BranchCollisionError
        The wedge angle is at or beyond detachment, so the roots merge.
    ConvergenceError
        Continuation failed for another reason.
    """
    if not (0.0 < eps <= eps_guard):
        raise DomainError(f"eps must lie in (0, {eps_guard}], got {eps!r}")
    if not (0.0 < theta_w < 0.5 * math.pi):
        raise DomainError("theta_w must lie in (0, pi/2)")
    kappa_w = math.tan(theta_w)
    strong, weak = limit_roots(g, kappa_w)
    for e in _eps_path(eps):
        incoming = incoming_state(g, e)
        try:
            strong = _newton(g, incoming, kappa_w, strong)
            weak = _newton(g, incoming, kappa_w, weak)
        except ConvergenceError as exc:
            _diagnose_failure(g, e, theta_w, exc)
        if not _distinct(strong, weak):
            _diagnose_failure(g, e, theta_w, ConvergenceError("roots merged"))
    incoming = incoming_state(g, eps)
    sol_strong = PolarSolution(strong[0], strong[1], strong[2], Branch.STRONG, kappa_w)
    sol_weak = PolarSolution(weak[0], weak[1], weak[2], Branch.WEAK, kappa_w)
    if not (0.0 < sol_strong.u < sol_weak.u < incoming.u1):
        _diagnose_failure(g, eps, theta_w, ConvergenceError("branch ordering lost"))
    for sol in (sol_strong, sol_weak):
        margins = sol.entropy_margins(incoming)
        if min(margins.values()) <= 0.0 or sol.s < 0.0:
            raise ConvergenceError(f"{sol.branch.value} root violates entropy: {margins}")
    return sol_strong, sol_weak


def _distinct(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.max(np.abs(a - b) / (np.abs(a) + np.abs(b) + 1e-300)) > 1e-7)


def _diagnose_failure(g, eps, theta_w, exc):
    try:
        theta_det, _ = detachment_angle(g, eps, return_point=True)
    except ConvergenceError:
        theta_det = math.nan
    if not (theta_w < theta_det):
        raise BranchCollisionError(
            f"wedge angle {math.degrees(theta_w):.4f} deg is at or beyond the detachment "
            f"angle {math.degrees(theta_det):.4f} deg at eps={eps:.4g}",
            exc.history,
            exc.last_iterate,
        ) from exc
    raise ConvergenceError(
        f"RH continuation failed at eps={eps:.4g}: {exc}", exc.history, exc.last_iterate
    ) from exc


def _bernoulli_density(g: GasParams, speed_sq):
    return enthalpy_inverse(g, np.maximum(g.b0_bernoulli - 0.5 * speed_sq, 0.0))


def normal_shock_speed(g: GasParams, eps: float) -> float:
    """Subsonic downstream speed ``u0`` of the normal shock."""
    incoming = incoming_state(g, eps)
    flux = incoming.rho * incoming.u1
    q_sonic = math.sqrt(2.0 * (g.gamma - 1.0) * g.b0_bernoulli / (g.gamma + 1.0))
    return optimize.brentq(
        lambda q: _bernoulli_density(g, q * q) * q - flux, 0.0, q_sonic, xtol=1e-300, rtol=4 * np.finfo(float).eps
    )


def _polar_v(g: GasParams, incoming: FlowState, u: float) -> float:
    """Solve mass conservation across the shock for ``v >= 0`` at given ``u``."""
    u_inf = incoming.u1
    flux = incoming.rho * u_inf

    def mass(w):
        return _bernoulli_density(g, u * u + w) * (u * (u_inf - u) - w) - flux * (u_inf - u)

    w_hi = u * (u_inf - u)
    if not (mass(0.0) > 0.0 > mass(w_hi)):
        raise ConvergenceError(f"no polar bracket at u={u:.6g}")
    w = optimize.brentq(mass, 0.0, w_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps)
    return math.sqrt(w)


def polar_curve(g: GasParams, eps: float, n_samples: int = 128, eps_guard: float = EPS_GUARD) -> PolarCurve:
    """Sample the shock polar at Chebyshev-distributed downstream speeds.

    Samples whose root bracket fails are dropped and listed in
    ``PolarCurve.dropped``.
    """
    if not (0.0 < eps <= eps_guard):
        raise DomainError(f"eps must lie in (0, {eps_guard}], got {eps!r}")
    if n_samples < 16:
        raise DomainError("n_samples must be at least 16")
    incoming = incoming_state(g, eps)
    u0 = normal_shock_speed(g, eps)
    u_inf = incoming.u1
    k = np.arange(n_samples)
    us = 0.5 * (u0 + u_inf) - 0.5 * (u_inf - u0) * np.cos(np.pi * k / (n_samples - 1))
    rows = [(u0, 0.0)]
    dropped = []
    for u in us[1:-1]:
        try:
            rows.append((u, _polar_v(g, incoming, u)))
        except (ConvergenceError, ValueError):
            dropped.append(float(u))
    rows.append((u_inf, 0.0))
    return PolarCurve(np.array(rows), u0, u_inf, dropped)


def detachment_angle(g: GasParams, eps: float, n_samples: int = 64, return_point: bool = False):
    """Largest wedge angle reached by the polar, ``max arctan(v/u)``.

    The maximising sample is refined by a bounded scalar search on the exact
    polar between its two neighbours.  With ``return_point`` the tangency point ``(u, v)`` is returned
    too.
    """
    curve = polar_curve(g, eps, n_samples)
    incoming = incoming_state(g, eps)
    u, v = curve.u, curve.v
    angle = np.arctan2(v, u)
    k = int(np.argmax(angle))
    k = min(max(k, 1), len(u) - 2)

    def neg_angle(x):
        return -math.atan2(_polar_v(g, incoming, x), x)

    # bounded search never steps outside the sampled neighbours, where the
    # polar root may not exist
    res = optimize.minimize_scalar(
        neg_angle, bounds=(u[k - 1], u[k + 1]), method="bounded", options={"xatol": 1e-13}
    )
    u_star = float(res.x)
    theta = -float(res.fun)
    if return_point:
        return theta, (u_star, _polar_v(g, incoming, u_star))
    return theta


def strong_deviation(g: GasParams, eps: float, theta_w: float) -> float:
    """``|(rho_st, u_st, s_st) - (rho_max, 0, 0)|``, the size of the strong-branch perturbation."""
    limit, _ = limit_roots(g, math.tan(theta_w))
    strong, _ = solve_branches(g, eps, theta_w)
    return float(np.linalg.norm(np.array([strong.rho, strong.u, strong.s]) - limit))


def q_gamma_rate(g: GasParams, eps_list, theta_w: float = math.pi / 6) -> float:
    """Fitted exponent of the strong-branch deviation from its ``eps = 0`` limit.

    Returns the least-squares slope of ``log |(rho, u, s) - (rho_max, 0, 0)|``
    against ``log eps``.
    """
    eps_arr = np.asarray(eps_list, dtype=float)
    if eps_arr.size < 3 or np.any(np.diff(eps_arr) >= 0.0):
        raise DomainError("eps_list must be strictly decreasing with at least 3 entries")
    devs = [strong_deviation(g, float(e), theta_w) for e in eps_arr]
    slope, _ = np.polyfit(np.log(eps_arr), np.log(devs), 1)
    return float(slope)


def write_polar_csv(path, curve: PolarCurve, g: GasParams, eps: float, extra_header=()) -> None:
    """CSV with columns ``u,v`` after a ``# gamma,B0,eps`` header."""
    header = ["gamma,B0,eps", f"{g.gamma!r},{g.b0_bernoulli!r},{eps!r}", *extra_header]
    write_table(path, ["u", "v"], {"u": curve.u, "v": curve.v}, header)
