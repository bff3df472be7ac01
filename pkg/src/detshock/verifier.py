"""Post-hoc checks of a converged shock and stream function.

Every check is a pure function of the shock, the field and the parameters.
Signs are tested against grid-scale tolerances, never exactly: the
continuum inequalities carry O(h^2) noise once discretised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .elliptic_solver import Background, StreamField
from .gas_model import FlowState, GasParams, incoming_state
from .geometry import BluntBody, ShockCurve, check_axioms
from .shock_polar import normal_shock_speed


@dataclass
class ShockTraceState:
    """Downstream and upstream states at the shock nodes.

    Attributes
    ----------
    x2 : ndarray
        Node heights.
    fprime : ndarray
        Shock slope ``f'`` at the nodes.
    incoming : FlowState
        Uniform upstream state ``(rho_inf, u_inf, 0)``.
    rho : ndarray
        Downstream density.
    u : ndarray, shape (n, 2)
        Downstream velocity.
    normal, tangent : ndarray, shape (n, 2)
        ``nu = (1, -f') / sqrt(1 + f'^2)`` and ``tau = nu_perp``.
    """

    x2: np.ndarray
    fprime: np.ndarray
    incoming: FlowState
    rho: np.ndarray
    u: np.ndarray
    normal: np.ndarray
    tangent: np.ndarray

    @property
    def q(self) -> np.ndarray:
        return np.hypot(self.u[:, 0], self.u[:, 1])

    @property
    def flow_angle(self) -> np.ndarray:
        return np.arctan2(self.u[:, 1], self.u[:, 0])

    @property
    def beta(self) -> np.ndarray:
        """Angle between the velocity jump and the downstream velocity direction."""
        return np.arctan2(self.incoming.u1 - self.u[:, 0], self.u[:, 1])


def build_trace(field: StreamField, shock: ShockCurve, g: GasParams, eps: float) -> ShockTraceState:
    """Collect the shock-side column of the grid into a trace."""
    inc = incoming_state(g, eps)
    x2 = field.grid.x[0, :, 1].copy()
    fp = np.asarray(shock(x2, 1), dtype=float)
    norm = np.sqrt(1.0 + fp * fp)
    nu = np.stack([1.0 / norm, -fp / norm], axis=-1)
    tau = np.stack([fp / norm, 1.0 / norm], axis=-1)
    return ShockTraceState(
        x2=x2,
        fprime=fp,
        incoming=inc,
        rho=field.rho[0, :].copy(),
        u=field.velocity[0, :, :].copy(),
        normal=nu,
        tangent=tau,
    )


# ----------------------------------------------------------------------------
# individual checks


def check_rh(trace: ShockTraceState) -> dict[str, float]:
    """Largest normal mass-flux jump and tangential velocity jump.

    Scaled by ``rho_inf u_inf`` and ``u_inf`` respectively.
    """
    inc = trace.incoming
    m_inf = inc.rho * inc.u1
    flux_down = trace.rho * np.sum(trace.u * trace.normal, axis=-1)
    flux_up = m_inf * trace.normal[:, 0]
    jump_t = np.sum(trace.u * trace.tangent, axis=-1) - inc.u1 * trace.tangent[:, 0]
    return {
        "mass": float(np.max(np.abs(flux_down - flux_up)) / m_inf),
        "tangential": float(np.max(np.abs(jump_t)) / inc.u1),
    }


def check_entropy(trace: ShockTraceState) -> dict[str, float]:
    """Minimum density rise, normal-velocity drop and downstream normal velocity."""
    inc = trace.incoming
    un = np.sum(trace.u * trace.normal, axis=-1)
    return {
        "density_rise": float(np.min(trace.rho - inc.rho)),
        "normal_drop": float(np.min(inc.u1 * trace.normal[:, 0] - un)),
        "normal_velocity": float(np.min(un)),
    }


def check_subsonic(field: StreamField, g: GasParams) -> tuple[float, float]:
    """``(max Mach, 1 - max Mach)`` over all nodes."""
    mmax = float(np.max(field.mach(g)))
    return mmax, 1.0 - mmax


def check_velocity_signs(field: StreamField, radius_cells: float = 2.0) -> dict[str, float]:
    """Velocity sign diagnostics.

    ``u1_min`` excludes a ball of ``radius_cells`` cells around the nose
    ``P0``; ``u2_min`` excludes the axis.  ``nose_speed`` is ``|u|`` at ``P0``.
    """
    grid = field.grid
    u = field.velocity
    p0 = grid.x[-1, 0]
    cell = max(
        float(np.linalg.norm(grid.x[-1, 0] - grid.x[-2, 0])),
        float(np.linalg.norm(grid.x[-1, 1] - grid.x[-1, 0])),
    )
    far = np.linalg.norm(grid.x - p0, axis=-1) > radius_cells * cell
    return {
        "u1_min": float(np.min(u[..., 0][far])),
        "u2_min": float(np.min(u[:, 1:, 1])),
        "nose_speed": float(np.hypot(*u[-1, 0])),
    }


def check_q_monotone(trace: ShockTraceState) -> dict[str, float]:
    """Smallest forward difference of ``q`` along the shock and ``q(P2) - q(P1)``."""
    q = trace.q
    return {"min_step": float(np.min(np.diff(q))), "rise": float(q[-1] - q[0])}


def entropy_shape_function(eta, gamma: float):
    """``F(eta) = ((gamma + 1) eta^2 - 2 eta^(gamma + 1)) / (gamma - 1) - 1``.

    ``F(1) = 0`` and ``F < 0`` on ``(0, 1)``; it controls the sign of
    ``d(sin^2 beta)/dq``.
    """
    eta = np.asarray(eta, dtype=float)
    return ((gamma + 1.0) * eta**2 - 2.0 * eta ** (gamma + 1.0)) / (gamma - 1.0) - 1.0


def sin2_beta_closed_form(q, rho, incoming: FlowState):
    """``sin^2 beta`` from the jump conditions: ``(q^2 - u^2) / (u^2 (rho_inf^2/rho^2 - 1))``."""
    ui = incoming.u1
    ratio = incoming.rho / np.asarray(rho, dtype=float)
    return (np.asarray(q) ** 2 - ui * ui) / (ui * ui * (ratio**2 - 1.0))


def check_convexity(shock: ShockCurve, trace: ShockTraceState, g: GasParams) -> dict[str, float]:
    """Shock convexity and the pieces of its mechanism along the trace.

    Returns the minimum spline ``f''`` at the nodes (the spline's ``f''`` is
    piecewise linear, so node values bound it), the largest mismatch between
    geometric and closed-form ``sin^2 beta``, the largest ``F(rho_inf/rho)``
    and the largest discrete ``d(sin^2 beta)/dq`` between consecutive nodes.
    """
    fpp = np.asarray(shock(shock.x2, 2))
    sin2_geo = 1.0 / (1.0 + trace.fprime**2)
    q = trace.q
    sin2_cf = sin2_beta_closed_form(q, trace.rho, trace.incoming)
    F = entropy_shape_function(trace.incoming.rho / trace.rho, g.gamma)
    dq = np.diff(q)
    ds = np.diff(sin2_cf)
    usable = np.abs(dq) > 1e-12 * float(np.max(np.abs(q)))
    slope = float(np.max(ds[usable] / dq[usable])) if np.any(usable) else math.nan
    return {
        "min_fpp": float(np.min(fpp)),
        "sin2_mismatch": float(np.max(np.abs(sin2_geo - sin2_cf))),
        "max_F": float(np.max(F)),
        "max_dsin2_dq": slope,
    }


def check_asymptotics(field: StreamField, shock: ShockCurve, background: Background) -> dict[str, float]:
    """Far-field deviations from the strong-shock background.

    ``far_field`` is the mean of ``|grad_perp psi - rho_st u_st (1, kappa_w)|``
    over nodes with ``t >= 0.9``, relative to the background momentum;
    ``fprime_end`` is ``|f'(L) - s_st|``.
    """
    grid = field.grid
    top = grid.t >= 0.9 - 1e-12
    grad = field.grad[:, top, :]
    perp = np.stack([grad[..., 1], -grad[..., 0]], axis=-1)
    k = background.strong.kappa_w
    target = background.momentum * np.array([1.0, k])
    dev = np.linalg.norm(perp - target, axis=-1)
    return {
        "far_field": float(np.mean(dev) / np.linalg.norm(target)),
        "fprime_end": float(abs(shock(shock.L, 1) - background.slope)),
    }


def normal_shock_state(g: GasParams, eps: float) -> tuple[float, float]:
    """Subsonic root ``(rho, u)`` of the one-dimensional jump conditions."""
    inc = incoming_state(g, eps)
    u = normal_shock_speed(g, eps)
    return inc.rho * inc.u1 / u, u


def check_axis_state(field: StreamField, g: GasParams, eps: float) -> float:
    """Relative deviation of the state at ``P1`` from the normal-shock root."""
    rho_n, u_n = normal_shock_state(g, eps)
    rho, u1 = float(field.rho[0, 0]), float(field.velocity[0, 0, 0])
    return max(abs(rho - rho_n) / rho_n, abs(u1 - u_n) / u_n)


# ----------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class CheckResult:
    """One line of a verification report.

    ``relation`` is ``"<="``, ``">="``, ``"<"``, ``">"`` or ``"info"``
    (reported only; passes when finite).
    """

    name: str
    value: float
    relation: str
    tolerance: float

    @property
    def passed(self) -> bool:
        v, t = self.value, self.tolerance
        if not math.isfinite(v):
            return False
        return {
            "<=": v <= t,
            ">=": v >= t,
            "<": v < t,
            ">": v > t,
            "info": True,
        }[self.relation]

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<24s} {self.value: .6e} {self.relation:>4s} {self.tolerance: .6e} {status}"


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)

    def add(self, name: str, value: float, relation: str, tolerance: float) -> None:
        self.checks.append(CheckResult(name, float(value), relation, float(tolerance)))

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        return "\n".join(c.line() for c in self.checks) + "\n"


@dataclass(frozen=True)
class Tolerances:
    """Thresholds of the verification report.

    Grid-dependent ones (``tol_cvx``, ``tol_q``, ``stagnation``) are filled
    in by :func:`default_tolerances` when left as ``None``.
    """

    rh: float = 1e-3
    sigma_min: float = 0.05
    sign_rel: float = 1e-8
    sin2: float = 1e-3
    axis_rel: float = 0.02
    gap_fraction: float = 0.5
    tol_cvx: float | None = None
    tol_q: float | None = None
    stagnation: float | None = None


def default_tolerances(tol: Tolerances, field: StreamField, shock: ShockCurve, trace: ShockTraceState, d0: float):
    """Resolve grid-scale tolerances: ``10 h^2`` times a problem scale, ``h = 1/(n_t - 1)``."""
    n_s, n_t = field.grid.shape
    h = 1.0 / (n_t - 1)
    tol_cvx = tol.tol_cvx
    if tol_cvx is None:
        tol_cvx = 10.0 * h * h * float(np.max(np.abs(shock(shock.x2, 1)))) / d0
    tol_q = tol.tol_q if tol.tol_q is not None else 10.0 * h * h * float(np.max(trace.q))
    stag = tol.stagnation
    if stag is None:
        stag = 10.0 * max(1.0 / (n_s - 1), h) * trace.incoming.u1
    return tol_cvx, tol_q, stag


def verify(
    field: StreamField,
    shock: ShockCurve,
    body: BluntBody,
    g: GasParams,
    eps: float,
    d0: float,
    background: Background,
    tolerances: Tolerances | None = None,
) -> VerificationReport:
    """Run every check and collect the results.

    The nose-stagnation and axis normal-shock checks are included only for
    blunt bodies; on a straight wedge the apex is not a stagnation point.
    """
    tol = tolerances or Tolerances()
    trace = build_trace(field, shock, g, eps)
    tol_cvx, tol_q, stag = default_tolerances(tol, field, shock, trace, d0)
    tol_sign = tol.sign_rel * trace.incoming.u1
    blunt = check_axioms(body)["blunt"]
    rep = VerificationReport()

    rep.add("shock_origin", abs(shock(0.0) - (body.b0 - d0)), "<=", 1e-12 * (1.0 + abs(body.b0)))
    gap = body.b(trace.x2) - shock.f
    rep.add("detached_gap", float(np.min(gap)), ">=", tol.gap_fraction * d0)
    rh = check_rh(trace)
    rep.add("rh_mass", rh["mass"], "<=", tol.rh)
    rep.add("rh_tangential", rh["tangential"], "<=", tol.rh)
    ent = check_entropy(trace)
    rep.add("entropy_density_rise", ent["density_rise"], ">", 0.0)
    rep.add("entropy_normal_drop", ent["normal_drop"], ">", 0.0)
    rep.add("entropy_normal_velocity", ent["normal_velocity"], ">", 0.0)
    mmax, _ = check_subsonic(field, g)
    rep.add("max_mach", mmax, "<=", 1.0 - tol.sigma_min)
    signs = check_velocity_signs(field)
    rep.add("u1_min_off_nose", signs["u1_min"], ">=", -tol_sign)
    rep.add("u2_min_off_axis", signs["u2_min"], ">=", -tol_sign)
    if blunt:
        rep.add("nose_speed", signs["nose_speed"], "<=", stag)
    qm = check_q_monotone(trace)
    rep.add("q_min_step", qm["min_step"], ">=", -tol_q)
    rep.add("q_rise", qm["rise"], ">=", -tol_q)
    cv = check_convexity(shock, trace, g)
    rep.add("convexity_min_fpp", cv["min_fpp"], ">=", -tol_cvx)
    rep.add("sin2beta_mismatch", cv["sin2_mismatch"], "<=", tol.sin2)
    rep.add("shape_function_max", cv["max_F"], "<", 0.0)
    rep.add("dsin2beta_dq_max", cv["max_dsin2_dq"], "<", 0.0)
    if blunt:
        rep.add("axis_normal_shock", check_axis_state(field, g, eps), "<=", tol.axis_rel)
    asym = check_asymptotics(field, shock, background)
    rep.add("asym_far_field", asym["far_field"], "info", 0.0)
    rep.add("asym_fprime", asym["fprime_end"], "info", 0.0)
    return rep
