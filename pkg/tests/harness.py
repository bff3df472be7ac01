"""Randomised-parameter invariant harness shared by the property tests.

Each draw picks physical parameters inside the solver preconditions and
returns the names of the invariants it violated (empty when all hold).
The checks are written against the governing relations rather than the
package's own verifier wherever that is cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

import oracles
from detshock import free_boundary as fb
from detshock import geometry as ge
from detshock.gas_model import (
    GasParams,
    h_function,
    incoming_state,
    mach,
    mach_of_rho,
    rho_hat,
    rho_max,
    rho_sonic,
    sonic_momentum_sq,
)
from detshock.shock_polar import detachment_angle, solve_branches
from detshock.verifier import verify

SOLVE_GRID = (16, 32)


@dataclass(frozen=True)
class Draw:
    gamma: float
    b0: float
    eps: float
    theta_w: float
    h0: float
    d0: float


def draw_parameters(rng: np.random.Generator) -> Draw:
    """Uniform draw inside the preconditions, with the wedge below detachment."""
    gamma = float(rng.uniform(1.2, 3.0))
    b0 = float(rng.uniform(0.5, 2.0))
    eps = float(rng.uniform(0.02, 0.15))
    g = GasParams(gamma, b0)
    theta_max = min(math.radians(45.0), detachment_angle(g, eps) - math.radians(5.0))
    theta_w = float(rng.uniform(math.radians(20.0), theta_max))
    h0 = float(rng.uniform(0.5, 2.0))
    d0 = float(rng.uniform(0.5, 1.5)) * h0
    return Draw(gamma, b0, eps, theta_w, h0, d0)


def gas_invariants(d: Draw, rng: np.random.Generator) -> list[str]:
    g = GasParams(d.gamma, d.b0)
    bad = []
    top, sonic = rho_max(g), rho_sonic(g)
    rho = rng.uniform(0.0, top, 1000)
    step = 1e-7 * top
    lo = np.maximum(rho - step, 0.0)
    fd = (h_function(g, rho + step) - h_function(g, lo)) / (rho + step - lo)
    away = np.abs(rho - sonic) > 1e-5 * top
    if not (np.all(fd[away & (rho < sonic)] > 0.0) and np.all(fd[away & (rho > sonic)] < 0.0)):
        bad.append("gas.h_prime_signs")
    dens = rng.uniform(sonic, top, 200)
    dens = dens[dens > sonic * (1.0 + 1e-6)]
    if np.max(np.abs(rho_hat(g, 2.0 * h_function(g, dens)) - dens) / dens) > 1e-10:
        bad.append("gas.rho_hat_round_trip")
    zeta = rng.uniform(0.0, 1.0, 200) * sonic_momentum_sq(g)
    zeta = zeta[zeta > 0.0]
    if not np.all(mach_of_rho(g, rho_hat(g, zeta)) < 1.0):
        bad.append("gas.subsonic_branch")
    if abs(mach(g, incoming_state(g, d.eps)) * d.eps - 1.0) > 1e-10:
        bad.append("gas.incoming_mach")
    return bad


def polar_invariants(d: Draw, brute_force: bool = True) -> list[str]:
    g = GasParams(d.gamma, d.b0)
    inc = incoming_state(g, d.eps)
    bad = []
    strong, weak = solve_branches(g, d.eps, d.theta_w)
    for sol in (strong, weak):
        nu = np.array([1.0, -sol.s]) / math.hypot(1.0, sol.s)
        u = np.array([sol.u, sol.u * sol.kappa_w])
        un, un_inf = float(u @ nu), inc.u1 * nu[0]
        if not (sol.rho > inc.rho and 0.0 < un < un_inf):
            bad.append(f"polar.entropy.{sol.branch.value}")
        jump = np.array([inc.u1, 0.0]) - u
        if abs(jump[0] * (-sol.s) - jump[1]) > 1e-8 * np.linalg.norm(jump):
            bad.append(f"polar.parallel.{sol.branch.value}")
    if not (0.0 < strong.u < weak.u < inc.u1):
        bad.append("polar.ordering")
    if brute_force:
        roots = oracles.brute_force_roots(d.gamma, d.b0, d.eps, d.theta_w)
        for sol in (strong, weak):
            x = np.array([sol.rho, sol.u, sol.s])
            if not roots or min(np.max(np.abs(x - r)) for r in roots) > 1e-6:
                bad.append(f"polar.brute_force.{sol.branch.value}")
    return bad


def body_invariants(d: Draw, n: int = 10_000) -> list[str]:
    body = ge.default_body(d.theta_w, d.h0)
    cot = 1.0 / math.tan(d.theta_w)
    x = np.linspace(0.0, 3.0 * d.h0, n)
    step = 1e-6 * d.h0
    b, b1, b2 = body.b(x), body.b(x, 1), body.b(x, 2)
    tol = 1e-6 * (1.0 + cot)
    bad = []
    if abs(body.b(0.0, 1)) > tol or abs(body.b(0.0, 3)) > tol / d.h0**2:
        bad.append("body.symmetric")
    fd1 = (body.b(x + step) - body.b(np.maximum(x - step, 0.0))) / (x + step - np.maximum(x - step, 0.0))
    if np.max(np.abs(fd1 - b1)) > 1e-5 * (1.0 + cot):
        bad.append("body.derivative_consistency")
    if not np.all(b1[1:] > 0.0):
        bad.append("body.increasing")
    if not np.all(b2 >= -tol / d.h0):
        bad.append("body.convex")
    tail = x >= d.h0
    if np.max(np.abs(b[tail] - x[tail] * cot)) > tol * (1.0 + x.max()):
        bad.append("body.wedge_tail")
    if not np.all((b1 >= -tol) & (b1 <= cot + tol)):
        bad.append("body.slope_bounds")
    if not np.all(b >= x * cot - tol):
        bad.append("body.above_wedge")
    if abs(body.b0 - 0.5 * d.h0 * cot) > 1e-12 * (1.0 + cot):
        bad.append("body.nose")
    return bad


def solve_invariants(d: Draw) -> list[str]:
    g = GasParams(d.gamma, d.b0)
    body = ge.default_body(d.theta_w, d.h0)
    n_s, n_t = SOLVE_GRID
    try:
        sol = fb.solve_free_boundary(body, g, d.eps, d.d0, None, fb.SolveSettings(n_s=n_s, n_t=n_t))
    except Exception as exc:  # noqa: BLE001 - any failure is a violation here
        return [f"solve.failed({type(exc).__name__})"]
    bad = []
    rep = sol.report
    if sol.shock(0.0) != body.b0 - d.d0 or sol.shock.f[0] != body.b0 - d.d0:
        bad.append("solve.origin")
    if not (rep.min_gap > 0.0 and np.all(body.b(sol.shock.x2) - sol.shock.f > 0.0)):
        bad.append("solve.detached")
    if not rep.fixed_point_residual <= 2.0 * rep.tol_f:
        bad.append("solve.fixed_point")
    psi = sol.field.psi
    if np.min(psi) < -1e-12 * max(1.0, float(np.max(np.abs(psi)))):
        bad.append("solve.psi_nonnegative")
    if not np.all(sol.field.grad_sq < sonic_momentum_sq(g)):
        bad.append("solve.admissible")
    first = verify(sol.field, sol.shock, body, g, d.eps, d.d0, sol.background).to_text()
    second = verify(sol.field, sol.shock, body, g, d.eps, d.d0, sol.background).to_text()
    if first != second or first != rep.checks.to_text():
        bad.append("solve.verifier_deterministic")
    return bad


def run_draw(seed: int, solve: bool = True) -> tuple[Draw, list[str]]:
    """All invariants for one seeded draw."""
    rng = np.random.default_rng(seed)
    d = draw_parameters(rng)
    bad = gas_invariants(d, rng) + polar_invariants(d) + body_invariants(d)
    if solve:
        bad += solve_invariants(d)
    return d, bad
