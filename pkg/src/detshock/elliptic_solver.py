"""Quasilinear stream-function problem on a fixed cut-off domain.

The stream function satisfies ``grad_perp psi = rho u`` and the
non-divergence equation ``sum a_ij(grad psi) psi_ij = 0`` with

    a11 = c^2 - psi_x2^2 / rho^2,  a22 = c^2 - psi_x1^2 / rho^2,
    a12 = psi_x1 psi_x2 / rho^2,

where ``rho = rho_hat(|grad psi|^2)`` and ``c^2 = rho^(gamma-1)``.  Boundary
data: ``psi = rho_inf u_inf x2`` on the shock, ``psi = 0`` on the axis and
body, zero normal derivative on the cut.  The nonlinear problem is solved by
Picard iteration on frozen coefficients.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .csvio import write_table
from .errors import AdmissibilityError, ConvergenceError, EllipticityError, LinearSolverError, RangeError
from .gas_model import GasParams, incoming_state, mach_of_rho, rho_hat, sonic_momentum_sq
from .geometry import BodyFittedGrid, CutoffDomain
from .shock_polar import PolarSolution, solve_branches

DIRICHLET_TAGS = ("sym", "shock", "body", "P0", "P1", "P2", "P3")
SHOCK_TAGS = ("shock", "P1", "P2")
WALL_TAGS = ("sym", "body", "P0", "P3")


@dataclass
class StreamField:
    """Nodal stream function with its gradient and density."""

    grid: BodyFittedGrid
    psi: np.ndarray
    grad: np.ndarray
    rho: np.ndarray

    @property
    def velocity(self) -> np.ndarray:
        """``u = (psi_x2, -psi_x1) / rho``."""
        u = np.empty_like(self.grad)
        u[..., 0] = self.grad[..., 1] / self.rho
        u[..., 1] = -self.grad[..., 0] / self.rho
        return u

    @property
    def grad_sq(self) -> np.ndarray:
        return np.sum(self.grad**2, axis=-1)

    def mach(self, g: GasParams) -> np.ndarray:
        return mach_of_rho(g, self.rho)


def make_field(g: GasParams, grid: BodyFittedGrid, psi: np.ndarray) -> StreamField:
    """Attach gradient and subsonic density to nodal values.

    Raises
    ------
    AdmissibilityError
        If any node reaches the sonic momentum density.
    """
    grad = grid.gradient(psi)
    zeta = np.sum(grad**2, axis=-1)
    try:
        rho = rho_hat(g, zeta)
    except RangeError as exc:
        i, j = np.unravel_index(int(np.argmax(zeta)), zeta.shape)
        raise AdmissibilityError(
            f"sonic bound reached at node ({i}, {j}): |grad psi|^2 = {zeta[i, j]:.6g} "
            f">= {sonic_momentum_sq(g):.6g}"
        ) from exc
    return StreamField(grid=grid, psi=np.array(psi, dtype=float), grad=grad, rho=rho)


def psi_infinity(g: GasParams, eps: float, point) -> float | np.ndarray:
    """Upstream stream function ``rho_inf u_inf x2`` at a point ``(x1, x2)``."""
    inc = incoming_state(g, eps)
    x2 = np.asarray(point, dtype=float)[..., 1]
    out = inc.rho * inc.u1 * x2
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class Background:
    """Straight strong shock ``f0`` and the uniform downstream ``psi0``."""

    strong: PolarSolution
    b0: float
    d0: float

    @property
    def slope(self) -> float:
        return float(self.strong.s)

    @property
    def momentum(self) -> float:
        """``rho_st u_st``."""
        return float(self.strong.rho * self.strong.u)

    def f0(self, x2):
        return self.slope * np.asarray(x2, dtype=float) + self.b0 - self.d0

    def psi0(self, point):
        pts = np.asarray(point, dtype=float)
        k = self.strong.kappa_w
        return self.momentum * (pts[..., 1] - k * (pts[..., 0] - self.b0 + self.d0))

    def grad_psi0(self) -> np.ndarray:
        """Constant gradient ``(psi_x1, psi_x2)`` of ``psi0``."""
        return self.momentum * np.array([-self.strong.kappa_w, 1.0])


def background_pair(g: GasParams, eps: float, theta_w: float, d0: float, b0: float) -> Background:
    """Strong-shock background: shock line and affine stream function.

    ``psi0`` equals the upstream stream function along ``f0``.
    """
    strong, _ = solve_branches(g, eps, theta_w)
    return Background(strong=strong, b0=float(b0), d0=float(d0))


def coefficient_matrix(g: GasParams, grad: np.ndarray, rho: np.ndarray, ellipticity: float = 1e-4) -> np.ndarray:
    """Nodal symmetric matrices ``a_ij`` of the non-divergence operator.

    Raises
    ------
    EllipticityError
        If the smaller eigenvalue ``c^2 - q^2`` drops below
        ``ellipticity * (gamma - 1) B0`` at some node.
    """
    c2 = rho ** (g.gamma - 1.0)
    px = grad[..., 0] / rho
    py = grad[..., 1] / rho
    a = np.empty(grad.shape[:-1] + (2, 2))
    a[..., 0, 0] = c2 - py * py
    a[..., 1, 1] = c2 - px * px
    a[..., 0, 1] = px * py
    a[..., 1, 0] = px * py
    low = c2 - (px * px + py * py)
    floor = ellipticity * g.c0_sq
    if np.any(low < floor):
        idx = np.unravel_index(int(np.argmin(low)), low.shape)
        raise EllipticityError(f"ellipticity lost at node {idx}: min eigenvalue {low[idx]:.3g} < {floor:.3g}")
    return a


def coefficients(g: GasParams, field: StreamField, ellipticity: float = 1e-4) -> np.ndarray:
    """Coefficient matrices evaluated at a stream field."""
    return coefficient_matrix(g, field.grad, field.rho, ellipticity)


def computational_coefficients(grid: BodyFittedGrid, a: np.ndarray) -> tuple[np.ndarray, ...]:
    """Map ``a_ij d_ij`` to ``A d_ss + 2B d_st + C d_tt + D d_s + E d_t``."""
    K = grid.inv
    A = np.einsum("...ij,...i,...j->...", a, K[..., 0, :], K[..., 0, :])
    B = np.einsum("...ij,...i,...j->...", a, K[..., 0, :], K[..., 1, :])
    C = np.einsum("...ij,...i,...j->...", a, K[..., 1, :], K[..., 1, :])
    D = np.einsum("...ij,...ij->...", a, grid.xi_hess[..., 0, :, :])
    E = np.einsum("...ij,...ij->...", a, grid.xi_hess[..., 1, :, :])
    return A, B, C, D, E


def operator_terms(grid: BodyFittedGrid, a: np.ndarray, psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Discrete operator value and summed term magnitudes at interior nodes."""
    A, B, C, D, E = (np.ascontiguousarray(c[1:-1, 1:-1]) for c in computational_coefficients(grid, a))
    hs, ht = grid.hs, grid.ht
    p = psi
    pss = (p[2:, 1:-1] - 2.0 * p[1:-1, 1:-1] + p[:-2, 1:-1]) / hs**2
    ptt = (p[1:-1, 2:] - 2.0 * p[1:-1, 1:-1] + p[1:-1, :-2]) / ht**2
    pst = (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4.0 * hs * ht)
    ps = (p[2:, 1:-1] - p[:-2, 1:-1]) / (2.0 * hs)
    pt = (p[1:-1, 2:] - p[1:-1, :-2]) / (2.0 * ht)
    terms = (A * pss, 2.0 * B * pst, C * ptt, D * ps, E * pt)
    value = sum(terms)
    size = sum(np.abs(t) for t in terms)
    return value, size


def pde_residual(g: GasParams, field: StreamField) -> float:
    """Relative nodal residual of the nonlinear equation at interior nodes.

    The operator value is divided by the largest summed magnitude of its
    individual terms, which carries the ``c^2`` scale of the coefficients.
    """
    a = coefficients(g, field, ellipticity=0.0)
    value, size = operator_terms(field.grid, a, field.psi)
    scale = float(np.max(size))
    return float(np.max(np.abs(value)) / scale) if scale > 0.0 else 0.0


def _mask(grid: BodyFittedGrid, tags) -> np.ndarray:
    return np.isin(grid.tags, tags)


def boundary_values(
    grid: BodyFittedGrid,
    shock_data: Callable,
    wall_data: Callable | None = None,
) -> np.ndarray:
    """Nodal Dirichlet data: ``shock_data`` on the shock, ``wall_data`` (default 0) on axis and body."""
    values = np.zeros(grid.shape)
    shock = _mask(grid, SHOCK_TAGS)
    values[shock] = shock_data(grid.x[shock])
    if wall_data is not None:
        wall = _mask(grid, WALL_TAGS)
        values[wall] = wall_data(grid.x[wall])
    return values


def solve_linear_bvp(
    grid: BodyFittedGrid,
    a: np.ndarray,
    dirichlet: np.ndarray,
    normal: np.ndarray,
    neumann: np.ndarray | float = 0.0,
    source: np.ndarray | None = None,
    rtol: float = 1e-10,
) -> np.ndarray:
    """Solve the frozen-coefficient boundary value problem.

    Parameters
    ----------
    grid : BodyFittedGrid
    a : ndarray, shape (n_s, n_t, 2, 2)
        Coefficient matrices.
    dirichlet : ndarray, shape (n_s, n_t)
        Values imposed on shock, axis, body and corner nodes.
    normal : ndarray, shape (2,)
        Unit normal of the cut, along which the derivative is prescribed.
    neumann : float or ndarray, shape (n_s,)
        Prescribed normal derivative on the cut nodes (default 0).
    source : ndarray, optional
        Right-hand side of ``sum a_ij psi_ij = source`` at interior nodes.
    rtol : float
        Required relative residual of the sparse solve.

    Returns
    -------
    ndarray, shape (n_s, n_t)
    """
    n_s, n_t = grid.shape
    n = n_s * n_t
    hs, ht = grid.hs, grid.ht
    A, B, C, D, E = (np.ascontiguousarray(c) for c in computational_coefficients(grid, a))
    rows, cols, vals = kernels.assemble_interior(A, B, C, D, E, hs, ht)
    rhs = np.zeros(n)
    if source is not None:
        rhs.reshape(n_s, n_t)[1:-1, 1:-1] = source[1:-1, 1:-1]
    # row scaling by the interior diagonal keeps all rows O(1)
    interior_idx = (np.arange(1, n_s - 1)[:, None] * n_t + np.arange(1, n_t - 1)[None, :]).ravel()
    diag = (-2.0 * A[1:-1, 1:-1] / hs**2 - 2.0 * C[1:-1, 1:-1] / ht**2).ravel()
    row_scale = np.ones(n)
    row_scale[interior_idx] = 1.0 / np.abs(diag)

    # oblique derivative on the cut: central in s, one-sided in t
    jc = n_t - 1
    ic = np.arange(1, n_s - 1)
    cs = grid.inv[ic, jc, 0, :] @ normal
    ct = grid.inv[ic, jc, 1, :] @ normal
    base = ic * n_t + jc
    n_rows = [base] * 5
    n_cols = [base + n_t, base - n_t, base, base - 1, base - 2]
    n_vals = [cs / (2 * hs), -cs / (2 * hs), 1.5 * ct / ht, -2.0 * ct / ht, 0.5 * ct / ht]
    rhs[base] = np.broadcast_to(np.asarray(neumann, dtype=float), (n_s,))[ic]
    row_scale[base] = ht / np.abs(ct)

    dmask = _mask(grid, DIRICHLET_TAGS).ravel()
    d_idx = np.flatnonzero(dmask)
    rhs[d_idx] = dirichlet.ravel()[d_idx]

    all_rows = np.concatenate([rows, *n_rows, d_idx])
    all_cols = np.concatenate([cols, *n_cols, d_idx])
    all_vals = np.concatenate([vals, *n_vals, np.ones(d_idx.size)])
    mat = sp.csr_matrix((all_vals * row_scale[all_rows], (all_rows, all_cols)), shape=(n, n))
    rhs = rhs * row_scale
    try:
        lu = spla.splu(mat.tocsc())
        sol = lu.solve(rhs)
    except RuntimeError as exc:
        raise LinearSolverError(f"sparse LU failed: {exc}") from exc
    denom = max(float(np.max(np.abs(rhs))), 1e-300)
    res = float(np.max(np.abs(mat @ sol - rhs))) / denom
    if res > rtol:
        sol = sol + lu.solve(rhs - mat @ sol)
        res = float(np.max(np.abs(mat @ sol - rhs))) / denom
    if not np.all(np.isfinite(sol)) or res > rtol:
        cond = _condition_estimate(mat, lu)
        raise LinearSolverError(f"relative residual {res:.3g} > {rtol:.1g}; condition estimate {cond:.3g}")
    return sol.reshape(n_s, n_t)


def _condition_estimate(mat, lu) -> float:
    try:
        inv = spla.LinearOperator(mat.shape, matvec=lu.solve, rmatvec=lambda v: lu.solve(v, trans="T"))
        return float(spla.onenormest(mat) * spla.onenormest(inv))
    except Exception:  # noqa: BLE001 - purely diagnostic
        return math.nan


@dataclass
class PicardReport:
    """Per-iteration history of a nonlinear solve."""

    converged: bool
    iterations: int
    steps: list[float] = field(default_factory=list)
    residuals: list[float] = field(default_factory=list)


def solve_nonlinear(
    dom: CutoffDomain,
    grid: BodyFittedGrid,
    g: GasParams,
    eps: float,
    init: StreamField | np.ndarray | None = None,
    omega: float = 0.7,
    tol_psi: float = 1e-9,
    tol_pde: float = 1e-6,
    max_iters: int = 200,
    shock_data: Callable | None = None,
    wall_data: Callable | None = None,
    ellipticity: float = 1e-4,
) -> tuple[StreamField, PicardReport]:
    """Picard iteration for the quasilinear stream-function problem.

    Parameters
    ----------
    dom, grid : CutoffDomain, BodyFittedGrid
    g : GasParams
    eps : float
        Inverse upstream Mach number.
    init : StreamField or ndarray, optional
        Starting field; by default the frozen problem at zero gradient
        (Laplace-like) is solved first.
    omega : float
        Under-relaxation factor in ``(0, 1]``.
    tol_psi : float
        Stop when ``max |psi_{k+1} - psi_k| <= tol_psi * max |psi|``.
    tol_pde : float
        Required relative residual of the converged field.
    shock_data, wall_data : callable, optional
        Override the Dirichlet data (points -> values).  Defaults are the
        upstream stream function and zero.

    Raises
    ------
    ConvergenceError
        If the tolerance is not met within ``max_iters``.
    AdmissibilityError, EllipticityError
        If an iterate leaves the subsonic regime.
    """
    if not (0.0 < omega <= 1.0):
        raise ValueError("omega must lie in (0, 1]")
    if shock_data is None:
        shock_data = lambda pts: psi_infinity(g, eps, pts)  # noqa: E731
    data = boundary_values(grid, shock_data, wall_data)
    dmask = _mask(grid, DIRICHLET_TAGS)
    normal = dom.cutoff_normal

    if init is None:
        a0 = coefficient_matrix(g, np.zeros(grid.shape + (2,)), np.full(grid.shape, _rho_rest(g)))
        psi = solve_linear_bvp(grid, a0, data, normal)
    else:
        psi = np.array(init.psi if isinstance(init, StreamField) else init, dtype=float)
    psi[dmask] = data[dmask]
    current = make_field(g, grid, psi)
    report = PicardReport(converged=False, iterations=0)
    for it in range(1, max_iters + 1):
        a = coefficients(g, current, ellipticity)
        target = solve_linear_bvp(grid, a, data, normal)
        new_psi = current.psi + omega * (target - current.psi)
        step = float(np.max(np.abs(new_psi - current.psi)))
        current = make_field(g, grid, new_psi)
        scale = max(float(np.max(np.abs(new_psi))), 1e-300)
        report.steps.append(step / scale)
        report.residuals.append(pde_residual(g, current))
        report.iterations = it
        if step <= tol_psi * scale:
            report.converged = True
            break
    if not report.converged:
        raise ConvergenceError(
            f"Picard iteration stalled after {max_iters} steps (last step {report.steps[-1]:.3g})",
            report.steps,
            current,
        )
    if report.residuals[-1] > tol_pde:
        raise ConvergenceError(
            f"PDE residual {report.residuals[-1]:.3g} exceeds {tol_pde:.1g}", report.residuals, current
        )
    return current, report


def _rho_rest(g: GasParams) -> float:
    return ((g.gamma - 1.0) * g.b0_bernoulli) ** (1.0 / (g.gamma - 1.0))


def write_field_csv(path, field: StreamField, g: GasParams, header=()) -> None:
    """Node table ``i, j, x1, x2, psi, u1, u2, rho, mach``."""
    grid = field.grid
    n_s, n_t = grid.shape
    ii, jj = np.meshgrid(np.arange(n_s), np.arange(n_t), indexing="ij")
    u = field.velocity
    data = {
        "i": ii.ravel(),
        "j": jj.ravel(),
        "x1": grid.x[..., 0].ravel(),
        "x2": grid.x[..., 1].ravel(),
        "psi": field.psi.ravel(),
        "u1": u[..., 0].ravel(),
        "u2": u[..., 1].ravel(),
        "rho": field.rho.ravel(),
        "mach": field.mach(g).ravel(),
    }
    write_table(path, list(data), data, header)
