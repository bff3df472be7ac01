"""Outer free-boundary iteration and the cut-off height sweep.

A trial shock fixes the domain.  The stream-function problem is solved
there, and the shock is regenerated from the slope relation

    f'(x2) = psi_x1 / (psi_x2 - u_inf rho),

integrated upward from ``f(0) = b0 - d0``.  Damped iteration of this map
converges to the detached shock.
"""

from __future__ import annotations

import logging
import math
import os
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import kernels
from .elliptic_solver import Background, StreamField, background_pair, solve_nonlinear
from .errors import ConvergenceError, DenominatorError, DetShockError, GeometryError
from .gas_model import GasParams, incoming_state, rho_max
from .geometry import (
    BluntBody,
    CutoffDomain,
    ShockCurve,
    build_cutoff_domain,
    lower_cutoff_height,
    make_grid,
    morph_domains,
    shock_nodes,
)
from .shock_polar import strong_deviation
from .verifier import Tolerances, VerificationReport, verify

__all__ = [
    "ShockCurve",
    "SolveSettings",
    "SolveReport",
    "SweepResult",
    "cutoff_blend",
    "seed_shock",
    "update_shock",
    "solve_free_boundary",
    "l_sweep",
    "weighted_norm_f",
    "weighted_norm_psi",
]

log = logging.getLogger(__name__)

SEED_PROFILES = ("blend", "background")


def _bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def cutoff_blend(x):
    """Smooth cutoff equal to 1 for ``x <= 5`` and 0 for ``x >= 10``."""
    a = _bump(10.0 - np.asarray(x, dtype=float))
    b = _bump(np.asarray(x, dtype=float) - 5.0)
    return a / (a + b)


def cutoff_blend_prime(x):
    """Derivative of :func:`cutoff_blend` (needed for the clamped end slopes)."""
    x = np.asarray(x, dtype=float)
    a = _bump(10.0 - x)
    b = _bump(x - 5.0)
    da = np.zeros_like(a)
    db = np.zeros_like(b)
    left, right = a > 0.0, b > 0.0
    da[left] = -a[left] / (10.0 - x[left]) ** 2
    db[right] = b[right] / (x[right] - 5.0) ** 2
    return (da * b - a * db) / (a + b) ** 2


@dataclass(frozen=True)
class SolveSettings:
    """Numerical parameters of the outer iteration.

    Attributes
    ----------
    n_s, n_t : int
        Grid nodes across (shock to body) and along (axis to cut) the domain.
    stretch : float
        Exponential grading of the t-grid toward the axis.
    damping : float
        Blend weight of the regenerated shock, ``lambda`` in ``(0, 1]``.
    tol_f : float
        Outer stopping threshold relative to ``1 + L``.
    max_outer : int
    min_damping : float
        Smallest damping tried when a blended shock touches the body.
    omega, tol_psi, tol_pde, max_picard, ellipticity
        Passed to the inner Picard solve.
    polish : bool
        Finish with one undamped application of the shock map.
    """

    n_s: int = 64
    n_t: int = 128
    stretch: float = 3.0
    damping: float = 0.5
    tol_f: float = 1e-7
    max_outer: int = 80
    min_damping: float = 1.0 / 64.0
    omega: float = 0.7
    tol_psi: float = 1e-9
    tol_pde: float = 1e-6
    max_picard: int = 200
    ellipticity: float = 1e-4
    polish: bool = True

    def __post_init__(self):
        if self.n_s < 4 or self.n_t < 4:
            raise ValueError("grid needs at least 4 nodes in each direction")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")
        if not self.tol_f > 0.0:
            raise ValueError("tol_f must be positive")


# ----------------------------------------------------------------------------
# seed and update


def seed_shock(
    body: BluntBody,
    d0: float,
    L: float,
    g: GasParams,
    eps: float,
    n_t: int = 128,
    stretch: float = 3.0,
    profile: str = "blend",
    background: Background | None = None,
) -> ShockCurve:
    """Initial shock on the graded t-grid.

    ``profile="blend"`` mixes the vertical line ``b0 - d0`` near the axis
    into the background line beyond ``10 h0``:
    ``f = f0 - s_st x2 chi(x2 / h0)``.  ``profile="background"`` returns the
    background line itself (used for the wedge test).

    Raises
    ------
    GeometryError
        If the seed touches the body or cannot close a cut-off domain.
    """
    if profile not in SEED_PROFILES:
        raise ValueError(f"unknown seed profile {profile!r}; choose from {SEED_PROFILES}")
    bg = background or background_pair(g, eps, body.theta_w, d0, body.b0)
    x2 = shock_nodes(L, n_t, stretch)
    s = bg.slope
    if profile == "background":
        shock = ShockCurve(x2, bg.f0(x2), (s, s))
    else:
        h0 = body.h0
        chi = cutoff_blend(x2 / h0)
        f = bg.f0(x2) - s * x2 * chi
        f[0] = body.b0 - d0
        end = s - s * (cutoff_blend(L / h0) + L / h0 * cutoff_blend_prime(L / h0))
        shock = ShockCurve(x2, f, (0.0, float(end)))
    build_cutoff_domain(body, shock, d0, L, stretch)
    return shock


def shock_slope_integrand(field: StreamField, g: GasParams, eps: float) -> np.ndarray:
    """``psi_x1 / (psi_x2 - u_inf rho)`` at the shock nodes.

    Raises
    ------
    DenominatorError
        If ``|psi_x2 - u_inf rho|`` drops below ``rho_max sqrt(2 B0) / 4``.
    """
    inc = incoming_state(g, eps)
    grad = field.grad[0, :, :]
    den = grad[:, 1] - inc.u1 * field.rho[0, :]
    bound = 0.25 * rho_max(g) * math.sqrt(2.0 * g.b0_bernoulli)
    low = float(np.min(np.abs(den)))
    if not low >= bound:
        j = int(np.argmin(np.abs(den)))
        raise DenominatorError(
            f"shock-slope denominator {low:.4g} below bound {bound:.4g} at node {j}; "
            "the field has left the perturbative regime"
        )
    return grad[:, 0] / den


def update_shock(field: StreamField, dom: CutoffDomain, g: GasParams, eps: float) -> ShockCurve:
    """Regenerate the shock from the field by trapezoid quadrature of the slope."""
    integrand = shock_slope_integrand(field, g, eps)
    x2 = dom.shock.x2
    start = dom.body.b0 - dom.d0
    f = start + cumulative_trapezoid(integrand, x2, initial=0.0)
    f[0] = start
    return ShockCurve(x2.copy(), f, (float(integrand[0]), float(integrand[-1])))


# ----------------------------------------------------------------------------
# outer iteration


@dataclass
class SolveReport:
    """Outcome of :func:`solve_free_boundary`.

    ``checks`` is the verifier's residual bundle, every entry tagged with
    the tolerance it was tested against.
    """

    converged: bool
    iterations: int
    changes: list[float]
    dampings: list[float]
    picard_iterations: list[int]
    fixed_point_residual: float
    tol_f: float
    L: float
    min_gap: float
    checks: VerificationReport
    norms: dict[str, float] = field(default_factory=dict)
    membership: dict[str, bool] = field(default_factory=dict)
    elapsed: float = 0.0

    def to_text(self) -> str:
        """``key = value`` lines (timing is left out so reruns are byte-identical)."""
        lines = [
            f"converged = {self.converged}",
            f"outer_iterations = {self.iterations}",
            f"L = {self.L!r}",
            f"tol_f = {self.tol_f!r}",
            f"fixed_point_residual = {self.fixed_point_residual!r}",
            f"min_b_minus_f = {self.min_gap!r}",
            "shock_changes = " + " ".join(f"{c:.6e}" for c in self.changes),
            "dampings = " + " ".join(f"{d:g}" for d in self.dampings),
            "picard_iterations = " + " ".join(str(k) for k in self.picard_iterations),
        ]
        for c in self.checks.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"check.{c.name} = {c.value!r} ; {c.relation} {c.tolerance!r} ; {status}")
        for k, v in self.norms.items():
            lines.append(f"norm.{k} = {v!r}")
        for k, v in self.membership.items():
            lines.append(f"member.{k} = {v}")
        return "\n".join(lines) + "\n"


@dataclass
class FreeBoundarySolution:
    shock: ShockCurve
    field: StreamField
    domain: CutoffDomain
    background: Background
    report: SolveReport


def _with_context(exc: DetShockError, k: int) -> DetShockError:
    exc.args = (f"outer iteration {k}: {exc.args[0] if exc.args else exc}",) + tuple(exc.args[1:])
    return exc


def _solve_on(body, shock, d0, L, g, eps, settings, init, wall_data):
    dom = build_cutoff_domain(body, shock, d0, L, settings.stretch)
    grid = make_grid(dom, settings.n_s, settings.n_t)
    fld, pic = solve_nonlinear(
        dom,
        grid,
        g,
        eps,
        init=init,
        omega=settings.omega,
        tol_psi=settings.tol_psi,
        tol_pde=settings.tol_pde,
        max_iters=settings.max_picard,
        wall_data=wall_data,
        ellipticity=settings.ellipticity,
    )
    return dom, fld, pic


def solve_free_boundary(
    body: BluntBody,
    g: GasParams,
    eps: float,
    d0: float,
    L: float | None = None,
    settings: SolveSettings | None = None,
    *,
    seed: ShockCurve | None = None,
    seed_profile: str = "blend",
    wall_data: Callable | None = None,
    tolerances: Tolerances | None = None,
    norm_params: tuple[float, float] = (0.5, 0.5),
    membership: tuple[float, float] | None = None,
) -> FreeBoundarySolution:
    """Iterate shock -> field -> regenerated shock to a fixed point.

    Parameters
    ----------
    body : BluntBody
    g : GasParams
    eps : float
        Inverse upstream Mach number.
    d0 : float
        Detached distance ``b0 - f(0)``.
    L : float, optional
        Cut-off height; default four times the minimum admissible height.
    settings : SolveSettings, optional
    seed : ShockCurve, optional
        Starting shock; default from :func:`seed_shock` with ``seed_profile``.
    wall_data : callable, optional
        Dirichlet data on axis and body (default zero).
    tolerances : Tolerances, optional
        Thresholds for the final residual bundle.
    norm_params : (beta, alpha)
        Exponents of the weighted-norm diagnostics.
    membership : (M1, M2), optional
        When given, report whether the weighted norms lie below
        ``M q`` with ``q`` the strong-branch deviation.

    Returns
    -------
    FreeBoundarySolution

    Raises
    ------
    GeometryError
        If ``L`` is below the minimum cut-off height or the seed is invalid.
    ConvergenceError
        If the outer iteration does not settle within ``max_outer`` steps,
        or no damping down to ``min_damping`` keeps the shock detached.
    """
    settings = settings or SolveSettings()
    started = time.perf_counter()
    L_min = lower_cutoff_height(body, d0)
    if L is None:
        L = 4.0 * L_min
    if L < L_min:
        raise GeometryError(f"cut-off height L = {L:.6g} is below the minimum {L_min:.6g}")
    bg = background_pair(g, eps, body.theta_w, d0, body.b0)
    if seed is None:
        seed = seed_shock(body, d0, L, g, eps, settings.n_t, settings.stretch, seed_profile, bg)
    threshold = settings.tol_f * (1.0 + L)

    shock = seed
    init = None
    changes: list[float] = []
    dampings: list[float] = []
    picards: list[int] = []
    converged = False
    k = 0
    new = None
    while k < settings.max_outer:
        k += 1
        try:
            dom, fld, pic = _solve_on(body, shock, d0, L, g, eps, settings, init, wall_data)
            new = update_shock(fld, dom, g, eps)
        except DetShockError as exc:
            raise _with_context(exc, k)
        picards.append(pic.iterations)
        change = float(np.max(np.abs(new.f - shock.f)))
        log.debug("outer %d: change %.3e, picard %d", k, change, pic.iterations)
        lam = settings.damping
        if lam * change <= threshold:
            changes.append(lam * change)
            dampings.append(lam)
            converged = True
            break
        while True:
            candidate = shock.blend(new, lam)
            try:
                build_cutoff_domain(body, candidate, d0, L, settings.stretch)
                break
            except GeometryError:
                lam *= 0.5
                if lam < settings.min_damping:
                    raise ConvergenceError(
                        f"outer iteration {k}: no damping >= {settings.min_damping:g} keeps the shock detached",
                        changes,
                        shock,
                    )
        changes.append(lam * change)
        dampings.append(lam)
        shock = candidate
        init = fld.psi
    if not converged:
        raise ConvergenceError(
            f"free-boundary iteration did not settle in {settings.max_outer} steps "
            f"(last change {changes[-1]:.3g}, threshold {threshold:.3g})",
            changes,
            shock,
        )

    if settings.polish:
        # one undamped step removes the seed's slowly decaying memory
        try:
            dom_p, fld_p, pic_p = _solve_on(body, new, d0, L, g, eps, settings, fld.psi, wall_data)
            shock, dom, fld = new, dom_p, fld_p
            picards.append(pic_p.iterations)
        except GeometryError:
            log.warning("polishing step rejected; keeping the damped iterate")
    residual = float(np.max(np.abs(update_shock(fld, dom, g, eps).f - shock.f)))

    checks = verify(fld, shock, body, g, eps, d0, bg, tolerances)
    beta, alpha = norm_params
    norms = {
        "f_minus_f0": weighted_norm_f(shock, bg, beta, alpha, L),
        "psi_minus_psi0": weighted_norm_psi(fld, bg, beta, alpha, corner=dom.p2),
    }
    member = {}
    if membership is not None:
        q = strong_deviation(g, eps, body.theta_w)
        member = {
            "shock_set": norms["f_minus_f0"] <= membership[0] * q,
            "field_set": norms["psi_minus_psi0"] <= membership[1] * q,
        }
    report = SolveReport(
        converged=True,
        iterations=k,
        changes=changes,
        dampings=dampings,
        picard_iterations=picards,
        fixed_point_residual=residual,
        tol_f=threshold,
        L=float(L),
        min_gap=float(dom.min_gap),
        checks=checks,
        norms=norms,
        membership=member,
        elapsed=time.perf_counter() - started,
    )
    return FreeBoundarySolution(shock=shock, field=fld, domain=dom, background=bg, report=report)


# ----------------------------------------------------------------------------
# cut-off height sweep


@dataclass
class SweepResult:
    """Solutions per cut-off height and pairwise shock differences.

    ``differences[k]`` is the sup-distance between consecutive converged
    shocks on ``[0, L_list[0] / 2]``, measured through the fibrewise morph.
    """

    L_list: list[float]
    solutions: list[FreeBoundarySolution | None]
    errors: list[str | None]
    differences: list[float]


def max_workers(n_jobs: int) -> int:
    raw = os.environ.get("DETSHOCK_THREADS", "").strip()
    cap = int(raw) if raw.isdigit() and int(raw) > 0 else (os.cpu_count() or 1)
    return max(1, min(cap, n_jobs))


def l_sweep(
    body: BluntBody,
    g: GasParams,
    eps: float,
    d0: float,
    L_list: Sequence[float],
    settings: SolveSettings | None = None,
    **kwargs,
) -> SweepResult:
    """Solve for each cut-off height and compare the shocks.

    Runs are independent and executed concurrently (``DETSHOCK_THREADS``
    caps the pool).  Failures are recorded and the sweep continues.
    """
    L_list = [float(v) for v in L_list]
    if any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise ValueError("L_list must be strictly increasing")

    def job(L):
        try:
            return solve_free_boundary(body, g, eps, d0, L, settings, **kwargs), None
        except DetShockError as exc:
            return None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max_workers(len(L_list))) as pool:
        results = list(pool.map(job, L_list))
    sols = [r[0] for r in results]
    errs = [r[1] for r in results]

    window = np.linspace(0.0, 0.5 * L_list[0], 401)
    diffs = []
    for a, b in zip(sols, sols[1:]):
        if a is None or b is None:
            diffs.append(math.nan)
            continue
        mapping = morph_domains(a.domain, b.domain)
        on_a = np.stack([a.shock(window), window], axis=-1)
        diffs.append(float(np.max(np.abs(mapping(on_a)[:, 0] - on_a[:, 0]))))
    return SweepResult(L_list=L_list, solutions=sols, errors=errs, differences=diffs)


# ----------------------------------------------------------------------------
# weighted norms


def _pairs(n: int, neighbours: np.ndarray, max_pairs: int, rng_seed: int = 0):
    """All pairs when few; otherwise grid neighbours plus a fixed random sample."""
    total = n * (n - 1) // 2
    if total <= max_pairs:
        return None
    rng = np.random.default_rng(rng_seed)
    a = rng.integers(0, n, size=max_pairs)
    b = rng.integers(0, n, size=max_pairs)
    keep = a != b
    first = np.concatenate([neighbours[:, 0], a[keep]]).astype(np.int64)
    second = np.concatenate([neighbours[:, 1], b[keep]]).astype(np.int64)
    return first, second


def _seminorm(values, x1, x2, delta, alpha, p, qexp, pairs) -> float:
    values = np.ascontiguousarray(values, dtype=float)
    if pairs is None:
        return float(kernels.holder_all_pairs(values, x1, x2, delta, alpha, p, qexp))
    return float(kernels.holder_index_pairs(values, x1, x2, delta, pairs[0], pairs[1], alpha, p, qexp))


def weighted_norm_f(
    shock: ShockCurve,
    reference,
    beta: float,
    alpha: float,
    L: float | None = None,
    order: int = 2,
    low_order: int = 1,
    max_pairs: int = 10_000,
) -> float:
    """Weighted Hölder norm of ``shock - reference`` on the shock nodes.

    Weights are ``(1 + x2)^(j - beta)`` on the j-th derivative.  With a
    corner ``L`` the derivatives above ``low_order`` also carry
    ``(delta / (1 + x2))^(j - low_order - alpha)``, ``delta = min(L - x2, 1 + x2)``,
    and the top seminorm carries ``(delta / (1 + x2))^(order - low_order)``.
    Without a corner all ``order`` derivatives use the plain weight.

    Parameters
    ----------
    shock : ShockCurve
    reference : ShockCurve, Background or callable ``(x2, k) -> values``
    beta, alpha : float
        Decay exponent and Hölder exponent, both in ``(0, 1)``.
    L : float, optional
        Corner height.
    """
    if not (0.0 < beta < 1.0 and 0.0 < alpha < 1.0):
        raise ValueError("beta and alpha must lie in (0, 1)")
    ref = _reference_profile(reference)
    x = shock.x2
    mu = -beta
    k_low = order if L is None else low_order
    derivs = [np.asarray(shock(x, j)) - ref(x, j) for j in range(order + 1)]
    if L is None:
        delta = 1.0 + x
    else:
        delta = np.minimum(np.abs(L - x), 1.0 + x)
    zero = np.zeros_like(x)
    n = x.size
    neighbours = np.stack([np.arange(n - 1), np.arange(1, n)], axis=1)
    pairs = _pairs(n, neighbours, max_pairs)
    total = 0.0
    for j in range(k_low + 1):
        total += float(np.max((1.0 + x) ** (j + mu) * np.abs(derivs[j])))
    total += _seminorm(derivs[k_low], zero, x, delta, alpha, k_low + alpha + mu, 0.0, pairs)
    for j in range(k_low + 1, order + 1):
        w = (1.0 + x) ** (j + mu) * (delta / (1.0 + x)) ** (j - k_low - alpha)
        total += float(np.max(w * np.abs(derivs[j])))
    if order > k_low:
        total += _seminorm(derivs[order], zero, x, delta, alpha, order + alpha + mu, order - k_low, pairs)
    return total


def _reference_profile(reference) -> Callable:
    if isinstance(reference, Background):
        slope, start = reference.slope, reference.b0 - reference.d0

        def line(x, k):
            if k == 0:
                return slope * x + start
            return np.full_like(x, slope) if k == 1 else np.zeros_like(x)

        return line
    if isinstance(reference, ShockCurve):
        return lambda x, k: np.asarray(reference(x, k))
    if callable(reference):
        return reference
    raise TypeError("reference must be a ShockCurve, Background or callable")


def weighted_norm_psi(
    field: StreamField,
    background: Background,
    beta: float,
    alpha: float,
    corner=None,
    max_pairs: int = 10_000,
) -> float:
    """Weighted Hölder norm of ``psi - psi0`` over the grid nodes.

    Same weights as :func:`weighted_norm_f` with ``order = 2``,
    ``low_order = 1`` and ``delta`` the distance to ``corner`` capped by
    ``1 + x2``.  Vector quantities are handled component by component, so
    the seminorms are upper bounds within a factor of the component count.
    """
    if not (0.0 < beta < 1.0 and 0.0 < alpha < 1.0):
        raise ValueError("beta and alpha must lie in (0, 1)")
    grid = field.grid
    n_s, n_t = grid.shape
    pts = grid.x
    phi = field.psi - background.psi0(pts)
    d1 = grid.gradient(phi)
    d2 = np.stack([grid.gradient(d1[..., 0]), grid.gradient(d1[..., 1])], axis=-2)
    x1 = np.ascontiguousarray(pts[..., 0].ravel())
    x2 = np.ascontiguousarray(pts[..., 1].ravel())
    w = 1.0 + np.abs(x2)
    mu = -beta
    if corner is None:
        delta = w.copy()
        k_low = 2
    else:
        c = np.asarray(corner, dtype=float)
        delta = np.minimum(np.hypot(x1 - c[0], x2 - c[1]), w)
        k_low = 1

    idx = np.arange(n_s * n_t).reshape(n_s, n_t)
    neighbours = np.concatenate(
        [
            np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1),
            np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1),
        ]
    )
    pairs = _pairs(n_s * n_t, neighbours, max_pairs)

    first = [d1[..., 0].ravel(), d1[..., 1].ravel()]
    second = [d2[..., a, b].ravel() for a in range(2) for b in range(2) if a <= b]
    total = float(np.max(w ** (0 + mu) * np.abs(phi.ravel())))
    total += float(np.max(w ** (1 + mu) * np.sum(np.abs(np.stack(first)), axis=0)))
    if k_low == 1:
        for comp in first:
            total += _seminorm(comp, x1, x2, delta, alpha, 1 + alpha + mu, 0.0, pairs)
        for comp in second:
            weight = w ** (2 + mu) * (delta / w) ** (1.0 - alpha)
            total += float(np.max(weight * np.abs(comp)))
        for comp in second:
            total += _seminorm(comp, x1, x2, delta, alpha, 2 + alpha + mu, 1.0, pairs)
    else:
        total += float(np.max(w ** (2 + mu) * np.sum(np.abs(np.stack(second)), axis=0)))
        for comp in second:
            total += _seminorm(comp, x1, x2, delta, alpha, 2 + alpha + mu, 0.0, pairs)
    return total
