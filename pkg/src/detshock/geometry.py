"""Blunt bodies, the cut-off domain and its body-fitted grid.

Coordinates: ``x1`` runs downstream, ``x2`` upward from the symmetry axis.
The shock is a graph ``x1 = f(x2)``, the body a graph ``x1 = b(x2)``.  The
cut-off domain is bounded by the axis segment ``P1 P0``, the body from
``P0`` to ``P3``, the straight cut ``P3 P2`` perpendicular to the wedge and
the shock from ``P2`` back down to ``P1``.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .csvio import write_table
from .errors import FoldedGridError, GeometryError

# ----------------------------------------------------------------------------
# bodies


def _smoothstep5(t):
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


@dataclass(frozen=True)
class BluntBody:
    """Body profile ``x1 = b(x2)``, even in ``x2``, a wedge beyond ``h0``.

    Parameters
    ----------
    theta_w : float
        Half-wedge angle in radians.
    h0 : float
        Height above which the body is the straight wedge.
    derivs : callable
        ``derivs(x2, k)`` returns the k-th derivative (k = 0..3) for
        ``x2 >= 0``.
    wedge_offset : float
        The asymptotic wedge line is ``x1 = wedge_offset + x2 cot(theta_w)``.
    name : str
        Label used in reports.
    """

    theta_w: float
    h0: float
    derivs: Callable = field(repr=False, compare=False)
    wedge_offset: float = 0.0
    name: str = "custom"

    @property
    def kappa_w(self) -> float:
        return math.tan(self.theta_w)

    @property
    def cot_w(self) -> float:
        return 1.0 / math.tan(self.theta_w)

    @property
    def b0(self) -> float:
        """Nose position ``b(0)``."""
        return float(self.b(0.0))

    def b(self, x2, k: int = 0):
        """k-th derivative of the profile, using even symmetry for ``x2 < 0``."""
        x = np.asarray(x2, dtype=float)
        val = np.asarray(self.derivs(np.abs(x), k), dtype=float)
        if k % 2 == 1:
            val = np.where(x < 0.0, -val, val)
        return float(val) if np.ndim(val) == 0 else val

    def m_b(self, n: int = 20001) -> float:
        """``sup |b'| + sup |b''| + sup |b'''|`` over ``[0, 2 h0]``."""
        x = np.linspace(0.0, 2.0 * self.h0, n)
        return float(sum(np.max(np.abs(self.b(x, k))) for k in (1, 2, 3)))

    def wedge_point(self, x2):
        """Point on the asymptotic wedge line at height ``x2``."""
        return self.wedge_offset + np.asarray(x2) * self.cot_w


def default_body(theta_w: float, h0: float = 1.0) -> BluntBody:
    """Quintic-smoothstep blunt body.

    ``b'(x2) = cot(theta_w) S(x2/h0)`` on ``[0, h0]`` with
    ``S(t) = t^3 (10 - 15 t + 6 t^2)`` and ``b' = cot(theta_w)`` beyond, so
    ``b(0) = h0 cot(theta_w) / 2``.
    """
    if not (0.0 < theta_w < 0.5 * math.pi):
        raise GeometryError("theta_w must lie in (0, pi/2)")
    if not h0 > 0.0:
        raise GeometryError("h0 must be positive")
    cot = 1.0 / math.tan(theta_w)

    def derivs(x2, k):
        x = np.asarray(x2, dtype=float)
        t = np.clip(x / h0, 0.0, 1.0)
        inside = x < h0
        if k == 0:
            blend = h0 * cot * (2.5 * t**4 - 3.0 * t**5 + t**6) + 0.5 * h0 * cot
            return np.where(inside, blend, x * cot)
        if k == 1:
            return np.where(inside, cot * _smoothstep5(t), cot)
        if k == 2:
            return np.where(inside, cot / h0 * 30.0 * t * t * (1.0 - t) ** 2, 0.0)
        if k == 3:
            return np.where(inside, cot / h0**2 * 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)
        raise ValueError("derivative order must be 0..3")

    return BluntBody(theta_w=theta_w, h0=h0, derivs=derivs, wedge_offset=0.0, name="smoothstep")


def wedge_body(theta_w: float, apex: float = 0.0) -> BluntBody:
    """Straight wedge ``x1 = apex + x2 cot(theta_w)``.

    Not blunt (``b'(0) != 0``); used as an exact-solution test geometry.
    """
    cot = 1.0 / math.tan(theta_w)

    def derivs(x2, k):
        x = np.asarray(x2, dtype=float)
        if k == 0:
            return apex + x * cot
        if k == 1:
            return np.full_like(x, cot)
        return np.zeros_like(x)

    return BluntBody(theta_w=theta_w, h0=1e-12, derivs=derivs, wedge_offset=apex, name="wedge")


def check_axioms(body: BluntBody, n: int = 10_000, tol: float = 1e-6) -> dict[str, bool]:
    """Flags for the blunt-body axioms and their consequences.

    Keys: ``symmetric`` (b'(0) = b'''(0) = 0), ``c3`` (third derivative
    continuous at ``h0``), ``increasing`` (b' > 0 for x2 > 0), ``convex``
    (b'' >= 0, a warning flag only), ``wedge_tail`` (b is the wedge beyond
    ``h0``), ``slope_bounds`` (0 <= b' <= cot) and ``above_wedge``
    (b >= x2 cot).  ``blunt`` is the conjunction of the required ones.
    """
    cot = body.cot_w
    h0 = body.h0
    x = np.linspace(0.0, 3.0 * max(h0, 1e-6), n)
    b0v, b1, b2 = body.b(x), body.b(x, 1), body.b(x, 2)
    step = 1e-5 * max(h0, 1e-3)
    d3_left = body.b(h0 - step, 3)
    d3_right = body.b(h0 + step, 3)
    # central difference of b'' checks the analytic b''' too
    fd3 = (body.b(h0 + step, 2) - body.b(h0 - step, 2)) / (2.0 * step)
    scale = 1.0 + abs(cot) / max(h0, 1e-6) ** 2
    flags = {
        "symmetric": abs(body.b(0.0, 1)) <= tol and abs(body.b(0.0, 3)) <= tol * scale,
        "c3": abs(d3_left - d3_right) <= 1e-3 * scale and abs(fd3 - body.b(h0, 3)) <= 1e-3 * scale,
        "increasing": bool(np.all(b1[1:] > 0.0)),
        "convex": bool(np.all(b2 >= -tol)),
        "wedge_tail": bool(
            np.allclose(b0v[x >= h0], body.wedge_point(x[x >= h0]), atol=tol * (1.0 + x.max()))
        ),
        "slope_bounds": bool(np.all((b1 >= -tol) & (b1 <= cot + tol))),
        "above_wedge": bool(np.all(b0v >= x * cot + body.wedge_offset - tol)),
    }
    flags["blunt"] = all(
        flags[k] for k in ("symmetric", "c3", "increasing", "wedge_tail", "slope_bounds", "above_wedge")
    )
    return flags


def write_body_csv(path, body: BluntBody, x2, header=()) -> None:
    """Body profile table with columns ``x2, b, b_prime, b_second``."""
    x2 = np.asarray(x2, dtype=float)
    data = {"x2": x2, "b": body.b(x2), "b_prime": body.b(x2, 1), "b_second": body.b(x2, 2)}
    write_table(path, list(data), data, header)


# ----------------------------------------------------------------------------
# shock curves


def grading(t, stretch: float, k: int = 0):
    """Exponential node grading ``(exp(a t) - 1)/(exp(a) - 1)`` and derivatives.

    ``stretch = 0`` gives the identity.  Small ``t`` is refined for positive
    ``stretch``.
    """
    t = np.asarray(t, dtype=float)
    a = stretch
    if abs(a) < 1e-12:
        return (t, np.ones_like(t), np.zeros_like(t))[k]
    den = math.expm1(a)
    if k == 0:
        return np.expm1(a * t) / den
    return a**k * np.exp(a * t) / den


def shock_nodes(L: float, n_t: int, stretch: float) -> np.ndarray:
    """Heights of the shock nodes on a graded t-grid over ``[0, L]``."""
    t = np.linspace(0.0, 1.0, n_t)
    x2 = L * grading(t, stretch)
    x2[0], x2[-1] = 0.0, L
    return x2


@dataclass
class ShockCurve:
    """Shock ``x1 = f(x2)`` stored at nodes with a clamped cubic spline.

    Parameters
    ----------
    x2 : ndarray
        Increasing node heights, ``x2[0] = 0``.
    f : ndarray
        Node values.
    end_slopes : (float, float)
        ``f'`` at the two ends, used to clamp the spline.
    """

    x2: np.ndarray
    f: np.ndarray
    end_slopes: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.x2 = np.asarray(self.x2, dtype=float)
        self.f = np.asarray(self.f, dtype=float)
        if self.x2.shape != self.f.shape or self.x2.ndim != 1 or self.x2.size < 4:
            raise GeometryError("shock needs matching 1D node and value arrays (>= 4 nodes)")
        if np.any(np.diff(self.x2) <= 0.0):
            raise GeometryError("shock nodes must be strictly increasing")
        s0, s1 = (float(v) for v in self.end_slopes)
        self.end_slopes = (s0, s1)
        self._spline = CubicSpline(self.x2, self.f, bc_type=((1, s0), (1, s1)))

    @property
    def L(self) -> float:
        return float(self.x2[-1])

    def __call__(self, x2, nu: int = 0):
        out = self._spline(np.asarray(x2, dtype=float), nu)
        return float(out) if np.ndim(out) == 0 else out

    def blend(self, other: "ShockCurve", weight: float) -> "ShockCurve":
        """``(1 - weight) * self + weight * other`` on the shared nodes."""
        if other.x2.shape != self.x2.shape or not np.allclose(other.x2, self.x2, rtol=0, atol=1e-12):
            raise GeometryError("blended shocks must share nodes")
        f = (1.0 - weight) * self.f + weight * other.f
        f[0] = self.f[0]
        slopes = tuple((1.0 - weight) * a + weight * b for a, b in zip(self.end_slopes, other.end_slopes))
        return ShockCurve(self.x2.copy(), f, slopes)


def write_shock_csv(path, shock: ShockCurve, header=()) -> None:
    """Shock table with columns ``x2, f, f_prime, f_second``."""
    data = {
        "x2": shock.x2,
        "f": shock.f,
        "f_prime": shock(shock.x2, 1),
        "f_second": shock(shock.x2, 2),
    }
    write_table(path, list(data), data, header)


# ----------------------------------------------------------------------------
# boundary arcs


class Arc:
    """Parametrised boundary curve ``[0, 1] -> R^2`` with two derivatives."""

    def point(self, t, k: int = 0) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass
class LineArc(Arc):
    start: np.ndarray
    end: np.ndarray

    def point(self, t, k: int = 0):
        t = np.asarray(t, dtype=float)[..., None]
        a = np.asarray(self.start, dtype=float)
        b = np.asarray(self.end, dtype=float)
        if k == 0:
            return a + t * (b - a)
        if k == 1:
            return np.broadcast_to(b - a, t.shape[:-1] + (2,)).copy()
        return np.zeros(t.shape[:-1] + (2,))


@dataclass
class GraphArc(Arc):
    """Curve ``(x1(x2), x2)`` with ``x2 = top * grading(t)``."""

    func: Callable
    top: float
    stretch: float

    def point(self, t, k: int = 0):
        t = np.asarray(t, dtype=float)
        y = self.top * grading(t, self.stretch)
        if k == 0:
            return np.stack([self.func(y, 0), y], axis=-1)
        y1 = self.top * grading(t, self.stretch, 1)
        if k == 1:
            return np.stack([self.func(y, 1) * y1, y1], axis=-1)
        y2 = self.top * grading(t, self.stretch, 2)
        return np.stack([self.func(y, 2) * y1**2 + self.func(y, 1) * y2, y2], axis=-1)


@dataclass
class ArcDomain:
    """Four arcs of a curvilinear quadrilateral.

    ``left`` (s = 0) and ``right`` (s = 1) run in t; ``bottom`` (t = 0) and
    ``top`` (t = 1) run in s.  Corners must match.
    """

    left: Arc
    right: Arc
    bottom: Arc
    top: Arc
    stretch: float = 0.0

    def arcs(self) -> "ArcDomain":
        return self


# ----------------------------------------------------------------------------
# cut-off domain


def lower_cutoff_height(body: BluntBody, d0: float) -> float:
    """Smallest admissible cut-off height for a detached distance ``d0``."""
    k = body.kappa_w
    return 4.0 / k * ((1.0 + k * k) * body.h0 / k + d0 - body.b0)


@dataclass
class CutoffDomain:
    """Region between shock, body, axis and the cut ``P2 P3``.

    Build with :func:`build_cutoff_domain`, which validates the geometry.
    """

    body: BluntBody
    shock: ShockCurve
    d0: float
    L: float
    stretch: float
    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    p3: np.ndarray
    min_gap: float
    boundary_tags: tuple = ("sym", "shock", "body", "cutoff")

    @property
    def cutoff_normal(self) -> np.ndarray:
        """Outward unit normal ``(cos theta_w, sin theta_w)`` of the cut."""
        return np.array([math.cos(self.body.theta_w), math.sin(self.body.theta_w)])

    def arcs(self) -> ArcDomain:
        shock_arc = GraphArc(lambda y, k: self.shock(y, k), self.L, self.stretch)
        body_arc = GraphArc(lambda y, k: self.body.b(y, k), float(self.p3[1]), self.stretch)
        return ArcDomain(
            left=shock_arc,
            right=body_arc,
            bottom=LineArc(self.p1, self.p0),
            top=LineArc(self.p2, self.p3),
            stretch=self.stretch,
        )

    def gap(self, x2) -> np.ndarray:
        """``b - f`` at the given heights."""
        return self.body.b(x2) - self.shock(x2)


def build_cutoff_domain(
    body: BluntBody, shock: ShockCurve, d0: float, L: float | None = None, stretch: float = 0.0
) -> CutoffDomain:
    """Validate a shock against the body and assemble the cut-off domain.

    ``P3`` is the foot of the perpendicular from ``P2 = (f(L), L)`` onto the
    wedge line.  ``stretch`` is the t-grading shared by shock and body arcs.

    Raises
    ------
    GeometryError
        If the shock touches the body, starts at the wrong point, or ``P3``
        falls on the curved part of the body (cut-off height too small).
    """
    L = shock.L if L is None else float(L)
    if abs(L - shock.L) > 1e-9 * (1.0 + L):
        raise GeometryError("shock nodes must span [0, L]")
    if not d0 > 0.0:
        raise GeometryError("d0 must be positive")
    b0 = body.b0
    if abs(shock(0.0) - (b0 - d0)) > 1e-10 * (1.0 + abs(b0)):
        raise GeometryError(f"shock must start at b0 - d0 = {b0 - d0:.12g}, got {shock(0.0):.12g}")
    dense = np.union1d(shock.x2, np.linspace(0.0, L, 4 * shock.x2.size))
    gap = body.b(dense) - shock(dense)
    min_gap = float(np.min(gap))
    if min_gap <= 0.0:
        x_bad = float(dense[np.argmin(gap)])
        raise GeometryError(f"shock touches the body near x2 = {x_bad:.6g} (min gap {min_gap:.3g})")
    theta = body.theta_w
    direction = np.array([math.cos(theta), math.sin(theta)])
    anchor = np.array([body.wedge_offset, 0.0])
    p2 = np.array([shock(L), L])
    p3 = anchor + float(np.dot(p2 - anchor, direction)) * direction
    if not p3[1] > body.h0:
        raise GeometryError(
            f"cut-off foot P3 at height {p3[1]:.6g} does not clear h0 = {body.h0:.6g}; increase L"
        )
    if not body.b(p3[1]) > shock(p3[1]) or p3[0] <= p2[0]:
        raise GeometryError("cut-off segment does not close the domain")
    return CutoffDomain(
        body=body,
        shock=shock,
        d0=float(d0),
        L=L,
        stretch=float(stretch),
        p0=np.array([b0, 0.0]),
        p1=np.array([b0 - d0, 0.0]),
        p2=p2,
        p3=p3,
        min_gap=min_gap,
    )


# ----------------------------------------------------------------------------
# body-fitted grid

TAG_CODES = ("int", "sym", "shock", "body", "cutoff", "P0", "P1", "P2", "P3")


def fourth_order_derivative(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Derivative along ``axis`` with uniform spacing ``h``, fourth order everywhere.

    Falls back to ``numpy.gradient`` (second order) below five nodes.
    """
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    n = v.shape[0]
    if n < 5:
        return np.gradient(values, h, axis=axis, edge_order=2)
    out = np.empty_like(v)
    out[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * h)
    out[0] = (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h)
    out[1] = (-3.0 * v[0] - 10.0 * v[1] + 18.0 * v[2] - 6.0 * v[3] + v[4]) / (12.0 * h)
    out[-1] = (25.0 * v[-1] - 48.0 * v[-2] + 36.0 * v[-3] - 16.0 * v[-4] + 3.0 * v[-5]) / (12.0 * h)
    out[-2] = (3.0 * v[-1] + 10.0 * v[-2] - 18.0 * v[-3] + 6.0 * v[-4] - v[-5]) / (12.0 * h)
    return np.moveaxis(out, 0, axis)


@dataclass
class BodyFittedGrid:
    """Transfinite-interpolation grid over the unit square.

    Attributes
    ----------
    s, t : ndarray
        Uniform computational coordinates.
    x : ndarray, shape (n_s, n_t, 2)
        Physical node positions.
    jac : ndarray, shape (n_s, n_t, 2, 2)
        ``jac[..., l, m] = d x_l / d xi_m`` with ``xi = (s, t)``.
    hess : ndarray, shape (n_s, n_t, 2, 2, 2)
        ``hess[..., l, m, n] = d^2 x_l / d xi_m d xi_n``.
    inv : ndarray, shape (n_s, n_t, 2, 2)
        ``inv[..., k, i] = d xi_k / d x_i``.
    xi_hess : ndarray, shape (n_s, n_t, 2, 2, 2)
        ``xi_hess[..., k, i, j] = d^2 xi_k / d x_i d x_j``.
    tags : ndarray of str, shape (n_s, n_t)
    """

    s: np.ndarray
    t: np.ndarray
    x: np.ndarray
    jac: np.ndarray
    hess: np.ndarray
    inv: np.ndarray
    xi_hess: np.ndarray
    tags: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape[:2]

    @property
    def hs(self) -> float:
        return float(self.s[1] - self.s[0])

    @property
    def ht(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def det(self) -> np.ndarray:
        return np.linalg.det(self.jac)

    def derivative(self, values: np.ndarray, axis: int) -> np.ndarray:
        """Fourth-order derivative in s (axis 0) or t (axis 1).

        Five-point central inside, five-point one-sided at the two nodes
        next to each edge.  Matching orders keep the edge truncation error
        from showing up as a kink in derived boundary quantities.
        """
        h = self.hs if axis == 0 else self.ht
        return fourth_order_derivative(values, h, axis)

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Physical gradient ``(d/dx1, d/dx2)`` at every node."""
        ds = self.derivative(values, 0)
        dt = self.derivative(values, 1)
        return ds[..., None] * self.inv[..., 0, :] + dt[..., None] * self.inv[..., 1, :]

    def arc_lengths(self) -> dict[str, float]:
        """Polyline lengths of the four boundary arcs."""

        def length(pts):
            return float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))

        return {
            "shock": length(self.x[0, :]),
            "body": length(self.x[-1, :]),
            "sym": length(self.x[:, 0]),
            "cutoff": length(self.x[:, -1]),
        }


def make_grid(dom, n_s: int, n_t: int) -> BodyFittedGrid:
    """Transfinite-interpolation grid with analytic metric terms.

    Parameters
    ----------
    dom : CutoffDomain or ArcDomain
        Anything with an ``arcs()`` method returning an :class:`ArcDomain`.
    n_s, n_t : int
        Node counts across (shock to body) and along (axis to cut) the domain.

    Raises
    ------
    FoldedGridError
        If the Jacobian determinant is not positive at every node.
    """
    if n_s < 8 or n_t < 8:
        raise GeometryError("grid needs at least 8 nodes per direction")
    arcs = dom.arcs()
    s = np.linspace(0.0, 1.0, n_s)
    t = np.linspace(0.0, 1.0, n_t)
    S = s[:, None, None]
    T = t[None, :, None]

    L0, L1, L2 = (arcs.left.point(t, k)[None, :, :] for k in (0, 1, 2))
    R0, R1, R2 = (arcs.right.point(t, k)[None, :, :] for k in (0, 1, 2))
    B0, B1, B2 = (arcs.bottom.point(s, k)[:, None, :] for k in (0, 1, 2))
    T0, T1, T2 = (arcs.top.point(s, k)[:, None, :] for k in (0, 1, 2))
    c00 = arcs.left.point(0.0)
    c01 = arcs.left.point(1.0)
    c10 = arcs.right.point(0.0)
    c11 = arcs.right.point(1.0)

    x = (
        (1 - S) * L0 + S * R0 + (1 - T) * B0 + T * T0
        - ((1 - S) * (1 - T) * c00 + S * (1 - T) * c10 + (1 - S) * T * c01 + S * T * c11)
    )
    x_s = -L0 + R0 + (1 - T) * B1 + T * T1 - (-(1 - T) * c00 + (1 - T) * c10 - T * c01 + T * c11)
    x_t = (1 - S) * L1 + S * R1 - B0 + T0 - (-(1 - S) * c00 - S * c10 + (1 - S) * c01 + S * c11)
    x_ss = (1 - T) * B2 + T * T2
    x_tt = (1 - S) * L2 + S * R2
    x_st = -L1 + R1 - B1 + T1 - (c00 - c10 - c01 + c11)

    n_nodes = (n_s, n_t)
    jac = np.empty(n_nodes + (2, 2))
    jac[..., :, 0] = x_s
    jac[..., :, 1] = x_t
    hess = np.empty(n_nodes + (2, 2, 2))
    hess[..., :, 0, 0] = x_ss
    hess[..., :, 1, 1] = x_tt
    hess[..., :, 0, 1] = x_st
    hess[..., :, 1, 0] = x_st

    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    if not np.all(det > 0.0):
        i, j = np.unravel_index(int(np.argmin(det)), det.shape)
        raise FoldedGridError(f"grid folds at node ({i}, {j}): det = {det[i, j]:.3g}")
    inv = np.empty_like(jac)
    inv[..., 0, 0] = jac[..., 1, 1] / det
    inv[..., 0, 1] = -jac[..., 0, 1] / det
    inv[..., 1, 0] = -jac[..., 1, 0] / det
    inv[..., 1, 1] = jac[..., 0, 0] / det
    # d2 xi_k / dx_i dx_j = - K_kl (d2 x_l / dxi_m dxi_n) K_mi K_nj
    xi_hess = -np.einsum("...kl,...lmn,...mi,...nj->...kij", inv, hess, inv, inv)

    tags = np.full(n_nodes, "int", dtype="<U6")
    tags[:, 0] = "sym"
    tags[:, -1] = "cutoff"
    tags[0, :] = "shock"
    tags[-1, :] = "body"
    tags[-1, 0] = "P0"
    tags[0, 0] = "P1"
    tags[0, -1] = "P2"
    tags[-1, -1] = "P3"
    return BodyFittedGrid(s=s, t=t, x=x, jac=jac, hess=hess, inv=inv, xi_hess=xi_hess, tags=tags)


def write_grid_csv(path, grid: BodyFittedGrid, header=()) -> None:
    """Node table with columns ``i, j, x1, x2, tag``."""
    n_s, n_t = grid.shape
    ii, jj = np.meshgrid(np.arange(n_s), np.arange(n_t), indexing="ij")
    data = {
        "i": ii.ravel(),
        "j": jj.ravel(),
        "x1": grid.x[..., 0].ravel(),
        "x2": grid.x[..., 1].ravel(),
        "tag": grid.tags.ravel(),
    }
    write_table(path, list(data), data, header)


# ----------------------------------------------------------------------------
# coordinate changes


def rotation_matrix(theta_w: float) -> np.ndarray:
    """``[[sin, -cos], [cos, sin]]``: the wedge direction maps to the eta2 axis."""
    sn, cs = math.sin(theta_w), math.cos(theta_w)
    return np.array([[sn, -cs], [cs, sn]])


def rotate_to_eta(point, theta_w: float) -> np.ndarray:
    """Rotate physical points (last axis of length 2) into wedge-aligned coordinates."""
    return np.asarray(point, dtype=float) @ rotation_matrix(theta_w).T


def morph_domains(dom_a: CutoffDomain, dom_b: CutoffDomain) -> Callable:
    """Fibrewise affine map taking ``dom_a``'s shock onto ``dom_b``'s.

    At each height the segment ``[f_a, b]`` is stretched onto ``[f_b, b]``;
    heights are unchanged, so the map is defined for ``x2`` in the common
    shock interval.

    Raises
    ------
    GeometryError
        If either shock meets the body (degenerate fibre).
    """
    if dom_a.body is not dom_b.body and dom_a.body != dom_b.body:
        raise GeometryError("morphed domains must share the body")
    body = dom_a.body
    top = min(dom_a.L, dom_b.L)

    def mapping(points):
        pts = np.asarray(points, dtype=float)
        x1, x2 = pts[..., 0], pts[..., 1]
        if np.any(x2 > top + 1e-12) or np.any(x2 < -1e-12):
            raise GeometryError("morph is defined only on the common shock interval")
        bx = body.b(x2)
        fa = dom_a.shock(x2)
        fb = dom_b.shock(x2)
        den = fa - bx
        if np.any(np.abs(den) <= 0.0):
            raise GeometryError("degenerate morph: shock meets the body")
        out = pts.copy()
        out[..., 0] = (fb - bx) / den * (x1 - bx) + bx
        return out

    return mapping
