"""Pure numpy implementations of the hot loops.

These mirror the compiled versions in ``_kernels.pyx`` one for one and are
used whenever the extension is unavailable (or ``DETSHOCK_PURE_PYTHON`` is
set).
"""

import numpy as np


def rho_hat_array(zeta, gamma, b0, rho_lo, rho_hi, rtol, maxiter):
    """Root of ``H(rho) = zeta/2`` on ``[rho_lo, rho_hi]`` for each entry.

    Newton from the right end, which converges monotonically because H is
    concave and decreasing on the subsonic branch; bisection steps take over
    whenever Newton leaves the bracket.
    """
    zeta = np.asarray(zeta, dtype=float)
    target = 0.5 * zeta
    expo = (gamma + 1.0) / (gamma - 1.0)
    inv_gm1 = 1.0 / (gamma - 1.0)
    lo = np.full_like(target, rho_lo)
    hi = np.full_like(target, rho_hi)
    rho = hi.copy()
    active = target > 0.0
    for _ in range(maxiter):
        if not active.any():
            break
        r = rho[active]
        resid = r * r * (b0 - r ** (gamma - 1.0) * inv_gm1) - target[active]
        deriv = 2.0 * r * b0 - expo * r**gamma
        lo_a = lo[active]
        hi_a = hi[active]
        # H decreasing: positive residual means the root lies to the right
        pos = resid > 0.0
        lo_a = np.where(pos, r, lo_a)
        hi_a = np.where(pos, hi_a, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            trial = r - resid / deriv
        bad = ~((trial > lo_a) & (trial < hi_a)) | (deriv >= 0.0)
        trial = np.where(bad, 0.5 * (lo_a + hi_a), trial)
        step = np.abs(trial - r)
        done = (step <= rtol * r) | (resid == 0.0) | (hi_a - lo_a <= rtol * r)
        rho[active] = np.where(resid == 0.0, r, trial)
        lo[active] = lo_a
        hi[active] = hi_a
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    rho[target <= 0.0] = rho_hi
    return rho


def assemble_interior(a_ss, a_st, a_tt, a_s, a_t, hs, ht):
    """COO triplets of the nine-point mapped operator at interior nodes.

    The operator is ``a_ss psi_ss + 2 a_st psi_st + a_tt psi_tt + a_s psi_s
    + a_t psi_t`` with central differences on a uniform (s, t) lattice.
    Unknowns are numbered ``i * n_t + j``.
    """
    n_s, n_t = a_ss.shape
    ii, jj = np.meshgrid(np.arange(1, n_s - 1), np.arange(1, n_t - 1), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    row = ii * n_t + jj
    A = a_ss[ii, jj] / hs**2
    C = a_tt[ii, jj] / ht**2
    Bx = a_st[ii, jj] / (2.0 * hs * ht)
    D = a_s[ii, jj] / (2.0 * hs)
    E = a_t[ii, jj] / (2.0 * ht)
    offsets = [
        (0, 0, -2.0 * A - 2.0 * C),
        (1, 0, A + D),
        (-1, 0, A - D),
        (0, 1, C + E),
        (0, -1, C - E),
        (1, 1, Bx),
        (-1, -1, Bx),
        (1, -1, -Bx),
        (-1, 1, -Bx),
    ]
    rows = np.concatenate([row] * len(offsets))
    cols = np.concatenate([(ii + di) * n_t + (jj + dj) for di, dj, _ in offsets])
    vals = np.concatenate([v for _, _, v in offsets])
    return rows.astype(np.int64), cols.astype(np.int64), vals


def _pair_weights(y_a, y_b, d_a, d_b, p, q):
    w = (1.0 + np.minimum(y_a, y_b)) ** p
    if q != 0.0:
        w = w * (np.minimum(d_a, d_b) / (1.0 + np.maximum(y_a, y_b))) ** q
    return w


def holder_all_pairs(values, x1, x2, delta, alpha, p, q, block=512):
    """Weighted Hoelder quotient maximised over every node pair.

    The pair weight is ``(1 + min y)**p * (min delta / (1 + max y))**q`` with
    ``y = x2``.
    """
    n = values.shape[0]
    best = 0.0
    for start in range(0, n, block):
        stop = min(start + block, n)
        vb = values[start:stop, None]
        dist = np.hypot(x1[start:stop, None] - x1[None, :], x2[start:stop, None] - x2[None, :])
        w = _pair_weights(x2[start:stop, None], x2[None, :], delta[start:stop, None], delta[None, :], p, q)
        with np.errstate(divide="ignore", invalid="ignore"):
            quot = w * np.abs(vb - values[None, :]) / dist**alpha
        quot[~(dist > 0.0)] = 0.0
        best = max(best, float(np.max(quot)))
    return best


def holder_index_pairs(values, x1, x2, delta, first, second, alpha, p, q):
    """Weighted Hoelder quotient maximised over explicit index pairs."""
    dist = np.hypot(x1[first] - x1[second], x2[first] - x2[second])
    w = _pair_weights(x2[first], x2[second], delta[first], delta[second], p, q)
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = w * np.abs(values[first] - values[second]) / dist**alpha
    quot[~(dist > 0.0)] = 0.0
    return float(np.max(quot)) if quot.size else 0.0
