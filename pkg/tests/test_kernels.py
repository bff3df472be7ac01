"""The compiled kernels and the numpy fallback must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from detshock import _kernels_py as pure
from detshock import kernels

compiled = pytest.importorskip("detshock._kernels", reason="compiled extension not built")


def _sparse(triplets, n):
    rows, cols, vals = triplets
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def test_backend_is_reported():
    import detshock

    assert detshock.BACKEND in ("cython", "python")
    assert kernels.compiled_available()
    assert detshock.BACKEND == "cython"


def test_pure_python_switch():
    code = "import detshock; print(detshock.BACKEND)"
    out = subprocess.run(
        [sys.executable, "-c", code],
        env={**os.environ, "DETSHOCK_PURE_PYTHON": "1"},
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("gamma,b0", [(1.4, 1.0), (2.0, 1.0), (3.0, 2.5)])
def test_rho_hat_parity(gamma, b0):
    rng = np.random.default_rng(7)
    rho_sonic = (2.0 * (gamma - 1.0) * b0 / (gamma + 1.0)) ** (1.0 / (gamma - 1.0))
    rho_top = ((gamma - 1.0) * b0) ** (1.0 / (gamma - 1.0))
    h_sonic = rho_sonic**2 * (b0 - rho_sonic ** (gamma - 1.0) / (gamma - 1.0))
    zeta = np.concatenate([[0.0], rng.uniform(0.0, 2.0 * h_sonic * 0.999, 500)])
    a = pure.rho_hat_array(zeta, gamma, b0, rho_sonic, rho_top, 1e-12, 200)
    b = np.asarray(compiled.rho_hat_array(zeta, gamma, b0, rho_sonic, rho_top, 1e-12, 200))
    np.testing.assert_allclose(a, b, rtol=1e-11, atol=0)


def test_assembly_parity():
    rng = np.random.default_rng(11)
    n_s, n_t = 9, 13
    coeffs = [np.ascontiguousarray(rng.normal(size=(n_s, n_t))) for _ in range(5)]
    n = n_s * n_t
    m_pure = _sparse(pure.assemble_interior(*coeffs, 0.1, 0.07), n)
    m_comp = _sparse(compiled.assemble_interior(*coeffs, 0.1, 0.07), n)
    assert abs(m_pure - m_comp).max() <= 1e-13


def test_assembly_reproduces_laplacian():
    n_s, n_t = 7, 6
    one = np.ones((n_s, n_t))
    zero = np.zeros((n_s, n_t))
    hs, ht = 1.0 / (n_s - 1), 1.0 / (n_t - 1)
    mat = _sparse(kernels.assemble_interior(one, zero, one, zero, zero, hs, ht), n_s * n_t)
    s = np.linspace(0, 1, n_s)[:, None]
    t = np.linspace(0, 1, n_t)[None, :]
    # quadratic with Laplacian 2 + 2 = 4
    u = (s**2 + t**2 + 3 * s * t).ravel()
    lap = (mat @ u).reshape(n_s, n_t)[1:-1, 1:-1]
    np.testing.assert_allclose(lap, 4.0, rtol=1e-10)


def test_holder_parity():
    rng = np.random.default_rng(5)
    n = 300
    x1, x2 = rng.uniform(0, 3, n), rng.uniform(0, 10, n)
    v = np.sin(x1) + x2**0.3
    d = 1.0 + rng.uniform(0, 1, n)
    for q in (0.0, 1.5):
        a = pure.holder_all_pairs(v, x1, x2, d, 0.5, 1.2, q)
        b = compiled.holder_all_pairs(v, x1, x2, d, 0.5, 1.2, q)
        assert a == pytest.approx(b, rel=1e-13)
    first = rng.integers(0, n, 1000).astype(np.int64)
    second = rng.integers(0, n, 1000).astype(np.int64)
    a = pure.holder_index_pairs(v, x1, x2, d, first, second, 0.5, 1.2, 0.7)
    b = compiled.holder_index_pairs(v, x1, x2, d, first, second, 0.5, 1.2, 0.7)
    assert a == pytest.approx(b, rel=1e-13)


def test_holder_brute_force():
    x2 = np.array([0.0, 1.0, 3.0])
    x1 = np.zeros(3)
    v = np.array([0.0, 1.0, 5.0])
    d = np.ones(3)
    got = kernels.holder_all_pairs(v, x1, x2, d, 0.5, 0.0, 0.0)
    ref = max(1.0 / 1.0, 5.0 / 3.0**0.5, 4.0 / 2.0**0.5)
    assert got == pytest.approx(ref, rel=1e-14)

