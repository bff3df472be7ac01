"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--solve]

Each kernel is run on the same inputs through both backends; the script
prints the best-of-``repeat`` time, the speed-up and the largest relative
difference between the two results.  ``--solve`` also times a 32 x 64
blunt-body solve with each backend in a subprocess.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np
import scipy.sparse as sp

from detshock import _kernels_py as pure
from detshock.gas_model import GasParams, rho_max, rho_sonic, sonic_momentum_sq

try:
    from detshock import _kernels as compiled
except ImportError:  # pragma: no cover - depends on the build
    compiled = None


def _inputs(rng):
    g = GasParams(2.0, 1.0)
    zeta = rng.uniform(0.0, 0.999 * sonic_momentum_sq(g), 200_000)
    rho_args = (zeta, g.gamma, g.b0_bernoulli, rho_sonic(g), rho_max(g), 1e-12, 200)

    n_s, n_t = 128, 256
    coeffs = [np.ascontiguousarray(rng.normal(size=(n_s, n_t))) for _ in range(5)]
    asm_args = (*coeffs, 1.0 / (n_s - 1), 1.0 / (n_t - 1))

    n = 3000
    x1, x2 = rng.uniform(0.0, 3.0, n), rng.uniform(0.0, 60.0, n)
    values = np.sin(x1) + x2**0.3
    delta = 1.0 + rng.uniform(0.0, 1.0, n)
    holder_args = (values, x1, x2, delta, 0.5, 1.0, 0.5)
    return {
        "rho_hat_array (2e5 points)": rho_args,
        "assemble_interior (128x256)": asm_args,
        "holder_all_pairs (3000 nodes)": holder_args,
    }


def _same(name, a, b) -> float:
    if name.startswith("assemble"):
        n = int(max(a[0].max(), a[1].max())) + 1
        ma = sp.coo_matrix((a[2], (a[0], a[1])), shape=(n, n)).tocsr()
        mb = sp.coo_matrix((np.asarray(b[2]), (np.asarray(b[0]), np.asarray(b[1]))), shape=(n, n)).tocsr()
        return float(abs(ma - mb).max() / max(abs(ma).max(), 1e-300))
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)))


def _best(fn, args, repeat: int) -> float:
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def bench_kernels(repeat: int) -> None:
    rng = np.random.default_rng(0)
    names = {
        "rho_hat_array (2e5 points)": "rho_hat_array",
        "assemble_interior (128x256)": "assemble_interior",
        "holder_all_pairs (3000 nodes)": "holder_all_pairs",
    }
    print(f"{'kernel':<32s} {'numpy [s]':>10s} {'cython [s]':>11s} {'speed-up':>9s} {'max rel diff':>13s}")
    for label, args in _inputs(rng).items():
        fn_pure = getattr(pure, names[label])
        t_pure = _best(fn_pure, args, repeat)
        if compiled is None:
            print(f"{label:<32s} {t_pure:10.4f} {'n/a':>11s}")
            continue
        fn_comp = getattr(compiled, names[label])
        t_comp = _best(fn_comp, args, repeat)
        diff = _same(label, fn_pure(*args), fn_comp(*args))
        print(f"{label:<32s} {t_pure:10.4f} {t_comp:11.4f} {t_pure / t_comp:9.1f} {diff:13.2e}")


def bench_solve() -> None:
    code = (
        "import time, math\n"
        "from detshock import free_boundary as fb, geometry as ge, BACKEND\n"
        "from detshock.gas_model import GasParams\n"
        "body = ge.default_body(math.radians(30.0), 1.0)\n"
        "t = time.perf_counter()\n"
        "fb.solve_free_boundary(body, GasParams(2.0, 1.0), 0.05, 1.0, None, fb.SolveSettings(n_s=32, n_t=64))\n"
        "print(BACKEND, time.perf_counter() - t)\n"
    )
    for flag in ("0", "1"):
        env = {**os.environ, "DETSHOCK_PURE_PYTHON": flag}
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, seconds = out.stdout.split()
        print(f"32x64 golden solve, {backend:<7s} backend: {float(seconds):.2f} s")


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--solve", action="store_true", help="also time an end-to-end solve per backend")
    args = parser.parse_args(argv)
    bench_kernels(args.repeat)
    if args.solve:
        bench_solve()


if __name__ == "__main__":
    main()
