"""Shared fixtures: the expensive solves are run once per session."""

from __future__ import annotations

import math

import pytest

from detshock import elliptic_solver as es
from detshock import free_boundary as fb
from detshock import geometry as ge
from detshock.gas_model import GasParams

GOLDEN = dict(gamma=2.0, b0=1.0, eps=0.05, theta_deg=30.0, h0=1.0, d0=1.0)
WEDGE = dict(gamma=2.0, b0=1.0, eps=0.05, theta_deg=30.0, apex=1.0, d0=0.5, L=4.0)
WEDGE_GRIDS = ((32, 64), (64, 128), (128, 256))

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line)


@pytest.fixture
def record_criterion(request):
    """Record one ``criterion N ... PASS|FAIL`` line for the terminal summary."""

    def record(number: int, title: str, passed: bool, detail: str = "") -> None:
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number}: {title:<40s} {status}  {detail}".rstrip()
        request.config.stash[_ACCEPTANCE_KEY].append(line)
        print(line)

    return record


@pytest.fixture(scope="session")
def golden_gas():
    return GasParams(GOLDEN["gamma"], GOLDEN["b0"])


@pytest.fixture(scope="session")
def golden_body():
    return ge.default_body(math.radians(GOLDEN["theta_deg"]), GOLDEN["h0"])


def _golden(gas, body, n_s, n_t):
    return fb.solve_free_boundary(
        body, gas, GOLDEN["eps"], GOLDEN["d0"], None, fb.SolveSettings(n_s=n_s, n_t=n_t), membership=(10.0, 10.0)
    )


@pytest.fixture(scope="session")
def golden_solution(golden_gas, golden_body):
    """Reference blunt-body run at 64 x 128."""
    return _golden(golden_gas, golden_body, 64, 128)


@pytest.fixture(scope="session")
def golden_fine(golden_gas, golden_body):
    """The same run at 128 x 256."""
    return _golden(golden_gas, golden_body, 128, 256)


@pytest.fixture(scope="session")
def coarse_solution(golden_gas, golden_body):
    """Cheap 24 x 48 blunt-body run for structural tests."""
    return _golden(golden_gas, golden_body, 24, 48)


@pytest.fixture(scope="session")
def wedge_setup():
    g = GasParams(WEDGE["gamma"], WEDGE["b0"])
    body = ge.wedge_body(math.radians(WEDGE["theta_deg"]), apex=WEDGE["apex"])
    bg = es.background_pair(g, WEDGE["eps"], body.theta_w, WEDGE["d0"], body.b0)
    return g, body, bg


@pytest.fixture(scope="session")
def wedge_runs(wedge_setup):
    """Straight-wedge solves seeded with the exact line, keyed by grid."""
    g, body, bg = wedge_setup
    runs = {}
    for n_s, n_t in WEDGE_GRIDS:
        runs[(n_s, n_t)] = fb.solve_free_boundary(
            body,
            g,
            WEDGE["eps"],
            WEDGE["d0"],
            WEDGE["L"],
            fb.SolveSettings(n_s=n_s, n_t=n_t),
            seed_profile="background",
            wall_data=bg.psi0,
        )
    return runs
