"""Shared fixtures: a fast shooting configuration and seeded instances.

The default shooting grid is sized for production robustness; the test
suite runs a lighter one that still meets every stated tolerance (verified
against the defaults in test_geodesics).  Acceptance-criterion outcomes are
collected here and echoed in the terminal summary.
"""

from __future__ import annotations

import numpy as np
import pytest

from srot.geodesics import ShootingConfig
from srot.manifolds import euclidean, heisenberg
from srot.measures import DiscreteMeasure

# light but sufficient: matches the default configuration to ~3e-12 on
# random unit-box Heisenberg instances
LIGHT_CFG = ShootingConfig(
    angular_grid=16, radial_scales=(0.45, 1.0), vertical_grid=17, max_candidates=6
)

acceptance_results: list[tuple[str, bool, str]] = []


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    acceptance_results.append((name, ok, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in acceptance_results:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}: {detail}")


@pytest.fixture(scope="session")
def h1():
    return heisenberg()


@pytest.fixture(scope="session")
def e2():
    return euclidean(2)


@pytest.fixture(scope="session")
def e3():
    return euclidean(3)


@pytest.fixture(scope="session")
def light_cfg():
    return LIGHT_CFG


def random_instance(rng, size0, size1=None, dim=3, uniform=True, box=1.0):
    """A pair of random discrete measures supported in a centered box."""
    size1 = size0 if size1 is None else size1
    p0 = rng.uniform(-box, box, size=(size0, dim))
    p1 = rng.uniform(-box, box, size=(size1, dim))
    if uniform:
        w0 = np.full(size0, 1.0 / size0)
        w1 = np.full(size1, 1.0 / size1)
    else:
        w0 = rng.random(size0) + 0.1
        w0 /= w0.sum()
        w1 = rng.random(size1) + 0.1
        w1 /= w1.sum()
    return DiscreteMeasure(p0, w0), DiscreteMeasure(p1, w1)
