import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from plapsym import DomainSpec, Nonlinearity, SolverConfig, build_boundary, solve, triangulate


@functools.lru_cache(maxsize=None)
def curve_for(family="disk", **kw):
    return build_boundary(DomainSpec(family, **kw))


@functools.lru_cache(maxsize=None)
def mesh_for(h, family="disk", **kw):
    return triangulate(curve_for(family, **kw), h)


@functools.lru_cache(maxsize=None)
def solution(p, h, family="disk", f="constant:1", **kw):
    """Cached (curve, field, nonlinearity) for a domain/p/h combination."""
    nl = Nonlinearity.parse(f)
    u = solve(mesh_for(h, family, **kw), nl, SolverConfig(p=p))
    return curve_for(family, **kw), u, nl


ELLIPSE = dict(family="ellipse", a=1.2, b=1 / 1.2)
STAR = dict(family="star", R=1.0, amp=0.03, k=4)


@pytest.fixture(scope="session")
def disk_p2():
    return solution(2.0, 0.05)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])
