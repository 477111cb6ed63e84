import numpy as np
import pytest

from switchstab.automaton import Automaton, validate_and_trim
from switchstab.css import Css


def random_automaton(rng, max_nodes=6, max_m=3, density=0.35, right_resolving=False):
    """Random trimmed, non-empty automaton."""
    while True:
        nv = int(rng.integers(1, max_nodes + 1))
        m = int(rng.integers(1, max_m + 1))
        nodes = [f"n{i}" for i in range(nv)]
        edges = []
        for u in nodes:
            for l in range(1, m + 1):
                if right_resolving:
                    if rng.random() < 0.75:
                        edges.append((u, nodes[rng.integers(nv)], l))
                else:
                    for v in nodes:
                        if rng.random() < density:
                            edges.append((u, v, l))
        g = validate_and_trim(Automaton(m, tuple(nodes), tuple(edges)))
        if not g.is_empty:
            return g


def random_css(rng, n=2, max_nodes=5, max_m=3, scale=(0.4, 1.4), max_edges=None):
    while True:
        g = random_automaton(rng, max_nodes, max_m)
        if max_edges is None or len(g.edges) <= max_edges:
            break
    mats = []
    for _ in range(g.m):
        a = rng.normal(size=(n, n))
        r = max(np.max(np.abs(np.linalg.eigvals(a))), 1e-3)
        mats.append(a / r * rng.uniform(*scale))
    return Css(tuple(mats), g)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ----------------------------------------------------

_criteria: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        detail = dict(report.user_properties).get("detail", "")
        prev = _criteria.get(report.nodeid)
        if prev is None or prev[0] == "passed":
            _criteria[report.nodeid] = (report.outcome, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for nodeid, (outcome, detail) in _criteria.items():
        name = nodeid.split("::")[-1].removeprefix("test_")
        verdict = {"passed": "PASS", "skipped": "SKIP"}.get(outcome, "FAIL")
        terminalreporter.write_line(f"{verdict}  {name}  {detail}".rstrip())
