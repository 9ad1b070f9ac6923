import numpy as np
import pytest

from clustered_tensegrity.materials import MaterialLaw
from clustered_tensegrity.model import build_model, member_geometry

ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_cts(seed, n_nodes=7, n_fixed_nodes=1):
    """Random prestressed clustered frame.

    Members form a ring plus chords; ring segments are strings chained into
    clusters of two or three, chords are bars.  Strings get rest lengths 5 %
    short of their current length (tension), bars 2 % long (compression).
    """
    rng = np.random.default_rng(seed)
    nodes = rng.uniform(-1.0, 1.0, (n_nodes, 3))
    ring = [(i, (i + 1) % n_nodes) for i in range(n_nodes)]
    chords = [(i, (i + n_nodes // 2) % n_nodes) for i in range(0, n_nodes, 2)]
    members = ring + chords
    clusters, i = [], 0
    while i < len(ring):
        k = int(rng.integers(1, 4))
        clusters.append(tuple(range(i, min(i + k, len(ring)))))
        i += k
    clusters += [(len(ring) + j,) for j in range(len(chords))]
    kinds = ["string"] * (len(clusters) - len(chords)) + ["bar"] * len(chords)
    _, l = member_geometry(nodes.ravel(), np.array(members))
    l_c = np.array([l[list(c)].sum() for c in clusters])
    l0 = np.where(np.array(kinds) == "string", 0.95, 1.02) * l_c
    E = np.where(np.array(kinds) == "string", 7.6e10, 2.06e11)
    mats = [MaterialLaw.linear(e) for e in E]
    area = rng.uniform(0.5e-6, 2e-6, len(clusters)) * np.where(np.array(kinds) == "bar", 100, 1)
    fixed = np.arange(3 * n_fixed_nodes)
    return build_model(nodes, members, kinds, clusters=clusters, fixed=fixed, area=area,
                       density=7870.0, rest_length=l0, materials=mats)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
