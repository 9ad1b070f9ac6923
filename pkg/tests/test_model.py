import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clustered_tensegrity.materials import MaterialLaw
from clustered_tensegrity.model import (BoundaryMotion, GeometryError, build_model, cluster_lengths,
                                        coordinate_index, member_geometry, node_coordinates,
                                        scatter_coordinates, split_coordinates, validate)
from clustered_tensegrity.scenarios import generate

from conftest import random_cts

STEEL = MaterialLaw.linear(2.06e11)


def two_node(**kw):
    args = dict(clusters=None, fixed=[0, 1, 2], area=1e-4, density=7870.0, materials=STEEL)
    args.update(kw)
    return build_model([(0, 0, 0), (1, 0, 0)], [(0, 1)], ["bar"], **args)


def test_minimal_model_passes():
    report = validate(two_node())
    assert report.ok
    assert str(report) == "pass"


def test_unassigned_member_reported():
    m = build_model([(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1), (1, 2)], ["string"],
                    clusters=[(0,)], area=1e-6, density=7870.0, rest_length=[1.0],
                    materials=STEEL)
    assert "member 2 unassigned to any cluster" in validate(m).violations


def test_overlapping_boundary_reported():
    m = two_node().with_(free=np.arange(6), fixed=np.array([0]))
    assert any(v.startswith("index in both free and constrained sets") for v in validate(m).violations)


def test_other_violations():
    m = build_model([(0, 0, 0), (1, 0, 0), (2, 0, 0)], [(0, 1), (1, 1)], ["bar", "bar"],
                    clusters=[(0,), (1,)], area=[1e-4, -1.0], density=7870.0,
                    rest_length=[1.0, 1.0], materials=STEEL)
    msgs = "\n".join(validate(m).violations)
    assert "member 2: tail and head are the same node" in msgs
    assert "nonpositive area for element(s) 2" in msgs
    bars = build_model([(0, 0, 0), (1, 0, 0), (2, 0, 0)], [(0, 1), (1, 2)], ["bar"],
                       clusters=[(0, 1)], area=1e-4, density=7870.0, materials=STEEL)
    assert "cluster 1: bars cannot be clustered" in validate(bars).violations


def test_split_examples():
    n = np.array([1, 2, 3, 4, 5, 6.0])
    a, b = split_coordinates(n, [0, 1, 2], [3, 4, 5])
    assert np.array_equal(a, [1, 2, 3]) and np.array_equal(b, [4, 5, 6])
    a, b = split_coordinates(n, [1], [0, 2, 3, 4, 5])
    assert np.array_equal(a, [2])
    assert np.array_equal(scatter_coordinates(a, b, [1], [0, 2, 3, 4, 5]), n)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12).flatmap(lambda k: st.tuples(
    arrays(float, 3 * k, elements=st.floats(-1e6, 1e6)), st.permutations(range(3 * k)),
    st.integers(0, 3 * k))))
def test_split_scatter_round_trip(args):
    n, perm, cut = args
    free, fixed = np.array(perm[:cut], dtype=int), np.array(perm[cut:], dtype=int)
    a, b = split_coordinates(n, free, fixed)
    assert np.array_equal(scatter_coordinates(a, b, free, fixed), n)


def test_member_geometry_examples():
    H, l = member_geometry([0, 0, 0, 1, 0, 0], [(0, 1)])
    assert np.array_equal(H[:, 0], [1, 0, 0]) and l[0] == 1.0
    _, l = member_geometry([0, 0, 0, 3, 4, 0], [(0, 1)])
    assert l[0] == 5.0
    with pytest.raises(GeometryError):
        member_geometry([0, 0, 0, 0, 0, 0], [(0, 1)])


def test_member_geometry_against_pairwise_norms():
    rng = np.random.default_rng(0)
    N = rng.normal(size=(6, 3))
    members = [(i, j) for i in range(6) for j in range(i + 1, 6)][:10]
    _, l = member_geometry(N.ravel(), members)
    ref = [np.sqrt(sum((N[j][k] - N[i][k]) ** 2 for k in range(3))) for i, j in members]
    assert np.allclose(l, ref, rtol=1e-14, atol=0)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (5, 3), elements=st.floats(-10, 10)), arrays(float, 3, elements=st.floats(-100, 100)))
def test_lengths_translation_invariant(N, shift):
    members = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]
    h = N[[j for _, j in members]] - N[[i for i, _ in members]]
    assume(np.all(np.linalg.norm(h, axis=1) > 1e-3))
    _, l = member_geometry(N.ravel(), members)
    _, l2 = member_geometry((N + shift).ravel(), members)
    assert np.allclose(l, l2, rtol=1e-12, atol=1e-12)


def test_cluster_lengths_examples():
    l = np.array([1.0, 2.0])
    assert np.array_equal(cluster_lengths(np.eye(2), l), l)
    assert np.array_equal(cluster_lengths([[1, 1]], l), [3.0])
    with pytest.raises(ValueError):
        cluster_lengths([[1, 1, 1]], l)


def test_tbar_cluster_length_is_sum_of_segments():
    model, _, _ = generate("tbar")
    plain = model.unclustered()
    _, l = member_geometry(plain.reference, plain.members)
    l_c = cluster_lengths(model.S, l)
    assert l_c[2] == l[2] + l[3]


@pytest.mark.parametrize("seed", range(5))
def test_incidence_and_clustering_invariants(seed):
    m = random_cts(seed)
    assert np.all(m.C.sum(axis=1) == 0)
    assert np.all(np.abs(m.C).sum(axis=1) == 2)
    assert np.array_equal(m.S.sum(axis=1), m.cluster_size)
    assert np.all(m.S.sum(axis=0) == 1)


def test_coordinate_helpers():
    assert coordinate_index(2, "y") == 7
    assert np.array_equal(node_coordinates([0, 2], "z"), [2, 8])


def test_boundary_motion_holds_outside_table():
    bm = BoundaryMotion([0], [0.0, 1.0, 2.0], [[0.0], [1.0], [4.0]])
    p, v, a = bm(1.0)
    assert p[0] == pytest.approx(1.0)
    p, v, a = bm(3.0)
    assert p[0] == pytest.approx(4.0) and v[0] == 0.0 and a[0] == 0.0
