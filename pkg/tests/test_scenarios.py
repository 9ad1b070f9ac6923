import numpy as np
import pytest

from clustered_tensegrity.assembly import equilibrium_matrices
from clustered_tensegrity.materials import member_forces
from clustered_tensegrity.model import member_geometry, validate
from clustered_tensegrity.scenarios import KINDS, ScenarioSpec, generate, levy_at, levy_design_areas, levy_geometry
from clustered_tensegrity.statics import prestress_modes


@pytest.fixture(scope="module")
def scenarios():
    return {k: generate(k) for k in KINDS}


def _free_residual(model):
    H, l = member_geometry(model.reference, model.members)
    l_c = np.bincount(model.cluster_of, weights=l, minlength=model.n_ec)
    fv = member_forces(model, l, l_c)
    A_2c, _ = equilibrium_matrices(model, H, l, l_c)
    return np.max(np.abs((A_2c @ fv.t_c)[model.free])), fv


# frozen sizes: (nodes, members, clustered elements, free coordinates, modes)
SIZES = {"tbar": (4, 6, 5, 8, 1), "tower2": (12, 28, 24, 24, 5), "levy": (60, 156, 45, 144, 1)}


@pytest.mark.parametrize("kind", KINDS)
def test_sizes_and_validity(scenarios, kind):
    model, sched, fx = scenarios[kind]
    assert validate(model).ok
    assert (model.n_n, model.n_e, model.n_ec, len(model.free), fx.get("prestress_modes", 1)) == SIZES[kind]
    assert prestress_modes(model).k == SIZES[kind][4]
    assert sched.t_final == pytest.approx(0.5 * fx["t_end"])
    np.testing.assert_allclose(sched.l_0c(0.0), model.rest_length)


@pytest.mark.parametrize("kind", KINDS)
def test_prestress_is_feasible_and_self_equilibrated(scenarios, kind):
    model, _, fx = scenarios[kind]
    res, fv = _free_residual(model)
    scale = np.max(np.abs(fv.t_c))
    assert res <= 1e-8 * scale
    np.testing.assert_allclose(fv.t_c, fx["prestress"], rtol=1e-9, atol=1e-9 * scale)
    assert np.all(fv.t_c[model.is_string] > 0)
    assert np.all(fv.t_c[~model.is_string] < 0)
    for i, f in fx["anchors"]:
        assert fv.t_c[i] == pytest.approx(f, rel=1e-9)


def test_tbar_clusters_the_lower_strings(scenarios):
    model = scenarios["tbar"].model
    sizes = sorted(len(c) for c in model.clusters)
    assert sizes == [1, 1, 1, 1, 2]


def test_tower_is_fourfold_symmetric(scenarios):
    model = scenarios["tower2"].model
    N = model.reference.reshape(-1, 3)
    R = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    rotated = N @ R.T
    # rotating by a quarter turn maps node 4L+i to 4L+i+1
    perm = np.array([4 * (k // 4) + (k % 4 + 1) % 4 for k in range(12)])
    np.testing.assert_allclose(rotated, N[perm], atol=1e-12)
    t_c = scenarios["tower2"].fixtures["prestress"]
    labels = np.array(model.labels)
    for g in ("bar", "vertical", "bottom", "middle", "top"):
        vals = t_c[labels == g]
        np.testing.assert_allclose(vals, vals[0], rtol=1e-8)


@pytest.mark.parametrize("p", [3, 6, 12])
def test_levy_geometry_is_cyclic(p):
    nodes, members, groups, PN = levy_geometry(p=p)
    assert nodes.shape == (5 * p, 3)
    assert len(members) == 13 * p
    a = 2 * np.pi / p
    R = np.array([[np.cos(a), -np.sin(a), 0.0], [np.sin(a), np.cos(a), 0.0], [0.0, 0.0, 1.0]])
    perm = np.array([p * (k // p) + (k % p + 1) % p for k in range(5 * p)])
    np.testing.assert_allclose(nodes @ R.T, nodes[perm], atol=1e-9)
    assert sum(len(v) for v in groups.values()) == len(members)


@pytest.mark.parametrize("c", [0.2, 0.35, 0.5, 0.65, 0.8])
def test_levy_prestress_feasible_across_ratios(c):
    areas = levy_design_areas()
    model, t_c, basis = levy_at(c, areas=areas)
    assert basis.k == 1
    assert np.all(t_c[model.is_string] > 0)
    assert np.all(t_c[~model.is_string] < 0)
    labels = np.array(model.labels)
    for g in set(model.labels):
        vals = t_c[labels == g]
        np.testing.assert_allclose(vals, vals[0], rtol=1e-7)


def test_levy_design_stress_is_a_tenth_of_yield():
    areas = levy_design_areas()
    model, t_c, _ = levy_at(0.5, areas=areas)
    labels = np.array(model.labels)
    for g, A in areas.items():
        sy = 435e6 if g in ("OB", "IB") else 1223.5e6
        peak = np.max(np.abs(t_c[labels == g])) / A
        assert peak == pytest.approx(0.1 * sy, rel=1e-9)


def test_levy_schedule_ends_on_final_design(scenarios):
    model, sched, fx = scenarios["levy"]
    end, _, _ = levy_at(fx["c_end"], areas=fx["areas"])
    np.testing.assert_allclose(sched.l_0c(sched.t_final), end.rest_length, rtol=1e-12)


def test_spec_object_and_overrides():
    a = generate(ScenarioSpec("tbar", {"scale": 1.0}))
    b = generate("tbar", scale=1.0)
    np.testing.assert_array_equal(a.model.reference, b.model.reference)
    c = generate(ScenarioSpec("tbar", {"scale": 1.0}), scale=3.0)
    assert np.ptp(c.model.reference) == pytest.approx(3 * np.ptp(a.model.reference))


@pytest.mark.parametrize("kind,params,msg", [
    ("dome", {}, "unknown scenario kind"),
    ("levy", {"c": 1.2}, "deployment ratio"),
    ("levy", {"p": 2}, "complexity"),
])
def test_bad_requests(kind, params, msg):
    with pytest.raises(ValueError, match=msg):
        generate(kind, **params)
