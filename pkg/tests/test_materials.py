import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clustered_tensegrity.materials import (MaterialLaw, MemberState, StrainRangeWarning,
                                            force_densities, member_forces, preset,
                                            redistribute_segment_rest_lengths,
                                            rest_length_for_force, strain_energy, stress_eval)
from clustered_tensegrity.model import build_model, member_geometry
from clustered_tensegrity.scenarios import generate

from conftest import random_cts

BILINEAR = MaterialLaw.plastic([(0.001, 100e6), (0.01, 190e6)])


def test_linear_stress():
    r = stress_eval(MaterialLaw.linear(2.06e11), 1e-3)
    assert r.stress == pytest.approx(2.06e8, rel=1e-15)
    assert r.secant == r.tangent == 2.06e11


@pytest.mark.parametrize("law", [MaterialLaw.linear(1e9), BILINEAR,
                                 MaterialLaw.multilinear([(0.001, 1e6), (0.002, 1.5e6)])])
def test_origin(law):
    assert stress_eval(law, 0.0).stress == 0.0


def test_bilinear_unload_trace():
    assert BILINEAR.E == pytest.approx(100e9)
    r = stress_eval(BILINEAR, 0.002)
    assert r.stress == pytest.approx(110e6, rel=1e-12)
    r2 = stress_eval(BILINEAR, 0.0015, r.state)
    assert r2.stress == pytest.approx(60e6, rel=1e-12)
    assert r2.tangent == pytest.approx(100e9)


def test_plastic_reverse_yield():
    r = stress_eval(BILINEAR, 0.002)
    r = stress_eval(BILINEAR, -0.0015, r.state)
    # reload in compression to the hardened envelope
    assert r.stress < -100e6
    assert r.state.max_strain_reached > 0.0011


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-0.009, 0.009), min_size=1, max_size=20))
def test_plastic_history_monotone(path):
    state = MemberState()
    for e in path:
        new = stress_eval(BILINEAR, e, state, warn=False).state
        assert new.max_strain_reached >= state.max_strain_reached
        state = new


@settings(max_examples=200, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(1e6, 1e12))
def test_linear_round_trip(strain, E):
    law = MaterialLaw.linear(E)
    s = stress_eval(law, strain).stress
    assert law.strain_for_stress(s) == pytest.approx(strain, rel=1e-14, abs=1e-300)


def test_multilinear_warns_beyond_table():
    law = MaterialLaw.multilinear([(0.001, 1e6)])
    with pytest.warns(StrainRangeWarning):
        r = stress_eval(law, 0.01)
    assert r.extrapolated


def test_material_constructor_errors():
    with pytest.raises(ValueError):
        MaterialLaw.linear(-1.0)
    with pytest.raises(ValueError):
        MaterialLaw.plastic([(0.002, 1e6), (0.001, 2e6)])
    with pytest.raises(ValueError):
        MaterialLaw("rubber", 1.0)


def test_presets():
    assert preset("steel-Q235").E == 2.06e11
    assert preset("steel-cable").E == 7.6e10
    p = preset("steel-Q235", "plastic")
    assert p.yield_strain == pytest.approx(435e6 / 2.06e11)
    with pytest.raises(KeyError):
        preset("wood")


def _string(l0):
    return build_model([(0, 0, 0), (1, 0, 0)], [(0, 1)], ["string"], fixed=range(6), area=1e-6,
                       density=7870.0, rest_length=[l0], materials=MaterialLaw.linear(1e9))


def test_string_at_rest_and_slack():
    m = _string(1.0)
    assert member_forces(m, [1.0], [1.0]).t_c[0] == 0.0
    fv = member_forces(_string(1.2), [1.0], [1.0])
    assert fv.t_c[0] == 0.0 and fv.tangent[0] == 0.0 and fv.slack[0]


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 0.99))
def test_slack_stays_slack_when_shortened(lc):
    m = _string(1.0)
    assert member_forces(m, [lc], [lc]).t_c[0] == 0.0


def test_tbar_prestress_forces():
    model, _, fx = generate("tbar")
    _, l = member_geometry(model.reference, model.members)
    l_c = np.bincount(model.cluster_of, l)
    fv = member_forces(model, l, l_c)
    assert np.allclose(fv.t_c, fx["prestress"], rtol=1e-9)
    assert fv.t_c[0] == pytest.approx(-100.0, rel=1e-9)
    assert np.allclose(fv.t_c[model.is_string], 111.8034, rtol=1e-5)


@pytest.mark.parametrize("seed", range(5))
def test_segment_forces_are_cluster_forces(seed):
    m = random_cts(seed)
    _, l = member_geometry(m.reference, m.members)
    l_c = np.bincount(m.cluster_of, l)
    fv = member_forces(m, l, l_c)
    assert np.array_equal(fv.t, m.S.T @ fv.t_c)


def test_force_densities_examples():
    x, x_c = force_densities([10.0], [2.0], [2.0], np.eye(1))
    assert x_c[0] == 5.0 and x[0] == 5.0
    x, x_c = force_densities([6.0], [1.0, 2.0], [3.0], [[1, 1]])
    assert np.array_equal(x, [6.0, 3.0])


def test_redistribution_examples():
    nodes = [(0, 0, 0), (1.0, 0, 0), (2.1, 0, 0)]
    m = build_model(nodes, [(0, 1), (1, 2)], ["string"], clusters=[(0, 1)], fixed=range(9),
                    area=1e-6, density=7870.0, rest_length=[2.0], materials=MaterialLaw.linear(1e9))
    l = np.array([1.0, 1.1])
    l0, mass = redistribute_segment_rest_lengths(m, l, [2.0])
    EA = 1e9 * 1e-6
    t = EA * (l - l0) / l0
    assert t[0] == pytest.approx(t[1], rel=1e-12)
    assert l0.sum() == pytest.approx(2.0, rel=1e-15)
    assert np.allclose(mass, 7870.0 * 1e-6 * l0)
    # unstressed: rest lengths equal lengths
    l0, mass = redistribute_segment_rest_lengths(m, l, [2.1])
    assert np.allclose(l0, l, rtol=1e-15)
    # singletons keep the element rest length
    plain = m.unclustered()
    l0, _ = redistribute_segment_rest_lengths(plain, l, [0.9, 1.0])
    assert np.array_equal(l0, [0.9, 1.0])


@pytest.mark.parametrize("seed", range(5))
def test_equal_tension_within_clusters(seed):
    m = random_cts(seed)
    _, l = member_geometry(m.reference, m.members)
    l0, _ = redistribute_segment_rest_lengths(m, l, m.rest_length)
    t = m.initial_modulus[m.cluster_of] * m.segment_area * (l - l0) / l0
    for c in m.clusters:
        assert np.allclose(t[list(c)], t[c[0]], rtol=1e-8)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 50.0), st.floats(0.1, 10.0))
def test_rest_length_for_force_inverts(t, length):
    law = MaterialLaw.linear(1e8)
    l0 = rest_length_for_force(law, 1e-6, length, t)
    assert 100.0 * (length - l0) / l0 == pytest.approx(t, rel=1e-10, abs=1e-10)


def test_strain_energy_linear_and_tabulated():
    assert strain_energy(MaterialLaw.linear(2.0), 0.5) == pytest.approx(0.25)
    law = MaterialLaw.multilinear([(0.001, 100e6), (0.002, 150e6)])
    # area under the curve to 0.002: 0.5*0.001*100e6 + 0.001*(100e6+150e6)/2
    assert strain_energy(law, 0.002) == pytest.approx(50e3 + 125e3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        stress_eval(law, 0.0015)
