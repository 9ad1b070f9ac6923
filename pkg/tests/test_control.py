import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from clustered_tensegrity.control import (ControlProblem, NNLSError, TargetTrajectory, _allocate,
                                          active_rest_lengths, closed_loop_sim, control_step,
                                          kkt_violation, nnls, nnls_enumerate, nnls_min_norm)
from clustered_tensegrity.dynamics import DivergenceError
from clustered_tensegrity.materials import MaterialLaw
from clustered_tensegrity.scenarios import generate

# subnormal entries would make the exact solution overflow
finite = st.floats(-10, 10, allow_nan=False, allow_subnormal=False)
# enumeration is only a fair oracle on well-scaled entries
scaled = st.one_of(st.just(0.0), st.floats(1e-3, 10), st.floats(-10, -1e-3))


def test_nnls_examples():
    x, r = nnls(np.eye(2), [1.0, -2.0])
    assert np.array_equal(x, [1.0, 0.0]) and r == pytest.approx(2.0)
    y = np.array([0.5, 2.0, 0.0])
    x, r = nnls(np.eye(3), y)
    assert np.array_equal(x, y) and r == 0.0
    with pytest.raises(ValueError):
        nnls(np.eye(2), [np.nan, 1.0])


def test_scalar_toy_allocation():
    x, r = nnls([[1.0]], [-2.0])
    assert x[0] == 0.0 and r == pytest.approx(2.0)
    x, r = nnls([[1.0]], [3.0])
    assert x[0] == pytest.approx(3.0) and r == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(arrays(float, (5, 3), elements=scaled), arrays(float, 5, elements=scaled))
def test_nnls_matches_enumeration_and_kkt(G, y):
    x, r = nnls(G, y)
    _, re = nnls_enumerate(G, y)
    assert r <= re + 1e-9 * max(1.0, np.linalg.norm(y))
    viol, xmin = kkt_violation(G, y, x)
    assert xmin >= 0
    assert viol <= 1e-8 * max(1.0, np.abs(G).max() ** 2 * (np.abs(y).max() + 1))


@settings(max_examples=200, deadline=None)
@given(arrays(float, (5, 3), elements=finite), arrays(float, 5, elements=finite))
def test_nnls_terminates_on_any_scale(G, y):
    x, r = nnls(G, y)
    assert np.all(x >= 0)
    assert r <= np.linalg.norm(y) * (1 + 1e-12)


@settings(max_examples=100, deadline=None)
@given(arrays(float, (6, 3), elements=finite), arrays(float, 3, elements=st.floats(0.1, 5)))
def test_nonnegative_ls_solution_returned(G, x_true):
    if np.linalg.matrix_rank(G) < 3 or np.linalg.cond(G) > 1e6:
        return
    y = G @ x_true
    x, _ = nnls(G, y)
    assert np.allclose(x, np.linalg.pinv(G) @ y, rtol=0, atol=1e-10 * max(1.0, np.abs(x_true).max()))


def test_min_norm_and_reference_tie_break():
    G = np.array([[1.0, 1.0]])
    x, r = nnls_min_norm(G, [2.0])
    assert np.allclose(x, [1.0, 1.0]) and r < 1e-10
    x, _ = nnls_min_norm(G, [2.0], x_ref=[2.0, 0.5])
    assert np.allclose(x, [1.75, 0.25])


def test_allocation_sign_rules():
    G = np.array([[1.0, -1.0]])
    is_string = np.array([True, False])
    x, res, _, _ = _allocate(G, np.array([-3.0]), is_string)
    assert res < 1e-10 and x[0] >= 0 and G @ x == pytest.approx(-3.0)


def test_active_rest_lengths_examples():
    law = [MaterialLaw.linear(100.0)]
    assert active_rest_lengths([10.0], [1.0], law, [1.0])[0] == pytest.approx(100 / 110, rel=1e-15)
    assert active_rest_lengths([0.0], [1.3], law, [1.0])[0] == 1.3
    rng = np.random.default_rng(5)
    for _ in range(50):
        t, lc, E = rng.uniform(0, 100), rng.uniform(0.1, 3), rng.uniform(1e3, 1e6)
        law = [MaterialLaw.linear(E)]
        l0 = active_rest_lengths([t], [lc], law, [1.0])[0]
        # force -> rest length -> force loses digits to the cancellation in lc - l0
        assert E * (lc - l0) / l0 == pytest.approx(t, rel=1e-9, abs=1e-9)
        t2 = E * (lc - l0) / l0
        assert active_rest_lengths([t2], [lc], law, [1.0])[0] == pytest.approx(l0, rel=1e-12)


@pytest.fixture(scope="module")
def tbar():
    return generate("tbar")


def _problem(model, fx, target=None, reference=None):
    c = fx["control"]
    coords = [3 * i + 1 for i in c["nodes"]]
    target = np.full(len(coords), c["target"]) if target is None else target
    return ControlProblem(coords, target, c["psi"], c["phi"], c["active"], reference=reference)


def test_stationary_target_reproduces_equilibrium(tbar):
    model, _, fx = tbar
    st0 = model.initial_state()
    act = fx["control"]["active"]
    prob = _problem(model, fx, target=st0.n[[1, 7]], reference=fx["prestress"][act])
    r = control_step(model, st0, prob)
    assert r.residual < 1e-9
    assert np.allclose(r.t_c_act, fx["prestress"][act], rtol=1e-6)
    assert np.allclose(r.l_0c_act, model.rest_length[act], rtol=1e-9)


def test_regulation_at_target(tbar):
    model, _, fx = tbar
    st0 = model.initial_state()
    act = fx["control"]["active"]
    prob = _problem(model, fx, target=st0.n[[1, 7]], reference=fx["prestress"][act])
    hist = closed_loop_sim(model, st0, prob, 0.05, 1e-4, stride=50)
    assert np.max(np.abs(hist.n - st0.n)) < 1e-6


@pytest.mark.slow
def test_tbar_tracking_envelope(tbar):
    model, _, fx = tbar
    prob = _problem(model, fx)
    hist = closed_loop_sim(model, model.initial_state(), prob, 1.0, 1e-4, stride=20)
    e = np.linalg.norm(hist.extra["e"], axis=1)
    w = np.sqrt(fx["control"]["phi"])
    t = hist.extra["t"]
    bound = (1 + w * t) * np.exp(-w * t) * e[0] * 1.05
    assert np.all(e <= bound + 1e-9)
    assert hist.t_c[:, model.is_string].min() >= 0
    y = hist.n[:, 7]
    assert np.all(np.diff(y) >= -1e-9)


def test_problem_validation(tbar):
    model, _, fx = tbar
    with pytest.raises(ValueError):
        ControlProblem([1], [0.4], -1.0, 50.0, [2])
    with pytest.raises(ValueError):
        ControlProblem([1], [0.4], 1.0, 50.0, [2, 3], reference=[1.0])
    with pytest.raises(ValueError):
        control_step(model, model.initial_state(), ControlProblem([2], [0.0], 1.0, 1.0, [2]))


def test_target_ramp():
    tr = TargetTrajectory(np.array([1.0]), start=np.array([0.0]), ramp_time=2.0)
    p, v, a = tr(1.0)
    assert p[0] == 0.5 and v[0] == 0.5 and a[0] == 0.0
    assert tr(3.0)[0][0] == 1.0


@pytest.mark.xfail(raises=(DivergenceError, NNLSError, np.linalg.LinAlgError), strict=True,
                   reason="tower closed loop unstable with the reconstructed geometry "
                          "(middle level and bar axial dynamics grow); see notes")
def test_tower_fold_control():
    model, _, fx = generate("tower2")
    c = fx["control"]
    coords = [3 * i + 2 for i in c["nodes"]]
    prob = ControlProblem(coords, np.full(4, c["target"]), c["psi"], c["phi"], c["active"])
    hist = closed_loop_sim(model, model.initial_state(), prob, c["t_end"], 1e-4, stride=100)
    z = hist.n[:, coords]
    assert np.all(np.diff(z, axis=0) <= 1e-9)
    assert np.max(np.abs(z[-1] - c["target"])) < 1e-3
