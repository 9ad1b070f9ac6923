"""Shape control by force allocation over active members.

Target coordinates follow the error dynamics ``e'' + psi e' + phi e = 0``.
Each step the required target accelerations are turned into active member
forces by a sign-constrained least-squares problem (strings cannot push), and
the forces are realized by setting the active rest lengths.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .assembly import equilibrium_matrices, gravity_vector
from .dynamics import TimeHistory, _Plant, integrate
from .materials import member_forces, rest_length_for_force
from .model import StructureModel, StructureState, member_geometry
from .schedule import ActuationSchedule


class NNLSError(RuntimeError):
    pass


# -- nonnegative least squares -------------------------------------------

def nnls(G, y, tol: float | None = None, max_iter: int | None = None):
    """Lawson-Hanson active-set solution of ``min |G x - y|`` subject to ``x >= 0``.

    Returns ``(x, residual_norm)``.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    m, n = G.shape
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(y))):
        raise ValueError("nnls inputs must be finite")
    x = np.zeros(n)
    gs = np.max(np.abs(G), initial=0.0)
    ys = float(np.linalg.norm(y))
    if n == 0 or gs == 0.0 or ys == 0.0:
        return x, ys
    # solve at unit scale (x scales as |y| / max|G|)
    x1 = _nnls_unit(G / gs, y / ys, None if tol is None else tol / (gs * ys), max_iter)
    x = x1 * (ys / gs)
    return x, float(np.linalg.norm(G @ x - y))


def _nnls_unit(G, y, tol, max_iter):
    m, n = G.shape
    x = np.zeros(n)
    w = G.T @ y
    if tol is None:
        # floor at rounding level so near-zero gradients never enter
        tol = max(1e-12 * np.max(np.abs(w)), np.finfo(float).eps * m)
    max_iter = 3 * n + 30 if max_iter is None else max_iter
    P = np.zeros(n, dtype=bool)
    blocked = np.zeros(n, dtype=bool)
    it = 0
    while True:
        free = ~P & ~blocked
        if not free.any() or np.max(np.where(free, w, -np.inf)) <= tol:
            break
        j = int(np.argmax(np.where(free, w, -np.inf)))
        P[j] = True
        first = True
        while True:
            it += 1
            if it > max_iter:
                raise NNLSError("iteration limit exceeded")
            z = np.zeros(n)
            z[P] = np.linalg.lstsq(G[:, P], y, rcond=None)[0]
            if first and z[j] <= 0:
                # rounding-level gradient: entering j cannot help, skip it
                P[j] = False
                blocked[j] = True
                break
            first = False
            if np.all(z[P] > 0):
                blocked[:] = False
                x = z
                break
            neg = P & (z <= 0)
            denom = x[neg] - z[neg]
            alpha = np.min(np.divide(x[neg], denom, out=np.zeros_like(denom), where=denom > 0))
            x = x + alpha * (z - x)
            P &= x > 1e-15 * max(np.max(np.abs(x)), 1.0)
            x[~P] = 0.0
            if not P.any():
                break
        w = G.T @ (y - G @ x)
    return x


def _ldp(E, f):
    """Least-distance program ``min |x|`` subject to ``E x >= f`` (via NNLS)."""
    m, n = E.shape
    Emat = np.vstack([E.T, f[None, :]])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    u, _ = nnls(Emat, rhs)
    r = Emat @ u - rhs
    if abs(r[-1]) < 1e-14:
        return None
    return -r[:n] / r[-1]


def nnls_min_norm(G, y, tol: float | None = None, x_ref=None):
    """NNLS returning the minimizer closest to `x_ref` when G lacks column rank.

    Without `x_ref` this is the minimum-norm minimizer.
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    x, res = nnls(G, y, tol)
    n = G.shape[1]
    if n == 0:
        return x, res
    s = np.linalg.svd(G, compute_uv=False)
    rank = int(np.sum(s > 1e-10 * max(s[0], 1e-300))) if s.size else 0
    if rank >= n:
        return x, res
    r0 = np.zeros(n) if x_ref is None else np.maximum(np.asarray(x_ref, dtype=float), 0.0)
    # substitute z = x - r0: min |z| s.t. G z = G x - G r0, z >= -r0
    b = G @ x - G @ r0
    E = np.vstack([G, -G, np.eye(n)])
    scale = max(np.max(np.abs(G @ x)), 1e-300)
    slack = 1e-12 * scale
    f = np.concatenate([b - slack, -b - slack, -r0])
    z = _ldp(E, f)
    if z is None:
        return x, res
    xm = np.maximum(z + r0, 0.0)
    rm = float(np.linalg.norm(G @ xm - y))
    if rm <= res + 1e-9 * max(np.linalg.norm(y), 1.0) and \
            np.linalg.norm(xm - r0) <= np.linalg.norm(x - r0):
        return xm, rm
    return x, res


def nnls_enumerate(G, y):
    """Reference solution by enumerating every passive set (small problems)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    y = np.asarray(y, dtype=float)
    n = G.shape[1]
    best, best_r = np.zeros(n), float(np.linalg.norm(y))
    for k in range(1, n + 1):
        for P in itertools.combinations(range(n), k):
            P = list(P)
            z = np.linalg.lstsq(G[:, P], y, rcond=None)[0]
            if np.all(z >= 0):
                x = np.zeros(n)
                x[P] = z
                r = float(np.linalg.norm(G @ x - y))
                if r < best_r - 1e-15:
                    best, best_r = x, r
    return best, best_r


def kkt_violation(G, y, x):
    """Largest violation of the NNLS optimality conditions (scaled)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    grad = G.T @ (G @ x - np.asarray(y, dtype=float))
    v = np.where(x > 0, np.abs(grad), np.maximum(-grad, 0.0))
    return float(np.max(v, initial=0.0)), float(np.min(x, initial=0.0))


# -- control law ------------------------------------------------------------

@dataclass(frozen=True)
class TargetTrajectory:
    """Desired target positions; constant unless `velocity` is given.

    With `ramp_time` the target moves linearly from `start` to `position`.
    """

    position: np.ndarray
    start: np.ndarray | None = None
    ramp_time: float = 0.0

    def __call__(self, t):
        p = np.asarray(self.position, dtype=float)
        z = np.zeros_like(p)
        if self.start is None or self.ramp_time <= 0 or t >= self.ramp_time:
            return p, z, z
        s0 = np.asarray(self.start, dtype=float)
        w = max(t, 0.0) / self.ramp_time
        return s0 + w * (p - s0), (p - s0) / self.ramp_time, z


@dataclass(frozen=True, eq=False)
class ControlProblem:
    """Targets, gains and the active/passive member partition.

    Parameters
    ----------
    coords : sequence of int
        Full coordinate indices of the targets (must be free coordinates).
    target : TargetTrajectory or array
    psi, phi : float or square arrays
        Error-dynamics gains (1/s and 1/s^2).
    active : sequence of int
        Clustered elements used as actuators; the rest are passive.
    reference : array, optional
        Active forces (N) that break ties when the allocation has many
        minimizers: the one closest to `reference` is taken.  ``None`` picks
        the minimum-norm minimizer.
    """

    coords: np.ndarray
    target: object
    psi: object
    phi: object
    active: np.ndarray
    reference: np.ndarray | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=int).ravel()
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "active", np.asarray(self.active, dtype=int).ravel())
        if self.reference is not None:
            ref = np.asarray(self.reference, dtype=float).ravel()
            if ref.shape != self.active.shape:
                raise ValueError("reference needs one force per active element")
            object.__setattr__(self, "reference", ref)
        if not callable(self.target):
            object.__setattr__(self, "target", TargetTrajectory(np.asarray(self.target, dtype=float)))
        k = len(coords)
        for name in ("psi", "phi"):
            g = np.asarray(getattr(self, name), dtype=float)
            g = g * np.eye(k) if g.ndim == 0 else g.reshape(k, k)
            if np.any(np.linalg.eigvalsh(0.5 * (g + g.T)) <= 0):
                raise ValueError(f"gain {name} must be positive definite")
            object.__setattr__(self, name, g)

    def passive(self, n_ec):
        mask = np.ones(n_ec, dtype=bool)
        mask[self.active] = False
        return np.flatnonzero(mask)


@dataclass(frozen=True, eq=False)
class ControlStepResult:
    """Allocation at one instant.

    ``l_0c_rate`` is the rest-length rate that keeps the active member strains
    (hence forces) constant at the current lengthening rates.
    """

    t_c_act: np.ndarray
    l_0c_act: np.ndarray
    l_0c_rate: np.ndarray
    residual: float
    e: np.ndarray
    e_dot: np.ndarray
    mu: np.ndarray
    kkt: float = 0.0

    @property
    def flagged(self) -> bool:
        """True when the allocation could not meet the demanded accelerations."""
        return self.residual > 1e-6 * max(1.0, float(np.linalg.norm(self.mu)))


def active_rest_lengths(t_c_act, l_c_act, materials, area):
    """Rest lengths realizing forces `t_c_act` at clustered lengths `l_c_act`."""
    return np.array([rest_length_for_force(mat, a, lc, t)
                     for t, lc, mat, a in zip(t_c_act, l_c_act, materials, area)])


def _allocate(G, y, is_string, ref=None):
    """Sign-constrained least squares: strings >= 0, bars unconstrained."""
    bars = np.flatnonzero(~is_string)
    Gs = np.hstack([G, -G[:, bars]])
    zref = None
    if ref is not None:
        zref = np.concatenate([np.maximum(ref, 0.0), np.maximum(-ref[bars], 0.0)])
    z, res = nnls_min_norm(Gs, y, x_ref=zref)
    x = z[:G.shape[1]].copy()
    x[bars] -= z[G.shape[1]:]
    return x, res, Gs, z


def control_step(model: StructureModel, state: StructureState, problem: ControlProblem,
                 t: float = 0.0, f_ex=None, plant: _Plant | None = None) -> ControlStepResult:
    """Active forces and rest lengths for the current state."""
    plant = _Plant(model) if plant is None else plant
    free = model.free
    pos = np.searchsorted(free, problem.coords)
    if np.any(pos >= len(free)) or np.any(free[np.minimum(pos, len(free) - 1)] != problem.coords):
        raise ValueError("control targets must be free coordinates")
    n, v = state.n, state.v
    H, l = member_geometry(n, model.members)
    l_c = np.bincount(model.cluster_of, weights=l, minlength=model.n_ec)
    fv = member_forces(model, l, l_c, state.l_0c, state.material)
    A_2c, _ = equilibrium_matrices(model, H, l, l_c)
    M, m = plant.mass(n, state.l_0c)
    chol = cho_factor(M[np.ix_(free, free)], check_finite=False)
    rhs = gravity_vector(model, m)
    if f_ex is not None:
        rhs = rhs + f_ex
    if plant.damped:
        rhs = rhs - A_2c @ (plant.d * (A_2c.T @ v))
    xa = cho_solve(chol, rhs[free], check_finite=False)[pos]
    Gam = cho_solve(chol, A_2c[free], check_finite=False)[pos]
    nbar, vbar, abar = problem.target(t)
    e = n[problem.coords] - nbar
    ed = v[problem.coords] - vbar
    mu = xa - abar + problem.psi @ ed + problem.phi @ e
    act = problem.active
    pas = problem.passive(model.n_ec)
    y = mu - Gam[:, pas] @ fv.t_c[pas]
    t_act, res, Gs, z = _allocate(Gam[:, act], y, model.is_string[act], problem.reference)
    kkt, _ = kkt_violation(Gs, y, z)
    mats = [model.materials[i] for i in act]
    l0 = active_rest_lengths(t_act, l_c[act], mats, model.area[act])
    rate = (A_2c[:, act].T @ v) * l0 / l_c[act]
    return ControlStepResult(t_act, l0, rate, res, e, ed, mu, kkt)


def closed_loop_sim(model: StructureModel, state0: StructureState, problem: ControlProblem,
                    t_end: float, dt: float, stride: int = 1, f_ex=None,
                    check_step: bool = False, rate_feedforward: bool = True) -> TimeHistory:
    """Simulate with the allocation re-solved before every integration step.

    Active rest lengths are set from the allocated forces at the start of each
    step.  With `rate_feedforward` they also change over the step at the rate
    that holds the active strains fixed, so stiff strings keep the allocated
    force while they lengthen or shorten.

    The returned history carries per-sample logs in ``extra``: ``e``,
    ``t_c_act``, ``l_0c_act`` and ``residual``.
    """
    logs = {"e": [], "t_c_act": [], "l_0c_act": [], "residual": [], "t": []}
    plant = _Plant(model)
    nsteps = int(round(t_end / dt))
    counter = {"k": 0}

    def on_step(t, state):
        r = control_step(model, state, problem, t, f_ex, plant)
        if counter["k"] % stride == 0:
            logs["t"].append(t)
            logs["e"].append(r.e)
            logs["t_c_act"].append(r.t_c_act)
            logs["l_0c_act"].append(r.l_0c_act)
            logs["residual"].append(r.residual)
        counter["k"] += 1
        l0 = state.l_0c.copy()
        l0[problem.active] = r.l_0c_act
        if not rate_feedforward:
            return l0
        rate = np.zeros_like(l0)
        rate[problem.active] = r.l_0c_rate
        return (l0, rate)

    sched = None
    if f_ex is not None:
        sched = ActuationSchedule.constant(state0.l_0c, f_ex)
    hist = integrate(model, state0, sched, nsteps * dt, dt, stride=stride,
                     check_step=check_step, on_step=on_step)
    if len(logs["t"]) < len(hist.t):
        # allocation at the last recorded state, so logs align with samples
        r = control_step(model, hist.final_state, problem, hist.t[-1], f_ex, plant)
        for k, v in (("t", hist.t[-1]), ("e", r.e), ("t_c_act", r.t_c_act),
                     ("l_0c_act", r.l_0c_act), ("residual", r.residual)):
            logs[k].append(v)
    hist.extra.update({k: np.asarray(v) for k, v in logs.items()})
    return hist
