"""Nonlinear time integration of the reduced equations of motion.

The free coordinates obey

    M_aa a_a = E_a^T (f_ex + g - M E_b a_b - zeta D v - A_2c t_c)

with ``g`` the nodal weights.  Integration is classical fourth-order
Runge-Kutta with a fixed step.  Segment masses along clustered strings are
redistributed once per step (the mass matrix is frozen within a step), while
member forces, slack strings and scheduled rest lengths are evaluated at every
stage.  Plastic history is committed at the end of each step.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .assembly import gravity_vector, mass_matrix
from .materials import LINEAR, member_forces, redistribute_segment_rest_lengths, strain_energy
from .model import StructureModel, StructureState, member_geometry
from .schedule import ActuationSchedule


class DivergenceError(RuntimeError):
    """Non-finite state during integration; carries the last valid state."""

    def __init__(self, msg, t=None, state=None):
        super().__init__(msg)
        self.t = t
        self.state = state


class StepSizeWarning(RuntimeWarning):
    pass


@dataclass
class TimeHistory:
    """Sampled trajectory.

    Arrays are indexed by sample along the first axis.  ``energy`` columns are
    kinetic, strain and gravitational energy (J).
    """

    t: np.ndarray
    n: np.ndarray
    v: np.ndarray
    t_c: np.ndarray
    l_0c: np.ndarray
    energy: np.ndarray
    final_state: StructureState | None = None
    extra: dict = field(default_factory=dict)

    def coordinate(self, node: int, axis) -> np.ndarray:
        if isinstance(axis, str):
            axis = "xyz".index(axis)
        return self.n[:, 3 * node + axis]

    @property
    def total_energy(self) -> np.ndarray:
        return self.energy.sum(axis=1)

    def __len__(self):
        return len(self.t)


class _Plant:
    """Cached topology and per-stage force evaluation for one model."""

    def __init__(self, model: StructureModel, schedule: ActuationSchedule | None = None):
        self.model = model
        self.free = model.free
        self.fixed = model.fixed
        self.ndof = 3 * model.n_n
        self.cof = model.cluster_of
        self.n_ec = model.n_ec
        idx = np.arange(3)
        self.it = (3 * model.tail[:, None] + idx).ravel()
        self.ih = (3 * model.head[:, None] + idx).ravel()
        self.d = model.zeta * model.damping_coefficients
        self.damped = bool(np.any(self.d))
        self.linear = all(m.kind == LINEAR for m in model.materials)
        self.schedule = schedule
        motion = (schedule.motion if schedule is not None else None) or model.motion
        self.motion = motion
        if motion is not None:
            where = {int(c): i for i, c in enumerate(self.fixed)}
            self.motion_pos = np.array([where[int(c)] for c in motion.coords], dtype=int)

    # boundary ---------------------------------------------------------
    def boundary(self, t, n_b0):
        if self.motion is None:
            return n_b0, None, None
        pos, vel, acc = self.motion(t)
        nb = n_b0.copy()
        vb = np.zeros(len(self.fixed))
        ab = np.zeros(len(self.fixed))
        nb[self.motion_pos] = pos
        vb[self.motion_pos] = vel
        ab[self.motion_pos] = acc
        return nb, vb, ab

    def l_0c(self, t, override=None):
        if override is not None:
            return override
        if self.schedule is None:
            return None
        return self.schedule.l_0c(t)

    def f_ex(self, t):
        if self.schedule is None:
            return None
        return self.schedule.f_ex(t)

    # forces -----------------------------------------------------------
    def internal(self, n, v, l_0c, material):
        """Nodal force ``A_2c t_c + zeta D v`` and the member forces."""
        H, l = member_geometry(n, self.model.members)
        l_c = np.bincount(self.cof, weights=l, minlength=self.n_ec)
        fv = member_forces(self.model, l, l_c, l_0c, material)
        u = H.T / l[:, None]
        w = fv.t.copy()
        if self.damped and v is not None:
            dv = (v[self.ih] - v[self.it]).reshape(-1, 3)
            rate = np.bincount(self.cof, weights=np.einsum("ij,ij->i", u, dv), minlength=self.n_ec)
            w += (self.d * rate)[self.cof]
        uw = (u * w[:, None]).ravel()
        f = np.bincount(self.ih, uw, self.ndof) - np.bincount(self.it, uw, self.ndof)
        return f, fv, l, l_c

    def mass(self, n, l_0c):
        _, l = member_geometry(n, self.model.members)
        l_c = np.bincount(self.cof, weights=l, minlength=self.n_ec)
        _, m = redistribute_segment_rest_lengths(self.model, l, l_0c, l_c)
        return mass_matrix(self.model, m), m


def _energies(plant: _Plant, n, v, l_0c, material, M=None, m=None):
    model = plant.model
    if M is None:
        M, m = plant.mass(n, l_0c)
    _, l = member_geometry(n, model.members)
    l_c = np.bincount(plant.cof, weights=l, minlength=plant.n_ec)
    fv = member_forces(model, l, l_c, l_0c, material)
    Vs = 0.0
    for i in np.flatnonzero(~fv.slack):
        w = strain_energy(model.materials[i], fv.strain[i], material[i])
        Vs += w * model.area[i] * l_0c[i]
    T = 0.5 * v @ M @ v
    Vg = -gravity_vector(model, m) @ n
    return np.array([T, Vs, Vg])


def energy_audit(model: StructureModel, state: StructureState):
    """Kinetic, strain and gravitational energy of `state` (J)."""
    return tuple(_energies(_Plant(model), state.n, state.v, state.l_0c, state.material))


def accelerations(model: StructureModel, state: StructureState, f_ex=None, a_b=None):
    """Free-coordinate accelerations at `state`.

    `a_b` is the acceleration of the constrained coordinates (zero if omitted).
    """
    plant = _Plant(model)
    M, m = plant.mass(state.n, state.l_0c)
    g = gravity_vector(model, m)
    fint, _, _, _ = plant.internal(state.n, state.v, state.l_0c, state.material)
    rhs = g - fint
    if f_ex is not None:
        rhs = rhs + f_ex
    rhs = rhs[plant.free]
    if a_b is not None:
        rhs = rhs - M[np.ix_(plant.free, plant.fixed)] @ a_b
    M_aa = M[np.ix_(plant.free, plant.free)]
    try:
        c = cho_factor(M_aa)
    except np.linalg.LinAlgError as exc:
        raise ValueError("free-coordinate mass matrix is singular") from exc
    return cho_solve(c, rhs)


def max_frequency(model: StructureModel, state: StructureState) -> float:
    """Largest natural frequency (Hz) of the linearized free coordinates."""
    from .assembly import assemble
    asm = assemble(model, state)
    L = np.linalg.cholesky(asm.M_aa)
    Kt = np.linalg.solve(L, np.linalg.solve(L, asm.K_Taa).T)
    lam = np.linalg.eigvalsh(0.5 * (Kt + Kt.T))
    return float(np.sqrt(max(lam[-1], 0.0)) / (2 * np.pi))


class Integrator:
    """Fixed-step RK4 integrator bound to a model and schedule.

    `step` advances one step.  An optional rest-length override replaces the
    scheduled rest lengths for that step; it is either an array (held over the
    step) or a pair ``(l_0c, rate)`` giving a linear change over the step.
    """

    def __init__(self, model: StructureModel, schedule: ActuationSchedule | None, dt: float):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.plant = _Plant(model, schedule)
        self.model = model
        self.dt = float(dt)

    def _rest_lengths(self, t0, state, override):
        p = self.plant
        if override is None:
            if p.schedule is None:
                l0 = state.l_0c
                return lambda t: l0
            return p.schedule.l_0c
        if isinstance(override, tuple):
            l0, rate = override
            return lambda t: l0 + rate * (t - t0)
        return lambda t: override

    def _rhs(self, t, n_a, v_a, n_b0, M_ab, g, chol, l0_at, material):
        p = self.plant
        nb, vb, ab = p.boundary(t, n_b0)
        n = np.empty(p.ndof)
        n[p.free] = n_a
        n[p.fixed] = nb
        v = np.zeros(p.ndof)
        v[p.free] = v_a
        if vb is not None:
            v[p.fixed] = vb
        fint, _, _, _ = p.internal(n, v, l0_at(t), material)
        rhs = g - fint
        f = p.f_ex(t)
        if f is not None:
            rhs = rhs + f
        rhs = rhs[p.free]
        if ab is not None:
            rhs -= M_ab @ ab
        return cho_solve(chol, rhs, check_finite=False)

    def step(self, t, state: StructureState, l0_override=None) -> StructureState:
        p, dt = self.plant, self.dt
        n, v = state.n, state.v
        n_b0 = n[p.fixed].copy()
        l0_at = self._rest_lengths(t, state, l0_override)
        M, m = p.mass(n, l0_at(t))
        g = gravity_vector(self.model, m)
        chol = cho_factor(M[np.ix_(p.free, p.free)], check_finite=False)
        M_ab = M[np.ix_(p.free, p.fixed)] if p.motion is not None else None
        mat = state.material
        na, va = n[p.free], v[p.free]
        args = (n_b0, M_ab, g, chol, l0_at, mat)
        h = 0.5 * dt
        k1x = va
        k1v = self._rhs(t, na, va, *args)
        k2x = va + h * k1v
        k2v = self._rhs(t + h, na + h * k1x, k2x, *args)
        k3x = va + h * k2v
        k3v = self._rhs(t + h, na + h * k2x, k3x, *args)
        k4x = va + dt * k3v
        k4v = self._rhs(t + dt, na + dt * k3x, k4x, *args)
        na_new = na + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        va_new = va + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (np.all(np.isfinite(na_new)) and np.all(np.isfinite(va_new))):
            raise DivergenceError(f"non-finite state at t = {t + dt:.6g} s", t, state)
        t1 = t + dt
        nb, vb, _ = p.boundary(t1, n_b0)
        n_new = np.empty(p.ndof)
        n_new[p.free] = na_new
        n_new[p.fixed] = nb
        v_new = np.zeros(p.ndof)
        v_new[p.free] = va_new
        if vb is not None:
            v_new[p.fixed] = vb
        l0_new = np.array(l0_at(t1), dtype=float)
        if not p.linear:
            _, fv, _, _ = p.internal(n_new, None, l0_new, mat)
            mat = fv.states
        return StructureState(n_new, l0_new, v_new, mat)


def integrate(model: StructureModel, state0: StructureState, schedule: ActuationSchedule | None,
              t_end: float, dt: float, stride: int = 1, t0: float = 0.0,
              check_step: bool = True, on_step=None) -> TimeHistory:
    """Integrate from `state0` at `t0` to `t_end`.

    Parameters
    ----------
    schedule : ActuationSchedule or None
        Rest lengths, external forces and boundary motion over time.  ``None``
        keeps the rest lengths of `state0`.
    stride : int
        Record every `stride`-th step (the initial state is always recorded).
    on_step : callable, optional
        ``on_step(t, state)`` called before every step; a returned rest-length
        override (see :meth:`Integrator.step`) replaces the schedule for that
        step.
    """
    nsteps = int(round((t_end - t0) / dt))
    if nsteps < 0:
        raise ValueError("t_end before start time")
    integ = Integrator(model, schedule, dt)
    plant = integ.plant
    if check_step:
        fmax = max_frequency(model, state0)
        if fmax > 0 and dt > 0.1 / fmax:
            warnings.warn(f"dt = {dt:g} s exceeds 0.1/f_max = {0.1 / fmax:.3g} s", StepSizeWarning, 2)
    state = state0
    if schedule is not None:
        l0 = schedule.l_0c(t0)
        state = state.with_(l_0c=l0)
    nrec = nsteps // stride + 1
    T = np.empty(nrec)
    N = np.empty((nrec, plant.ndof))
    V = np.empty((nrec, plant.ndof))
    TC = np.empty((nrec, model.n_ec))
    L0 = np.empty((nrec, model.n_ec))
    EN = np.empty((nrec, 3))

    def record(j, t, st):
        T[j] = t
        N[j] = st.n
        V[j] = st.v
        _, fv, _, _ = plant.internal(st.n, None, st.l_0c, st.material)
        TC[j] = fv.t_c
        L0[j] = st.l_0c
        EN[j] = _energies(plant, st.n, st.v, st.l_0c, st.material)

    record(0, t0, state)
    j = 1
    for k in range(nsteps):
        t = t0 + k * dt
        override = on_step(t, state) if on_step is not None else None
        try:
            state = integ.step(t, state, override)
        except DivergenceError:
            raise
        except (FloatingPointError, ValueError) as exc:
            raise DivergenceError(f"integration failed at t = {t:.6g} s: {exc}", t, state) from exc
        if (k + 1) % stride == 0:
            record(j, t0 + (k + 1) * dt, state)
            j += 1
    return TimeHistory(T[:j], N[:j], V[:j], TC[:j], L0[:j], EN[:j], final_state=state)
