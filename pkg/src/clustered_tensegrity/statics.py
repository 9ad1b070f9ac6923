"""Prestress modes, static equilibrium and quasi-static actuation paths."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .assembly import AssemblySet, assemble, equilibrium_matrices, gravity_vector
from .materials import member_forces, redistribute_segment_rest_lengths, rest_length_for_force
from .model import StructureModel, StructureState, member_geometry
from .schedule import ActuationSchedule

RANK_TOL = 1e-10


class SolverError(RuntimeError):
    """Base class of static solver failures."""


class InfeasiblePrestressError(SolverError):
    pass


class MechanismError(SolverError):
    """Load has a component along a zero-stiffness direction."""

    def __init__(self, msg, nullspace=None):
        super().__init__(msg)
        self.nullspace = nullspace


class ConvergenceError(SolverError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


@dataclass(frozen=True, eq=False)
class PrestressBasis:
    """Orthonormal basis of self-stress force densities.

    ``basis`` (n_ec x k) spans the null space of ``E_a^T A_1c``; ``l_c`` are
    the clustered lengths it was computed at, so ``l_c * basis`` spans the
    self-equilibrated member forces.
    """

    basis: np.ndarray
    l_c: np.ndarray
    singular_values: np.ndarray

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def force_basis(self):
        return self.basis * self.l_c[:, None]


def _null_space(A, tol=RANK_TOL):
    """Null space via SVD with threshold ``tol * sigma_max``."""
    ncol = A.shape[1]
    if A.shape[0] == 0 or not np.any(A):
        return np.eye(ncol), np.zeros(0)
    _, s, Vt = np.linalg.svd(A)
    rank = int(np.sum(s > tol * s[0]))
    return Vt[rank:].T.copy(), s


def prestress_modes(model: StructureModel, state: StructureState | None = None) -> PrestressBasis:
    """Self-stress modes of the structure at `state` (reference by default)."""
    n = model.reference if state is None else state.n
    H, l = member_geometry(n, model.members)
    l_c = np.bincount(model.cluster_of, weights=l, minlength=model.n_ec)
    _, A_1c = equilibrium_matrices(model, H, l, l_c)
    basis, s = _null_space(A_1c[model.free])
    return PrestressBasis(basis, l_c, s)


def design_prestress(basis: PrestressBasis, anchors: Sequence[tuple[int, float]],
                     strings: np.ndarray | None = None, tol: float = 1e-9):
    """Member forces in the span of `basis` matching the anchored values.

    Parameters
    ----------
    anchors : list of (clustered element id, force)
        One anchor per prestress mode; forces in N (compression negative).
    strings : bool mask, optional
        Elements that must end up in tension.
    """
    if len(anchors) != basis.k:
        raise ValueError(f"need {basis.k} anchors, got {len(anchors)}")
    ids = np.array([int(a[0]) for a in anchors], dtype=int)
    vals = np.array([float(a[1]) for a in anchors])
    F = basis.force_basis
    sub = F[ids]
    s = np.linalg.svd(sub, compute_uv=False) if sub.size else np.zeros(0)
    if sub.size and (s[-1] <= RANK_TOL * max(s[0], 1e-300)):
        raise InfeasiblePrestressError("anchored members do not determine the prestress (singular subsystem)")
    coef = np.linalg.solve(sub, vals) if sub.size else np.zeros(0)
    t_c = F @ coef
    t_c[ids] = vals
    if strings is not None:
        scale = max(np.max(np.abs(t_c)), 1e-300)
        bad = np.flatnonzero(np.asarray(strings) & (t_c < -tol * scale))
        if len(bad):
            raise InfeasiblePrestressError(
                "negative string force in element(s) " + ", ".join(str(i + 1) for i in bad))
    return t_c


def prestressed_model(model: StructureModel, t_c, n=None) -> StructureModel:
    """Model whose rest lengths produce forces `t_c` in configuration `n`."""
    n = model.reference if n is None else n
    _, l = member_geometry(n, model.members)
    l_c = np.bincount(model.cluster_of, weights=l, minlength=model.n_ec)
    l0 = np.array([rest_length_for_force(model.materials[i], model.area[i], l_c[i], t_c[i])
                   for i in range(model.n_ec)])
    return model.with_(rest_length=l0)


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    n: np.ndarray
    t_c: np.ndarray
    residual: float
    iterations: int
    state: StructureState
    assembly: AssemblySet

    @property
    def n_a(self):
        return self.n[self.assembly.model.free]


def _residual(model, n, l_0c, material, f_ex):
    H, l = member_geometry(n, model.members)
    l_c = np.bincount(model.cluster_of, weights=l, minlength=model.n_ec)
    fv = member_forces(model, l, l_c, l_0c, material)
    # internal force A_2c t_c scattered directly
    u = (H / l).T * fv.t[:, None]
    fint = np.zeros((model.n_n, 3))
    np.add.at(fint, model.tail, -u)
    np.add.at(fint, model.head, u)
    _, m = redistribute_segment_rest_lengths(model, l, l_0c, l_c)
    f = gravity_vector(model, m) - fint.ravel()
    if f_ex is not None:
        f = f + f_ex
    return f[model.free]


def weighted_pinv_solve(K, M, r, rank_tol=RANK_TOL, null_tol=1e-6):
    """Mass-weighted minimum-norm solution of ``K d = r``.

    Returns ``(d, null_basis)``.  Raises :class:`MechanismError` when `r` has
    a significant component along the zero-stiffness directions.
    """
    L = np.linalg.cholesky(M)
    Kt = np.linalg.solve(L, np.linalg.solve(L, K).T).T
    Kt = 0.5 * (Kt + Kt.T)
    lam, Q = np.linalg.eigh(Kt)
    y = np.linalg.solve(L, r)
    big = np.abs(lam) > rank_tol * max(np.max(np.abs(lam)), 1e-300)
    c = Q.T @ y
    null = ~big
    if np.any(null):
        cn = np.linalg.norm(c[null])
        if cn > null_tol * max(np.linalg.norm(y), 1e-300) and cn > 1e-12:
            nb = np.linalg.solve(L.T, Q[:, null])
            raise MechanismError(
                f"load acts along {int(null.sum())} zero-stiffness direction(s)", nb)
    z = Q[:, big] @ (c[big] / lam[big])
    return np.linalg.solve(L.T, z), np.linalg.solve(L.T, Q[:, null])


def _energy_line_search(evaluate, d, r0, r1, max_evals):
    """Step length where the work of the residual along `d` has dropped.

    With stiff bars a step along a soft direction raises the residual norm
    through the second-order change of bar lengths, although the energy still
    falls.  Following the sign of ``d . r`` (the slope of the potential along
    the step) lets such steps through.  Returns ``(trial, r, |r|)`` or None.
    """
    s0 = float(d @ r0)
    if not s0 > 0:
        return None
    s1 = float(d @ r1)
    if s1 >= 0:
        # potential still falling at the full step
        return evaluate(1.0)
    # Illinois variant of regula falsi on the slope
    a0, sa0, a1, sa1 = 0.0, s0, 1.0, s1
    side = 0
    for _ in range(max_evals):
        a = a1 - sa1 * (a1 - a0) / (sa1 - sa0)
        trial, rt, rtn = evaluate(a)
        if rt is None:
            return None
        sa = float(d @ rt)
        if abs(sa) <= 0.5 * s0:
            return trial, rt, rtn
        if sa > 0:
            a0, sa0 = a, sa
            if side == 1:
                sa1 *= 0.5
            side = 1
        else:
            a1, sa1 = a, sa
            if side == -1:
                sa0 *= 0.5
            side = -1
    return None


def solve_equilibrium(model: StructureModel, state0: StructureState, f_ex=None, n_b=None,
                      tol: float | None = None, max_iter: int = 100,
                      max_halvings: int = 30) -> EquilibriumSolution:
    """Newton iteration with line search.

    Steps are mass-weighted minimum-norm solutions of ``K_Taa dn_a = r``, so
    for structures with rigid-body freedom the step carries no rigid motion
    (the centre of mass stays put).  A full step is taken when it lowers the
    residual norm; otherwise an energy line search along the step is tried,
    and failing that the step is halved until the residual norm drops.
    Material history in `state0` is the starting point of every trial
    evaluation and the converged states are committed in the returned
    solution.

    When no step length lowers the residual and the residual is already at
    the rounding floor of the stiffest members (``16 eps |K_Taa|_inf max|n|``),
    the iterate is accepted; with stiff bars this floor can sit slightly above
    the default tolerance.
    """
    f_norm = 0.0 if f_ex is None else float(np.linalg.norm(f_ex))
    tol = 1e-8 * max(1.0, f_norm) if tol is None else tol
    free = model.free
    n = state0.n.copy()
    if n_b is not None:
        n[model.fixed] = n_b
    l_0c, mat = state0.l_0c, state0.material
    r = _residual(model, n, l_0c, mat, f_ex)
    rn = float(np.linalg.norm(r))
    it = 0
    while rn > tol:
        if it >= max_iter:
            raise ConvergenceError(f"no convergence after {max_iter} iterations (residual {rn:.3e})",
                                   best=n)
        asm = assemble(model, StructureState(n, l_0c, None, mat), tangent="consistent")
        d, _ = weighted_pinv_solve(asm.K_Taa, asm.M_aa, r)

        def evaluate(alpha):
            trial = n.copy()
            trial[free] += alpha * d
            try:
                rt = _residual(model, trial, l_0c, mat, f_ex)
            except ValueError:
                return trial, None, np.inf
            return trial, rt, float(np.linalg.norm(rt))

        trial, rt, rtn = evaluate(1.0)
        floor = 16 * np.finfo(float).eps * np.max(np.sum(np.abs(asm.K_Taa), axis=1)) \
            * max(1.0, float(np.max(np.abs(n))))
        if rtn >= rn and rt is not None and rn > floor:
            found = _energy_line_search(evaluate, d, r, rt, max_halvings)
            if found is not None:
                trial, rt, rtn = found
                n, r, rn = trial, rt, rtn
                it += 1
                continue
        alpha = 1.0
        for _ in range(max_halvings):
            if rtn < rn:
                break
            alpha *= 0.5
            trial, rt, rtn = evaluate(alpha)
        if rtn >= rn:
            if rn <= floor:
                break
            raise ConvergenceError(f"line search failed at iteration {it} (residual {rn:.3e})", best=n)
        n, r, rn = trial, rt, rtn
        it += 1
    # commit material history and re-check the slack set at the solution
    H, l = member_geometry(n, model.members)
    l_c = np.bincount(model.cluster_of, weights=l, minlength=model.n_ec)
    fv = member_forces(model, l, l_c, l_0c, mat)
    state = StructureState(n, l_0c, None, fv.states)
    asm = assemble(model, state)
    return EquilibriumSolution(n=n, t_c=asm.t_c, residual=rn, iterations=it, state=state, assembly=asm)


def fixed_position(model: StructureModel, coords):
    """Positions of coordinate indices within the constrained set."""
    where = {int(c): i for i, c in enumerate(model.fixed)}
    return np.array([where[int(c)] for c in coords], dtype=int)


def quasi_static_path(model: StructureModel, schedule: ActuationSchedule, substeps: int,
                      state0: StructureState | None = None, **kw) -> list:
    """Sequence of equilibria with the actuation divided into equal substeps.

    Substep k applies the schedule at ``t0 + k (t1 - t0) / substeps`` and is
    warm-started from substep k - 1, shifted by the displacement of the
    previous substep (a secant predictor; dropped if that start fails).  The
    returned list starts with the equilibrium at substep 0.
    """
    state = model.initial_state() if state0 is None else state0
    t0, t1 = schedule.t_start, schedule.t_final
    motion = schedule.motion or model.motion
    out = []
    for k in range(substeps + 1):
        t = t0 + (t1 - t0) * k / substeps
        state = state.with_(l_0c=schedule.l_0c(t))
        f = schedule.f_ex(t)
        n_b = None
        if motion is not None:
            n_b = state.n[model.fixed].copy()
            pos, _, _ = motion(t)
            n_b[fixed_position(model, motion.coords)] = pos
        sol = None
        if len(out) >= 2:
            guess = state.with_(n=2 * out[-1].n - out[-2].n)
            try:
                sol = solve_equilibrium(model, guess, f, n_b, **kw)
            except (SolverError, np.linalg.LinAlgError):
                sol = None
        if sol is None:
            try:
                sol = solve_equilibrium(model, state, f, n_b, **kw)
            except SolverError as exc:
                raise type(exc)(f"substep {k}: {exc}") from exc
        out.append(sol)
        state = sol.state
    return out
