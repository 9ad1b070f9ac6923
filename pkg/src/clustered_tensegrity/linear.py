"""Linearized dynamics about an equilibrium and constrained modal analysis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import AssemblySet, assemble
from .model import StructureModel, StructureState

RIGID_TOL = 1e-5


def _assembly(model, equilibrium, tangent):
    if isinstance(equilibrium, AssemblySet):
        return equilibrium
    state = getattr(equilibrium, "state", equilibrium)
    if state is None:
        state = model.initial_state()
    return assemble(model, state, tangent=tangent)


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Small-motion model ``M dn_a'' + D dn_a' + K_T dn_a = B_f df + B_l dl_0c + ...``.

    Attributes
    ----------
    A : (2 n_a, 2 n_a) state matrix for ``[dn_a, dn_a']``
    B : (2 n_a, 3 n_n + n_ec) input matrix for ``[df_ex, dl_0c]``
    B_b : (2 n_a, 3 n_b) feedthrough for ``[dn_b'', dn_b', dn_b]``
    """

    M_aa: np.ndarray
    D_aa: np.ndarray
    K_Taa: np.ndarray
    M_ab: np.ndarray
    D_ab: np.ndarray
    K_Tab: np.ndarray
    force_map: np.ndarray
    rest_length_map: np.ndarray
    A: np.ndarray
    B: np.ndarray
    B_b: np.ndarray

    @property
    def n_a(self) -> int:
        return self.M_aa.shape[0]


def linearize(model: StructureModel, equilibrium=None, tangent: str = "standard") -> LinearModel:
    """State-space realization about `equilibrium`.

    `equilibrium` may be an EquilibriumSolution, a StructureState or an
    AssemblySet; the reference configuration is used when omitted.
    """
    asm = _assembly(model, equilibrium, tangent)
    free = model.free
    na = len(free)
    try:
        Minv = np.linalg.inv(np.linalg.cholesky(asm.M_aa))
    except np.linalg.LinAlgError as exc:
        raise ValueError("free-coordinate mass matrix is not positive definite") from exc
    Minv = Minv.T @ Minv
    Ea_T = np.zeros((na, 3 * model.n_n))
    Ea_T[np.arange(na), free] = 1.0
    K_l0a = asm.K_l0c[free]
    A = np.zeros((2 * na, 2 * na))
    A[:na, na:] = np.eye(na)
    A[na:, :na] = -Minv @ asm.K_Taa
    A[na:, na:] = -Minv @ asm.D_aa
    B = np.zeros((2 * na, 3 * model.n_n + model.n_ec))
    B[na:, :3 * model.n_n] = Minv @ Ea_T
    B[na:, 3 * model.n_n:] = -Minv @ K_l0a
    B_b = np.zeros((2 * na, 3 * model.n_b))
    B_b[na:] = -Minv @ np.hstack([asm.M_ab, asm.D_ab, asm.K_Tab])
    return LinearModel(asm.M_aa, asm.D_aa, asm.K_Taa, asm.M_ab, asm.D_ab, asm.K_Tab,
                       Ea_T, -K_l0a, A, B, B_b)


@dataclass(frozen=True, eq=False)
class ModalResult:
    """Undamped modes of the free coordinates.

    ``omega`` is signed: a negative value marks an unstable direction
    (negative eigenvalue of the tangent stiffness).  Mode shapes are the
    columns of ``shapes`` and are mass-orthonormal.
    """

    omega: np.ndarray
    shapes: np.ndarray
    rigid: np.ndarray

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.omega / (2 * np.pi)

    @property
    def n_rigid(self) -> int:
        return int(self.rigid.sum())

    @property
    def n_unstable(self) -> int:
        return int(np.sum((self.omega < 0) & ~self.rigid))


def generalized_eigh(K, M):
    """Solve ``K phi = lam M phi`` via Cholesky reduction.

    Returns ascending eigenvalues and M-orthonormal eigenvectors.
    """
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ValueError("mass matrix is not positive definite") from exc
    Kt = np.linalg.solve(L, np.linalg.solve(L, K).T).T
    lam, Q = np.linalg.eigh(0.5 * (Kt + Kt.T))
    return lam, np.linalg.solve(L.T, Q)


def modal(model: StructureModel, equilibrium=None, rigid_tol: float = RIGID_TOL,
          tangent: str = "standard") -> ModalResult:
    """Natural frequencies and mode shapes about `equilibrium`."""
    asm = _assembly(model, equilibrium, tangent)
    lam, phi = generalized_eigh(asm.K_Taa, asm.M_aa)
    omega = np.sign(lam) * np.sqrt(np.abs(lam))
    wmax = np.max(np.abs(omega)) if omega.size else 0.0
    rigid = np.abs(omega) < rigid_tol * wmax
    omega = np.where(rigid, np.abs(omega), omega)
    return ModalResult(omega, phi, rigid)
