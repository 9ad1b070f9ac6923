"""Mass, stiffness, damping, gravity and equilibrium matrices.

Everything is dense and assembled by scattering per-member contributions, so
the identity clustering runs through exactly the same arithmetic as a
clustered model.  Coordinates are ordered node by node (x, y, z).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .materials import ForceVectors, member_forces, redistribute_segment_rest_lengths
from .model import StructureModel, StructureState, member_geometry

_SYM_TOL = 1e-12


def _symmetrize(X, name):
    asym = np.max(np.abs(X - X.T)) if X.size else 0.0
    scale = max(np.max(np.abs(X)) if X.size else 0.0, 1e-300)
    if asym > _SYM_TOL * scale * max(1, X.shape[0]):
        raise AssertionError(f"{name} asymmetric beyond rounding ({asym:.3e})")
    return 0.5 * (X + X.T)


def _node_laplacian(model: StructureModel, w):
    """``C^T diag(w) C`` by per-member scatter (n_n x n_n)."""
    L = np.zeros((model.n_n, model.n_n))
    t, h = model.tail, model.head
    np.add.at(L, (t, t), w)
    np.add.at(L, (h, h), w)
    np.add.at(L, (t, h), -w)
    np.add.at(L, (h, t), -w)
    return L


def _expand3(L):
    """``L (x) I3`` without forming the Kronecker product."""
    n = L.shape[0]
    out = np.zeros((n, 3, n, 3))
    for k in range(3):
        out[:, k, :, k] = L
    return out.reshape(3 * n, 3 * n)


def mass_matrix(model: StructureModel, m):
    """Consistent mass matrix from segment masses `m`.

    Every member contributes ``(m/6) [[2, 1], [1, 2]]`` between its two nodes
    in each coordinate direction.
    """
    m = np.asarray(m, dtype=float)
    L = np.zeros((model.n_n, model.n_n))
    t, h = model.tail, model.head
    np.add.at(L, (t, t), m / 3.0)
    np.add.at(L, (h, h), m / 3.0)
    np.add.at(L, (t, h), m / 6.0)
    np.add.at(L, (h, t), m / 6.0)
    return _expand3(L)


def stiffness_matrix(model: StructureModel, l, t_c):
    """``K = (C^T diag(x) C) (x) I3`` with segment force densities x."""
    x = np.asarray(t_c, dtype=float)[model.cluster_of] / np.asarray(l, dtype=float)
    return _expand3(_node_laplacian(model, x))


def equilibrium_matrices(model: StructureModel, H, l, l_c):
    """Equilibrium matrices in force (A_2c) and force-density (A_1c) form.

    ``K n = A_2c t_c = A_1c x_c``.  Column c of A_2c holds ``-u`` at the tail
    and ``+u`` at the head of every segment of clustered element c, with u the
    unit member vector.
    """
    H = np.asarray(H, dtype=float)
    u = (H / np.asarray(l, dtype=float)).T  # (n_e, 3)
    A = np.zeros((3 * model.n_n, model.n_ec))
    cols = np.repeat(model.cluster_of, 3)
    k = np.tile(np.arange(3), model.n_e)
    np.add.at(A, (3 * np.repeat(model.tail, 3) + k, cols), -u.ravel())
    np.add.at(A, (3 * np.repeat(model.head, 3) + k, cols), u.ravel())
    return A, A * np.asarray(l_c, dtype=float)


def compatibility_matrix(model: StructureModel, H, l):
    """``B_lc`` with ``dl_c = B_lc dn``; the transpose of A_2c by construction."""
    A_2c, _ = equilibrium_matrices(model, H, l, np.ones(model.n_ec))
    return A_2c.T


def critical_damping(model: StructureModel):
    """Critical damping coefficients ``(2 sqrt(3)/3) sqrt(rho) A sqrt(E)``."""
    E = model.initial_modulus
    return (2.0 * np.sqrt(3.0) / 3.0) * np.sqrt(model.density) * model.area * np.sqrt(E)


def damping_matrix(A_2c, d_c, zeta=1.0):
    """``D = zeta A_2c diag(d_c) A_2c^T``."""
    A_2c = np.asarray(A_2c, dtype=float)
    D = (A_2c * (zeta * np.asarray(d_c, dtype=float))) @ A_2c.T
    return _symmetrize(D, "D")


def gravity_vector(model: StructureModel, m, gravity=None):
    """Nodal gravitational forces: half of every member's weight at each end.

    `gravity` is the acceleration vector of the field (e.g. ``(0, 0, -9.8)``),
    so the returned vector is the applied weight.
    """
    a = model.gravity if gravity is None else np.asarray(gravity, dtype=float)
    m = np.asarray(m, dtype=float)
    node_mass = 0.5 * (np.bincount(model.tail, m, model.n_n) + np.bincount(model.head, m, model.n_n))
    return np.outer(node_mass, a).ravel()


def geometric_stiffness(model: StructureModel, H, l, t_c):
    """Stiffness of the member forces held fixed while nodes move.

    Per segment the block is ``(t/l)(I - u u^T)``, the exact derivative of
    ``t u`` at constant t.
    """
    l = np.asarray(l, dtype=float)
    t = np.asarray(t_c, dtype=float)[model.cluster_of]
    x = t / l
    K = stiffness_matrix(model, l, t_c)
    u = (np.asarray(H, dtype=float) / l).T
    blocks = x[:, None, None] * u[:, :, None] * u[:, None, :]
    K -= _scatter_blocks(model, blocks)
    return K


def _scatter_blocks(model, blocks):
    """Assemble per-member 3x3 blocks B_m as ``(C_m^T C_m) (x) B_m``."""
    n = model.n_n
    K = np.zeros((n, 3, n, 3))
    t, h = model.tail, model.head
    np.add.at(K, (t, slice(None), t), blocks)
    np.add.at(K, (h, slice(None), h), blocks)
    np.add.at(K, (t, slice(None), h), -blocks)
    np.add.at(K, (h, slice(None), t), -blocks)
    return K.reshape(3 * n, 3 * n)


TANGENT_FORMS = ("standard", "consistent")


def tangent_stiffness(model: StructureModel, H, l, A_2c, forces: ForceVectors, l_0c,
                      form: str = "standard"):
    """Tangent stiffness ``K_T = K_G + K_E``.

    ``K_E = A_2c diag(E_t A / l_0c) A_2c^T`` is the material part.

    form : {"standard", "consistent"}
        ``"standard"`` takes the force-density stiffness K as the geometric
        part, ``K_G = (C^T diag(x) C) (x) I3``.  ``"consistent"`` uses
        ``(t/l)(I - u u^T)`` per segment instead, which makes K_T the exact
        derivative of ``A_2c t_c``.  The two differ by ``(t/l) u u^T`` per
        segment, which matters for pulley-sliding modes whose only stiffness
        is geometric.
    """
    if form not in TANGENT_FORMS:
        raise ValueError(f"unknown tangent form {form!r}")
    w = forces.tangent * model.area / np.asarray(l_0c, dtype=float)
    K_E = _symmetrize((A_2c * w) @ A_2c.T, "K_E")
    if form == "standard":
        K_G = stiffness_matrix(model, l, forces.t_c)
    else:
        K_G = geometric_stiffness(model, H, l, forces.t_c)
    K_G = _symmetrize(K_G, "K_G")
    return K_G + K_E, K_G, K_E


def rest_length_sensitivity(A_1c, forces: ForceVectors, area, l_0c):
    """``K_l0c = -A_1c diag(E_t A / l_0c^2)``: derivative of ``A_2c t_c`` in l_0c."""
    l_0c = np.asarray(l_0c, dtype=float)
    return -A_1c * (forces.tangent * np.asarray(area, dtype=float) / l_0c**2)


@dataclass(frozen=True, eq=False)
class AssemblySet:
    """All structural matrices at one state (immutable)."""

    model: StructureModel
    n: np.ndarray
    H: np.ndarray
    l: np.ndarray
    l_c: np.ndarray
    l_0c: np.ndarray
    l_0: np.ndarray
    m: np.ndarray
    forces: ForceVectors
    M: np.ndarray
    K: np.ndarray
    D: np.ndarray
    g: np.ndarray
    A_2c: np.ndarray
    A_1c: np.ndarray
    K_T: np.ndarray
    K_G: np.ndarray
    K_E: np.ndarray
    K_l0c: np.ndarray

    @property
    def B_lc(self):
        return self.A_2c.T

    @property
    def t_c(self):
        return self.forces.t_c

    def _blk(self, X, r, c):
        return X[np.ix_(r, c)]

    @cached_property
    def M_aa(self):
        return self._blk(self.M, self.model.free, self.model.free)

    @cached_property
    def M_ab(self):
        return self._blk(self.M, self.model.free, self.model.fixed)

    @cached_property
    def D_aa(self):
        return self._blk(self.D, self.model.free, self.model.free)

    @cached_property
    def D_ab(self):
        return self._blk(self.D, self.model.free, self.model.fixed)

    @cached_property
    def K_aa(self):
        return self._blk(self.K, self.model.free, self.model.free)

    @cached_property
    def K_ab(self):
        return self._blk(self.K, self.model.free, self.model.fixed)

    @cached_property
    def K_Taa(self):
        return self._blk(self.K_T, self.model.free, self.model.free)

    @cached_property
    def K_Tab(self):
        return self._blk(self.K_T, self.model.free, self.model.fixed)

    @cached_property
    def internal_force(self):
        """``A_2c t_c`` (equal to ``K n``)."""
        return self.A_2c @ self.forces.t_c

    def residual(self, f_ex=None):
        """Out-of-balance force on free coordinates, ``E_a^T (f + g - A_2c t_c)``."""
        f = self.g - self.internal_force
        if f_ex is not None:
            f = f + f_ex
        return f[self.model.free]


def assemble(model: StructureModel, state: StructureState, tangent: str = "standard",
             zeta: float | None = None) -> AssemblySet:
    """Evaluate the full matrix family at `state`.

    Segment rest lengths and masses are redistributed along clustered strings
    before the mass matrix and gravity are built.  D carries the model's
    global damping scale unless `zeta` is given.
    """
    n = state.n
    H, l = member_geometry(n, model.members)
    l_c = np.bincount(model.cluster_of, weights=l, minlength=model.n_ec)
    forces = member_forces(model, l, l_c, state.l_0c, state.material)
    l_0, m = redistribute_segment_rest_lengths(model, l, state.l_0c, l_c)
    M = mass_matrix(model, m)
    K = stiffness_matrix(model, l, forces.t_c)
    A_2c, A_1c = equilibrium_matrices(model, H, l, l_c)
    D = damping_matrix(A_2c, model.damping_coefficients, model.zeta if zeta is None else zeta)
    g = gravity_vector(model, m)
    K_T, K_G, K_E = tangent_stiffness(model, H, l, A_2c, forces, state.l_0c, tangent)
    K_l0c = rest_length_sensitivity(A_1c, forces, model.area, state.l_0c)
    return AssemblySet(model=model, n=n, H=H, l=l, l_c=l_c, l_0c=state.l_0c, l_0=l_0, m=m,
                       forces=forces, M=M, K=K, D=D, g=g, A_2c=A_2c, A_1c=A_1c,
                       K_T=K_T, K_G=K_G, K_E=K_E, K_l0c=K_l0c)
