"""Structure description and the coordinate/member index algebra.

A structure is a set of nodes joined by classic members (bars and string
segments).  Consecutive string segments running over frictionless pulleys can
be grouped into one *clustered element* which carries a single tension.  All
member properties (area, material, density, damping, rest length) are given
per clustered element; an unclustered structure is simply the case where every
clustered element holds exactly one segment.

Internally every index is 0-based.  Nodal coordinates are stored flat,
``n = [x1, y1, z1, x2, ...]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .materials import MaterialLaw, MemberState

BAR = "bar"
STRING = "string"
KINDS = (BAR, STRING)


class GeometryError(ValueError):
    """Raised for degenerate geometry (coincident member end nodes)."""


@dataclass(frozen=True, eq=False)
class BoundaryMotion:
    """Prescribed trajectory for a subset of the constrained coordinates.

    Positions are interpolated with a cubic spline through the tabulated
    samples, so velocities and accelerations are available analytically.
    """

    coords: np.ndarray
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=int).ravel()
        times = np.asarray(self.times, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float).reshape(len(times), len(coords))
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if len(times) >= 2:
            object.__setattr__(self, "_spline", CubicSpline(times, values, axis=0))
        else:
            object.__setattr__(self, "_spline", None)

    def __call__(self, t: float):
        if self._spline is None:
            z = np.zeros(len(self.coords))
            return self.values[0].copy(), z, z.copy()
        tc = float(np.clip(t, self.times[0], self.times[-1]))
        pos = self._spline(tc)
        if t < self.times[0] or t > self.times[-1]:
            # held at the end values outside the table
            z = np.zeros(len(self.coords))
            return pos, z, z.copy()
        return pos, self._spline(tc, 1), self._spline(tc, 2)


@dataclass(frozen=True, eq=False)
class StructureModel:
    """Immutable structure description.

    Parameters
    ----------
    nodes : (n_n, 3) array
        Reference nodal coordinates in meters.
    members : (n_e, 2) int array
        Tail and head node of every classic member.
    clusters : sequence of sequences of int
        Member ids composing each clustered element.
    kinds : sequence of {"bar", "string"}
        Kind of each clustered element.
    fixed : sequence of int
        Constrained coordinate indices (into the flat coordinate vector).
    area, density, rest_length : (n_ec,) arrays
        Cross-section area (m^2), density (kg/m^3), rest length (m).
    materials : sequence of MaterialLaw
        Constitutive law of each clustered element.
    damping : (n_ec,) array, optional
        Axial damping coefficients (N s/m).  Defaults to the critical values.
    gravity : (3,) array
        Gravitational acceleration (m/s^2), e.g. ``(0, 0, -9.8)``.
    zeta : float
        Global scale applied to the damping coefficients in the dynamics.
    free : sequence of int, optional
        Free coordinate indices; defaults to the complement of `fixed`.
    motion : BoundaryMotion, optional
        Prescribed trajectory of constrained coordinates.
    labels : sequence of str, optional
        Group label of each clustered element (output only).
    """

    nodes: np.ndarray
    members: np.ndarray
    clusters: tuple
    kinds: tuple
    fixed: np.ndarray
    area: np.ndarray
    density: np.ndarray
    rest_length: np.ndarray
    materials: tuple
    damping: np.ndarray | None = None
    gravity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    zeta: float = 0.0
    free: np.ndarray | None = None
    motion: BoundaryMotion | None = None
    labels: tuple | None = None

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("nodes", np.asarray(self.nodes, dtype=float).reshape(-1, 3))
        set_("members", np.asarray(self.members, dtype=int).reshape(-1, 2))
        set_("clusters", tuple(tuple(int(m) for m in c) for c in self.clusters))
        set_("kinds", tuple(str(k) for k in self.kinds))
        n_ec = len(self.clusters)
        set_("fixed", np.asarray(self.fixed, dtype=int).ravel())
        for name in ("area", "density", "rest_length"):
            set_(name, _per_element(getattr(self, name), n_ec))
        mats = self.materials
        if isinstance(mats, MaterialLaw):
            mats = (mats,) * n_ec
        set_("materials", tuple(mats))
        if self.damping is not None:
            set_("damping", _per_element(self.damping, n_ec))
        set_("gravity", np.asarray(self.gravity, dtype=float).ravel())
        if self.free is None:
            mask = np.ones(3 * len(self.nodes), dtype=bool)
            fx = self.fixed[(self.fixed >= 0) & (self.fixed < mask.size)]
            mask[fx] = False
            set_("free", np.flatnonzero(mask))
        else:
            set_("free", np.asarray(self.free, dtype=int).ravel())
        if self.labels is not None:
            set_("labels", tuple(self.labels))

    # sizes -------------------------------------------------------------
    @property
    def n_n(self) -> int:
        return len(self.nodes)

    @property
    def n_e(self) -> int:
        return len(self.members)

    @property
    def n_ec(self) -> int:
        return len(self.clusters)

    @property
    def n_a(self) -> int:
        return len(self.free)

    @property
    def n_b(self) -> int:
        return len(self.fixed)

    @property
    def reference(self) -> np.ndarray:
        """Reference configuration as a flat coordinate vector."""
        return self.nodes.ravel().copy()

    # index maps --------------------------------------------------------
    @cached_property
    def cluster_of(self) -> np.ndarray:
        """Clustered element index of every classic member."""
        out = np.full(self.n_e, -1, dtype=int)
        for c, ms in enumerate(self.clusters):
            out[list(ms)] = c
        return out

    @cached_property
    def cluster_size(self) -> np.ndarray:
        return np.array([len(c) for c in self.clusters], dtype=int)

    @cached_property
    def is_string(self) -> np.ndarray:
        return np.array([k == STRING for k in self.kinds], dtype=bool)

    @cached_property
    def tail(self) -> np.ndarray:
        return self.members[:, 0].copy()

    @cached_property
    def head(self) -> np.ndarray:
        return self.members[:, 1].copy()

    @cached_property
    def C(self) -> np.ndarray:
        """Signed connectivity matrix (n_e x n_n)."""
        C = np.zeros((self.n_e, self.n_n))
        rows = np.arange(self.n_e)
        C[rows, self.tail] = -1.0
        C[rows, self.head] = 1.0
        return C

    @cached_property
    def S(self) -> np.ndarray:
        """Clustering matrix (n_ec x n_e)."""
        S = np.zeros((self.n_ec, self.n_e))
        for c, ms in enumerate(self.clusters):
            S[c, list(ms)] = 1.0
        return S

    @cached_property
    def segment_area(self) -> np.ndarray:
        return self.area[self.cluster_of]

    @cached_property
    def segment_density(self) -> np.ndarray:
        return self.density[self.cluster_of]

    @cached_property
    def initial_modulus(self) -> np.ndarray:
        return np.array([m.E for m in self.materials])

    @cached_property
    def damping_coefficients(self) -> np.ndarray:
        """Member damping vector: the stored one or the critical values."""
        if self.damping is not None:
            return self.damping
        from .assembly import critical_damping
        return critical_damping(self)

    def with_(self, **changes) -> "StructureModel":
        """Copy with some fields replaced (cached index maps are rebuilt)."""
        if "fixed" in changes and "free" not in changes:
            changes["free"] = None
        return replace(self, **changes)

    def unclustered(self) -> "StructureModel":
        """Same structure with every segment as its own element (S = I).

        Rest lengths of clustered elements are split in proportion to the
        reference segment lengths.
        """
        _, l = member_geometry(self.reference, self.members)
        clusters, kinds, labels, idx, l0 = [], [], [], [], []
        l_c = np.bincount(self.cluster_of, weights=l, minlength=self.n_ec)
        for m in range(self.n_e):
            c = self.cluster_of[m]
            clusters.append((m,))
            kinds.append(self.kinds[c])
            labels.append(self.labels[c] if self.labels else None)
            idx.append(c)
            if self.cluster_size[c] == 1:
                l0.append(self.rest_length[c])
            else:
                l0.append(self.rest_length[c] * l[m] / l_c[c])
        idx = np.array(idx)
        return replace(
            self,
            clusters=tuple(clusters),
            kinds=tuple(kinds),
            area=self.area[idx],
            density=self.density[idx],
            rest_length=np.array(l0),
            materials=tuple(self.materials[i] for i in idx),
            damping=None if self.damping is None else self.damping[idx],
            labels=tuple(labels) if self.labels else None,
        )

    def initial_state(self) -> "StructureState":
        return StructureState(self.reference, self.rest_length.copy())


@dataclass(frozen=True, eq=False)
class StructureState:
    """Time-varying part of the description.

    `n` and `v` are full coordinate/velocity vectors; `material` holds one
    :class:`MemberState` per clustered element.
    """

    n: np.ndarray
    l_0c: np.ndarray
    v: np.ndarray | None = None
    material: tuple | None = None

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float).ravel().copy()
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "l_0c", np.asarray(self.l_0c, dtype=float).ravel().copy())
        v = np.zeros_like(n) if self.v is None else np.asarray(self.v, dtype=float).ravel().copy()
        object.__setattr__(self, "v", v)
        if self.material is None:
            object.__setattr__(self, "material", (MemberState(),) * len(self.l_0c))
        else:
            object.__setattr__(self, "material", tuple(self.material))

    def with_(self, **changes) -> "StructureState":
        return replace(self, **changes)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        if self.ok:
            return "pass"
        return "\n".join(f"violation: {v}" for v in self.violations)


def _per_element(value, n):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    return arr.ravel().copy()


def validate(model: StructureModel) -> ValidationReport:
    """Check a model for structural consistency.

    Returns a report listing every violation found; a model is usable by the
    other modules only if the report passes.
    """
    v = []
    n_n, n_e, n_ec = model.n_n, model.n_e, model.n_ec
    nodes = model.nodes
    if not np.all(np.isfinite(nodes)):
        v.append("non-finite nodal coordinate")
    if n_e == 0:
        v.append("structure has no members")

    members_ok = True
    for m, (j, k) in enumerate(model.members):
        if not (0 <= j < n_n and 0 <= k < n_n):
            v.append(f"member {m + 1}: node index out of range")
            members_ok = False
        elif j == k:
            v.append(f"member {m + 1}: tail and head are the same node")
            members_ok = False
    if members_ok and n_e:
        used = np.zeros(n_n, dtype=bool)
        used[model.members.ravel()] = True
        for i in np.flatnonzero(~used):
            v.append(f"dangling node {i + 1}: not connected to any member")
        h = nodes[model.members[:, 1]] - nodes[model.members[:, 0]]
        for m in np.flatnonzero(np.linalg.norm(h, axis=1) == 0.0):
            v.append(f"member {m + 1}: coincident end nodes (zero length)")

    counts = np.zeros(n_e, dtype=int)
    for c, ms in enumerate(model.clusters):
        if len(ms) == 0:
            v.append(f"cluster {c + 1} is empty")
        for m in ms:
            if 0 <= m < n_e:
                counts[m] += 1
            else:
                v.append(f"cluster {c + 1}: member index {m + 1} out of range")
    for m in np.flatnonzero(counts == 0):
        v.append(f"member {m + 1} unassigned to any cluster")
    for m in np.flatnonzero(counts > 1):
        v.append(f"member {m + 1} assigned to more than one cluster")

    if len(model.kinds) != n_ec:
        v.append("member kind list does not match the number of clustered elements")
    else:
        for c, kind in enumerate(model.kinds):
            if kind not in KINDS:
                v.append(f"cluster {c + 1}: unknown member kind {kind!r}")
            elif kind == BAR and len(model.clusters[c]) > 1:
                v.append(f"cluster {c + 1}: bars cannot be clustered")

    for name in ("area", "density", "rest_length"):
        arr = getattr(model, name)
        if len(arr) != n_ec:
            v.append(f"{name}: expected {n_ec} values, got {len(arr)}")
        elif not np.all(arr > 0):
            label = {"area": "area", "density": "density", "rest_length": "rest length"}[name]
            bad = np.flatnonzero(~(arr > 0))
            v.append(f"nonpositive {label} for element(s) {', '.join(str(i + 1) for i in bad)}")
    if model.damping is not None:
        if len(model.damping) != n_ec:
            v.append("damping: wrong length")
        elif np.any(model.damping < 0):
            v.append("negative damping coefficient")
    if len(model.materials) != n_ec:
        v.append("materials: wrong length")
    elif not all(isinstance(m, MaterialLaw) for m in model.materials):
        v.append("materials: every element needs a MaterialLaw")
    if not (np.isfinite(model.zeta) and model.zeta >= 0):
        v.append("damping scale must be finite and nonnegative")
    if model.gravity.shape != (3,) or not np.all(np.isfinite(model.gravity)):
        v.append("gravity must be three finite components")

    ncoord = 3 * n_n
    a, b = model.free, model.fixed
    for name, idx in (("free", a), ("constrained", b)):
        if np.any((idx < 0) | (idx >= ncoord)):
            v.append(f"{name} coordinate index out of range")
        if len(np.unique(idx)) != len(idx):
            v.append(f"duplicate {name} coordinate index")
    both = np.intersect1d(a, b)
    if len(both):
        v.append("index in both free and constrained sets: "
                 + ", ".join(str(i + 1) for i in both))
    cover = np.union1d(a, b)
    if len(cover) != ncoord or (len(cover) and (cover[0] != 0 or cover[-1] != ncoord - 1)):
        v.append("free and constrained sets do not cover every coordinate")
    if model.motion is not None and not np.all(np.isin(model.motion.coords, b)):
        v.append("prescribed motion given for a coordinate that is not constrained")
    return ValidationReport(v)


def split_coordinates(n, free, fixed):
    """Gather a full coordinate vector into its free and constrained parts."""
    n = np.asarray(n, dtype=float).ravel()
    free = np.asarray(free, dtype=int)
    fixed = np.asarray(fixed, dtype=int)
    for idx in (free, fixed):
        if idx.size and (idx.min() < 0 or idx.max() >= n.size):
            raise IndexError("coordinate index out of range")
    return n[free], n[fixed]


def scatter_coordinates(n_a, n_b, free, fixed):
    """Inverse of :func:`split_coordinates`."""
    n_a = np.asarray(n_a, dtype=float).ravel()
    n_b = np.asarray(n_b, dtype=float).ravel()
    out = np.empty(n_a.size + n_b.size)
    out[np.asarray(free, dtype=int)] = n_a
    out[np.asarray(fixed, dtype=int)] = n_b
    return out


def member_geometry(n, members):
    """Member vectors and lengths.

    Returns
    -------
    H : (3, n_e) array
        Column m is ``n_head - n_tail`` of member m.
    l : (n_e,) array
        Member lengths.
    """
    N = np.asarray(n, dtype=float).reshape(-1, 3)
    members = np.asarray(members, dtype=int).reshape(-1, 2)
    h = N[members[:, 1]] - N[members[:, 0]]
    l = np.sqrt(np.einsum("ij,ij->i", h, h))
    if np.any(l == 0.0):
        bad = np.flatnonzero(l == 0.0)
        raise GeometryError(f"zero-length member(s): {', '.join(str(i + 1) for i in bad)}")
    return h.T, l


def cluster_lengths(S, l):
    """Lengths of clustered elements, ``l_c = S l``."""
    S = np.asarray(S, dtype=float)
    l = np.asarray(l, dtype=float).ravel()
    if S.ndim != 2 or S.shape[1] != l.size:
        raise ValueError(f"clustering matrix {S.shape} incompatible with {l.size} lengths")
    return S @ l


def build_model(nodes, members, kinds, *, clusters=None, fixed=(), area, density,
                rest_length=None, materials, damping=None, gravity=(0.0, 0.0, 0.0),
                zeta=0.0, labels=None, motion=None) -> StructureModel:
    """Convenience constructor.

    `kinds` may be given per member (length n_e) when `clusters` is omitted, or
    per clustered element.  A missing `rest_length` defaults to the reference
    lengths (an unstressed structure).
    """
    members = np.asarray(members, dtype=int).reshape(-1, 2)
    if clusters is None:
        clusters = [(m,) for m in range(len(members))]
    clusters = [tuple(c) for c in clusters]
    if rest_length is None:
        _, l = member_geometry(np.asarray(nodes, dtype=float).ravel(), members)
        rest_length = np.array([l[list(c)].sum() for c in clusters])
    return StructureModel(nodes=nodes, members=members, clusters=clusters, kinds=kinds,
                          fixed=np.asarray(fixed, dtype=int), area=area, density=density,
                          rest_length=rest_length, materials=materials, damping=damping,
                          gravity=gravity, zeta=zeta, labels=labels, motion=motion)


def coordinate_index(node: int, axis: str | int) -> int:
    """Flat coordinate index of (0-based node, axis)."""
    if isinstance(axis, str):
        axis = "xyz".index(axis.lower())
    return 3 * int(node) + int(axis)


def node_coordinates(nodes: Sequence[int], axes: str = "xyz") -> np.ndarray:
    return np.array([coordinate_index(n, a) for n in nodes for a in axes], dtype=int)
