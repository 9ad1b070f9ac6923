"""Member constitutive laws and member force vectors.

Three kinds of law are supported:

``linear``
    ``sigma = E * eps``.
``multilinear-elastic``
    Piecewise-linear backbone through the origin, followed on loading and
    unloading alike (path independent).
``plastic``
    The same backbone as a monotonic envelope.  Unloading and reloading inside
    the envelope follow the initial slope through the current plastic offset;
    hardening is isotropic, so the current yield stress in either direction is
    the envelope stress at the largest backbone strain reached so far.

The backbone is odd: compression mirrors tension.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING, NamedTuple

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .model import StructureModel

LINEAR = "linear"
MULTILINEAR = "multilinear-elastic"
PLASTIC = "plastic"


class StrainRangeWarning(RuntimeWarning):
    """Strain beyond the last tabulated breakpoint (slope extrapolated)."""


@dataclass(frozen=True, eq=False)
class MaterialLaw:
    """Uniaxial stress-strain law.

    Parameters
    ----------
    kind : {"linear", "multilinear-elastic", "plastic"}
    E : float
        Initial modulus (Pa).  For tabulated laws this is the slope of the
        first segment and is derived from `breakpoints`.
    breakpoints : (k, 2) array, optional
        ``(strain, stress)`` pairs with strictly increasing strain and
        nondecreasing stress, excluding the origin.
    name : str
    """

    kind: str
    E: float
    breakpoints: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in (LINEAR, MULTILINEAR, PLASTIC):
            raise ValueError(f"unknown material kind {self.kind!r}")
        if self.kind == LINEAR:
            if not self.E > 0:
                raise ValueError("modulus must be positive")
            object.__setattr__(self, "E", float(self.E))
            return
        bp = np.asarray(self.breakpoints, dtype=float).reshape(-1, 2)
        if bp.size and np.allclose(bp[0], 0.0):
            bp = bp[1:]
        if len(bp) == 0:
            raise ValueError("tabulated law needs at least one breakpoint")
        pts = np.vstack([[0.0, 0.0], bp])
        if np.any(np.diff(pts[:, 0]) <= 0):
            raise ValueError("breakpoint strains must be strictly increasing")
        if np.any(np.diff(pts[:, 1]) < 0):
            raise ValueError("breakpoint stresses must be nondecreasing")
        slopes = np.diff(pts[:, 1]) / np.diff(pts[:, 0])
        if not slopes[0] > 0:
            raise ValueError("first segment must have positive slope")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "E", float(slopes[0]))
        object.__setattr__(self, "_pts", pts)
        object.__setattr__(self, "_slopes", slopes)

    # constructors ------------------------------------------------------
    @classmethod
    def linear(cls, E, name=""):
        return cls(LINEAR, E, None, name)

    @classmethod
    def multilinear(cls, breakpoints, name=""):
        return cls(MULTILINEAR, 0.0, breakpoints, name)

    @classmethod
    def plastic(cls, breakpoints, name=""):
        return cls(PLASTIC, 0.0, breakpoints, name)

    @classmethod
    def bilinear_plastic(cls, E, yield_stress, hardening_modulus, ultimate_strain, name=""):
        """Elastic-linear-hardening law tabulated up to `ultimate_strain`."""
        ey = yield_stress / E
        su = yield_stress + hardening_modulus * (ultimate_strain - ey)
        return cls.plastic([(ey, yield_stress), (ultimate_strain, su)], name)

    @property
    def yield_strain(self) -> float:
        if self.kind == LINEAR:
            return np.inf
        return float(self._pts[1, 0])

    def backbone(self, strain):
        """Envelope stress and slope at `strain` (odd extension).

        Returns ``(stress, tangent, extrapolated)``.
        """
        if self.kind == LINEAR:
            return self.E * strain, self.E, False
        s = np.sign(strain)
        e = abs(strain)
        pts, slopes = self._pts, self._slopes
        k = int(np.searchsorted(pts[:, 0], e, side="right")) - 1
        extrapolated = k >= len(slopes)
        k = min(k, len(slopes) - 1)
        sig = pts[k, 1] + slopes[k] * (e - pts[k, 0])
        return s * sig, slopes[k], bool(extrapolated and e > pts[-1, 0])

    def strain_for_stress(self, stress):
        """Inverse of the backbone for a fresh member."""
        if self.kind == LINEAR:
            return stress / self.E
        s = np.sign(stress)
        sig = abs(stress)
        pts, slopes = self._pts, self._slopes
        k = int(np.searchsorted(pts[:, 1], sig, side="left")) - 1
        k = min(max(k, 0), len(slopes) - 1)
        while slopes[k] == 0.0 and k > 0:
            k -= 1
        if slopes[k] == 0.0:
            raise ValueError("backbone is not invertible at this stress")
        return s * (pts[k, 0] + (sig - pts[k, 1]) / slopes[k])


PRESETS = {
    # bar steel and cable steel; yield stresses are the design strengths
    "steel-Q235": dict(E=2.06e11, density=7870.0, yield_stress=435e6),
    "steel-cable": dict(E=7.6e10, density=7870.0, yield_stress=1223.5e6),
}


def preset(name: str, kind: str = LINEAR) -> MaterialLaw:
    """Built-in material law.

    `kind` selects the linear law or a perfectly plastic law with the preset
    yield stress (a tiny hardening slope keeps the envelope invertible).
    """
    p = PRESETS[name]
    if kind == LINEAR:
        return MaterialLaw.linear(p["E"], name)
    ey = p["yield_stress"] / p["E"]
    law = MaterialLaw.bilinear_plastic(p["E"], p["yield_stress"], 1e-3 * p["E"], 50 * ey, name)
    if kind == MULTILINEAR:
        return MaterialLaw.multilinear(law.breakpoints, name)
    return law


@dataclass(frozen=True)
class MemberState:
    """History variables of one clustered element."""

    max_strain_reached: float = 0.0
    plastic_offset: float = 0.0


class StressResult(NamedTuple):
    stress: float
    secant: float
    tangent: float
    state: MemberState
    extrapolated: bool = False


def _secant(stress, strain, E0):
    # infinite when a plastic offset leaves stress at (near) zero strain
    if stress == 0.0:
        return E0
    with np.errstate(divide="ignore", over="ignore"):
        return float(np.float64(stress) / np.float64(strain))


def stress_eval(law: MaterialLaw, strain: float, state: MemberState | None = None,
                warn: bool = True) -> StressResult:
    """Evaluate a law at `strain` from history `state`.

    Returns stress, secant and tangent moduli and the updated state; the input
    state is never modified.
    """
    if not np.isfinite(strain):
        raise ValueError("strain must be finite")
    state = MemberState() if state is None else state
    E0 = law.E
    if law.kind == LINEAR:
        sig = E0 * strain
        return StressResult(sig, E0, E0, state)

    if law.kind == MULTILINEAR:
        sig, Et, extra = law.backbone(strain)
        if extra and warn:
            warnings.warn(f"strain {strain:.3g} beyond last breakpoint", StrainRangeWarning, 2)
        return StressResult(sig, _secant(sig, strain, E0), Et, state, extra)

    # plastic: elastic predictor, return to the isotropic envelope
    eb = max(state.max_strain_reached, law.yield_strain)
    sig_y, _, _ = law.backbone(eb)
    trial = E0 * (strain - state.plastic_offset)
    if abs(trial) <= sig_y:
        return StressResult(trial, _secant(trial, strain, E0), E0, state)
    s = np.sign(trial)
    eb_new = eb + (abs(trial) - sig_y) / E0
    sig_b, Et, extra = law.backbone(eb_new)
    if extra and warn:
        warnings.warn(f"strain {strain:.3g} beyond last breakpoint", StrainRangeWarning, 2)
    sig = s * sig_b
    new = MemberState(max_strain_reached=eb_new, plastic_offset=strain - sig / E0)
    return StressResult(sig, _secant(sig, strain, E0), Et, new, extra)


@dataclass(frozen=True, eq=False)
class ForceVectors:
    """Member forces at one configuration.

    Attributes
    ----------
    t_c, t : clustered and segment forces (N); ``t = S^T t_c``
    x_c, x : clustered and segment force densities (N/m)
    strain, stress : clustered strains and stresses
    tangent, secant : clustered moduli (Pa); zero tangent for slack strings
    slack : bool mask of slack strings
    states : updated material states (not committed by this function)
    """

    t_c: np.ndarray
    t: np.ndarray
    x_c: np.ndarray
    x: np.ndarray
    strain: np.ndarray
    stress: np.ndarray
    tangent: np.ndarray
    secant: np.ndarray
    slack: np.ndarray
    states: tuple
    extrapolated: bool = False


def member_forces(model: "StructureModel", l, l_c, l_0c=None, states=None) -> ForceVectors:
    """Forces of all clustered elements at segment lengths `l`.

    Strings in compression are slack: zero force, zero tangent and their
    material state left untouched.
    """
    l = np.asarray(l, dtype=float)
    l_c = np.asarray(l_c, dtype=float)
    l_0c = model.rest_length if l_0c is None else np.asarray(l_0c, dtype=float)
    n_ec = model.n_ec
    states = (MemberState(),) * n_ec if states is None else tuple(states)
    strain = (l_c - l_0c) / l_0c
    stress = np.empty(n_ec)
    tangent = np.empty(n_ec)
    secant = np.empty(n_ec)
    new_states = list(states)
    extra = False
    lin = _linear_mask(model)
    E = model.initial_modulus
    stress[lin] = E[lin] * strain[lin]
    tangent[lin] = E[lin]
    secant[lin] = E[lin]
    for i in np.flatnonzero(~lin):
        r = stress_eval(model.materials[i], strain[i], states[i], warn=False)
        stress[i], secant[i], tangent[i] = r.stress, r.secant, r.tangent
        new_states[i] = r.state
        extra |= r.extrapolated
    if extra:
        warnings.warn("member strain beyond last breakpoint", StrainRangeWarning, 2)

    slack = model.is_string & (stress < 0.0)
    if slack.any():
        stress[slack] = 0.0
        tangent[slack] = 0.0
        for i in np.flatnonzero(slack):
            new_states[i] = states[i]
    t_c = model.area * stress
    cof = model.cluster_of
    t = t_c[cof]
    return ForceVectors(t_c=t_c, t=t, x_c=t_c / l_c, x=t / l, strain=strain, stress=stress,
                        tangent=tangent, secant=secant, slack=slack,
                        states=tuple(new_states), extrapolated=extra)


def _linear_mask(model):
    try:
        return model.__dict__["_linear_mask"]
    except KeyError:
        mask = np.array([m.kind == LINEAR for m in model.materials], dtype=bool)
        model.__dict__["_linear_mask"] = mask
        return mask


def force_densities(t_c, l, l_c, S):
    """Segment and clustered force densities ``(x, x_c)``."""
    t_c = np.asarray(t_c, dtype=float)
    x_c = t_c / np.asarray(l_c, dtype=float)
    x = (np.asarray(S, dtype=float).T @ t_c) / np.asarray(l, dtype=float)
    return x, x_c


def redistribute_segment_rest_lengths(model: "StructureModel", l, l_0c, l_c=None):
    """Segment rest lengths and masses of sliding clustered strings.

    All segments of one clustered element share its tension and modulus, so
    the equal-tension condition ``t = EA (l_i - l_0i) / l_0i`` gives every
    segment the strain of the whole element.  Its closed form is
    ``l_0i = l_i * l_0c / l_c``, which also conserves the total rest length
    (and hence the mass) of the element.

    Returns
    -------
    l_0 : (n_e,) segment rest lengths
    m : (n_e,) segment masses
    """
    l = np.asarray(l, dtype=float)
    l_0c = np.asarray(l_0c, dtype=float)
    cof = model.cluster_of
    if l_c is None:
        l_c = np.bincount(cof, weights=l, minlength=model.n_ec)
    ratio = l_0c / l_c
    l_0 = np.where(model.cluster_size[cof] == 1, l_0c[cof], l * ratio[cof])
    m = model.segment_density * model.segment_area * l_0
    return l_0, m


def rest_length_for_force(law: MaterialLaw, area: float, length: float, force: float) -> float:
    """Rest length giving `force` at `length` along the backbone of a fresh member."""
    if law.kind == LINEAR:
        EA = law.E * area
        if force <= -EA:
            raise ValueError("requested compression exceeds the axial stiffness")
        return EA * length / (force + EA)
    eps = law.strain_for_stress(force / area)
    if eps <= -1.0:
        raise ValueError("requested compression not attainable")
    return length / (1.0 + eps)


def strain_energy(law: MaterialLaw, strain: float, state: MemberState | None = None) -> float:
    """Stored (recoverable) energy per unit rest volume."""
    if law.kind == LINEAR:
        return 0.5 * law.E * strain * strain
    if law.kind == MULTILINEAR:
        e = abs(strain)
        pts, slopes = law._pts, law._slopes
        w = 0.0
        for k in range(len(slopes)):
            a = pts[k, 0]
            b = pts[k + 1, 0] if k + 1 < len(slopes) else np.inf
            if e <= a:
                break
            hi = min(e, b)
            s0 = pts[k, 1]
            w += s0 * (hi - a) + 0.5 * slopes[k] * (hi - a) ** 2
        return w
    sig = stress_eval(law, strain, state, warn=False).stress
    return 0.5 * sig * sig / law.E
