"""Time tables of rest lengths, external forces and boundary motion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BoundaryMotion


def _interp_rows(t, times, table):
    if len(times) == 1 or t <= times[0]:
        return table[0].copy()
    if t >= times[-1]:
        return table[-1].copy()
    k = int(np.searchsorted(times, t, side="right")) - 1
    w = (t - times[k]) / (times[k + 1] - times[k])
    return (1.0 - w) * table[k] + w * table[k + 1]


@dataclass(frozen=True, eq=False)
class ActuationSchedule:
    """Piecewise-linear rest-length and nodal-force trajectories.

    Values are held at the first/last knot outside the tabulated window.

    Parameters
    ----------
    times : (k,) array
        Strictly increasing knot times (s).
    rest_lengths : (k, n_ec) array
        Clustered rest lengths at the knots (m).
    forces : (k, 3 n_n) array, optional
        External nodal forces at the knots (N).
    motion : BoundaryMotion, optional
        Overrides the model's prescribed boundary motion.
    """

    times: np.ndarray
    rest_lengths: np.ndarray
    forces: np.ndarray | None = None
    motion: BoundaryMotion | None = None

    def __post_init__(self):
        times = np.atleast_1d(np.asarray(self.times, dtype=float))
        if np.any(np.diff(times) <= 0):
            raise ValueError("schedule times must be strictly increasing")
        l0 = np.asarray(self.rest_lengths, dtype=float).reshape(len(times), -1)
        if np.any(l0 <= 0):
            raise ValueError("rest lengths must stay positive")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "rest_lengths", l0)
        if self.forces is not None:
            object.__setattr__(self, "forces",
                               np.asarray(self.forces, dtype=float).reshape(len(times), -1))

    @classmethod
    def constant(cls, l_0c, forces=None):
        f = None if forces is None else np.asarray(forces, dtype=float)[None, :]
        return cls(np.array([0.0]), np.asarray(l_0c, dtype=float)[None, :], f)

    @classmethod
    def ramp(cls, l_start, l_end, t_ramp, forces=None, t0=0.0):
        """Linear change from `l_start` to `l_end` over ``[t0, t0 + t_ramp]``."""
        l = np.vstack([l_start, l_end])
        f = None if forces is None else np.vstack([forces, forces])
        return cls(np.array([t0, t0 + t_ramp]), l, f)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_final(self) -> float:
        """Time of the last knot (end of actuation)."""
        return float(self.times[-1])

    def l_0c(self, t):
        return _interp_rows(t, self.times, self.rest_lengths)

    def f_ex(self, t, size=None):
        if self.forces is None:
            return None if size is None else np.zeros(size)
        return _interp_rows(t, self.times, self.forces)

    def rescaled(self, duration):
        """Same actuation stretched to last `duration` seconds."""
        t = self.times - self.times[0]
        span = t[-1] if t[-1] > 0 else 1.0
        return ActuationSchedule(self.times[0] + t * (duration / span), self.rest_lengths,
                                 self.forces, self.motion)
