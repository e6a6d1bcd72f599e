"""Step detection on differential envelope and argument streams.

A step shows up as a burst in ``dev = dx[l] - (x[l] - x[l - Lm]) / Lm``,
the per-sample increment minus its running mean.  Ramps and slow
modulations leave ``dev`` near zero.
"""

from __future__ import annotations

import collections
import dataclasses
import math
from typing import List, Optional

import numpy as np

__all__ = ["StepEvent", "StepDetector", "NoiseFloor", "differential_deviation",
           "step_detect", "post_step_amplitude", "running_mean_milestones"]

MAD_SCALE = 1.4826


def differential_deviation(x, L_mean: int = 32) -> np.ndarray:
    """Signed ``dx - mean(dx over L_mean)``; the first ``L_mean`` entries are NaN."""
    x = np.asarray(x, dtype=float)
    dev = np.full(len(x), np.nan)
    if len(x) > L_mean:
        dx = x[L_mean:] - x[L_mean - 1:-1]
        mean = (x[L_mean:] - x[:-L_mean]) / L_mean
        dev[L_mean:] = dx - mean
    return dev


@dataclasses.dataclass
class StepEvent:
    """A flag interval ``[i_lb, i_ub)`` on the analytic sample index axis.

    ``i_ub`` is ``None`` while pending.  Per-channel step locations are the
    earliest samples of maximum deviation; ``i_joint`` maximises the sum of
    both deviations in units of their thresholds.
    """

    i_lb: int
    i_ub: Optional[int] = None
    i_step_A: int = -1
    i_step_phi: int = -1
    dev_A: float = 0.0
    dev_phi: float = 0.0
    flag_A: bool = False
    flag_phi: bool = False
    merged: int = 1
    score: float = 0.0
    i_joint: int = -1

    @property
    def kind(self) -> str:
        if self.flag_A and self.flag_phi:
            return "both"
        return "amplitude" if self.flag_A else "phase"

    @property
    def i_step(self) -> int:
        """Joint location when both channels flagged, else the flagged channel's."""
        if self.flag_A and self.flag_phi:
            return self.i_joint
        return self.i_step_A if self.flag_A else self.i_step_phi

    @property
    def deviation(self) -> float:
        return self.dev_A if self.flag_A else self.dev_phi

    @property
    def resolved(self) -> bool:
        return self.i_ub is not None

    def overlaps(self, start: int, stop: int) -> bool:
        """True when the flag interval meets samples ``start..stop-1``."""
        end = self.i_ub if self.i_ub is not None else math.inf
        return self.i_lb < stop and end > start


class StepDetector:
    """Joint two-channel flagging with a dwell before an interval closes.

    Parameters
    ----------
    eps_A, eps_phi : float
        Thresholds on ``|dev|`` for envelope and argument.
    dwell : int
        Consecutive in-threshold samples (both channels) needed to resolve
        the upper bound.
    """

    def __init__(self, eps_A: float, eps_phi: float, dwell: int = 32):
        self.eps_A, self.eps_phi, self.dwell = float(eps_A), float(eps_phi), int(dwell)
        self.events: List[StepEvent] = []
        self.open: Optional[StepEvent] = None
        self._last_flag = -1
        self._quiet = 0

    def push(self, i: int, dev_A: float, dev_phi: float) -> Optional[StepEvent]:
        """Feed one sample; returns an event when it resolves."""
        a, p = abs(dev_A), abs(dev_phi)
        fa, fp = a > self.eps_A, p > self.eps_phi
        ev = self.open
        if ev is None:
            if not (fa or fp):
                return None
            ev = self.open = StepEvent(i, i_step_A=i, i_step_phi=i)
            self.events.append(ev)
            self._quiet = 0
        if fa or fp:
            self._last_flag = i
            self._quiet = 0
            ev.flag_A |= fa
            ev.flag_phi |= fp
        else:
            self._quiet += 1
        if a > ev.dev_A:
            ev.dev_A, ev.i_step_A = a, i
        if p > ev.dev_phi:
            ev.dev_phi, ev.i_step_phi = p, i
        score = a / self.eps_A + p / self.eps_phi
        if score > ev.score:
            ev.score, ev.i_joint = score, i
        if self._quiet >= self.dwell:
            ev.i_ub = self._last_flag + 1
            self.open = None
            return ev
        return None


class NoiseFloor:
    """Robust scale of a deviation stream from recent windows.

    Each update takes ``1.4826 * MAD`` of a window of deviations; the
    reported value is the largest of the last ``history`` updates, so a
    noise level that varies along a modulation period is tracked at its
    worst.  The MAD itself is barely moved by a step transient.
    """

    def __init__(self, history: int = 5):
        self._hist = collections.deque(maxlen=history)

    def update(self, dev) -> float:
        d = np.asarray(dev, dtype=float)
        d = d[np.isfinite(d)]
        if len(d):
            self._hist.append(MAD_SCALE * float(np.median(np.abs(d - np.median(d)))))
        return self.value

    @property
    def value(self) -> float:
        return float(max(self._hist)) if self._hist else 0.0


def step_detect(x, eps: float, L_mean: int = 32, dwell: Optional[int] = None) -> List[StepEvent]:
    """Single-channel detection over a whole stream.

    Returns the flag intervals in order; location and deviation fields of
    the amplitude channel are used.
    """
    dev = differential_deviation(x, L_mean)
    det = StepDetector(eps, math.inf, L_mean if dwell is None else dwell)
    for i, v in enumerate(dev):
        if np.isfinite(v):
            det.push(i, v, 0.0)
    return det.events


def post_step_amplitude(envelope, i_ub: int, L_A: int = 64) -> Optional[float]:
    """Mean of the ``L_A`` envelope samples from ``i_ub`` on, or ``None`` if pending."""
    env = np.asarray(envelope, dtype=float)
    if i_ub < 0 or len(env) - i_ub < L_A:
        return None
    return float(np.mean(env[i_ub:i_ub + L_A]))


def running_mean_milestones(envelope, i_step: int, pre: float, post: float,
                            L_A: int = 64, full: float = 1.0):
    """Samples after ``i_step`` at which an ``L_A`` running mean of the envelope
    first reaches 50 % and ``full`` of the step from ``pre`` to ``post``.

    Either value is ``None`` if not reached.  Levels are compared with a
    1e-9 allowance for rounding in the running mean.
    """
    env = np.asarray(envelope, dtype=float)
    c = np.concatenate(([0.0], np.cumsum(env)))
    idx = np.arange(L_A, len(env) + 1)
    mean = (c[idx] - c[idx - L_A]) / L_A          # mean of samples idx-L_A .. idx-1
    last = idx - 1
    frac = (mean - pre) / (post - pre)
    out = []
    for level in (0.5, full):
        hit = np.nonzero((last >= i_step) & (frac >= level - 1e-9))[0]
        out.append(int(last[hit[0]] - i_step) if len(hit) else None)
    return tuple(out)
