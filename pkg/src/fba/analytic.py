"""Analytic-signal samples and streaming phase unwrapping.

The unwrapper keeps wrapped arguments and a wrap count ``W``; the newest
unwrapped value is ``wrapped + 2 pi W``.  A wrap recorded at sample ``p``
is cleared when ``p`` leaves the window, ``L`` samples later; the cleared
event tells the FR accumulator to re-reference its sums.
"""

from __future__ import annotations

import collections
import csv
import math
from typing import NamedTuple, Optional

import numpy as np

__all__ = ["AnalyticSample", "WrapEvent", "PhaseUnwrapper", "make_analytic",
           "dump_csv", "TWO_PI"]

TWO_PI = 2.0 * math.pi


class AnalyticSample(NamedTuple):
    t: float
    envelope: float
    argument: float


class WrapEvent(NamedTuple):
    """A recorded wrap that left the window.

    ``sign`` is +1 for the usual backward wrap (increment <= -pi) and -1 for
    an anomalous forward jump.  ``correction`` is the multiple of 2 pi that
    the oldest ``L - 1`` samples must drop to match the new reference.
    """

    index: int
    sign: int
    correction: float


def make_analytic(real_delayed: float, imag: float, t: float = 0.0) -> AnalyticSample:
    """Envelope and four-quadrant argument of ``re + j im``."""
    return AnalyticSample(t, math.hypot(real_delayed, imag), math.atan2(imag, real_delayed))


class PhaseUnwrapper:
    """Bounded-representation unwrapping over a sliding window of ``L`` samples.

    Parameters
    ----------
    L : int
        Window length.

    Notes
    -----
    ``push`` returns ``(unwrapped, outgoing, cleared)`` where ``outgoing``
    is the in-window representation of the sample that just left (0 during
    the fill phase) and ``cleared`` is a :class:`WrapEvent` or ``None``.
    """

    def __init__(self, L: int):
        if L < 2:
            raise ValueError("window length must be at least 2")
        self.L = L
        self.W = 0
        self.count = 0
        self.anomalies = 0
        self._wrapped = np.zeros(L)
        self._marks = np.zeros(L, dtype=np.int8)    # wrap sign recorded at each slot
        self._pos = 0                              # slot of the next write
        self._wraps = collections.deque()           # (index, sign) in the window
        self._prev: Optional[float] = None

    @property
    def wrap_indices(self) -> list:
        return [i for i, _ in self._wraps]

    def push(self, wrapped: float):
        n = self.count
        L = self.L
        cleared = None
        outgoing = 0.0
        if n >= L:
            slot_out = self._pos
            outgoing = self._wrapped[slot_out]
            if self._wraps and self._wraps[0][0] == n - L:
                idx, sign = self._wraps.popleft()
                outgoing += TWO_PI * sign
                self.W -= sign
                cleared = WrapEvent(idx, sign, TWO_PI * sign)
        if self._prev is not None:
            step = wrapped - self._prev
            if step <= -math.pi:
                self._wraps.append((n, 1))
                self.W += 1
                mark = 1
            elif step >= math.pi:
                self._wraps.append((n, -1))
                self.W -= 1
                self.anomalies += 1
                mark = -1
            else:
                mark = 0
        else:
            mark = 0
        self._wrapped[self._pos] = wrapped
        self._marks[self._pos] = mark
        self._pos = (self._pos + 1) % L
        self._prev = wrapped
        self.count = n + 1
        return wrapped + TWO_PI * self.W, outgoing, cleared

    def window(self) -> np.ndarray:
        """Virtually unwrapped window, oldest first, in the current reference.

        During the fill phase only the samples present are returned.
        """
        m = min(self.count, self.L)
        order = (self._pos - m + np.arange(m)) % self.L
        # every mark inside the window belongs to an active wrap
        marks = self._marks[order].astype(float)
        return self._wrapped[order] + TWO_PI * np.cumsum(marks)

    def wrapped_window(self) -> np.ndarray:
        m = min(self.count, self.L)
        order = (self._pos - m + np.arange(m)) % self.L
        return self._wrapped[order].copy()


def dump_csv(path, times, envelope, wrapped, wrap_count) -> None:
    """Diagnostic dump of ``(t, envelope, wrapped, W)`` rows."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "envelope", "wrapped", "W"])
        for row in zip(times, envelope, wrapped, wrap_count):
            w.writerow([f"{row[0]:.9f}", f"{row[1]:.17g}", f"{row[2]:.17g}", int(row[3])])
