"""Envelope and argument models attached to each report.

Models are evaluated on the absolute analytic-sample index axis (floats
allowed), with time ``tau = (index - origin) Ts``.  Using indices instead
of seconds makes the shift between consecutive reports exact: a model
reused by the next report is the same function on the same axis.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional

import numpy as np

__all__ = ["AmModel", "PiecewiseAmplitude", "PmModel", "FrModel", "ShiftedPrev",
           "PsPatched", "PiecewisePhase", "wrap_angle"]

TWO_PI = 2.0 * math.pi


def wrap_angle(x: float) -> float:
    """Wrap to (-pi, pi]."""
    y = math.remainder(x, TWO_PI)
    return math.pi if y == -math.pi else y


def _idx(i):
    return np.asarray(i, dtype=float)


# --------------------------------------------------------------------------
# envelope

@dataclasses.dataclass(frozen=True)
class AmModel:
    """``g0 + g1 sin(w tau) + g2 cos(w tau)``; ``f=None`` is a constant envelope."""

    gamma: tuple
    f: Optional[float]
    origin: float
    Ts: float

    kind = "AM"

    def value(self, i):
        g0, g1, g2 = self.gamma
        if self.f is None:
            return np.full_like(_idx(i), g0)
        wt = TWO_PI * self.f * (_idx(i) - self.origin) * self.Ts
        return g0 + g1 * np.sin(wt) + g2 * np.cos(wt)

    @property
    def A0(self) -> float:
        return self.gamma[0]

    @property
    def depth(self) -> float:
        return math.hypot(self.gamma[1], self.gamma[2]) / self.gamma[0]

    def params(self) -> dict:
        g0, g1, g2 = self.gamma
        return {"env_model": "AM" if self.f is not None else "constant",
                "gamma0": g0, "gamma1": g1, "gamma2": g2,
                "f_AM": self.f if self.f is not None else math.nan,
                "a_AM": self.depth, "phi_AM": math.atan2(g2, g1)}


@dataclasses.dataclass(frozen=True)
class PiecewiseAmplitude:
    """Pre-step model before ``i_AS``, constant ``A0_post`` from it on."""

    pre: object
    i_AS: int
    A0_post: float

    kind = "AS"

    def value(self, i):
        i = _idx(i)
        return np.where(i < self.i_AS, self.pre.value(i), self.A0_post)

    @property
    def depth(self) -> float:
        return (self.A0_post - self.pre.A0) / self.pre.A0

    def params(self) -> dict:
        p = dict(self.pre.params())
        p.update(env_model="piecewise", A0_post=self.A0_post, a_AS=self.depth)
        return p


# --------------------------------------------------------------------------
# argument

class _Arg:
    def frequency(self, i):
        return self.dphase(i) / TWO_PI

    def rocof(self, i):
        return self.ddphase(i) / TWO_PI


@dataclasses.dataclass(frozen=True)
class PmModel(_Arg):
    """``n0 + n1 tau + n2 sin(w tau) + n3 cos(w tau)``."""

    nu: tuple
    f: float
    origin: float
    Ts: float

    kind = "PM"

    def _tau(self, i):
        return (_idx(i) - self.origin) * self.Ts

    def phase(self, i):
        n0, n1, n2, n3 = self.nu
        tau = self._tau(i)
        wt = TWO_PI * self.f * tau
        return n0 + n1 * tau + n2 * np.sin(wt) + n3 * np.cos(wt)

    def dphase(self, i):
        n0, n1, n2, n3 = self.nu
        w = TWO_PI * self.f
        wt = w * self._tau(i)
        return n1 + w * (n2 * np.cos(wt) - n3 * np.sin(wt))

    def ddphase(self, i):
        n0, n1, n2, n3 = self.nu
        w = TWO_PI * self.f
        wt = w * self._tau(i)
        return -w * w * (n2 * np.sin(wt) + n3 * np.cos(wt))

    @property
    def depth(self) -> float:
        return math.hypot(self.nu[2], self.nu[3])

    def params(self) -> dict:
        n0, n1, n2, n3 = self.nu
        return {"arg_model": "PM", "nu0": n0, "nu1": n1, "nu2": n2, "nu3": n3,
                "f_PM": self.f, "a_PM": self.depth, "phi_PM": math.atan2(n3, n2)}


@dataclasses.dataclass(frozen=True)
class FrModel(_Arg):
    """``b0 + b1 tau + b2 tau^2``."""

    beta: tuple
    origin: float
    Ts: float

    kind = "FR"

    def _tau(self, i):
        return (_idx(i) - self.origin) * self.Ts

    def phase(self, i):
        b0, b1, b2 = self.beta
        tau = self._tau(i)
        return b0 + tau * (b1 + b2 * tau)

    def dphase(self, i):
        return self.beta[1] + 2.0 * self.beta[2] * self._tau(i)

    def ddphase(self, i):
        return np.full_like(_idx(i), 2.0 * self.beta[2])

    @property
    def R(self) -> float:
        return self.beta[2] / math.pi

    def params(self) -> dict:
        b0, b1, b2 = self.beta
        return {"arg_model": "FR", "beta0": b0, "beta1": b1, "beta2": b2, "R": self.R}


@dataclasses.dataclass(frozen=True)
class ShiftedPrev(_Arg):
    """A previous report's model carried forward by ``shift`` samples.

    On the absolute index axis the carried model is the same function, so
    evaluation simply delegates.
    """

    prev: object
    shift: int

    @property
    def kind(self):
        return self.prev.kind

    def phase(self, i):
        return self.prev.phase(i)

    def dphase(self, i):
        return self.prev.dphase(i)

    def ddphase(self, i):
        return self.prev.ddphase(i)

    def params(self) -> dict:
        p = dict(self.prev.params())
        p["arg_shift"] = self.shift
        return p


@dataclasses.dataclass(frozen=True)
class PsPatched(_Arg):
    """Pre-step argument plus a phase step ``a_PS`` from ``i_PS`` on."""

    prev: object
    a_PS: float
    i_PS: int

    kind = "PS"

    def phase(self, i):
        i = _idx(i)
        return self.prev.phase(i) + self.a_PS * (i >= self.i_PS)

    def dphase(self, i):
        return self.prev.dphase(i)

    def ddphase(self, i):
        return self.prev.ddphase(i)

    def params(self) -> dict:
        p = dict(self.prev.params())
        p.update(arg_model="PS", a_PS=self.a_PS)
        return p


@dataclasses.dataclass(frozen=True)
class PiecewisePhase(_Arg):
    """Pre-step model before ``i_PS`` and a post-step ramp from it on.

    The ramp was fitted with its time origin at the resolved upper flag
    bound and is evaluated on the shared index axis, which extends it back
    to the step location.
    """

    pre: object
    i_PS: int
    post: FrModel

    kind = "PSFR"

    def _pick(self, i, a, b):
        i = _idx(i)
        return np.where(i < self.i_PS, a(i), b(i))

    def phase(self, i):
        return self._pick(i, self.pre.phase, self.post.phase)

    def dphase(self, i):
        return self._pick(i, self.pre.dphase, self.post.dphase)

    def ddphase(self, i):
        return self._pick(i, self.pre.ddphase, self.post.ddphase)

    @property
    def a_PS(self) -> float:
        return wrap_angle(float(self.post.phase(self.i_PS) - self.pre.phase(self.i_PS)))

    def params(self) -> dict:
        p = dict(self.pre.params())
        b0, b1, b2 = self.post.beta
        p.update(arg_model="piecewise", post_beta0=b0, post_beta1=b1, post_beta2=b2,
                 post_R=self.post.R, a_PS=self.a_PS)
        return p
