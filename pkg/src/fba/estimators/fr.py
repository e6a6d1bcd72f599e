"""Frequency-ramp fit: quadratic phase by recursive weighted sums.

The argument over a window is modelled as ``beta0 + beta1 t + beta2 t^2``
with ``t = l Ts``.  The right-hand side of the normal equations only needs
``s_lam = sum_l l^lam x[l]`` for ``lam = 0, 1, 2``, which can be updated in
O(1) per sample.  When a wrap recorded inside the window leaves it, the
sums drop by ``M_lam = 2 pi sum_{l=0}^{L-2} l^lam``.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from fractions import Fraction
from typing import NamedTuple, Tuple

import numpy as np

__all__ = ["FrAccumulator", "FrFit", "fr_fit", "fr_fit_direct", "wrap_constants",
           "fr_gram", "fr_gram_inverse", "crlb_fr", "crlb_fr_exact", "direct_sums"]

TWO_PI = 2.0 * math.pi


def _power_sum(n: int, k: int) -> int:
    """``sum_{l=0}^{n-1} l^k`` as an exact integer."""
    return sum(l ** k for l in range(n)) if n < 64 else _faulhaber(n, k)


def _faulhaber(n: int, k: int) -> int:
    m = n - 1
    if k == 0:
        return n
    if k == 1:
        return m * (m + 1) // 2
    if k == 2:
        return m * (m + 1) * (2 * m + 1) // 6
    if k == 3:
        return (m * (m + 1) // 2) ** 2
    if k == 4:
        return m * (m + 1) * (2 * m + 1) * (3 * m * m + 3 * m - 1) // 30
    return sum(l ** k for l in range(n))


def wrap_constants(L: int) -> Tuple[float, float, float]:
    """Wrap corrections ``(M0, M1, M2)`` for window length ``L``."""
    return (TWO_PI * (L - 1),
            math.pi * (L - 2) * (L - 1),
            math.pi * (L - 2) * (L - 1) * (2 * L - 3) / 3)


def direct_sums(window) -> np.ndarray:
    """``(s0, s1, s2)`` computed directly from a window, oldest first."""
    x = np.asarray(window, dtype=float)
    l = np.arange(len(x), dtype=float)
    return np.array([x.sum(), l @ x, (l * l) @ x])


@functools.lru_cache(maxsize=None)
def _exact_index_inverse(L: int):
    """Exact inverse of ``[[S_{i+j}]]`` with ``S_k = sum l^k``."""
    s = [Fraction(_power_sum(L, k)) for k in range(5)]
    a = [[s[i + j] for j in range(3)] for i in range(3)]
    # adjugate / determinant, exact
    det = (a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
           - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
           + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]))
    if det == 0:
        raise np.linalg.LinAlgError(f"ramp Gram matrix singular for L={L}")
    adj = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            minor = [[a[r][c] for c in range(3) if c != i] for r in range(3) if r != j]
            adj[i][j] = (-1) ** (i + j) * (minor[0][0] * minor[1][1] - minor[0][1] * minor[1][0])
    return tuple(tuple(adj[i][j] / det for j in range(3)) for i in range(3))


def fr_gram(L: int, Ts: float) -> np.ndarray:
    """Gram matrix of ``[1, t, t^2]`` on ``t = l Ts``."""
    s = [float(_power_sum(L, k)) for k in range(5)]
    return np.array([[s[i + j] * Ts ** (i + j) for j in range(3)] for i in range(3)])


@functools.lru_cache(maxsize=None)
def fr_gram_inverse(L: int, Ts: float) -> np.ndarray:
    """Inverse ramp Gram matrix, exact up to the final rounding."""
    inv = _exact_index_inverse(L)
    ts = Fraction(Ts)
    out = np.array([[float(inv[i][j] / ts ** (i + j)) for j in range(3)] for i in range(3)])
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=None)
def _index_inverse_float(L: int) -> np.ndarray:
    inv = _exact_index_inverse(L)
    out = np.array([[float(v) for v in row] for row in inv])
    out.setflags(write=False)
    return out


class FrFit(NamedTuple):
    beta: tuple
    residual: float
    cert: float = 0.0

    @property
    def phi0(self) -> float:
        return self.beta[0]

    @property
    def f0(self) -> float:
        return self.beta[1] / TWO_PI

    @property
    def R(self) -> float:
        return self.beta[2] / math.pi


class FrAccumulator:
    """Streaming ``s_lam`` sums over the newest ``L`` argument samples.

    During the fill phase the outgoing sample is taken as 0, so the sums
    describe the window padded with zeros at its old end.
    """

    def __init__(self, L: int, Ts: float):
        if L < 3:
            raise ValueError("window length must be at least 3")
        self.L, self.Ts = int(L), float(Ts)
        self.s0 = self.s1 = self.s2 = 0.0
        self.count = 0
        self.M = wrap_constants(self.L)
        self._l1 = float(self.L - 1)
        self._l2 = self._l1 * self._l1

    @property
    def s(self) -> np.ndarray:
        return np.array([self.s0, self.s1, self.s2])

    @property
    def ready(self) -> bool:
        return self.count >= self.L

    def push(self, newest: float, outgoing: float = 0.0) -> None:
        s0, s1 = self.s0, self.s1
        self.s0 = s0 + newest - outgoing
        self.s1 = s1 - s0 + newest * self._l1 + outgoing
        self.s2 = self.s2 - 2.0 * s1 + s0 + newest * self._l2 - outgoing
        self.count += 1

    def wrap_correct(self, sign: int = 1) -> None:
        """Re-reference after a recorded wrap leaves the window."""
        m0, m1, m2 = self.M
        self.s0 -= sign * m0
        self.s1 -= sign * m1
        self.s2 -= sign * m2

    def resync(self, window) -> None:
        """Replace the sums by direct sums over ``window`` (oldest first).

        The recursion has a triple pole at 1, so rounding error in ``s2``
        grows about quadratically with the number of pushes; an occasional
        resync bounds it on long streams.
        """
        if len(window) != self.L:
            raise ValueError(f"window has {len(window)} samples, accumulator expects {self.L}")
        self.s0, self.s1, self.s2 = map(float, direct_sums(window))

    def fit(self, window=None) -> FrFit:
        """Solve for ``beta``; the residual needs the window itself."""
        return fr_fit(self, window)


def _beta_from_sums(sums, L: int, Ts: float) -> np.ndarray:
    b = _index_inverse_float(L) @ np.asarray(sums, dtype=float)
    return b / np.array([1.0, Ts, Ts * Ts])


def _residual(window, beta, Ts: float) -> Tuple[float, float]:
    x = np.asarray(window, dtype=float)
    t = np.arange(len(x)) * Ts
    d = np.column_stack([np.ones_like(t), t, t * t])
    r = x - d @ beta
    g = d.T @ r
    ref = np.linalg.norm(d.T @ x)
    return float(r @ r), float(np.linalg.norm(g) / ref) if ref > 0 else float(np.linalg.norm(g))


def fr_fit(acc: FrAccumulator, window=None) -> FrFit:
    """``beta = Lambda^-1 (s0, Ts s1, Ts^2 s2)`` from the running sums.

    ``window`` (the unwrapped argument buffer in the accumulator's
    reference) is needed for the residual; without it the residual is NaN.
    """
    if not acc.ready:
        raise RuntimeError("accumulator still filling")
    beta = _beta_from_sums(acc.s, acc.L, acc.Ts)
    if window is None:
        return FrFit(tuple(map(float, beta)), math.nan)
    rho, cert = _residual(window, beta, acc.Ts)
    return FrFit(tuple(map(float, beta)), rho, cert)


def fr_fit_direct(window, Ts: float) -> FrFit:
    """Ramp fit on an arbitrary-length window (time origin at its first sample)."""
    x = np.asarray(window, dtype=float)
    if len(x) < 3:
        raise ValueError("need at least 3 samples")
    beta = _beta_from_sums(direct_sums(x), len(x), Ts)
    rho, cert = _residual(x, beta, Ts)
    return FrFit(tuple(map(float, beta)), rho, cert)


def crlb_fr(L: int, Ts: float, sigma: float) -> Tuple[float, float, float]:
    """Per-coefficient variance bounds in the closed forms used for the ramp fit.

    These are ``sigma^2`` divided by the diagonal of the Fisher matrix, i.e.
    the bound for each coefficient when the other two are known.
    """
    v = sigma * sigma
    b0 = v / L
    b1 = 6 * v / (Ts ** 2 * L * (L - 1) * (2 * L - 1)) if L > 1 else math.inf
    den = Ts ** 4 * L * (L - 1) * (2 * L - 1) * (3 * L * L - 3 * L - 1)
    b2 = 30 * v / den if L > 1 else math.inf
    if sigma == 0:
        return 0.0, 0.0, 0.0
    return b0, b1, b2


def crlb_fr_exact(L: int, Ts: float, sigma: float) -> Tuple[float, float, float]:
    """Joint-estimation bound ``sigma^2 diag((D^T D)^-1)`` for all three coefficients."""
    inv = fr_gram_inverse(L, Ts)
    v = sigma * sigma
    return tuple(float(v * inv[i, i]) for i in range(3))
