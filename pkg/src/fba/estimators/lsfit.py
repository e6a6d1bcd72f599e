"""Fixed-frequency least-squares fits for amplitude and phase modulation.

Both models are linear in their coefficients once the modulation frequency
is fixed:

* envelope ``gamma0 + gamma1 sin(w t) + gamma2 cos(w t)``
* argument ``nu0 + nu1 t + nu2 sin(w t) + nu3 cos(w t)``

with ``t = l Ts`` measured from the window start.  Internally the columns
use time centred on the window (and a unit-span linear column), which keeps
the Gram matrices well conditioned; coefficients are mapped back to the
window-start convention on output.  Gram inverses are computed in 60-digit
arithmetic and cached per frequency.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Dict, Iterable, Optional

import mpmath
import numpy as np

__all__ = ["AmFit", "PmFit", "BasisCache", "am_ls_fit", "pm_ls_fit", "certificate",
           "SingularGramError", "modulation_wald"]

TWO_PI = 2.0 * math.pi
_KEY_DIGITS = 9          # frequency keys are rounded to 1e-9 Hz
SHARE_TOL = 7e-5         # kernels closer than this share storage (Hz)


class SingularGramError(np.linalg.LinAlgError):
    pass


def _exact_inverse(gram: np.ndarray) -> np.ndarray:
    with mpmath.workdps(60):
        m = mpmath.matrix(gram.tolist())
        if abs(mpmath.det(m)) == 0:
            raise SingularGramError("Gram matrix is singular")
        inv = m ** -1
        return np.array([[float(inv[i, j]) for j in range(m.cols)] for i in range(m.rows)])


@dataclasses.dataclass(frozen=True)
class Kernel:
    """Basis columns and Gram inverse for one frequency."""

    f: float
    basis: np.ndarray       # (L, p), centred convention
    gram: np.ndarray
    gram_inv: np.ndarray

    @property
    def packed(self) -> np.ndarray:
        """Upper triangle of the symmetric inverse (6 values for AM, 10 for PM)."""
        return self.gram_inv[np.triu_indices(len(self.gram_inv))]


class BasisCache:
    """Per-frequency AM or PM kernels for a fixed window ``(L, Ts)``.

    Parameters
    ----------
    kind : {"AM", "PM"}
    L : int
        Window length in samples.
    Ts : float
        Sampling period in s.
    freqs : iterable of float, optional
        Frequencies to precompute.  Others are built on first use.
    """

    def __init__(self, kind: str, L: int, Ts: float, freqs: Iterable[float] = ()):
        if kind not in ("AM", "PM"):
            raise ValueError("kind must be 'AM' or 'PM'")
        self.kind, self.L, self.Ts = kind, int(L), float(Ts)
        if self.L < (3 if kind == "AM" else 4):
            raise ValueError(f"{kind} fits need a longer window")
        half = (self.L - 1) / 2
        self.t_center = half * self.Ts
        self.tau = (np.arange(self.L) - half) * self.Ts
        self.s = (np.arange(self.L) - half) / half
        self._kernels: Dict[float, Kernel] = {}
        for f in freqs:
            self.kernel(f)

    def _columns(self, f: float) -> np.ndarray:
        w = TWO_PI * f
        cols = [np.ones(self.L)]
        if self.kind == "PM":
            cols.append(self.s)
        cols += [np.sin(w * self.tau), np.cos(w * self.tau)]
        return np.column_stack(cols)

    def _build(self, f: float) -> Kernel:
        d = self._columns(f)
        gram = d.T @ d
        return Kernel(f, d, gram, _exact_inverse(gram))

    def kernel(self, f: float) -> Kernel:
        if not f > 0:
            raise ValueError("modulation frequency must be positive")
        key = round(float(f), _KEY_DIGITS)
        k = self._kernels.get(key)
        if k is None:
            for other in self._kernels.values():
                if abs(other.f - f) < 1e-9:
                    k = other
                    break
            else:
                k = self._build(float(f))
            self._kernels[key] = k
        return k

    def distinct(self, tol: float = SHARE_TOL) -> list:
        """Stored frequencies after merging those closer than ``tol``."""
        out = []
        for f in sorted({k.f for k in self._kernels.values()}):
            if not out or f - out[-1] >= tol:
                out.append(f)
        return out

    def __len__(self):
        return len({id(k) for k in self._kernels.values()})

    def save(self, path) -> None:
        """Write the cache as an ``.npz`` archive.

        Layout: ``kind`` (str), ``L`` (int64), ``Ts`` (float64), ``freqs``
        (float64, n) and ``packed`` (float64, n x 6 for AM or n x 10 for PM),
        the row-major upper triangle of each Gram inverse.
        """
        ks = sorted({id(k): k for k in self._kernels.values()}.values(), key=lambda k: k.f)
        np.savez(path, kind=np.array(self.kind), L=np.int64(self.L), Ts=np.float64(self.Ts),
                 freqs=np.array([k.f for k in ks]),
                 packed=np.array([k.packed for k in ks]).reshape(len(ks), -1))

    @classmethod
    def load(cls, path) -> "BasisCache":
        """Rebuild a cache from :meth:`save` output without re-inverting."""
        with np.load(path) as z:
            cache = cls(str(z["kind"]), int(z["L"]), float(z["Ts"]))
            p = 3 if cache.kind == "AM" else 4
            iu = np.triu_indices(p)
            for f, packed in zip(z["freqs"], z["packed"]):
                inv = np.zeros((p, p))
                inv[iu] = packed
                inv = inv + np.triu(inv, 1).T
                d = cache._columns(float(f))
                cache._kernels[round(float(f), _KEY_DIGITS)] = Kernel(float(f), d, d.T @ d, inv)
        return cache

    def rotate(self, f: float, c_sin: float, c_cos: float):
        """Map centred sine/cosine coefficients to the window-start origin."""
        ph = TWO_PI * f * self.t_center
        cs, sn = math.cos(ph), math.sin(ph)
        return c_sin * cs + c_cos * sn, -c_sin * sn + c_cos * cs


def certificate(basis: np.ndarray, theta: np.ndarray, x: np.ndarray) -> float:
    """Relative normal-equation residual ``|D^T (D theta - x)| / |D^T x|``."""
    g = basis.T @ (basis @ theta - x)
    ref = np.linalg.norm(basis.T @ x)
    return float(np.linalg.norm(g) / ref) if ref > 0 else float(np.linalg.norm(g))


@dataclasses.dataclass(frozen=True)
class AmFit:
    """Envelope fit at a fixed modulation frequency.

    ``gamma`` uses the window-start time origin; ``theta`` holds the
    internal centred coefficients.
    """

    f: float
    gamma: tuple
    residual: float
    feasible: bool
    theta: tuple
    cert: float

    @property
    def A0(self) -> float:
        return self.gamma[0]

    @property
    def depth(self) -> float:
        g0, g1, g2 = self.gamma
        return math.hypot(g1, g2) / g0 if g0 != 0 else math.inf

    @property
    def phase(self) -> float:
        return math.atan2(self.gamma[2], self.gamma[1])


@dataclasses.dataclass(frozen=True)
class PmFit:
    """Argument fit at a fixed modulation frequency (window-start origin)."""

    f: float
    nu: tuple
    residual: float
    feasible: bool
    theta: tuple
    cert: float

    @property
    def phi0(self) -> float:
        return self.nu[0]

    @property
    def f0(self) -> float:
        return self.nu[1] / TWO_PI

    @property
    def depth(self) -> float:
        return math.hypot(self.nu[2], self.nu[3])

    @property
    def phase(self) -> float:
        return math.atan2(self.nu[3], self.nu[2])


def _solve(kernel: Kernel, x: np.ndarray):
    d = kernel.basis
    rhs = d.T @ x
    theta = kernel.gram_inv @ rhs
    # one step of iterative refinement against the float Gram matrix
    theta = theta + kernel.gram_inv @ (rhs - kernel.gram @ theta)
    r = x - d @ theta
    return theta, float(r @ r)


def modulation_wald(fit, cache: BasisCache) -> float:
    """Wald statistic of a fit's sin/cos pair against zero modulation.

    ``theta_m' C^-1 theta_m / sigma^2`` with ``C`` the matching block of the
    Gram inverse and ``sigma^2`` the residual per degree of freedom.  Under
    white noise and no modulation it is about chi-square with 2 degrees of
    freedom; the rotation to the window-start origin does not change it.
    """
    k = cache.kernel(fit.f)
    p = len(fit.theta)
    th = np.asarray(fit.theta[p - 2:])
    s2 = fit.residual / (cache.L - p)
    if not s2 > 0:
        return math.inf
    return float(th @ np.linalg.solve(k.gram_inv[p - 2:, p - 2:], th) / s2)


def am_ls_fit(envelope, f: float, cache: BasisCache, max_depth: float = 0.5) -> AmFit:
    """Least-squares AM coefficients at modulation frequency ``f``.

    Feasible when ``gamma0 > 0`` and the implied depth is at most
    ``max_depth``.
    """
    x = np.asarray(envelope, dtype=float)
    if len(x) != cache.L:
        raise ValueError(f"window has {len(x)} samples, cache expects {cache.L}")
    k = cache.kernel(f)
    theta, rho = _solve(k, x)
    g1, g2 = cache.rotate(f, theta[1], theta[2])
    gamma = (float(theta[0]), float(g1), float(g2))
    feasible = gamma[0] > 0 and math.hypot(g1, g2) <= max_depth * gamma[0]
    return AmFit(float(f), gamma, rho, bool(feasible), tuple(map(float, theta)),
                 certificate(k.basis, theta, x))


def pm_ls_fit(argument, f: float, cache: BasisCache, max_depth: float = math.pi / 2) -> PmFit:
    """Least-squares PM coefficients at modulation frequency ``f``.

    Feasible when the modulation depth is at most ``max_depth`` rad.
    """
    x = np.asarray(argument, dtype=float)
    if len(x) != cache.L:
        raise ValueError(f"window has {len(x)} samples, cache expects {cache.L}")
    k = cache.kernel(f)
    theta, rho = _solve(k, x)
    slope = theta[1] / cache.t_center
    n2, n3 = cache.rotate(f, theta[2], theta[3])
    nu = (float(theta[0] - theta[1]), float(slope), float(n2), float(n3))
    feasible = math.hypot(n2, n3) <= max_depth
    return PmFit(float(f), nu, rho, bool(feasible), tuple(map(float, theta)),
                 certificate(k.basis, theta, x))
