"""Golden-section search over a modulation frequency.

The first iteration evaluates the bracket ends and both interior points;
every later iteration reuses one interior point and evaluates one new one.
Five iterations therefore cost eight fits, and the set of interior points
reachable over all comparison outcomes is fixed in advance, which is what
lets the basis cache be enumerated at startup.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, List, Optional, Tuple

__all__ = ["GssResult", "NoFeasibleFit", "gss", "reachable_frequencies", "INV_PHI"]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0      # 0.618...


class NoFeasibleFit(RuntimeError):
    """No evaluated frequency produced a feasible fit."""

    def __init__(self, evaluations):
        super().__init__("no feasible fit among the evaluated frequencies")
        self.evaluations = evaluations


@dataclasses.dataclass(frozen=True)
class GssResult:
    fit: object
    f: float
    residual: float
    evaluations: tuple            # (f, residual, feasible) in evaluation order
    interval: Tuple[float, float]
    stopped_early: bool


def _interior(a: float, b: float) -> Tuple[float, float]:
    w = b - a
    return b - INV_PHI * w, a + INV_PHI * w


def _shrink_left(a: float, c: float, d: float) -> Tuple[float, float, float, float]:
    """Keep ``[a, d]``; old ``c`` becomes the upper interior point."""
    return a, d, d - INV_PHI * (d - a), c


def _shrink_right(c: float, d: float, b: float) -> Tuple[float, float, float, float]:
    """Keep ``[c, b]``; old ``d`` becomes the lower interior point."""
    return c, b, d, c + INV_PHI * (b - c)


def gss(objective: Callable[[float], tuple], f_lb: float, f_ub: float,
        iterations: int = 5) -> GssResult:
    """Minimise a residual over ``[f_lb, f_ub]``.

    Parameters
    ----------
    objective : callable
        ``objective(f) -> (fit, residual, feasible)``.
    iterations : int
        Number of comparisons (contractions).

    Returns
    -------
    GssResult
        The evaluated frequency with the smallest feasible residual.

    Raises
    ------
    NoFeasibleFit
        If every evaluation was infeasible.

    Notes
    -----
    When the smaller-residual interior point is infeasible the interval is
    contracted towards the feasible one; when both are infeasible the
    search stops.
    """
    if not f_lb < f_ub:
        raise ValueError("need f_lb < f_ub")
    if iterations < 1:
        raise ValueError("at least one iteration is required")
    evals: List[tuple] = []
    memo = {}

    def ev(f):
        if f not in memo:
            fit, rho, ok = objective(f)
            memo[f] = (fit, float(rho), bool(ok))
            evals.append((f, float(rho), bool(ok)))
        return memo[f]

    a, b = f_lb, f_ub
    c, d = _interior(a, b)
    ev(a)
    ev(b)
    stopped = False
    for _ in range(iterations):
        _, rc, okc = ev(c)
        _, rd, okd = ev(d)
        if not okc and not okd:
            stopped = True
            break
        left = rc <= rd
        if left and not okc:
            left = False
        elif not left and not okd:
            left = True
        if left:
            a, b, c, d = _shrink_left(a, c, d)
        else:
            a, b, c, d = _shrink_right(c, d, b)
    best = None
    for f, rho, ok in evals:
        if ok and (best is None or rho < best[1]):
            best = (f, rho)
    if best is None:
        raise NoFeasibleFit(tuple(evals))
    return GssResult(memo[best[0]][0], best[0], best[1], tuple(evals), (a, b), stopped)


def reachable_frequencies(f_lb: float, f_ub: float, iterations: int = 5) -> List[float]:
    """Interior evaluation slots over every comparison outcome.

    The first iteration contributes two points and each later iteration one
    new point per branch, so there are ``2**iterations`` slots.  Values
    repeat across branches; the bracket ends (always evaluated) are not
    included.  Slots are computed with the same arithmetic as :func:`gss`.
    """
    out: List[float] = []

    def walk(a, b, c, d, level, fresh):
        out.extend(fresh)
        if level == iterations:
            return
        na, nb, nc, nd = _shrink_left(a, c, d)
        walk(na, nb, nc, nd, level + 1, [nc])
        na, nb, nc, nd = _shrink_right(c, d, b)
        walk(na, nb, nc, nd, level + 1, [nd])

    c, d = _interior(f_lb, f_ub)
    # the last contraction produces points that are never evaluated
    walk(f_lb, f_ub, c, d, 1, [c, d])
    return out
