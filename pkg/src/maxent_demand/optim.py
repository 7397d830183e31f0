"""Limited-memory quasi-Newton minimizer with optional L1 term (OWL-QN).

Minimizes ``f(x) + l1 * sum_i |x_i - center_i|`` for a smooth convex ``f``.
With ``l1 == 0`` this is plain L-BFGS with a backtracking line search.
Coordinates outside ``free`` are held fixed.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    pg_norm: float
    n_iter: int
    converged: bool
    message: str
    history: list[float] = field(default_factory=list)


def _pseudo_gradient(g, y, l1):
    if l1 == 0:
        return g.copy()
    pg = np.where(y > 0, g + l1, np.where(y < 0, g - l1, 0.0))
    at_zero = y == 0
    pg = np.where(at_zero & (g + l1 < 0), g + l1, pg)
    pg = np.where(at_zero & (g - l1 > 0), g - l1, pg)
    return pg


def _two_loop(pg, pairs):
    q = pg.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * s.dot(q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= s.dot(y) / y.dot(y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * y.dot(q)
        q += (a - b) * s
    return -q


def minimize(fun: Callable[[np.ndarray], tuple[float, np.ndarray]], x0, *, l1: float = 0.0,
             center=None, free=None, grad_tol: float = 1e-8, max_iter: int = 500,
             memory: int = 10, c1: float = 1e-4, f_noise: float = 1e-12) -> OptimResult:
    """Minimize with L-BFGS / OWL-QN.

    Args:
        fun: returns the smooth objective value and its gradient; may return
            ``inf`` outside its domain (the line search backs off).
        l1: weight of the L1 term.
        center: point the L1 term is measured from (defaults to zero).
        free: boolean mask of coordinates to optimize.
        grad_tol: stop when the sup-norm of the (pseudo-)gradient is below it.
        f_noise: relative size of rounding noise in ``fun``.  A step whose
            value rises by no more than this is still accepted if it reduces
            the gradient norm; without it the last digits of a tight
            ``grad_tol`` are unreachable.

    Returns:
        OptimResult; ``history`` holds the objective at every accepted iterate.
    """
    x = np.array(x0, float)
    n = x.size
    center = np.zeros(n) if center is None else np.asarray(center, float)
    free = np.ones(n, bool) if free is None else np.asarray(free, bool)

    def total(xv):
        f, g = fun(xv)
        if not np.isfinite(f):
            return np.inf, g
        return f + l1 * np.abs(xv - center)[free].sum(), g

    F, g = total(x)
    if not np.isfinite(F):
        raise ValueError("objective is not finite at the starting point")
    g = np.where(free, g, 0.0)
    pg = np.where(free, _pseudo_gradient(g, x - center, l1), 0.0)
    pairs: deque = deque(maxlen=memory)
    history = [F]
    message = "maximum iterations reached"
    converged = False
    it = 0
    while True:
        pg_norm = float(np.max(np.abs(pg))) if n else 0.0
        if pg_norm <= grad_tol:
            converged, message = True, "gradient tolerance reached"
            break
        if it >= max_iter:
            break
        it += 1
        direction = _two_loop(pg, list(pairs))
        if l1 > 0:
            direction = np.where(np.sign(direction) == np.sign(-pg), direction, 0.0)
        direction = np.where(free, direction, 0.0)
        if direction.dot(pg) >= 0:
            pairs.clear()
            direction = -pg
        y0 = x - center
        orthant = np.where(y0 != 0, np.sign(y0), np.sign(-pg))
        t = 1.0 if pairs else min(1.0, 1.0 / np.linalg.norm(pg))
        accepted = False
        for _ in range(60):
            x_new = x + t * direction
            if l1 > 0:
                y_new = x_new - center
                x_new = np.where(np.sign(y_new) == orthant, x_new, center)
                x_new = np.where(free, x_new, x)
            F_new, g_new = total(x_new)
            if np.isfinite(F_new):
                g_new = np.where(free, g_new, 0.0)
                decrease = pg.dot(x_new - x)
                if F_new <= F + c1 * decrease:
                    accepted = True
                    break
                pg_new = np.where(free, _pseudo_gradient(g_new, x_new - center, l1), 0.0)
                if (F_new <= F + f_noise * (1 + abs(F))
                        and np.max(np.abs(pg_new)) < pg_norm):
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if pairs:
                pairs.clear()
                continue
            message = "line search failed"
            break
        s = x_new - x
        yv = g_new - g
        sy = s.dot(yv)
        if sy > 1e-12 * np.sqrt(s.dot(s) * yv.dot(yv)):
            pairs.append((s, yv, 1.0 / sy))
        x, F, g = x_new, F_new, g_new
        pg = np.where(free, _pseudo_gradient(g, x - center, l1), 0.0)
        history.append(F)
    return OptimResult(x, F, g, pg_norm, it, converged, message, history)
