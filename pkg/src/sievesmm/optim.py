"""Derivative-free minimizers: Nelder-Mead simplex and a deterministic
low-discrepancy screening stage for initialization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc


class OptimError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimResult:
    x: np.ndarray
    fun: float
    trace: tuple
    n_eval: int
    converged: bool
    spread: float  # final simplex value spread, the realized numeric budget


def _total(f):
    """Wrap f so NaN sorts like +inf and evaluations are counted."""
    count = [0]

    def g(x):
        count[0] += 1
        v = float(f(np.asarray(x, dtype=float)))
        return np.inf if np.isnan(v) else v

    return g, count


def nelder_mead(f, x0, *, step: float = 0.25, f_tol: float = 1e-10,
                max_evals: int = 2000, restarts: int = 0) -> OptimResult:
    """Simplex search with reflection 1, expansion 2, contraction 0.5,
    shrink 0.5.

    Stops when the spread of simplex values falls below ``f_tol`` or the
    evaluation budget runs out.  ``restarts`` re-seeds a fresh simplex at the
    incumbent best after each convergence.  Ties in the vertex ordering keep
    insertion order (stable sort), so runs are reproducible.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.ndim != 1:
        raise OptimError("x0 must be a vector")
    if step <= 0 or f_tol <= 0 or max_evals < 1:
        raise OptimError("step, f_tol and max_evals must be positive")
    g, count = _total(f)
    f0 = g(x0)
    if not np.isfinite(f0):
        raise OptimError("objective is not finite at the starting point")

    d = x0.size
    order = [0]  # insertion counter for stable ties

    def new_vertex(fx, x):
        order[0] += 1
        return [fx, order[0], x]

    def init_simplex(center, fc):
        verts = [new_vertex(fc, center.copy())]
        for i in range(d):
            xi = center.copy()
            xi[i] += step * max(1.0, abs(center[i]))
            verts.append(new_vertex(g(xi), xi))
        return verts

    best_x, best_f = x0.copy(), f0
    trace = [f0]
    converged = False
    spread = math.inf
    for round_ in range(restarts + 1):
        simplex = init_simplex(best_x, best_f)
        while True:
            simplex.sort(key=lambda v: (v[0], v[1]))
            fb = simplex[0][0]
            if fb < best_f:
                best_f, best_x = fb, simplex[0][2].copy()
            trace.append(min(trace[-1], fb))
            spread = simplex[-1][0] - fb
            if np.isfinite(spread) and spread < f_tol:
                converged = True
                break
            if count[0] >= max_evals:
                break
            centroid = np.mean([v[2] for v in simplex[:-1]], axis=0)
            worst = simplex[-1]
            xr = centroid + (centroid - worst[2])
            fr = g(xr)
            if fr < simplex[0][0]:
                xe = centroid + 2.0 * (xr - centroid)
                fe = g(xe)
                simplex[-1] = new_vertex(fe, xe) if fe < fr else new_vertex(fr, xr)
            elif fr < simplex[-2][0]:
                simplex[-1] = new_vertex(fr, xr)
            else:
                if fr < worst[0]:
                    xc = centroid + 0.5 * (xr - centroid)
                    fc = g(xc)
                    accept, fa, xa = fc <= fr, fc, xc
                else:
                    xc = centroid + 0.5 * (worst[2] - centroid)
                    fc = g(xc)
                    accept, fa, xa = fc < worst[0], fc, xc
                if accept:
                    simplex[-1] = new_vertex(fa, xa)
                else:
                    xb = simplex[0][2]
                    for j in range(1, d + 1):
                        xs = xb + 0.5 * (simplex[j][2] - xb)
                        simplex[j] = new_vertex(g(xs), xs)
            if count[0] >= max_evals:
                simplex.sort(key=lambda v: (v[0], v[1]))
                if simplex[0][0] < best_f:
                    best_f, best_x = simplex[0][0], simplex[0][2].copy()
                trace.append(min(trace[-1], simplex[0][0]))
                break
        if count[0] >= max_evals:
            break
    return OptimResult(x=best_x, fun=best_f, trace=tuple(trace),
                       n_eval=count[0], converged=converged, spread=float(spread))


def direct_search(f, bounds, budget: int) -> np.ndarray:
    """Pick the best point from the box center plus a Sobol scan of the box.

    Deterministic for a given (bounds, budget); budget 1 returns the center
    untested against anything else.
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise OptimError("bounds must be a sequence of (low, high) pairs")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if not (np.all(np.isfinite(bounds)) and np.all(hi > lo)):
        raise OptimError("screening needs a finite box with high > low")
    if budget < 1:
        raise OptimError("budget must be >= 1")
    g, _ = _total(f)
    center = 0.5 * (lo + hi)
    best_x, best_f = center, g(center)
    if budget > 1:
        eng = qmc.Sobol(d=bounds.shape[0], scramble=False)
        eng.fast_forward(1)  # drop the all-zero corner point
        u = eng.random(budget - 1)
        for row in lo + u * (hi - lo):
            fr = g(row)
            if fr < best_f:
                best_f, best_x = fr, row
    return np.asarray(best_x, dtype=float)
