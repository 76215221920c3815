"""Derivative-free simplex minimizer.

A plain Nelder-Mead implementation with the standard reflection,
expansion, contraction and shrink moves.  It is deliberately self
contained so that fits are bit-for-bit reproducible: the only state is
the simplex, and termination is by simplex diameter or an evaluation
budget, never by wall clock.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_ALPHA = 1.0  # reflection
_GAMMA = 2.0  # expansion
_BETA = 0.5   # contraction
_SIGMA = 0.5  # shrink

_NONZERO_STEP = 0.05
_ZERO_STEP = 0.00025


@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray
    fun: float
    iterations: int
    evaluations: int
    converged: bool


def initial_simplex(x0: np.ndarray, step: float | None = None) -> np.ndarray:
    """x0 plus one perturbed vertex per coordinate."""
    n = x0.size
    sim = np.tile(x0, (n + 1, 1))
    for i in range(n):
        if step is not None:
            sim[i + 1, i] += step
        elif x0[i] != 0.0:
            sim[i + 1, i] *= 1.0 + _NONZERO_STEP
        else:
            sim[i + 1, i] = _ZERO_STEP
    return sim


def nelder_mead(
    func,
    x0: np.ndarray,
    xtol: float = 1e-9,
    maxfev: int = 50_000,
    step: float | None = None,
) -> MinimizeResult:
    """Minimize func from x0.

    Stops when the simplex diameter (max vertex distance from the best
    vertex, infinity norm) falls below xtol, or after maxfev function
    evaluations.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    sim = initial_simplex(x0, step)
    fsim = np.array([func(v) for v in sim])
    evals = sim.shape[0]
    order = np.argsort(fsim, kind="stable")
    sim = sim[order]
    fsim = fsim[order]
    total = sim.sum(axis=0)
    iterations = 0
    converged = False
    check_every = 4  # diameter test cadence; the stop rule is unchanged

    def replace_worst(x, fx):
        # keep the simplex sorted; only the worst vertex ever leaves
        nonlocal total
        total += x - sim[-1]
        pos = int(np.searchsorted(fsim[:-1], fx, side="right"))
        if pos < n:
            sim[pos + 1 :] = sim[pos:-1].copy()
            fsim[pos + 1 :] = fsim[pos:-1].copy()
        sim[pos] = x
        fsim[pos] = fx

    while evals < maxfev:
        if iterations % check_every == 0 and np.max(np.abs(sim[1:] - sim[0])) < xtol:
            converged = True
            break
        iterations += 1

        worst = sim[-1]
        centroid = (total - worst) / n
        xr = 2.0 * centroid - worst  # reflection, _ALPHA = 1
        fr = func(xr)
        evals += 1

        if fr < fsim[0]:
            xe = centroid + _GAMMA * (centroid - worst)
            fe = func(xe)
            evals += 1
            if fe < fr:
                replace_worst(xe, fe)
            else:
                replace_worst(xr, fr)
            continue
        if fr < fsim[-2]:
            replace_worst(xr, fr)
            continue

        if fr < fsim[-1]:  # outside contraction
            xc = centroid + _BETA * (xr - centroid)
            fc = func(xc)
            evals += 1
            if fc <= fr:
                replace_worst(xc, fc)
                continue
        else:  # inside contraction
            xc = centroid - _BETA * (centroid - worst)
            fc = func(xc)
            evals += 1
            if fc < fsim[-1]:
                replace_worst(xc, fc)
                continue

        # shrink toward the best vertex
        for i in range(1, n + 1):
            sim[i] = sim[0] + _SIGMA * (sim[i] - sim[0])
            fsim[i] = func(sim[i])
        evals += n
        order = np.argsort(fsim, kind="stable")
        sim = sim[order]
        fsim = fsim[order]
        total = sim.sum(axis=0)

    best = int(np.argmin(fsim))
    return MinimizeResult(sim[best].copy(), float(fsim[best]), iterations, evals, converged)


def minimize_adaptive(
    func,
    x0: np.ndarray,
    xtol: float = 1e-9,
    maxfev: int = 50_000,
    step: float | None = None,
    improvement_tol: float = 1e-9,
) -> MinimizeResult:
    """Nelder-Mead with simplex re-expansion at every collapse.

    In more than a few dimensions a simplex can contract to a point that
    is not a minimizer.  Whenever a run converges, the simplex is rebuilt
    at full size around the best vertex and minimization continues; the
    result is accepted once a fresh simplex converges without improving
    the value by more than improvement_tol relative.  maxfev bounds the
    total evaluation count.
    """
    remaining = maxfev
    x = np.asarray(x0, dtype=float)
    fbest = np.inf
    iterations = evaluations = 0
    converged = False
    while remaining > 0:
        res = nelder_mead(func, x, xtol=xtol, maxfev=remaining, step=step)
        iterations += res.iterations
        evaluations += res.evaluations
        remaining -= res.evaluations
        improved = not np.isfinite(fbest) or (
            res.fun < fbest - improvement_tol * max(1.0, abs(fbest))
        )
        if res.fun < fbest:
            x, fbest = res.x, res.fun
        converged = res.converged
        if not res.converged or not improved:
            break
    return MinimizeResult(x, float(fbest), iterations, evaluations, converged)
