"""Derivative-free minimization of convex, possibly nonsmooth, functions of a 2-vector."""

import numpy as np
from scipy.optimize import minimize

from .errors import OptimizationError


def minimize_convex_2d(fun, x_start, scale, tol=1e-10, max_iter=500, restarts=6,
                       grid_fallback=True, seed=0):
    """Nelder-Mead with restarts from the incumbent.

    Restarting with a fresh simplex is what makes Nelder-Mead reliable on
    kinked objectives such as sums of absolute values of affine functions.
    Returns ``(x_best, f_best)``.
    """
    x_best = np.asarray(x_start, dtype=float).copy()
    f_best = float(fun(x_best))
    step = float(scale)
    rng = np.random.default_rng(seed)
    converged = False
    for attempt in range(restarts):
        simplex = _simplex(x_best, step, rng if attempt else None)
        res = minimize(fun, x_best, method="Nelder-Mead",
                       options={"xatol": tol, "fatol": tol, "maxiter": max_iter,
                                "initial_simplex": simplex})
        gain = f_best - float(res.fun)
        if res.fun < f_best:
            x_best, f_best = np.array(res.x, dtype=float), float(res.fun)
        if res.success and gain <= tol * max(1.0, abs(f_best)):
            converged = True
            break
        step = max(step * 0.25, 1e3 * tol)
    if not converged and grid_fallback:
        xs = np.linspace(-scale, scale, 21)
        best = (f_best, x_best)
        for dx in xs:
            for dy in xs:
                cand = x_best + np.array([dx, dy])
                val = float(fun(cand))
                if val < best[0]:
                    best = (val, cand)
        f_grid, x_grid = best
        res = minimize(fun, x_grid, method="Nelder-Mead",
                       options={"xatol": tol, "fatol": tol, "maxiter": max_iter,
                                "initial_simplex": _simplex(x_grid, scale / 10, None)})
        if res.fun <= f_grid:
            x_best, f_best = np.array(res.x, dtype=float), float(res.fun)
        converged = bool(res.success)
    if not converged:
        raise OptimizationError(
            f"Nelder-Mead did not converge within {max_iter} iterations",
            best_x=x_best, best_value=f_best)
    return x_best, f_best


def _simplex(x, step, rng):
    if rng is None:
        offsets = np.array([[0.0, 0.0], [step, 0.0], [0.0, step]])
    else:
        angle = rng.uniform(0, 2 * np.pi)
        c, s = np.cos(angle), np.sin(angle)
        offsets = np.array([[0.0, 0.0], [c * step, s * step], [-s * step, c * step]])
    return x[None, :] + offsets
