"""Slow reference solvers used as test oracles."""

import numpy as np

from edgessp.projection import project_bounded_simplex


def pg_maximize(f, grad, x0, lower, iters=20000, step=1e-2):
    """Projected gradient ascent with backtracking on {x >= lower, sum x = 1}."""
    x = project_bounded_simplex(x0, lower)
    fx = f(x)
    for _ in range(iters):
        g = grad(x)
        t = step
        while True:
            y = project_bounded_simplex(x + t * g, lower)
            fy = f(y)
            if fy >= fx + 0.25 * g @ (y - x) or t < 1e-16:
                break
            t *= 0.5
        if np.max(np.abs(y - x)) < 1e-15:
            break
        x, fx = y, fy
        step = t * 2
    return x, fx
