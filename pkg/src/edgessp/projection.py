"""Euclidean projections onto simplices."""

from __future__ import annotations

import numpy as np

from .exceptions import InfeasibleError


def project_simplex(v, total=1.0):
    """Project each row of ``v`` onto {x >= 0, sum x = total}.

    Sort-based threshold rule; a 1-D input is treated as one row.
    """
    v = np.asarray(v, dtype=float)
    one = v.ndim == 1
    x = np.atleast_2d(v)
    if total < 0:
        raise InfeasibleError("simplex total must be nonnegative")
    k = x.shape[1]
    u = -np.sort(-x, axis=1)
    css = np.cumsum(u, axis=1) - total
    ind = np.arange(1, k + 1)
    cond = u - css / ind > 0
    rho = k - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(len(x)), rho] / (rho + 1)
    out = np.maximum(x - tau[:, None], 0.0)
    return out[0] if one else out


def project_bounded_simplex(v, lower, total=1.0):
    """Project onto {x >= lower, sum x = total} by shifting to the plain simplex."""
    v = np.asarray(v, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), v.shape)
    room = total - lower.sum(axis=-1)
    if np.any(room < -1e-12):
        raise InfeasibleError("lower bounds exceed the simplex total")
    room = np.maximum(room, 0.0)
    if v.ndim == 1:
        return lower + project_simplex(v - lower, float(room))
    return lower + np.vstack([project_simplex(r - l, float(m)) for r, l, m in zip(v, lower, room)])


def simplex_kkt_residual(x, c, total=1.0):
    """KKT residual of max -x'x + c'x over the simplex (zero at the optimum).

    The gradient c - 2x must be constant on the support and no larger off it.
    """
    x = np.asarray(x, dtype=float)
    g = np.asarray(c, dtype=float) - 2.0 * x
    on = x > 1e-14
    nu = g[on].mean() if np.any(on) else g.max()
    res = np.abs(g[on] - nu).max(initial=0.0)
    res = max(res, np.maximum(g[~on] - nu, 0.0).max(initial=0.0))
    return max(res, abs(x.sum() - total), max(-x.min(), 0.0))
