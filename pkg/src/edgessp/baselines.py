"""Reference caching and computing schemes used for comparison."""

from __future__ import annotations

import numpy as np

from .combinations import (
    CachingDistribution,
    ComputingAllocation,
    a_from_t,
    enumerate_combinations,
)
from .constants import derive_constants
from .coverage import arrival_rate
from .exceptions import InfeasibleError
from .sca import Algorithm1, _Combos


def popularity_shares(combos, p):
    """b_{n,j} = p_n / sum_{m in j} p_m (uniform when the combination has no mass)."""
    w = np.asarray(p)[combos]
    tot = w.sum(axis=1, keepdims=True)
    k = combos.shape[1]
    return np.where(tot > 0, w / np.where(tot > 0, tot, 1.0), 1.0 / k)


def _with_popularity_shares(dist, cfg):
    return dist, ComputingAllocation(dist.combos, popularity_shares(dist.combos, cfg.popularity_arr))


def ucps(cfg, index=None):
    """Uniform caching over all combinations, popularity-proportional shares."""
    index = index or enumerate_combinations(cfg.n_services, cfg.cache_size)
    m = len(index)
    return _with_popularity_shares(CachingDistribution(index.combos, np.full(m, 1.0 / m)), cfg)


def proportional_t(p, cache_size):
    """T proportional to popularity, capped at 1, summing to K.

    Mass above the cap is handed to the uncapped services in proportion to
    their popularity, or evenly if they have none.
    """
    p = np.asarray(p, dtype=float)
    n = len(p)
    t = np.zeros(n)
    capped = np.zeros(n, dtype=bool)
    while True:
        left = cache_size - capped.sum()
        free = ~capped
        w = p[free]
        share = w / w.sum() * left if w.sum() > 0 else np.full(free.sum(), left / free.sum())
        t[free] = share
        t[capped] = 1.0
        over = free & (t > 1.0)
        if not np.any(over):
            return np.clip(t, 0.0, 1.0)
        capped |= over


def gcps(cfg):
    """Caching probabilities proportional to popularity, popularity-proportional shares."""
    return _with_popularity_shares(a_from_t(proportional_t(cfg.popularity_arr, cfg.cache_size), cfg.cache_size), cfg)


def downlink_optimal_t(p, const, cache_size, tol=1e-14):
    """T maximizing sum_n p_n T_n / (D_n T_n + C_n) over the capped simplex.

    The objective is concave and separable, so the optimum solves
    p C / (D T + C)^2 = nu on the uncapped services; nu is found by bisection.
    """
    p = np.asarray(p, dtype=float)
    C, D = const.C, const.D
    if np.any(C <= 0):
        return proportional_t(p, cache_size)

    def t_of(nu):
        return np.clip((np.sqrt(p * C / nu) - C) / D, 0.0, 1.0)

    lo, hi = 1e-300, np.max(p / C) * 2 + 1.0  # t_of(hi) = 0
    for _ in range(2000):
        mid = np.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
        if t_of(mid).sum() > cache_size:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    t = t_of(hi)
    gap = cache_size - t.sum()
    inner = (t > 0) & (t < 1)
    if inner.any():
        t[inner] += gap / inner.sum()
    return np.clip(t, 0.0, 1.0)


def tcps(cfg, const=None):
    """Caching probabilities maximizing popularity-weighted downlink success."""
    const = const or derive_constants(cfg)
    t = downlink_optimal_t(cfg.popularity_arr, const, cfg.cache_size)
    return _with_popularity_shares(a_from_t(t, cfg.cache_size), cfg)


def top_k_combination(p, cache_size):
    """Indices of the K most popular services, ties to the lowest index."""
    return np.sort(np.argsort(-np.asarray(p), kind="stable")[:cache_size])


def pcos(cfg, case, const=None, **solver_kw):
    """Cache the K most popular services; optimize shares with a fixed."""
    combo = top_k_combination(cfg.popularity_arr, cfg.cache_size)[None, :]
    solver = Algorithm1(cfg, case, index=_Combos(combo), freeze_a=True, const=const, **solver_kw)
    a0 = np.ones(1)
    lam = arrival_rate(solver.obj.t(a0), solver.const)[combo]
    mu = solver.const.mu[combo]
    room = 1.0 - np.sum(lam / mu)
    if room <= 0:
        raise InfeasibleError("the most popular combination cannot be served stably")
    res = solver.run(a0, (lam + room * mu / cfg.cache_size) / mu)
    return res.caching, res.allocation


BASELINES = {"ucps": ucps, "gcps": gcps, "tcps": tcps, "pcos": pcos}


def baseline(name, cfg, case="rt", const=None):
    """Dispatch by name; returns (CachingDistribution, ComputingAllocation)."""
    name = name.lower()
    if name == "ucps":
        return ucps(cfg)
    if name == "gcps":
        return gcps(cfg)
    if name == "tcps":
        return tcps(cfg, const)
    if name == "pcos":
        return pcos(cfg, case, const)
    raise ValueError(f"unknown baseline {name!r}")
