"""Random feasible designs shared by several test modules."""

import numpy as np

from edgessp import CachingDistribution, ComputingAllocation, enumerate_combinations
from edgessp.coverage import arrival_rate
from edgessp.combinations import t_from_a


def random_design(cfg, const, rng, sparsity=0.5, margin=0.05):
    """Random a over the full index and strictly stable random b, or None if the draw is unstable."""
    idx = enumerate_combinations(cfg.n_services, cfg.cache_size)
    a = rng.dirichlet(np.full(len(idx), 0.3))
    a[rng.random(len(idx)) < sparsity] = 0
    if a.sum() == 0:
        a[rng.integers(len(idx))] = 1
    a /= a.sum()
    dist = CachingDistribution(idx.combos, a)
    t = t_from_a(dist, cfg.n_services)
    lam = arrival_rate(t, const)[idx.combos]
    mu = const.mu[idx.combos]
    floor = lam / mu * (1 + margin)
    room = 1 - floor.sum(axis=1)
    if np.any(room[a > 0] <= 0):
        return None
    extra = rng.dirichlet(np.ones(cfg.cache_size), len(idx)) * np.maximum(room, 0)[:, None]
    b = np.where(room[:, None] > 0, floor + extra, 1.0 / cfg.cache_size)
    return dist, ComputingAllocation(idx.combos, b)
