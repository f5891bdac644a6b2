"""Service combinations and the caching / computing decision variables.

Services are indexed 0..N-1 internally. A combination is a sorted K-tuple of
service indices; the full index orders them lexicographically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasibleError, InvalidConfigError

EQ_TOL = 1e-9
MAX_ENUMERATE = 5_000_000


class CombinationIndex:
    """All C(N, K) service combinations in lexicographic order.

    Attributes
    ----------
    combos : (J, K) int array, row j lists the members of combination j.
    j_of_n : list of int arrays, the combinations containing each service.
    """

    def __init__(self, n_services, cache_size):
        if not 1 <= cache_size <= n_services:
            raise InvalidConfigError(f"need 1 <= K <= N, got K={cache_size}, N={n_services}")
        n_combos = math.comb(n_services, cache_size)
        if n_combos > MAX_ENUMERATE:
            raise InvalidConfigError(f"C({n_services},{cache_size}) = {n_combos} combinations is too many to enumerate")
        self.n_services = n_services
        self.cache_size = cache_size
        self.combos = np.array(list(itertools.combinations(range(n_services), cache_size)), dtype=np.int64)
        self.combos.setflags(write=False)
        flat = self.combos.ravel()
        rows = np.repeat(np.arange(len(self.combos)), cache_size)
        order = np.argsort(flat, kind="stable")
        splits = np.cumsum(np.bincount(flat, minlength=n_services))[:-1]
        self.j_of_n = np.split(rows[order], splits)
        self._pos = None

    def __len__(self):
        return len(self.combos)

    def n_of_j(self, j):
        return self.combos[j]

    def position(self, combo):
        """Index j of a combination given as an iterable of service indices."""
        if self._pos is None:
            self._pos = {tuple(c): j for j, c in enumerate(self.combos.tolist())}
        return self._pos[tuple(sorted(int(c) for c in combo))]


def enumerate_combinations(n_services, cache_size):
    return CombinationIndex(n_services, cache_size)


def _frozen(x, dtype=float):
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CachingDistribution:
    """Probabilities over a list of combinations (not necessarily all of them).

    ``combos`` is (M, K) and ``probs`` is (M,). Combinations outside the list
    have probability zero, which lets large instances stay sparse.
    """

    combos: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        combos = np.sort(np.atleast_2d(np.asarray(self.combos, dtype=np.int64)), axis=1)
        object.__setattr__(self, "combos", _frozen(combos, np.int64))
        object.__setattr__(self, "probs", _frozen(np.atleast_1d(self.probs)))
        if len(self.probs) != len(self.combos):
            raise InvalidConfigError("one probability per combination is required")

    @classmethod
    def from_dense(cls, a, index):
        return cls(index.combos, a)

    @property
    def cache_size(self):
        return self.combos.shape[1]

    def support(self, tol=0.0):
        """Copy restricted to combinations with probability above ``tol``."""
        keep = self.probs > tol
        return CachingDistribution(self.combos[keep], self.probs[keep])

    def dense(self, index):
        a = np.zeros(len(index))
        for c, p in zip(self.combos.tolist(), self.probs):
            a[index.position(c)] += p
        return a


@dataclass(frozen=True, eq=False)
class ComputingAllocation:
    """CPU shares b_{n,j}: row m of ``shares`` splits combination ``combos[m]``."""

    combos: np.ndarray
    shares: np.ndarray

    def __post_init__(self):
        combos = np.atleast_2d(np.asarray(self.combos, dtype=np.int64))
        shares = np.atleast_2d(np.asarray(self.shares, dtype=float))
        if combos.shape != shares.shape:
            raise InvalidConfigError("shares must have the same shape as combos")
        order = np.argsort(combos, axis=1, kind="stable")
        object.__setattr__(self, "combos", _frozen(np.take_along_axis(combos, order, 1), np.int64))
        object.__setattr__(self, "shares", _frozen(np.take_along_axis(shares, order, 1)))

    def aligned(self, combos):
        """Shares for the given (M, K) combinations, in that row order."""
        combos = np.sort(np.atleast_2d(combos), axis=1)
        if combos.shape == self.combos.shape and np.array_equal(combos, self.combos):
            return np.asarray(self.shares)
        lookup = {tuple(c): i for i, c in enumerate(self.combos.tolist())}
        try:
            rows = [lookup[tuple(c)] for c in combos.tolist()]
        except KeyError as exc:
            raise InvalidConfigError(f"no computing allocation for combination {exc.args[0]}") from None
        return np.asarray(self.shares)[rows]


def uniform_caching(index):
    return CachingDistribution(index.combos, np.full(len(index), 1.0 / len(index)))


def uniform_allocation(combos):
    combos = np.atleast_2d(combos)
    return ComputingAllocation(combos, np.full(combos.shape, 1.0 / combos.shape[1]))


def t_from_a(dist, n_services):
    """Cache-hit probability T_n: total mass of combinations containing n."""
    k = dist.combos.shape[1]
    return np.bincount(dist.combos.ravel(), weights=np.repeat(dist.probs, k), minlength=n_services)


def check_service_probabilities(t, cache_size, tol=EQ_TOL):
    t = np.asarray(t, dtype=float)
    if np.any(t < -tol) or np.any(t > 1 + tol):
        raise InfeasibleError("service probabilities must lie in [0, 1]")
    if abs(t.sum() - cache_size) > tol * max(1.0, cache_size):
        raise InfeasibleError(f"service probabilities sum to {t.sum():.12g}, expected {cache_size}")
    return np.clip(t, 0.0, 1.0)


def a_from_t(t, cache_size):
    """Caching distribution with hit probabilities ``t`` by block filling.

    The services are laid end to end as segments of length T_n over [0, K),
    the line is folded into K unit columns, and every vertical slice between
    consecutive segment boundaries becomes one combination whose probability
    is the slice width. At most N + 1 combinations are produced.
    """
    t = check_service_probabilities(t, cache_size)
    cum = np.concatenate(([0.0], np.cumsum(t)))
    cum *= cache_size / cum[-1]
    cuts = cum - np.floor(cum)
    cuts[np.isclose(cuts, 1.0, rtol=0, atol=1e-13)] = 0.0
    cuts = np.unique(np.concatenate((cuts[np.abs(cuts) > 1e-13], [0.0, 1.0])))
    width = np.diff(cuts)
    keep = width > 1e-15
    mids = 0.5 * (cuts[:-1] + cuts[1:])[keep]
    width = width[keep]
    cols = np.arange(cache_size)[None, :] + mids[:, None]
    members = np.searchsorted(cum, cols, side="right") - 1
    members = np.clip(members, 0, len(t) - 1)
    merged = {}
    for row, w in zip(np.sort(members, axis=1).tolist(), width):
        if len(set(row)) != cache_size:
            raise InfeasibleError("block filling produced a repeated service; T is not feasible")
        merged[tuple(row)] = merged.get(tuple(row), 0.0) + w
    combos = np.array(list(merged), dtype=np.int64).reshape(-1, cache_size)
    probs = np.array(list(merged.values()))
    return CachingDistribution(combos, probs / probs.sum())
