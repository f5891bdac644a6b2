"""Constraint report for caching, hit-probability and computing variables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .combinations import CachingDistribution, ComputingAllocation, t_from_a
from .constants import derive_constants
from .coverage import arrival_rate

EQ_TOL = 1e-9
INEQ_TOL = -1e-12


@dataclass(frozen=True)
class Violation:
    constraint: str
    residual: float
    where: tuple = ()

    def __str__(self):
        loc = f" at {self.where}" if self.where else ""
        return f"{self.constraint}{loc}: residual {self.residual:.3g}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)
    checked: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def names(self):
        return sorted({v.constraint for v in self.violations})

    def __str__(self):
        if self.ok:
            return "all constraints satisfied (" + ", ".join(self.checked) + ")"
        return "\n".join(str(v) for v in self.violations)


def _check_a(a, rep):
    probs = np.asarray(a.probs)
    rep.checked += ["a_nonneg", "a_sum"]
    for j in np.flatnonzero(probs < INEQ_TOL):
        rep.violations.append(Violation("a_nonneg", float(probs[j]), (int(j),)))
    gap = abs(float(probs.sum()) - 1.0)
    if gap > EQ_TOL:
        rep.violations.append(Violation("a_sum", gap))


def _check_t(t, k, rep):
    rep.checked += ["t_bounds", "t_sum"]
    for n in np.flatnonzero((t < INEQ_TOL) | (t > 1 - INEQ_TOL)):
        rep.violations.append(Violation("t_bounds", float(max(-t[n], t[n] - 1)), (int(n),)))
    gap = abs(float(t.sum()) - k)
    if gap > EQ_TOL * max(1, k):
        rep.violations.append(Violation("t_sum", gap))


def _check_b(b, rep):
    rep.checked += ["b_nonneg", "b_sum"]
    s = np.asarray(b.shares)
    for j, i in zip(*np.nonzero(s < INEQ_TOL)):
        rep.violations.append(Violation("b_nonneg", float(s[j, i]), (int(b.combos[j, i]), int(j))))
    gaps = np.abs(s.sum(axis=1) - 1.0)
    for j in np.flatnonzero(gaps > EQ_TOL):
        rep.violations.append(Violation("b_sum", float(gaps[j]), (int(j),)))


def validate(cfg, a=None, t=None, b=None, const=None):
    """Check whichever of a, T and b are given against the model constraints.

    With both a and b, every combination carrying probability is also checked
    for queue stability b_{n,j} mu_n >= lambda_n(a).
    """
    rep = ValidationReport()
    if a is not None:
        if not isinstance(a, CachingDistribution):
            raise TypeError("a must be a CachingDistribution")
        _check_a(a, rep)
        t_a = t_from_a(a, cfg.n_services)
        _check_t(t_a, a.cache_size, rep)
    if t is not None:
        _check_t(np.asarray(t, dtype=float), cfg.cache_size, rep)
    if b is not None:
        if not isinstance(b, ComputingAllocation):
            raise TypeError("b must be a ComputingAllocation")
        _check_b(b, rep)
    if a is not None and b is not None:
        rep.checked.append("stability")
        const = const or derive_constants(cfg)
        sup = a.support()
        lam = arrival_rate(t_from_a(sup, cfg.n_services), const)
        shares = b.aligned(sup.combos)
        slack = shares * const.mu[sup.combos] - lam[sup.combos]
        for j, i in zip(*np.nonzero(slack < INEQ_TOL)):
            rep.violations.append(Violation("stability", float(slack[j, i]), (int(sup.combos[j, i]), int(j))))
    return rep
