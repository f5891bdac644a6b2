"""Near-optimal design from the infinite-capability limit.

The asymptotic SSP depends on the caching design only through T and is convex
in T, so it is maximized at a vertex of the capped simplex by iterated
linearization. Combinations that cannot carry mass at that T are pruned, and
the computing shares (and, for non-binary T, the caching distribution over
the surviving combinations) are then optimized at the fixed T.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .combinations import CachingDistribution, ComputingAllocation, check_service_probabilities
from .constants import derive_constants
from .exceptions import InfeasibleError, InvalidConfigError
from .lp import solve_lp
from .projection import project_bounded_simplex
from .queueing import scpp_dt_approx, scpp_dt_approx_grad
from .sca import StepSchedule
from .ssp import asymptotic_gradient, asymptotic_ssp, check_case, closed_form_weight

BINARY_TOL = 1e-9
DT_TOL = 1e-10  # squared-step tolerance for the fixed-T DT loop


# ---------------------------------------------------------------------------
# service probabilities


def cccp_linearize(t, const):
    """Gradient of the asymptotic SSP at ``t``."""
    return asymptotic_gradient(t, const)


def cccp_step(g, cache_size):
    """Vertex maximizing g'T over the capped simplex: the K largest entries.

    Ties go to the lowest index.
    """
    g = np.asarray(g, dtype=float)
    top = np.argsort(-g, kind="stable")[:cache_size]
    t = np.zeros(len(g))
    t[top] = 1.0
    return t


def run_cccp(cfg, const=None, t0=None, max_iter=100):
    """Iterate the linearized vertex step from T0 = K/N until T is a fixed point.

    Returns (T*, history of asymptotic SSP values).
    """
    const = const or derive_constants(cfg)
    n, k = cfg.n_services, cfg.cache_size
    t = np.full(n, k / n) if t0 is None else check_service_probabilities(t0, k)
    history = [asymptotic_ssp(t, cfg, const)]
    for _ in range(max_iter):
        nxt = cccp_step(cccp_linearize(t, const), k)
        moved = float(np.sum((nxt - t) ** 2))
        t = nxt
        history.append(asymptotic_ssp(t, cfg, const))
        if moved == 0.0:
            break
    return t, history


# ---------------------------------------------------------------------------
# pruning


@dataclass(frozen=True, eq=False)
class PrunedIndex:
    """Combinations that may carry probability at the given T."""

    active: np.ndarray
    n_excluded: int
    n_total: int


def prune(t, cache_size, max_active=200_000):
    """Drop combinations holding a service with T = 0 or missing one with T = 1."""
    t = np.asarray(t, dtype=float)
    n = len(t)
    ones = np.flatnonzero(t >= 1 - BINARY_TOL)
    free = np.flatnonzero((t > BINARY_TOL) & (t < 1 - BINARY_TOL))
    need = cache_size - len(ones)
    total = math.comb(n, cache_size)
    if need < 0 or need > len(free):
        raise InfeasibleError("service probabilities leave no admissible combination")
    count = math.comb(len(free), need)
    if count > max_active:
        raise InvalidConfigError(f"{count} active combinations remain after pruning; too many to optimize")
    rows = [sorted(ones.tolist() + list(c)) for c in itertools.combinations(free.tolist(), need)]
    active = np.array(rows, dtype=np.int64).reshape(-1, cache_size)
    return PrunedIndex(active, total - len(active), total)


# ---------------------------------------------------------------------------
# arrival load used at fixed T


def lambda_star(t, const, form="printed"):
    """Arrival rate used at fixed T.

    'printed' is (T + C) / (T + A) with C the downlink interference constant;
    'arrival' is the mean-users form (T + c_n) / (T + A).
    """
    t = np.asarray(t, dtype=float)
    if form == "printed":
        return (t + const.C) / (t + const.A)
    if form == "arrival":
        return (t + const.c_load) / (t + const.A)
    raise InvalidConfigError("lambda form must be 'printed' or 'arrival'")


# ---------------------------------------------------------------------------
# random service times: closed-form shares and master LP


def rt_weights(t, const, denominator="printed"):
    """p T / (D T^2 + E T + last), last = A^2 ('printed') or A*C ('consistent')."""
    last = const.A if denominator == "printed" else const.C
    return closed_form_weight(t, const, last)


def rt_closed_form_b(t, combos, const, lam_star, denominator="printed"):
    """Shares minimizing sum_n w_n exp(-(b mu - lambda*) gamma) on each combination.

    b_n = (1/J_n)[log(J_n w_n / zeta) + lambda*_n gamma_n] with the multiplier
    zeta fixed by sum_n b_n = 1. If a share falls below lambda*/mu the lower
    bound is made active and zeta is found by bisection instead.

    Returns (b, log zeta, clipped flags, optimal values Q_j).
    """
    combos = np.atleast_2d(combos)
    c = const
    J = c.J[combos]
    w = rt_weights(t, c, denominator)[combos]
    if np.any(w <= 0):
        raise InfeasibleError("every service in an active combination must have T > 0")
    lam = np.asarray(lam_star)[combos]
    g = c.gamma_q[combos]
    lower = lam * g / J
    if np.any(lower.sum(axis=1) > 1):
        raise InfeasibleError("arrival load exceeds capacity in an active combination")
    inv = 1.0 / J
    log_jw = np.log(J * w)
    log_zeta = (np.sum(inv * (lam * g + log_jw), axis=1) - 1.0) / inv.sum(axis=1)
    b = inv * (log_jw - log_zeta[:, None] + lam * g)
    clipped = np.any(b <= lower, axis=1)
    for i in np.flatnonzero(clipped):
        b[i], log_zeta[i] = _water_fill(log_jw[i], J[i], lower[i])
    value = -np.sum(w * np.exp(-(b - lower) * J), axis=1)
    return b, log_zeta, clipped, value


def _water_fill(log_jw, J, lower):
    """b = lower + max(0, (log(J w) - log zeta) / J) with sum b = 1."""
    room = 1.0 - lower.sum()

    def total(lz):
        return np.sum(np.maximum(0.0, (log_jw - lz) / J))

    hi = log_jw.max()
    lo = hi - 1.0
    while total(lo) < room:
        lo -= 2 * (hi - lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) > room:
            lo = mid
        else:
            hi = mid
    lz = 0.5 * (lo + hi)
    extra = np.maximum(0.0, (log_jw - lz) / J)
    extra *= room / extra.sum()
    return lower + extra, lz


def coupling_constraints(active, t):
    """Rows sum_{j containing n} a_j = T_n over the active combinations."""
    n = len(t)
    A = np.zeros((n, len(active)))
    for j, row in enumerate(active):
        A[row, j] = 1.0
    return A, np.asarray(t, dtype=float)


def rt_master_lp(t, active, q_values):
    """Caching distribution over ``active`` maximizing sum_j Q_j a_j at fixed T."""
    if len(active) == 1:
        A, rhs = coupling_constraints(active, t)
        if np.max(np.abs(A[:, 0] - rhs)) > 1e-9:
            raise InfeasibleError("the single active combination does not reproduce T")
        n_in = active[0]
        duals = np.zeros(len(t))
        duals[n_in[0]] = q_values[0]
        return np.ones(1), duals, 0.0
    A, rhs = coupling_constraints(active, t)
    res = solve_lp(q_values, A, rhs)
    return res.x, res.duals, res.duality_gap(rhs)


# ---------------------------------------------------------------------------
# Algorithm 3


@dataclass
class NearOptimalResult:
    combos: np.ndarray
    a: np.ndarray
    b: np.ndarray
    t_star: np.ndarray
    trace: list = field(default_factory=list)
    duals: np.ndarray | None = None
    duality_gap: float = 0.0
    clipped: bool = False
    converged: bool = True
    cccp_history: list = field(default_factory=list)

    @property
    def caching(self):
        return CachingDistribution(self.combos, self.a)

    @property
    def allocation(self):
        return ComputingAllocation(self.combos, self.b)

    @property
    def iterations(self):
        return len(self.trace)

    @property
    def grad_norm(self):
        return self.trace[-1][2] if self.trace else 0.0


class DtFixedT:
    """DT objective over active combinations at fixed T and load lambda*."""

    def __init__(self, cfg, const, t, active, lam_star):
        self.cfg = cfg
        self.const = const
        self.active = active
        self.w = closed_form_weight(t, const)[active]  # p T / (D T^2 + E T + AC)
        self.lam = np.asarray(lam_star)[active]
        self.mu = const.mu[active]
        self.gamma = const.gamma_q[active]
        self.lower = self.lam / self.mu

    def per_combo(self, b):
        return np.sum(self.w * scpp_dt_approx(b, self.lam, self.mu, self.gamma, self.cfg.sigmoid_delta), axis=1)

    def value(self, a, b):
        return float(a @ self.per_combo(b))

    def b_gradient(self, b):
        _, d_b, _ = scpp_dt_approx_grad(b, self.lam, self.mu, self.gamma, self.cfg.sigmoid_delta)
        return self.w * d_b


def dt_a_lp_step(model, b, t):
    """LP candidate for a at fixed shares; returns (a_bar, duals, gap)."""
    coef = model.per_combo(b)
    return rt_master_lp(t, model.active, coef)


def dt_b_qp_step(model, b):
    """Shares maximizing -b'b + (2b + grad)'b over {b >= lambda*/mu, sum b = 1}."""
    return project_bounded_simplex(b + 0.5 * model.b_gradient(b), model.lower)


def run_algorithm3(cfg, case, const=None, lambda_form="printed", denominator="printed",
                   schedule=None, max_iter=5000, tol=None):
    """Near-optimal caching and computing design; returns a NearOptimalResult."""
    case = check_case(case)
    const = const or derive_constants(cfg)
    tol = DT_TOL if tol is None else tol
    t_star, hist = run_cccp(cfg, const)
    pruned = prune(t_star, cfg.cache_size)
    active = pruned.active
    lam = lambda_star(t_star, const, lambda_form)
    if case == "rt":
        b, _, clipped, q = rt_closed_form_b(t_star, active, const, lam, denominator)
        a, duals, gap = rt_master_lp(t_star, active, q)
        return NearOptimalResult(active, a, b, t_star, [], duals, gap, bool(np.any(clipped)), True, hist)

    model = DtFixedT(cfg, const, t_star, active, lam)
    if np.any(model.lower.sum(axis=1) > 1):
        raise InfeasibleError("arrival load exceeds capacity in an active combination")
    schedule = schedule or StepSchedule()
    k = active.shape[1]
    b = model.lower + (1.0 - model.lower.sum(axis=1, keepdims=True)) / k
    a, duals, gap = dt_a_lp_step(model, b, t_star)
    trace = []
    converged = False
    for r in range(1, max_iter + 1):
        a_bar, duals, gap = dt_a_lp_step(model, b, t_star)
        b_hat = dt_b_qp_step(model, b)
        val = model.value(a, b)
        res = float(np.sum((a_bar - a) ** 2) + np.sum((b_hat - b) ** 2))
        if res < tol:
            trace.append((r, val, res, 0.0))
            converged = True
            break
        alpha = schedule(r)
        trace.append((r, val, res, alpha))
        a = a + alpha * (a_bar - a)
        b = b + alpha * (b_hat - b)
    return NearOptimalResult(active, a, b, t_star, trace, duals, gap, False, converged, hist)
