"""Parallel successive convex approximation for the barrier-form SSP problem.

Every iteration solves one caching subproblem and one computing subproblem
per combination on the same iterate snapshot, then moves all blocks toward
their candidates with a diminishing step.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .combinations import (
    CachingDistribution,
    CombinationIndex,
    ComputingAllocation,
    enumerate_combinations,
    t_from_a,
)
from .constants import derive_constants
from .coverage import arrival_rate
from .exceptions import BracketError, InfeasibleError, InvalidConfigError
from .projection import project_simplex
from .ssp import DenseObjective, check_case, closed_form_weight


@dataclass(frozen=True)
class StepSchedule:
    """Diminishing step a0 / (1 + r)**exponent."""

    a0: float = 1.0
    exponent: float = 0.8

    def __post_init__(self):
        if self.a0 <= 0 or not 0.5 < self.exponent <= 1:
            raise InvalidConfigError("step schedule needs a0 > 0 and exponent in (0.5, 1]")

    def __call__(self, r):
        return self.a0 / (1.0 + r) ** self.exponent


@dataclass
class IterateState:
    r: int
    a: np.ndarray
    b: np.ndarray
    alpha: float = 0.0
    history: list = field(default_factory=list)


@dataclass
class SolverResult:
    """Solution of an SSP maximization on a list of combinations."""

    combos: np.ndarray
    a: np.ndarray
    b: np.ndarray
    trace: list
    converged: bool
    status: str = "ok"

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
        return self.trace[-1][2] if self.trace else float("nan")


# ---------------------------------------------------------------------------
# computing subproblem, random service times


def g_function(b, coef, lam, mu, gamma, omega):
    """Derivative of the RT computing subproblem in b_{n,j}.

    coef * exp(-(b mu - lam) gamma) + (mu / omega) / (b mu - lam), where
    coef = J_n p_n a_j T_n / (D T^2 + E T + A*last) and J_n = mu gamma.
    """
    s = np.asarray(b, dtype=float) * mu - lam
    with np.errstate(divide="ignore"):
        return np.where(s > 0, coef * np.exp(-gamma * s) + (mu / omega) / np.where(s > 0, s, 1.0), np.inf)


def _inverse_g(u, coef, beta, gamma, iters=200):
    """Slack s > 0 with log(coef e^{-gamma s} + beta/s) = u, elementwise.

    Newton on the convex decreasing log G, started left of the root at
    beta/e^u, converges monotonically.
    """
    s = beta / np.exp(u)
    for _ in range(iters):
        e = coef * np.exp(-gamma * s)
        g = e + beta / s
        psi = np.log(g) - u
        dpsi = (-gamma * e - beta / (s * s)) / g
        step = psi / dpsi
        s = s - step
        if np.all(np.abs(step) <= 1e-13 * s):
            break
    return s


def solve_b_rt(coef, lam, mu, gamma, omega, tol=1e-13):
    """Computing shares maximizing the RT subproblem of each combination.

    Rows of the (M, K) inputs are independent combinations. The optimum has
    G_{n,j}(b) equal to a common multiplier eta_j; eta_j is located by a
    safeguarded Newton/bisection search in log eta so that shares sum to one,
    and each G^{-1} is evaluated by monotone Newton iterations.
    """
    coef, lam, mu, gamma = np.broadcast_arrays(*(np.atleast_2d(np.asarray(x, dtype=float)) for x in (coef, lam, mu, gamma)))
    m, k = coef.shape
    if k == 1:
        return np.ones((m, 1))
    beta = mu / omega
    room = 1.0 - np.sum(lam / mu, axis=1)
    if np.any(room <= 0):
        raise BracketError("arrival load exceeds capacity; no stable split exists")

    def excess(u):
        s = _inverse_g(u[:, None], coef, beta, gamma)
        return np.sum(s / mu, axis=1) - room, s

    # start from the equal-slack split and expand a bracket in log eta
    s0 = room[:, None] * mu / k
    u = np.mean(np.log(coef * np.exp(-gamma * s0) + beta / s0), axis=1)
    f, s = excess(u)
    lo = np.full(m, -np.inf)
    hi = np.full(m, np.inf)
    width = np.ones(m)
    for _ in range(200):
        lo = np.where(f > 0, u, lo)
        hi = np.where(f <= 0, u, hi)
        open_ = ~(np.isfinite(lo) & np.isfinite(hi))
        if not np.any(open_):
            break
        u = np.where(open_, np.where(f > 0, u + width, u - width), u)
        width = np.where(open_, 2 * width, width)
        f, s = excess(u)
    else:
        raise BracketError("could not bracket the computing multiplier")
    for _ in range(200):
        g = coef * np.exp(-gamma * s) + beta / s
        dg = -gamma * coef * np.exp(-gamma * s) - beta / (s * s)
        df = np.sum((g / dg) / mu, axis=1)
        u_new = u - f / df
        bad = ~((u_new > lo) & (u_new < hi)) | ~np.isfinite(u_new)
        u_new = np.where(bad, 0.5 * (lo + hi), u_new)
        u = u_new
        f, s = excess(u)
        lo = np.where(f > 0, u, lo)
        hi = np.where(f <= 0, u, hi)
        if np.all(np.abs(f) <= tol) or np.all(hi - lo <= 1e-15 * np.maximum(1, np.abs(u))):
            break
    # distribute the last rounding error over the slacks
    slack_sum = np.sum(s / mu, axis=1)
    s = s * (room / slack_sum)[:, None]
    return (lam + s) / mu


def rt_subproblem_objective(b, coef, lam, mu, gamma, omega):
    """Concave objective whose b-gradient is :func:`g_function` (per row)."""
    s = b * mu - lam
    if np.any(s <= 0):
        return -np.inf
    return float(np.sum(coef / (mu * gamma) * -np.expm1(-gamma * s) + np.log(s) / omega))


# ---------------------------------------------------------------------------
# Algorithm 1


def _as_index(cfg, index):
    if index is None:
        return enumerate_combinations(cfg.n_services, cfg.cache_size)
    return index


class _Combos:
    """Minimal index carrying only a combination list."""

    def __init__(self, combos):
        self.combos = np.atleast_2d(np.asarray(combos, dtype=np.int64))

    def __len__(self):
        return len(self.combos)


class Algorithm1:
    """Parallel SCA on (a, b) for the barrier objective.

    Parameters
    ----------
    denominator : 'printed' uses A^2 in the last term of the RT computing
        subproblem weight, 'consistent' uses A*C as in the SSP closed form.
    freeze_a : keep the caching distribution fixed and only update b.
    """

    def __init__(self, cfg, case, index=None, schedule=None, max_iter=5000, tol=None, omega=None,
                 denominator="printed", freeze_a=False, const=None):
        self.cfg = cfg
        self.case = check_case(case)
        if self.case == "dt_exact":
            raise InvalidConfigError("the optimizer needs the smoothed DT form")
        self.index = index if index is not None else enumerate_combinations(cfg.n_services, cfg.cache_size)
        self.const = const or derive_constants(cfg)
        self.obj = DenseObjective(cfg, self.index, self.case, self.const)
        self.schedule = schedule or StepSchedule()
        self.max_iter = int(max_iter)
        self.tol = cfg.grad_tol_tau if tol is None else tol
        self.omega = cfg.barrier_omega if omega is None else omega
        if denominator not in ("printed", "consistent"):
            raise InvalidConfigError("denominator must be 'printed' or 'consistent'")
        self.denominator = denominator
        self.freeze_a = freeze_a

    # subproblems -----------------------------------------------------------

    def solve_a_subproblem(self, a, g_a):
        """Projection of a + grad/2 onto the probability simplex."""
        if self.freeze_a:
            return a.copy()
        return project_simplex(a + 0.5 * g_a)

    def rt_coefficients(self, a):
        c = self.const
        t = self.obj.t(a)
        last = c.A if self.denominator == "printed" else c.C
        w = closed_form_weight(t, c, last)  # p T / den
        n = self.obj.combos
        return c.J[n] * w[n] * a[:, None], arrival_rate(t, c)[n]

    def solve_b(self, a, b, g_b):
        if self.case == "rt":
            coef, lam = self.rt_coefficients(a)
            n = self.obj.combos
            return solve_b_rt(coef, lam, self.const.mu[n], self.const.gamma_q[n], self.omega)
        return self.solve_b_dt(b, g_b)

    def solve_b_dt(self, b, g_b):
        """Row-wise projection of b + grad/2 onto the simplex (DT computing subproblem)."""
        return project_simplex(b + 0.5 * g_b)

    def candidates(self, state):
        """Subproblem solutions at the state snapshot and the objective there."""
        val, g_a, g_b = self.obj.value_and_grad(state.a, state.b, self.omega)
        return self.solve_a_subproblem(state.a, g_a), self.solve_b(state.a, state.b, g_b), val

    def step(self, state, alpha, a_hat=None, b_hat=None):
        """Convex-combination update toward the subproblem candidates."""
        if a_hat is None:
            a_hat, b_hat, _ = self.candidates(state)
        a = state.a + alpha * (a_hat - state.a)
        b = state.b + alpha * (b_hat - state.b)
        return IterateState(state.r + 1, a, b, alpha, state.history)

    def stable(self, a, b):
        return bool(np.all(self.obj.slack(a, b) > 0))

    # driver ----------------------------------------------------------------

    def run(self, a0=None, b0=None):
        if a0 is None:
            a0, b0 = find_feasible_start(self.cfg, self.case, self.index, self.const)
        a = np.asarray(a0, dtype=float).copy()
        b = np.asarray(b0, dtype=float).copy()
        if not self.stable(a, b):
            raise InfeasibleError("initial point is not strictly queue-stable")
        state = IterateState(0, a, b)
        trace = []
        converged = False
        for r in range(1, self.max_iter + 1):
            a_hat, b_hat, val = self.candidates(state)
            res = float(np.sum((a_hat - state.a) ** 2) + np.sum((b_hat - state.b) ** 2))
            if res < self.tol:
                trace.append((r, val, res, 0.0))
                converged = True
                break
            alpha = self.schedule(r)
            nxt = self.step(state, alpha, a_hat, b_hat)
            while not self.stable(nxt.a, nxt.b):
                alpha *= 0.5
                if alpha < 1e-14:
                    raise InfeasibleError("step size collapsed while keeping queues stable")
                nxt = self.step(state, alpha, a_hat, b_hat)
            trace.append((r, val, res, alpha))
            state = nxt
        return SolverResult(self.obj.combos, state.a, state.b, trace, converged,
                            "ok" if converged else "max_iter")


def find_feasible_start(cfg, case, index=None, const=None, max_rounds=200):
    """Strictly stable start: uniform a and b, reweighted toward stable combinations.

    Raises InfeasibleError when even the least loaded split cannot be stable.
    """
    const = const or derive_constants(cfg)
    index = index if index is not None else enumerate_combinations(cfg.n_services, cfg.cache_size)
    combos = index.combos
    m, k = combos.shape
    obj = DenseObjective(cfg, index, case, const)
    mu = const.mu[combos]
    # lambda is increasing or decreasing in T; its smallest value bounds any load
    lam_min = np.minimum(arrival_rate(np.zeros(cfg.n_services), const), arrival_rate(np.ones(cfg.n_services), const))
    if np.all(np.sum(lam_min[combos] / mu, axis=1) >= 1):
        raise InfeasibleError("no combination can be served stably at this computing capability")
    a = np.full(m, 1.0 / m)
    for _ in range(max_rounds):
        lam = arrival_rate(obj.t(a), const)[combos]
        room = 1.0 - np.sum(lam / mu, axis=1)
        # spread the spare capacity so every queue keeps the same relative slack
        b = np.where(room[:, None] > 0, (lam + np.maximum(room, 0)[:, None] * mu / k) / mu, 1.0 / k)
        if np.all(room > 0):
            return a, b
        a = np.where(room > 0, a, a * 0.5)
        a /= a.sum()
    raise InfeasibleError(f"no strictly stable start found; largest capacity margin {room.max():.3g}")


def write_trace(result, path):
    """Per-iteration rows (r, objective, squared step residual, step size)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "objective", "residual", "alpha"])
        for row in result.trace:
            w.writerow([row[0], repr(float(row[1])), repr(float(row[2])), repr(float(row[3]))])


def embed_solution(index, combos, a, b, cfg, const):
    """Place a solution on a sub-list of combinations into the full index.

    Combinations outside the sub-list get zero probability and the
    equal-slack split of the spare capacity.
    """
    full = index.combos
    k = full.shape[1]
    a_full = np.zeros(len(full))
    pos = np.array([index.position(c) for c in np.atleast_2d(combos)])
    a_full[pos] = a
    lam = arrival_rate(t_from_a(CachingDistribution(full, a_full), cfg.n_services), const)[full]
    mu = const.mu[full]
    room = 1.0 - np.sum(lam / mu, axis=1)
    b_full = np.where(room[:, None] > 0, (lam + np.maximum(room, 0)[:, None] * mu / k) / mu, 1.0 / k)
    b_full[pos] = b
    return a_full, b_full


ROUND_TOL = 1e-10  # squared-step tolerance per continuation round
ROUND_MAX_ITER = 1000
MAX_VERTEX_STARTS = 16  # small instances also start from every pure combination


def vertex_starts(index, cfg, const):
    """One start per combination cached with probability one, if it can be stable."""
    out = []
    for j in range(len(index)):
        a = np.zeros(len(index))
        a[j] = 1.0
        lam = arrival_rate(t_from_a(CachingDistribution(index.combos, a), cfg.n_services), const)[index.combos]
        room = 1.0 - np.sum(lam / const.mu[index.combos], axis=1)
        if room[j] <= 0:
            continue
        k = index.combos.shape[1]
        b = np.where(room[:, None] > 0, (lam + np.maximum(room, 0)[:, None] * const.mu[index.combos] / k)
                     / const.mu[index.combos], 1.0 / k)
        out.append((a, b))
    return out


def omega_schedule(omega0, rounds=4, factor=100.0):
    """Barrier weights for continuation: omega0, omega0*factor, ..."""
    return [omega0 * factor ** i for i in range(rounds)]


def run_continuation(solver_kw, cfg, case, a0, b0, omegas):
    """Run Algorithm 1 once per barrier weight, warm-starting each round."""
    a, b = a0, b0
    trace, converged = [], True
    for om in omegas:
        res = Algorithm1(cfg, case, omega=om, **solver_kw).run(a, b)
        a, b = res.a, res.b
        trace.extend(res.trace)
        converged = res.converged
    return SolverResult(res.combos, a, b, trace, converged, "ok" if converged else "max_iter")


def run_algorithm1(cfg, case, init=None, omegas=None, warm_start=True, **kw):
    """Algorithm 1 on the full combination index; returns a SolverResult.

    Each start is driven through a rising barrier weight so that the final
    round approaches the hard stability constraint. Starts are the uniform
    feasible point (or ``init``), every pure combination when there are at
    most MAX_VERTEX_STARTS of them, and, with ``warm_start``, the
    near-optimal design. The one with the larger SSP is returned.
    """
    from .near_optimal import run_algorithm3
    from .ssp import ssp_value

    const = kw.pop("const", None) or derive_constants(cfg)
    index = kw.pop("index", None)
    index = index if index is not None else enumerate_combinations(cfg.n_services, cfg.cache_size)
    omegas = omega_schedule(kw.pop("omega", None) or cfg.barrier_omega) if omegas is None else list(omegas)
    kw.update(index=index, const=const)
    kw.setdefault("tol", ROUND_TOL)
    kw.setdefault("max_iter", ROUND_MAX_ITER)
    starts = []
    if init is not None:
        starts.append(tuple(init))
    else:
        try:
            starts.append(find_feasible_start(cfg, case, index, const))
        except InfeasibleError:
            pass
    if len(index) <= MAX_VERTEX_STARTS:
        starts += vertex_starts(index, cfg, const)
    if warm_start and check_case(case) != "dt_exact" and isinstance(index, CombinationIndex):
        try:
            near = run_algorithm3(cfg, case, const)
            starts.append(embed_solution(index, near.combos, near.a, near.b, cfg, const))
        except (InfeasibleError, InvalidConfigError):
            pass
    if not starts:
        raise InfeasibleError("no strictly stable starting point")
    best, best_val = None, -np.inf
    for a0, b0 in starts:
        res = run_continuation(kw, cfg, case, a0, b0, omegas)
        val = ssp_value(res.caching, res.allocation, case, cfg, const)
        if val > best_val:
            best, best_val = res, val
    return best
