"""Monte Carlo estimates of link, computing and overall service success.

The typical user sits at the origin. Base stations form a Poisson point
process; each one caches a combination drawn from the caching distribution
and is active on the typical user's channel with probability p_s / kappa.
Fading is Rayleigh and redrawn for every trial.

Two sampling paths are provided. ``sample_scene``/``associate`` build an
explicit scene in a disk window. The trial estimators use the independent
thinning of the BS process by cached service: the nearest caching BS is at a
Rayleigh distance and the interferers are drawn as Poisson fields around the
receiver. Interference from beyond the window is folded in through its
Laplace functional, which is exact for Rayleigh fading because
P[h >= x + y] = P[h >= x] P[h' >= y].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import hyp2f1
from scipy.stats import binomtest

from .combinations import CachingDistribution, ComputingAllocation, t_from_a
from .constants import derive_constants
from .coverage import arrival_rate
from .exceptions import InvalidConfigError, QueueUnstableError

UPLINK_MODES = ("thinned_ppp", "dependent")
CORRELATION_MODES = ("independent", "joint")
QUEUE_MODES = ("sojourn_formula_sampling", "discrete_event")
CASES = ("rt", "dt")


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``window_radius`` None picks 10 / sqrt(lambda_bs * min T_n). ``chunk`` is
    the number of trials per derived seed; it is part of the result identity.
    """

    trials: int = 100_000
    window_radius: float | None = None
    uplink_mode: str = "thinned_ppp"
    correlation_mode: str = "independent"
    queue_mode: str = "sojourn_formula_sampling"
    far_field: bool = True
    chunk: int = 20_000

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 1:
            raise InvalidConfigError("trials must be a positive integer")
        if self.uplink_mode not in UPLINK_MODES:
            raise InvalidConfigError(f"uplink_mode must be one of {UPLINK_MODES}")
        if self.correlation_mode not in CORRELATION_MODES:
            raise InvalidConfigError(f"correlation_mode must be one of {CORRELATION_MODES}")
        if self.queue_mode not in QUEUE_MODES:
            raise InvalidConfigError(f"queue_mode must be one of {QUEUE_MODES}")
        if self.window_radius is not None and not self.window_radius > 0:
            raise InvalidConfigError("window radius must be positive")
        if self.chunk < 1:
            raise InvalidConfigError("chunk must be positive")


@dataclass(frozen=True)
class Estimate:
    """Bernoulli mean with a 95% Wilson interval."""

    mean: float
    ci_low: float
    ci_high: float
    trials: int
    successes: int
    censored: int = 0

    @property
    def stderr(self):
        return math.sqrt(max(self.mean * (1 - self.mean), 0.0) / max(self.trials, 1))


def wilson(successes, trials, level=0.95):
    if trials == 0:
        return Estimate(float("nan"), 0.0, 1.0, 0, 0)
    ci = binomtest(int(successes), int(trials)).proportion_ci(level, method="wilson")
    return Estimate(successes / trials, float(ci.low), float(ci.high), int(trials), int(successes))


def default_window(cfg, t):
    t = np.asarray(t, dtype=float)
    tmin = t[t > 0].min()
    return 10.0 / math.sqrt(cfg.density_bs * tmin)


def _chunk_rngs(seed, trials, chunk):
    sizes = [chunk] * (trials // chunk)
    if trials % chunk:
        sizes.append(trials % chunk)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    return [(n, np.random.default_rng(c)) for n, c in zip(sizes, children)]


# ---------------------------------------------------------------------------
# explicit scenes


@dataclass(frozen=True, eq=False)
class SpatialScene:
    bs_points: np.ndarray
    bs_combo: np.ndarray
    user_points: np.ndarray
    user_service: np.ndarray  # -1 for an idle user
    window_radius: float
    combos: np.ndarray
    seed: int | None = None


def _uniform_disk(rng, count, radius):
    r = radius * np.sqrt(rng.random(count))
    phi = rng.uniform(0.0, 2 * np.pi, count)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def sample_scene(cfg, a, seed=None, window_radius=None, max_retries=100):
    """Poisson BS and user layouts in a disk, with i.i.d. combinations per BS."""
    if not isinstance(a, CachingDistribution):
        raise TypeError("a must be a CachingDistribution")
    rng = np.random.default_rng(seed)
    radius = window_radius or default_window(cfg, t_from_a(a, cfg.n_services))
    area = math.pi * radius**2
    for _ in range(max_retries):
        m = rng.poisson(cfg.density_bs * area)
        if m > 0:
            break
    else:
        raise InvalidConfigError("no base station drawn in the window; enlarge it")
    bs = _uniform_disk(rng, m, radius)
    combo = rng.choice(len(a.probs), size=m, p=a.probs)
    u = rng.poisson(cfg.density_u * area)
    users = _uniform_disk(rng, u, radius)
    active = rng.random(u) < cfg.p_s
    service = np.where(active, rng.choice(cfg.n_services, size=u, p=cfg.popularity_arr), -1)
    return SpatialScene(bs, combo, users, service, radius, a.combos, seed)


def associate(scene, n):
    """(index, distance) of the nearest BS caching service n, or None if none is in the window."""
    holds = np.any(scene.combos[scene.bs_combo] == n, axis=1)
    if not np.any(holds):
        return None
    idx = np.flatnonzero(holds)
    dist = np.hypot(scene.bs_points[idx, 0], scene.bs_points[idx, 1])
    k = int(np.argmin(dist))
    return int(idx[k]), float(dist[k])


# ---------------------------------------------------------------------------
# interference


def far_field_laplace(rho, d, r0, theta, alpha):
    """E exp(-theta d^alpha I) for a Poisson field of density rho beyond radius r0.

    Uses int_x^inf du / (1 + u^beta) = x^(1-beta) / (beta-1) 2F1(1, 1-1/beta; 2-1/beta; -x^-beta)
    with beta = alpha / 2 and x = (r0/d)^2 theta^(-2/alpha).
    """
    d = np.asarray(d, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    if theta == 0 or rho == 0:
        return np.ones(np.broadcast(d, r0).shape)
    beta = alpha / 2.0
    x = (r0 / d) ** 2 * theta ** (-2.0 / alpha)
    tail = x ** (1 - beta) / (beta - 1) * hyp2f1(1.0, 1 - 1 / beta, 2 - 1 / beta, -(x ** -beta))
    return np.exp(-math.pi * rho * d**2 * theta ** (2.0 / alpha) * tail)


def annulus_interference(rng, rho, r_in, r_out, alpha):
    """Sum of Exp(1) * r^-alpha over a Poisson field on r_in < r < r_out, one value per trial."""
    r_in = np.asarray(r_in, dtype=float)
    r_out = np.broadcast_to(np.asarray(r_out, dtype=float), r_in.shape)
    lo2, hi2 = r_in**2, np.maximum(r_out, r_in) ** 2
    counts = rng.poisson(rho * math.pi * (hi2 - lo2))
    owner = np.repeat(np.arange(len(r_in)), counts)
    r2 = lo2[owner] + rng.random(owner.size) * (hi2 - lo2)[owner]
    g = rng.exponential(size=owner.size)
    return np.bincount(owner, weights=g * r2 ** (-alpha / 2.0), minlength=len(r_in))


def _link_success(rng, d, interference, theta, alpha, far=1.0):
    h = rng.exponential(size=len(d))
    ok = h >= theta * d**alpha * interference
    if np.ndim(far) or far != 1.0:
        ok &= rng.random(len(d)) < far
    return ok


def rayleigh_distance(rng, density, size):
    """Distance to the nearest point of a planar PPP: P[D > r] = exp(-pi density r^2)."""
    return np.sqrt(rng.exponential(size=size) / (math.pi * density))


# ---------------------------------------------------------------------------
# link legs on the thinned processes


@dataclass
class _Setup:
    cfg: object
    const: object
    t: np.ndarray
    lam: np.ndarray
    radius: float
    far: bool
    q: float = field(init=False)

    def __post_init__(self):
        self.q = self.cfg.p_s / self.cfg.reuse_kappa


def _downlink(rng, st, n, d):
    cfg, alpha = st.cfg, st.cfg.alpha
    t = st.t[n]
    rho = st.q * cfg.density_bs
    R = st.radius
    i_hold = annulus_interference(rng, rho * t, d, np.maximum(d, R), alpha)
    i_other = annulus_interference(rng, rho * (1 - t), np.zeros_like(d), R, alpha)
    theta = st.const.theta_d[n]
    far = 1.0
    if st.far:
        far = np.ones(len(d))
        for k in np.unique(n):
            m = n == k
            far[m] = (far_field_laplace(rho * st.t[k], d[m], np.maximum(d[m], R), theta[m][0], alpha)
                      * far_field_laplace(rho * (1 - st.t[k]), d[m], R, theta[m][0], alpha))
    return _link_success(rng, d, i_hold + i_other, theta, alpha, far)


def _uplink_thinned(rng, st, n, d):
    cfg, alpha = st.cfg, st.cfg.alpha
    rho = st.q * cfg.density_bs
    R = st.radius
    interference = annulus_interference(rng, rho, np.zeros_like(d), R, alpha)
    theta = st.const.theta_u[n]
    far = 1.0
    if st.far:
        far = np.ones(len(d))
        for k in np.unique(n):
            m = n == k
            far[m] = far_field_laplace(rho, d[m], R, theta[m][0], alpha)
    return _link_success(rng, d, interference, theta, alpha, far)


def _voronoi_user(rng, tree, points, i, box):
    """Uniform point in the Voronoi cell of BS i by rejection from a growing square."""
    for _ in range(200):
        cand = points[i] + rng.uniform(-box, box, size=(32, 2))
        _, near = tree.query(cand)
        hit = np.flatnonzero(near == i)
        if hit.size:
            return cand[hit[0]]
        box *= 1.5
    return points[i]


def _uplink_dependent_one(rng, st, n, d):
    """One trial with one active cochannel user in each cochannel Voronoi cell."""
    cfg, alpha = st.cfg, st.cfg.alpha
    R = st.radius
    area = math.pi * R**2
    serve = np.array([d, 0.0]) @ _rotation(rng.uniform(0, 2 * np.pi))
    others = _uniform_disk(rng, rng.poisson(cfg.density_bs * area), R)
    # BSs caching n cannot be closer to the user than the serving one
    keep = ~((np.hypot(others[:, 0], others[:, 1]) < d) & (rng.random(len(others)) < st.t[n]))
    pts = np.vstack([serve, others[keep]])
    tree = cKDTree(pts)
    box = 0.5 / math.sqrt(cfg.density_bs)
    cochannel = np.flatnonzero(rng.random(len(pts)) < st.q)
    cochannel = cochannel[cochannel != 0]
    users = np.array([_voronoi_user(rng, tree, pts, i, box) for i in cochannel]).reshape(-1, 2)
    r = np.hypot(*(users - serve).T)
    interference = float(np.sum(rng.exponential(size=len(r)) * r ** (-alpha)))
    theta = st.const.theta_u[n]
    far = far_field_laplace(st.q * cfg.density_bs, d, R, theta, alpha) if st.far else 1.0
    h = rng.exponential()
    return h >= theta * d**alpha * interference and rng.random() < far


def _rotation(phi):
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, s], [-s, c]])


def _uplink(rng, st, n, d, mode):
    if mode == "thinned_ppp":
        return _uplink_thinned(rng, st, n, d)
    return np.array([_uplink_dependent_one(rng, st, int(k), float(x)) for k, x in zip(n, d)], dtype=bool)


# ---------------------------------------------------------------------------
# queues


def _cramer_margin(lam, s, service, eps=1e-14):
    """Depth below zero after which the reversed walk returns with probability < eps."""
    # smallest eta > 0 with E exp(eta (S - A)) = 1, by bisection on the log-MGF
    def logmgf(eta):
        srv = eta / s if service == "det" else -np.log1p(-eta / s)
        return srv + np.log(lam / (lam + eta))

    lo, hi = 0.0, s if service == "exp" else 1.0
    if service == "det":
        while logmgf(hi) < 0:
            hi *= 2
    else:
        hi = s * (1 - 1e-15)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if logmgf(mid) < 0:
            lo = mid
        else:
            hi = mid
    eta = max(lo, 1e-300)
    return math.log(1 / eps) / eta


def _check_queue(lam, s):
    if np.any(s <= lam):
        raise QueueUnstableError("service rate must exceed the arrival rate")


def stationary_sojourns(rng, lam, s, size, service, block=32):
    """I.i.d. stationary FIFO sojourn times by reversed-time replay.

    The stationary waiting time is the supremum of the reversed walk
    sum_i (S_i - A_i) over Poisson inter-arrivals A_i and service times S_i.
    Each replay runs until the walk is deep enough below zero that a return
    above its running maximum has probability below 1e-14.
    """
    _check_queue(lam, s)
    own = np.full(size, 1.0 / s) if service == "det" else rng.exponential(1.0 / s, size)
    pos = np.zeros(size)
    top = np.zeros(size)
    floor = _cramer_margin(lam, s, service)
    live = np.arange(size)
    while live.size:
        m = live.size
        srv = np.full((m, block), 1.0 / s) if service == "det" else rng.exponential(1.0 / s, (m, block))
        walk = pos[live, None] + np.cumsum(srv - rng.exponential(1.0 / lam, (m, block)), axis=1)
        top[live] = np.maximum(top[live], walk.max(axis=1))
        pos[live] = walk[:, -1]
        live = live[pos[live] > top[live] - floor]
    return top + own


def lindley_sojourns(rng, lam, s, count, service, warmup=None):
    """Sojourn times of consecutive customers of one FIFO queue after a warm-up period."""
    _check_queue(lam, s)
    warmup = 10.0 / (s - lam) if warmup is None else warmup
    skip = int(math.ceil(lam * warmup))
    total = skip + count
    a = rng.exponential(1.0 / lam, total)
    srv = np.full(total, 1.0 / s) if service == "det" else rng.exponential(1.0 / s, total)
    # W_k = S_k - min(0, min_{i<=k} S_i) with S the partial sums of service - interarrival
    inc = np.concatenate([[0.0], srv[:-1] - a[1:]])
    walk = np.cumsum(inc)
    w = walk - np.minimum(0.0, np.minimum.accumulate(walk))
    return (w + srv)[skip:]


def queue_delay_sample(rng, lam, b, mu, case, size, mode="sojourn_formula_sampling"):
    """Sojourn-time samples of the virtual server with share b."""
    s = b * mu
    _check_queue(lam, s)
    if mode == "sojourn_formula_sampling":
        if case == "rt":
            return rng.exponential(1.0 / (s - lam), size)
        return stationary_sojourns(rng, lam, s, size, "det")
    return lindley_sojourns(rng, lam, s, size, "exp" if case == "rt" else "det")


def _queue(rng, st, n, j, combos, shares, case, mode):
    ok = np.zeros(len(n), dtype=bool)
    mu, gq = st.const.mu, st.cfg.gamma_q_arr
    lam_all = st.lam
    for key in np.unique(np.column_stack([n, j]), axis=0):
        k, jj = int(key[0]), int(key[1])
        m = np.flatnonzero((n == k) & (j == jj))
        col = int(np.flatnonzero(combos[jj] == k)[0])
        lam = lam_all[k]
        ok[m] = queue_delay_sample(rng, lam, shares[jj, col], mu[k], case, m.size, mode) <= gq[k]
    return ok


def _draw_combination(rng, a, n, t):
    """Combination of the serving BS given that it caches n: P(j) = a_j / T_n."""
    out = np.empty(len(n), dtype=np.int64)
    for k in np.unique(n):
        m = np.flatnonzero(n == k)
        holds = np.flatnonzero(np.any(a.combos == k, axis=1))
        w = a.probs[holds] / t[k]
        out[m] = holds[rng.choice(len(holds), size=m.size, p=w / w.sum())]
    return out


# ---------------------------------------------------------------------------
# estimators


class Simulator:
    """Trial-level estimators for one (caching, computing) design."""

    def __init__(self, cfg, a, b=None, sim=None, const=None):
        if not isinstance(a, CachingDistribution):
            raise TypeError("a must be a CachingDistribution")
        self.cfg = cfg
        self.sim = sim or SimConfig()
        self.const = const or derive_constants(cfg)
        self.a = a.support()
        t = t_from_a(self.a, cfg.n_services)
        self.shares = None if b is None else b.aligned(self.a.combos)
        radius = self.sim.window_radius or default_window(cfg, t)
        self.setup = _Setup(cfg, self.const, t, arrival_rate(t, self.const), radius, self.sim.far_field)
        p = cfg.popularity_arr * (t > 0)
        self.p_cached = p / p.sum() if p.sum() > 0 else p

    def _services(self, rng, size, service):
        if service is not None:
            return np.full(size, int(service))
        return rng.choice(self.cfg.n_services, size=size, p=self.p_cached)

    def _serving(self, rng, n):
        return rayleigh_distance(rng, self.setup.t[n] * self.cfg.density_bs, len(n))

    def _run(self, seed, trial_fn):
        succ = total = 0
        for size, rng in _chunk_rngs(seed, self.sim.trials, self.sim.chunk):
            ok = trial_fn(rng, size)
            succ += int(np.count_nonzero(ok))
            total += size
        return wilson(succ, total)

    def uplink(self, seed=0, service=None):
        def fn(rng, size):
            n = self._services(rng, size, service)
            return _uplink(rng, self.setup, n, self._serving(rng, n), self.sim.uplink_mode)
        return self._run(seed, fn)

    def downlink(self, seed=0, service=None):
        def fn(rng, size):
            n = self._services(rng, size, service)
            return _downlink(rng, self.setup, n, self._serving(rng, n))
        return self._run(seed, fn)

    def computing(self, case, seed=0, service=None):
        shares = self._need_shares()

        def fn(rng, size):
            n = self._services(rng, size, service)
            j = _draw_combination(rng, self.a, n, self.setup.t)
            return _queue(rng, self.setup, n, j, self.a.combos, shares, case, self.sim.queue_mode)
        return self._run(seed, fn)

    def service(self, case, seed=0):
        """Fraction of requests with all three legs on time.

        Requests for services no BS caches always fail; they are counted as
        trials but never simulated.
        """
        shares = self._need_shares()
        cached_mass = float(np.sum(self.cfg.popularity_arr[self.setup.t > 0]))
        joint = self.sim.correlation_mode == "joint"

        def fn(rng, size):
            served = rng.random(size) < cached_mass
            n = self._services(rng, int(served.sum()), None)
            d = self._serving(rng, n)
            up = _uplink(rng, self.setup, n, d, self.sim.uplink_mode)
            down = _downlink(rng, self.setup, n, d if joint else self._serving(rng, n))
            j = _draw_combination(rng, self.a, n, self.setup.t)
            comp = _queue(rng, self.setup, n, j, self.a.combos, shares, case, self.sim.queue_mode)
            return up & down & comp

        return self._run(seed, fn)

    def _need_shares(self):
        if self.shares is None:
            raise InvalidConfigError("a computing allocation is required for this estimator")
        return self.shares


def estimate_ssp(a, b, case, cfg, sim=None, seed=0, const=None):
    """Simulated SSP of (a, b) with a 95% Wilson interval."""
    if case not in CASES:
        raise InvalidConfigError("case must be 'rt' or 'dt'")
    if not isinstance(b, ComputingAllocation):
        raise TypeError("b must be a ComputingAllocation")
    return Simulator(cfg, a, b, sim, const).service(case, seed)
