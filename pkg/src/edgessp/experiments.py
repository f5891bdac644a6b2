"""Parameter sweeps, scheme comparison and simulation-vs-analysis checks."""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import BASELINES, baseline
from .combinations import t_from_a
from .constants import derive_constants
from .coverage import arrival_rate, sdtp, sutp
from .exceptions import EdgeSspError, InfeasibleError, InvalidConfigError, QueueUnstableError
from .near_optimal import run_algorithm3
from .queueing import md1_sojourn_cdf
from .sca import run_algorithm1
from .simulator import SimConfig, Simulator
from .ssp import ssp

CSV_COLUMNS = ("sweep_var", "value", "scheme", "case", "ssp_analytic", "ssp_sim", "ci_low", "ci_high",
               "iterations", "grad_norm", "seed", "status")
SCHEMES = ("alg1", "alg3") + tuple(BASELINES)
SWEEP_VARS = ("r", "f_bs", "k")


@dataclass(frozen=True)
class SweepSpec:
    """Grid over one variable; R scales all three target delays together."""

    variable: str
    values: tuple
    schemes: tuple = SCHEMES
    cases: tuple = ("rt", "dt")
    seeds: tuple = (0,)
    trials: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variable", self.variable.lower())
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "schemes", tuple(s.lower() for s in self.schemes))
        object.__setattr__(self, "cases", tuple(c.lower() for c in self.cases))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.variable not in SWEEP_VARS:
            raise InvalidConfigError(f"sweep variable must be one of {SWEEP_VARS}")
        if not self.values:
            raise InvalidConfigError("sweep grid is empty")
        if not self.schemes:
            raise InvalidConfigError("no schemes to run")
        bad = [s for s in self.schemes if s not in SCHEMES]
        if bad:
            raise InvalidConfigError(f"unknown schemes {bad}")
        if not self.cases or any(c not in ("rt", "dt") for c in self.cases):
            raise InvalidConfigError("cases must be drawn from rt, dt")
        if not self.seeds:
            raise InvalidConfigError("at least one seed is required")
        if self.trials < 0:
            raise InvalidConfigError("trials must be nonnegative")
        if self.variable == "k" and any(v != int(v) or v < 1 for v in self.values):
            raise InvalidConfigError("cache sizes must be positive integers")

    @classmethod
    def from_parser(cls, cp):
        if not cp.has_section("sweep"):
            raise InvalidConfigError("config has no [sweep] section")
        s = cp["sweep"]

        def items(key, default):
            raw = s.get(key, default)
            return [x.strip() for x in raw.replace(",", " ").split() if x.strip()]

        seeds = items("seeds", "0")
        return cls(
            variable=s.get("variable", "f_bs"),
            values=[float(v) for v in items("values", "")],
            schemes=items("schemes", " ".join(SCHEMES)),
            cases=items("cases", "rt dt"),
            seeds=[int(v) for v in seeds],
            trials=int(float(s.get("trials", "0"))),
        )


def apply_sweep(cfg, variable, value):
    if variable == "r":
        return cfg.scale_delays(value)
    if variable == "f_bs":
        return cfg.replace(f_bs=value)
    return cfg.replace(cache_size=int(value))


def cell_seed(seed, index):
    """Per-cell seed derived from the run seed and the cell position."""
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1, np.uint32)[0])


def solve_scheme(scheme, cfg, case, const=None):
    """(caching, allocation, iterations, grad_norm, status) of one scheme."""
    const = const or derive_constants(cfg)
    if scheme == "alg1":
        res = run_algorithm1(cfg, case, const=const)
        return res.caching, res.allocation, res.iterations, res.grad_norm, res.status
    if scheme == "alg3":
        res = run_algorithm3(cfg, case, const)
        status = "ok" if res.converged else "max_iter"
        return res.caching, res.allocation, res.iterations, res.grad_norm, status
    a, b = baseline(scheme, cfg, case, const)
    return a, b, 0, float("nan"), "ok"


def _status_of(exc):
    if isinstance(exc, QueueUnstableError):
        return "unstable"
    if isinstance(exc, InfeasibleError):
        return "infeasible"
    return "error:" + type(exc).__name__


def run_cell(task):
    """One grid point x scheme x case x seed; failures become status codes."""
    spec, cfg, value, scheme, case, seed, index = task
    row = dict(sweep_var=spec.variable, value=value, scheme=scheme, case=case, ssp_analytic=float("nan"),
               ssp_sim=float("nan"), ci_low=float("nan"), ci_high=float("nan"), iterations=0,
               grad_norm=float("nan"), seed=seed, status="ok")
    start = time.perf_counter()
    try:
        cell_cfg = apply_sweep(cfg, spec.variable, value)
        const = derive_constants(cell_cfg)
        a, b, iters, gnorm, status = solve_scheme(scheme, cell_cfg, case, const)
        row.update(ssp_analytic=ssp(a, b, case, cell_cfg, const).total_ssp, iterations=iters,
                   grad_norm=gnorm, status=status)
        if spec.trials > 0:
            est = Simulator(cell_cfg, a, b, SimConfig(trials=spec.trials), const).service(case, cell_seed(seed, index))
            row.update(ssp_sim=est.mean, ci_low=est.ci_low, ci_high=est.ci_high)
    except EdgeSspError as exc:
        row["status"] = _status_of(exc)
    row["wall_time"] = time.perf_counter() - start
    return row


def run_experiment(spec, cfg, workers=1):
    """Rows for every grid point x scheme x case x seed, in grid order."""
    tasks = []
    for value in spec.values:
        for scheme in spec.schemes:
            for case in spec.cases:
                for seed in spec.seeds:
                    tasks.append((spec, cfg, value, scheme, case, seed, len(tasks)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_cell, tasks))
    return [run_cell(t) for t in tasks]


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def emit_csv(table, path):
    """Write rows with the fixed column order; wall times are not emitted.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(path, table)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, table)


def _write_rows(fh, table):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in table:
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


_PARSE = dict(value=float, ssp_analytic=float, ssp_sim=float, ci_low=float, ci_high=float, iterations=int,
              grad_norm=float, seed=int)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{k: _PARSE.get(k, str)(v) for k, v in r.items()} for r in rows]


# ---------------------------------------------------------------------------
# simulation vs analysis


@dataclass
class CheckLine:
    name: str
    simulated: float
    analytic: float
    z: float
    passed: bool | None  # None for report-only lines
    note: str = ""

    def __str__(self):
        tag = "INFO" if self.passed is None else ("PASS" if self.passed else "FAIL")
        return (f"[{tag}] {self.name}: sim {self.simulated:.6f} analysis {self.analytic:.6f} "
                f"z {self.z:+.2f}{(' ' + self.note) if self.note else ''}")


@dataclass
class ValidationSummary:
    lines: list = field(default_factory=list)

    @property
    def passed(self):
        return all(x.passed is not False for x in self.lines)

    def __str__(self):
        return "\n".join(str(x) for x in self.lines)


def _z(est, p):
    sd = math.sqrt(max(p * (1 - p), 1e-300) / est.trials)
    return (est.mean - p) / sd


def validate_command(cfg, trials=1_000_000, seed=0, dependent_trials=5_000, design=None, sigma=3.0):
    """Simulated SUTP/SDTP/SCPP/SSP against the closed forms for one design.

    The design defaults to uniform caching with popularity-proportional
    shares. Per-leg estimates average over services drawn by popularity.
    """
    if trials < 1:
        raise InvalidConfigError("trials must be a positive integer")
    const = derive_constants(cfg)
    a, b = design or baseline("ucps", cfg)
    t = t_from_a(a, cfg.n_services)
    p = cfg.popularity_arr * (t > 0)
    p = p / p.sum()
    out = ValidationSummary()
    sim = Simulator(cfg, a, b, SimConfig(trials=trials), const)
    ss = np.random.SeedSequence(seed).generate_state(8)

    def add(name, est, ref, gate=True, note=""):
        z = _z(est, ref)
        out.lines.append(CheckLine(name, est.mean, ref, z, (abs(z) <= sigma) if gate else None, note))

    add("SUTP thinned uplink", sim.uplink(int(ss[0])), float(p @ sutp(t, const)))
    dep = Simulator(cfg, a, b, SimConfig(trials=min(trials, dependent_trials), uplink_mode="dependent", chunk=1000),
                    const)
    add("SUTP dependent uplink", dep.uplink(int(ss[1])), float(p @ sutp(t, const)), gate=False,
        note="(gap expected without the PPP uplink model)")
    add("SDTP", sim.downlink(int(ss[2])), float(p @ sdtp(t, const)))
    rep_rt = ssp(a, b, "rt", cfg, const)
    rep_dt = ssp(a, b, "dt_exact", cfg, const)
    add("SCPP RT", sim.computing("rt", int(ss[3])), float(p @ rep_rt.scpp_weighted))
    comp_dt = sim.computing("dt", int(ss[4]))
    add("SCPP DT", comp_dt, float(p @ rep_dt.scpp_weighted))
    add("SCPP DT vs sojourn CDF", comp_dt, _dt_sojourn_reference(a, b, cfg, const, p), gate=False)
    add("SSP RT independent", sim.service("rt", int(ss[5])), rep_rt.total_ssp)
    ind = sim.service("dt", int(ss[6]))
    add("SSP DT independent", ind, rep_dt.total_ssp)
    joint = Simulator(cfg, a, b, SimConfig(trials=trials, correlation_mode="joint"), const).service("dt", int(ss[7]))
    gap = joint.mean - ind.mean
    out.lines.append(CheckLine("SSP DT joint - independent", joint.mean, ind.mean, float("nan"), abs(gap) <= 0.02,
                               f"gap {gap:+.5f}"))
    return out


def _dt_sojourn_reference(a, b, cfg, const, p):
    """Popularity average of sum_j (a_j / T_n) P[sojourn <= gamma] for the M/D/1 queues."""
    sup = a.support()
    t = t_from_a(sup, cfg.n_services)
    lam = arrival_rate(t, const)
    shares = b.aligned(sup.combos)
    cdf = md1_sojourn_cdf(shares, lam[sup.combos], const.mu[sup.combos], const.gamma_q[sup.combos])
    w = np.bincount(sup.combos.ravel(), weights=(sup.probs[:, None] * cdf).ravel(), minlength=cfg.n_services)
    cond = np.divide(w, t, out=np.zeros_like(w), where=t > 0)
    return float(p @ cond)
