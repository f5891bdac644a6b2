import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgessp import (
    Algorithm1,
    BracketError,
    InfeasibleError,
    InvalidConfigError,
    ScenarioConfig,
    derive_constants,
    enumerate_combinations,
    find_feasible_start,
    run_algorithm1,
    ssp,
    validate,
)
from edgessp.sca import (
    StepSchedule,
    embed_solution,
    g_function,
    omega_schedule,
    rt_subproblem_objective,
    solve_b_rt,
    write_trace,
)
from edgessp.ssp import ssp_value
from oracles import pg_maximize


def _subproblem(seed, k=4):
    rng = np.random.default_rng(seed)
    mu = rng.uniform(10, 60, k)
    lam = rng.uniform(0.2, 2.0, k)
    coef = rng.uniform(0.01, 3.0, k) * mu
    gamma = rng.uniform(0.3, 1.5, k)
    return coef, lam, mu, gamma


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([10.0, 1000.0, 1e6]))
def test_rt_share_solver_matches_projected_gradient(seed, omega):
    coef, lam, mu, gamma = _subproblem(seed)
    b = solve_b_rt(coef, lam, mu, gamma, omega)[0]
    assert b.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(b * mu > lam)
    # KKT: G equal across the combination
    g = g_function(b, coef, lam, mu, gamma, omega)
    assert np.ptp(np.log(g)) < 1e-6

    def f(x):
        return rt_subproblem_objective(x, coef, lam, mu, gamma, omega)

    def grad(x):
        return g_function(x, coef, lam, mu, gamma, omega)

    lower = lam / mu + 1e-12
    x0 = lower + (1 - lower.sum()) / len(mu)
    ref, fref = pg_maximize(f, grad, x0, lower)
    assert f(b) >= fref - 1e-9
    np.testing.assert_allclose(b, ref, atol=1e-6)


def test_rt_share_solver_rows_and_errors():
    coef, lam, mu, gamma = _subproblem(1)
    rows = solve_b_rt(np.vstack([coef, coef * 2]), np.vstack([lam, lam]), mu, gamma, 1000.0)
    assert rows.shape == (2, 4)
    np.testing.assert_allclose(rows.sum(axis=1), 1.0)
    assert np.all(solve_b_rt(coef[:1], lam[:1], mu[:1], gamma[:1], 1000.0) == 1)
    with pytest.raises(BracketError):
        solve_b_rt(coef, lam * 100, mu, gamma, 1000.0)


def test_step_schedule():
    s = StepSchedule()
    assert s(1) == pytest.approx(2 ** -0.8)
    assert all(s(r + 1) < s(r) for r in range(1, 50))
    with pytest.raises(InvalidConfigError):
        StepSchedule(exponent=0.4)


def test_omega_schedule():
    assert omega_schedule(1000.0) == [1e3, 1e5, 1e7, 1e9]


def small_cfg(**kw):
    return ScenarioConfig.default(n_services=4, cache_size=2, **kw)


def test_feasible_start_is_stable():
    cfg = small_cfg()
    a, b = find_feasible_start(cfg, "rt")
    idx = enumerate_combinations(4, 2)
    from edgessp import CachingDistribution, ComputingAllocation
    rep = validate(cfg, CachingDistribution(idx.combos, a), b=ComputingAllocation(idx.combos, b))
    assert rep.ok, str(rep)


def test_feasible_start_infeasible():
    with pytest.raises(InfeasibleError):
        find_feasible_start(small_cfg(f_bs=1e5), "rt")


@pytest.mark.parametrize("case", ["rt", "dt"])
def test_algorithm1_improves_on_start(case):
    cfg = small_cfg(f_bs=5e6)
    const = derive_constants(cfg)
    alg = Algorithm1(cfg, case, max_iter=300, const=const)
    a0, b0 = find_feasible_start(cfg, case, const=const)
    res = alg.run(a0, b0)
    start = alg.obj.value(a0, b0, alg.omega)
    end = alg.obj.value(res.a, res.b, alg.omega)
    assert end > start
    assert validate(cfg, res.caching, b=res.allocation, const=const).ok
    vals = [row[1] for row in res.trace]
    # diminishing steps: objective may wiggle but the tail is no worse than the head
    assert vals[-1] >= vals[0]


def test_algorithm1_rejects_unstable_start():
    cfg = small_cfg()
    idx = enumerate_combinations(4, 2)
    a = np.full(len(idx), 1 / len(idx))
    b = np.tile([1.0, 0.0], (len(idx), 1))
    with pytest.raises(InfeasibleError):
        Algorithm1(cfg, "rt").run(a, b)
    with pytest.raises(InvalidConfigError):
        Algorithm1(cfg, "dt_exact")


def test_freeze_a():
    cfg = small_cfg(f_bs=5e6)
    a0, b0 = find_feasible_start(cfg, "rt")
    res = Algorithm1(cfg, "rt", freeze_a=True, max_iter=50).run(a0, b0)
    np.testing.assert_array_equal(res.a, a0)


def grid_oracle(cfg, case, step=1e-3):
    """Exhaustive search over T_1 for N = 2, K = 1 (each BS caches one service, b = 1)."""
    from edgessp import CachingDistribution, ComputingAllocation
    combos = np.array([[0], [1]])
    b = ComputingAllocation(combos, np.ones((2, 1)))
    best = -np.inf
    for t1 in np.arange(0.0, 1.0 + step / 2, step):
        a = CachingDistribution(combos, [t1, 1 - t1])
        try:
            best = max(best, ssp_value(a, b, case, cfg))
        except Exception:
            continue
    return best


@pytest.mark.parametrize("case", ["rt", "dt"])
@pytest.mark.parametrize("f_bs", [5e5, 7.5e6])
def test_two_service_oracle(case, f_bs):
    cfg = ScenarioConfig.default(n_services=2, cache_size=1, f_bs=f_bs)
    res = run_algorithm1(cfg, case)
    got = ssp_value(res.caching, res.allocation, case, cfg)
    assert abs(got - grid_oracle(cfg, case)) <= 1e-4


def test_run_algorithm1_not_below_near_optimal():
    from edgessp import run_algorithm3
    cfg = ScenarioConfig.default(n_services=6, cache_size=2, f_bs=5e6)
    res = run_algorithm1(cfg, "rt")
    near = run_algorithm3(cfg, "rt")
    assert ssp_value(res.caching, res.allocation, "rt", cfg) >= ssp_value(near.caching, near.allocation, "rt", cfg) - 1e-9


def test_embed_solution():
    cfg = small_cfg(f_bs=5e6)
    const = derive_constants(cfg)
    idx = enumerate_combinations(4, 2)
    a, b = embed_solution(idx, np.array([[2, 3]]), np.ones(1), np.array([[0.4, 0.6]]), cfg, const)
    j = idx.position((2, 3))
    assert a[j] == 1 and a.sum() == 1
    np.testing.assert_allclose(b[j], [0.4, 0.6])
    np.testing.assert_allclose(b.sum(axis=1), 1)


def test_write_trace(tmp_path):
    cfg = small_cfg(f_bs=5e6)
    res = Algorithm1(cfg, "rt", max_iter=5).run()
    path = tmp_path / "t.csv"
    write_trace(res, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,objective,residual,alpha"
    assert len(lines) == res.iterations + 1
