import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgessp import InfeasibleError, ScenarioConfig, derive_constants, run_algorithm3, run_cccp, validate
from edgessp.near_optimal import (
    DtFixedT,
    cccp_step,
    lambda_star,
    prune,
    rt_closed_form_b,
    rt_master_lp,
    rt_weights,
)
from edgessp.ssp import asymptotic_ssp, ssp_value
from oracles import pg_maximize


def brute_force_vertex(cfg, const):
    n, k = cfg.n_services, cfg.cache_size
    best = -np.inf
    for top in itertools.combinations(range(n), k):
        t = np.zeros(n)
        t[list(top)] = 1
        best = max(best, asymptotic_ssp(t, cfg, const))
    return best


@pytest.mark.parametrize("n", range(2, 7))
def test_cccp_vertex_optimal(n):
    for k in range(1, n):
        for negate in (False, True):
            cfg = ScenarioConfig.default(n_services=n, cache_size=k, zipf_negate=negate)
            const = derive_constants(cfg)
            t, hist = run_cccp(cfg, const)
            assert set(np.unique(t)) <= {0.0, 1.0} and t.sum() == k
            assert asymptotic_ssp(t, cfg, const) == pytest.approx(brute_force_vertex(cfg, const), abs=1e-15)
            assert all(b >= a - 1e-15 for a, b in zip(hist, hist[1:]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_vertex_beats_interior(seed):
    # convexity: no point of the capped simplex beats the best vertex
    cfg = ScenarioConfig.default(n_services=6, cache_size=2)
    const = derive_constants(cfg)
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(15))
    combos = list(itertools.combinations(range(6), 2))
    t = np.zeros(6)
    for wi, c in zip(w, combos):
        t[list(c)] += wi
    assert asymptotic_ssp(t, cfg, const) <= brute_force_vertex(cfg, const) + 1e-15


def test_cccp_step_ties_lowest_index():
    np.testing.assert_array_equal(cccp_step([1.0, 2.0, 2.0, 2.0], 2), [0, 1, 1, 0])


def test_prune_counts():
    t = np.array([1, 1, 0.5, 0.5, 0, 0.0])
    p = prune(t, 3)
    assert p.active.tolist() == [[0, 1, 2], [0, 1, 3]]
    assert p.n_total == math.comb(6, 3) and p.n_excluded == math.comb(6, 3) - 2
    with pytest.raises(InfeasibleError):
        prune(np.array([1, 1, 1, 0.0]), 2)


def test_lambda_star_forms(const):
    t = np.full(10, 0.4)
    np.testing.assert_allclose(lambda_star(t, const), (t + const.C) / (t + const.A))
    np.testing.assert_allclose(lambda_star(t, const, "arrival"), (t + const.c_load) / (t + const.A))


def _rt_subproblem(seed):
    rng = np.random.default_rng(seed)
    cfg = ScenarioConfig.default(n_services=8, cache_size=4, f_bs=rng.uniform(3e6, 3e7))
    const = derive_constants(cfg)
    t = np.zeros(8)
    combo = np.sort(rng.choice(8, 4, replace=False))
    t[combo] = rng.uniform(0.3, 1.0, 4)
    lam = lambda_star(t, const)
    return cfg, const, t, combo, lam


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_closed_form_shares_match_projected_gradient(seed):
    cfg, const, t, combo, lam = _rt_subproblem(seed)
    b, _, clipped, q = rt_closed_form_b(t, combo[None, :], const, lam)
    w = rt_weights(t, const)[combo]
    J = const.J[combo]
    lower = lam[combo] * const.gamma_q[combo] / J

    def f(x):
        return -np.sum(w * np.exp(-(x - lower) * J))

    def grad(x):
        return w * J * np.exp(-(x - lower) * J)

    ref, fref = pg_maximize(f, grad, np.full(4, 0.25), lower)
    np.testing.assert_allclose(b[0], ref, atol=1e-6)
    assert q[0] == pytest.approx(fref, abs=1e-9)
    assert b[0].sum() == pytest.approx(1.0)


def test_clipped_shares_respect_lower_bound():
    cfg = ScenarioConfig.default(n_services=10, cache_size=8, f_bs=3e6)
    const = derive_constants(cfg)
    t, _ = run_cccp(cfg, const)
    active = prune(t, 8).active
    lam = lambda_star(t, const)
    b, _, clipped, _ = rt_closed_form_b(t, active, const, lam)
    assert clipped.any()
    assert np.all(b >= lam[active] * const.gamma_q[active] / const.J[active] - 1e-15)
    np.testing.assert_allclose(b.sum(axis=1), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_master_lp_strong_duality(seed):
    rng = np.random.default_rng(seed)
    n, k = 6, 3
    t = np.array([1.0, 1.0, 0.3, 0.3, 0.4, 0.0])
    active = prune(t, k).active
    q = -rng.random(len(active))
    a, duals, gap = rt_master_lp(t, active, q)
    assert gap <= 1e-8
    A = np.zeros((n, len(active)))
    for j, row in enumerate(active):
        A[row, j] = 1
    np.testing.assert_allclose(A @ a, t, atol=1e-9)
    assert a @ q == pytest.approx(duals @ t, abs=1e-8)


@pytest.mark.parametrize("case", ["rt", "dt"])
@pytest.mark.parametrize("k", [3, 8])
def test_algorithm3_feasible(case, k):
    cfg = ScenarioConfig.default(cache_size=k, f_bs=1e7)
    res = run_algorithm3(cfg, case)
    rep = validate(cfg, res.caching, b=res.allocation)
    assert rep.ok, str(rep)
    assert 0 < ssp_value(res.caching, res.allocation, case, cfg) <= 1


def test_algorithm3_infeasible_low_capability():
    cfg = ScenarioConfig.default(cache_size=8, f_bs=2e6)
    with pytest.raises(InfeasibleError):
        run_algorithm3(cfg, "rt")


def test_dt_loop_improves():
    cfg = ScenarioConfig.default(cache_size=8, f_bs=3e6)
    res = run_algorithm3(cfg, "dt")
    vals = [r[1] for r in res.trace]
    assert vals[-1] >= vals[0]
    model = DtFixedT(cfg, derive_constants(cfg), res.t_star, res.combos, lambda_star(res.t_star, derive_constants(cfg)))
    assert np.all(res.b >= model.lower - 1e-12)
