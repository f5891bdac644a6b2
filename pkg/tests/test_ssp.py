import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgessp import ScenarioConfig, derive_constants, enumerate_combinations, ssp
from edgessp.coverage import sdtp, sutp
from edgessp.ssp import DenseObjective, asymptotic_gradient, asymptotic_ssp, check_case, ssp_value
from edgessp.combinations import t_from_a
from helpers import random_design


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["rt", "dt", "dt_exact"]))
def test_closed_equals_factored(cfg, const, seed, case):
    d = random_design(cfg, const, np.random.default_rng(seed))
    if d is None:
        return
    a, b = d
    closed = ssp(a, b, case, cfg, const, form="closed", check=False)
    fact = ssp(a, b, case, cfg, const, form="factored", check=False)
    np.testing.assert_allclose(closed.contribution, fact.contribution, atol=1e-12, rtol=0)
    assert 0 <= closed.total_ssp <= 1


def test_report_fields(cfg, const):
    a, b = random_design(cfg, const, np.random.default_rng(3))
    rep = ssp(a, b, "rt", cfg, const)
    t = t_from_a(a, cfg.n_services)
    np.testing.assert_allclose(rep.sutp, sutp(t, const))
    np.testing.assert_allclose(rep.sdtp, sdtp(t, const))
    assert float(rep) == rep.total_ssp == ssp_value(a, b, "rt", cfg, const)


def test_dt_not_below_rt_same_design(cfg, const):
    # deterministic service stochastically shortens the sojourn time
    for seed in range(20):
        d = random_design(cfg, const, np.random.default_rng(seed))
        if d is None:
            continue
        a, b = d
        assert ssp_value(a, b, "dt_exact", cfg, const) >= ssp_value(a, b, "rt", cfg, const) - 1e-12


def test_bad_case():
    with pytest.raises(ValueError):
        check_case("xx")


@pytest.mark.parametrize("case", ["rt", "dt"])
@pytest.mark.parametrize("omega", [None, 1000.0])
def test_dense_gradient(case, omega):
    cfg = ScenarioConfig.default(n_services=5, cache_size=2, f_bs=5e6)
    const = derive_constants(cfg)
    idx = enumerate_combinations(5, 2)
    obj = DenseObjective(cfg, idx, case, const)
    rng = np.random.default_rng(7)
    a, b = random_design(cfg, const, rng, sparsity=0.0)
    a, b = a.probs.copy(), np.array(b.shares)
    val, g_a, g_b = obj.value_and_grad(a, b, omega)
    assert val == pytest.approx(obj.value(a, b, omega), rel=1e-12)
    h = 1e-6
    for j in np.flatnonzero(a > 10 * h):  # a_j = 0 drops out of the sum, so stay inside
        e = np.zeros_like(a)
        e[j] = h
        fd = (obj.value(a + e, b, omega) - obj.value(a - e, b, omega)) / (2 * h)
        assert g_a[j] == pytest.approx(fd, rel=1e-5, abs=1e-8)
    for j, i in [(0, 0), (3, 1), (7, 0)]:
        e = np.zeros_like(b)
        e[j, i] = h
        fd = (obj.value(a, b + e, omega) - obj.value(a, b - e, omega)) / (2 * h)
        assert g_b[j, i] == pytest.approx(fd, rel=1e-5, abs=1e-8)


def test_barrier_outside_stable_set():
    cfg = ScenarioConfig.default(n_services=4, cache_size=2)
    idx = enumerate_combinations(4, 2)
    obj = DenseObjective(cfg, idx, "rt")
    a = np.full(len(idx), 1 / len(idx))
    b = np.tile([0.999, 0.001], (len(idx), 1))
    assert obj.value(a, b, 1000.0) == -np.inf


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_large_capability_limit(seed):
    cfg = ScenarioConfig.default(f_bs=1e12)
    const = derive_constants(cfg)
    a, b = random_design(cfg, const, np.random.default_rng(seed))
    for case in ("rt", "dt"):
        assert abs(ssp_value(a, b, case, cfg, const) - asymptotic_ssp(a, cfg, const)) <= 1e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 0.99))
def test_asymptotic_gradient(const, x):
    t = np.full(10, x)
    h = 1e-6
    fd = np.array([(asymptotic_ssp(t + h * e, None, const) - asymptotic_ssp(t - h * e, None, const)) / (2 * h)
                   for e in np.eye(10)])
    np.testing.assert_allclose(asymptotic_gradient(t, const), fd, rtol=1e-6)
