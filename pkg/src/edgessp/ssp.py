"""Successful service probability: closed form, factored form, gradients, asymptote."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .combinations import CachingDistribution, t_from_a
from .constants import derive_constants
from .coverage import arrival_rate, arrival_rate_derivative, sdtp, sutp
from .exceptions import NumericalError, QueueUnstableError
from .queueing import scpp, scpp_grad

CASES = ("rt", "dt")


def check_case(case):
    case = str(case).lower()
    if case not in CASES + ("dt_exact",):
        raise ValueError(f"case must be 'rt' or 'dt', got {case!r}")
    return case


@dataclass(frozen=True, eq=False)
class SspReport:
    """Per-service factors and the total SSP for one (a, b) design."""

    case: str
    sutp: np.ndarray
    sdtp: np.ndarray
    scpp_weighted: np.ndarray
    contribution: np.ndarray
    total_ssp: float

    def __float__(self):
        return float(self.total_ssp)


def closed_form_weight(t, const, last=None):
    """h_n(T) = p_n T / (D T^2 + E T + A*last); ``last`` defaults to C."""
    last = const.C if last is None else last
    t = np.asarray(t, dtype=float)
    den = const.D * t * t + const.E * t + const.A * last
    out = np.zeros_like(t)
    np.divide(const.p * t, den, out=out, where=t > 0)
    return out


def closed_form_weight_derivative(t, const):
    """dh/dT = p (AC - D T^2) / (D T^2 + E T + AC)^2."""
    t = np.asarray(t, dtype=float)
    ac = const.A * const.C
    den = const.D * t * t + const.E * t + ac
    out = np.zeros_like(t)
    np.divide(const.p * (ac - const.D * t * t), den * den, out=out, where=den > 0)
    # with no interference h = p/(D T) and the derivative at T = 0 is unbounded
    return out


def _pair_scpp(cfg, const, combos, shares, lam, case):
    n = combos
    try:
        return scpp(shares, lam[n], const.mu[n], const.gamma_q[n], case, cfg.sigmoid_delta)
    except QueueUnstableError:
        bad = shares * const.mu[n] < lam[n]
        row, col = np.argwhere(bad)[0]
        raise QueueUnstableError(
            f"queue of service {n[row, col]} in combination {tuple(n[row].tolist())} is unstable",
            service=int(n[row, col]),
            combo=tuple(n[row].tolist()),
        ) from None


def ssp(a, b, case, cfg, const=None, form="closed", check=True):
    """SSP of caching distribution ``a`` with computing allocation ``b``.

    ``form='closed'`` evaluates p T/(D T^2 + E T + AC) * sum_j a_j SCPP;
    ``form='factored'`` multiplies SUTP, SDTP and the conditional SCPP. With
    ``check`` both are computed and required to agree to 1e-12. Combinations
    with zero probability are skipped, including their stability check.
    Case 'dt' uses the smoothed M/D/1 form; 'dt_exact' the exact indicator.
    """
    case = check_case(case)
    const = const or derive_constants(cfg)
    if not isinstance(a, CachingDistribution):
        raise TypeError("a must be a CachingDistribution")
    sup = a.support()
    n_serv = cfg.n_services
    t = t_from_a(sup, n_serv)
    lam = arrival_rate(t, const)
    shares = b.aligned(sup.combos)
    s = _pair_scpp(cfg, const, sup.combos, shares, lam, case)
    weighted = np.bincount(sup.combos.ravel(), weights=(sup.probs[:, None] * s).ravel(), minlength=n_serv)
    cond = np.zeros(n_serv)
    np.divide(weighted, t, out=cond, where=t > 0)
    up, down = sutp(t, const), sdtp(t, const)
    factored = const.p * up * down * cond
    closed = closed_form_weight(t, const) * weighted
    if check and np.max(np.abs(closed - factored), initial=0.0) > 1e-12:
        raise NumericalError("closed-form and factored SSP disagree")
    contrib = closed if form == "closed" else factored
    return SspReport(case, up, down, cond, contrib, float(contrib.sum()))


def ssp_value(a, b, case, cfg, const=None):
    return ssp(a, b, case, cfg, const, check=False).total_ssp


def asymptotic_ssp(x, cfg, const=None):
    """Infinite-capability SSP: sum_n p_n T_n^2 / (D T^2 + E T + AC).

    ``x`` is a CachingDistribution or a vector of service probabilities.
    """
    const = const or derive_constants(cfg)
    t = t_from_a(x, cfg.n_services) if isinstance(x, CachingDistribution) else np.asarray(x, dtype=float)
    return float(np.sum(asymptotic_terms(t, const)))


def asymptotic_terms(t, const):
    t = np.asarray(t, dtype=float)
    den = const.D * t * t + const.E * t + const.A * const.C
    out = np.zeros_like(t)
    np.divide(const.p * t * t, den, out=out, where=den > 0)
    return out


def asymptotic_gradient(t, const):
    """dP/dT_n = p T (E T + 2AC) / (D T^2 + E T + AC)^2."""
    t = np.asarray(t, dtype=float)
    ac = const.A * const.C
    den = const.D * t * t + const.E * t + ac
    out = np.zeros_like(t)
    np.divide(const.p * t * (const.E * t + 2 * ac), den * den, out=out, where=den > 0)
    return out


class DenseObjective:
    """SSP and its gradient over a full combination index.

    ``a`` is a length-J vector and ``b`` a (J, K) array aligned with
    ``index.combos``. With ``omega`` set, the log-barrier
    (1/omega) * sum_{j, n in j} log(b_{n,j} mu_n - lambda_n) is added.
    """

    def __init__(self, cfg, index, case, const=None):
        self.cfg = cfg
        self.index = index
        self.case = check_case(case)
        self.const = const or derive_constants(cfg)
        self.combos = index.combos
        self.n = cfg.n_services

    def t(self, a):
        k = self.combos.shape[1]
        return np.bincount(self.combos.ravel(), weights=np.repeat(a, k), minlength=self.n)

    def slack(self, a, b):
        lam = arrival_rate(self.t(a), self.const)
        return b * self.const.mu[self.combos] - lam[self.combos]

    def _pieces(self, a, b):
        c = self.const
        t = self.t(a)
        lam = arrival_rate(t, c)
        n = self.combos
        s, ds_db, ds_dl = scpp_grad(b, lam[n], c.mu[n], c.gamma_q[n], self.case, self.cfg.sigmoid_delta)
        return t, lam, s, ds_db, ds_dl

    def value(self, a, b, omega=None):
        """Objective value; -inf outside the strictly stable set when ``omega`` is set."""
        sl = self.slack(a, b)
        if omega is not None and np.any(sl <= 0):
            return -np.inf
        c = self.const
        t = self.t(a)
        lam = arrival_rate(t, c)
        live = a > 0
        n = self.combos[live]
        s = scpp(b[live], lam[n], c.mu[n], c.gamma_q[n], self.case, self.cfg.sigmoid_delta)
        h = closed_form_weight(t, c)
        val = float(np.sum(a[live][:, None] * h[n] * s))
        if omega is not None:
            val += float(np.sum(np.log(sl))) / omega
        return val

    def value_and_grad(self, a, b, omega=None):
        """Return (value, d/da, d/db). Requires every queue to be stable."""
        c = self.const
        n = self.combos
        t, lam, s, ds_db, ds_dl = self._pieces(a, b)
        h = closed_form_weight(t, c)
        dh = closed_form_weight_derivative(t, c)
        dlam = arrival_rate_derivative(t, c)
        aw = a[:, None]
        val = float(np.sum(aw * h[n] * s))
        sum_s = np.bincount(n.ravel(), weights=(aw * s).ravel(), minlength=self.n)
        sum_dl = np.bincount(n.ravel(), weights=(aw * ds_dl).ravel(), minlength=self.n)
        d_t = dh * sum_s + h * dlam * sum_dl
        g_b = aw * h[n] * ds_db
        if omega is not None:
            sl = b * c.mu[n] - lam[n]
            if np.any(sl <= 0):
                raise QueueUnstableError("barrier gradient requested outside the stable set")
            val += float(np.sum(np.log(sl))) / omega
            inv = 1.0 / sl
            g_b = g_b + c.mu[n] * inv / omega
            d_t = d_t - dlam * np.bincount(n.ravel(), weights=inv.ravel(), minlength=self.n) / omega
        g_a = np.sum(h[n] * s, axis=1) + np.sum(d_t[n], axis=1)
        return val, g_a, g_b
