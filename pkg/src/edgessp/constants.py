"""Interference integral and the per-service constants derived from a config."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .exceptions import InvalidConfigError, NumericalError


def _tail(lo, beta):
    """Integral of 1/(1+u**beta) over [lo, inf) for beta > 1."""
    head_end = max(lo, 1.0)
    head = 0.0
    if head_end > lo:
        head, err = integrate.quad(lambda u: 1.0 / (1.0 + u**beta), lo, head_end, epsabs=0, epsrel=1e-13)
        if not np.isfinite(head) or err > 1e-10 * max(head, 1e-300):
            raise NumericalError("quadrature over the finite part did not converge")
    # u = 1/v turns the infinite tail into v**(beta-2)/(1+v**beta) on (0, 1/head_end];
    # the algebraic endpoint weight is handled exactly by QAWS.
    tail, err = integrate.quad(
        lambda v: 1.0 / (1.0 + v**beta),
        0.0,
        1.0 / head_end,
        weight="alg",
        wvar=(beta - 2.0, 0.0),
        epsabs=0,
        epsrel=1e-13,
    )
    if not np.isfinite(tail) or err > 1e-10 * max(tail, 1e-300):
        raise NumericalError("quadrature over the infinite tail did not converge")
    return head + tail


def z_integral(theta, alpha, c):
    """Z(theta, alpha, c) = theta^(2/alpha) * int_{(c/theta)^(2/alpha)}^inf du / (1 + u^(alpha/2)).

    c = 0 integrates over the whole plane; c = 1 excludes the disk inside the
    serving distance. alpha = 4 uses the arctangent closed form.
    """
    if theta < 0:
        raise InvalidConfigError("SIR threshold must be nonnegative")
    if not alpha > 2:
        raise InvalidConfigError("path-loss exponent must exceed 2")
    if c < 0:
        raise InvalidConfigError("lower-limit parameter must be nonnegative")
    if theta == 0:
        return 0.0
    lo = (c / theta) ** (2.0 / alpha)
    if alpha == 4:
        return math.sqrt(theta) * (0.5 * math.pi - math.atan(lo))
    return theta ** (2.0 / alpha) * _tail(lo, alpha / 2.0)


def sir_threshold(bits, bandwidth, kappa, delay):
    """SIR needed to move ``bits`` within ``delay`` on a W/kappa channel."""
    with np.errstate(over="ignore"):  # overflow is reported by the caller
        return 2.0 ** (kappa * np.asarray(bits, dtype=float) / (bandwidth * np.asarray(delay, dtype=float))) - 1.0


@dataclass(frozen=True, eq=False)
class DerivedConstants:
    """Per-service arrays of the constants that enter the closed-form SSP.

    A, B, C are the interference terms; D = 1 + B - C and E = C + A*D;
    mu = F_bs / f_n and J = mu * gamma_q. ``c_load`` is the user-load term
    1.28 p_n p_s lambda_u / lambda_bs of the mean number of requesting users.
    """

    theta_u: np.ndarray
    theta_d: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray
    mu: np.ndarray
    J: np.ndarray
    gamma_q: np.ndarray
    p: np.ndarray
    c_load: np.ndarray


def _z_vec(theta, alpha, c):
    return np.array([z_integral(float(t), alpha, c) for t in theta])


def derive_constants(cfg):
    th_u = sir_threshold(cfg.input_bits_arr, cfg.bandwidth_w, cfg.reuse_kappa, cfg.gamma_u_arr)
    th_d = sir_threshold(cfg.output_bits_arr, cfg.bandwidth_w, cfg.reuse_kappa, cfg.gamma_d_arr)
    if not (np.all(np.isfinite(th_u)) and np.all(np.isfinite(th_d))):
        raise InvalidConfigError("SIR threshold overflows; the rate target is unreachable")
    q = cfg.p_s / cfg.reuse_kappa
    A = q * _z_vec(th_u, cfg.alpha, 0)
    B = q * _z_vec(th_d, cfg.alpha, 1)
    C = q * _z_vec(th_d, cfg.alpha, 0)
    D = 1.0 + B - C
    E = C + A * D
    mu = cfg.mu
    p = cfg.popularity_arr
    c_load = 1.28 * p * cfg.p_s * cfg.density_u / cfg.density_bs
    out = DerivedConstants(th_u, th_d, A, B, C, D, E, mu, mu * cfg.gamma_q_arr, cfg.gamma_q_arr, p, c_load)
    for v in vars(out).values():
        v.setflags(write=False)
    return out
