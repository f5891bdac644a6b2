"""Link success probabilities and task arrival rates.

Every function is vectorized over services: ``t`` is the length-N vector of
cache-hit probabilities and the result is a length-N array. ``const`` may be a
ScenarioConfig or precomputed DerivedConstants.
"""

from __future__ import annotations

import numpy as np

from .constants import DerivedConstants, derive_constants
from .exceptions import InvalidConfigError


def as_constants(const):
    return const if isinstance(const, DerivedConstants) else derive_constants(const)


def _ratio(num, den):
    num, den = np.broadcast_arrays(np.asarray(num, dtype=float), np.asarray(den, dtype=float))
    out = np.zeros(num.shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def sutp(t, const):
    """Uplink success probability T / (T + A); zero where T = 0."""
    k = as_constants(const)
    t = np.asarray(t, dtype=float)
    return _ratio(t, t + k.A)


def sdtp(t, const):
    """Downlink success probability T / (T(1 + B) + (1 - T)C); zero where T = 0."""
    k = as_constants(const)
    t = np.asarray(t, dtype=float)
    return _ratio(t, t * (1.0 + k.B) + (1.0 - t) * k.C)


def mean_users(t, const):
    """Mean number of users requesting each service at a caching BS, 1 + c_n / T_n."""
    k = as_constants(const)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise InvalidConfigError("mean number of users is undefined for a service that is never cached")
    return 1.0 + k.c_load / t


def arrival_rate(t, const):
    """Task arrival rate per virtual server, E[N_n] * SUTP_n = (T + c) / (T + A).

    The right-hand form is smooth at T = 0 and is used there (limit c / A,
    or 1 when there is no interference and no other user).
    """
    k = as_constants(const)
    t = np.asarray(t, dtype=float)
    num = t + k.c_load
    den = t + k.A
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0)


def arrival_rate_derivative(t, const):
    """d lambda / d T = (A - c) / (T + A)^2."""
    k = as_constants(const)
    t = np.asarray(t, dtype=float)
    den = (t + k.A) ** 2
    return _ratio(k.A - k.c_load, den)
