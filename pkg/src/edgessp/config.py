"""Scenario parameters and the INI config-file format.

All per-service quantities are stored as tuples so a config is hashable and
immutable; array views are available through the ``*_arr`` properties.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import InvalidConfigError

PER_SERVICE = (
    "popularity",
    "input_bits",
    "output_bits",
    "workload_cycles",
    "gamma_u",
    "gamma_q",
    "gamma_d",
)

# 1 KB is read as 1000 bytes of 8 bits.
BITS_PER_KB = 8000.0


def zipf_popularity(n_services, exponent, negate=False):
    """Popularity p_n proportional to n**exponent (or n**-exponent if ``negate``).

    With a positive exponent the higher indices are the more popular ones.
    """
    if n_services < 1:
        raise InvalidConfigError("n_services must be >= 1")
    e = -exponent if negate else exponent
    w = np.arange(1, n_services + 1, dtype=float) ** e
    return w / w.sum()


@dataclass(frozen=True)
class ServiceParams:
    """Parameters of a single service, as a read-only record."""

    popularity: float
    input_bits: float
    output_bits: float
    workload_cycles: float
    gamma_u: float
    gamma_q: float
    gamma_d: float


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical-layer, service and solver parameters of one network scenario."""

    popularity: tuple
    input_bits: tuple
    output_bits: tuple
    workload_cycles: tuple
    gamma_u: tuple
    gamma_q: tuple
    gamma_d: tuple
    cache_size: int = 3
    alpha: float = 4.0
    bandwidth_w: float = 10e6
    reuse_kappa: int = 30
    p_s: float = 1.0
    density_bs: float = 5e-4
    density_u: float = 3e-3
    f_bs: float = 7.5e6
    sigmoid_delta: float = 100.0
    barrier_omega: float = 1000.0
    grad_tol_tau: float = 1e-4
    zipf_exponent: float = 1.1
    power_bs: float | None = None
    power_u: float | None = None

    def __post_init__(self):
        n = len(self.popularity)
        for name in PER_SERVICE:
            vals = tuple(float(v) for v in np.atleast_1d(getattr(self, name)))
            if len(vals) == 1 and n > 1:
                vals = vals * n
            object.__setattr__(self, name, vals)
        self._check()

    def _check(self):
        n = self.n_services
        if n < 1:
            raise InvalidConfigError("at least one service is required")
        for name in PER_SERVICE:
            if len(getattr(self, name)) != n:
                raise InvalidConfigError(f"{name} must have {n} entries")
        p = self.popularity_arr
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise InvalidConfigError("popularity must be nonnegative and sum to 1")
        if not self.alpha > 2:
            raise InvalidConfigError("path-loss exponent must exceed 2")
        if not 1 <= self.cache_size <= n:
            raise InvalidConfigError(f"cache size K={self.cache_size} must lie in [1, {n}]")
        if self.reuse_kappa < 1 or int(self.reuse_kappa) != self.reuse_kappa:
            raise InvalidConfigError("reuse factor must be a positive integer")
        if not 0 <= self.p_s <= 1:
            raise InvalidConfigError("request probability must lie in [0, 1]")
        for name in ("bandwidth_w", "density_bs", "f_bs", "sigmoid_delta", "barrier_omega", "grad_tol_tau"):
            if not getattr(self, name) > 0:
                raise InvalidConfigError(f"{name} must be positive")
        if self.density_u < 0:
            raise InvalidConfigError("user density must be nonnegative")
        for name in PER_SERVICE[1:]:
            if np.any(np.asarray(getattr(self, name)) <= 0):
                raise InvalidConfigError(f"{name} must be strictly positive")

    @classmethod
    def default(cls, n_services=10, cache_size=3, zipf_negate=False, **overrides):
        """Evaluation defaults: 420 KB in, 42 KB out, 3e5 cycles per task."""
        base = dict(
            popularity=tuple(zipf_popularity(n_services, overrides.get("zipf_exponent", 1.1), zipf_negate)),
            input_bits=420 * BITS_PER_KB,
            output_bits=42 * BITS_PER_KB,
            workload_cycles=3e5,
            gamma_u=0.84,
            gamma_q=1.0,
            gamma_d=0.084,
            cache_size=cache_size,
        )
        base.update(overrides)
        return cls(**base)

    @property
    def n_services(self):
        return len(self.popularity)

    def __getattr__(self, name):
        # popularity_arr, gamma_q_arr, ... as float arrays
        if name.endswith("_arr") and name[:-4] in PER_SERVICE:
            return np.asarray(getattr(self, name[:-4]), dtype=float)
        raise AttributeError(name)

    @property
    def mu(self):
        """Full-CPU service rate F_bs / f_n in tasks per second."""
        return self.f_bs / self.workload_cycles_arr

    @property
    def services(self):
        return [ServiceParams(*(getattr(self, k)[i] for k in PER_SERVICE)) for i in range(self.n_services)]

    def replace(self, **changes):
        """Copy with fields changed; scalar per-service values are broadcast."""
        n = self.n_services
        for name in PER_SERVICE:
            if name in changes and np.ndim(changes[name]) == 0:
                changes[name] = (float(changes[name]),) * n
        return dataclasses.replace(self, **changes)

    def scale_delays(self, factor):
        """Scale all three target delays jointly by ``factor``."""
        return self.replace(
            gamma_u=tuple(factor * g for g in self.gamma_u),
            gamma_q=tuple(factor * g for g in self.gamma_q),
            gamma_d=tuple(factor * g for g in self.gamma_d),
        )

    def with_services(self, n_services, cache_size=None):
        """Resize to ``n_services`` with fresh Zipf popularity and broadcast service data.

        Service data are taken from the first service.
        """
        negate = bool(self.popularity[0] > self.popularity[-1]) if self.n_services > 1 else False
        p = tuple(zipf_popularity(n_services, self.zipf_exponent, negate))
        kw = {k: (getattr(self, k)[0],) * n_services for k in PER_SERVICE[1:]}
        return dataclasses.replace(self, popularity=p, cache_size=cache_size or self.cache_size, **kw)


# ---------------------------------------------------------------------------
# INI files

_SCALARS = {
    "network": {
        "alpha": float,
        "bandwidth_hz": float,
        "reuse_factor": int,
        "request_prob": float,
        "density_bs": float,
        "density_u": float,
        "f_bs": float,
        "power_bs": float,
        "power_u": float,
    },
    "solver": {"sigmoid_delta": float, "barrier_omega": float, "grad_tol": float},
}
_RENAME = {
    "bandwidth_hz": "bandwidth_w",
    "reuse_factor": "reuse_kappa",
    "request_prob": "p_s",
    "grad_tol": "grad_tol_tau",
}


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def config_from_parser(cp):
    """Build a ScenarioConfig from a parsed INI file."""
    kw = {}
    for section, keys in _SCALARS.items():
        if not cp.has_section(section):
            continue
        for key, conv in keys.items():
            raw = cp.get(section, key, fallback="").strip()
            if raw:
                kw[_RENAME.get(key, key)] = conv(float(raw))
    if not cp.has_section("services"):
        raise InvalidConfigError("config needs a [services] section")
    s = cp["services"]
    if "software_sizes" in s:
        raise InvalidConfigError("unequal software sizes are not supported; every service occupies one cache slot")
    n = s.getint("n_services")
    k = s.getint("cache_size")
    if n is None or k is None:
        raise InvalidConfigError("[services] needs n_services and cache_size")
    eps = s.getfloat("zipf_exponent", 1.1)
    pop = s.get("popularity", "zipf").strip()
    if pop.lower() == "zipf":
        p = zipf_popularity(n, eps, s.getboolean("zipf_negate", False))
    else:
        p = np.asarray(_floats(pop))
        p = p / p.sum()
    kw.update(popularity=tuple(p), cache_size=k, zipf_exponent=eps)
    for name in PER_SERVICE[1:]:
        if name in s:
            kw[name] = tuple(_floats(s[name]))
    missing = [name for name in PER_SERVICE[1:] if name not in kw]
    if missing:
        raise InvalidConfigError(f"[services] is missing {', '.join(missing)}")
    return ScenarioConfig(**kw)


def read_parser(path=None):
    """Parse ``path`` (or the shipped defaults) into a ConfigParser."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if path is None:
        cp.read_string(resources.files("edgessp").joinpath("default.cfg").read_text())
    else:
        path = Path(path)
        if not path.exists():
            raise InvalidConfigError(f"config file {path} not found")
        cp.read(path)
    return cp


def load_config(path=None):
    """Load a ScenarioConfig from an INI file; ``None`` loads the shipped defaults."""
    return config_from_parser(read_parser(path))
