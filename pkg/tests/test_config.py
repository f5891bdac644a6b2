import numpy as np
import pytest

from edgessp import InvalidConfigError, ScenarioConfig, load_config, zipf_popularity
from edgessp.config import BITS_PER_KB, read_parser


def test_default_values(cfg):
    assert cfg.n_services == 10 and cfg.cache_size == 3
    assert cfg.input_bits[0] == 420 * BITS_PER_KB == 3.36e6
    assert cfg.output_bits[0] == 3.36e5
    np.testing.assert_allclose(cfg.mu, 7.5e6 / 3e5)
    assert abs(sum(cfg.popularity) - 1) < 1e-15


def test_shipped_file_matches_defaults(cfg):
    loaded = load_config()
    assert loaded == cfg


def test_zipf_direction():
    p = zipf_popularity(5, 1.1)
    assert np.all(np.diff(p) > 0)
    q = zipf_popularity(5, 1.1, negate=True)
    np.testing.assert_allclose(q, q[0] * np.arange(1, 6) ** -1.1)
    assert q.sum() == pytest.approx(1.0)


def test_scale_delays(cfg):
    s = cfg.scale_delays(2.0)
    assert s.gamma_u[0] == pytest.approx(1.68)
    assert s.gamma_d[0] == pytest.approx(0.168)
    assert s.gamma_q[0] == pytest.approx(2.0)


def test_replace_broadcasts(cfg):
    c = cfg.replace(gamma_q=0.5, f_bs=1e7)
    assert c.gamma_q == (0.5,) * 10
    assert c.mu[0] == pytest.approx(1e7 / 3e5)


def test_with_services(cfg):
    big = cfg.with_services(100, 30)
    assert big.n_services == 100 and big.cache_size == 30
    assert big.popularity_arr[-1] > big.popularity_arr[0]


@pytest.mark.parametrize("bad", [
    dict(cache_size=11), dict(cache_size=0), dict(alpha=2.0), dict(p_s=1.5),
    dict(f_bs=0.0), dict(reuse_kappa=0), dict(density_u=-1.0), dict(gamma_q=-1.0),
])
def test_rejects_bad_values(cfg, bad):
    with pytest.raises(InvalidConfigError):
        cfg.replace(**bad)


def test_rejects_bad_popularity(cfg):
    with pytest.raises(InvalidConfigError):
        cfg.replace(popularity=(0.5,) * 10)


def _write(tmp_path, text):
    path = tmp_path / "c.cfg"
    path.write_text(text)
    return path


BASE = """
[network]
f_bs = 1e7
[services]
n_services = 4
cache_size = 2
input_bits = 3.36e6
output_bits = 3.36e5
workload_cycles = 3e5
gamma_u = 0.84
gamma_q = 1.0
gamma_d = 0.084
"""


def test_ini_roundtrip(tmp_path):
    c = load_config(_write(tmp_path, BASE))
    assert c.n_services == 4 and c.f_bs == 1e7
    np.testing.assert_allclose(c.popularity_arr, zipf_popularity(4, 1.1))


def test_ini_explicit_popularity(tmp_path):
    c = load_config(_write(tmp_path, BASE + "popularity = 1, 1, 1, 1\n"))
    np.testing.assert_allclose(c.popularity_arr, 0.25)


def test_ini_unequal_software_sizes(tmp_path):
    with pytest.raises(InvalidConfigError, match="software"):
        load_config(_write(tmp_path, BASE + "software_sizes = 1, 2, 1, 1\n"))


def test_ini_missing_key(tmp_path):
    with pytest.raises(InvalidConfigError):
        load_config(_write(tmp_path, BASE.replace("gamma_d = 0.084\n", "")))


def test_ini_missing_file(tmp_path):
    with pytest.raises(InvalidConfigError):
        read_parser(tmp_path / "nope.cfg")


def test_services_records(cfg):
    s = cfg.services
    assert len(s) == 10 and s[3].popularity == cfg.popularity[3]
    assert isinstance(cfg, ScenarioConfig)
