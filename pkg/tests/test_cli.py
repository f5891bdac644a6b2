import io
import math

import pytest

from edgessp.cli import main
from edgessp.experiments import CSV_COLUMNS, SweepSpec, emit_csv, read_csv, run_experiment
from edgessp import InvalidConfigError, ScenarioConfig

SMALL = """
[network]
f_bs = 5e6
[services]
n_services = 5
cache_size = 2
input_bits = 3.36e6
output_bits = 3.36e5
workload_cycles = 3e5
gamma_u = 0.84
gamma_q = 1.0
gamma_d = 0.084
[sweep]
variable = f_bs
values = 3e6, 1e7
schemes = alg3, ucps, gcps, tcps, pcos
cases = rt, dt
seeds = 3
trials = 2000
"""


@pytest.fixture
def small_cfg_file(tmp_path):
    path = tmp_path / "small.cfg"
    path.write_text(SMALL)
    return path


def test_sweep_is_byte_identical(small_cfg_file, tmp_path):
    outs = []
    for name in ("one.csv", "two.csv"):
        out = tmp_path / name
        assert main(["sweep", "--config", str(small_cfg_file), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    rows = read_csv(tmp_path / "one.csv")
    assert len(rows) == 2 * 5 * 2
    for r in rows:
        assert list(r) == list(CSV_COLUMNS)
        if r["status"] == "ok":
            assert 0 <= r["ssp_analytic"] <= 1
            assert 0 <= r["ssp_sim"] <= 1
            assert r["ci_low"] <= r["ssp_sim"] <= r["ci_high"]


def test_sweep_workers_match_serial(small_cfg_file, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["sweep", "--config", str(small_cfg_file), "--out", str(a)])
    main(["sweep", "--config", str(small_cfg_file), "--out", str(b), "--workers", "2"])
    assert a.read_bytes() == b.read_bytes()


def test_infeasible_cell_gets_status():
    cfg = ScenarioConfig.default(cache_size=8)
    spec = SweepSpec("f_bs", [1e6], schemes=("alg3",), cases=("rt",))
    row = run_experiment(spec, cfg)[0]
    assert row["status"] == "infeasible" and math.isnan(row["ssp_analytic"])


def test_empty_table_has_header():
    buf = io.StringIO()
    emit_csv([], buf)
    assert buf.getvalue() == ",".join(CSV_COLUMNS) + "\n"


def test_csv_roundtrip(tmp_path):
    row = dict(sweep_var="k", value=3.0, scheme="alg3", case="rt", ssp_analytic=0.1 + 0.2,
               ssp_sim=float("nan"), ci_low=float("nan"), ci_high=float("nan"), iterations=7,
               grad_norm=1e-17, seed=4, status="ok")
    path = tmp_path / "r.csv"
    emit_csv([row], path)
    back = read_csv(path)[0]
    assert back["ssp_analytic"] == 0.1 + 0.2 and back["iterations"] == 7
    assert math.isnan(back["ssp_sim"])


@pytest.mark.parametrize("bad", [dict(variable="x"), dict(values=[]), dict(schemes=("nope",)),
                                 dict(cases=("xx",)), dict(seeds=()), dict(trials=-1)])
def test_sweep_spec_errors(bad):
    kw = dict(variable="f_bs", values=[1e7])
    kw.update(bad)
    with pytest.raises(InvalidConfigError):
        SweepSpec(**kw)


def test_validate_zero_trials_is_config_error(capsys):
    assert main(["validate", "--trials", "0"]) == 2
    assert "trials" in capsys.readouterr().err


def test_missing_config_file(capsys, tmp_path):
    assert main(["near", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_near_and_baseline_report(capsys):
    assert main(["near", "--case", "dt"]) == 0
    out = capsys.readouterr().out
    assert "SSP" in out and "T =" in out
    assert main(["baseline", "gcps", "--trials", "2000"]) == 0
    assert "simulated SSP" in capsys.readouterr().out


def test_solve_writes_trace(small_cfg_file, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert main(["solve", "--config", str(small_cfg_file), "--out", str(out)]) == 0
    assert out.read_text().startswith("r,objective,residual,alpha")
