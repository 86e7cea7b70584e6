import io
import json
import subprocess
import sys

import numpy as np
import pytest

from ucpd import cli
from ucpd.data import ProcessField, read_series_csv
from ucpd.gaussian_limit import NumericalError


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli.main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def series(tmp_path):
    path = tmp_path / "x.csv"
    code, _, err = run("simulate", "--family", "ar1", "--phi", "0.5", "--n", "120", "--seed", "1",
                       "--output", str(path))
    assert code == 0, err
    return path


def test_simulate_writes_commented_csv(series):
    first = series.read_text().splitlines()[0]
    assert first.startswith("# ") and json.loads(first[2:])["family"] == "ar1"
    assert read_series_csv(series).n == 120


def test_test_on_constant_series(tmp_path):
    path = tmp_path / "c.csv"
    path.write_text("\n".join(["0.25"] * 50) + "\n")
    code, out, err = run("test", "--input", str(path), "--m", "200", "--s-count", "5",
                         "--output", str(tmp_path / "r.json"))
    assert code == 0, err
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["statistic"] == 0 and rep["p_value"] == 1 and rep["reject"] is False
    assert "accept" in out


def test_compute_decomposition_row_wise(series, tmp_path):
    outdir = tmp_path / "fields"
    code, _, err = run("compute", "--input", str(series), "--labels", "en,Wn,Rn", "--s-count", "9",
                       "--t-stride", "3", "--output", str(outdir))
    assert code == 0, err
    en, wn, rn = (ProcessField.from_csv(outdir / f"{k}.csv") for k in ("en", "Wn", "Rn"))
    np.testing.assert_allclose(en.values, wn.values + rn.values, rtol=0, atol=1e-15)


def test_emitted_fields_round_trip(series, tmp_path):
    from ucpd.data import EvalGrid
    from ucpd.kernels import make_kernel
    from ucpd.uprocess import eval_e_prime_n

    outdir = tmp_path / "f"
    assert run("compute", "--input", str(series), "--labels", "en_prime", "--s-count", "4",
               "--format", "json", "--output", str(outdir))[0] == 0
    back = ProcessField.from_json(outdir / "en_prime.json")
    ref = eval_e_prime_n(read_series_csv(series), make_kernel("difference"), EvalGrid.default(120, s_count=4))
    assert back.values.tobytes() == ref.values.tobytes()


def test_malformed_csv_exit_1_with_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("# comment\n0.1\nfoo\n")
    code, _, err = run("test", "--input", str(path))
    assert code == 1 and "row 3" in err


def test_misaligned_t_grid(series, tmp_path):
    code, _, err = run("compute", "--input", str(series), "--t-points", "0.5,0.333",
                       "--output", str(tmp_path / "o"))
    assert code == 1 and "k/n" in err


def test_usage_errors():
    assert run()[0] == 1
    assert run("simulate", "--bogus")[0] == 1
    assert run("frobnicate")[0] == 1
    assert run("simulate", "--n", "10")[0] == 1  # missing --output
    code, _, err = run("validate", "--m", "10", "--ns", "50,100", "--output", "/dev/null")
    assert code == 1 and "at least 50" in err


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nseed = 5\nn = 40\nfamily = ar1\nphi = 0.3\n")
    a, b, c = (tmp_path / f"{k}.csv" for k in "abc")
    assert run("simulate", "--config", str(cfg), "--output", str(a))[0] == 0
    assert run("simulate", "--family", "ar1", "--phi", "0.3", "--seed", "5", "--n", "40",
               "--output", str(b))[0] == 0
    assert run("simulate", "--config", str(cfg), "--seed", "6", "--output", str(c))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()
    assert json.loads(c.read_text().splitlines()[0][2:])["seed"] == 6
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    assert run("simulate", "--config", str(bad), "--output", str(a))[0] == 1


def test_numerical_failure_exit_2(series, tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise NumericalError("covariance matrix contains non-finite entries")

    monkeypatch.setattr(cli, "build_field", boom)
    code, _, err = run("critvals", "--input", str(series), "--s-count", "3", "--m", "50",
                       "--output", str(tmp_path / "cv.json"))
    assert code == 2 and "numerical" in err


def test_critvals_table(tmp_path):
    path = tmp_path / "cv.json"
    code, out, err = run("critvals", "--n", "50", "--s-count", "3", "--t-stride", "5", "--m", "500",
                         "--alpha", "0.1,0.05", "--output", str(path))
    assert code == 0, err
    table = json.loads(path.read_text())
    assert [r["alpha"] for r in table] == [0.1, 0.05]
    assert table[0]["value"] <= table[1]["value"]
    assert all(set(r) == {"alpha", "functional", "m", "seed", "value"} for r in table)


def test_integral_test_needs_mu(series):
    assert run("test", "--input", str(series), "--functional", "integral_mu")[0] == 1


def test_console_script():
    res = subprocess.run([sys.executable, "-m", "ucpd.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "simulate" in res.stdout


@pytest.mark.slow
def test_validate_ar1_ks_trend(tmp_path):
    path = tmp_path / "val.json"
    code, out, err = run("validate", "--family", "ar1", "--phi", "0.5", "--ns", "200,800,3200",
                         "--m", "500", "--output", str(path))
    assert code == 0, err
    rows = json.loads(path.read_text())["rows"]
    ks = [r["ks_distance"] for r in rows]
    assert all(b <= a for a, b in zip(ks, ks[1:])), ks
