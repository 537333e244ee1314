import csv
import io
import json
import math

import numpy as np
import pytest

from haircut import CORP_A_5_10Y, SPX_6P, DejdParams, UnattainableTargetError, model_to_dict, simulate_returns
from haircut import cli


def write_model(path, params):
    path.write_text(json.dumps(model_to_dict(params)))
    return str(path)


def write_prices(path, prices, start="2010-01-04"):
    days = np.arange(np.datetime64(start), np.datetime64(start) + 3 * len(prices))
    days = days[np.is_busday(days)][: len(prices)]
    lines = ["date,price"] + [f"{d},{p:.10g}" for d, p in zip(days, prices)]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def simulated_prices(n, seed=1):
    x = simulate_returns(SPX_6P.to_model(), 1 / 252, n - 1, seed=seed)
    return 100 * np.exp(np.concatenate([[0.0], np.cumsum(x)]))


def table(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def metadata(text):
    out = {}
    for line in text.splitlines():
        if line.startswith("# "):
            k, v = line[2:].split("=", 1)
            out[k] = json.loads(v)
    return out


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def base_model(tmp_path):
    return write_model(tmp_path / "base.json", CORP_A_5_10Y)


def test_haircut_table_anchor(capsys, base_model):
    code, out, _ = run(capsys, "haircut", "--model", base_model, "--mpr", "10", "--g", "0",
                       "--criterion", "el", "--ratings", "moodys_ig")
    assert code == 0
    rows = table(out)
    got = [float(r["haircut_pct"]) for r in rows[:3]]
    assert got == pytest.approx([6.49, 5.19, 4.68], abs=0.15)
    assert all(len(r["haircut_pct"].split(".")[1]) == 2 for r in rows)
    meta = metadata(out)
    assert meta["mpr"] == 10 and meta["criterion"] == "el" and meta["target_rel_error"] == 1e-9


def test_var_on_diffusion_matches_quantile(capsys, tmp_path):
    from scipy.stats import norm

    model = write_model(tmp_path / "ln.json", DejdParams(-0.02, 0.2, 0.0, 0.0, 50.0, 50.0))
    code, out, _ = run(capsys, "haircut", "--model", model, "--criterion", "var", "--q", "0.99")
    assert code == 0
    t = 10 / 252
    exact = 1 - math.exp(-0.02 * t + 0.2 * math.sqrt(t) * norm.ppf(0.01))
    assert float(table(out)[0]["haircut_pct"]) / 100 == pytest.approx(exact, abs=1e-4)


def test_liquidity_discount_adds_add_on_column(capsys, base_model):
    code, out, _ = run(capsys, "haircut", "--model", base_model, "--g", "0.05", "--target", "1e-5")
    assert code == 0
    row = table(out)[0]
    assert float(row["addon_pct"]) > 0


def test_outputs_are_byte_identical(capsys, tmp_path, base_model):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert cli.main(["haircut", "--model", base_model, "--criterion", "es", "--q", "0.99", "-o", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert b"\r\n" not in a.read_bytes()


def test_config_precedence(capsys, tmp_path, base_model):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"model": base_model, "mpr": 20, "criterion": "pd", "target": 1e-3}))
    _, out, _ = run(capsys, "haircut", "--config", str(cfg))
    assert metadata(out)["mpr"] == 20 and metadata(out)["criterion"] == "pd"
    _, out, _ = run(capsys, "haircut", "--config", str(cfg), "--mpr", "5")
    assert metadata(out)["mpr"] == 5
    cfg.write_text(json.dumps({"model": base_model, "colour": "red"}))
    code, _, err = run(capsys, "haircut", "--config", str(cfg))
    assert code == cli.EXIT_INPUT and "colour" in err


def test_exactly_one_model_source(capsys, tmp_path, base_model):
    prices = write_prices(tmp_path / "p.csv", simulated_prices(300))
    code, _, err = run(capsys, "haircut", "--model", base_model, "--prices", prices)
    assert code == cli.EXIT_INPUT and "exactly one" in err
    code, _, _ = run(capsys, "haircut")
    assert code == cli.EXIT_INPUT


def test_unattainable_target_exit_code(capsys, monkeypatch, base_model):
    def refuse(*args, **kwargs):
        raise UnattainableTargetError("expected loss 1e-300 not met")

    monkeypatch.setattr(cli, "haircut_expected_loss", refuse)
    code, _, err = run(capsys, "haircut", "--model", base_model, "--target", "1e-12")
    assert code == cli.EXIT_UNATTAINABLE and "not met" in err


def test_malformed_csv_names_the_line(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("date,price\n2020-01-02,100\n2020-01-03,abc\n")
    code, _, err = run(capsys, "estimate", str(bad))
    assert code == cli.EXIT_INPUT and "line 3" in err
    bad.write_text("date,price\n2020-01-02,100\n2020-01-06,101\n2020-01-03,102\n")
    code, _, err = run(capsys, "estimate", str(bad))
    assert code == cli.EXIT_INPUT and "line 4" in err and "2020-01-03" in err


def test_estimate_non_convergence_still_writes_results(capsys, tmp_path):
    prices = write_prices(tmp_path / "p.csv", simulated_prices(400))
    out_path = tmp_path / "est.json"
    code, _, _ = run(capsys, "estimate", prices, "--max-evals", "5", "-o", str(out_path))
    assert code == cli.EXIT_NONCONVERGED
    doc = json.loads(out_path.read_text())
    assert [s["stage"] for s in doc["stages"]] == ["4p", "5p", "6p"]
    lls = [s["log_likelihood"] for s in doc["stages"]]
    assert lls[0] <= lls[1] <= lls[2]


@pytest.mark.slow
def test_estimate_converges(capsys, tmp_path):
    prices = write_prices(tmp_path / "p.csv", simulated_prices(600, seed=3))
    code, out, _ = run(capsys, "estimate", prices)
    assert code == 0
    doc = json.loads(out)
    lls = [s["log_likelihood"] for s in doc["stages"]]
    assert lls[0] <= lls[1] <= lls[2]
    assert doc["stages"][0]["sample_stats"]["n"] == 599


def test_too_short_for_estimation(capsys, tmp_path):
    prices = write_prices(tmp_path / "p.csv", simulated_prices(100))
    code, _, err = run(capsys, "estimate", prices)
    assert code == cli.EXIT_INPUT and "at least 250" in err


def test_sens_zero_row_and_invalid_shift(capsys, tmp_path, base_model):
    shifts = tmp_path / "s.csv"
    shifts.write_text("parameter,delta\nmu,0\nsigma_a,0.01\n")
    code, out, _ = run(capsys, "sens", "--model", base_model, "--shifts", str(shifts))
    assert code == 0
    rows = table(out)
    assert [r["shift"] for r in rows] == ["base", "mu+0", "sigma_a+0.01"]
    assert all(float(rows[1][k]) == 0.0 for k in ("Aaa", "Aa1", "Aa2"))
    assert float(rows[2]["Aaa"]) == pytest.approx(0.37, abs=0.05)
    shifts.write_text("parameter,delta\neta_up,-500\n")
    code, _, err = run(capsys, "sens", "--model", base_model, "--shifts", str(shifts))
    assert code == cli.EXIT_INPUT and "eta_up-500" in err


def test_rawhc(capsys, tmp_path):
    flat = write_prices(tmp_path / "flat.csv", np.full(300, 50.0))
    code, out, _ = run(capsys, "rawhc", flat)
    assert code == 0
    assert [r["haircut_pct"] for r in table(out)] == ["0.00", "0.00"]
    noisy = write_prices(tmp_path / "n.csv", simulated_prices(800))
    code, out, err = run(capsys, "rawhc", noisy, "--horizon", "10", "--var-q", "0.99", "--es-q", "0.99")
    rows = {r["measure"]: float(r["haircut_pct"]) for r in table(out)}
    assert code == 0 and rows["ES"] >= rows["VaR"] > 0
    assert "overlapping" in err
    assert metadata(out)["n_windows"] == 790


def test_roll_short_series_skips_with_notice(capsys, tmp_path):
    prices = write_prices(tmp_path / "p.csv", simulated_prices(300))
    code, out, err = run(capsys, "roll", prices, "--window-years", "5", "--start", "2010-07-01", "--end", "2010-12-31")
    assert code == 0
    assert "notice:" in err and table(out) == []


@pytest.mark.slow
def test_roll_small_windows(capsys, tmp_path):
    prices = write_prices(tmp_path / "p.csv", simulated_prices(520, seed=8))
    code, out, err = run(capsys, "roll", prices, "--window-years", "1", "--min-obs", "200")
    assert code in (0, 2)
    rows = table(out)
    assert len(rows) >= 3
    assert all(float(r["sigma_a"]) > 0 for r in rows)
    assert rows[0]["as_of"] > rows[0]["window_start"]
