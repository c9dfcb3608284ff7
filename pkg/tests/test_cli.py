import json

import numpy as np
import pytest

from dii_causal.cli import CausalReport, detection_label, run
from dii_causal.data import TimeSeriesPanel, write_csv
from dii_causal.synthetic import SyntheticSpec, generate

FAST = ["--epochs", "10", "--lr", "0.2"]


def price_csv(path, n=400, seed=0, k=3):
    rng = np.random.default_rng(seed)
    prices = 100 * np.exp(np.cumsum(0.01 * rng.standard_normal((n, k)), axis=0))
    names = ("eua", "gas", "coal")[:k]
    dates = [f"d{i:04d}" for i in range(n)]
    write_csv(TimeSeriesPanel(names, prices, dates), path)
    return path


def returns_csv(path, values, names=("z", "x1", "x2")):
    write_csv(TimeSeriesPanel(names, values), path)
    return path


def test_analyze_outputs(tmp_path):
    inp = price_csv(tmp_path / "prices.csv")
    out = tmp_path / "out"
    assert run(["analyze", "--input", str(inp), "--target", "eua", "--out-dir", str(out), *FAST]) == 0
    text = (out / "report.json").read_text()
    report = CausalReport.from_json(text)
    assert report.to_json() == text  # JSON round-trip is byte-identical
    doc = json.loads(text)
    names = {r["variable"] for r in doc["records"]}
    assert names == {"gas", "coal"}
    assert sorted(doc["ranking_f"]) == sorted(doc["ranking_ig"]) == sorted(names)
    for rec in doc["records"]:
        assert {"f_statistic", "p_value", "var_weight", "ig", "dii_weight"} <= set(rec)
    assert doc["metadata"]["config"]["dii"]["epochs"] == 10
    assert "timings" not in doc["metadata"]
    assert (out / "f_vs_ig.csv").read_text().startswith("variable,f_statistic,p_value,ig,null_q95")
    assert (out / "weights.csv").read_text().startswith("variable,var_weight,dii_weight")
    assert json.loads((out / "timings.json").read_text())["dii"] >= 0


def test_analyze_deterministic(tmp_path):
    inp = price_csv(tmp_path / "prices.csv", seed=1)
    args = ["analyze", "--input", str(inp), "--target", "gas", *FAST, "--permutations", "2"]
    assert run([*args, "--out-dir", str(tmp_path / "a")]) == 0
    assert run([*args, "--out-dir", str(tmp_path / "b")]) == 0
    for f in ("report.json", "f_vs_ig.csv", "weights.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_ragged_csv_exit_2(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("date,a,b\nd1,1,2\nd2,3,4,5\n")
    code = run(["analyze", "--input", str(path), "--target", "a", "--out-dir", str(tmp_path / "o")])
    assert code == 2
    err = capsys.readouterr().err
    assert "[ingest]" in err and "line 3" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["analyze", "--target", "a"],  # no input
        ["analyze", "--input", "/nonexistent.csv", "--target", "a"],
        ["describe"],
        ["analyze", "--input", "{csv}", "--target", "nope"],
        ["analyze", "--input", "{csv}", "--target", "eua", "--tau", "0"],
        ["no-such-command"],
    ],
)
def test_input_errors_exit_2(tmp_path, argv):
    csv_path = str(price_csv(tmp_path / "p.csv", n=50))
    argv = [a.replace("{csv}", csv_path) for a in argv]
    assert run([*argv, "--out-dir", str(tmp_path / "o")] if argv[0] != "no-such-command" else argv) == 2


def test_zero_price_exit_2(tmp_path, capsys):
    path = tmp_path / "p.csv"
    path.write_text("a,b\n1,2\n0,3\n2,4\n")
    assert run(["describe", "--input", str(path), "--out-dir", str(tmp_path / "o")]) == 2
    assert "[returns]" in capsys.readouterr().err


def test_numerical_failure_exit_3(tmp_path, capsys):
    rng = np.random.default_rng(0)
    a = rng.standard_normal(300)
    path = returns_csv(tmp_path / "r.csv", np.column_stack([rng.standard_normal(300), a, 2 * a]))
    code = run(["analyze", "--input", str(path), "--returns-input", "--target", "z",
                "--out-dir", str(tmp_path / "o"), *FAST])
    assert code == 3
    assert "[var]" in capsys.readouterr().err


def test_config_precedence(tmp_path, monkeypatch):
    inp = price_csv(tmp_path / "p.csv")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 3, "lr": 0.1, "target": "eua", "seed": 4}))
    env_out = tmp_path / "env_out"
    monkeypatch.setenv("DII_CAUSAL_OUT_DIR", str(env_out))
    assert run(["analyze", "--config", str(cfg), "--input", str(inp), "--epochs", "5"]) == 0
    echo = json.loads((env_out / "report.json").read_text())["metadata"]["config"]
    assert echo["dii"]["epochs"] == 5  # flag beats file
    assert echo["dii"]["initial_learning_rate"] == 0.1  # file beats default
    assert echo["seed"] == 4 and echo["dii"]["exclusion_half_width"] == 1


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"bogus": 1}))
    inp = price_csv(tmp_path / "p.csv", n=50)
    assert run(["describe", "--config", str(cfg), "--input", str(inp), "--out-dir", str(tmp_path)]) == 2


def test_describe(tmp_path):
    inp = price_csv(tmp_path / "p.csv", n=300)
    out = tmp_path / "o"
    assert run(["describe", "--input", str(inp), "--out-dir", str(out)]) == 0
    desc = (out / "descriptive.csv").read_text().splitlines()
    assert desc[0] == "variable,mean,std,min,p25,p50,p75,max,skewness,kurtosis"
    assert len(desc) == 4
    adf = json.loads((out / "describe.json").read_text())["adf"]
    levels = {r["variable"]: r for r in adf if r["series"] == "levels"}
    rets = {r["variable"]: r for r in adf if r["series"] == "returns"}
    assert set(levels) == set(rets) == {"eua", "gas", "coal"}
    assert all(r["stationary"] for r in rets.values())


def test_lag_select(tmp_path):
    rng = np.random.default_rng(3)
    v = np.zeros((600, 3))
    for t in range(1, 600):
        v[t] = 0.4 * v[t - 1] + rng.standard_normal(3)
    path = returns_csv(tmp_path / "r.csv", v)
    out = tmp_path / "o"
    assert run(["lag-select", "--input", str(path), "--returns-input", "--max-lag", "10",
                "--out-dir", str(out)]) == 0
    rows = (out / "lag_selection.csv").read_text().splitlines()
    assert rows[0] == "lag,aic,bic,fpe,hqic"
    assert len(rows) == 11 and all(len(r.split(",")) == 5 for r in rows)
    doc = json.loads((out / "lag_selection.json").read_text())
    assert doc["chosen"] == 1
    assert float(rows[1].split(",")[1]) == doc["per_lag"]["1"]["aic"]


def test_detection_labels():
    assert detection_label(False, True, True) == "IG-only detection"
    assert detection_label(True, False, False) == "F-only (spurious) detection"
    assert detection_label(True, False, True) == "F-only detection"
    assert detection_label(True, True, True) == "detected by both"
    assert detection_label(False, False, False) == "not detected"


@pytest.mark.slow
def test_bench_false_negative_labels(tmp_path):
    out = tmp_path / "fn"
    assert run(["synthetic-bench", "--process", "false-negative", "--seed", "0",
                "--permutations", "10", "--out-dir", str(out), *FAST]) == 0
    doc = json.loads((out / "bench.json").read_text())
    rec = {r["variable"]: r for r in doc["records"]}
    assert rec["x2"]["label"] == "IG-only detection"
    assert rec["x1"]["label"] == "detected by both"
    assert doc["ranking_f"][0] == "x1"
    assert doc["metadata"]["lagged_frames"] == 2800
    assert {"source": "x1", "target": "z"} in doc["metadata"]["ground_truth"]


@pytest.mark.slow
def test_bench_false_positive_labels(tmp_path):
    out = tmp_path / "fp"
    assert run(["synthetic-bench", "--process", "false-positive", "--seed", "0",
                "--permutations", "10", "--out-dir", str(out), *FAST]) == 0
    rec = {r["variable"]: r for r in json.loads((out / "bench.json").read_text())["records"]}
    assert rec["x1"]["label"] == "F-only (spurious) detection"
    assert rec["x2"]["ig_detected"] and rec["x2"]["true_edge"]


def test_analyze_false_negative_panel(tmp_path):
    panel = generate(SyntheticSpec("false-negative", length=1200, seed=1))
    path = returns_csv(tmp_path / "fn.csv", panel.values)
    out = tmp_path / "o"
    assert run(["analyze", "--input", str(path), "--returns-input", "--target", "z",
                "--exclusion", "5", "--out-dir", str(out), *FAST]) == 0
    doc = json.loads((out / "report.json").read_text())
    rec = {r["variable"]: r for r in doc["records"]}
    # x1 leads the linear ranking; x2 makes the IG top two but comes last by F
    assert doc["ranking_f"] == ["x1", "x2"]
    assert set(doc["ranking_ig"][:2]) == {"x1", "x2"}
    assert rec["x1"]["ig"] > 0.05 and rec["x2"]["ig"] > 0.05


@pytest.mark.slow
def test_white_noise_null_calibration(tmp_path):
    """White-noise panels: F rarely significant at 1%, IG rarely above its null.

    Counted per (seed, candidate) pair. Under the null the observed IG is
    exchangeable with the 49 shuffled draws, so it exceeds their empirical
    95% quantile with probability about 0.05.
    """
    good = total = 0
    for seed in range(20):
        v = np.random.default_rng(500 + seed).standard_normal((601, 3))
        path = returns_csv(tmp_path / f"w{seed}.csv", v)
        out = tmp_path / f"o{seed}"
        assert run(["analyze", "--input", str(path), "--returns-input", "--target", "z",
                    "--permutations", "49", "--seed", str(seed), "--out-dir", str(out), *FAST]) == 0
        for r in json.loads((out / "report.json").read_text())["records"]:
            total += 1
            good += r["p_value"] >= 0.01 and r["ig"] <= r["null_q95"]
    assert good / total >= 0.9
