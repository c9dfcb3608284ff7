"""Command-line entry point: ``dii-causal <command> [options]``.

Commands
    analyze          returns -> standardise -> ADF gate -> VAR/Granger -> DII/IG
    synthetic-bench  simulate a benchmark process and score both methods
    describe         descriptive statistics and ADF tests
    lag-select       VAR information criteria over 1..max-lag

Settings are resolved as command-line flag, then ``--config`` JSON file,
then built-in defaults. The default output directory can be set with the
``DII_CAUSAL_OUT_DIR`` environment variable. Primary outputs (JSON reports
and CSV tables) are deterministic for a fixed seed; wall-clock timings go to
a separate ``timings.json``.

Exit codes: 0 success, 2 input or validation error, 3 numerical failure.
"""

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import (
    adf_test,
    compute_returns,
    descriptive_stats,
    read_csv,
    standardize,
)
from .dii import DiiConfig
from .errors import DiiCausalError, InputError, NumericalError
from .imbalance_gain import IgConfig, imbalance_gain
from .synthetic import Process, SyntheticSpec, edges_to_json, generate, regression_ground_truth
from .var_granger import causal_weights, fit_var, granger_f, select_lag

log = logging.getLogger("dii_causal")

COMMANDS = ("analyze", "synthetic-bench", "describe", "lag-select")
OUT_DIR_ENV = "DII_CAUSAL_OUT_DIR"

DEFAULTS = {
    "input": None,
    "target": None,
    "tau": 1,
    "var_order": 1,
    "max_lag": 10,
    "epochs": 2000,
    "batch_size": 100,
    "lr": 1e-3,
    "seed": 0,
    "permutations": 0,
    "out_dir": None,
    "workers": 1,
    "exclusion": None,  # command dependent, see _exclusion_default
    "returns_input": False,
    "alpha": 0.05,
    "process": "false-negative",
    "length": 2800,
    "burn_in": 5000,
}


class StageError(Exception):
    """Wraps a library error with the pipeline stage it came from."""

    def __init__(self, stage, err):
        super().__init__(f"{stage}: {err}")
        self.stage = stage
        self.err = err


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, typ, err, tb):
        if err is not None and isinstance(err, DiiCausalError):
            raise StageError(self.name, err) from err
        return False


@dataclass
class RunConfig:
    command: str
    input: Path = None
    target: str = None
    tau: int = 1
    var_order: int = 1
    max_lag: int = 10
    out_dir: Path = None
    seed: int = 0
    permutations: int = 0
    workers: int = 1
    returns_input: bool = False
    alpha: float = 0.05
    process: str = "false-negative"
    length: int = 2800
    burn_in: int = 5000
    dii: DiiConfig = field(default_factory=DiiConfig)

    def echo(self):
        d = self.dii
        return {
            "command": self.command,
            "input": None if self.input is None else str(self.input),
            "target": self.target,
            "tau": self.tau,
            "var_order": self.var_order,
            "max_lag": self.max_lag,
            "seed": self.seed,
            "permutations": self.permutations,
            "returns_input": self.returns_input,
            "alpha": self.alpha,
            "process": self.process if self.command == "synthetic-bench" else None,
            "length": self.length if self.command == "synthetic-bench" else None,
            "burn_in": self.burn_in if self.command == "synthetic-bench" else None,
            "dii": {
                "epochs": d.epochs,
                "initial_learning_rate": d.initial_learning_rate,
                "batch_size": d.batch_size,
                "batches_per_epoch": d.batches_per_epoch,
                "lambda_prefactor": d.lambda_prefactor,
                "neighbor_fraction": d.neighbor_fraction,
                "exclusion_half_width": d.exclusion_half_width,
                "seed": d.seed,
            },
        }


def _parser():
    p = argparse.ArgumentParser(prog="dii-causal", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", type=Path, help="JSON file of option defaults")
        s.add_argument("--input", type=Path, help="CSV panel (prices unless --returns-input)")
        s.add_argument("--out-dir", type=Path)
        s.add_argument("--seed", type=int)
        s.add_argument("--returns-input", action="store_true", default=None,
                       help="input already holds returns; skip differencing")
        if name in ("analyze", "synthetic-bench"):
            s.add_argument("--target")
            s.add_argument("--tau", type=int)
            s.add_argument("--var-order", type=int)
            s.add_argument("--epochs", type=int)
            s.add_argument("--batch-size", type=int)
            s.add_argument("--lr", type=float)
            s.add_argument("--permutations", type=int)
            s.add_argument("--workers", type=int)
            s.add_argument("--exclusion", type=int, help="temporal exclusion half-width")
            s.add_argument("--alpha", type=float, help="F-test significance level")
        if name == "lag-select":
            s.add_argument("--max-lag", type=int)
        if name == "synthetic-bench":
            s.add_argument("--process", choices=[p.value for p in Process if p is not Process.LINEAR_VAR])
            s.add_argument("--length", type=int)
            s.add_argument("--burn-in", type=int)
    return p


def _exclusion_default(command):
    # returns are close to serially uncorrelated; simulated processes are not
    return 5 if command == "synthetic-bench" else 1


def resolve_config(args):
    """Merge flags over the config file over defaults and validate paths."""
    settings = dict(DEFAULTS)
    if args.config is not None:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise InputError(f"cannot read config file {args.config}: {err}") from None
        if not isinstance(file_cfg, dict):
            raise InputError("config file must hold a JSON object")
        for key, value in file_cfg.items():
            k = key.replace("-", "_")
            if k not in settings:
                raise InputError(f"unknown config key {key!r}")
            settings[k] = value
    for k in settings:
        v = getattr(args, k, None)
        if v is not None:
            settings[k] = v

    command = args.command
    out = settings["out_dir"] or os.environ.get(OUT_DIR_ENV) or "dii_causal_out"
    inp = settings["input"]
    if command != "synthetic-bench":
        if inp is None:
            raise InputError("--input is required")
        inp = Path(inp)
        if not inp.is_file():
            raise InputError(f"input file {inp} does not exist")
    if command == "analyze" and not settings["target"]:
        raise InputError("--target is required")
    if command == "synthetic-bench":
        settings["target"] = settings["target"] or "z"
    for k in ("tau", "var_order", "max_lag", "epochs", "batch_size", "workers", "length"):
        if int(settings[k]) < 1:
            raise InputError(f"{k.replace('_', '-')} must be >= 1")
    if int(settings["permutations"]) < 0:
        raise InputError("permutations must be >= 0")
    exclusion = settings["exclusion"]
    if exclusion is None:
        exclusion = _exclusion_default(command)
    dii = DiiConfig(
        epochs=int(settings["epochs"]),
        initial_learning_rate=float(settings["lr"]),
        batch_size=int(settings["batch_size"]),
        exclusion_half_width=int(exclusion),
        seed=int(settings["seed"]),
    )
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as err:
        raise InputError(f"cannot create output directory {out}: {err}") from None
    return RunConfig(
        command=command,
        input=inp,
        target=settings["target"],
        tau=int(settings["tau"]),
        var_order=int(settings["var_order"]),
        max_lag=int(settings["max_lag"]),
        out_dir=out,
        seed=int(settings["seed"]),
        permutations=int(settings["permutations"]),
        workers=int(settings["workers"]),
        returns_input=bool(settings["returns_input"]),
        alpha=float(settings["alpha"]),
        process=str(settings["process"]),
        length=int(settings["length"]),
        burn_in=int(settings["burn_in"]),
        dii=dii,
    )


# -- report ---------------------------------------------------------------


@dataclass
class CausalReport:
    target: str
    records: list  # one dict per non-target variable
    metadata: dict

    @property
    def ranking_f(self):
        return [r["variable"] for r in sorted(self.records, key=lambda r: -r["f_statistic"])]

    @property
    def ranking_ig(self):
        return [r["variable"] for r in sorted(self.records, key=lambda r: -r["ig"])]

    def to_dict(self):
        return {
            "target": self.target,
            "records": self.records,
            "ranking_f": self.ranking_f,
            "ranking_ig": self.ranking_ig,
            "metadata": self.metadata,
        }

    def to_json(self):
        return dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(target=d["target"], records=d["records"], metadata=d["metadata"])


def dumps(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def _versions():
    import numba
    import scipy

    return {
        "dii_causal": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }


def _causal_analysis(panel, cfg, timings):
    """VAR/Granger and DII/IG on a standardised panel; returns per-variable records."""
    target = cfg.target
    with _Stage("ingest"):
        panel.index(target)
    candidates = [n for n in panel.names if n != target]
    if not candidates:
        raise StageError("var", InputError("need at least one variable besides the target"))

    t0 = time.perf_counter()
    with _Stage("var"):
        model = fit_var(panel, cfg.var_order)
        var_w = causal_weights(model, target)
    with _Stage("granger"):
        tests = {c: granger_f(panel, target, c, cfg.var_order) for c in candidates}
    timings["var_granger"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ig_cfg = IgConfig(
        target=target,
        tau=cfg.tau,
        dii_config=cfg.dii,
        null_permutations=cfg.permutations,
        null_seed=cfg.seed,
    )
    with _Stage("dii"):
        ig = imbalance_gain(panel, ig_cfg, workers=cfg.workers)
    timings["dii"] = time.perf_counter() - t0

    records = []
    for c in candidates:
        g = ig.per_variable[c]
        f = tests[c]
        records.append(
            {
                "variable": c,
                "f_statistic": f.f_statistic,
                "p_value": f.p_value,
                "var_weight": var_w[c],
                "ig": g.ig,
                "dii_weight": g.optimal_weight_full,
                "dii_full": g.dii_full,
                "dii_reduced": g.dii_reduced,
                "null_q95": g.null_q95,
            }
        )
    extra = {
        "target_dii_weight": float(ig.full_weights[0]),
        "var_nobs": model.nobs,
        "lagged_frames": int(panel.shape[0] - cfg.tau),
    }
    return records, extra


def _write_scatter_tables(out_dir, records):
    _write_rows(
        out_dir / "f_vs_ig.csv",
        ["variable", "f_statistic", "p_value", "ig", "null_q95"],
        [[r["variable"], r["f_statistic"], r["p_value"], r["ig"],
          "" if r["null_q95"] is None else r["null_q95"]] for r in records],
    )
    _write_rows(
        out_dir / "weights.csv",
        ["variable", "var_weight", "dii_weight"],
        [[r["variable"], r["var_weight"], r["dii_weight"]] for r in records],
    )


def _load_returns(cfg):
    with _Stage("ingest"):
        panel = read_csv(cfg.input)
    if not cfg.returns_input:
        with _Stage("returns"):
            panel = compute_returns(panel)
    return panel


def cmd_analyze(cfg):
    timings = {}
    warnings = []
    t0 = time.perf_counter()
    panel = _load_returns(cfg)
    with _Stage("ingest"):
        panel.index(cfg.target)
    with _Stage("standardise"):
        panel = standardize(panel)
    with _Stage("adf"):
        for name in panel.names:
            res = adf_test(panel.column(name))
            if not res.stationary:
                warnings.append(
                    f"ADF does not reject a unit root for {name} "
                    f"(statistic {res.statistic:.3f}, p {res.p_value:.3f})"
                )
    for w in warnings:
        log.warning(w)
    timings["preprocess"] = time.perf_counter() - t0
    records, extra = _causal_analysis(panel, cfg, timings)
    report = CausalReport(
        target=cfg.target,
        records=records,
        metadata={
            "config": cfg.echo(),
            "versions": _versions(),
            "warnings": warnings,
            "rows": int(panel.shape[0]),
            **extra,
        },
    )
    (cfg.out_dir / "report.json").write_text(report.to_json())
    _write_scatter_tables(cfg.out_dir, records)
    _write_timings(cfg.out_dir, timings)
    return report


def detection_label(f_detected, ig_detected, is_true_edge):
    if f_detected and ig_detected:
        return "detected by both"
    if ig_detected:
        return "IG-only detection"
    if f_detected:
        return "F-only detection" if is_true_edge else "F-only (spurious) detection"
    return "not detected"


def cmd_synthetic_bench(cfg):
    timings = {}
    t0 = time.perf_counter()
    with _Stage("synthetic"):
        # one extra row so that N = length frames remain after lagging
        spec = SyntheticSpec(
            process=cfg.process, length=cfg.length + cfg.tau, burn_in=cfg.burn_in, seed=cfg.seed
        )
        panel = generate(spec)
        truth = regression_ground_truth(spec)
    with _Stage("standardise"):
        panel = standardize(panel)
    timings["simulate"] = time.perf_counter() - t0
    records, extra = _causal_analysis(panel, cfg, timings)
    for r in records:
        true_edge = (r["variable"], cfg.target) in truth
        f_det = r["p_value"] < cfg.alpha
        if r["null_q95"] is None:
            ig_det = r["ig"] > 0
        else:
            ig_det = r["ig"] > r["null_q95"]
        r["true_edge"] = true_edge
        r["f_detected"] = bool(f_det)
        r["ig_detected"] = bool(ig_det)
        r["label"] = detection_label(f_det, ig_det, true_edge)
    report = CausalReport(
        target=cfg.target,
        records=records,
        metadata={
            "config": cfg.echo(),
            "versions": _versions(),
            "ground_truth": edges_to_json(truth),
            "ig_detection_rule": "ig > null_q95" if cfg.permutations else "ig > 0",
            **extra,
        },
    )
    (cfg.out_dir / "bench.json").write_text(report.to_json())
    _write_scatter_tables(cfg.out_dir, records)
    _write_timings(cfg.out_dir, timings)
    return report


def cmd_describe(cfg):
    with _Stage("ingest"):
        levels = read_csv(cfg.input)
    panel = levels
    if not cfg.returns_input:
        with _Stage("returns"):
            panel = compute_returns(levels)
    stats = descriptive_stats(panel)
    rows = list(stats.rows())
    _write_rows(
        cfg.out_dir / "descriptive.csv",
        list(rows[0].keys()),
        [list(r.values()) for r in rows],
    )
    adf_rows = []
    with _Stage("adf"):
        series = [("returns", panel)] if cfg.returns_input else [("levels", levels), ("returns", panel)]
        for kind, p in series:
            for name in p.names:
                res = adf_test(p.column(name))
                adf_rows.append(
                    {"variable": name, "series": kind, "statistic": res.statistic,
                     "p_value": res.p_value, "used_lag": res.used_lag, "nobs": res.nobs,
                     "stationary": res.stationary}
                )
    _write_rows(cfg.out_dir / "adf.csv", list(adf_rows[0].keys()), [list(r.values()) for r in adf_rows])
    summary = {"descriptive": rows, "adf": adf_rows, "adf_critical_values": res.critical_values}
    (cfg.out_dir / "describe.json").write_text(dumps(_nan_to_none(summary)))
    return summary


def cmd_lag_select(cfg):
    panel = _load_returns(cfg)
    with _Stage("standardise"):
        panel = standardize(panel)
    with _Stage("var"):
        sel = select_lag(panel, cfg.max_lag)
    sel.write_csv(cfg.out_dir / "lag_selection.csv")
    (cfg.out_dir / "lag_selection.json").write_text(sel.to_json(indent=2) + "\n")
    return sel


def _nan_to_none(obj):
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def _write_timings(out_dir, timings):
    (out_dir / "timings.json").write_text(dumps({k: round(v, 3) for k, v in timings.items()}))


HANDLERS = {
    "analyze": cmd_analyze,
    "synthetic-bench": cmd_synthetic_bench,
    "describe": cmd_describe,
    "lag-select": cmd_lag_select,
}


def run(argv=None):
    """Parse ``argv``, run the command and return the process exit code."""
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        with _Stage("config"):
            cfg = resolve_config(args)
        HANDLERS[cfg.command](cfg)
    except StageError as e:
        print(f"error [{e.stage}]: {e.err}", file=sys.stderr)
        return 3 if isinstance(e.err, NumericalError) else 2
    except DiiCausalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3 if isinstance(e, NumericalError) else 2
    return 0


def main():
    sys.exit(run())
