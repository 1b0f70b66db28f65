"""Command-line interface: ``specden {simulate,fit,evaluate,benchmark,table}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
divergence, 5 memory cap refusal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import RunConfig, load_config
from .errors import ConfigError, SpecdenError
from .evaluation import rows_to_csv
from .grid import read_series, series_to_bytes
from .nn.model import load_model, magnitude_curve, model_to_bytes

FIT_LOG_HEADER = ["epoch", "loss", "seconds"]
ERROR_HEADER = ["config_digest", "estimator", "setting", "relative_error", "I", "J", "seed"]
CURVE_HEADER = ["theta", "norm"]
BENCH_HEADER = ["config_digest", "estimator", "phase", "d", "k", "n", "seconds", "peak_aux_bytes",
                "relative_error", "status"]
TABLE_HEADER = ["config_digest", "estimator", "setting", "replication", "relative_error", "mean_error",
                "standard_error"]


def _digest_bytes(buf: bytes) -> str:
    return hashlib.sha256(buf).hexdigest()


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _write_report(out: Path, stem: str, cfg: RunConfig, rows: list, header: list, extra: dict | None = None):
    written = []
    if "json" in cfg.output.formats:
        doc = {"config_digest": cfg.digest(), "rows": rows}
        doc.update(extra or {})
        written.append(_write(out / f"{stem}.json", json.dumps(doc, indent=2, sort_keys=True) + "\n"))
    if "csv" in cfg.output.formats:
        written.append(_write(out / f"{stem}.csv", rows_to_csv(rows, header)))
    return written


def cmd_simulate(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    series = ex.simulate(cfg, args.replication)
    meta = {"config_digest": cfg.digest(), "replication": args.replication}
    buf = series_to_bytes(series, meta)
    path = out / (args.name or f"series_r{args.replication}.ftsg")
    path.write_bytes(buf)
    print(f"{path}\tsha256={_digest_bytes(buf)}\tdata={series.digest}")
    return 0


def cmd_fit(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    series = read_series(args.series)
    log_path = out / "fit_log.csv"
    if cfg.estimator.kind != "spectral-nn":
        marker = {"config_digest": cfg.digest(), "estimator": cfg.estimator.kind,
                  "data_digest": series.digest, "note": "nothing to train"}
        _write(out / "model.marker.json", json.dumps(marker, indent=2, sort_keys=True) + "\n")
        _write(log_path, rows_to_csv([], FIT_LOG_HEADER))
        print(out / "model.marker.json")
        return 0
    result = ex.fit_nn(cfg, series)
    result.model.meta["config_digest"] = cfg.digest()
    buf = model_to_bytes(result.model)
    path = out / (args.name or "model.specnn")
    path.write_bytes(buf)
    rows = [{"epoch": e, "loss": repr(l), "seconds": f"{s:.6f}"} for e, l, s in result.history]
    _write(log_path, rows_to_csv(rows, FIT_LOG_HEADER))
    print(f"{path}\tsha256={_digest_bytes(buf)}\tbest_loss={result.best_loss!r}\tbest_epoch={result.best_epoch}")
    return 0


def cmd_evaluate(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    series = read_series(args.series)
    model = load_model(args.model) if args.model else None
    if cfg.estimator.kind == "spectral-nn" and model is None:
        raise ConfigError("evaluate with estimator kind spectral-nn needs --model")
    if series.grid != ex.grid_of(cfg):
        raise ConfigError("series grid does not match the data section of the config")
    estimator = ex.estimator_for(cfg, series, model)
    rep = ex.evaluate(cfg, estimator)
    row = {
        "config_digest": cfg.digest(),
        "estimator": cfg.estimator.kind,
        "setting": ex.setting_label(cfg),
        "relative_error": repr(rep.relative_error),
        "I": rep.I,
        "J": rep.J,
        "seed": rep.seed,
    }
    _write_report(out, "error", cfg, [row], ERROR_HEADER)
    print(f"relative_error={rep.relative_error:.6g}")
    npts = args.curve if args.curve is not None else cfg.evaluation.curve_points
    if npts:
        if model is None:
            raise ConfigError("the magnitude curve needs a fitted spectral-nn model")
        thetas = np.linspace(-math.pi, math.pi, npts)
        curve = magnitude_curve(model, cfg.estimator.window, cfg.estimator.q, thetas)
        rows = [{"theta": repr(t), "norm": repr(v)} for t, v in curve]
        _write(out / "curve.csv", rows_to_csv(rows, CURVE_HEADER))
    return 0


def cmd_benchmark(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    ks = args.k or [cfg.data.k]
    kinds = args.estimators.split(",") if args.estimators else ["empirical", "spectral-nn"]
    rows = []
    for k in ks:
        sub = cfg.model_copy(update={"data": cfg.data.model_copy(update={"k": k})})
        series = ex.simulate(sub, 0)
        for kind in kinds:
            res = ex.bench_run(sub, kind, series, force=args.force_memory_cap)
            base = {"config_digest": cfg.digest(), "estimator": kind, "d": sub.data.d, "k": k, "n": sub.data.n,
                    "status": res["status"]}
            if res["status"] == "CAP":
                rows.append({**base, "phase": "total", "seconds": "", "peak_aux_bytes": ""})
                continue
            for phase in ("fit", "eval", "total"):
                rows.append({**base, "phase": phase, "seconds": f"{res[phase + '_seconds']:.6f}",
                             "peak_aux_bytes": res[{"fit": "fit_peak_bytes", "eval": "eval_peak_bytes",
                                                    "total": "peak_aux_bytes"}[phase]],
                             "relative_error": repr(res["relative_error"])})
    _write(out / "bench.csv", rows_to_csv(rows, BENCH_HEADER))
    for r in rows:
        print(",".join(str(r.get(h, "")) for h in BENCH_HEADER[1:]))
    return 0


def cmd_table(args, cfg: RunConfig) -> int:
    out = _out_dir(args, cfg)
    reps = args.reps
    kinds = args.estimators.split(",") if args.estimators else [cfg.estimator.kind]
    rows = []
    for kind in kinds:
        sub = cfg.model_copy(update={"estimator": cfg.estimator.model_copy(update={"kind": kind})})
        res = ex.run_replications(sub, reps)
        mean, se = ex.summarize([r["relative_error"] for r in res])
        label = ex.setting_label(cfg)
        for r in res:
            rows.append({"config_digest": cfg.digest(), "estimator": kind, "setting": label,
                         "replication": r["replication"], "relative_error": repr(r["relative_error"])})
        rows.append({"config_digest": cfg.digest(), "estimator": kind, "setting": label,
                     "replication": "mean", "mean_error": repr(mean), "standard_error": repr(se)})
        print(f"{kind}\t{label}\tmean={mean:.4f}\tse={se:.4f}")
    _write(out / "table.csv", rows_to_csv(rows, TABLE_HEADER))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specden", description="Spectral density estimation for field time series.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="run config JSON (defaults apply when omitted)")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        return sp

    sp = common(sub.add_parser("simulate", help="simulate a FAR(1) field series"))
    sp.add_argument("--replication", type=int, default=0)
    sp.add_argument("--name", help="output file name")
    sp.set_defaults(func=cmd_simulate)

    sp = common(sub.add_parser("fit", help="train the spectral-NN estimator"))
    sp.add_argument("--series", required=True)
    sp.add_argument("--name", help="model file name")
    sp.set_defaults(func=cmd_fit)

    sp = common(sub.add_parser("evaluate", help="relative error against the FAR(1) truth"))
    sp.add_argument("--series", required=True)
    sp.add_argument("--model")
    sp.add_argument("--curve", type=int, help="number of frequencies for the magnitude curve")
    sp.set_defaults(func=cmd_evaluate)

    sp = common(sub.add_parser("benchmark", help="time and memory per estimator"))
    sp.add_argument("--k", type=int, action="append", help="grid resolution (repeatable)")
    sp.add_argument("--estimators", help="comma list of empirical,spectral-nn")
    sp.add_argument("--force-memory-cap", action="store_true", help="run even when over the memory cap")
    sp.set_defaults(func=cmd_benchmark)

    sp = common(sub.add_parser("table", help="replication sweep with mean and standard error"))
    sp.add_argument("--reps", type=int, default=10)
    sp.add_argument("--estimators", help="comma list of estimator kinds")
    sp.set_defaults(func=cmd_table)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "reps", 1) < 1:
            raise ConfigError("--reps must be >= 1")
        return args.func(args, cfg)
    except SpecdenError as exc:
        print(f"specden: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"specden: {exc}", file=sys.stderr)
        return 3
