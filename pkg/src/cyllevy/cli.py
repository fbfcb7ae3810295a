"""Command-line entry point.

Three subcommands::

    cyllevy verify <check-id> --config cfg.json [--seed N] [--out DIR]
    cyllevy simulate --config cfg.json
    cyllevy report <dir>

``verify`` runs one named battery and writes ``report.json`` plus a per-check
CSV table under ``tables/``; the exit code is 0 exactly when no check failed
(flagged checks are listed but do not fail the run).  ``simulate`` writes path
CSVs and law binaries for external analysis; identical config and seed give
byte-identical files.  ``report`` consolidates a directory of reports into
``summary.csv``/``summary.json``, deduplicating repeated (check, config) rows
by file modification time.

The environment variable ``CYLLEVY_SEED`` overrides any configured seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from .checks import check_ids, run_check
from .config import ExperimentConfig, Report, merge_reports
from .driver import Driver, PathTable, driver_from_payload
from .integrate import EmpiricalLaw, integrate_step_det
from .linalg import HSMap, Partition
from .modular import StepFunction
from .rng import derive

__all__ = ["main"]


def _resolve_seed(cfg: ExperimentConfig, flag_seed) -> ExperimentConfig:
    env = os.environ.get("CYLLEVY_SEED")
    if env is not None:
        return cfg.with_seed(int(env))
    if flag_seed is not None:
        return cfg.with_seed(int(flag_seed))
    return cfg


def _format_cell(v) -> str:
    if isinstance(v, bool) or isinstance(v, np.bool_):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (tuple, list)):
        return "[" + " ".join(_format_cell(x) for x in v) + "]"
    return str(v)


def _write_rows_csv(path: Path, rows: list) -> None:
    cols: list = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_format_cell(row.get(k, "")) for k in cols) + "\n")


def _out_dir(cfg: ExperimentConfig, flag_out) -> Path:
    out = Path(flag_out) if flag_out else Path(cfg.out_dir or "cyllevy-out")
    (out / "tables").mkdir(parents=True, exist_ok=True)
    (out / "laws").mkdir(parents=True, exist_ok=True)
    return out


def _finite_report(result) -> bool:
    vals = list(result.values.values()) + list(result.stderrs.values())
    return bool(np.all(np.isfinite([result.margin, *vals])))


def _load_config(args) -> ExperimentConfig:
    return _resolve_seed(ExperimentConfig.load(args.config), args.seed)


def cmd_verify(args) -> int:
    try:
        cfg = _load_config(args)
    except Exception as exc:
        print(f"error: cannot load config {args.config!r}: {exc}", file=sys.stderr)
        return 2
    out = _out_dir(cfg, args.out)
    t0 = time.monotonic()
    try:
        result, rows = run_check(args.check, cfg)
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except Exception as exc:  # config or numerical failure: abort with context
        print(f"error: check {args.check!r} aborted: {exc}", file=sys.stderr)
        return 2
    if not _finite_report(result):
        print(
            f"error: check {args.check!r} produced non-finite report values",
            file=sys.stderr,
        )
        return 2
    report = Report(
        results=(result,),
        seed=cfg.seed,
        config_hash=cfg.config_hash(),
        runtime_s=time.monotonic() - t0,
    )
    report.save(out / "report.json")
    _write_rows_csv(out / "tables" / f"{result.name}.csv", rows)
    print(f"{result.name}: {result.status} (margin {result.margin:.3g})")
    return 0 if report.n_failures == 0 else 1


def _default_driver(cfg: ExperimentConfig) -> Driver:
    return Driver.gaussian(np.zeros(cfg.d_g), np.eye(cfg.d_g))


def cmd_simulate(args) -> int:
    try:
        cfg = _load_config(args)
    except Exception as exc:
        print(f"error: cannot load config {args.config!r}: {exc}", file=sys.stderr)
        return 2
    out = _out_dir(cfg, args.out)
    driver = driver_from_payload(cfg.driver) if cfg.driver else _default_driver(cfg)
    d_g = driver.dim
    phi = HSMap(np.eye(cfg.d_h, d_g))
    partition = Partition.dyadic(cfg.mesh_exponent, cfg.span[0], cfg.span[1])

    seeds = derive(cfg.seed, "simulate", "paths")
    n_tables = min(cfg.n_paths, 4)
    for i in range(n_tables):
        table = PathTable.sample(driver, phi, partition, int(seeds.integers(0, 2**62)))
        table.to_csv(out / "tables" / f"path-{i}.csv")

    rng = derive(cfg.seed, "simulate", "law")
    if cfg.integrand is not None:
        psi = StepFunction.from_payload(cfg.integrand)
        law = integrate_step_det(psi, driver, max(cfg.n_paths, 100), rng)
    else:
        span = cfg.span[1] - cfg.span[0]
        inc = driver.sample_g_increments(span, max(cfg.n_paths, 100), rng)
        law = EmpiricalLaw(inc @ phi.matrix.T)
    law.to_binary(out / "laws" / "terminal.bin")
    law.to_csv_summary(out / "tables" / "law-summary.csv")
    print(f"wrote {n_tables} path tables and a law of {law.n} samples to {out}")
    return 0


def cmd_report(args) -> int:
    root = Path(args.dir)
    entries = []
    for path in sorted(root.rglob("*.json")):
        if path.name in ("summary.json", "config.json"):
            continue
        try:
            rep = Report.load(path)
        except Exception as exc:
            print(f"error: malformed report {path}: {exc}", file=sys.stderr)
            return 2
        entries.append((rep, path.stat().st_mtime))
    rows = merge_reports(entries)
    _write_rows_csv(root / "summary.csv", rows)
    with open(root / "summary.json", "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True)
        fh.write("\n")
    n_fail = sum(1 for r in rows if r["status"] == "fail")
    n_flag = sum(1 for r in rows if r["status"] == "flagged")
    print(f"{len(rows)} rows; {n_fail} failing, {n_flag} flagged")
    return 1 if n_fail else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cyllevy",
        description="numerical verification batteries for cylindrical Levy integration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run one verification battery")
    v.add_argument("check", metavar="check-id", help=f"one of: {', '.join(check_ids())}")
    v.add_argument("--config", required=True)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("simulate", help="sample paths and terminal laws")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="consolidate a directory of reports")
    r.add_argument("dir")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
