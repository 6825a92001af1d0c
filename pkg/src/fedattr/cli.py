"""``fedattr`` command line.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration
error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from .config import ExperimentConfig, load_config
from .errors import ConfigError, DimensionError, FedAttrError
from .reporting import dump_json, sweep_csv, version_string, write_experiment
from .simulation import run_attribution, thread_count

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

SWEEP_AXES = ("N", "M", "T", "wm_ratio", "K")


def _err(msg: str) -> None:
    print(f"fedattr: {msg}", file=sys.stderr)


def _run_all(exp: ExperimentConfig, threads: int):
    return [run_attribution(exp, s, threads=threads) for s in exp.seeds]


def cmd_run(config_path: str, out: str | None = None) -> int:
    try:
        exp = load_config(config_path)
        threads = thread_count()
    except (ConfigError, DimensionError) as exc:
        _err(f"config error: {exc}")
        return EXIT_USAGE
    out_dir = Path(out or exp.output_dir)
    try:
        results = _run_all(exp, threads)
        write_experiment(exp, results, out_dir)
    except (FedAttrError, ArithmeticError, OSError, RuntimeError) as exc:
        _err(f"runtime error: {exc}")
        return EXIT_RUNTIME
    for r in results:
        s = r.summary()
        flagged = [int(i) for i in r.report.Z.argsort()[::-1] if r.report.verdicts[i]]
        print(f"seed {s['seed']}: flagged {sorted(flagged)}  tpr={s['tpr']}  fpr={s['fpr']}  "
              f"sa_queries={s['sa_queries']}")
    print(f"wrote {out_dir}")
    return EXIT_OK


def cmd_verify(suite: str = "all", seed: int = 0, out: str | None = None, as_json: bool = False) -> int:
    from .verify import SUITES, check_ok, format_table, run_suite

    if suite != "all" and suite not in SUITES:
        _err(f"unknown suite {suite!r}; choose from: all, {', '.join(SUITES)}")
        return EXIT_USAGE
    try:
        results = run_suite(suite, seed)
    except (FedAttrError, ArithmeticError, RuntimeError) as exc:
        _err(f"runtime error: {exc}")
        return EXIT_RUNTIME
    records = [r.to_dict() for r in results]
    if as_json:
        print(json.dumps(records, indent=2))
    else:
        print(format_table(results))
    if out:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            dump_json({"version": version_string(), "suite": suite, "seed": seed, "results": records},
                      Path(out) / "verification.json")
        except OSError as exc:
            _err(f"runtime error: {exc}")
            return EXIT_RUNTIME
    return EXIT_OK if all(check_ok(r) for r in results) else EXIT_VERIFY


def _axis_value(axis: str, raw: str):
    try:
        return float(raw) if axis == "wm_ratio" else int(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for axis {axis}") from None


def sweep_point(exp: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    """The experiment with one parameter replaced. Sweeping ``N`` lowers the SA
    threshold to ``N`` when needed so that every query size stays authorized."""
    p = exp.protocol
    if axis == "wm_ratio":
        return exp.replace(wm_mix_ratio=value)
    if axis == "N":
        return exp.replace(protocol=p.replace(N=value, N_sa=min(p.N_sa, value)))
    return exp.replace(protocol=p.replace(**{axis: value}))


def cmd_sweep(config_path: str, axis: str, values: str, out: str | None = None) -> int:
    try:
        if axis not in SWEEP_AXES:
            raise ConfigError(f"axis must be one of {SWEEP_AXES}, got {axis!r}")
        exp = load_config(config_path)
        vals = [_axis_value(axis, v.strip()) for v in values.split(",") if v.strip()]
        if not vals:
            raise ConfigError("no sweep values given")
        points = [(v, sweep_point(exp, axis, v)) for v in vals]
        threads = thread_count()
    except (ConfigError, DimensionError) as exc:
        _err(f"config error: {exc}")
        return EXIT_USAGE
    out_dir = Path(out or exp.output_dir)
    rows = []
    try:
        for v, point in points:
            results = _run_all(point, threads)
            write_experiment(point, results, out_dir / f"{axis}={v}")
            sums = [r.summary() for r in results]
            rows.append({
                "axis_value": v,
                "tpr": _mean(s["tpr"] for s in sums),
                "fpr": _mean(s["fpr"] for s in sums),
                "mean_Z_pos": _mean(s["mean_Z_pos"] for s in sums),
                "mean_Z_neg": _mean(s["mean_Z_neg"] for s in sums),
            })
        (out_dir / "sweep.csv").write_text(sweep_csv(rows), encoding="utf-8")
    except (FedAttrError, ArithmeticError, OSError, RuntimeError) as exc:
        _err(f"runtime error: {exc}")
        return EXIT_RUNTIME
    print(sweep_csv(rows), end="")
    return EXIT_OK


def _mean(xs):
    xs = [x for x in xs if x is not None]
    return sum(xs) / len(xs) if xs else None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fedattr", description="Client-level watermark attribution through secure aggregation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {version_string()}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run attribution from a JSON experiment config")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (default: output_dir from the config)")

    ver = sub.add_parser("verify", help="run Monte Carlo verification checks")
    ver.add_argument("suite", nargs="?", default="all")
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--out", help="also write verification.json here")
    ver.add_argument("--json", action="store_true", help="print the JSON array instead of the table")

    sw = sub.add_parser("sweep", help="repeat a run over values of one parameter")
    sw.add_argument("config")
    sw.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--out", help="output directory (default: output_dir from the config)")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.out)
    if args.command == "verify":
        return cmd_verify(args.suite, args.seed, args.out, args.json)
    return cmd_sweep(args.config, args.axis, args.values, args.out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
