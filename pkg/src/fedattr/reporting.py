"""Run reports on disk: report.json, scores.csv, verdicts.csv, sweep.csv."""
from __future__ import annotations

import csv
import functools
import io
import json
import subprocess
from importlib import metadata
from pathlib import Path
from typing import Iterable

from .attribution import trace_csv
from .config import ExperimentConfig
from .simulation import RunResult


@functools.lru_cache(maxsize=1)
def version_string() -> str:
    """``git describe`` of the source tree when available, else the installed package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5, check=True)
        desc = out.stdout.strip()
        if desc:
            return desc
    except (OSError, subprocess.SubprocessError):
        pass
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def run_record(result: RunResult) -> dict:
    return {
        "summary": result.summary(),
        "attribution": result.report.to_dict(),
        "direct_baseline": result.direct_report.to_dict(),
        "reference_scores": result.reference_scores,
        "redraws": result.redraws.tolist(),
        "participation": result.trace.participation.astype(int).tolist(),
        "leakage": result.leakage,
        "designs": result.designs,
    }


def write_run(result: RunResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "scores.csv").write_text(trace_csv(result.trace), encoding="utf-8")
    (out_dir / "verdicts.csv").write_text(result.report.to_csv(), encoding="utf-8")


def write_experiment(exp: ExperimentConfig, results: list[RunResult], out_dir: Path) -> dict:
    """A single seed writes its files at the top level; several seeds get ``seed_<s>/`` subdirectories."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = {
        "version": version_string(),
        "config": exp.to_dict(),
        "runs": [],
    }
    for res in results:
        target = out_dir if len(results) == 1 else out_dir / f"seed_{res.seed}"
        write_run(res, target)
        rec = run_record(res)
        if len(results) > 1:
            dump_json({"version": report["version"], "config": exp.to_dict(), "run": rec}, target / "report.json")
        report["runs"].append(rec)
    dump_json(report, out_dir / "report.json")
    return report


SWEEP_COLUMNS = ("axis_value", "tpr", "fpr", "mean_Z_pos", "mean_Z_neg")


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)  # shortest form that round-trips
    return str(x)


def sweep_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([_cell(row[c]) for c in SWEEP_COLUMNS])
    return buf.getvalue()
