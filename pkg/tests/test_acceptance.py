"""Acceptance gate: one test per criterion, each logging a single PASS/FAIL line."""
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from fedattr import verify
from fedattr.config import ExperimentConfig
from fedattr.estimator import acceptance_threshold, expected_masking_strength, variance_factor
from fedattr.sa import query_budget
from fedattr.simulation import run_attribution

ROOT = Path(__file__).resolve().parents[1]


def _all(results):
    return all(verify.check_ok(r) for r in results)


def test_criterion_01_closed_form_table(criterion_log):
    t0 = time.perf_counter()
    got = {knm: (round(expected_masking_strength(*knm), 3), round(acceptance_threshold(*knm), 3))
           for knm in verify.ACCEPTANCE_TABLE}
    elapsed = time.perf_counter() - t0
    ok = got == verify.ACCEPTANCE_TABLE and elapsed < 1.0
    criterion_log(1, "closed-form masking table", ok, f"{got} in {elapsed:.3f}s")
    assert got == {(10, 4, 5): (0.889, 0.444), (10, 5, 5): (0.889, 0.444), (20, 4, 5): (1.263, 0.632),
                   (50, 4, 5): (1.469, 0.735), (50, 16, 5): (4.310, 2.155)}
    assert elapsed < 1.0


def test_criterion_02_variance_factors(criterion_log):
    got = {N: variance_factor(10, N) for N in (1, 2, 4, 5, 6, 8)}
    want = {1: 1.00, 2: 1.75, 4: 2.50, 5: 2.50, 6: 2.25, 8: 1.00}
    criterion_log(2, "variance factors at K=10", got == want, str(got))
    assert got == want


def test_criterion_03_acceptance_rate(criterion_log):
    t0 = time.perf_counter()
    res = verify.verify_acceptance(((10, 5, 5), (50, 16, 5)), n_trials=100_000)
    elapsed = time.perf_counter() - t0
    r10, r50 = res[0].measured["rate"], res[1].measured["rate"]
    ok = 0.84 <= r10 <= 0.90 and r50 > 0.998 and elapsed < 30
    criterion_log(3, "proposal acceptance", ok, f"(10,5,5)={r10:.4f} (50,16,5)={r50:.5f} in {elapsed:.1f}s")
    assert 0.84 <= r10 <= 0.90
    assert r50 > 0.998
    assert elapsed < 30


def test_criterion_04_unbiasedness(criterion_log):
    good = verify.verify_unbiasedness(n_trials=10_000)
    bad = verify.verify_unbiasedness(n_trials=10_000, biased=True)
    ok = good.passed and not bad.passed
    criterion_log(4, "unbiased estimator", ok,
                  f"max z {good.measured['max_abs_z']:.2f}; biased control max z {bad.measured['max_abs_z']:.1f}")
    assert good.passed
    assert not bad.passed


def test_criterion_05_covariance(criterion_log):
    res = verify.verify_covariance(n_trials=20_000)
    within = [r for r in res if r.check_name.startswith("covariance[N=")]
    shape = res[-1]
    ok = all(r.passed for r in within) and shape.passed
    ratios = {r.check_name: round(r.measured / r.reference, 3) for r in within}
    criterion_log(5, "covariance bound and U-shape", ok, f"trace/bound {ratios}; argmax N={shape.measured['argmax_N']}")
    assert all(r.passed for r in within)
    assert shape.passed


def test_criterion_06_stouffer_bounds(criterion_log):
    t0 = time.perf_counter()
    grid = verify.verify_stouffer(n_trials=10_000)
    point = verify.stouffer_default_point(grid)
    elapsed = time.perf_counter() - t0
    grid_ok = all(r.passed for r in grid)
    count, bound = point
    ok = grid_ok and count.passed and bound.passed and elapsed < 60
    criterion_log(6, "Stouffer error bounds", ok,
                  f"grid {'ok' if grid_ok else 'violated'}; FN count at T=5 {count.measured}/10000; "
                  f"FN bound at T=5 {bound.measured:.3g} (needs < 1e-6); {elapsed:.1f}s")
    assert grid_ok
    assert count.passed
    assert elapsed < 60
    assert bound.passed, f"FN bound at T=5 is {bound.measured:.3g}, not below 1e-6"


def test_criterion_07_gaussian_mi(criterion_log):
    t0 = time.perf_counter()
    res = verify.verify_mi(c_values=(0.5, 1.0, 2.0), n_samples=1_000_000)
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in res) and elapsed < 120
    detail = "; ".join(f"{r.check_name} {r.measured:.4f}" for r in res)
    criterion_log(7, "Gaussian MI", ok, f"{detail}; {elapsed:.1f}s")
    assert all(r.passed for r in res)
    assert elapsed < 120


def test_criterion_08_baseline_cancellation(criterion_log):
    exact, naive = verify.verify_baseline_cancellation(n_cases=100)
    criterion_log(8, "baseline cancellation", exact.passed,
                  f"{exact.measured}/100 mismatches (naive float control: {naive.measured})")
    assert exact.measured == 0


def test_criterion_09_end_to_end(criterion_log):
    t0 = time.perf_counter()
    res = verify.verify_end_to_end(ExperimentConfig(), seeds=(0, 1, 2))
    elapsed = time.perf_counter() - t0
    ok = all(r.passed for r in res) and elapsed < 300
    attr, null, direct = res
    gaps = [round(m["gap"], 2) for m in attr.measured]
    criterion_log(9, "end-to-end testbed", ok,
                  f"gaps {gaps}; null flags {null.measured}; direct benign flags {direct.measured}; {elapsed:.1f}s")
    assert attr.passed
    assert null.passed
    assert direct.passed
    assert elapsed < 300


def test_criterion_10_query_accounting(criterion_log):
    exp = ExperimentConfig()
    r = run_attribution(exp, 0)
    budget = query_budget(exp.protocol)
    redraws = int(r.redraws.sum())
    ok = budget == 500 and r.query_count == 500
    criterion_log(10, "query accounting", ok, f"{r.query_count} queries, {redraws} redraws")
    assert budget == 2 * 5 * 10 * 5 == 500
    assert r.query_count == 500
    assert redraws > 0  # resampling happened and cost nothing


def test_criterion_11_partial_participation(criterion_log):
    const, sweep = verify.verify_participation()
    ok = const.passed and sweep.passed
    rates = {p: (v["tpr"], v["fpr"]) for p, v in sweep.measured.items()}
    criterion_log(11, "partial participation", ok, f"{const.measured} scaling mismatches; (tpr, fpr) {rates}")
    assert const.passed
    assert sweep.passed
    c = 2.718
    mask = np.zeros((1, 10), dtype=bool)
    mask[0, [0, 2, 4, 6, 8]] = True
    from fedattr.attribution import ScoreTrace, stouffer
    assert stouffer(ScoreTrace(np.full((1, 10), c), mask), 0) == c * math.sqrt(5)


def _cli_run(out: Path, threads: str) -> dict[str, bytes]:
    env = dict(os.environ, FEDATTR_THREADS=threads)
    subprocess.run([sys.executable, "-m", "fedattr.cli", "run", str(ROOT / "configs" / "default.json"),
                    "--out", str(out)], env=env, check=True, capture_output=True)
    return {p.relative_to(out).as_posix(): p.read_bytes() for p in sorted(out.rglob("*")) if p.is_file()}


def test_criterion_12_determinism(criterion_log, tmp_path):
    a = _cli_run(tmp_path / "a", "1")
    b = _cli_run(tmp_path / "b", "4")
    c = _cli_run(tmp_path / "c", "4")
    ok = a == b == c and set(a) >= {"report.json", "scores.csv", "verdicts.csv"}
    criterion_log(12, "determinism", ok, f"{len(a)} files byte-identical across FEDATTR_THREADS=1,4,4: {ok}")
    assert a == b == c
