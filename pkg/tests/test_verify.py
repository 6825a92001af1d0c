import json

import numpy as np
import pytest

from fedattr import verify
from fedattr.protocol import ProtocolConfig
from fedattr.scoring import SyntheticScoreSpec


def test_closed_forms_pass():
    assert all(r.passed for r in verify.verify_closed_forms())


def test_acceptance_small_run_is_reproducible():
    a = verify.verify_acceptance(((10, 5, 5),), n_trials=20_000, seed=3)
    b = verify.verify_acceptance(((10, 5, 5),), n_trials=20_000, seed=3)
    assert a[0].to_dict() == b[0].to_dict()
    assert 0.8 < a[0].measured["rate"] < 0.95


def test_unbiased_sampler_passes_and_biased_control_fails():
    good = verify.verify_unbiasedness(n_trials=4000, seed=1)
    bad = verify.verify_unbiasedness(n_trials=4000, seed=1, biased=True)
    assert good.passed and not bad.passed
    assert good.detail["sa_expansion_max_gap"] < 1e-12
    assert verify.check_ok(good) and verify.check_ok(bad)


def test_covariance_within_bound_small():
    res = verify.verify_covariance(n_trials=3000, N_grid=(1, 4, 8), seed=2)
    assert all(r.passed for r in res if r.check_name.startswith("covariance[N="))


def test_stouffer_grid_and_point():
    grid = verify.verify_stouffer(T_grid=(4, 5), n_trials=2000, seed=0)
    assert all(r.passed for r in grid)
    point = verify.stouffer_default_point(grid)
    assert point[0].check_name == "stouffer_fn_count[T=5]"
    assert point[1].measured == grid[1].reference["fn_bound"]


def test_stouffer_infeasible_threshold_is_skipped():
    res = verify.verify_stouffer(SyntheticScoreSpec(m=2.0, eps=0.5, nu=0.85), T_grid=(2,), n_trials=100)
    assert res[0].passed and "skipped" in res[0].detail


def test_mi_small():
    res = verify.verify_mi(c_values=(1.0,), n_samples=200_000, seed=0, tol=0.03)
    assert all(r.passed for r in res)


def test_find_design_with_unreachable_c():
    cfg = ProtocolConfig(K=10, N=1, M=2, N_sa=1, d=1)
    with pytest.raises(RuntimeError):
        verify.find_design_with_c(cfg, 123.0, np.random.default_rng(0), max_tries=50)


def test_cancellation_and_naive_control():
    res = verify.verify_baseline_cancellation(n_cases=20, seed=4)
    assert [r.passed for r in res] == [True, True]


def test_results_serialize_to_json():
    for r in verify.run_suite("closed_forms") + verify.verify_participation(seed=0):
        json.dumps(r.to_dict(), allow_nan=False)


def test_participation_suite():
    assert all(r.passed for r in verify.verify_participation(seed=5))


def test_unknown_suite():
    with pytest.raises(KeyError):
        verify.run_suite("nope")


def test_format_table_marks_controls():
    res = [verify.verify_unbiasedness(n_trials=2000, seed=0, biased=True)]
    table = verify.format_table(res)
    assert "PASS*" in table and "negative control" in table


def test_testbed_separation_is_reported():
    r = verify.verify_testbed_separation(seeds=(0,))
    assert set(r.measured) == {"m", "eps", "nu"}
    assert r.measured["eps"] >= 0.0 and r.measured["nu"] > 0.0
    assert r.passed == (r.measured["m"] > r.measured["eps"])


def test_zero_nontarget_updates_give_exact_recovery():
    cfg = ProtocolConfig(d=8)
    U = np.zeros((cfg.K, cfg.d))
    U[0] = np.random.default_rng(0).normal(size=cfg.d)
    r = verify.verify_unbiasedness(cfg, U, n_trials=10_000, seed=0)
    assert r.passed and r.measured["max_abs_dev"] == 0.0


def test_zero_nontarget_covariance_is_zero():
    cfg = ProtocolConfig(d=4)
    U = np.zeros((cfg.K, cfg.d))
    U[0] = 1.0
    res = verify.verify_covariance(cfg, U, n_trials=2000, N_grid=(2, 5))
    for r in res[:-1]:
        assert r.measured == 0.0 and r.reference == 0.0 and r.passed


def test_stouffer_single_round_loose_bound_holds():
    spec = SyntheticScoreSpec()
    res = verify.verify_stouffer(spec, T_grid=(1,), gamma=spec.eps + 0.1, n_trials=10_000, seed=0)
    assert res[0].passed and res[0].reference["fp_bound"] > 0.5
