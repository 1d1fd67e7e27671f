"""Acceptance criteria, one test per criterion at the contracted tolerance."""

import time

import numpy as np
import pytest

from psido import bvp, grid, suite
from psido.bvp import EllipticOperatorSpec


def _assert_check(acceptance_log, label, result, extra=""):
    acceptance_log(label, result.passed, f"{result.metric} = {result.value:.4g} "
                                         f"(tolerance {result.tolerance:g}){extra}")
    assert result.passed, result.summary()


@pytest.mark.parametrize("k", [1, 2, 3, 5, 8])
def test_ac01_dno_exact_on_cosines(k, acceptance_log):
    start = time.perf_counter()
    g = grid.from_function(lambda x: np.cos(k * x), (np.pi,), (256,))
    out = bvp.dno(EllipticOperatorSpec(), g)
    elapsed = time.perf_counter() - start
    err = np.linalg.norm(out.values - k * g.values) / np.linalg.norm(k * g.values)
    ok = err <= 1e-8 and elapsed < 1.0
    acceptance_log(f"AC1 dno k={k}", ok, f"relative L2 error = {err:.3g}, {elapsed:.3f} s")
    assert err <= 1e-8
    assert elapsed < 1.0


def test_ac02_poisson_estimate(acceptance_log):
    start = time.perf_counter()
    res = suite.check_poissest()
    elapsed = time.perf_counter() - start
    _assert_check(acceptance_log, "AC2 poisson estimate", res, f", {elapsed:.1f} s")
    assert elapsed < 30


@pytest.mark.parametrize("k", [2, 4])
def test_ac03_green_manufactured(k, acceptance_log):
    coarse = suite.manufactured_green_error(k, 128)
    fine = suite.manufactured_green_error(k, 256)
    ok = fine <= 1e-3 and coarse / fine >= 3
    acceptance_log(f"AC3 green k={k}", ok,
                   f"W1 error {fine:.3g} at N=256, refinement factor {coarse / fine:.3g}")
    assert fine <= 1e-3
    assert coarse / fine >= 3


def test_ac04_boundary_derivative_order_gain(acceptance_log):
    _assert_check(acceptance_log, "AC4 boundary derivative rate", suite.check_greender())


def test_ac05_restrict_consistency(acceptance_log):
    res = suite.check_restrict()
    assert len(res.rows) >= 3
    _assert_check(acceptance_log, "AC5 restriction limit", res)


def test_ac06_rho_multiplication_identity(acceptance_log):
    _assert_check(acceptance_log, "AC6 rho identity", suite.check_liglem())


def test_ac07_cutoff_regularization(acceptance_log):
    _assert_check(acceptance_log, "AC7 cutoff derivative bound", suite.check_symbolcut())


def test_ac08_weighted_extension(acceptance_log):
    res = suite.check_rhoext()
    rate = res.rows[-1]["unweighted"]
    _assert_check(acceptance_log, "AC8 weighted extension", res, f", unweighted {rate}")


def test_ac09_wedge_estimates(acceptance_log):
    start = time.perf_counter()
    results = [suite.run_check(name) for name in
               ("ellbndrydist", "errweighted", "wghtdfull", "lre", "compest")]
    elapsed = time.perf_counter() - start
    for res in results:
        acceptance_log(f"AC9 {res.name}", res.passed, f"{res.metric} = {res.value:.4g}")
    ok = all(r.passed for r in results) and elapsed < 300
    acceptance_log("AC9 wedge suite", ok, f"total {elapsed:.1f} s")
    assert all(r.passed for r in results), [r.summary() for r in results]
    assert elapsed < 300


def test_ac10_weighted_bvp(acceptance_log):
    _assert_check(acceptance_log, "AC10 quarter-space poisson", suite.check_poisswghtd())
    _assert_check(acceptance_log, "AC10 wedge green", suite.check_wghtdgreen())


def test_ac11_ligocka_property(acceptance_log):
    _assert_check(acceptance_log, "AC11 rho^p multiplication", suite.check_ligocka())
