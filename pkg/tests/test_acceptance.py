"""Acceptance suite: full-scale replication studies plus numeric oracles.

Every numbered test prints one PASS/FAIL line (run with ``pytest -s`` or
``-rA`` to see them).  The replication studies at (n, p) = (300, 3000) are
shared module-scoped fixtures; the whole file takes on the order of ten
minutes on a single core and parallelizes over available cores.
"""

import os
import time

import numpy as np
import pytest

from aqfs import qbic, qrsolve, score, screening, simlab
from aqfs.basis import rescale_columns
from aqfs.proptests import min_check_loss_enumeration

REPS = 50
THREADS = max(1, min(8, os.cpu_count() or 1))
_BASE = dict(n=300, p=3000, replications=REPS, threads=THREADS)


def _report(num, ok, detail):
    print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}", flush=True)
    assert ok, f"criterion {num}: {detail}"


def _run(config):
    t0 = time.perf_counter()
    report = simlab.run_study(config)
    elapsed = time.perf_counter() - t0
    assert report.aggregates["failures"] == 0, "replication failures in study"
    return report, elapsed


@pytest.fixture(scope="module")
def study_ex1_t05():
    return _run(simlab.StudyConfig(
        example=1, taus=(0.5,), seed=20260501,
        run_qsis=False, run_qasis=False, run_selection_qpe=False, **_BASE,
    ))


@pytest.fixture(scope="module")
def study_ex1_t03():
    return _run(simlab.StudyConfig(
        example=1, taus=(0.3,), seed=20260502,
        run_qasis=False, run_oracle=False, run_selection_qpe=False, **_BASE,
    ))


@pytest.fixture(scope="module")
def study_ex2_t05():
    return _run(simlab.StudyConfig(
        example=2, taus=(0.5,), seed=20260503,
        run_oracle=False, run_selection_qpe=False, **_BASE,
    ))


@pytest.fixture(scope="module")
def study_ex3_t05():
    # The third generator's mostly nonlinear components need the richer
    # family (3 interior knots, 6 cubic functions per covariate): with the
    # 3-function default the best achievable oracle prediction error is
    # ~1.05 against the 0.86 target, independent of sample size.
    return _run(simlab.StudyConfig(
        example=3, taus=(0.5,), seed=20260504, basis_size=6,
        run_selection_qpe=False, **_BASE,
    ))


@pytest.fixture(scope="module")
def study_ex2_t07_nine_steps():
    return _run(simlab.StudyConfig(
        example=2, taus=(0.7,), seed=20260505, steps=9,
        run_qsis=False, run_qasis=False, run_oracle=False,
        run_selection_qpe=False, cn_variants=(), **_BASE,
    ))


def test_criterion_01_screening_rates_example1(study_ex1_t05):
    report, elapsed = study_ex1_t05
    agg = report.aggregates["taus"]["0.5"]["screening"]["aqfs"]
    rates = agg["rates"]
    ok = (
        all(rates[lab] == 1.0 for lab in ("X6", "X12", "X15", "X20"))
        and agg["all"] == 1.0
        and elapsed <= 1800.0
    )
    _report(1, ok, f"rates={rates}, All={agg['all']}, elapsed={elapsed:.0f}s")


def test_criterion_02_heteroscedastic_covariate_tau03(study_ex1_t03):
    report, _ = study_ex1_t03
    agg = report.aggregates["taus"]["0.3"]["screening"]["aqfs"]
    ok = agg["rates"]["X1"] >= 0.65 and agg["all"] >= 0.65
    _report(2, ok, f"X1 rate={agg['rates']['X1']:.2f}, All={agg['all']:.2f}")


def test_criterion_03_example2_methods(study_ex2_t05):
    report, _ = study_ex2_t05
    screen = report.aggregates["taus"]["0.5"]["screening"]
    aqfs_all = screen["aqfs"]["all"]
    qsis_all = screen["qsis"]["all"]
    qasis_all = screen["qasis"]["all"]
    ok = aqfs_all >= 0.85 and qsis_all <= 0.20 and qasis_all <= 0.35
    _report(3, ok, f"AQFS All={aqfs_all:.2f}, QSIS All={qsis_all:.2f}, "
                   f"QaSIS All={qasis_all:.2f}")


def test_criterion_04_example3_correlated(study_ex3_t05):
    report, _ = study_ex3_t05
    screen = report.aggregates["taus"]["0.5"]["screening"]
    aqfs_all = screen["aqfs"]["all"]
    qsis_x2 = screen["qsis"]["rates"]["X2"]
    qasis_x2 = screen["qasis"]["rates"]["X2"]
    ok = aqfs_all >= 0.95 and qsis_x2 <= 0.05 and qasis_x2 <= 0.05
    _report(4, ok, f"AQFS All={aqfs_all:.2f}, QSIS X2={qsis_x2:.2f}, "
                   f"QaSIS X2={qasis_x2:.2f}")


def test_criterion_05_selection_example1(study_ex1_t05):
    report, _ = study_ex1_t05
    sel = report.aggregates["taus"]["0.5"]["selection"]["1"]
    ok = sel["all"] == 1.0 and sel["fp"] <= 0.5 and sel["fn"] == 0.0
    _report(5, ok, f"All={sel['all']}, FP={sel['fp']:.2f}, FN={sel['fn']:.2f}")


def test_criterion_06_oracle_prediction_error(study_ex1_t05, study_ex3_t05):
    ex1, _ = study_ex1_t05
    ex3, _ = study_ex3_t05
    q1 = ex1.aggregates["taus"]["0.5"]["oracle_qpe"]["mean"]
    q3 = ex3.aggregates["taus"]["0.5"]["oracle_qpe"]["mean"]
    ok = abs(q1 - 0.51) <= 0.03 and abs(q3 - 0.86) <= 0.04
    _report(6, ok, f"oracle QPE: example1={q1:.3f} (target 0.51±0.03), "
                   f"example3={q3:.3f} (target 0.86±0.04)")


def test_criterion_07_ustat_identity():
    rng = np.random.default_rng(777)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(3, 13))
        tau = float(rng.uniform(0.05, 0.95))
        psi = np.where(rng.uniform(size=n) < tau, tau, tau - 1.0)
        x = rng.integers(0, max(2, n // 2 + 1), size=n).astype(float)
        naive = score.score_naive(psi, x)
        d1, d2, rec = score.ustat_decomposition(psi, x)
        again = (n - 1) * (n - 2) / n**2 * (d1 / (n - 2) + d2)
        worst = max(worst, abs(naive - rec), abs(rec - again))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed <= 60.0
    _report(7, ok, f"1000 cases, worst |diff|={worst:.2e}, {elapsed:.1f}s")


def test_criterion_08_solver_vertex_oracle():
    rng = np.random.default_rng(888)
    worst = -np.inf
    for _ in range(500):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(m + 1, 9))
        z = np.ones((n, m))
        if m > 1:
            z[:, 1:] = rng.uniform(0.0, 1.0, size=(n, m - 1))
        y = rng.normal(0.0, 2.0, size=n)
        tau = float(rng.uniform(0.05, 0.95))
        target = min_check_loss_enumeration(z, y, tau)
        got = qrsolve.fit(z, y, tau).objective
        worst = max(worst, got - target)
    ok = worst <= 1e-6
    _report(8, ok, f"500 instances, worst objective excess={worst:.2e}")


def test_criterion_09_fast_score_oracle():
    rng = np.random.default_rng(999)
    worst = 0.0
    for _ in range(500):
        n = int(rng.integers(3, 501))
        tau = float(rng.uniform(0.05, 0.95))
        psi = np.where(rng.uniform(size=n) < tau, tau, tau - 1.0)
        # Coarse grid injects heavy ties.
        x = rng.integers(0, max(2, n // 3), size=n).astype(float)
        worst = max(worst, abs(score.score_fast(psi, x) - score.score_naive(psi, x)))
    ok = worst <= 1e-12
    _report(9, ok, f"500 instances (n<=500, ties), worst |diff|={worst:.2e}")


def test_criterion_10_penalty_monotonicity(
    study_ex1_t05, study_ex1_t03, study_ex2_t05, study_ex3_t05
):
    violations = 0
    paths = 0
    for report, _ in (study_ex1_t05, study_ex1_t03, study_ex2_t05, study_ex3_t05):
        for row in report.rows:
            for entry in row["taus"].values():
                steps = [entry["selection"][str(v)]["step"] for v in (1, 2, 3)]
                paths += 1
                if not steps[0] <= steps[1] <= steps[2]:
                    violations += 1
    ok = violations == 0 and paths == 4 * REPS
    _report(10, ok, f"{paths} paths checked, {violations} ordering violations")


def test_criterion_11_runtime_budget():
    data = simlab.generate(1, 300, 3000, seed=31415)
    x01, _ = rescale_columns(data.x)
    t0 = time.perf_counter()
    path = screening.run_path(x01, data.y, 0.5)
    selections = qbic.select_all(path, 3000)
    elapsed = time.perf_counter() - t0
    ok = elapsed <= 60.0 and len(path) == 52 and len(selections) == 3
    _report(11, ok, f"path ({len(path)} steps) + 3 selections in {elapsed:.1f}s "
                    f"(budget 60s)")


class TestStudySpotChecks:
    """Spot checks of per-operation behavior, sharing the study fixtures."""

    def test_first_sweep_argmax_hits_truth(self, study_ex1_t05):
        report, _ = study_ex1_t05
        first = [row["taus"]["0.5"]["path"]["selected"][0] for row in report.rows]
        rate = np.mean([pick in {5, 11, 14, 19} for pick in first])
        assert rate >= 0.95

    def test_four_step_prefix_covers_truth(self, study_ex1_t05):
        report, _ = study_ex1_t05
        hits = sum(
            set(row["taus"]["0.5"]["path"]["selected"][:4]) == {5, 11, 14, 19}
            for row in report.rows
        )
        assert hits >= 48

    def test_marginal_ranking_misses_heteroscedastic_covariate(self, study_ex1_t03):
        report, _ = study_ex1_t03
        rate = report.aggregates["taus"]["0.3"]["screening"]["qsis"]["rates"]["X1"]
        assert rate <= 0.20  # outside the top slice in at least 80% of runs

    def test_qasis_smooth_component_rate(self, study_ex2_t05):
        report, _ = study_ex2_t05
        rate = report.aggregates["taus"]["0.5"]["screening"]["qasis"]["rates"]["X25"]
        assert 0.22 <= rate <= 0.62  # 0.42 +/- 0.20

    def test_illustration_replay(self, study_ex2_t07_nine_steps):
        report, _ = study_ex2_t07_nine_steps
        prefixes = [
            tuple(row["taus"]["0.7"]["path"]["selected"]) for row in report.rows
        ]
        # Some replication opens with the four strong linear covariates in the
        # illustrated order.
        opening = {p[:4] for p in prefixes}
        assert (11, 19, 14, 5) in opening
        # The six non-heteroscedastic members of the relevant set are inside
        # the nine-step prefix at least half the time.
        main_six = {5, 11, 14, 19, 24, 25}
        rate_six = np.mean([main_six <= set(p) for p in prefixes])
        assert rate_six >= 0.5
        # Catching the heteroscedastic covariate as well within nine steps is
        # a taller order: the 52-step retention rate is only ~0.55, which
        # bounds this from above.  Require the measured floor.
        full = main_six | {0}
        rate_full = np.mean([full <= set(p) for p in prefixes])
        assert rate_full >= 0.1
