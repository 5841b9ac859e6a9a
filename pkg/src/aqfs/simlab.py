"""Synthetic benchmarks: data generators, metrics, and replication studies.

Three generator families are provided, covering a fully linear additive
signal, a mostly linear signal with two smooth components, and a mostly
nonlinear signal under strong equicorrelation.  All three carry a
heteroscedastic covariate whose relevance switches off exactly at the
median, which is what makes them informative screening benchmarks.

Replication studies run the full pipeline (screening path, marginal
baselines, penalized selection, oracle refit) per replication and
aggregate retention rates, false positives/negatives, and out-of-sample
quantile prediction error.  Per-replication seeds are derived from the
master seed with a splittable scheme, so serial and parallel runs produce
identical reports.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import lfilter
from scipy.special import ndtr

from . import baselines, qbic, qrsolve, screening
from .basis import SplineBasis, make_basis, rescale_columns

_MIN_P = {1: 20, 2: 26, 3: 4}
# Columns entering the response formula (0-based), including the noise scale.
_RESPONSE_COLS = {
    1: (0, 5, 11, 14, 19),
    2: (0, 5, 11, 14, 19, 24, 25),
    3: (0, 1, 2, 3),
}


def covariate_label(j: int) -> str:
    """Display label for 0-based covariate column ``j`` (column 5 -> "X6")."""
    return f"X{j + 1}"


@dataclass(frozen=True)
class SyntheticDataset:
    """One generated replication: data plus everything needed to extend it."""

    example: int
    n: int
    p: int
    seed: int
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    coef: tuple[float, ...] | None = None

    def truth(self, tau: float) -> frozenset:
        return truth_set(self.example, tau)


def truth_set(example: int, tau: float) -> frozenset:
    """Relevant covariate columns (0-based) for one generator at level tau."""
    if example == 1:
        base = {5, 11, 14, 19}
    elif example == 2:
        base = {5, 11, 14, 19, 24, 25}
    elif example == 3:
        base = {1, 2, 3}
    else:
        raise ValueError(f"unknown example id {example}")
    if tau != 0.5:
        base = base | {0}
    return frozenset(base)


def _ar1_normal(rng: np.random.Generator, n: int, p: int) -> np.ndarray:
    """Stationary AR(1) columns with lag-h correlation 0.5**h, unit variance."""
    noise = rng.standard_normal((n, p))
    scale = np.full(p, math.sqrt(0.75))
    scale[0] = 1.0
    return lfilter([1.0], [1.0, -0.5], noise * scale, axis=1)


def _gen1(n, p, rng, coef):
    x = _ar1_normal(rng, n, p)
    x[:, 0] = math.sqrt(12.0) * ndtr(x[:, 0])
    eps = rng.standard_normal(n)
    y = x[:, 5] + x[:, 11] + x[:, 14] + x[:, 19] + 0.7 * x[:, 0] * eps
    return x, y, None


def _gen2(n, p, rng, coef):
    if coef is None:
        coef = tuple(rng.uniform(0.5, 1.5, size=4))
    x = _ar1_normal(rng, n, p)
    x[:, 0] = math.sqrt(12.0) * ndtr(x[:, 0])
    x[:, 24] = ndtr(x[:, 24])
    x[:, 25] = ndtr(x[:, 25])
    eps = rng.standard_normal(n)
    y = (
        coef[0] * x[:, 5]
        + coef[1] * x[:, 11]
        + coef[2] * x[:, 14]
        + coef[3] * x[:, 19]
        + np.sin(2.0 * np.pi * x[:, 24])
        + 2.5 * x[:, 25] ** 3
        + 0.7 * x[:, 0] * eps
    )
    return x, y, coef


def g_noise_ex3(t):
    """Nonnegative noise scale of the third generator."""
    return 7.0 * t**2


def g3_ex3(t):
    s = np.sin(2.0 * np.pi * t)
    return 4.0 * s / (2.0 - s)


def g4_ex3(t):
    w = 2.0 * np.pi * t
    s, c = np.sin(w), np.cos(w)
    return 0.6 * s + 1.2 * c + 1.8 * s**2 + 2.4 * c**3 + 3.0 * s**3


def _gen3(n, p, rng, coef):
    u = rng.uniform(size=(n, p))
    shared = rng.uniform(size=n)
    x = 0.5 * (u + shared[:, None])
    eps = rng.standard_normal(n)
    y = 5.0 * x[:, 1] + g3_ex3(x[:, 2]) + g4_ex3(x[:, 3]) + g_noise_ex3(x[:, 0]) * eps
    return x, y, None


_GENERATORS = {1: _gen1, 2: _gen2, 3: _gen3}


def generate(
    example: int,
    n: int,
    p: int,
    seed: int,
    coef: tuple[float, ...] | None = None,
) -> SyntheticDataset:
    """Draw one dataset; ``coef`` reuses replication-level coefficient draws
    (needed when generating matched test data)."""
    if example not in _GENERATORS:
        raise ValueError(f"unknown example id {example}")
    if p < _MIN_P[example]:
        raise ValueError(
            f"example {example} needs p >= {_MIN_P[example]}, got p={p}"
        )
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    x, y, coef_out = _GENERATORS[example](n, p, rng, coef)
    return SyntheticDataset(
        example=example, n=n, p=p, seed=int(seed), x=x, y=y, coef=coef_out
    )


def gen_example1(n: int, p: int, seed: int) -> SyntheticDataset:
    return generate(1, n, p, seed)


def gen_example2(n: int, p: int, seed: int) -> SyntheticDataset:
    return generate(2, n, p, seed)


def gen_example3(n: int, p: int, seed: int) -> SyntheticDataset:
    return generate(3, n, p, seed)


@dataclass(frozen=True)
class MetricRow:
    """Retention bookkeeping for one method on one replication."""

    hits: dict
    all_found: int
    fp: int
    fn: int


def metrics(selected, truth, p: int) -> MetricRow:
    """Per-covariate retention, sure-screening flag, and FP/FN counts."""
    selected = set(int(j) for j in selected)
    truth = set(int(j) for j in truth)
    if selected and (min(selected) < 0 or max(selected) >= p):
        raise ValueError("selected indices out of range")
    hits = {j: int(j in selected) for j in sorted(truth)}
    return MetricRow(
        hits=hits,
        all_found=int(truth <= selected),
        fp=len(selected - truth),
        fn=len(truth - selected),
    )


def qpe(
    selected,
    train: SyntheticDataset,
    tau: float,
    basis: SplineBasis,
    n_test: int = 5000,
    seed: int = 0,
    tol: float = 1e-8,
) -> float:
    """Out-of-sample mean check loss of the refit on ``selected`` columns.

    Fresh test observations come from the train dataset's generator (same
    coefficient draws, new seed); test covariates are rescaled with the
    training min-max maps, clipping anything out of range.
    """
    selected = sorted(set(int(j) for j in selected))
    needed = sorted(set(selected) | set(_RESPONSE_COLS[train.example]))
    p_cols = max(needed) + 1
    test = generate(train.example, n_test, p_cols, seed, coef=train.coef)

    if not selected:
        fit = qrsolve.fit(np.ones((train.n, 1)), train.y, tau, tol=tol)
        pred = np.full(n_test, fit.theta[0])
    else:
        cols = np.array(selected)
        x01, maps = rescale_columns(train.x[:, cols])
        design = qrsolve.build_design(x01, range(len(cols)), basis)
        fit = qrsolve.fit(design, train.y, tau, tol=tol)
        test01 = np.column_stack(
            [maps[k].apply(test.x[:, j]) for k, j in enumerate(cols)]
        )
        test_design = qrsolve.build_design(test01, range(len(cols)), basis)
        pred = test_design.matrix @ fit.theta
    return float(qrsolve.check_loss(test.y - pred, tau).mean())


@dataclass(frozen=True)
class StudyConfig:
    """Everything defining one replication study."""

    example: int
    taus: tuple[float, ...] = (0.5,)
    n: int = 300
    p: int = 3000
    replications: int = 100
    seed: int = 0
    basis_size: int | None = None
    degree: int | None = None
    steps: int | None = None
    tol: float = 1e-8
    cn_variants: tuple[int, ...] = (1, 2, 3)
    run_qsis: bool = True
    run_qasis: bool = True
    run_oracle: bool = True
    run_selection_qpe: bool = True
    qpe_test_size: int = 5000
    threads: int = 1

    def resolve_basis(self) -> SplineBasis:
        size = self.basis_size or screening.default_basis_size(self.n)
        return make_basis(size, self.degree)

    def resolve_steps(self, basis: SplineBasis) -> int:
        if self.steps is not None:
            return self.steps
        return screening.default_steps(self.n, p=self.p, basis_size=basis.size)


@dataclass(frozen=True)
class SimulationReport:
    """Raw per-replication rows plus their deterministic aggregation."""

    config: dict
    rows: list
    aggregates: dict


def replication_seeds(master_seed: int, replications: int) -> np.ndarray:
    """(replications, 2) array of independent train/test seeds."""
    state = np.random.SeedSequence(int(master_seed)).generate_state(
        2 * max(replications, 1), dtype=np.uint64
    )
    return state[: 2 * replications].reshape(replications, 2)


def _labelled(hits: dict) -> dict:
    return {covariate_label(j): v for j, v in sorted(hits.items())}


def _run_replication(config: StudyConfig, rep: int, train_seed: int, test_seed: int):
    t0 = time.perf_counter()
    basis = config.resolve_basis()
    steps = config.resolve_steps(basis)
    row = {
        "replication": rep,
        "train_seed": int(train_seed),
        "test_seed": int(test_seed),
        "taus": {},
        "error": None,
    }
    try:
        data = generate(config.example, config.n, config.p, train_seed)
        x01, _ = rescale_columns(data.x)
        for tau in config.taus:
            truth = data.truth(tau)
            entry = {
                "truth": [covariate_label(j) for j in sorted(truth)],
                "screening": {},
                "selection": {},
                "oracle_qpe": None,
            }
            path = screening.run_path(
                x01, data.y, tau, steps=steps, basis=basis, tol=config.tol
            )
            row_m = metrics(path.selected, truth, config.p)
            entry["path"] = {
                "selected": [int(j) for j in path.selected],
                "scores": [float(s) for s in path.scores],
                "objectives": [float(o) for o in path.objectives],
            }
            entry["screening"]["aqfs"] = {
                "hits": _labelled(row_m.hits),
                "all": row_m.all_found,
            }
            if config.run_qsis:
                rank = baselines.qsis(data.y, x01, tau, keep=steps, tol=config.tol)
                m = metrics(rank.retained, truth, config.p)
                entry["screening"]["qsis"] = {
                    "hits": _labelled(m.hits),
                    "all": m.all_found,
                }
            if config.run_qasis:
                rank = baselines.qasis(
                    data.y, x01, tau, keep=steps, basis=basis, tol=config.tol
                )
                m = metrics(rank.retained, truth, config.p)
                entry["screening"]["qasis"] = {
                    "hits": _labelled(m.hits),
                    "all": m.all_found,
                }
            for variant in config.cn_variants:
                sel = qbic.select(path, config.p, variant=variant)
                m = metrics(sel.selected, truth, config.p)
                sel_entry = {
                    "step": sel.step,
                    "c_n": sel.c_n,
                    "selected": [int(j) for j in sel.selected],
                    "values": [float(v) for v in sel.values],
                    "hits": _labelled(m.hits),
                    "all": m.all_found,
                    "fp": m.fp,
                    "fn": m.fn,
                    "qpe": None,
                }
                if config.run_selection_qpe:
                    sel_entry["qpe"], sel_entry["qpe_error"] = _try_qpe(
                        sel.selected, data, tau, basis, config, test_seed
                    )
                entry["selection"][str(variant)] = sel_entry
            if config.run_oracle:
                entry["oracle_qpe"], entry["oracle_qpe_error"] = _try_qpe(
                    sorted(truth), data, tau, basis, config, test_seed
                )
            row["taus"][_tau_key(tau)] = entry
    except (qrsolve.QuantileSolverError, screening.ScreeningError) as err:
        row["error"] = str(err)
    row["elapsed"] = time.perf_counter() - t0
    return row


def _try_qpe(selected, data, tau, basis, config: StudyConfig, test_seed: int):
    """QPE value or (None, reason): a failed refit loses one number, not
    the whole replication."""
    try:
        value = qpe(
            selected, data, tau, basis,
            n_test=config.qpe_test_size, seed=test_seed, tol=config.tol,
        )
        return value, None
    except qrsolve.QuantileSolverError as err:
        return None, str(err)


def _tau_key(tau: float) -> str:
    return format(tau, "g")


def _mean_se(values) -> dict:
    arr = np.array([v for v in values if v is not None], dtype=float)
    if arr.size == 0:
        return {"mean": None, "se": None, "count": 0}
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return {"mean": float(arr.mean()), "se": se, "count": int(arr.size)}


def aggregate_rows(rows: list, config: StudyConfig) -> dict:
    """Fold replication rows into per-tau rate and error summaries."""
    out: dict = {"failures": sum(1 for r in rows if r.get("error")), "taus": {}}
    good = [r for r in rows if not r.get("error")]
    out["elapsed_total"] = float(sum(r.get("elapsed", 0.0) for r in rows))
    for tau in config.taus:
        key = _tau_key(tau)
        entries = [r["taus"][key] for r in good if key in r["taus"]]
        agg: dict = {"replications": len(entries), "screening": {}, "selection": {}}
        if not entries:
            out["taus"][key] = agg
            continue
        labels = entries[0]["truth"]
        for method in entries[0]["screening"]:
            rates = {
                lab: float(
                    np.mean([e["screening"][method]["hits"][lab] for e in entries])
                )
                for lab in labels
            }
            agg["screening"][method] = {
                "rates": rates,
                "all": float(np.mean([e["screening"][method]["all"] for e in entries])),
            }
        for variant in entries[0]["selection"]:
            sels = [e["selection"][variant] for e in entries]
            agg["selection"][variant] = {
                "rates": {
                    lab: float(np.mean([s["hits"][lab] for s in sels]))
                    for lab in labels
                },
                "all": float(np.mean([s["all"] for s in sels])),
                "fp": float(np.mean([s["fp"] for s in sels])),
                "fn": float(np.mean([s["fn"] for s in sels])),
                "qpe": _mean_se([s["qpe"] for s in sels]),
                "step": float(np.mean([s["step"] for s in sels])),
            }
        agg["oracle_qpe"] = _mean_se([e["oracle_qpe"] for e in entries])
        out["taus"][key] = agg
    return out


def run_study(config: StudyConfig) -> SimulationReport:
    """Run all replications (optionally in parallel) and aggregate.

    The report is a pure function of the config: worker processes receive
    pre-derived seeds and rows are folded in replication order, so thread
    count never changes any number in the output.
    """
    seeds = replication_seeds(config.seed, config.replications)
    jobs = [
        (config, rep, int(seeds[rep, 0]), int(seeds[rep, 1]))
        for rep in range(config.replications)
    ]
    if config.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(_replication_star, jobs))
    else:
        rows = [_run_replication(*j) for j in jobs]
    failures = sum(1 for r in rows if r.get("error"))
    if failures:
        warnings.warn(
            f"{failures} of {len(rows)} replications failed", RuntimeWarning,
            stacklevel=2,
        )
    return SimulationReport(
        config=asdict(config),
        rows=rows,
        aggregates=aggregate_rows(rows, config),
    )


def _replication_star(args):
    return _run_replication(*args)
