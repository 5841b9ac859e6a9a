"""Command-line front end: screen/select on CSV data, or run studies.

Subcommands
-----------
screen    forward-screen a CSV dataset, writing the per-step path trace
          (path_<tau>.csv) and the screened set (screened_<tau>.json).
select    screen, then pick the best nested model per penalty variant
          (selected_<tau>.json alongside the screen outputs).
simulate  run a replication study on a built-in generator, writing
          report.json and a method-by-metric table.csv.

Options may come from a JSON config file (--config); explicit command-line
flags override file values, which override built-in defaults.  All outputs
are deterministic functions of the inputs, the configuration, and the seed.
Exit codes: 0 ok, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import qbic, screening, simlab
from .basis import make_basis, rescale_columns

_MISSING_TOKENS = {"", "na", "nan", "null"}

DEFAULTS = {
    "tau": [0.5],
    "qn": None,       # floor(n ** 0.2) when absent
    "degree": None,   # cubic, lowered for tiny bases
    "steps": None,    # floor(n / ln n), capped
    "cn": [1, 2, 3],
    "tol": 1e-8,
    "seed": 0,
    "threads": 1,
    "out": ".",
    # simulate-only settings
    "example": None,
    "n": 300,
    "p": 3000,
    "replications": 100,
    "qsis": True,
    "qasis": True,
    "oracle": True,
    "selection_qpe": True,
    "test_size": 5000,
}


class CliError(Exception):
    """User-facing configuration or input error (exit status 1)."""


@dataclass(frozen=True)
class Dataset:
    """Numeric data loaded from CSV: response plus raw covariate matrix."""

    names: tuple[str, ...]
    response: str
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    dropped_rows: int

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


def load_csv(path, response: str) -> Dataset:
    """Read a headered numeric CSV, dropping rows with missing entries.

    Cells equal to one of '', 'na', 'nan', 'null' (case-insensitive) mark a
    missing value and drop their row; any other non-numeric cell is an
    error pinpointing its row and column.
    """
    path = Path(path)
    if not path.exists():
        raise CliError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise CliError(f"{path}: empty file (header row required)") from None
        header = [h.strip() for h in header]
        if response not in header:
            raise CliError(f"{path}: no column named {response!r} in header")
        rows = []
        dropped = 0
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise CliError(
                    f"{path}: line {lineno} has {len(record)} fields, "
                    f"expected {len(header)}"
                )
            parsed = np.empty(len(header))
            keep = True
            for col, cell in enumerate(record):
                text = cell.strip()
                if text.lower() in _MISSING_TOKENS:
                    keep = False
                    break
                try:
                    parsed[col] = float(text)
                except ValueError:
                    raise CliError(
                        f"{path}: non-numeric value {cell!r} at line {lineno}, "
                        f"column {header[col]!r}"
                    ) from None
            if keep:
                rows.append(parsed)
            else:
                dropped += 1
    if len(rows) < 3:
        raise CliError(f"{path}: need at least 3 complete rows, got {len(rows)}")
    data = np.array(rows)
    r_idx = header.index(response)
    keep_cols = [j for j in range(len(header)) if j != r_idx]
    if not keep_cols:
        raise CliError(f"{path}: no covariate columns besides the response")
    x = data[:, keep_cols]
    names = tuple(header[j] for j in keep_cols)
    constant = [names[k] for k in range(x.shape[1]) if np.all(x[:, k] == x[0, k])]
    if constant:
        warnings.warn(
            f"{len(constant)} constant covariate column(s) "
            f"({', '.join(constant[:5])}{'...' if len(constant) > 5 else ''}); "
            "they are excluded from screening",
            RuntimeWarning,
            stacklevel=2,
        )
    return Dataset(
        names=names, response=response, x=x, y=data[:, r_idx], dropped_rows=dropped
    )


def _tau_key(tau: float) -> str:
    return format(tau, "g")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _config_echo(settings: dict, dataset: Dataset | None = None, **resolved) -> dict:
    echo = {
        k: settings[k]
        for k in ("tau", "qn", "degree", "steps", "cn", "tol", "seed", "threads")
    }
    echo.update(resolved)  # defaults filled in from the data, e.g. qn, steps
    if dataset is not None:
        echo.update(
            {"response": dataset.response, "n": dataset.n, "p": dataset.p,
             "dropped_rows": dataset.dropped_rows}
        )
    return echo


def _resolve_model(settings: dict, n: int, p: int):
    qn = settings["qn"] or screening.default_basis_size(n)
    basis = make_basis(qn, settings["degree"])
    steps = settings["steps"]
    if steps is None:
        steps = screening.default_steps(n, p=p, basis_size=basis.size)
    return basis, steps


def cmd_screen(dataset: Dataset, settings: dict, out_dir: Path) -> dict:
    """Run the screening path per tau and write trace + screened-set files.

    Returns {tau_key: path} so cmd_select can reuse the computed paths.
    """
    x01, _ = rescale_columns(dataset.x)
    basis, steps = _resolve_model(settings, dataset.n, dataset.p)
    echo = _config_echo(
        settings, dataset, qn=basis.size, degree=basis.degree, steps=steps
    )
    paths = {}
    for tau in settings["tau"]:
        path = screening.run_path(
            x01, dataset.y, tau, steps=steps, basis=basis, tol=settings["tol"]
        )
        key = _tau_key(tau)
        paths[key] = path
        with (out_dir / f"path_{key}.csv").open("w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["step", "covariate", "score", "objective"])
            for step, rec in enumerate(path.steps, start=1):
                writer.writerow(
                    [step, dataset.names[rec.index], repr(rec.score),
                     repr(rec.objective)]
                )
        _write_json(
            out_dir / f"screened_{key}.json",
            {
                "config": echo,
                "tau": tau,
                "covariates": [dataset.names[j] for j in path.selected],
                "indices": list(path.selected),
            },
        )
    return paths


def cmd_select(dataset: Dataset, settings: dict, out_dir: Path) -> None:
    """Screen, then write the best-subset choice per penalty variant.

    The penalty scale is driven by the covariate dimension, clamped below
    at 8 where the log-log formulas stop being positive; this only matters
    for very small files.
    """
    paths = cmd_screen(dataset, settings, out_dir)
    basis, steps = _resolve_model(settings, dataset.n, dataset.p)
    echo = _config_echo(
        settings, dataset, qn=basis.size, degree=basis.degree, steps=steps
    )
    penalty_dim = max(dataset.p, 8)
    for key, path in paths.items():
        selections = []
        for variant in settings["cn"]:
            sel = qbic.select(path, penalty_dim, variant=variant)
            selections.append(
                {
                    "variant": f"QBIC{variant}",
                    "c_n": sel.c_n,
                    "ell_hat": sel.step,
                    "covariates": [dataset.names[j] for j in sel.selected],
                    "indices": list(sel.selected),
                    "qbic_values": [float(v) for v in sel.values],
                }
            )
        _write_json(
            out_dir / f"selected_{key}.json",
            {
                "config": echo,
                "tau": float(key),
                "selections": selections,
            },
        )


_TABLE_METHODS = {"qsis": "QSIS", "qasis": "QaSIS", "aqfs": "AQFS"}


def _table_rows(report: simlab.SimulationReport) -> list:
    """Flatten study aggregates into method-by-metric table rows."""
    labels: list[str] = []
    for tau_agg in report.aggregates["taus"].values():
        for entry in tau_agg.get("screening", {}).values():
            for lab in entry["rates"]:
                if lab not in labels:
                    labels.append(lab)
    labels.sort(key=lambda lab: int(lab[1:]))
    header = ["tau", "method", *labels, "All", "FP", "FN", "QPE", "QPE_se"]
    rows = [header]
    for key, agg in report.aggregates["taus"].items():
        screening_aggs = agg.get("screening", {})
        ordered = [m for m in ("qsis", "qasis", "aqfs") if m in screening_aggs]
        ordered += [m for m in screening_aggs if m not in ordered]
        for method in ordered:
            entry = screening_aggs[method]
            rows.append(
                [key, _TABLE_METHODS.get(method, method)]
                + [entry["rates"].get(lab, "") for lab in labels]
                + [entry["all"], "", "", "", ""]
            )
        for variant, entry in agg.get("selection", {}).items():
            qpe = entry["qpe"]
            rows.append(
                [key, f"AQFS+QBIC{variant}"]
                + [entry["rates"].get(lab, "") for lab in labels]
                + [entry["all"], entry["fp"], entry["fn"],
                   "" if qpe["mean"] is None else qpe["mean"],
                   "" if qpe["se"] is None else qpe["se"]]
            )
        oracle = agg.get("oracle_qpe")
        if oracle and oracle["count"]:
            rows.append(
                [key, "Oracle"] + [""] * len(labels)
                + ["", "", "", oracle["mean"], oracle["se"]]
            )
    return rows


def cmd_simulate(settings: dict, out_dir: Path) -> None:
    """Run a replication study and write report.json plus table.csv."""
    example = settings["example"]
    if example not in (1, 2, 3):
        raise CliError(f"--example must be 1, 2, or 3 (got {example!r})")
    config = simlab.StudyConfig(
        example=example,
        taus=tuple(settings["tau"]),
        n=settings["n"],
        p=settings["p"],
        replications=settings["replications"],
        seed=settings["seed"],
        basis_size=settings["qn"],
        degree=settings["degree"],
        steps=settings["steps"],
        tol=settings["tol"],
        cn_variants=tuple(settings["cn"]),
        run_qsis=settings["qsis"],
        run_qasis=settings["qasis"],
        run_oracle=settings["oracle"],
        run_selection_qpe=settings["selection_qpe"],
        qpe_test_size=settings["test_size"],
        threads=settings["threads"],
    )
    report = simlab.run_study(config)
    _write_json(
        out_dir / "report.json",
        {"config": report.config, "rows": report.rows,
         "aggregates": report.aggregates},
    )
    with (out_dir / "table.csv").open("w", newline="") as handle:
        writer = csv.writer(handle)
        for row in _table_rows(report):
            writer.writerow(
                [repr(v) if isinstance(v, float) else v for v in row]
            )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aqfs",
        description="Additive quantile forward screening and selection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=str, help="JSON config file")
        p.add_argument("--tau", type=float, nargs="+", help="quantile level(s)")
        p.add_argument("--qn", type=int, help="spline functions per covariate")
        p.add_argument("--degree", type=int, help="spline degree (default cubic)")
        p.add_argument("--steps", type=int, help="screening path length")
        p.add_argument("--cn", type=int, nargs="+", choices=(1, 2, 3),
                       help="penalty variant(s) for selection")
        p.add_argument("--tol", type=float, help="solver duality-gap tolerance")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--threads", type=int, help="parallel worker count")
        p.add_argument("--out", type=str, help="output directory")

    for name, doc in (
        ("screen", "forward-screen a CSV dataset"),
        ("select", "screen then pick best subsets by penalized check loss"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("data", type=str, help="input CSV file (header required)")
        p.add_argument("--response", required=True, help="response column name")
        common(p)

    p = sub.add_parser("simulate", help="run a built-in replication study")
    p.add_argument("--example", type=int, choices=(1, 2, 3),
                   help="generator id")
    p.add_argument("--reps", type=int, dest="replications",
                   help="number of replications")
    p.add_argument("--n", type=int, help="training sample size")
    p.add_argument("--p", type=int, help="covariate dimension")
    common(p)
    return parser


def _merge_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            raise CliError(f"no such config file: {cfg_path}")
        try:
            loaded = json.loads(cfg_path.read_text())
        except json.JSONDecodeError as err:
            raise CliError(f"{cfg_path}: invalid JSON ({err})") from None
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise CliError(
                f"{cfg_path}: unknown config key(s): {', '.join(sorted(unknown))}"
            )
        settings.update(loaded)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    for tau in settings["tau"]:
        if not 0.0 < tau < 1.0:
            raise CliError(f"tau must be in (0, 1), got {tau}")
    if settings["threads"] < 1:
        raise CliError("threads must be >= 1")
    return settings


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        settings = _merge_settings(args)
        out_dir = Path(settings["out"])
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            cmd_simulate(settings, out_dir)
        else:
            dataset = load_csv(args.data, args.response)
            if args.command == "screen":
                cmd_screen(dataset, settings, out_dir)
            else:
                cmd_select(dataset, settings, out_dir)
        return 0
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
