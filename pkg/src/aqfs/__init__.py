"""Additive quantile forward screening, selection, and simulation tools."""

from .basis import (
    BasisConfigError,
    DomainError,
    RescaleMap,
    SplineBasis,
    make_basis,
    rescale,
    rescale_columns,
)
from .qrsolve import (
    Design,
    QuantileFit,
    QuantileSolverError,
    build_design,
    check_loss,
    fit,
    fit_blocks,
)
from .score import (
    ScoreTable,
    SweepPlan,
    qsis_scores,
    score_fast,
    score_naive,
    score_sweep,
    signs,
    ustat_decomposition,
)
from .screening import (
    ScreeningError,
    ScreeningPath,
    StepRecord,
    default_basis_size,
    default_steps,
    run_path,
)
from .qbic import (
    VARIANTS,
    SelectionResult,
    cn_value,
    qbic_value,
    select,
    select_all,
)
from .baselines import MarginalRanking, qasis, qsis
from .simlab import (
    MetricRow,
    SimulationReport,
    StudyConfig,
    SyntheticDataset,
    aggregate_rows,
    covariate_label,
    gen_example1,
    gen_example2,
    gen_example3,
    generate,
    metrics,
    qpe,
    replication_seeds,
    run_study,
    truth_set,
)
from .proptests import OracleReport, run_all

__version__ = "0.1.0"

__all__ = [
    "BasisConfigError", "DomainError", "RescaleMap", "SplineBasis",
    "make_basis", "rescale", "rescale_columns",
    "Design", "QuantileFit", "QuantileSolverError", "build_design",
    "check_loss", "fit", "fit_blocks",
    "ScoreTable", "SweepPlan", "qsis_scores", "score_fast", "score_naive",
    "score_sweep", "signs", "ustat_decomposition",
    "ScreeningError", "ScreeningPath", "StepRecord", "default_basis_size",
    "default_steps", "run_path",
    "VARIANTS", "SelectionResult", "cn_value", "qbic_value", "select",
    "select_all",
    "MarginalRanking", "qasis", "qsis",
    "MetricRow", "SimulationReport", "StudyConfig", "SyntheticDataset",
    "aggregate_rows", "covariate_label", "gen_example1", "gen_example2",
    "gen_example3", "generate", "metrics", "qpe", "replication_seeds",
    "run_study", "truth_set",
    "OracleReport", "run_all",
    "__version__",
]
