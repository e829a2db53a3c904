"""Two-sample goodness-of-fit testing for self-exciting sequences.

Simulate or load paired event datasets, estimate a shared histogram
triggering kernel under the null that both streams excite identically,
and calibrate a sandwich-covariance score statistic against its
chi-square asymptotics. Includes the unconstrained per-stream
estimator, the asymptotic power curve, and two classical baselines for
comparison.
"""

from .errors import (
    AllEmpty,
    DataError,
    DegenerateProcess,
    DimensionMismatch,
    DivergedStep,
    DomainError,
    EmptyFile,
    EmptySequence,
    HawkesGofError,
    HorizonMismatch,
    InsufficientSequences,
    NoConvergence,
    NonFiniteDerivative,
    NonFiniteLogArgument,
    NonPositiveHorizon,
    NumericalError,
    ParseError,
    SingularCovariance,
    TimeOutOfRange,
    UnstableKernel,
)
from .sequences import (
    EventSequence,
    LabeledSequence,
    merge_sequences,
    validate_sequence,
)
from .kernels import (
    BinGrid,
    ExponentialKernel,
    GRID_PRESETS,
    HawkesModel,
    PiecewiseKernel,
    PowerKernel,
    grid_from_spec,
)
from .simulate import intensity, sequence_rng, simulate_dataset, simulate_hawkes
from .likelihood import (
    FullParams,
    LagPairs,
    NullParams,
    PerProcessParams,
    TriggerSums,
    lag_pairs,
    loglik_full,
    loglik_null,
    merged_intensity,
    trigger_sums,
)
from .em import EmReport, complete_data_lower_bound, em_fit_full, em_fit_null
from .gs import (
    GSResult,
    ScoreBundle,
    aggregate_bundles,
    constraint_matrix,
    gs_statistic,
    gw_statistic,
    score_and_hessian,
)
from .asymptotics import (
    PowerQuery,
    asymptotic_power,
    chi2_cdf,
    chi2_quantile,
    marcum_q,
)
from .baselines import (
    ExpFit,
    exp_loglik_and_grad,
    exp_mle_gd,
    residual_process,
    residual_ripley_score,
    ripley_k,
)
from .io import emit, ingest, read_config
from .pipeline import (
    RunReport,
    TestConfig,
    TrialResult,
    auc,
    emit_report,
    fisher_yates,
    power_curve,
    qq_table,
    roc_points,
    run_gof,
    write_csv,
)

__version__ = "0.1.0"
