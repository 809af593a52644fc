"""Inference on individual mediation effects in linear structural equation
models, via equivalence-class averaging of adjusted regression coefficients."""

from .errors import (
    CapacityError,
    ConfigError,
    DegenerateVarianceError,
    GraphFormatError,
    InvalidDataError,
    InvalidGraphError,
    InvalidSpecError,
    MidaError,
    NumericalError,
)
from .estimator import (
    InfluenceSample,
    MidaResult,
    infer,
    influence_values,
    mida_estimate,
    plug_in_avar,
    population_mida_target,
    sample_w,
    theta1j_test,
)
from .graphs import (
    Cpdag,
    Dag,
    ParentSetMultiset,
    dag_to_cpdag,
    enumerate_mec,
    meek_closure,
    parent_set_multiset,
)
from .harness import (
    CoverageReport,
    CoverageRow,
    ExperimentConfig,
    RateCheckResult,
    bh_select,
    fscore,
    precision_recall_at_k,
    run_coverage,
    run_fdr,
    run_pr_fscore,
    run_rate_check,
)
from .lsem import (
    Dataset,
    LsemSpec,
    adjustment_effect,
    covariance_of,
    generate_random_lsem,
    mediation_effect,
    sample,
    standardize_spec,
    total_effect,
)
from .structure import (
    FisherZResult,
    PcConfig,
    PcDiagnostics,
    estimate_cpdag,
    estimate_cpdag_with_diagnostics,
    fisher_z,
    fisher_z_pvalue,
    partial_correlation,
    residualize_on_treatment,
)
from .subset_ols import (
    DIAGNOSTICS_CSV_HEADER,
    AleDecomposition,
    EnvelopeBounds,
    EnvelopeParams,
    FunctionalStat,
    SubsetFit,
    UniformDiagnostics,
    decompose,
    diagnostics_csv,
    envelope,
    fit_subset,
    linear_functional,
    population_beta,
    population_residual_coeffs,
    psi_values,
    uniform_diagnostics,
)

__version__ = "0.1.0"
