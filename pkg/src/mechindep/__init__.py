"""Falsification of no-unmeasured-confounding on multi-environment data.

The core test fits per-environment treatment and outcome working models,
then asks whether the fitted parameter vectors look statistically dependent
across environments; under independent causal mechanisms and no unmeasured
confounding they should not. Also included: a transportability-test
baseline, synthetic generators with closed-form oracles, a kernelized
variant, and a reproducible benchmark harness with a CLI.
"""

from .baselines import (
    FULL_INTERACTION,
    INTERCEPT_SHIFT,
    PartialCorrelation,
    PValueBundle,
    combine_fisher,
    combine_tippett,
    partial_correlation,
    transportability_test,
)
from .dataset import CovariatePanel, EnvironmentBlock, MultiEnvDataset
from .dgp import (
    ALPHA_U_ZERO,
    BETA_U_BETA_AU_ZERO,
    GroundTruth,
    LinearExampleConfig,
    OracleParams,
    PolynomialConfig,
    generate_linear_example,
    generate_polynomial,
    lemma1_closed_form,
    oracle_params_from_env,
    special_case_closed_form,
)
from .errors import (
    BenchmarkError,
    NumericalError,
    RankDeficientError,
    ValidationError,
)
from .estimation import (
    EnvironmentDiagnostics,
    FitDiagnostics,
    MechanismEstimates,
    fit_mechanisms,
    least_squares_fit,
)
from .features import (
    FeatureSpec,
    build_outcome_features,
    build_treatment_features,
    outcome_spec,
    treatment_spec,
)
from .harness import (
    BenchmarkRow,
    ExperimentConfig,
    SemiSyntheticSpec,
    SemiSyntheticTruth,
    benchmark_rows_to_csv,
    experiment_config_from_dict,
    run_benchmark,
    run_method,
    semi_synthetic_generate,
    standardize_covariates,
)
from .io import (
    CsvSchema,
    load_covariate_panel,
    load_csv_dataset,
    save_csv_dataset,
    save_test_result,
)
from .kernel import (
    KernelSpec,
    gram,
    kernel_dual,
    kernel_mint_test,
    kernel_statistic,
    resolve_bandwidth,
)
from .mint import (
    TestResult,
    bootstrap_refit,
    calibrate_threshold,
    frobenius_statistic,
    mint_test,
    permutation_test,
)
from .special import (
    chi2_survival,
    f_critical_value,
    f_survival,
    regularized_incomplete_beta,
    regularized_upper_gamma,
    student_t_two_sided_pvalue,
)

__version__ = "0.1.0"

__all__ = [
    "ALPHA_U_ZERO",
    "BETA_U_BETA_AU_ZERO",
    "BenchmarkError",
    "BenchmarkRow",
    "CovariatePanel",
    "CsvSchema",
    "EnvironmentBlock",
    "EnvironmentDiagnostics",
    "ExperimentConfig",
    "FULL_INTERACTION",
    "FeatureSpec",
    "FitDiagnostics",
    "GroundTruth",
    "INTERCEPT_SHIFT",
    "KernelSpec",
    "LinearExampleConfig",
    "MechanismEstimates",
    "MultiEnvDataset",
    "NumericalError",
    "OracleParams",
    "PValueBundle",
    "PartialCorrelation",
    "PolynomialConfig",
    "RankDeficientError",
    "SemiSyntheticSpec",
    "SemiSyntheticTruth",
    "TestResult",
    "ValidationError",
    "benchmark_rows_to_csv",
    "bootstrap_refit",
    "build_outcome_features",
    "build_treatment_features",
    "calibrate_threshold",
    "chi2_survival",
    "combine_fisher",
    "combine_tippett",
    "experiment_config_from_dict",
    "f_critical_value",
    "f_survival",
    "fit_mechanisms",
    "frobenius_statistic",
    "generate_linear_example",
    "generate_polynomial",
    "gram",
    "kernel_dual",
    "kernel_mint_test",
    "kernel_statistic",
    "least_squares_fit",
    "lemma1_closed_form",
    "load_covariate_panel",
    "load_csv_dataset",
    "mint_test",
    "oracle_params_from_env",
    "outcome_spec",
    "partial_correlation",
    "permutation_test",
    "regularized_incomplete_beta",
    "regularized_upper_gamma",
    "resolve_bandwidth",
    "run_benchmark",
    "run_method",
    "save_csv_dataset",
    "save_test_result",
    "semi_synthetic_generate",
    "special_case_closed_form",
    "standardize_covariates",
    "student_t_two_sided_pvalue",
    "transportability_test",
    "treatment_spec",
]
