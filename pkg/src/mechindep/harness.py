"""Experiment harness: falsification-rate sweeps and the semi-synthetic pipeline.

A benchmark is a deterministic grid: one sweep axis, a fixed number of
repetitions per axis value, and a root seed. Repetition ``r`` on axis index
``i`` derives its random streams from ``SeedSequence([seed, i, r])``, so no
stream is reused across cells and results are independent of scheduling.
Repetitions may run in parallel; rows are reduced in (axis, repetition)
order, never completion order.
"""

from __future__ import annotations

import dataclasses
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baselines import FULL_INTERACTION, INTERCEPT_SHIFT, transportability_test
from .dataset import CovariatePanel, EnvironmentBlock, MultiEnvDataset
from .dgp import (
    VARYING_PARAMETER_NAMES,
    GroundTruth,
    LinearExampleConfig,
    PolynomialConfig,
    generate_linear_example,
    generate_polynomial,
)
from .errors import BenchmarkError, ValidationError
from .features import FeatureSpec, build_treatment_features, outcome_spec, treatment_spec
from .io import dataclass_from_dict, format_float, require_schema_version
from .kernel import KernelSpec, kernel_mint_test
from .mint import (
    METHOD_KERNEL_MINT,
    METHOD_MINT,
    METHOD_MINT_NO_BOOTSTRAP,
    METHOD_TRANSPORTABILITY,
    TestResult,
    mint_test,
)

METHODS = (
    METHOD_MINT,
    METHOD_MINT_NO_BOOTSTRAP,
    METHOD_TRANSPORTABILITY,
    METHOD_KERNEL_MINT,
)

GENERATORS = ("linear_example", "polynomial", "semi_synthetic")


# ---------------------------------------------------------------------------
# Covariate standardization and the semi-synthetic pipeline
# ---------------------------------------------------------------------------

def _pooled_column_stats(matrices: list[np.ndarray]):
    pooled = np.vstack(matrices)
    mean = pooled.mean(axis=0)
    var = pooled.var(axis=0)  # population variance: {0, 2} -> {-1, +1}
    zero = np.flatnonzero(var == 0.0)
    if zero.size:
        raise ValidationError(
            f"zero-variance covariate column(s): {[int(j) for j in zero]}"
        )
    return mean, np.sqrt(var)


def standardize_covariates(dataset: MultiEnvDataset) -> MultiEnvDataset:
    """Rescale covariates to pooled mean 0 and variance 1; A and Y untouched."""
    mean, std = _pooled_column_stats([b.X for b in dataset.blocks])
    return dataset.with_covariates([(b.X - mean) / std for b in dataset.blocks])


def _standardize_panel(panel: CovariatePanel) -> CovariatePanel:
    mean, std = _pooled_column_stats([X for _, X in panel.blocks])
    return CovariatePanel(
        tuple((env, (X - mean) / std) for env, X in panel.blocks)
    )


@dataclass(frozen=True)
class SemiSyntheticTruth:
    """Ground truth of one semi-synthetic draw."""

    confounded: bool
    varied: frozenset[str]
    confounder_columns: tuple[int, ...]  # columns of the source panel
    observed_columns: tuple[int, ...]
    unmeasured_columns: tuple[int, ...]


def semi_synthetic_generate(
    covariates: CovariatePanel,
    n_confounders: int,
    degree: int,
    observed_subset_size: int,
    confounded: bool,
    rng: np.random.Generator,
    noise_std: float = 0.5,
    resample_beta_intercept: bool = True,
) -> tuple[MultiEnvDataset, SemiSyntheticTruth]:
    """Generate treatment and outcome over real covariates.

    Covariates are standardized (pooled), ``n_confounders`` columns are drawn
    uniformly without replacement as the true parents of treatment and
    outcome, and (A, Y) follow the polynomial coefficient scheme over those
    columns. Only the first ``observed_subset_size`` of the drawn columns are
    exposed as measured covariates. With ``confounded=False`` the unexposed
    columns are removed from the generating equations as well, so no
    unmeasured confounders remain.
    """
    if n_confounders < 1:
        raise ValidationError(f"need n_confounders >= 1, got {n_confounders}")
    if not 1 <= observed_subset_size <= n_confounders:
        raise ValidationError(
            f"observed_subset_size must lie in [1, {n_confounders}], "
            f"got {observed_subset_size}"
        )
    if covariates.d < n_confounders:
        raise ValidationError(
            f"covariate panel has {covariates.d} columns, need >= {n_confounders}"
        )
    if degree < 1:
        raise ValidationError(f"need degree >= 1, got {degree}")
    panel = _standardize_panel(covariates)
    chosen = rng.choice(covariates.d, size=n_confounders, replace=False)
    observed = tuple(int(j) for j in chosen[:observed_subset_size])
    unmeasured = tuple(int(j) for j in chosen[observed_subset_size:])
    generating = list(chosen) if confounded else list(observed)
    d_gen = len(generating)
    slope_alpha = rng.choice(np.array([-1.0, 1.0]), size=d_gen * degree)
    slope_beta = np.ones(d_gen * degree)
    power_spec = treatment_spec(degree=degree, include_intercept=False)
    blocks = []
    for env_id, X in panel.blocks:
        n = X.shape[0]
        alpha0 = float(rng.normal(0.0, 1.0))
        beta0 = float(rng.normal(0.0, 1.0)) if resample_beta_intercept else 1.0
        powers = build_treatment_features(X[:, generating], power_spec)
        A = alpha0 + powers @ slope_alpha + rng.normal(0.0, noise_std, size=n)
        Y = beta0 + powers @ slope_beta + A + rng.normal(0.0, noise_std, size=n)
        blocks.append(EnvironmentBlock(env_id, X[:, list(observed)], A, Y))
    varied = {"alpha0"} | ({"beta0"} if resample_beta_intercept else set())
    truth = SemiSyntheticTruth(
        confounded=bool(confounded) and bool(unmeasured),
        varied=frozenset(varied),
        confounder_columns=tuple(int(j) for j in chosen),
        observed_columns=observed,
        unmeasured_columns=unmeasured if confounded else (),
    )
    return MultiEnvDataset(tuple(blocks)), truth


@dataclass(frozen=True)
class SemiSyntheticSpec:
    """Generator parameters of the semi-synthetic pipeline (JSON schema)."""

    covariates_csv: str
    env_column: str = "env"
    covariate_columns: tuple[str, ...] | None = None
    n_confounders: int = 5
    degree: int = 2
    observed_subset_size: int = 5
    confounded: bool = True
    resample_beta_intercept: bool = True
    noise_std: float = 0.5


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

_SWEEP_AXES = {
    "linear_example": ("n_envs", "n_per_env", "varying_parameter"),
    "polynomial": ("n_envs", "n_per_env", "n_covariates", "degree"),
    "semi_synthetic": ("observed_subset_size", "degree", "n_confounders"),
}

_COMMON_METHOD_KEYS = frozenset({"alpha", "resamples"})
_FEATURE_KEYS = frozenset({"feature_degree", "include_interactions", "include_square"})
_METHOD_KEYS = {
    METHOD_MINT: _COMMON_METHOD_KEYS | _FEATURE_KEYS | {"ridge_jitter"},
    METHOD_MINT_NO_BOOTSTRAP: _COMMON_METHOD_KEYS | _FEATURE_KEYS | {"ridge_jitter"},
    METHOD_TRANSPORTABILITY: frozenset({"alpha", "variant"}) | _FEATURE_KEYS,
    METHOD_KERNEL_MINT: _COMMON_METHOD_KEYS | {"treatment_kernel", "outcome_kernel"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One benchmark sweep: generator, method, a single axis, repetitions, seed."""

    generator: str
    generator_config: object  # LinearExampleConfig | PolynomialConfig | SemiSyntheticSpec
    method: str
    method_params: dict
    sweep_axis: str
    sweep_values: tuple
    repetitions: int
    seed: int

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValidationError(f"unknown generator {self.generator!r}")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        allowed_axes = _SWEEP_AXES[self.generator]
        if self.sweep_axis not in allowed_axes:
            raise ValidationError(
                f"sweep axis {self.sweep_axis!r} not valid for {self.generator}; "
                f"allowed: {list(allowed_axes)}"
            )
        values = tuple(self.sweep_values)
        if not values:
            raise ValidationError("sweep values must be non-empty")
        if self.sweep_axis == "varying_parameter":
            bad = [v for v in values if v not in VARYING_PARAMETER_NAMES]
            if bad:
                raise ValidationError(
                    f"invalid varying-parameter values: {bad}; "
                    f"allowed: {list(VARYING_PARAMETER_NAMES)}"
                )
        else:
            if not all(isinstance(v, (int, np.integer)) and not isinstance(v, bool) for v in values):
                raise ValidationError(
                    f"axis {self.sweep_axis!r} takes integer values, got {values!r}"
                )
            values = tuple(int(v) for v in values)
        if self.repetitions < 1:
            raise ValidationError(f"repetitions must be >= 1, got {self.repetitions}")
        unknown = set(self.method_params) - _METHOD_KEYS[self.method]
        if unknown:
            raise ValidationError(
                f"method_params: unknown keys {sorted(unknown)} for {self.method}; "
                f"allowed: {sorted(_METHOD_KEYS[self.method])}"
            )
        object.__setattr__(self, "sweep_values", values)
        object.__setattr__(self, "method_params", dict(self.method_params))
        object.__setattr__(self, "seed", int(self.seed))


def experiment_config_from_dict(obj: dict) -> ExperimentConfig:
    """Parse and validate an experiment config JSON object (strict keys)."""
    from .io import generator_config_from_dict

    require_schema_version(obj, "experiment config")
    allowed = {
        "schema_version",
        "generator",
        "generator_params",
        "method",
        "method_params",
        "sweep",
        "repetitions",
        "seed",
    }
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError(
            f"experiment config: unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}"
        )
    for key in ("generator", "sweep", "repetitions", "seed"):
        if key not in obj:
            raise ValidationError(f"experiment config: missing key {key!r}")
    sweep = obj["sweep"]
    if not isinstance(sweep, dict) or set(sweep) != {"axis", "values"}:
        raise ValidationError(
            "experiment config: sweep must be an object with exactly "
            "the keys 'axis' and 'values'"
        )
    generator = obj["generator"]
    gen_config = generator_config_from_dict(generator, obj.get("generator_params", {}))
    return ExperimentConfig(
        generator=generator,
        generator_config=gen_config,
        method=obj.get("method", METHOD_MINT),
        method_params=obj.get("method_params", {}),
        sweep_axis=sweep["axis"],
        sweep_values=tuple(sweep["values"]),
        repetitions=obj["repetitions"],
        seed=obj["seed"],
    )


@dataclass(frozen=True)
class BenchmarkRow:
    """Falsification rate of one axis value."""

    axis: str
    value: object
    falsification_rate: float
    standard_error: float
    repetitions: int
    wall_time_seconds: float

    def __post_init__(self):
        if not 0.0 <= self.falsification_rate <= 1.0:
            raise ValidationError("falsification_rate must lie in [0, 1]")


# ---------------------------------------------------------------------------
# Running methods on datasets
# ---------------------------------------------------------------------------

def resolve_feature_specs(
    generator: str, generator_config, method_params: dict
) -> tuple[FeatureSpec, FeatureSpec]:
    """Working-model feature maps, defaulting to well-specified for the generator."""
    if generator == "linear_example":
        degree, interactions, square = 1, True, True
    else:
        degree = getattr(generator_config, "degree", 1)
        interactions, square = False, False
    degree = int(method_params.get("feature_degree", degree))
    interactions = bool(method_params.get("include_interactions", interactions))
    square = bool(method_params.get("include_square", square))
    return (
        treatment_spec(degree=degree),
        outcome_spec(degree=degree, interactions=interactions, square=square),
    )


def _kernel_spec_from_params(params, default: KernelSpec, context: str) -> KernelSpec:
    if params is None:
        return default
    return dataclass_from_dict(KernelSpec, params, context)


def run_method(
    config: ExperimentConfig, dataset: MultiEnvDataset, seed: int
) -> TestResult:
    """Run the configured method once on a dataset."""
    params = config.method_params
    alpha = float(params.get("alpha", 0.05))
    resamples = int(params.get("resamples", 1000))
    if config.method in (METHOD_MINT, METHOD_MINT_NO_BOOTSTRAP):
        psi_spec, phi_spec = resolve_feature_specs(
            config.generator, config.generator_config, params
        )
        kwargs = {}
        if "ridge_jitter" in params:
            kwargs["ridge_jitter"] = float(params["ridge_jitter"])
        return mint_test(
            dataset,
            psi_spec,
            phi_spec,
            alpha=alpha,
            M=resamples,
            seed=seed,
            use_bootstrap=config.method == METHOD_MINT,
            **kwargs,
        )
    if config.method == METHOD_TRANSPORTABILITY:
        _, phi_spec = resolve_feature_specs(
            config.generator, config.generator_config, params
        )
        variant = params.get("variant", FULL_INTERACTION)
        return transportability_test(dataset, phi_spec, variant=variant, alpha=alpha)
    default = KernelSpec()
    k_spec = _kernel_spec_from_params(
        params.get("treatment_kernel"), default, "treatment_kernel"
    )
    h_spec = _kernel_spec_from_params(
        params.get("outcome_kernel"), default, "outcome_kernel"
    )
    return kernel_mint_test(
        dataset, k_spec, h_spec, alpha=alpha, M=resamples, seed=seed
    )


def _cell_generator_config(config: ExperimentConfig, value):
    base = config.generator_config
    axis = config.sweep_axis
    if axis == "varying_parameter":
        return dataclasses.replace(base, varying=frozenset({value}))
    return dataclasses.replace(base, **{axis: value})


def _generate_dataset(
    generator: str, gen_config, rng: np.random.Generator, panel: CovariatePanel | None
):
    if generator == "linear_example":
        return generate_linear_example(gen_config, rng)
    if generator == "polynomial":
        return generate_polynomial(gen_config, rng)
    if panel is None:
        raise ValidationError("semi_synthetic generator needs a covariate panel")
    return semi_synthetic_generate(
        panel,
        n_confounders=gen_config.n_confounders,
        degree=gen_config.degree,
        observed_subset_size=gen_config.observed_subset_size,
        confounded=gen_config.confounded,
        rng=rng,
        noise_std=gen_config.noise_std,
        resample_beta_intercept=gen_config.resample_beta_intercept,
    )


def repetition_seed_sequence(seed: int, axis_index: int, repetition: int):
    """Root stream of one repetition; no reuse across cells by construction."""
    return np.random.SeedSequence([int(seed), int(axis_index), int(repetition)])


def _run_repetition(
    config: ExperimentConfig,
    axis_index: int,
    value,
    repetition: int,
    panel: CovariatePanel | None,
) -> bool:
    root = repetition_seed_sequence(config.seed, axis_index, repetition)
    gen_ss, test_ss = root.spawn(2)
    test_seed = int(test_ss.generate_state(1, dtype=np.uint64)[0])
    try:
        gen_config = _cell_generator_config(config, value)
        dataset, _ = _generate_dataset(
            config.generator, gen_config, np.random.default_rng(gen_ss), panel
        )
        result = run_method(config, dataset, test_seed)
    except Exception as exc:
        raise BenchmarkError(
            f"repetition failed at {config.sweep_axis}={value!r}, "
            f"repetition {repetition}, seed {test_seed}: {exc}",
            axis_value=value,
            repetition=repetition,
            seed=test_seed,
        ) from exc
    return bool(result.reject)


def run_benchmark(
    config: ExperimentConfig,
    threads: int = 1,
    panel: CovariatePanel | None = None,
) -> list[BenchmarkRow]:
    """Run the full sweep: ``repetitions`` generate-test cycles per axis value.

    Returns one row per axis value, in axis order, with the rejection
    fraction and its binomial standard error. ``threads > 1`` parallelizes
    repetitions; output is identical regardless of thread count.
    """
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    if config.generator == "semi_synthetic" and panel is None:
        from .io import load_covariate_panel

        spec = config.generator_config
        panel = load_covariate_panel(
            spec.covariates_csv, spec.env_column, spec.covariate_columns
        )
    rows = []
    for axis_index, value in enumerate(config.sweep_values):
        start = time.perf_counter()
        reps = range(config.repetitions)

        def one(r, _value=value, _i=axis_index):
            return _run_repetition(config, _i, _value, r, panel)

        if threads == 1:
            rejects = [one(r) for r in reps]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rejects = list(pool.map(one, reps))
        rate = float(np.mean(rejects))
        se = float(np.sqrt(rate * (1.0 - rate) / config.repetitions))
        rows.append(
            BenchmarkRow(
                axis=config.sweep_axis,
                value=value,
                falsification_rate=rate,
                standard_error=se,
                repetitions=config.repetitions,
                wall_time_seconds=time.perf_counter() - start,
            )
        )
    return rows


def benchmark_rows_to_csv(rows: list[BenchmarkRow], include_timing: bool = False) -> str:
    """Render benchmark rows as CSV text.

    The ``seconds`` column is left empty unless ``include_timing`` is set:
    wall-clock values would break byte-for-byte reproducibility of result
    files, which is part of the output contract.
    """
    lines = ["axis,value,rate,se,reps,seconds"]
    for row in rows:
        value = (
            format_float(row.value)
            if isinstance(row.value, float)
            else str(row.value)
        )
        seconds = format_float(row.wall_time_seconds) if include_timing else ""
        lines.append(
            ",".join(
                [
                    row.axis,
                    value,
                    format_float(row.falsification_rate),
                    format_float(row.standard_error),
                    str(row.repetitions),
                    seconds,
                ]
            )
        )
    return "\n".join(lines) + "\n"
