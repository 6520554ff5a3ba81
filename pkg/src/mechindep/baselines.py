"""Transportability-based falsification baseline and shared test utilities.

The baseline checks the testable implication that the outcome is independent
of the environment label given covariates and treatment. For a K-level label
under a Gaussian linear working model this is scored with a nested-model
partial F-test: the restricted model pools all environments, the full model
either gives every environment its own coefficient vector
(``full_interaction``, the default) or adds per-environment intercept shifts
only (``intercept_shift``).

Also here: Pearson partial correlation with its t-based p-value, and the
Fisher / Tippett p-value combiners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import MultiEnvDataset, as_float_vector
from .errors import ValidationError
from .estimation import _lstsq_full_rank
from .features import FeatureSpec, build_outcome_features
from .mint import METHOD_TRANSPORTABILITY, SMALL_K_WARNING, TestResult
from .special import chi2_survival, f_critical_value, f_survival, student_t_two_sided_pvalue

FULL_INTERACTION = "full_interaction"
INTERCEPT_SHIFT = "intercept_shift"

_P_FLOOR = np.finfo(float).tiny  # keep reported p-values inside (0, 1]


@dataclass(frozen=True)
class PValueBundle:
    """A collection of p-values destined for one combining rule."""

    values: tuple[float, ...]
    method: str = "fisher"  # "fisher" | "tippett"

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValidationError("p-value bundle must be non-empty")
        for v in values:
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"p-values must lie in [0, 1], got {v}")
        if self.method not in ("fisher", "tippett"):
            raise ValidationError(f"unknown combination method {self.method!r}")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class PartialCorrelation:
    r: float
    p_value: float


def partial_correlation(x, y, Z=None) -> PartialCorrelation:
    """Pearson partial correlation of x and y given Z, with two-sided p-value.

    Both variables are residualized on ``[1, Z]`` by least squares; the
    p-value comes from ``t = r * sqrt((n - q - 2) / (1 - r^2))`` on
    ``n - q - 2`` degrees of freedom, ``q`` the number of conditioning
    columns. ``Z=None`` (or zero columns) gives the plain correlation test.
    """
    x = as_float_vector(x, "x")
    y = as_float_vector(y, "y")
    n = x.shape[0]
    if y.shape[0] != n:
        raise ValidationError(f"x and y disagree on length: {n} vs {y.shape[0]}")
    if Z is None:
        Z = np.empty((n, 0))
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] != n:
        raise ValidationError(f"Z must have {n} rows, got {Z.shape[0]}")
    q = Z.shape[1]
    if n <= q + 2:
        raise ValidationError(f"need n > q + 2, got n={n}, q={q}")
    design = np.column_stack([np.ones(n), Z])
    rank = np.linalg.matrix_rank(design)
    if rank < design.shape[1]:
        raise ValidationError("conditioning matrix Z is rank deficient")
    coef_x, _, _, _ = np.linalg.lstsq(design, x, rcond=None)
    coef_y, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    rx = x - design @ coef_x
    ry = y - design @ coef_y
    sx = float(np.linalg.norm(rx))
    sy = float(np.linalg.norm(ry))
    # A residual at rounding-noise level means the variable is exactly
    # explained by [1, Z]; the correlation of what remains is meaningless.
    tol_x = 1e-12 * max(float(np.linalg.norm(x)), 1.0)
    tol_y = 1e-12 * max(float(np.linalg.norm(y)), 1.0)
    if sx <= tol_x or sy <= tol_y:
        raise ValidationError("degenerate partial correlation: zero-variance residuals")
    r = float(np.clip(rx @ ry / (sx * sy), -1.0, 1.0))
    df = n - q - 2
    if 1.0 - r * r <= 0.0:
        return PartialCorrelation(r=r, p_value=0.0)
    t = r * math.sqrt(df / (1.0 - r * r))
    return PartialCorrelation(r=r, p_value=student_t_two_sided_pvalue(t, df))


def _bundle_values(bundle) -> tuple[float, ...]:
    if isinstance(bundle, PValueBundle):
        return bundle.values
    return PValueBundle(tuple(np.asarray(bundle, dtype=float))).values


def combine_fisher(bundle) -> float:
    """Fisher combination: chi-square survival of ``-2 * sum(log p)`` on 2k dof."""
    values = _bundle_values(bundle)
    if any(v == 0.0 for v in values):
        raise ValidationError(
            "Fisher combination needs p-values in (0, 1]; got an exact zero "
            "(log-statistic underflows)"
        )
    stat = -2.0 * sum(math.log(v) for v in values)
    return chi2_survival(stat, 2 * len(values))


def combine_tippett(bundle) -> float:
    """Tippett combination: ``1 - (1 - min p)^k``."""
    values = _bundle_values(bundle)
    k = len(values)
    return float(1.0 - (1.0 - min(values)) ** k)


def _pooled_outcome_design(dataset: MultiEnvDataset, phi_spec: FeatureSpec):
    blocks = [
        build_outcome_features(b.X, b.A, phi_spec) for b in dataset.blocks
    ]
    y = np.concatenate([b.Y for b in dataset.blocks])
    return blocks, y


def transportability_test(
    dataset: MultiEnvDataset,
    phi_spec: FeatureSpec,
    variant: str = FULL_INTERACTION,
    alpha: float = 0.05,
) -> TestResult:
    """Nested-model F-test of outcome-mechanism invariance across environments.

    Restricted model: the pooled outcome regressed on the outcome features.
    Full model: per-environment coefficient vectors (``full_interaction``) or
    pooled features plus ``K - 1`` environment indicators
    (``intercept_shift``). Rejecting indicates the conditional outcome law
    differs across environments, which falsifies unconfoundedness and
    transportability jointly.

    Returns a :class:`TestResult` with the F statistic, the critical value at
    ``alpha`` as the threshold, and the analytic p-value; ``resamples_M`` is 0
    because no resampling is involved.
    """
    if variant not in (FULL_INTERACTION, INTERCEPT_SHIFT):
        raise ValidationError(f"unknown transportability variant {variant!r}")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    K = dataset.n_envs
    feature_blocks, y = _pooled_outcome_design(dataset, phi_spec)
    pooled = np.vstack(feature_blocks)
    n, z_out = pooled.shape

    if variant == FULL_INTERACTION:
        df_full = K * z_out
    else:
        df_full = z_out + K - 1
    if n <= df_full + 1:
        raise ValidationError(
            f"pooled sample size {n} must exceed the full-model dimension "
            f"{df_full} plus one"
        )

    _, rss_restricted, _ = _lstsq_full_rank(pooled, y)

    if variant == FULL_INTERACTION:
        # Environment-specific coefficient sets decompose into separate fits.
        rss_full = 0.0
        for block, feats in zip(dataset.blocks, feature_blocks):
            _, rss_s, _ = _lstsq_full_rank(feats, block.Y)
            rss_full += rss_s
    else:
        indicators = np.zeros((n, K - 1))
        offset = 0
        for s, block in enumerate(dataset.blocks):
            if s > 0:
                indicators[offset : offset + block.n, s - 1] = 1.0
            offset += block.n
        _, rss_full, _ = _lstsq_full_rank(np.hstack([pooled, indicators]), y)

    delta_df = df_full - z_out
    denom_df = n - df_full
    numerator = max(rss_restricted - rss_full, 0.0) / delta_df
    denominator = rss_full / denom_df
    if denominator == 0.0:
        # Noiseless full fit: infinite evidence if pooling costs anything.
        statistic = np.inf if numerator > 0.0 else 0.0
    else:
        statistic = numerator / denominator
    p_value = max(f_survival(statistic, delta_df, denom_df), _P_FLOOR)
    threshold = f_critical_value(alpha, delta_df, denom_df)
    return TestResult(
        statistic=float(statistic),
        threshold=float(threshold),
        p_value=float(p_value),
        reject=statistic > threshold,
        alpha=alpha,
        resamples_M=0,
        seed=0,
        method=METHOD_TRANSPORTABILITY,
        null_samples=None,
        warnings=(SMALL_K_WARNING,) if K == 2 else (),
    )
