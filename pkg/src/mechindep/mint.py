"""Mechanism-independence falsification test.

Stage one fits the treatment and outcome working models separately in every
environment. Stage two tests whether the fitted parameter vectors co-vary
across environments, using the scaled Frobenius norm of their empirical
cross-covariance as the statistic. The rejection threshold is calibrated by
re-estimating on within-environment bootstrap resamples and randomly
permuting the environment index of the treatment-side parameters, which
breaks any pairing while preserving estimation noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import MultiEnvDataset, as_float_matrix, as_float_vector
from .errors import ValidationError
from .estimation import (
    MechanismEstimates,
    check_dimensions,
    fit_mechanisms,
    least_squares_fit,
)
from .features import FeatureSpec, build_outcome_features, build_treatment_features

METHOD_MINT = "mint"
METHOD_MINT_NO_BOOTSTRAP = "mint_no_bootstrap"
METHOD_TRANSPORTABILITY = "transportability"
METHOD_KERNEL_MINT = "kernel_mint"

SMALL_K_WARNING = (
    "K=2: only two distinct environment permutations exist; "
    "the calibrated threshold carries essentially no power"
)

_EPS = np.finfo(float).eps
DEFAULT_RIDGE_JITTER = 1e-8


@dataclass(frozen=True)
class TestResult:
    """Outcome of one falsification test, with full provenance.

    ``reject`` is true exactly when ``statistic > threshold`` (strict). When
    ``null_samples`` is retained, ``p_value`` equals the add-one Monte Carlo
    estimate ``(1 + #{T_m >= statistic}) / (M + 1)``.

    ``resamples_M`` is 0 for analytic tests that draw no resamples.
    """

    statistic: float
    threshold: float
    p_value: float
    reject: bool
    alpha: float
    resamples_M: int
    seed: int
    method: str
    null_samples: np.ndarray | None = None
    warnings: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.p_value <= 1.0:
            raise ValidationError(f"p_value must lie in (0, 1], got {self.p_value}")
        if self.statistic < 0 or self.threshold < 0:
            raise ValidationError("statistic and threshold must be non-negative")
        if self.reject != (self.statistic > self.threshold):
            raise ValidationError("reject flag inconsistent with statistic/threshold")
        if self.null_samples is not None:
            samples = np.array(np.asarray(self.null_samples, dtype=float))
            samples.setflags(write=False)
            object.__setattr__(self, "null_samples", samples)
        object.__setattr__(self, "warnings", tuple(self.warnings))


def frobenius_statistic(omegas, gammas) -> float:
    """Scaled Frobenius norm of the across-environment cross-covariance.

    With K environment rows, returns
    ``(1/K) * sqrt(sum_ij [sum_s (omega_si - mean_i)(gamma_sj - mean_j)]^2)``,
    which is zero exactly when the centered parameter matrices have
    orthogonal column spans.
    """
    omegas = as_float_matrix(omegas, "omegas")
    gammas = as_float_matrix(gammas, "gammas")
    K = omegas.shape[0]
    if gammas.shape[0] != K:
        raise ValidationError(
            f"omegas and gammas disagree on K: {K} vs {gammas.shape[0]}"
        )
    if K < 2:
        raise ValidationError(f"need at least 2 environments, got {K}")
    oc = omegas - omegas.mean(axis=0)
    gc = gammas - gammas.mean(axis=0)
    return float(np.linalg.norm(oc.T @ gc, "fro") / K)


def _batched_statistic(omegas: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    # omegas (M, K, z), gammas (M, K, z') -> (M,) statistics.
    K = omegas.shape[1]
    oc = omegas - omegas.mean(axis=1, keepdims=True)
    gc = gammas - gammas.mean(axis=1, keepdims=True)
    cross = np.einsum("mki,mkj->mij", oc, gc)
    return np.sqrt(np.einsum("mij,mij->m", cross, cross)) / K


def calibrate_threshold(null_samples, alpha: float) -> float:
    """Smallest observed null value t with ``#{T_m > t} / M <= alpha``.

    Equals the ``ceil((1 - alpha) * M)``-th ascending order statistic of the
    null samples; ties are resolved by sorted position.
    """
    samples = as_float_vector(null_samples, "null_samples")
    M = samples.shape[0]
    if M < 1:
        raise ValidationError("null_samples must be non-empty")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    ordered = np.sort(samples)
    # Guard the float ceil against representation error, then verify directly.
    idx = max(1, math.ceil(M * (1.0 - alpha) - 1e-9))
    while idx <= M:
        t = ordered[idx - 1]
        if np.count_nonzero(samples > t) <= alpha * M + 1e-9:
            return float(t)
        idx += 1
    return float(ordered[-1])


def _mc_p_value(statistic: float, null_samples: np.ndarray) -> float:
    # Add-one Monte Carlo estimate; never exactly zero.
    M = null_samples.shape[0]
    return float((1 + np.count_nonzero(null_samples >= statistic)) / (M + 1))


def _equilibrated_batch_solve(
    grams: np.ndarray, rhs: np.ndarray, n_rows: int, ridge_jitter: float
) -> np.ndarray:
    """Solve the stacked (M, m, m) normal-equation systems with a rank screen.

    Systems whose equilibrated Gram matrix is numerically rank deficient (on
    the ``max(n, m) * eps`` singular-value scale) get a ridge of
    ``ridge_jitter * mean(diag(Gram))`` before solving.
    """
    M, m, _ = grams.shape
    diag = np.einsum("mii->mi", grams)
    scale = np.sqrt(np.clip(diag, 0.0, None))
    scale[scale == 0.0] = 1.0
    eq = grams / (scale[:, :, None] * scale[:, None, :])
    eigs = np.linalg.eigvalsh(eq)
    tol = (max(n_rows, m) * _EPS) ** 2
    deficient = eigs[:, 0] <= tol * np.clip(eigs[:, -1], 0.0, None)
    if np.any(deficient):
        lam = ridge_jitter * diag.mean(axis=1)
        lam = np.where(lam > 0.0, lam, np.finfo(float).tiny)
        grams = grams.copy()
        idx = np.arange(m)
        grams[:, idx, idx] += np.where(deficient, lam, 0.0)[:, None]
        scale = np.sqrt(np.clip(np.einsum("mii->mi", grams), 0.0, None))
        scale[scale == 0.0] = 1.0
        eq = grams / (scale[:, :, None] * scale[:, None, :])
    sol = np.linalg.solve(eq, (rhs / scale)[:, :, None])[:, :, 0]
    return sol / scale


def _bootstrap_coefficient_batch(
    design: np.ndarray,
    target: np.ndarray,
    counts: np.ndarray,
    ridge_jitter: float,
) -> np.ndarray:
    """Coefficients of ``M`` bootstrap refits given per-row resample counts.

    Weighting the normal equations by the multiplicity counts reproduces the
    least-squares solution on the materialized resampled rows.
    """
    grams = np.einsum("mn,ni,nj->mij", counts, design, design, optimize=True)
    rhs = counts @ (design * target[:, None])
    return _equilibrated_batch_solve(grams, rhs, design.shape[0], ridge_jitter)


def _resample_counts(rng: np.random.Generator, n: int, M: int) -> np.ndarray:
    # Draw n row indices with replacement per resample; return multiplicity counts.
    idx = rng.integers(0, n, size=(M, n))
    flat = idx + (np.arange(M) * n)[:, None]
    return (
        np.bincount(flat.ravel(), minlength=M * n).reshape(M, n).astype(float)
    )


def bootstrap_refit(
    dataset: MultiEnvDataset,
    psi_spec: FeatureSpec,
    phi_spec: FeatureSpec,
    ridge_jitter: float = DEFAULT_RIDGE_JITTER,
    rng: np.random.Generator | None = None,
) -> MechanismEstimates:
    """Refit both working models on one within-environment bootstrap resample.

    Independently in each environment, ``n_s`` row indices are drawn
    uniformly with replacement and both models are refit on the resampled
    rows. A rank-deficient resampled design is solved with ridge
    ``ridge_jitter * mean(diag(D'D))`` instead of failing.
    """
    if rng is None:
        rng = np.random.default_rng()
    z, z_out = check_dimensions(dataset, psi_spec, phi_spec)
    K = dataset.n_envs
    omegas = np.empty((K, z))
    gammas = np.empty((K, z_out))
    for s, block in enumerate(dataset.blocks):
        counts = _resample_counts(rng, block.n, 1)
        psi = build_treatment_features(block.X, psi_spec)
        phi = build_outcome_features(block.X, block.A, phi_spec)
        omegas[s] = _bootstrap_coefficient_batch(psi, block.A, counts, ridge_jitter)[0]
        gammas[s] = _bootstrap_coefficient_batch(phi, block.Y, counts, ridge_jitter)[0]
    # Bootstrap refits carry no diagnostics; use fit_mechanisms for those.
    return MechanismEstimates(omegas, gammas, (), dataset.env_ids)


def _batched_bootstrap_fits(
    dataset: MultiEnvDataset,
    psi_spec: FeatureSpec,
    phi_spec: FeatureSpec,
    M: int,
    ridge_jitter: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """All M bootstrap refits at once; returns (M, K, z) and (M, K, z')."""
    z, z_out = check_dimensions(dataset, psi_spec, phi_spec)
    K = dataset.n_envs
    omegas = np.empty((M, K, z))
    gammas = np.empty((M, K, z_out))
    for s, block in enumerate(dataset.blocks):
        counts = _resample_counts(rng, block.n, M)
        psi = build_treatment_features(block.X, psi_spec)
        phi = build_outcome_features(block.X, block.A, phi_spec)
        omegas[:, s, :] = _bootstrap_coefficient_batch(
            psi, block.A, counts, ridge_jitter
        )
        gammas[:, s, :] = _bootstrap_coefficient_batch(
            phi, block.Y, counts, ridge_jitter
        )
    return omegas, gammas


def _random_permutations(rng: np.random.Generator, M: int, K: int) -> np.ndarray:
    perms = np.tile(np.arange(K), (M, 1))
    rng.permuted(perms, axis=1, out=perms)
    return perms


def permutation_test(
    omegas,
    gammas,
    alpha: float = 0.05,
    M: int = 1000,
    seed: int = 0,
    extra_warnings: tuple[str, ...] = (),
) -> TestResult:
    """Permutation independence test on already-estimated parameter matrices.

    Draws ``M`` uniform permutations of the environment indices, applies each
    to the treatment-side rows only, and compares the observed statistic with
    the permuted null. This is the no-bootstrap calibration; identity
    permutations drawn by chance are kept.
    """
    omegas = as_float_matrix(omegas, "omegas")
    gammas = as_float_matrix(gammas, "gammas")
    if M < 1:
        raise ValidationError(f"M must be >= 1, got {M}")
    K = omegas.shape[0]
    statistic = frobenius_statistic(omegas, gammas)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perms = _random_permutations(rng, M, K)
    null_samples = _batched_statistic(
        omegas[perms], np.broadcast_to(gammas, (M, *gammas.shape))
    )
    threshold = calibrate_threshold(null_samples, alpha)
    warnings = tuple(extra_warnings) + ((SMALL_K_WARNING,) if K == 2 else ())
    return TestResult(
        statistic=statistic,
        threshold=threshold,
        p_value=_mc_p_value(statistic, null_samples),
        reject=statistic > threshold,
        alpha=alpha,
        resamples_M=M,
        seed=seed,
        method=METHOD_MINT_NO_BOOTSTRAP,
        null_samples=null_samples,
        warnings=warnings,
    )


def mint_test(
    dataset: MultiEnvDataset,
    psi_spec: FeatureSpec,
    phi_spec: FeatureSpec,
    alpha: float = 0.05,
    M: int = 1000,
    seed: int = 0,
    use_bootstrap: bool = True,
    ridge_jitter: float = DEFAULT_RIDGE_JITTER,
) -> TestResult:
    """Two-stage falsification test for mechanism independence.

    Stage one fits both working models on the full data and evaluates the
    cross-covariance statistic. Stage two builds ``M`` null draws: with
    ``use_bootstrap`` each draw refits on fresh within-environment resamples
    (otherwise the full-data fit is reused) and the treatment-side rows are
    randomly permuted. The threshold is the empirical ``(1 - alpha)`` null
    quantile; rejection requires a strictly larger observed statistic.

    The bootstrap resampling and the permutations consume two separately
    derived random streams, so the two randomizations are independent and the
    result is reproducible bit for bit from ``seed``.
    """
    if M < 1:
        raise ValidationError(f"M must be >= 1, got {M}")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    boot_ss, perm_ss = np.random.SeedSequence(seed).spawn(2)
    fit = fit_mechanisms(dataset, psi_spec, phi_spec, ridge=0.0)
    statistic = frobenius_statistic(fit.omegas, fit.gammas)
    K = dataset.n_envs
    if use_bootstrap:
        omegas_b, gammas_b = _batched_bootstrap_fits(
            dataset, psi_spec, phi_spec, M, ridge_jitter, np.random.default_rng(boot_ss)
        )
    else:
        omegas_b = np.broadcast_to(fit.omegas, (M, *fit.omegas.shape))
        gammas_b = np.broadcast_to(fit.gammas, (M, *fit.gammas.shape))
    perms = _random_permutations(np.random.default_rng(perm_ss), M, K)
    permuted = omegas_b[np.arange(M)[:, None], perms, :]
    null_samples = _batched_statistic(permuted, gammas_b)
    threshold = calibrate_threshold(null_samples, alpha)
    return TestResult(
        statistic=statistic,
        threshold=threshold,
        p_value=_mc_p_value(statistic, null_samples),
        reject=statistic > threshold,
        alpha=alpha,
        resamples_M=M,
        seed=seed,
        method=METHOD_MINT if use_bootstrap else METHOD_MINT_NO_BOOTSTRAP,
        null_samples=null_samples,
        warnings=(SMALL_K_WARNING,) if K == 2 else (),
    )
