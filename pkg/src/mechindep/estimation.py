"""Per-environment least-squares fits of the two working models.

The solver is factorization based (SVD via ``lstsq``), never an explicit
normal-equation inverse, with rank tolerance ``max(n, m) * eps * sigma_max``.
With a positive ridge penalty ``lam`` it solves ``(D'D + lam*I) b = D't``
through the equivalent augmented least-squares system; no sample-size scaling
is applied to ``lam`` here (the kernel module uses the ``n*lam`` convention
and documents the difference).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dataset import MultiEnvDataset, as_float_matrix, as_float_vector
from .errors import RankDeficientError, ValidationError
from .features import FeatureSpec, build_outcome_features, build_treatment_features

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class FitDiagnostics:
    """Diagnostics of one least-squares fit (one model in one environment)."""

    residual_variance: float  # RSS / (n - m), unbiased under the working model
    design_condition_estimate: float  # sigma_max / sigma_min of the design, >= 1


@dataclass(frozen=True)
class EnvironmentDiagnostics:
    env_id: str
    treatment: FitDiagnostics
    outcome: FitDiagnostics


@dataclass(frozen=True)
class MechanismEstimates:
    """Fitted mechanism parameters for every environment.

    Row ``s`` of ``omegas`` holds the treatment-model coefficients of
    environment ``s``; row ``s`` of ``gammas`` the outcome-model coefficients.
    """

    omegas: np.ndarray  # (K, z)
    gammas: np.ndarray  # (K, z')
    diagnostics: tuple[EnvironmentDiagnostics, ...]
    env_ids: tuple[str, ...]

    def __post_init__(self):
        omegas = as_float_matrix(self.omegas, "omegas")
        gammas = as_float_matrix(self.gammas, "gammas")
        if omegas.shape[0] != gammas.shape[0]:
            raise ValidationError(
                f"omegas and gammas disagree on K: {omegas.shape[0]} vs {gammas.shape[0]}"
            )
        if len(self.env_ids) != omegas.shape[0]:
            raise ValidationError("env_ids length must equal K")
        for arr, name in ((omegas, "omegas"), (gammas, "gammas")):
            arr = np.array(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))
        object.__setattr__(self, "env_ids", tuple(self.env_ids))

    @property
    def n_envs(self) -> int:
        return self.omegas.shape[0]


def _find_deficient_columns(design: np.ndarray, rank: int) -> tuple[int, ...]:
    # Pivoted QR: the pivots beyond the numerical rank form a column subset
    # dependent on the preceding ones.
    _, _, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    return tuple(sorted(int(j) for j in piv[rank:]))


def _lstsq_full_rank(design: np.ndarray, target: np.ndarray):
    """Solve min ||design b - target|| via SVD; raise on rank deficiency.

    Returns (coefficients, residual sum of squares, condition estimate).
    """
    n, m = design.shape
    rcond = max(n, m) * _EPS
    beta, _, rank, svals = np.linalg.lstsq(design, target, rcond=rcond)
    if rank < m:
        cols = _find_deficient_columns(design, rank)
        raise RankDeficientError(
            f"design matrix is rank deficient (rank {rank} < {m} columns); "
            f"dependent column subset: {list(cols)}",
            deficient_columns=cols,
        )
    resid = target - design @ beta
    cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else np.inf
    return beta, float(resid @ resid), cond


def least_squares_fit(design, target, ridge: float = 0.0) -> np.ndarray:
    """Least-squares coefficients of ``target`` on ``design``.

    Parameters
    ----------
    design : array-like, shape (n, m)
    target : array-like, shape (n,)
    ridge : float
        Penalty ``lam >= 0``. With ``lam == 0`` the design must have more rows
        than columns and full column rank; with ``lam > 0`` the ridge system
        ``(D'D + lam*I) b = D't`` is solved (no sample-size scaling of lam).

    Returns
    -------
    ndarray, shape (m,)

    Raises
    ------
    RankDeficientError
        If ``ridge == 0`` and the design is numerically rank deficient; the
        error reports a deficient column subset.
    """
    design = as_float_matrix(design, "design")
    target = as_float_vector(target, "target")
    n, m = design.shape
    if target.shape[0] != n:
        raise ValidationError(
            f"design and target disagree on sample size: {n} vs {target.shape[0]}"
        )
    if ridge < 0:
        raise ValidationError(f"ridge must be >= 0, got {ridge}")
    if ridge == 0.0:
        if n <= m:
            raise ValidationError(
                f"unpenalized fit needs n > m, got n={n}, m={m}"
            )
        beta, _, _ = _lstsq_full_rank(design, target)
        return beta
    aug_design = np.vstack([design, np.sqrt(ridge) * np.eye(m)])
    aug_target = np.concatenate([target, np.zeros(m)])
    beta, _, _, _ = np.linalg.lstsq(aug_design, aug_target, rcond=max(n + m, m) * _EPS)
    return beta


def _fit_with_diagnostics(design: np.ndarray, target: np.ndarray, ridge: float):
    n, m = design.shape
    if ridge == 0.0:
        beta, rss, cond = _lstsq_full_rank(design, target)
    else:
        beta = least_squares_fit(design, target, ridge)
        resid = target - design @ beta
        rss = float(resid @ resid)
        svals = np.linalg.svd(design, compute_uv=False)
        cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else np.inf
    return beta, FitDiagnostics(
        residual_variance=rss / (n - m) if n > m else 0.0,
        design_condition_estimate=max(cond, 1.0),
    )


def check_dimensions(dataset: MultiEnvDataset, psi_spec: FeatureSpec, phi_spec: FeatureSpec):
    """Require both feature dimensions to be below the smallest sample size."""
    z = psi_spec.output_dim(dataset.d)
    z_out = phi_spec.output_dim(dataset.d)
    n_min = dataset.min_size
    if z >= n_min or z_out >= n_min:
        raise ValidationError(
            f"feature dimensions (z={z}, z'={z_out}) must be below the smallest "
            f"environment sample size ({n_min})"
        )
    return z, z_out


def fit_mechanisms(
    dataset: MultiEnvDataset,
    psi_spec: FeatureSpec,
    phi_spec: FeatureSpec,
    ridge: float = 0.0,
) -> MechanismEstimates:
    """Fit both working models separately in every environment.

    For each environment ``s``, the treatment coefficients regress ``A_s`` on
    ``build_treatment_features(X_s)`` and the outcome coefficients regress
    ``Y_s`` on ``build_outcome_features(X_s, A_s)``.

    Raises
    ------
    ValidationError
        If a feature dimension reaches the smallest environment sample size.
    RankDeficientError
        Propagated from a singular per-environment design at ``ridge == 0``.
    """
    z, z_out = check_dimensions(dataset, psi_spec, phi_spec)
    K = dataset.n_envs
    omegas = np.empty((K, z))
    gammas = np.empty((K, z_out))
    diags = []
    for s, block in enumerate(dataset.blocks):
        psi = build_treatment_features(block.X, psi_spec)
        phi = build_outcome_features(block.X, block.A, phi_spec)
        omegas[s], d_t = _fit_with_diagnostics(psi, block.A, ridge)
        gammas[s], d_o = _fit_with_diagnostics(phi, block.Y, ridge)
        diags.append(EnvironmentDiagnostics(block.env_id, d_t, d_o))
    return MechanismEstimates(omegas, gammas, tuple(diags), dataset.env_ids)
