"""Implicit-feature variant of the mechanism-independence test.

Instead of explicit polynomial features, the working models are kernel ridge
regressions: dual coefficients solve ``(G + n*lambda*I) c = target`` on the
environment's Gram matrix. Parameter inner products across environments are
then available through cross-Gram matrices, ``omega_s . omega_t =
c_s' k(X_s, X_t) c_t``, which is enough to evaluate the cross-covariance
statistic via its Gram-trace form

    T = (1/K) * sqrt(tr((H Gw H) (H Gg H))),   H = I - ones/K.

Calibration is permutation-only (the treatment-side Gram is permuted); no
bootstrap analogue is defined for dual solutions, so results carry an
"experimental" warning.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .dataset import MultiEnvDataset, as_float_matrix, as_float_vector
from .errors import NumericalError, ValidationError
from .mint import (
    METHOD_KERNEL_MINT,
    SMALL_K_WARNING,
    TestResult,
    _mc_p_value,
    _random_permutations,
    calibrate_threshold,
)

MEDIAN_HEURISTIC = "median_heuristic"

EXPERIMENTAL_WARNING = (
    "kernel test calibration is permutation-only (no bootstrap refits) "
    "and is experimental"
)


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, bandwidth, and ridge strength for one working model.

    ``bandwidth`` is either a positive number or the string
    ``"median_heuristic"``, resolved against data by
    :func:`resolve_bandwidth`. The ridge convention is the kernel one: the
    dual system uses ``n * ridge_lambda`` (sample-size scaled), unlike the
    explicit-feature module.
    """

    kind: str = "rbf"  # "linear" | "rbf"
    bandwidth: float | str = MEDIAN_HEURISTIC
    ridge_lambda: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValidationError(f"unknown kernel kind {self.kind!r}")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != MEDIAN_HEURISTIC:
                raise ValidationError(f"unknown bandwidth rule {self.bandwidth!r}")
        elif not self.bandwidth > 0:
            raise ValidationError(f"bandwidth must be > 0, got {self.bandwidth}")
        if not self.ridge_lambda > 0:
            raise ValidationError(f"ridge_lambda must be > 0, got {self.ridge_lambda}")


def resolve_bandwidth(
    spec: KernelSpec, rows: np.ndarray, seed: int = 0, max_rows: int = 1000
) -> KernelSpec:
    """Replace a median-heuristic bandwidth with the median pairwise distance.

    At most ``max_rows`` rows enter the pairwise computation; a larger input
    is subsampled without replacement from a stream seeded with ``seed``, so
    the resolution is deterministic.
    """
    if spec.kind == "linear" or not isinstance(spec.bandwidth, str):
        return spec
    rows = as_float_matrix(rows, "rows")
    n = rows.shape[0]
    if n > max_rows:
        keep = np.random.default_rng(seed).choice(n, size=max_rows, replace=False)
        rows = rows[np.sort(keep)]
    sq = _squared_distances(rows, rows)
    dists = np.sqrt(np.clip(sq[np.triu_indices(rows.shape[0], k=1)], 0.0, None))
    positive = dists[dists > 0]
    bandwidth = float(np.median(positive)) if positive.size else 1.0
    return replace(spec, bandwidth=bandwidth)


def _squared_distances(Xa: np.ndarray, Xb: np.ndarray) -> np.ndarray:
    aa = np.sum(Xa * Xa, axis=1)[:, None]
    bb = np.sum(Xb * Xb, axis=1)[None, :]
    return np.clip(aa + bb - 2.0 * (Xa @ Xb.T), 0.0, None)


def gram(Xa, Xb, spec: KernelSpec) -> np.ndarray:
    """Kernel matrix with entry (i, j) = k(row i of Xa, row j of Xb).

    The linear kernel is the dot product; the RBF kernel is
    ``exp(-||u - v||^2 / (2 * bandwidth^2))`` and requires a resolved
    (numeric) bandwidth.
    """
    Xa = as_float_matrix(Xa, "Xa")
    Xb = as_float_matrix(Xb, "Xb")
    if Xa.shape[1] != Xb.shape[1]:
        raise ValidationError(
            f"row dimension mismatch: {Xa.shape[1]} vs {Xb.shape[1]}"
        )
    if spec.kind == "linear":
        return Xa @ Xb.T
    if isinstance(spec.bandwidth, str):
        raise ValidationError(
            "rbf bandwidth is unresolved; call resolve_bandwidth first"
        )
    return np.exp(-_squared_distances(Xa, Xb) / (2.0 * spec.bandwidth**2))


def kernel_dual(G, target, lam: float) -> np.ndarray:
    """Dual ridge coefficients: solve ``(G + n*lam*I) c = target``.

    ``G`` must be symmetric positive semi-definite; a failed Cholesky
    factorization is reported as a non-PSD Gram matrix.
    """
    G = as_float_matrix(G, "G")
    target = as_float_vector(target, "target")
    n = G.shape[0]
    if G.shape[1] != n:
        raise ValidationError(f"G must be square, got {G.shape}")
    if target.shape[0] != n:
        raise ValidationError(f"target length {target.shape[0]} != {n}")
    if not lam > 0:
        raise ValidationError(f"lambda must be > 0, got {lam}")
    scale = max(np.max(np.abs(G)), 1.0)
    if not np.allclose(G, G.T, atol=1e-10 * scale):
        raise ValidationError("G must be symmetric")
    system = G + (n * lam) * np.eye(n)
    try:
        factor = scipy.linalg.cho_factor(system, lower=True)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise NumericalError(f"Gram matrix is not positive semi-definite: {exc}")
    except scipy.linalg.LinAlgError as exc:
        raise NumericalError(f"Gram matrix is not positive semi-definite: {exc}")
    coeffs = scipy.linalg.cho_solve(factor, target)
    # Small lambda on a rank-deficient Gram makes this system ill conditioned;
    # fixed-precision iterative refinement restores an eps-level residual,
    # which is what downstream inner products of the duals require.
    for _ in range(3):
        residual = target - system @ coeffs
        if np.linalg.norm(residual) <= 10 * np.finfo(float).eps * np.linalg.norm(target):
            break
        coeffs = coeffs + scipy.linalg.cho_solve(factor, residual)
    return coeffs


def _stable_dual(G: np.ndarray, target: np.ndarray, lam: float) -> np.ndarray:
    """Dual coefficients with the numerical null space of G projected out.

    Directions with (numerically) zero Gram eigenvalue contribute exactly
    nothing to any parameter inner product, but at small lambda they carry a
    ``||target|| / (n * lambda)`` component whose rounding noise would later
    be amplified by the Gram contractions. Solving on the numerical range
    gives the same products with well-behaved dual norms.
    """
    n = G.shape[0]
    w, V = np.linalg.eigh(G)
    scale = max(abs(w[0]), abs(w[-1]), 1.0)
    if w[0] < -1e-10 * scale:
        raise NumericalError(
            f"Gram matrix is not positive semi-definite (min eigenvalue {w[0]:.3e})"
        )
    w = np.clip(w, 0.0, None)
    keep = w > n * np.finfo(float).eps * w[-1]
    basis = V[:, keep]
    return basis @ ((basis.T @ target) / (w[keep] + n * lam))


def _double_center(G: np.ndarray) -> np.ndarray:
    # H G H with H = I - ones/K.
    row = G.mean(axis=-1, keepdims=True)
    col = G.mean(axis=-2, keepdims=True)
    total = G.mean(axis=(-2, -1), keepdims=True)
    return G - row - col + total


def _parameter_grams(
    dataset: MultiEnvDataset, k_spec: KernelSpec, h_spec: KernelSpec
) -> tuple[np.ndarray, np.ndarray]:
    """K x K inner-product matrices of the implicit model parameters."""
    sizes = set(dataset.sizes)
    if len(sizes) > 1:
        raise ValidationError(
            f"kernel statistic requires equal environment sizes, got {dataset.sizes}"
        )
    pooled_X = np.vstack([b.X for b in dataset.blocks])
    pooled_XA = np.column_stack(
        [pooled_X, np.concatenate([b.A for b in dataset.blocks])]
    )
    k_spec = resolve_bandwidth(k_spec, pooled_X)
    h_spec = resolve_bandwidth(h_spec, pooled_XA)
    K = dataset.n_envs
    treat_inputs = [b.X for b in dataset.blocks]
    out_inputs = [np.column_stack([b.X, b.A]) for b in dataset.blocks]
    duals_c = [
        _stable_dual(gram(X, X, k_spec), b.A, k_spec.ridge_lambda)
        for X, b in zip(treat_inputs, dataset.blocks)
    ]
    duals_d = [
        _stable_dual(gram(Z, Z, h_spec), b.Y, h_spec.ridge_lambda)
        for Z, b in zip(out_inputs, dataset.blocks)
    ]
    Gw = np.empty((K, K))
    Gg = np.empty((K, K))
    for s in range(K):
        for t in range(s, K):
            cross_k = gram(treat_inputs[s], treat_inputs[t], k_spec)
            Gw[s, t] = Gw[t, s] = duals_c[s] @ cross_k @ duals_c[t]
            cross_h = gram(out_inputs[s], out_inputs[t], h_spec)
            Gg[s, t] = Gg[t, s] = duals_d[s] @ cross_h @ duals_d[t]
    return Gw, Gg


def _statistic_from_grams(Gw: np.ndarray, Gg_centered: np.ndarray) -> float:
    K = Gw.shape[-1]
    value = np.einsum("...ij,...ji->...", _double_center(Gw), Gg_centered)
    return np.sqrt(np.clip(value, 0.0, None)) / K


def kernel_statistic(
    dataset: MultiEnvDataset, k_spec: KernelSpec, h_spec: KernelSpec
) -> float:
    """Cross-covariance statistic computed entirely from Gram matrices.

    With linear kernels and vanishing ridge this equals the explicit-feature
    statistic built from least-squares coefficients on raw ``X`` and
    ``[X, A]`` designs.
    """
    if dataset.n_envs < 2:
        raise ValidationError("need at least 2 environments")
    Gw, Gg = _parameter_grams(dataset, k_spec, h_spec)
    return float(_statistic_from_grams(Gw, _double_center(Gg)))


def kernel_mint_test(
    dataset: MultiEnvDataset,
    k_spec: KernelSpec,
    h_spec: KernelSpec,
    alpha: float = 0.05,
    M: int = 1000,
    seed: int = 0,
) -> TestResult:
    """Permutation-calibrated independence test on the kernel statistic.

    The null draws permute the environment index set on the treatment side
    (simultaneous row/column permutation of its parameter Gram matrix);
    threshold and p-value follow the explicit-feature test.
    """
    if M < 1:
        raise ValidationError(f"M must be >= 1, got {M}")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    K = dataset.n_envs
    Gw, Gg = _parameter_grams(dataset, k_spec, h_spec)
    Gg_centered = _double_center(Gg)
    statistic = float(_statistic_from_grams(Gw, Gg_centered))
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    perms = _random_permutations(rng, M, K)
    permuted = Gw[perms[:, :, None], perms[:, None, :]]
    null_samples = np.asarray(_statistic_from_grams(permuted, Gg_centered))
    threshold = calibrate_threshold(null_samples, alpha)
    warnings = (EXPERIMENTAL_WARNING,) + ((SMALL_K_WARNING,) if K == 2 else ())
    return TestResult(
        statistic=statistic,
        threshold=threshold,
        p_value=_mc_p_value(statistic, null_samples),
        reject=statistic > threshold,
        alpha=alpha,
        resamples_M=M,
        seed=seed,
        method=METHOD_KERNEL_MINT,
        null_samples=null_samples,
        warnings=warnings,
    )
