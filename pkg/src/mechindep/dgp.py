"""Synthetic data generators and analytical oracles.

Two generators are provided. The linear-example generator produces a single
covariate, a treatment that is linear in the covariate and in an unmeasured
Gaussian variable ``U``, and an outcome with main and interaction effects of
the treatment plus confounding through ``U``; any named parameter can be
redrawn uniformly per environment. The polynomial generator produces
``d``-dimensional Gaussian covariates with per-environment means, treatment
and outcome that are linear in a per-coordinate polynomial basis, and an
optional additive unmeasured confounder.

For the linear example the population regression coefficients of the
well-specified working models are available in closed form (confounded case
and both unconfounded special cases), which gives an exact oracle for the
estimation stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import EnvironmentBlock, MultiEnvDataset
from .errors import ValidationError
from .features import build_treatment_features, treatment_spec

# Parameter names that may be redrawn per environment in the linear example,
# per the uniform-overrule convention (range [0.1, 3.0] by default).
VARYING_PARAMETER_NAMES = (
    "alpha0",
    "alpha_x",
    "alpha_u",
    "beta0",
    "beta_x",
    "beta_a",
    "beta_ax",
    "beta_u",
    "beta_au",
    "mu_x",
    "mu_u",
)


@dataclass(frozen=True)
class GroundTruth:
    """Labels that travel with a generated dataset so experiment harnesses can
    score falsification rates without re-deriving the truth."""

    confounded: bool
    varied: frozenset[str]
    env_params: tuple[dict, ...] = ()


@dataclass(frozen=True)
class LinearExampleConfig:
    """Full parameterization of the linear-example generator.

    Defaults reproduce the reference setting: treatment coefficients
    ``[1/2, 1/3]``, outcome coefficients ``[1/2, 1/3, 1/2, 1/3]``, unit-mean
    unit-variance covariate and confounder, noise variances ``1/8``. The
    confounder path coefficients (``alpha_u``, ``beta_u``, ``beta_au``) are
    ``1/4`` when confounding is on and 0 otherwise; use :meth:`confounded`.

    Every name in ``varying`` is redrawn per environment, uniformly from
    ``varying_range``.
    """

    n_envs: int
    n_per_env: int
    alpha0: float = 0.5
    alpha_x: float = 1.0 / 3.0
    beta0: float = 0.5
    beta_x: float = 1.0 / 3.0
    beta_a: float = 0.5
    beta_ax: float = 1.0 / 3.0
    alpha_u: float = 0.0
    beta_u: float = 0.0
    beta_au: float = 0.0
    mu_x: float = 1.0
    mu_u: float = 1.0
    sigma_x: float = 1.0
    sigma_u: float = 1.0
    noise_var_a: float = 0.125
    noise_var_y: float = 0.125
    varying: frozenset[str] = field(default_factory=frozenset)
    varying_range: tuple[float, float] = (0.1, 3.0)

    def __post_init__(self):
        if self.n_envs < 2:
            raise ValidationError(f"need at least 2 environments, got {self.n_envs}")
        if self.n_per_env < 1:
            raise ValidationError(f"need at least 1 sample, got {self.n_per_env}")
        for name in ("sigma_x", "sigma_u", "noise_var_a", "noise_var_y"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0")
        varying = frozenset(self.varying)
        unknown = varying - set(VARYING_PARAMETER_NAMES)
        if unknown:
            raise ValidationError(
                f"unknown varying parameter names: {sorted(unknown)}; "
                f"allowed: {list(VARYING_PARAMETER_NAMES)}"
            )
        lo, hi = self.varying_range
        if not lo < hi:
            raise ValidationError(f"varying_range must be increasing, got {self.varying_range}")
        object.__setattr__(self, "varying", varying)
        object.__setattr__(self, "varying_range", (float(lo), float(hi)))

    def confounded(self, strength: float = 0.25) -> "LinearExampleConfig":
        """Copy with the confounder path switched on."""
        return replace(self, alpha_u=strength, beta_u=strength, beta_au=strength)


def _is_confounded(params: dict) -> bool:
    return params["alpha_u"] != 0.0 and (
        params["beta_u"] != 0.0 or params["beta_au"] != 0.0
    )


def generate_linear_example(
    config: LinearExampleConfig, rng: np.random.Generator
) -> tuple[MultiEnvDataset, GroundTruth]:
    """Draw a multi-environment dataset from the linear-example process.

    Per environment, the varied parameters are redrawn first (in sorted name
    order), then the covariate, the unmeasured variable, and the two noise
    vectors, in that order, so output is reproducible from the stream state.
    """
    base = {name: getattr(config, name) for name in VARYING_PARAMETER_NAMES}
    lo, hi = config.varying_range
    blocks = []
    env_params = []
    for s in range(config.n_envs):
        params = dict(base)
        for name in sorted(config.varying):
            params[name] = float(rng.uniform(lo, hi))
        n = config.n_per_env
        X = rng.normal(params["mu_x"], config.sigma_x, size=n)
        U = rng.normal(params["mu_u"], config.sigma_u, size=n)
        eps_a = rng.normal(0.0, math.sqrt(config.noise_var_a), size=n)
        eps_y = rng.normal(0.0, math.sqrt(config.noise_var_y), size=n)
        A = params["alpha0"] + params["alpha_x"] * X + params["alpha_u"] * U + eps_a
        Y = (
            params["beta0"]
            + params["beta_x"] * X
            + params["beta_a"] * A
            + params["beta_ax"] * A * X
            + (params["beta_u"] + A * params["beta_au"]) * U
            + eps_y
        )
        blocks.append(EnvironmentBlock(f"env{s}", X[:, None], A, Y))
        env_params.append(params)
    truth = GroundTruth(
        confounded=all(_is_confounded(p) for p in env_params),
        varied=config.varying,
        env_params=tuple(env_params),
    )
    return MultiEnvDataset(tuple(blocks)), truth


@dataclass(frozen=True)
class PolynomialConfig:
    """Parameterization of the polynomial-basis generator.

    Covariates are Gaussian with a per-environment mean (prior variance 1/4
    per coordinate) and a fixed covariance with diagonal 2 and off-diagonal
    0.1, scaled by ``1/sqrt(d)``. Treatment slopes are drawn once, uniformly
    from {-1, +1}; outcome slopes (including the treatment coefficient) are
    1. Intercepts are standard normal and redrawn per environment; redrawing
    the outcome intercept (which breaks transportability) can be switched off
    with ``resample_beta_intercept=False``, fixing it at 1. The optional
    confounder is Gaussian with variance 2 around a per-environment standard
    normal mean and is added to the treatment before the outcome is generated
    from the observed treatment, then added to the outcome.
    """

    n_envs: int
    n_per_env: int
    n_covariates: int = 1
    degree: int = 1
    confounded: bool = False
    resample_beta_intercept: bool = True
    covariate_diag: float = 2.0
    covariate_offdiag: float = 0.1
    env_mean_prior_var: float = 0.25
    noise_std: float = 0.5
    confounder_var: float = 2.0
    confounder_mean_prior_var: float = 1.0

    def __post_init__(self):
        if self.n_envs < 2:
            raise ValidationError(f"need at least 2 environments, got {self.n_envs}")
        if self.n_per_env < 1:
            raise ValidationError(f"need at least 1 sample, got {self.n_per_env}")
        if self.n_covariates < 1:
            raise ValidationError(f"need d >= 1, got {self.n_covariates}")
        if self.degree < 1:
            raise ValidationError(f"need degree >= 1, got {self.degree}")
        for name in ("covariate_diag", "env_mean_prior_var", "noise_std",
                     "confounder_var", "confounder_mean_prior_var"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0")


def _covariate_cholesky(config: PolynomialConfig) -> np.ndarray:
    d = config.n_covariates
    cov = np.full((d, d), config.covariate_offdiag)
    np.fill_diagonal(cov, config.covariate_diag)
    return np.linalg.cholesky(cov / math.sqrt(d))


def generate_polynomial(
    config: PolynomialConfig, rng: np.random.Generator
) -> tuple[MultiEnvDataset, GroundTruth]:
    """Draw a multi-environment dataset from the polynomial-basis process.

    Draw order: treatment slopes once; then per environment the treatment
    intercept, the outcome intercept (when resampled), the covariate mean,
    the covariates, treatment noise, the confounder mean and draws (when
    confounded), and outcome noise.
    """
    d, p, n = config.n_covariates, config.degree, config.n_per_env
    slope_alpha = rng.choice(np.array([-1.0, 1.0]), size=d * p)
    slope_beta = np.ones(d * p)
    chol = _covariate_cholesky(config)
    power_spec = treatment_spec(degree=p, include_intercept=False)
    mean_std = math.sqrt(config.env_mean_prior_var)
    blocks = []
    env_params = []
    for s in range(config.n_envs):
        alpha0 = float(rng.normal(0.0, 1.0))
        beta0 = float(rng.normal(0.0, 1.0)) if config.resample_beta_intercept else 1.0
        mu_x = rng.normal(0.0, mean_std, size=d)
        X = mu_x + rng.standard_normal((n, d)) @ chol.T
        powers = build_treatment_features(X, power_spec)
        A = alpha0 + powers @ slope_alpha + rng.normal(0.0, config.noise_std, size=n)
        record = {"alpha0": alpha0, "beta0": beta0}
        if config.confounded:
            mu_u = float(rng.normal(0.0, 1.0))
            U = rng.normal(mu_u, math.sqrt(config.confounder_var), size=n)
            A = A + U
            record["mu_u"] = mu_u
        Y = beta0 + powers @ slope_beta + A + rng.normal(0.0, config.noise_std, size=n)
        if config.confounded:
            Y = Y + U
        blocks.append(EnvironmentBlock(f"env{s}", X, A, Y))
        env_params.append(record)
    varied = {"alpha0", "mu_x"}
    if config.resample_beta_intercept:
        varied.add("beta0")
    if config.confounded:
        varied.add("mu_u")
    truth = GroundTruth(
        confounded=config.confounded,
        varied=frozenset(varied),
        env_params=tuple(env_params),
    )
    return MultiEnvDataset(tuple(blocks)), truth


@dataclass(frozen=True)
class OracleParams:
    """Per-environment parameters entering the closed-form oracles."""

    alpha0: float
    alpha_x: float
    alpha_u: float
    mu_u: float
    sigma_u: float
    sigma_a: float  # treatment noise standard deviation
    beta: tuple[float, float, float, float]  # (beta0, beta_x, beta_a, beta_ax)
    beta_u: float
    beta_au: float

    def __post_init__(self):
        if self.sigma_u <= 0 or self.sigma_a <= 0:
            raise ValidationError("sigma_u and sigma_a must be > 0")
        if len(self.beta) != 4:
            raise ValidationError(f"beta must have 4 entries, got {len(self.beta)}")
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))


def oracle_params_from_env(config: LinearExampleConfig, params: dict) -> OracleParams:
    """Build oracle parameters from one environment's drawn parameter dict."""
    return OracleParams(
        alpha0=params["alpha0"],
        alpha_x=params["alpha_x"],
        alpha_u=params["alpha_u"],
        mu_u=params["mu_u"],
        sigma_u=config.sigma_u,
        sigma_a=math.sqrt(config.noise_var_a),
        beta=(params["beta0"], params["beta_x"], params["beta_a"], params["beta_ax"]),
        beta_u=params["beta_u"],
        beta_au=params["beta_au"],
    )


def lemma1_closed_form(params: OracleParams) -> tuple[np.ndarray, np.ndarray]:
    """Population working-model coefficients under the confounded linear example.

    Returns ``(omega, gamma)`` for the treatment model on ``[1, X]`` and the
    outcome model on ``[1, X, A, AX, A^2]``. Requires ``alpha_u != 0``; with
    ``alpha_u == 0`` use :func:`special_case_closed_form`.
    """
    if params.alpha_u == 0.0:
        raise ValidationError(
            "alpha_u must be nonzero here; use special_case_closed_form "
            "for the alpha_u == 0 branch"
        )
    a0, ax, au = params.alpha0, params.alpha_x, params.alpha_u
    su2 = params.sigma_u**2
    ratio2 = (params.sigma_a / au) ** 2
    delta = 1.0 / (su2 + ratio2)
    shared = a0 * su2 / au - params.mu_u * ratio2
    correction = delta * np.array(
        [
            -params.beta_u * shared,
            -params.beta_u * ax * su2 / au,
            params.beta_u * su2 / au - params.beta_au * shared,
            -params.beta_au * ax * su2 / au,
            params.beta_au * su2 / au,
        ]
    )
    omega = np.array([a0 + au * params.mu_u, ax])
    gamma = np.array([*params.beta, 0.0]) + correction
    return omega, gamma


ALPHA_U_ZERO = "alphaU_zero"
BETA_U_BETA_AU_ZERO = "betaU_betaAU_zero"


def special_case_closed_form(
    params: OracleParams, case: str
) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form working-model coefficients for the unconfounded branches.

    ``alphaU_zero``: the unmeasured variable does not enter the treatment;
    its mean shifts the outcome intercept and treatment main effect.
    ``betaU_betaAU_zero``: the unmeasured variable does not enter the
    outcome; its mean shifts the treatment intercept only.
    """
    if case == ALPHA_U_ZERO:
        if params.alpha_u != 0.0:
            raise ValidationError(f"case {case!r} requires alpha_u == 0")
        omega = np.array([params.alpha0, params.alpha_x])
        b0, bx, ba, bax = params.beta
        gamma = np.array(
            [
                b0 + params.beta_u * params.mu_u,
                bx,
                ba + params.beta_au * params.mu_u,
                bax,
                0.0,
            ]
        )
        return omega, gamma
    if case == BETA_U_BETA_AU_ZERO:
        if params.beta_u != 0.0 or params.beta_au != 0.0:
            raise ValidationError(f"case {case!r} requires beta_u == beta_au == 0")
        omega = np.array(
            [params.alpha0 + params.alpha_u * params.mu_u, params.alpha_x]
        )
        gamma = np.array([*params.beta, 0.0])
        return omega, gamma
    raise ValidationError(f"unknown special case {case!r}")
