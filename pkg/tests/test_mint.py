import numpy as np
import pytest

from mechindep import (
    EnvironmentBlock,
    MultiEnvDataset,
    ValidationError,
    bootstrap_refit,
    calibrate_threshold,
    fit_mechanisms,
    frobenius_statistic,
    mint_test,
    outcome_spec,
    permutation_test,
    treatment_spec,
)
from mechindep.mint import SMALL_K_WARNING


def brute_force_statistic(omegas, gammas):
    """Independent oracle: direct triple loop over the definition."""
    omegas = np.asarray(omegas, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    K = omegas.shape[0]
    om = omegas.mean(axis=0)
    gm = gammas.mean(axis=0)
    total = 0.0
    for i in range(omegas.shape[1]):
        for j in range(gammas.shape[1]):
            inner = sum(
                (omegas[s, i] - om[i]) * (gammas[s, j] - gm[j]) for s in range(K)
            )
            total += inner**2
    return np.sqrt(total) / K


class TestFrobeniusStatistic:
    def test_two_env_example(self):
        assert frobenius_statistic([[1.0], [3.0]], [[2.0], [6.0]]) == 2.0

    def test_identical_rows_give_zero(self):
        rng = np.random.default_rng(0)
        gammas = rng.normal(size=(4, 3))
        assert frobenius_statistic(np.ones((4, 2)), gammas) == 0.0

    def test_three_env_example(self):
        got = frobenius_statistic([[0.0], [1.0], [2.0]], [[2.0], [1.0], [0.0]])
        assert got == pytest.approx(2.0 / 3.0, abs=1e-15)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            K = int(rng.integers(2, 9))
            omegas = rng.normal(size=(K, int(rng.integers(1, 5))))
            gammas = rng.normal(size=(K, int(rng.integers(1, 6))))
            assert frobenius_statistic(omegas, gammas) == pytest.approx(
                brute_force_statistic(omegas, gammas), rel=1e-12
            )

    def test_simultaneous_row_reordering_invariance(self):
        rng = np.random.default_rng(2)
        omegas = rng.normal(size=(6, 3))
        gammas = rng.normal(size=(6, 4))
        perm = rng.permutation(6)
        assert frobenius_statistic(omegas[perm], gammas[perm]) == pytest.approx(
            frobenius_statistic(omegas, gammas), rel=1e-12
        )

    def test_bilinear_scaling(self):
        rng = np.random.default_rng(3)
        omegas = rng.normal(size=(5, 2))
        gammas = rng.normal(size=(5, 3))
        base = frobenius_statistic(omegas, gammas)
        for c in (-3.0, 0.5, 7.0):
            assert frobenius_statistic(c * omegas, gammas) == pytest.approx(
                abs(c) * base, rel=1e-10
            )
            assert frobenius_statistic(omegas, c * gammas) == pytest.approx(
                abs(c) * base, rel=1e-10
            )

    def test_gram_trace_bridge_identity(self):
        # (1/K) sqrt(tr((H Gw H)(H Gg H))) with Gw = omegas @ omegas.T.
        rng = np.random.default_rng(4)
        for _ in range(100):
            K = int(rng.integers(2, 21))
            omegas = rng.normal(size=(K, int(rng.integers(1, 7))))
            gammas = rng.normal(size=(K, int(rng.integers(1, 7))))
            H = np.eye(K) - np.ones((K, K)) / K
            gw = H @ (omegas @ omegas.T) @ H
            gg = H @ (gammas @ gammas.T) @ H
            bridge = np.sqrt(max(np.trace(gw @ gg), 0.0)) / K
            assert frobenius_statistic(omegas, gammas) == pytest.approx(
                bridge, abs=1e-10, rel=1e-10
            )

    def test_single_environment_rejected(self):
        with pytest.raises(ValidationError):
            frobenius_statistic([[1.0]], [[1.0]])

    def test_row_count_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            frobenius_statistic([[1.0], [2.0]], [[1.0], [2.0], [3.0]])


class TestCalibrateThreshold:
    def test_decile_example(self):
        samples = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        assert calibrate_threshold(samples, 0.2) == pytest.approx(0.8)

    def test_degenerate_samples(self):
        assert calibrate_threshold([3.5] * 7, 0.05) == 3.5
        assert calibrate_threshold([3.5] * 7, 0.9) == 3.5

    def test_extreme_alpha_takes_max(self):
        samples = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
        assert calibrate_threshold(samples, 0.05) == pytest.approx(1.0)

    def test_definition_holds_on_random_samples(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            samples = rng.normal(size=int(rng.integers(1, 200))) ** 2
            alpha = float(rng.uniform(0.01, 0.5))
            t = calibrate_threshold(samples, alpha)
            M = samples.shape[0]
            assert np.count_nonzero(samples > t) <= alpha * M + 1e-9
            # smallest such observed value: anything strictly below t fails
            below = samples[samples < t]
            if below.size:
                t_prev = below.max()
                assert np.count_nonzero(samples > t_prev) > alpha * M

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            calibrate_threshold([], 0.05)


def make_dataset(K=4, n=60, seed=0, confounded=False):
    from mechindep import PolynomialConfig, generate_polynomial

    config = PolynomialConfig(K, n, 1, 1, confounded=confounded)
    return generate_polynomial(config, np.random.default_rng(seed))[0]


class TestBootstrapRefit:
    def test_deterministic_given_stream(self):
        ds = make_dataset()
        psi, phi = treatment_spec(1), outcome_spec(1)
        a = bootstrap_refit(ds, psi, phi, rng=np.random.default_rng(99))
        b = bootstrap_refit(ds, psi, phi, rng=np.random.default_rng(99))
        np.testing.assert_array_equal(a.omegas, b.omegas)
        np.testing.assert_array_equal(a.gammas, b.gammas)

    def test_exact_interpolation_is_resampling_invariant(self):
        # Noiseless mechanisms: every full-rank resample refit reproduces the
        # full-data coefficients exactly.
        rng = np.random.default_rng(7)
        blocks = []
        for s in range(3):
            X = rng.normal(size=50)
            A = 1.0 + 2.0 * X + rng.normal(size=50)
            Y = 3.0 + X + 2.0 * A
            blocks.append(EnvironmentBlock(f"e{s}", X[:, None], A, Y))
        ds = MultiEnvDataset(tuple(blocks))
        psi, phi = treatment_spec(1), outcome_spec(1)
        full = fit_mechanisms(ds, psi, phi)
        for seed in range(5):
            boot = bootstrap_refit(ds, psi, phi, rng=np.random.default_rng(seed))
            np.testing.assert_allclose(boot.gammas, full.gammas, atol=1e-8)

    def test_single_row_environments_fail_precondition(self):
        rng = np.random.default_rng(8)
        blocks = tuple(
            EnvironmentBlock(f"e{s}", rng.normal(size=(1, 1)), rng.normal(size=1), rng.normal(size=1))
            for s in range(3)
        )
        ds = MultiEnvDataset(blocks)
        with pytest.raises(ValidationError):
            bootstrap_refit(ds, treatment_spec(1), outcome_spec(1), rng=np.random.default_rng(0))

    def test_duplicate_heavy_resample_survives_via_jitter(self):
        # Three-row environments make rank-deficient resamples likely (all
        # draws hitting one row); the trace-scaled jitter must absorb them.
        rng = np.random.default_rng(9)
        blocks = tuple(
            EnvironmentBlock(
                f"e{s}", rng.normal(size=(3, 1)), rng.normal(size=3), rng.normal(size=3)
            )
            for s in range(4)
        )
        ds = MultiEnvDataset(blocks)
        psi = treatment_spec(1, include_intercept=False)
        phi = outcome_spec(1, include_intercept=False)
        for seed in range(20):
            est = bootstrap_refit(ds, psi, phi, rng=np.random.default_rng(seed))
            assert np.all(np.isfinite(est.omegas))
            assert np.all(np.isfinite(est.gammas))


class TestMintTest:
    def test_bit_identical_given_seed(self):
        ds = make_dataset(confounded=True)
        psi, phi = treatment_spec(1), outcome_spec(1)
        a = mint_test(ds, psi, phi, M=200, seed=31)
        b = mint_test(ds, psi, phi, M=200, seed=31)
        assert a.statistic == b.statistic
        assert a.threshold == b.threshold
        assert a.p_value == b.p_value
        np.testing.assert_array_equal(a.null_samples, b.null_samples)

    def test_provenance_fields(self):
        ds = make_dataset()
        res = mint_test(ds, treatment_spec(1), outcome_spec(1), alpha=0.1, M=150, seed=5)
        assert res.method == "mint"
        assert res.alpha == 0.1
        assert res.resamples_M == 150
        assert res.seed == 5
        assert res.null_samples.shape == (150,)
        assert res.reject == (res.statistic > res.threshold)
        expected_p = (1 + np.count_nonzero(res.null_samples >= res.statistic)) / 151
        assert res.p_value == pytest.approx(expected_p, abs=1e-15)

    def test_no_bootstrap_method_label(self):
        ds = make_dataset()
        res = mint_test(ds, treatment_spec(1), outcome_spec(1), M=100, seed=1, use_bootstrap=False)
        assert res.method == "mint_no_bootstrap"

    def test_constant_mechanisms_never_reject(self):
        # Identical noiseless mechanisms across environments: T = 0 can
        # never exceed a non-negative threshold under the strict rule.
        rng = np.random.default_rng(10)
        X = rng.normal(size=50)
        A = 1.0 + 2.0 * X + rng.normal(size=50)
        Y = 3.0 + X + 2.0 * A
        blocks = tuple(
            EnvironmentBlock(f"e{s}", X[:, None], A, Y) for s in range(3)
        )
        ds = MultiEnvDataset(blocks)
        res = mint_test(ds, treatment_spec(1), outcome_spec(1), M=100, seed=2)
        assert res.statistic == pytest.approx(0.0, abs=1e-10)
        assert not res.reject

    def test_k2_attaches_warning(self):
        ds = make_dataset(K=2)
        res = mint_test(ds, treatment_spec(1), outcome_spec(1), M=50, seed=3)
        assert SMALL_K_WARNING in res.warnings
        res5 = mint_test(make_dataset(K=5), treatment_spec(1), outcome_spec(1), M=50, seed=3)
        assert res5.warnings == ()


class TestPermutationCalibration:
    def test_type_one_error_near_alpha_on_direct_draws(self):
        # Parameters drawn i.i.d. from independent distributions, no
        # estimation step: rejection rate within 3 binomial SEs of alpha.
        alpha, trials, M, K = 0.05, 1000, 200, 8
        rng = np.random.default_rng(123)
        rejects = 0
        for t in range(trials):
            omegas = rng.normal(size=(K, 2))
            gammas = rng.normal(size=(K, 3))
            res = permutation_test(omegas, gammas, alpha=alpha, M=M, seed=t)
            rejects += res.reject
        rate = rejects / trials
        band = 3.0 * np.sqrt(alpha * (1 - alpha) / trials)
        assert abs(rate - alpha) <= band
