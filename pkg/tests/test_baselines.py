import numpy as np
import pytest

from mechindep import (
    EnvironmentBlock,
    MultiEnvDataset,
    RankDeficientError,
    ValidationError,
    outcome_spec,
    partial_correlation,
    transportability_test,
)
from mechindep.baselines import FULL_INTERACTION, INTERCEPT_SHIFT


class TestPartialCorrelation:
    def test_identical_vectors(self):
        out = partial_correlation([1, 2, 3, 4], [1, 2, 3, 4])
        assert out.r == pytest.approx(1.0)
        assert out.p_value == pytest.approx(0.0, abs=1e-12)

    def test_reversed_vectors(self):
        out = partial_correlation([1, 2, 3, 4], [4, 3, 2, 1])
        assert out.r == pytest.approx(-1.0)

    def test_residualization_removes_common_cause(self):
        rng = np.random.default_rng(0)
        n = 10_000
        z = rng.normal(size=n)
        x = z + rng.normal(size=n)
        y = z + rng.normal(size=n)
        out = partial_correlation(x, y, z)
        assert abs(out.r) < 0.05
        raw = partial_correlation(x, y)
        assert raw.r > 0.3  # dependence exists before conditioning

    def test_affine_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=200)
        y = 0.4 * x + rng.normal(size=200)
        Z = rng.normal(size=(200, 2))
        base = partial_correlation(x, y, Z)
        shifted = partial_correlation(3.0 * x - 7.0, -2.0 * y + 1.0, Z)
        assert abs(shifted.r) == pytest.approx(abs(base.r), rel=1e-10)
        assert shifted.p_value == pytest.approx(base.p_value, rel=1e-8)

    def test_invariance_to_conditioning_basis_change(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=300)
        y = rng.normal(size=300)
        Z = rng.normal(size=(300, 3))
        T = np.array([[2.0, 0.1, 0.0], [0.0, 1.0, -1.0], [0.5, 0.0, 1.0]])
        base = partial_correlation(x, y, Z)
        transformed = partial_correlation(x, y, Z @ T)
        assert transformed.r == pytest.approx(base.r, abs=1e-10)

    def test_p_value_matches_t_reference(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=40)
        y = rng.normal(size=40)
        Z = rng.normal(size=(40, 2))
        out = partial_correlation(x, y, Z)
        import scipy.special

        df = 40 - 2 - 2
        t = out.r * np.sqrt(df / (1 - out.r**2))
        ref = 2.0 * float(scipy.special.stdtr(df, -abs(t)))
        assert out.p_value == pytest.approx(ref, abs=1e-12)

    def test_small_sample_rejected(self):
        with pytest.raises(ValidationError):
            partial_correlation([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], np.ones((3, 1)))

    def test_rank_deficient_conditioning_rejected(self):
        rng = np.random.default_rng(4)
        z = rng.normal(size=30)
        Z = np.column_stack([z, 2.0 * z])
        with pytest.raises(ValidationError):
            partial_correlation(rng.normal(size=30), rng.normal(size=30), Z)

    def test_zero_variance_residuals_rejected(self):
        z = np.linspace(0.0, 1.0, 30)
        x = 2.0 * z + 1.0  # exactly explained by [1, z]
        with pytest.raises(ValidationError):
            partial_correlation(x, np.random.default_rng(5).normal(size=30), z)


def linear_dataset(K, n, seed, beta_shift=None, mechanism="shared"):
    """Gaussian linear data; mechanisms shared or shifted across environments."""
    rng = np.random.default_rng(seed)
    blocks = []
    for s in range(K):
        X = rng.normal(size=n)
        A = 0.5 * X + rng.normal(size=n)
        intercept = 1.0 if mechanism == "shared" else float(rng.normal())
        Y = intercept + 0.7 * X + 0.3 * A + rng.normal(size=n)
        if beta_shift is not None:
            Y = Y + beta_shift * s * X
        blocks.append(EnvironmentBlock(f"e{s}", X[:, None], A, Y))
    return MultiEnvDataset(tuple(blocks))


class TestTransportabilityTest:
    def test_null_rate_matches_f_exactness(self):
        # Shared Gaussian linear mechanism: the partial F-test is exact, so
        # the rejection rate sits within 3 binomial SEs of alpha.
        alpha, trials = 0.05, 1000
        phi = outcome_spec(1)
        rejects = 0
        for t in range(trials):
            ds = linear_dataset(3, 30, seed=t)
            rejects += transportability_test(ds, phi, alpha=alpha).reject
        rate = rejects / trials
        band = 3.0 * np.sqrt(alpha * (1 - alpha) / trials)
        assert abs(rate - alpha) <= band

    def test_duplicated_environment_no_rejection(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=80)
        A = X + rng.normal(size=80)
        Y = 1.0 + X + A + rng.normal(size=80)
        ds = MultiEnvDataset(
            (
                EnvironmentBlock("a", X[:, None], A, Y),
                EnvironmentBlock("b", X[:, None], A, Y),
            )
        )
        res = transportability_test(ds, outcome_spec(1))
        assert res.statistic == pytest.approx(0.0, abs=1e-8)
        assert res.p_value > 0.99
        assert not res.reject

    def test_detects_intercept_shift(self):
        ds = linear_dataset(5, 200, seed=21, mechanism="per_env")
        for variant in (FULL_INTERACTION, INTERCEPT_SHIFT):
            res = transportability_test(ds, outcome_spec(1), variant=variant)
            assert res.reject, variant

    def test_environment_relabeling_invariance(self):
        ds = linear_dataset(4, 50, seed=31, mechanism="per_env")
        relabeled = MultiEnvDataset(
            tuple(
                EnvironmentBlock(f"renamed_{i}", b.X, b.A, b.Y)
                for i, b in enumerate(reversed(ds.blocks))
            )
        )
        a = transportability_test(ds, outcome_spec(1))
        b = transportability_test(relabeled, outcome_spec(1))
        assert a.statistic == pytest.approx(b.statistic, rel=1e-9)

    def test_result_contract(self):
        ds = linear_dataset(3, 60, seed=41)
        res = transportability_test(ds, outcome_spec(1), alpha=0.1)
        assert res.method == "transportability"
        assert res.resamples_M == 0
        assert res.null_samples is None
        assert res.reject == (res.statistic > res.threshold)
        # threshold is the F critical value at alpha
        from mechindep import f_survival

        K, z = 3, 3
        d1 = K * z - z
        d2 = ds.n_total - K * z
        assert f_survival(res.threshold, d1, d2) == pytest.approx(0.1, abs=1e-8)

    def test_insufficient_pooled_sample_rejected(self):
        # K=3, z'=3: full-interaction dimension 9; pooled n=9 is not > 10.
        ds = linear_dataset(3, 3, seed=51)
        with pytest.raises(ValidationError):
            transportability_test(ds, outcome_spec(1))

    def test_rank_deficiency_propagates(self):
        rng = np.random.default_rng(61)
        blocks = []
        for s in range(2):
            X = np.ones((30, 1))  # constant covariate: collinear with intercept
            A = rng.normal(size=30)
            Y = rng.normal(size=30)
            blocks.append(EnvironmentBlock(f"e{s}", X, A, Y))
        with pytest.raises(RankDeficientError):
            transportability_test(MultiEnvDataset(tuple(blocks)), outcome_spec(1))

    def test_unknown_variant_rejected(self):
        ds = linear_dataset(3, 30, seed=71)
        with pytest.raises(ValidationError):
            transportability_test(ds, outcome_spec(1), variant="nope")
