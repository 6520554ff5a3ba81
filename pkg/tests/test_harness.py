import dataclasses
import json

import numpy as np
import pytest

from mechindep import (
    BenchmarkError,
    CovariatePanel,
    EnvironmentBlock,
    LinearExampleConfig,
    MultiEnvDataset,
    PolynomialConfig,
    ValidationError,
    benchmark_rows_to_csv,
    experiment_config_from_dict,
    run_benchmark,
    semi_synthetic_generate,
    standardize_covariates,
)
from mechindep.harness import ExperimentConfig, repetition_seed_sequence


def simple_dataset():
    rng = np.random.default_rng(0)
    blocks = []
    for s in range(3):
        X = rng.normal(loc=float(s), scale=2.0, size=(40, 2))
        blocks.append(
            EnvironmentBlock(f"e{s}", X, rng.normal(size=40), rng.normal(size=40))
        )
    return MultiEnvDataset(tuple(blocks))


class TestStandardizeCovariates:
    def test_pooled_moments(self):
        out = standardize_covariates(simple_dataset())
        pooled = np.vstack([b.X for b in out.blocks])
        np.testing.assert_allclose(pooled.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(pooled.var(axis=0), 1.0, atol=1e-12)

    def test_treatment_and_outcome_untouched(self):
        ds = simple_dataset()
        out = standardize_covariates(ds)
        for a, b in zip(ds.blocks, out.blocks):
            np.testing.assert_array_equal(a.A, b.A)
            np.testing.assert_array_equal(a.Y, b.Y)

    def test_two_point_column(self):
        blocks = (
            EnvironmentBlock("a", [[0.0]], [0.0], [0.0]),
            EnvironmentBlock("b", [[2.0]], [0.0], [0.0]),
        )
        out = standardize_covariates(MultiEnvDataset(blocks))
        assert out.blocks[0].X[0, 0] == pytest.approx(-1.0)
        assert out.blocks[1].X[0, 0] == pytest.approx(1.0)

    def test_idempotent(self):
        once = standardize_covariates(simple_dataset())
        twice = standardize_covariates(once)
        for a, b in zip(once.blocks, twice.blocks):
            np.testing.assert_allclose(a.X, b.X, atol=1e-12)

    def test_zero_variance_column_named(self):
        blocks = (
            EnvironmentBlock("a", [[1.0, 5.0]], [0.0], [0.0]),
            EnvironmentBlock("b", [[1.0, 7.0]], [0.0], [0.0]),
        )
        with pytest.raises(ValidationError, match="0"):
            standardize_covariates(MultiEnvDataset(blocks))


def covariate_panel(n_envs=3, n=50, d=8, seed=0):
    rng = np.random.default_rng(seed)
    return CovariatePanel(
        tuple((f"e{s}", rng.normal(size=(n, d))) for s in range(n_envs))
    )


class TestSemiSyntheticGenerate:
    def test_all_observed_is_unconfounded(self):
        ds, truth = semi_synthetic_generate(
            covariate_panel(), 5, 2, 5, True, np.random.default_rng(1)
        )
        assert truth.confounded is False
        assert truth.unmeasured_columns == ()
        assert ds.d == 5

    def test_partial_observation_bookkeeping(self):
        _, truth = semi_synthetic_generate(
            covariate_panel(), 5, 2, 1, True, np.random.default_rng(2)
        )
        assert truth.confounded is True
        assert len(truth.unmeasured_columns) == 4
        assert len(truth.observed_columns) == 1
        assert set(truth.observed_columns) | set(truth.unmeasured_columns) == set(
            truth.confounder_columns
        )

    def test_unconfounded_flag_excludes_unobserved_from_equations(self):
        ds, truth = semi_synthetic_generate(
            covariate_panel(), 5, 1, 2, False, np.random.default_rng(3)
        )
        assert truth.confounded is False
        assert truth.unmeasured_columns == ()
        assert ds.d == 2

    def test_same_seed_same_subset(self):
        panel = covariate_panel()
        _, t1 = semi_synthetic_generate(panel, 5, 2, 3, True, np.random.default_rng(9))
        _, t2 = semi_synthetic_generate(panel, 5, 2, 3, True, np.random.default_rng(9))
        assert t1.confounder_columns == t2.confounder_columns

    def test_insufficient_columns_rejected(self):
        with pytest.raises(ValidationError):
            semi_synthetic_generate(
                covariate_panel(d=3), 5, 2, 2, True, np.random.default_rng(0)
            )

    def test_observed_subset_bounds(self):
        with pytest.raises(ValidationError):
            semi_synthetic_generate(
                covariate_panel(), 5, 2, 6, True, np.random.default_rng(0)
            )


def tiny_experiment(method="mint", generator="polynomial", **overrides):
    obj = {
        "schema_version": 1,
        "generator": generator,
        "generator_params": {
            "n_envs": 4,
            "n_per_env": 40,
            "n_covariates": 1,
            "degree": 1,
            "confounded": True,
        },
        "method": method,
        "method_params": {"alpha": 0.05, "resamples": 50},
        "sweep": {"axis": "n_envs", "values": [4, 6]},
        "repetitions": 3,
        "seed": 11,
    }
    obj.update(overrides)
    return experiment_config_from_dict(obj)


class TestExperimentConfig:
    def test_parses_valid_config(self):
        config = tiny_experiment()
        assert isinstance(config.generator_config, PolynomialConfig)
        assert config.sweep_values == (4, 6)

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(ValidationError, match="unknown keys"):
            tiny_experiment(extra_key=1)

    def test_unknown_generator_param_rejected(self):
        with pytest.raises(ValidationError, match="unknown keys"):
            experiment_config_from_dict(
                {
                    "schema_version": 1,
                    "generator": "polynomial",
                    "generator_params": {"n_envs": 4, "n_per_env": 10, "bogus": 1},
                    "sweep": {"axis": "n_envs", "values": [4]},
                    "repetitions": 1,
                    "seed": 0,
                }
            )

    def test_unknown_method_param_rejected(self):
        with pytest.raises(ValidationError, match="method_params"):
            tiny_experiment(method_params={"alpha": 0.05, "wat": 2})

    def test_schema_version_required(self):
        with pytest.raises(ValidationError, match="schema_version"):
            tiny_experiment(schema_version=99)

    def test_invalid_axis_for_generator_rejected(self):
        with pytest.raises(ValidationError, match="sweep axis"):
            tiny_experiment(sweep={"axis": "degree_of_freedom", "values": [1]})

    def test_varying_parameter_axis(self):
        config = experiment_config_from_dict(
            {
                "schema_version": 1,
                "generator": "linear_example",
                "generator_params": {"n_envs": 4, "n_per_env": 30, "alpha_u": 0.25,
                                     "beta_u": 0.25, "beta_au": 0.25},
                "method": "mint",
                "method_params": {"resamples": 50},
                "sweep": {"axis": "varying_parameter", "values": ["alpha0", "beta_a"]},
                "repetitions": 2,
                "seed": 3,
            }
        )
        assert isinstance(config.generator_config, LinearExampleConfig)
        rows = run_benchmark(config)
        assert [r.value for r in rows] == ["alpha0", "beta_a"]

    def test_bad_varying_parameter_value_rejected(self):
        with pytest.raises(ValidationError, match="varying-parameter"):
            experiment_config_from_dict(
                {
                    "schema_version": 1,
                    "generator": "linear_example",
                    "generator_params": {"n_envs": 4, "n_per_env": 30},
                    "sweep": {"axis": "varying_parameter", "values": ["nope"]},
                    "repetitions": 1,
                    "seed": 0,
                }
            )


class TestRunBenchmark:
    def test_single_repetition_boundary(self):
        config = tiny_experiment(repetitions=1)
        rows = run_benchmark(config)
        for row in rows:
            assert row.falsification_rate in (0.0, 1.0)
            assert row.standard_error == 0.0
            assert row.repetitions == 1

    def test_standard_error_formula(self):
        rows = run_benchmark(tiny_experiment(repetitions=5))
        for row in rows:
            expected = np.sqrt(
                row.falsification_rate * (1 - row.falsification_rate) / row.repetitions
            )
            assert row.standard_error == pytest.approx(expected, abs=1e-15)

    def test_thread_count_does_not_change_results(self):
        config = tiny_experiment(repetitions=6)
        serial = run_benchmark(config, threads=1)
        threaded = run_benchmark(config, threads=8)
        assert benchmark_rows_to_csv(serial) == benchmark_rows_to_csv(threaded)

    def test_byte_identical_csv_across_runs(self):
        config = tiny_experiment(repetitions=4)
        a = benchmark_rows_to_csv(run_benchmark(config, threads=8))
        b = benchmark_rows_to_csv(run_benchmark(config, threads=8))
        assert a.encode() == b.encode()

    def test_seed_derivation_unique_across_cells(self):
        config = tiny_experiment(repetitions=10)
        states = set()
        for i in range(len(config.sweep_values)):
            for r in range(config.repetitions):
                state = tuple(
                    repetition_seed_sequence(config.seed, i, r).generate_state(4)
                )
                assert state not in states
                states.add(state)

    def test_failure_carries_context(self):
        # degree-5 features on 10-sample environments violate the dimension
        # precondition inside the sweep
        config = tiny_experiment(
            generator_params={
                "n_envs": 4,
                "n_per_env": 10,
                "n_covariates": 1,
                "degree": 1,
            },
            method_params={"resamples": 20, "feature_degree": 12},
            sweep={"axis": "n_envs", "values": [4]},
        )
        with pytest.raises(BenchmarkError) as err:
            run_benchmark(config)
        assert err.value.repetition == 0
        assert err.value.axis_value == 4
        assert "seed" in str(err.value)

    def test_semi_synthetic_generator_with_panel(self):
        config = experiment_config_from_dict(
            {
                "schema_version": 1,
                "generator": "semi_synthetic",
                "generator_params": {
                    "covariates_csv": "unused.csv",
                    "n_confounders": 4,
                    "degree": 1,
                    "observed_subset_size": 2,
                    "confounded": True,
                },
                "method": "mint",
                "method_params": {"resamples": 30},
                "sweep": {"axis": "observed_subset_size", "values": [2, 4]},
                "repetitions": 2,
                "seed": 21,
            }
        )
        rows = run_benchmark(config, panel=covariate_panel(n_envs=4, n=60, d=6))
        assert len(rows) == 2

    def test_transportability_and_kernel_methods_run(self):
        rows = run_benchmark(
            tiny_experiment(method="transportability", method_params={"alpha": 0.05})
        )
        assert len(rows) == 2
        kernel_config = tiny_experiment(
            method="kernel_mint",
            method_params={
                "resamples": 30,
                "treatment_kernel": {"kind": "linear", "ridge_lambda": 1e-6},
                "outcome_kernel": {"kind": "linear", "ridge_lambda": 1e-6},
            },
        )
        rows = run_benchmark(kernel_config)
        assert len(rows) == 2


class TestBenchmarkCsv:
    def test_layout_and_timing_column(self):
        config = tiny_experiment(repetitions=2)
        rows = run_benchmark(config)
        text = benchmark_rows_to_csv(rows)
        lines = text.strip().split("\n")
        assert lines[0] == "axis,value,rate,se,reps,seconds"
        assert all(line.endswith(",") for line in lines[1:])  # seconds empty
        timed = benchmark_rows_to_csv(rows, include_timing=True)
        assert not any(line.endswith(",") for line in timed.strip().split("\n")[1:])
