"""Command-line interface.

Subcommands:

* ``simulate``  - emit a dataset CSV from a generator config JSON
* ``test``      - run one falsification method on a dataset CSV
* ``benchmark`` - run a falsification-rate sweep from an experiment config JSON
* ``semisynth`` - build a semi-synthetic dataset CSV from a covariate CSV

Exit codes: 0 success, 1 validation/configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .baselines import FULL_INTERACTION, INTERCEPT_SHIFT, transportability_test
from .errors import BenchmarkError, NumericalError, ValidationError
from .features import outcome_spec, treatment_spec
from .harness import (
    benchmark_rows_to_csv,
    experiment_config_from_dict,
    run_benchmark,
    semi_synthetic_generate,
)
from .io import (
    SCHEMA_VERSION,
    dumps_json,
    generator_config_from_dict,
    load_covariate_panel,
    load_csv_dataset,
    load_json_config,
    require_schema_version,
    save_csv_dataset,
    test_result_to_dict,
)
from .kernel import KernelSpec, kernel_mint_test
from .mint import METHOD_KERNEL_MINT, METHOD_MINT, METHOD_TRANSPORTABILITY, mint_test


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="root random seed")
    parser.add_argument("--alpha", type=float, default=0.05, help="significance level")
    parser.add_argument(
        "--resamples", type=int, default=1000, help="Monte Carlo resamples M"
    )
    parser.add_argument(
        "--method",
        choices=["mint", "transportability", "kernel_mint"],
        default="mint",
        help="falsification method",
    )
    parser.add_argument(
        "--no-bootstrap",
        action="store_true",
        help="calibrate by permutation only (skip bootstrap refits)",
    )
    parser.add_argument("--output", type=Path, default=None, help="output file path")
    parser.add_argument(
        "--threads", type=int, default=1, help="parallel repetitions (benchmark)"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mechindep",
        description=(
            "Falsify no-unmeasured-confounding on multi-environment data by "
            "testing independence of fitted mechanism parameters."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="emit a dataset CSV from a generator config")
    p_sim.add_argument("--config", type=Path, required=True, help="generator config JSON")
    _common_flags(p_sim)

    p_test = sub.add_parser("test", help="run one method on a dataset CSV")
    p_test.add_argument("--input", type=Path, required=True, help="dataset CSV")
    p_test.add_argument(
        "--feature-degree", type=int, default=1, help="polynomial degree of both models"
    )
    p_test.add_argument(
        "--interactions",
        action="store_true",
        help="add treatment-covariate interaction columns to the outcome model",
    )
    p_test.add_argument(
        "--square",
        action="store_true",
        help="add a squared-treatment column to the outcome model",
    )
    p_test.add_argument(
        "--variant",
        choices=[FULL_INTERACTION, INTERCEPT_SHIFT],
        default=FULL_INTERACTION,
        help="transportability test variant",
    )
    p_test.add_argument(
        "--kernel-kind", choices=["linear", "rbf"], default="rbf", help="kernel family"
    )
    p_test.add_argument(
        "--kernel-bandwidth",
        default="median_heuristic",
        help="rbf bandwidth (number or 'median_heuristic')",
    )
    p_test.add_argument(
        "--kernel-lambda", type=float, default=1e-3, help="kernel ridge strength"
    )
    _common_flags(p_test)

    p_bench = sub.add_parser("benchmark", help="run an experiment config sweep")
    p_bench.add_argument("--config", type=Path, required=True, help="experiment config JSON")
    p_bench.add_argument(
        "--timing",
        action="store_true",
        help="fill the seconds column (breaks byte-for-byte reproducibility)",
    )
    _common_flags(p_bench)

    p_semi = sub.add_parser(
        "semisynth", help="build a semi-synthetic dataset from a covariate CSV"
    )
    p_semi.add_argument("--covariates", type=Path, required=True, help="covariate CSV")
    p_semi.add_argument("--env-column", default="env", help="environment column name")
    p_semi.add_argument("--n-confounders", type=int, default=5)
    p_semi.add_argument(
        "--observed", type=int, default=None, help="measured covariates (default: all)"
    )
    p_semi.add_argument("--degree", type=int, default=2, help="polynomial degree")
    p_semi.add_argument(
        "--confounded",
        action="store_true",
        help="leave unexposed confounders in the generating equations",
    )
    _common_flags(p_semi)

    return parser


def _write_or_print(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")


def _cmd_simulate(args) -> None:
    obj = load_json_config(args.config)
    require_schema_version(obj, str(args.config))
    allowed = {"schema_version", "generator", "generator_params"}
    unknown = set(obj) - allowed
    if unknown:
        raise ValidationError(
            f"{args.config}: unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}"
        )
    if "generator" not in obj:
        raise ValidationError(f"{args.config}: missing key 'generator'")
    kind = obj["generator"]
    if kind == "semi_synthetic":
        raise ValidationError("use the semisynth subcommand for semi-synthetic data")
    config = generator_config_from_dict(kind, obj.get("generator_params", {}))
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    if kind == "linear_example":
        from .dgp import generate_linear_example

        dataset, _ = generate_linear_example(config, rng)
    else:
        from .dgp import generate_polynomial

        dataset, _ = generate_polynomial(config, rng)
    if args.output is None:
        raise ValidationError("simulate requires --output for the dataset CSV")
    save_csv_dataset(dataset, args.output)


def _cmd_test(args) -> None:
    dataset = load_csv_dataset(args.input)
    method = args.method
    if method == METHOD_MINT:
        psi = treatment_spec(degree=args.feature_degree)
        phi = outcome_spec(
            degree=args.feature_degree,
            interactions=args.interactions,
            square=args.square,
        )
        result = mint_test(
            dataset,
            psi,
            phi,
            alpha=args.alpha,
            M=args.resamples,
            seed=args.seed,
            use_bootstrap=not args.no_bootstrap,
        )
    elif method == METHOD_TRANSPORTABILITY:
        phi = outcome_spec(
            degree=args.feature_degree,
            interactions=args.interactions,
            square=args.square,
        )
        result = transportability_test(
            dataset, phi, variant=args.variant, alpha=args.alpha
        )
    elif method == METHOD_KERNEL_MINT:
        bandwidth = args.kernel_bandwidth
        if bandwidth != "median_heuristic":
            bandwidth = float(bandwidth)
        spec = KernelSpec(
            kind=args.kernel_kind,
            bandwidth=bandwidth,
            ridge_lambda=args.kernel_lambda,
        )
        result = kernel_mint_test(
            dataset, spec, spec, alpha=args.alpha, M=args.resamples, seed=args.seed
        )
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError(f"unknown method {method!r}")
    _write_or_print(dumps_json(test_result_to_dict(result)), args.output)


def _cmd_benchmark(args) -> None:
    obj = load_json_config(args.config)
    config = experiment_config_from_dict(obj)
    rows = run_benchmark(config, threads=args.threads)
    _write_or_print(benchmark_rows_to_csv(rows, include_timing=args.timing), args.output)


def _cmd_semisynth(args) -> None:
    panel = load_covariate_panel(args.covariates, env_column=args.env_column)
    observed = args.observed if args.observed is not None else args.n_confounders
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    dataset, truth = semi_synthetic_generate(
        panel,
        n_confounders=args.n_confounders,
        degree=args.degree,
        observed_subset_size=observed,
        confounded=args.confounded,
        rng=rng,
    )
    if args.output is None:
        raise ValidationError("semisynth requires --output for the dataset CSV")
    save_csv_dataset(dataset, args.output)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "confounded": truth.confounded,
        "confounder_columns": list(truth.confounder_columns),
        "observed_columns": list(truth.observed_columns),
        "unmeasured_columns": list(truth.unmeasured_columns),
    }
    sys.stdout.write(dumps_json(summary))


_COMMANDS = {
    "simulate": _cmd_simulate,
    "test": _cmd_test,
    "benchmark": _cmd_benchmark,
    "semisynth": _cmd_semisynth,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except BenchmarkError as exc:
        cause = exc.__cause__
        sys.stderr.write(f"error: {exc}\n")
        return 1 if isinstance(cause, ValidationError) else 2
    except (ValidationError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
