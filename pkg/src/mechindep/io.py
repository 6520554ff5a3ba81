"""File formats: dataset CSV, covariate CSV, result JSON, config JSON.

Dataset CSV layout: a header row, an environment column (string), treatment
and outcome columns, and covariate columns, all decimal with '.' separator.
Floats are written with 17 significant digits, which round-trips IEEE
doubles exactly. Config and result JSON carry an explicit ``schema_version``;
unknown keys are errors.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import CovariatePanel, EnvironmentBlock, MultiEnvDataset
from .dgp import LinearExampleConfig, PolynomialConfig
from .errors import ValidationError
from .mint import TestResult

SCHEMA_VERSION = 1


def format_float(value: float) -> str:
    """Decimal text with 17 significant digits (exact double round-trip)."""
    return format(float(value), ".17g")


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping of a dataset CSV.

    ``covariate_columns=None`` takes every header column not otherwise
    claimed, in file order.
    """

    env_column: str = "env"
    treatment_column: str = "a"
    outcome_column: str = "y"
    covariate_columns: tuple[str, ...] | None = None


def _parse_cell(raw: str, row_index: int, column: str) -> float:
    text = raw.strip()
    if not text:
        raise ValidationError(
            f"row {row_index}, column {column!r}: missing value"
        )
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(
            f"row {row_index}, column {column!r}: not a number: {raw!r}"
        ) from None
    if not np.isfinite(value):
        raise ValidationError(
            f"row {row_index}, column {column!r}: non-finite value {raw!r}"
        )
    return value


def _read_rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header]
        rows = []
        for i, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ValidationError(
                    f"row {i}: expected {len(header)} cells, got {len(row)}"
                )
            rows.append(row)
    return header, rows


def _column_indices(header, names, path):
    indices = {}
    for name in names:
        if name not in header:
            raise ValidationError(f"{path}: column {name!r} not found in header")
        indices[name] = header.index(name)
    return indices


def load_csv_dataset(path, schema: CsvSchema = CsvSchema()) -> MultiEnvDataset:
    """Read a dataset CSV, grouping rows by the environment column.

    Row order within an environment follows file order; environment order
    follows first appearance. Any missing or non-numeric cell aborts with a
    row/column location.
    """
    header, rows = _read_rows(path)
    fixed = [schema.env_column, schema.treatment_column, schema.outcome_column]
    idx = _column_indices(header, fixed, path)
    if schema.covariate_columns is None:
        covariates = [h for h in header if h not in fixed]
    else:
        covariates = list(schema.covariate_columns)
        _column_indices(header, covariates, path)
    if not covariates:
        raise ValidationError(f"{path}: no covariate columns")
    cov_idx = [header.index(c) for c in covariates]
    groups: dict[str, dict[str, list]] = {}
    order: list[str] = []
    for i, row in enumerate(rows, start=1):
        env = row[idx[schema.env_column]].strip()
        if not env:
            raise ValidationError(f"row {i}: missing environment label")
        if env not in groups:
            groups[env] = {"a": [], "y": [], "x": []}
            order.append(env)
        groups[env]["a"].append(_parse_cell(row[idx[schema.treatment_column]], i, schema.treatment_column))
        groups[env]["y"].append(_parse_cell(row[idx[schema.outcome_column]], i, schema.outcome_column))
        groups[env]["x"].append(
            [_parse_cell(row[j], i, header[j]) for j in cov_idx]
        )
    if len(order) < 2:
        raise ValidationError(
            f"{path}: found {len(order)} environment(s), need at least 2"
        )
    blocks = tuple(
        EnvironmentBlock(
            env,
            np.asarray(groups[env]["x"], dtype=float),
            np.asarray(groups[env]["a"], dtype=float),
            np.asarray(groups[env]["y"], dtype=float),
        )
        for env in order
    )
    return MultiEnvDataset(blocks)


def save_csv_dataset(dataset: MultiEnvDataset, path) -> None:
    """Write a dataset to CSV in the documented layout (env, a, y, x1..xd)."""
    d = dataset.d
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["env", "a", "y"] + [f"x{j + 1}" for j in range(d)])
        for block in dataset.blocks:
            for i in range(block.n):
                writer.writerow(
                    [block.env_id, format_float(block.A[i]), format_float(block.Y[i])]
                    + [format_float(v) for v in block.X[i]]
                )


def load_covariate_panel(
    path, env_column: str = "env", covariate_columns: tuple[str, ...] | None = None
) -> CovariatePanel:
    """Read a covariate-only CSV (environment column plus numeric columns)."""
    header, rows = _read_rows(path)
    _column_indices(header, [env_column], path)
    if covariate_columns is None:
        covariates = [h for h in header if h != env_column]
    else:
        covariates = list(covariate_columns)
        _column_indices(header, covariates, path)
    if not covariates:
        raise ValidationError(f"{path}: no covariate columns")
    env_idx = header.index(env_column)
    cov_idx = [header.index(c) for c in covariates]
    groups: dict[str, list] = {}
    order: list[str] = []
    for i, row in enumerate(rows, start=1):
        env = row[env_idx].strip()
        if not env:
            raise ValidationError(f"row {i}: missing environment label")
        if env not in groups:
            groups[env] = []
            order.append(env)
        groups[env].append([_parse_cell(row[j], i, header[j]) for j in cov_idx])
    if len(order) < 2:
        raise ValidationError(
            f"{path}: found {len(order)} environment(s), need at least 2"
        )
    return CovariatePanel(
        tuple((env, np.asarray(groups[env], dtype=float)) for env in order)
    )


def dumps_json(obj) -> str:
    """Serialize nested dict/list/scalar data with 17-significant-digit floats."""
    return _render(obj, indent=0) + "\n"


def _render(obj, indent: int) -> str:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{inner}{json.dumps(str(k))}: {_render(v, indent + 1)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.floating, np.integer)) for v in seq):
            return "[" + ", ".join(_render(v, indent + 1) for v in seq) + "]"
        items = [f"{inner}{_render(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise ValidationError(f"cannot serialize value of type {type(obj).__name__}")


def test_result_to_dict(result: TestResult, include_null_samples: bool = True) -> dict:
    out = {
        "schema_version": SCHEMA_VERSION,
        "method": result.method,
        "statistic": result.statistic,
        "threshold": result.threshold,
        "p_value": result.p_value,
        "reject": bool(result.reject),
        "alpha": result.alpha,
        "resamples_M": result.resamples_M,
        "seed": result.seed,
        "warnings": list(result.warnings),
    }
    if include_null_samples and result.null_samples is not None:
        out["null_samples"] = [float(v) for v in result.null_samples]
    else:
        out["null_samples"] = None
    return out


def save_test_result(result: TestResult, path) -> None:
    Path(path).write_text(dumps_json(test_result_to_dict(result)), encoding="utf-8")


_GENERATOR_CONFIGS = {
    "linear_example": LinearExampleConfig,
    "polynomial": PolynomialConfig,
}


def dataclass_from_dict(cls, params: dict, context: str):
    """Instantiate a config dataclass from JSON data, rejecting unknown keys."""
    if not isinstance(params, dict):
        raise ValidationError(f"{context}: expected an object, got {type(params).__name__}")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = set(params) - allowed
    if unknown:
        raise ValidationError(
            f"{context}: unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}"
        )
    kwargs = dict(params)
    if "varying" in kwargs and kwargs["varying"] is not None:
        kwargs["varying"] = frozenset(kwargs["varying"])
    if "varying_range" in kwargs and kwargs["varying_range"] is not None:
        kwargs["varying_range"] = tuple(kwargs["varying_range"])
    if "covariate_columns" in kwargs and kwargs["covariate_columns"] is not None:
        kwargs["covariate_columns"] = tuple(kwargs["covariate_columns"])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"{context}: {exc}") from None


def generator_config_from_dict(kind: str, params: dict):
    """Build a generator config of the given kind from JSON data."""
    from .harness import SemiSyntheticSpec  # local import to avoid a cycle

    table = dict(_GENERATOR_CONFIGS, semi_synthetic=SemiSyntheticSpec)
    if kind not in table:
        raise ValidationError(
            f"unknown generator {kind!r}; expected one of {sorted(table)}"
        )
    return dataclass_from_dict(table[kind], params, f"generator_params[{kind}]")


def load_json_config(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: top-level JSON value must be an object")
    return obj


def require_schema_version(obj: dict, context: str) -> None:
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(
            f"{context}: schema_version must be {SCHEMA_VERSION}, got {version!r}"
        )
