"""JSON schemas for manifests and model files, and CSV layout checks."""

import csv
import math
import re

from .exceptions import ValidationError

_NUMBER_ARRAY = {"type": "array", "items": {"type": "number"}}

MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["command", "inputs", "outputs", "config", "seed", "versions"],
    "properties": {
        "command": {
            "enum": ["ingest", "synth", "decompose", "roll", "fit", "sweep", "shock", "forecast", "report"]
        },
        "inputs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["path", "sha256"],
                "properties": {
                    "path": {"type": "string"},
                    "sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
                },
            },
        },
        "outputs": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "config": {"type": "object"},
        "seed": {"type": ["integer", "null"]},
        "versions": {
            "type": "object",
            "required": ["liqsurf", "python", "numpy", "scipy"],
            "additionalProperties": {"type": "string"},
        },
        "platform": {"type": "string"},
    },
}

DECOMPOSITION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["eigenvalues", "basis", "scores", "mean_row", "centered"],
    "properties": {
        "eigenvalues": {**_NUMBER_ARRAY, "minItems": 1},
        "basis": {"type": "array", "items": _NUMBER_ARRAY},
        "scores": {"type": "array", "items": _NUMBER_ARRAY},
        "mean_row": _NUMBER_ARRAY,
        "centered": {"type": "boolean"},
        "numerical_rank": {"type": "integer", "minimum": 0},
    },
}

FIT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["mean", "vol", "dist", "mean_params", "vol_params", "dist_params",
                 "loglik", "bic", "d", "nobs", "converged"],
    "properties": {
        "mean": {"type": "string"},
        "vol": {"type": "string"},
        "dist": {"enum": ["normal", "t", "skewt", "ged"]},
        "mean_params": {"type": "object", "additionalProperties": {"type": "number"}},
        "vol_params": {
            "type": "object",
            "required": ["omega", "alpha", "beta", "gamma", "kappa"],
            "additionalProperties": {"type": "number"},
        },
        "dist_params": {"type": "object", "additionalProperties": {"type": "number"}},
        "loglik": {"type": "number"},
        "bic": {"type": "number"},
        "d": {"type": "integer", "minimum": 0},
        "nobs": {"type": "integer", "minimum": 1},
        "converged": {"type": "boolean"},
        "stationary": {"type": "boolean"},
        "series_mean": {"type": "number"},
        "sigma_path": _NUMBER_ARRAY,
    },
}

VAR_GARCH_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["a", "A", "omega", "alpha", "beta", "R", "nu", "sigma2_next", "spectral_radius"],
    "properties": {
        "a": _NUMBER_ARRAY,
        "A": {"type": "array", "items": _NUMBER_ARRAY},
        "omega": _NUMBER_ARRAY,
        "alpha": _NUMBER_ARRAY,
        "beta": _NUMBER_ARRAY,
        "R": {"type": "array", "items": _NUMBER_ARRAY},
        "nu": {"type": "number", "exclusiveMinimum": 2},
        "sigma2_next": _NUMBER_ARRAY,
        "spectral_radius": {"type": "number", "minimum": 0},
    },
}

JSON_SCHEMAS = {
    "manifest": MANIFEST_SCHEMA,
    "decomposition": DECOMPOSITION_SCHEMA,
    "fit": FIT_SCHEMA,
    "var_garch": VAR_GARCH_SCHEMA,
}

# header patterns; '{k}' columns repeat with k = 1, 2, ...
CSV_LAYOUTS = {
    "surface": (["block"], "x"),
    "coefficients": (["block"], "beta_{k}"),
    "basis": (["x", "mean"], "u_{k}"),
    "eigenvalues": (["k", "eigenvalue", "pve", "cpve"], None),
    "rolling_eigenvalues": (["window_start_block"], "lambda_{k}"),
    "cpve": (["window_start_block", "K", "cpve"], None),
    "drift": (["window_start_block", "K", "d_to_inception", "d_to_legendre", "baseline"], None),
    "sweep": (["series_id", "mean", "vol", "dist", "converged", "loglik", "d", "bic", "delta_bic", "label"], None),
    "shock": (["x", "baseline"], "shock_{k}"),
    "forecast": (["h", "x", "forecast"], None),
    "quantiles": (["h", "x", "q05", "q25", "q50", "q75", "q95"], None),
}
_TEXT_COLUMNS = {"series_id", "mean", "vol", "dist", "converged", "label"}
_X_PATTERN = re.compile(r"^-?\d+\.\d{6}$")


def check_csv_header(header, kind):
    if kind not in CSV_LAYOUTS:
        raise ValidationError(f"unknown CSV kind {kind!r}")
    fixed, repeat = CSV_LAYOUTS[kind]
    if header[: len(fixed)] != fixed:
        raise ValidationError(f"{kind} CSV must start with {fixed}, got {header[: len(fixed)]}")
    rest = header[len(fixed):]
    if repeat is None:
        if rest:
            raise ValidationError(f"{kind} CSV has unexpected columns {rest}")
    elif repeat == "x":
        if not rest or not all(_X_PATTERN.match(c) for c in rest):
            raise ValidationError(f"{kind} CSV grid columns must be 6-decimal numbers")
    else:
        expected = [repeat.format(k=k) for k in range(1, len(rest) + 1)]
        if not rest or rest != expected:
            raise ValidationError(f"{kind} CSV expected columns {expected[:3]}..., got {rest[:3]}...")


def validate_csv(path, kind):
    """Check header layout and that every non-text field parses as a number.

    Returns the number of data rows.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        check_csv_header(header, kind)
        n = 0
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ValidationError(f"{path} line {lineno}: {len(row)} fields, expected {len(header)}")
            for name, value in zip(header, row):
                if name in _TEXT_COLUMNS:
                    continue
                try:
                    v = float(value)
                except ValueError:
                    raise ValidationError(f"{path} line {lineno}: {name}={value!r} is not numeric") from None
                if name not in ("loglik", "bic", "delta_bic") and not math.isfinite(v):
                    raise ValidationError(f"{path} line {lineno}: {name} is not finite")
            n += 1
    if n == 0:
        raise ValidationError(f"{path}: no data rows")
    return n
