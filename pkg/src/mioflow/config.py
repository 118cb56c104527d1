"""Run configuration: a single JSON document covering data source, model,
solver, and metric settings, validated strictly (unknown keys rejected)
before any work happens. Command-line flags override file values."""

from __future__ import annotations

import json

from .datasets import BifurcationSpec, PetalSpec
from .gae import GaeConfig
from .geometry import GeodesicParams, KernelSpec
from .ode import SolverConfig
from .training import MioflowConfig


class ConfigError(ValueError):
    """Invalid run configuration; maps to exit code 2 in the CLI."""


def _check_keys(section: str, data: dict, allowed) -> None:
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"{section}: unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}")


def _build(cls, section: str, data: dict, converters=None):
    fields = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
    _check_keys(section, data, fields)
    kwargs = dict(data)
    for key, conv in (converters or {}).items():
        if key in kwargs:
            kwargs[key] = conv(kwargs[key])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def kernel_from_dict(data: dict) -> KernelSpec:
    return _build(KernelSpec, "gae.kernel", data)


def geodesic_from_dict(data: dict) -> GeodesicParams:
    return _build(GeodesicParams, "gae.geodesic", data)


def gae_config_from_dict(data: dict) -> GaeConfig:
    return _build(GaeConfig, "gae", data, converters={
        "kernel": kernel_from_dict,
        "geodesic": geodesic_from_dict,
        "hidden_dims": tuple,
    })


def solver_from_dict(data: dict) -> SolverConfig:
    return _build(SolverConfig, "solver", data)


def mioflow_config_from_dict(data: dict) -> MioflowConfig:
    return _build(MioflowConfig, "mioflow", data, converters={
        "solver": solver_from_dict,
        "hidden_dims": tuple,
    })


def petal_spec_from_dict(data: dict) -> PetalSpec:
    return _build(PetalSpec, "dataset.petal", data)


def bifurcation_spec_from_dict(data: dict) -> BifurcationSpec:
    return _build(BifurcationSpec, "dataset.bifurcation", data, converters={
        "counts": tuple,
    })


RUN_CONFIG_KEYS = ("seed", "output_dir", "dataset", "gae", "mioflow", "solver", "metrics")
DATASET_KEYS = ("source", "path", "petal", "bifurcation")
METRIC_KEYS = ("mmd_scales",)


def validate_run_config(data: dict) -> dict:
    """Strictly validate a full run-configuration mapping."""
    if not isinstance(data, dict):
        raise ConfigError("run config must be a JSON object")
    _check_keys("run config", data, RUN_CONFIG_KEYS)
    out = dict(data)
    if "dataset" in data:
        ds = data["dataset"]
        if not isinstance(ds, dict):
            raise ConfigError("dataset: must be an object")
        _check_keys("dataset", ds, DATASET_KEYS)
        if ds.get("source") not in (None, "petal", "bifurcation", "csv"):
            raise ConfigError(f"dataset.source: unknown source {ds.get('source')!r}")
        if "petal" in ds:
            petal_spec_from_dict(ds["petal"])
        if "bifurcation" in ds:
            bifurcation_spec_from_dict(ds["bifurcation"])
    if "gae" in data:
        gae_config_from_dict(data["gae"])
    if "mioflow" in data:
        mioflow_config_from_dict(data["mioflow"])
    if "solver" in data:
        solver_from_dict(data["solver"])
    if "metrics" in data:
        _check_keys("metrics", data["metrics"], METRIC_KEYS)
    if "seed" in data and not isinstance(data["seed"], int):
        raise ConfigError("seed: must be an integer")
    return out


def load_run_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return validate_run_config(data)
