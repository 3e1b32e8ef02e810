"""Vessel trajectory forecasting: a thin Python layer over the C++ core."""

import json
from os import PathLike
from typing import Any, Mapping, Optional, Sequence, Tuple, Union

from . import _core
from ._core import ConfigError, HexGrid, bearing_deg, content_hash, feature_arity, haversine_km

__all__ = [
    "ConfigError",
    "HexGrid",
    "STAGES",
    "bearing_deg",
    "content_hash",
    "default_config",
    "error_report",
    "feature_arity",
    "haversine_km",
    "parameter_count",
    "run",
    "run_stage",
]

STAGES = ("synth", "grid", "ingest", "fit-prob", "featurize", "train", "predict", "evaluate")

Config = Optional[Mapping[str, Any]]


def _dump(config: Config) -> str:
    return json.dumps(dict(config or {}))


def default_config() -> dict:
    return json.loads(_core.normalize_config(""))


def parameter_count(config: Config = None) -> int:
    return _core.parameter_count(_dump(config))


def error_report(truth: Sequence[Tuple[float, float]], pred: Sequence[Tuple[float, float]]) -> dict:
    return json.loads(_core.error_report(list(truth), list(pred)))


def run_stage(stage: str, config: Config = None, predictions: Union[str, PathLike, None] = None) -> str:
    """Runs one pipeline stage and returns its summary line."""
    return _core.run_stage(stage, _dump(config), str(predictions) if predictions else "")


def run(config: Config = None, stages: Sequence[str] = STAGES) -> list:
    return [run_stage(s, config) for s in stages]
