"""Versioned JSON configuration shared by the command-line tools."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

from .engine import SpaConfig
from .errors import InvalidModel, ParseError
from .metrics import MetricConfig
from .models import ModelConfig, default_birth_cluster_radius
from .scenario import ScenarioConfig

CONFIG_VERSION = 1


@dataclass(frozen=True)
class CliConfig:
    """Merged configuration: model + message passing + scenario + metric."""

    model: ModelConfig
    spa: SpaConfig
    scenario: ScenarioConfig | None
    metric: MetricConfig
    seed: int

    def __post_init__(self):
        if self.spa.pruning_threshold > self.spa.detection_threshold:
            warnings.warn("pruning threshold exceeds detection threshold; "
                          "detected objects may be pruned", stacklevel=2)


def _spa_from_dict(data: dict, model: ModelConfig) -> SpaConfig:
    known = {"num_iterations", "num_particles", "detection_threshold",
             "pruning_threshold", "gate_radius", "birth_cluster_radius",
             "order_measurements", "workers"}
    unknown = set(data) - known
    if unknown:
        raise InvalidModel(f"unknown spa config keys: {sorted(unknown)}")
    data = dict(data)
    # absent -> model-derived censoring radius; explicit 0 disables it
    if "birth_cluster_radius" not in data:
        data["birth_cluster_radius"] = default_birth_cluster_radius(model)
    elif not data["birth_cluster_radius"]:
        data["birth_cluster_radius"] = None
    return SpaConfig(**data)


def _metric_from_dict(data: dict) -> MetricConfig:
    known = {"order", "cutoff", "base", "gospa_alpha"}
    unknown = set(data) - known
    if unknown:
        raise InvalidModel(f"unknown metric config keys: {sorted(unknown)}")
    return MetricConfig(**data)


def config_from_dict(data: dict) -> CliConfig:
    known = {"version", "model", "spa", "scenario", "metric", "seed"}
    unknown = set(data) - known
    if unknown:
        raise InvalidModel(f"unknown config keys: {sorted(unknown)}")
    version = data.get("version")
    if version != CONFIG_VERSION:
        raise InvalidModel(f"config version must be {CONFIG_VERSION}, got {version!r}")
    if "model" not in data:
        raise InvalidModel("config requires a 'model' section")
    model = ModelConfig.from_dict(data["model"])
    spa = _spa_from_dict(data.get("spa", {}), model)
    scenario = (ScenarioConfig.from_dict(data["scenario"])
                if "scenario" in data else None)
    metric = _metric_from_dict(data.get("metric", {}))
    return CliConfig(model=model, spa=spa, scenario=scenario,
                     metric=metric, seed=int(data.get("seed", 0)))


def load_config(path) -> CliConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: CliConfig) -> dict:
    spa = cfg.spa
    out = {
        "version": CONFIG_VERSION,
        "model": cfg.model.to_dict(),
        "spa": {
            "num_iterations": spa.num_iterations,
            "num_particles": spa.num_particles,
            "detection_threshold": spa.detection_threshold,
            "pruning_threshold": spa.pruning_threshold,
            "gate_radius": spa.gate_radius,
            "birth_cluster_radius": spa.birth_cluster_radius or 0,
            "order_measurements": spa.order_measurements,
            "workers": spa.workers,
        },
        "metric": {
            "order": cfg.metric.order,
            "cutoff": cfg.metric.cutoff,
            "base": cfg.metric.base,
            "gospa_alpha": cfg.metric.gospa_alpha,
        },
        "seed": cfg.seed,
    }
    if cfg.scenario is not None:
        out["scenario"] = cfg.scenario.to_dict()
    return out
