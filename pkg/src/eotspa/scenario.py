"""Ground-truth trajectory generation and synthetic measurements.

Objects start on a circle around the region center, move inward with nearly
constant velocity, and generate Poisson-distributed reflections plus uniform
clutter.  Extents are drawn once per object from the inverse-Wishart birth
prior and stay fixed over the object's lifetime.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import invwishart

from .errors import InvalidModel, ParseError
from .models import MeasurementModel, Roi, ncv_matrices, sample_reflections


@dataclass(frozen=True)
class ScenarioConfig:
    """Geometry and schedule of the crossing-objects scenario."""

    n_objects: int
    roi: Roi
    circle_radius: float
    initial_speed: float
    birth_times: tuple[int, ...]
    death_times: tuple[int, ...]
    n_steps: int
    period: float = 0.2
    sigma_c: float = 1.0
    extent_mean: np.ndarray = field(default_factory=lambda: 3.0 * np.eye(2))
    extent_dof: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "extent_mean",
                           np.atleast_2d(np.asarray(self.extent_mean, dtype=float)))
        if len(self.birth_times) != self.n_objects or len(self.death_times) != self.n_objects:
            raise InvalidModel("need one birth and death time per object")
        for b, d in zip(self.birth_times, self.death_times):
            if not b < d:
                raise InvalidModel("birth must precede death")

    def to_dict(self) -> dict:
        return {
            "n_objects": self.n_objects,
            "roi": [self.roi.x_min, self.roi.x_max, self.roi.y_min, self.roi.y_max],
            "circle_radius": self.circle_radius,
            "initial_speed": self.initial_speed,
            "birth_times": list(self.birth_times),
            "death_times": list(self.death_times),
            "n_steps": self.n_steps,
            "period": self.period,
            "sigma_c": self.sigma_c,
            "extent_mean": self.extent_mean.tolist(),
            "extent_dof": self.extent_dof,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        known = {"n_objects", "roi", "circle_radius", "initial_speed",
                 "birth_times", "death_times", "n_steps", "period", "sigma_c",
                 "extent_mean", "extent_dof"}
        unknown = set(data) - known
        if unknown:
            raise InvalidModel(f"unknown scenario config keys: {sorted(unknown)}")
        return cls(
            n_objects=int(data["n_objects"]),
            roi=Roi(*data["roi"]),
            circle_radius=float(data["circle_radius"]),
            initial_speed=float(data["initial_speed"]),
            birth_times=tuple(int(t) for t in data["birth_times"]),
            death_times=tuple(int(t) for t in data["death_times"]),
            n_steps=int(data["n_steps"]),
            period=float(data.get("period", 0.2)),
            sigma_c=float(data.get("sigma_c", 1.0)),
            extent_mean=np.asarray(data.get("extent_mean", 3.0 * np.eye(2)), dtype=float),
            extent_dof=float(data.get("extent_dof", 100.0)),
        )


def paper_scenario(n_objects: int = 10, n_steps: int = 100) -> ScenarioConfig:
    """The reference crossing scenario: births and deaths in pairs.

    With fewer than ten objects the schedule keeps the same spacing but
    assigns one object per slot.
    """
    if n_objects == 10:
        births = tuple(t for t in (3, 6, 9, 12, 15) for _ in range(2))
        deaths = tuple(t for t in (83, 86, 89, 92, 95) for _ in range(2))
    else:
        births = tuple(3 + 3 * (i % 5) for i in range(n_objects))
        deaths = tuple(83 + 3 * (i % 5) for i in range(n_objects))
    return ScenarioConfig(
        n_objects=n_objects,
        roi=Roi(-150.0, 150.0, -150.0, 150.0),
        circle_radius=75.0,
        initial_speed=10.0,
        birth_times=births,
        death_times=deaths,
        n_steps=n_steps,
    )


@dataclass
class TruthObject:
    object_id: int
    kin: np.ndarray  # (dx,)
    ext: np.ndarray  # (d, d)
    alive: bool


GroundTruth = list[list[TruthObject]]  # per step


def generate_truth(cfg: ScenarioConfig, rng: np.random.Generator) -> GroundTruth:
    """Simulate all trajectories; the alive flag follows the birth/death schedule.

    Trajectories are propagated from step 0 regardless of birth time so the
    crossing geometry does not depend on the schedule.  Angular placement on
    the circle is deterministic and evenly spaced.
    """
    n = cfg.n_objects
    center = np.array([(cfg.roi.x_min + cfg.roi.x_max) / 2.0,
                       (cfg.roi.y_min + cfg.roi.y_max) / 2.0])
    trans, noise_in = ncv_matrices(cfg.period)
    states = np.zeros((n, 4))
    extents = np.zeros((n, 2, 2))
    for i in range(n):
        angle = 2.0 * np.pi * i / n
        direction = np.array([np.cos(angle), np.sin(angle)])
        states[i, :2] = center + cfg.circle_radius * direction
        states[i, 2:] = -cfg.initial_speed * direction
        extents[i] = invwishart.rvs(df=cfg.extent_dof,
                                    scale=cfg.extent_mean * (cfg.extent_dof - 3),
                                    random_state=rng)

    truth: GroundTruth = []
    for step in range(cfg.n_steps):
        frame = [TruthObject(i, states[i].copy(), extents[i].copy(),
                             cfg.birth_times[i] <= step < cfg.death_times[i])
                 for i in range(n)]
        truth.append(frame)
        accel = rng.normal(scale=cfg.sigma_c, size=(n, 2))
        states = states @ trans.T + accel @ noise_in.T
    return truth


def generate_measurements(frame: list[TruthObject], model: MeasurementModel,
                          rng: np.random.Generator) -> np.ndarray:
    """Reflections from every alive object plus clutter, in shuffled order."""
    parts = []
    for obj in frame:
        if not obj.alive:
            continue
        mu = float(model.measurement_rate(obj.kin[None, :], obj.ext[None])[0])
        count = rng.poisson(mu)
        if count:
            parts.append(sample_reflections(obj.kin, obj.ext, count, model, rng))
    n_clutter = rng.poisson(model.clutter_mean)
    if n_clutter:
        parts.append(model.roi.sample(n_clutter, rng))
    if not parts:
        return np.zeros((0, model.dim))
    zs = np.vstack(parts)
    return zs[rng.permutation(zs.shape[0])]


def simulate(cfg: ScenarioConfig, model: MeasurementModel,
             rng: np.random.Generator) -> tuple[GroundTruth, list[np.ndarray]]:
    truth = generate_truth(cfg, rng)
    frames = [generate_measurements(frame, model, rng) for frame in truth]
    return truth, frames


# ---------------------------------------------------------------------------
# serialization (one frame per JSONL line)


def write_measurements(path, frames: list[np.ndarray]) -> None:
    with open(path, "w") as fh:
        for t, zs in enumerate(frames):
            fh.write(json.dumps({"t": t, "z": np.asarray(zs).tolist()}) + "\n")


def read_measurements(path) -> list[np.ndarray]:
    frames = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                zs = np.asarray(record["z"], dtype=float)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if zs.size == 0:
                zs = np.zeros((0, 2))
            if zs.ndim != 2:
                raise ParseError(f"frame {record.get('t')}: measurements must be 2-D",
                                 line=lineno)
            frames.append(zs)
    return frames


def write_truth(path, truth: GroundTruth) -> None:
    with open(path, "w") as fh:
        for t, frame in enumerate(truth):
            record = {
                "t": t,
                "objects": [
                    {"id": obj.object_id, "x": obj.kin.tolist(),
                     "E": obj.ext.tolist(), "alive": bool(obj.alive)}
                    for obj in frame
                ],
            }
            fh.write(json.dumps(record) + "\n")


def read_truth(path) -> GroundTruth:
    truth: GroundTruth = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                frame = [TruthObject(int(o["id"]), np.asarray(o["x"], dtype=float),
                                     np.asarray(o["E"], dtype=float), bool(o["alive"]))
                         for o in record["objects"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(str(exc), line=lineno) from exc
            truth.append(frame)
    return truth
