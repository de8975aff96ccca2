"""Experiment configuration: one JSON file per experiment, strictly validated.

Unknown keys are rejected rather than ignored, because a silently misspelled
noise scale or failure probability would invalidate every guarantee computed
downstream.  Sections mirror the library's own config objects; the harness
converts them at the point of use.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os

from .adversarial import TRAIN_MODES


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""


def _build(cls, data, path):
    """Construct a flat dataclass from a dict, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown config key: {path}.{key}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclasses.dataclass(frozen=True)
class DatasetSection:
    kind: str = "gaussian_classes"
    means: list | None = None
    sigma0: float = 1.0
    n_train: int = 2000
    n_test: int = 200
    train_images: str | None = None
    train_labels: str | None = None
    test_images: str | None = None
    test_labels: str | None = None
    limit: int | None = None

    def __post_init__(self):
        if self.kind not in ("gaussian_classes", "idx"):
            raise ConfigError(f"dataset.kind must be gaussian_classes or idx, got {self.kind!r}")
        if self.kind == "gaussian_classes":
            if self.means is None:
                raise ConfigError("dataset.means is required for gaussian_classes")
            if self.sigma0 <= 0:
                raise ConfigError("dataset.sigma0 must be positive")
        if self.kind == "idx":
            for name in ("train_images", "train_labels"):
                p = getattr(self, name)
                if p is None:
                    raise ConfigError(f"dataset.{name} is required for idx datasets")
                if not os.path.exists(p):
                    raise ConfigError(f"dataset.{name}: file not found: {p}")
            for name in ("test_images", "test_labels"):
                p = getattr(self, name)
                if p is not None and not os.path.exists(p):
                    raise ConfigError(f"dataset.{name}: file not found: {p}")


@dataclasses.dataclass(frozen=True)
class ConfidenceSection:
    alpha: float = 0.001
    n0: int = 100
    nc: int = 100_000


@dataclasses.dataclass(frozen=True)
class EstimatorSection:
    kind: str = "closed_form"
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("closed_form", "energy", "identity"):
            raise ConfigError(
                f"estimator.kind must be closed_form, energy or identity, got {self.kind!r}"
            )
        if self.kind == "energy":
            if self.path is None:
                raise ConfigError("estimator.path is required for kind=energy")
            if not os.path.exists(self.path):
                raise ConfigError(f"estimator.path: file not found: {self.path}")


@dataclasses.dataclass(frozen=True)
class ClassifierSection:
    kind: str = "mlp"
    hidden: list = dataclasses.field(default_factory=lambda: [64])
    weights: list | None = None
    bias: float | None = None
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("mlp", "linear", "checkpoint"):
            raise ConfigError(
                f"classifier.kind must be mlp, linear or checkpoint, got {self.kind!r}"
            )
        if self.kind == "linear" and (self.weights is None or self.bias is None):
            raise ConfigError("classifier.weights and classifier.bias are required for linear")
        if self.kind == "checkpoint":
            if self.path is None:
                raise ConfigError("classifier.path is required for kind=checkpoint")
            if not os.path.exists(self.path):
                raise ConfigError(f"classifier.path: file not found: {self.path}")


@dataclasses.dataclass(frozen=True)
class EnergyTrainSection:
    sigma: float | None = None  # defaults to the experiment sigma
    hidden: list = dataclasses.field(default_factory=lambda: [128, 128])
    steps: int = 4000
    batch_size: int = 128
    lr: float = 1e-3
    lr_final: float | None = None


@dataclasses.dataclass(frozen=True)
class TrainSection:
    mode: str = "adversarial"
    steps: int = 1500
    batch_size: int = 64
    lr: float = 1e-3
    lr_final: float | None = None
    m: int = 1

    def __post_init__(self):
        if self.mode not in TRAIN_MODES:
            raise ConfigError(f"train.mode must be one of {TRAIN_MODES}, got {self.mode!r}")


@dataclasses.dataclass(frozen=True)
class AttackSection:
    epsilon: float = 1.0
    steps: int = 16
    step_size: float | None = None
    m: int = 1


@dataclasses.dataclass(frozen=True)
class CertifySection:
    max_points: int = 200
    workers: int = 1
    chunk: int = 10_000
    radius_grid: list = dataclasses.field(default_factory=lambda: [0.5, 1.0, 1.5, 2.0])
    max_violations: int = 3


@dataclasses.dataclass(frozen=True)
class WalkJumpSection:
    sigma_prime: float = 0.05
    delta: float = 0.001
    tau: int = 100
    n_samples: int = 256
    dump_trajectory: bool = False
    fine_energy_path: str | None = None

    def __post_init__(self):
        if self.fine_energy_path is not None and not os.path.exists(self.fine_energy_path):
            raise ConfigError(
                f"walk_jump.fine_energy_path: file not found: {self.fine_energy_path}"
            )


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    sigma: float = 1.0
    output_dir: str = "runs/out"
    dataset: DatasetSection = dataclasses.field(default_factory=lambda: _build(
        DatasetSection, {"means": [[0.0]]}, "dataset"))
    confidence: ConfidenceSection = dataclasses.field(default_factory=ConfidenceSection)
    estimator: EstimatorSection = dataclasses.field(default_factory=EstimatorSection)
    classifier: ClassifierSection = dataclasses.field(default_factory=ClassifierSection)
    energy_train: EnergyTrainSection = dataclasses.field(default_factory=EnergyTrainSection)
    train: TrainSection = dataclasses.field(default_factory=TrainSection)
    attack: AttackSection = dataclasses.field(default_factory=AttackSection)
    certify: CertifySection = dataclasses.field(default_factory=CertifySection)
    walk_jump: WalkJumpSection = dataclasses.field(default_factory=WalkJumpSection)


_SECTIONS = {
    "dataset": DatasetSection,
    "confidence": ConfidenceSection,
    "estimator": EstimatorSection,
    "classifier": ClassifierSection,
    "energy_train": EnergyTrainSection,
    "train": TrainSection,
    "attack": AttackSection,
    "certify": CertifySection,
    "walk_jump": WalkJumpSection,
}
_SCALARS = {"seed": int, "sigma": float, "output_dir": str}


def config_from_dict(data):
    """Build a validated ExperimentConfig from a plain dict."""
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be an object")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        elif key in _SCALARS:
            try:
                kwargs[key] = _SCALARS[key](value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{key}: {exc}") from exc
        else:
            raise ConfigError(f"unknown config key: {key}")
    if "sigma" in kwargs and kwargs["sigma"] <= 0:
        raise ConfigError("sigma must be positive")
    return ExperimentConfig(**kwargs)


def load_config(path, overrides=()):
    """Load a JSON experiment config, applying dotted-path overrides.

    Each override is "section.key=value" (or "key=value" at top level); the
    value is parsed as JSON when possible, else taken as a string.
    """
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override path {dotted!r} crosses a non-object")
        node[parts[-1]] = value
    return config_from_dict(data), data


def config_digest(data):
    """Stable SHA-256 of the raw config dict (sorted-key compact JSON)."""
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
