"""Run configuration: one dataclass, JSON round-trip, strict validation."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Optional

from .core import TAXONOMY, TaskCategory
from .errors import ConfigError
from .experts import ExpertRegistry, ExpertSpec, Modality, SkillProfile, default_registry


@dataclass
class RunConfig:
    seed: int = 0
    total_steps: int = 1000
    gamma: float = 0.99
    lr: float = 5e-4
    batch_size: int = 16
    buffer_capacity: int = 500
    learning_starts: int = 50
    target_sync_interval: int = 50
    exploration_fraction: float = 0.5
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.1
    t_max: int = 6
    step_penalty: float = 0.05
    taxonomy: tuple[str, ...] = tuple(c.value for c in TAXONOMY)
    expert_profiles: Optional[list[dict[str, Any]]] = None
    train_prompt_count: int = 450
    difficulty_min: int = 6
    difficulty_max: int = 6

    def validate(self) -> "RunConfig":
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.total_steps < 0:
            raise ConfigError("total_steps must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must be in [0, 1]")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.buffer_capacity < 1:
            raise ConfigError("buffer_capacity must be >= 1")
        if not 1 <= self.learning_starts <= self.buffer_capacity:
            raise ConfigError("learning_starts must be in [1, buffer_capacity]")
        if self.target_sync_interval < 1:
            raise ConfigError("target_sync_interval must be >= 1")
        if not 0.0 < self.exploration_fraction <= 1.0:
            raise ConfigError("exploration_fraction must be in (0, 1]")
        for name in ("epsilon_initial", "epsilon_final"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if self.step_penalty < 0:
            raise ConfigError("step_penalty must be >= 0")
        try:
            cats = tuple(TaskCategory(c) for c in self.taxonomy)
        except ValueError as exc:
            raise ConfigError(f"unknown task category: {exc}") from exc
        if len(set(cats)) != len(cats) or not cats:
            raise ConfigError("taxonomy must be a non-empty set of distinct categories")
        if not 1 <= self.difficulty_min <= self.difficulty_max <= 6:
            raise ConfigError("difficulty bounds must satisfy 1 <= min <= max <= 6")
        if self.train_prompt_count < 1:
            raise ConfigError("train_prompt_count must be >= 1")
        self.build_registry()  # profiles must parse and cover the taxonomy
        return self

    def categories(self) -> tuple[TaskCategory, ...]:
        return tuple(TaskCategory(c) for c in self.taxonomy)

    def build_registry(self) -> ExpertRegistry:
        if self.expert_profiles is None:
            registry = default_registry()
        else:
            specs = []
            for entry in self.expert_profiles:
                try:
                    means = {TaskCategory(k): float(v) for k, v in entry["means"].items()}
                    failure = entry.get("failure")
                    if failure is not None:
                        failure = {TaskCategory(k): float(v) for k, v in failure.items()}
                    profile = SkillProfile(
                        means=means, sigma=float(entry.get("sigma", 0.5)), failure=failure
                    )
                    specs.append(
                        ExpertSpec(
                            index=int(entry["index"]),
                            name=str(entry["name"]),
                            modality=Modality(entry["modality"]),
                            profile=profile,
                        )
                    )
                except (KeyError, TypeError, ValueError) as exc:
                    raise ConfigError(f"bad expert profile entry: {exc}") from exc
            registry = ExpertRegistry(specs)
        cats = self.categories()
        for spec in registry.list():
            if spec.profile is not None and not spec.profile.covers(cats):
                raise ConfigError(f"expert {spec.index} profile does not cover the taxonomy")
        return registry

    def to_json(self) -> str:
        d = asdict(self)
        d["taxonomy"] = list(self.taxonomy)
        return json.dumps(d, indent=2, sort_keys=True)


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = dict(data)
    if "taxonomy" in kwargs:
        kwargs["taxonomy"] = tuple(kwargs["taxonomy"])
    try:
        cfg = RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg.validate()


def load_config(path: str | Path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return config_from_dict(data)
