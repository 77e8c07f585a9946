"""Run configuration and run reports for the pipeline commands.

Precedence for every setting, lowest to highest: built-in defaults, the
TOML config file (``--config``), environment variables prefixed
``RADALIGN_`` (e.g. ``RADALIGN_TAU=0.1``), then explicit CLI flags.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .pairing import STRATEGIES, STRATEGY_MERGE

ENV_PREFIX = "RADALIGN_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    tau: float = 0.07
    alpha: float = 0.5
    strategy: str = STRATEGY_MERGE
    loss_weights: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    seed: int = 0
    paths: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if not (self.tau > 0):
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if len(self.loss_weights) != 4 or any(w < 0 for w in self.loss_weights):
            raise ConfigError(f"loss_weights must be 4 non-negative values, got {self.loss_weights}")
        if self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed}")
        return self

    def as_dict(self) -> dict:
        return {
            "tau": self.tau,
            "alpha": self.alpha,
            "strategy": self.strategy,
            "loss_weights": list(self.loss_weights),
            "seed": self.seed,
            "paths": dict(self.paths),
        }


def _parse_weights(raw) -> tuple[float, float, float, float]:
    if isinstance(raw, str):
        parts = [p for p in raw.replace(",", " ").split() if p]
    else:
        parts = list(raw)
    if len(parts) != 4:
        raise ConfigError(f"loss_weights needs exactly 4 values, got {raw!r}")
    return tuple(float(p) for p in parts)


def load_config_file(path: str | Path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        return tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc


def _env_overrides() -> dict:
    out: dict = {}
    mapping = {
        "TAU": ("tau", float),
        "ALPHA": ("alpha", float),
        "STRATEGY": ("strategy", str),
        "SEED": ("seed", int),
        "LOSS_WEIGHTS": ("loss_weights", _parse_weights),
    }
    for suffix, (key, cast) in mapping.items():
        raw = os.environ.get(ENV_PREFIX + suffix)
        if raw is not None:
            try:
                out[key] = cast(raw)
            except ValueError as exc:
                raise ConfigError(f"bad {ENV_PREFIX}{suffix}={raw!r}: {exc}") from exc
    return out


def build_config(
    config_path: str | Path | None = None,
    tau: float | None = None,
    alpha: float | None = None,
    strategy: str | None = None,
    seed: int | None = None,
    loss_weights=None,
) -> RunConfig:
    """Merge defaults, config file, environment, and CLI flags (in that order)."""
    config = RunConfig()
    if config_path is not None:
        doc = load_config_file(config_path)
        known = {"tau", "alpha", "strategy", "seed", "loss_weights", "paths"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "loss_weights" in doc:
            doc["loss_weights"] = _parse_weights(doc["loss_weights"])
        if "paths" in doc:
            doc["paths"] = {str(k): str(v) for k, v in doc["paths"].items()}
        config = replace(config, **doc)
    env = _env_overrides()
    if env:
        config = replace(config, **env)
    flags = {
        "tau": tau,
        "alpha": alpha,
        "strategy": strategy,
        "seed": seed,
        "loss_weights": _parse_weights(loss_weights) if loss_weights is not None else None,
    }
    config = replace(config, **{k: v for k, v in flags.items() if v is not None})
    return config.validate()
