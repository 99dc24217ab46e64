"""JSON round trip for the toolkit's tunable knobs.

A config file may specify any subset of fields; everything missing keeps
its default. Reward values serialize as exact number strings.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from fractions import Fraction

from .ppo import GaeConfig, PpoConfig
from .rewards import RewardConfig
from .values import format_number, parse_number

CONFIG_ENV_VAR = "FLSOLVE_CONFIG"


@dataclass(frozen=True)
class ToolkitConfig:
    ppo: PpoConfig
    gae: GaeConfig
    reward: RewardConfig


def default_config() -> ToolkitConfig:
    return ToolkitConfig(PpoConfig(), GaeConfig(), RewardConfig())


def _exact_number(value: object, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ValueError(f"{where}: expected a number, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, (float, str)):
        parsed = parse_number(str(value))
        if parsed is not None:
            return parsed
    raise ValueError(f"{where}: expected a number, got {value!r}")


def _plain_section(cls, obj: dict, where: str):
    allowed = {f.name for f in fields(cls)}
    unknown = set(obj) - allowed
    if unknown:
        raise ValueError(f"{where}: unknown fields {sorted(unknown)}")
    return cls(**obj)


def config_from_json(obj: dict) -> ToolkitConfig:
    if not isinstance(obj, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(obj) - {"ppo", "gae", "reward"}
    if unknown:
        raise ValueError(f"config: unknown sections {sorted(unknown)}")
    ppo = _plain_section(PpoConfig, obj.get("ppo", {}), "ppo")
    gae = _plain_section(GaeConfig, obj.get("gae", {}), "gae")

    section = dict(obj.get("reward", {}))
    kwargs = {}
    if "r_max" in section:
        kwargs["r_max"] = _exact_number(section.pop("r_max"), "reward.r_max")
    if "clamp_floor" in section:
        floor = section.pop("clamp_floor")
        kwargs["clamp_floor"] = (
            None if floor is None else _exact_number(floor, "reward.clamp_floor")
        )
    if "clamp_components" in section:
        kwargs["clamp_components"] = bool(section.pop("clamp_components"))
    if section:
        raise ValueError(f"reward: unknown fields {sorted(section)}")
    return ToolkitConfig(ppo, gae, RewardConfig(**kwargs))


def config_to_json(cfg: ToolkitConfig) -> dict:
    return {
        "ppo": {f.name: getattr(cfg.ppo, f.name) for f in fields(PpoConfig)},
        "gae": {f.name: getattr(cfg.gae, f.name) for f in fields(GaeConfig)},
        "reward": {
            "r_max": format_number(cfg.reward.r_max),
            "clamp_components": cfg.reward.clamp_components,
            "clamp_floor": (
                None
                if cfg.reward.clamp_floor is None
                else format_number(cfg.reward.clamp_floor)
            ),
        },
    }


def load_config(path: str | None = None) -> ToolkitConfig:
    """Config from ``path``, else from $FLSOLVE_CONFIG, else defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return default_config()
    with open(path, encoding="utf-8") as fh:
        return config_from_json(json.load(fh))


def save_config(cfg: ToolkitConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_json(cfg), fh, indent=2)
        fh.write("\n")
