"""Benchmark environments: XO, ACC, GoalFinding (gf) and PointMesses (pm)."""

from __future__ import annotations

import dataclasses
from typing import Mapping

from vsrl.core import ContractError, Env
from vsrl.envs.acc import AccConfig, AccEnv
from vsrl.envs.arena import GfConfig, GfEnv, PmConfig, PmEnv
from vsrl.envs.xo import XoConfig, XoEnv

ENVS = {"xo": (XoEnv, XoConfig), "acc": (AccEnv, AccConfig), "gf": (GfEnv, GfConfig), "pm": (PmEnv, PmConfig)}


def make_config(name: str, config=None):
    """Config dataclass for ``name`` from None, a dataclass, or a mapping of overrides."""
    if name not in ENVS:
        raise ContractError(f"unknown environment {name!r}; choose from {sorted(ENVS)}")
    cls = ENVS[name][1]
    if config is None:
        return cls()
    if isinstance(config, cls):
        return config
    if isinstance(config, Mapping):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(config) - known)
        if unknown:
            raise ContractError(f"{name}: unknown config keys {unknown}")
        values = {k: tuple(v) if isinstance(v, list) else v for k, v in config.items()}
        return cls(**values)
    raise ContractError(f"{name}: config must be a mapping or {cls.__name__}")


def make_env(name: str, config=None, seed: int = 0) -> Env:
    return ENVS[name][0](make_config(name, config), seed)


__all__ = ["AccConfig", "AccEnv", "ENVS", "GfConfig", "GfEnv", "PmConfig", "PmEnv", "XoConfig", "XoEnv",
           "make_config", "make_env"]
