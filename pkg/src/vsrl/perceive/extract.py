"""Symbolic mappings: observation -> SymbolicState."""

from __future__ import annotations

import numpy as np

from vsrl.core import ContractError, Env, Observation, SymbolicState
from vsrl.perceive.heatmap import TAU, Detection, decode_peaks, template_detect


def noisy_oracle(true_state: SymbolicState, eps: float, rng: np.random.Generator) -> SymbolicState:
    """Move every position uniformly within the closed disc of radius ``eps``."""
    if eps < 0:
        raise ContractError("eps must be nonnegative")
    n = len(true_state)
    if eps == 0 or n == 0:
        return true_state
    u = rng.random((2, n))
    shift = (eps * np.sqrt(u[0])) * np.exp(2j * np.pi * u[1])
    return true_state.with_positions(true_state.positions + shift.view(np.float64).reshape(n, 2))


class OracleExtractor:
    """Ground truth plus bounded noise; stands in for a detector meeting the eps contract."""

    def __init__(self, eps: float = 0.0, seed: int = 0):
        if eps < 0:
            raise ContractError("eps must be nonnegative")
        self.eps = eps
        self.rng = np.random.default_rng(seed)

    def __call__(self, env: Env, obs: Observation) -> SymbolicState:
        return noisy_oracle(env.true_symbolic_state(), self.eps, self.rng)


def detections_to_state(detections: list[Detection], env: Env) -> SymbolicState:
    """Pixel detections to world positions via the environment's (proprioceptive) camera map."""
    m = env.pixel_map()
    keep = env.info.safety_classes
    dets = sorted((d for d in detections if d.class_id in keep), key=lambda d: d.class_id)
    if not dets:
        return SymbolicState(np.zeros(0, dtype=np.int64), np.zeros((0, 2)), env.agent_velocity())
    world = m.to_world(np.array([[d.col, d.row] for d in dets]))
    return SymbolicState(np.array([d.class_id for d in dets], dtype=np.int64), world, env.agent_velocity())


class DetectorExtractor:
    """Template matching plus peak decoding on the rendered frame."""

    def __init__(self, env: Env, tau: float = TAU):
        self.templates = env.templates()
        self.tau = tau

    def __call__(self, env: Env, obs: Observation) -> SymbolicState:
        return detections_to_state(decode_peaks(template_detect(obs, self.templates), self.tau), env)


def make_extractor(kind: str, env: Env, eps: float = 0.0, seed: int = 0):
    if kind == "oracle":
        return OracleExtractor(eps, seed)
    if kind == "detector":
        return DetectorExtractor(env)
    raise ContractError(f"unknown extractor {kind!r}")
