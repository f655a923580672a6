"""Scripted controllers for the arena environments (test fixtures)."""

from __future__ import annotations

import math

import numpy as np

from vsrl.core import ContinuousAction


class Seeker:
    """Drives the point mass to ``targets(env)[0]`` with a clipped PD law."""

    def __init__(self, env, targets, gain: float = 0.4, damping: float = 1.2):
        self.env, self.targets = env, targets
        self.gain, self.damping = gain, damping
        self.B, self.A = env.info.accel_bounds

    def __call__(self, obs) -> ContinuousAction:
        st = self.env.true_symbolic_state()
        pos, vel = st.positions[0], st.agent_velocity
        goals = self.targets(self.env)
        if not goals:
            return ContinuousAction((float(np.clip(-vel[0], -self.B, self.A)), float(np.clip(-vel[1], -self.B, self.A))))
        tgt = min(goals, key=lambda p: math.dist(p, pos))
        a = self.gain * (np.asarray(tgt) - pos) - self.damping * vel
        a = np.clip(a, -self.B, self.A)
        return ContinuousAction((float(a[0]), float(a[1])))


def hazards(env):
    return [tuple(p) for p in env.true_symbolic_state().of_class(env.info.hazard_class)]


def hacker_targets(env):
    """Smash a hazard while any remain and no mess is left, collect messes, then the goal."""
    tasks = env.task_objects()
    if tasks.get("mess"):
        return tasks["mess"]
    if hazards(env):
        return hazards(env)
    return tasks["goal"]
