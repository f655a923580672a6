"""Closed-form constant-acceleration plant and the runtime model monitor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from vsrl.core import SymbolicState


@dataclass(frozen=True)
class PlantModel:
    """Agent kinematics over one control cycle of length at most ``T``.

    Per axis, braking decelerates to a stop and holds; it never reverses the
    motion inside a cycle. With ``nonnegative_velocity`` the mover also cannot
    start backwards from rest (the 1-D car). ``bounds`` clamps the agent to an
    arena box and zeroes the clamped velocity component.

    Non-agent objects are static unless listed in ``dynamic_classes``, which
    maps a class id to the largest forward (+x) speed it can have; dynamic
    objects never move backwards or sideways.
    """

    agent_class: int
    A: float
    B: float
    T: float
    nonnegative_velocity: bool = False
    bounds: tuple[tuple[float, float], ...] | None = None
    dynamic_classes: dict[int, float] = field(default_factory=dict)

    def advance(self, pos, vel, acc, dt):
        """Closed-form state after ``dt``; broadcasts over leading axes."""
        pos = np.asarray(pos, dtype=np.float64)
        vel = np.asarray(vel, dtype=np.float64)
        acc = np.asarray(acc, dtype=np.float64)
        dt = np.asarray(dt, dtype=np.float64)
        if self.nonnegative_velocity:
            acc = np.where((vel <= 0.0) & (acc < 0.0), 0.0, acc)
        opposing = np.sign(vel) * np.sign(acc) < 0.0  # the product itself can underflow to -0.0
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            t_stop = np.where(opposing, np.abs(vel) / np.where(acc == 0.0, 1.0, np.abs(acc)), np.inf)
        t_run = np.minimum(dt, t_stop)
        new_pos = pos + vel * t_run + 0.5 * acc * t_run * t_run
        new_vel = np.where(dt >= t_stop, 0.0, vel + acc * dt)
        if self.bounds is not None:
            lo = np.array([b[0] for b in self.bounds])
            hi = np.array([b[1] for b in self.bounds])
            clamped = (new_pos < lo) | (new_pos > hi)
            new_pos = np.clip(new_pos, lo, hi)
            new_vel = np.where(clamped, 0.0, new_vel)
        return new_pos, new_vel

    def brake(self, vel) -> np.ndarray:
        """Maximal braking: -B against each moving axis, 0 on axes at rest."""
        return -self.B * np.sign(np.asarray(vel, dtype=np.float64))

    def stop_time(self, vel) -> np.ndarray:
        return np.max(np.abs(np.asarray(vel, dtype=np.float64)), axis=-1) / self.B


def _quadratic_times(dx: float, v: float, a: float, horizon: float) -> list[float]:
    """Nonnegative roots t <= horizon of 0.5*a*t^2 + v*t = dx."""
    if a == 0.0:
        return [dx / v] if v != 0.0 and 0.0 <= dx / v <= horizon else []
    disc = v * v + 2.0 * a * dx
    if disc < 0.0:
        disc = 0.0 if disc > -1e-12 else disc
    if disc < 0.0:
        return []
    root = np.sqrt(disc)
    return [t for t in ((-v + root) / a, (-v - root) / a) if 0.0 <= t <= horizon]


def check_model_monitor(plant: PlantModel, o_prev: SymbolicState, action, o_next: SymbolicState,
                        tol: float) -> bool:
    """True iff some cycle length dt in (0, T] explains ``o_prev -> o_next`` under ``action``.

    Candidate dt values come from solving each axis' position and velocity
    equations in closed form (plus dt = T); every candidate is then verified by
    forward simulation against all coordinates within ``tol``.
    """
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    if not np.array_equal(o_prev.classes, o_next.classes):
        return False
    agent_idx = np.flatnonzero(o_prev.classes == plant.agent_class)
    if len(agent_idx) != 1:
        return False
    i = int(agent_idx[0])
    k = len(action.acceleration)
    acc = np.asarray(action.acceleration, dtype=np.float64)
    x0, v0 = o_prev.positions[i, :k], o_prev.agent_velocity[:k]
    x1, v1 = o_next.positions[i, :k], o_next.agent_velocity[:k]

    eff = np.where((v0 <= 0.0) & (acc < 0.0), 0.0, acc) if plant.nonnegative_velocity else acc
    candidates = {plant.T}
    for axis in range(k):
        v, a = float(v0[axis]), float(eff[axis])
        candidates.update(_quadratic_times(float(x1[axis] - x0[axis]), v, a, plant.T))
        if a != 0.0:
            t_v = (float(v1[axis]) - v) / a
            if 0.0 <= t_v <= plant.T:
                candidates.add(t_v)
            if v * a < 0.0:
                candidates.add(min(abs(v / a), plant.T))
    for dt in sorted(candidates):
        if dt <= 0.0:
            continue
        if _explains(plant, o_prev, o_next, i, k, acc, dt, tol):
            return True
    return False


def _explains(plant, o_prev, o_next, i, k, acc, dt, tol) -> bool:
    pos, vel = plant.advance(o_prev.positions[i, :k], o_prev.agent_velocity[:k], acc, dt)
    if np.any(np.abs(pos - o_next.positions[i, :k]) > tol):
        return False
    if np.any(np.abs(vel - o_next.agent_velocity[:k]) > tol):
        return False
    for j, cls in enumerate(o_prev.classes):
        if j == i:
            continue
        delta = o_next.positions[j] - o_prev.positions[j]
        vmax = plant.dynamic_classes.get(int(cls))
        if vmax is None:
            if np.any(np.abs(delta) > tol):
                return False
        elif not (-tol <= delta[0] <= vmax * dt + tol and abs(delta[1]) <= tol):
            return False
    return True
