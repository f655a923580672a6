"""Scalar constant-acceleration kinematics used inside the simulators' hot loops.

Same semantics as PlantModel.advance (checked by the model-monitor tests),
written on python floats because environments step one object at a time.
"""

from __future__ import annotations

import math


def advance_axis(x: float, v: float, a: float, dt: float) -> tuple[float, float]:
    """Decelerating motion stops at v = 0 and holds; it never reverses."""
    if (v > 0.0 > a) or (v < 0.0 < a):
        t_stop = -v / a
        if dt >= t_stop:
            return x + 0.5 * v * t_stop, 0.0
    return x + v * dt + 0.5 * a * dt * dt, v + a * dt


def advance_capped(x: float, v: float, a: float, dt: float, vmax: float) -> tuple[float, float]:
    """Forward-only motion with speed saturating in [0, vmax]."""
    if a > 0.0:
        t_b = (vmax - v) / a
    elif a < 0.0:
        t_b = -v / a
    else:
        t_b = math.inf
    if dt <= t_b:
        return x + v * dt + 0.5 * a * dt * dt, v + a * dt
    vb = vmax if a > 0.0 else 0.0
    return x + v * t_b + 0.5 * a * t_b * t_b + vb * (dt - t_b), vb
