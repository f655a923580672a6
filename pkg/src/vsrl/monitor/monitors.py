"""Controller monitors: formulas bound to symbolic state and action components.

A monitor is evaluated once per hazard object (the formula is a conjunction
over every perceived hazard), with the hazard-specific quantities such as the
distance rebound for each instance. With no hazards in view it holds vacuously.
Formulas that reference no per-hazard quantity are evaluated exactly once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from vsrl.core import Action, ContinuousAction, ContractError, DiscreteAction, SymbolicState
from vsrl.monitor.dsl import NAMESPACE, Formula, parse_formula, to_python, to_text, variables

# Binding sources over the agent position (_px, _py), velocity (_vx, _vy),
# action vector (_ax, _ay) and, for per-hazard bindings, one hazard position
# (_hx, _hy). ``_hypot`` is math.hypot on the scalar path and np.hypot on the
# vectorized one; {name} placeholders are filled from the monitor parameters.
BINDINGS: dict[str, tuple[str, bool]] = {
    "gap_x": ("_hx - _px - {length}", True),
    "dist": ("_hypot(_hx - _px, _hy - _py)", True),
    "dx": ("_px + _ax - _hx", True),
    "dy": ("_py + _ay - _hy", True),
    "speed": ("_hypot(_vx, _vy)", False),
    "vx": ("_vx", False),
    "vy": ("_vy", False),
    "accel": ("_hypot(_ax, _ay)", False),
    "ax": ("_ax", False),
    "ay": ("_ay", False),
}
PER_HAZARD = frozenset(k for k, (_, ph) in BINDINGS.items() if ph)


class BindingError(ContractError):
    pass


class _Params(dict):
    def __missing__(self, key):
        return "0.0"


def _codegen(formula: Formula, params: Mapping[str, float], bindings: Mapping[str, str]):
    """Compile (formula, bindings) into
    ``check(px, py, vx, vy, ax, ay, hazards) -> bool`` (loops over hazards) and
    ``allowed(px, py, vx, vy, ax, ay, hx, hy) -> array`` (broadcasting)."""
    fill = _Params({k: repr(float(v)) for k, v in params.items()})
    outer = [f"{name} = {BINDINGS[key][0].format_map(fill)}"
             for name, key in sorted(bindings.items()) if not BINDINGS[key][1]]
    inner = [f"{name} = {BINDINGS[key][0].format_map(fill)}"
             for name, key in sorted(bindings.items()) if BINDINGS[key][1]]
    scalar_expr = to_python(formula, params, vector=False)
    vector_expr = to_python(formula, params, vector=True)
    lines = ["def check(_px, _py, _vx, _vy, _ax, _ay, _hazards):"]
    lines += [f"    {a}" for a in outer]
    lines += ["    for _hx, _hy in _hazards:"]
    lines += [f"        {a}" for a in inner]
    lines += [f"        if not ({scalar_expr}):", "            return False", "    return True", ""]
    lines += ["def allowed(_px, _py, _vx, _vy, _ax, _ay, _hx, _hy):"]
    lines += [f"    {a}" for a in outer + inner]
    lines += [f"    return _np.asarray({vector_expr}, dtype=bool)"]
    source = "\n".join(lines)
    scalar_ns = dict(NAMESPACE, _hypot=math.hypot)
    vector_ns = dict(NAMESPACE, _hypot=np.hypot)
    exec(source, scalar_ns)  # noqa: S102 - generated from a parsed AST and the fixed binding table
    exec(source, vector_ns)  # noqa: S102
    return scalar_ns["check"], vector_ns["allowed"], source


@dataclass(frozen=True)
class MonitorSpec:
    """A named controller monitor.

    ``bindings`` maps formula variable names to keys of :data:`BINDINGS`;
    ``params`` supplies the remaining names as constants. Discrete actions are
    turned into vectors through ``moves`` (one (dx, dy) per action index).
    """

    name: str
    formula: Formula
    params: Mapping[str, float]
    bindings: Mapping[str, str]
    agent_class: int = 0
    hazard_class: int = 1
    moves: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        free = variables(self.formula) - set(self.params)
        unbound = sorted(free - set(self.bindings))
        if unbound:
            raise BindingError(f"monitor {self.name!r}: unbound variables {unbound}")
        bad = sorted(k for k in self.bindings.values() if k not in BINDINGS)
        if bad:
            raise BindingError(f"monitor {self.name!r}: unknown bindings {bad}")
        for name in free:
            if not name.isidentifier() or name.startswith("_"):
                raise BindingError(f"monitor {self.name!r}: invalid variable name {name!r}")
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        object.__setattr__(self, "bindings", {k: v for k, v in self.bindings.items() if k in free})
        check, allowed, source = _codegen(self.formula, self.params, self.bindings)
        object.__setattr__(self, "_check", check)
        object.__setattr__(self, "_allowed", allowed)
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "_per_hazard", any(k in PER_HAZARD for k in self.bindings.values()))
        object.__setattr__(self, "_matrix_cache", [None, None])

    @property
    def text(self) -> str:
        return to_text(self.formula)

    @property
    def per_hazard(self) -> bool:
        return self._per_hazard

    def with_params(self, **params: float) -> "MonitorSpec":
        return replace(self, params={**self.params, **params})

    def action_vector(self, action: Action) -> tuple[float, float]:
        if isinstance(action, ContinuousAction):
            acc = action.acceleration
            return (float(acc[0]), float(acc[1]) if len(acc) > 1 else 0.0)
        if isinstance(action, DiscreteAction):
            if self.moves is None:
                raise ContractError(f"monitor {self.name!r} has no move table for discrete actions")
            return self.moves[action.index]
        raise ContractError(f"not an action: {action!r}")

    def _split(self, state: SymbolicState) -> tuple[tuple[float, float], list]:
        agent, hazards = [], []
        for k, xy in zip(state.classes.tolist(), state.positions.tolist()):
            if k == self.agent_class:
                agent.append(xy)
            elif k == self.hazard_class:
                hazards.append(xy)
        if len(agent) != 1:
            raise ContractError(f"monitor {self.name!r}: expected one agent, perceived {len(agent)}")
        if not self._per_hazard:
            hazards = [(0.0, 0.0)]
        return agent[0], hazards

    def check(self, state: SymbolicState, action: Action) -> bool:
        """Scalar path: the verdict for one action."""
        return self.bind(state)(action)

    def bind(self, state: SymbolicState):
        """``action -> bool`` with the state already unpacked (for repeated queries)."""
        (px, py), hazards = self._split(state)
        vx, vy = state.agent_velocity.tolist()[:2]
        fn, vec = self._check, self.action_vector
        return lambda action: fn(px, py, vx, vy, *vec(action), hazards)

    def allowed(self, state: SymbolicState, actions: Sequence[Action]) -> np.ndarray:
        """Vectorized path: boolean mask over ``actions``."""
        n = len(actions)
        if n == 0:
            return np.zeros(0, dtype=bool)
        (px, py), hazards = self._split(state)
        if not hazards:
            return np.ones(n, dtype=bool)
        vx, vy = state.agent_velocity.tolist()[:2]
        cache = self._matrix_cache
        if cache[0] is not actions:
            cache[0], cache[1] = actions, _action_matrix(actions, self.moves)
        vecs = cache[1]
        hz = np.array(hazards, dtype=np.float64)
        verdict = self._allowed(px, py, vx, vy, vecs[:, 0:1], vecs[:, 1:2], hz[None, :, 0], hz[None, :, 1])
        return np.broadcast_to(verdict, (n, len(hazards))).all(axis=1)


def _action_matrix(actions: Sequence[Action], moves) -> np.ndarray:
    out = np.zeros((len(actions), 2))
    for i, a in enumerate(actions):
        if isinstance(a, ContinuousAction):
            out[i, :len(a.acceleration)] = a.acceleration
        else:
            out[i] = moves[a.index]
    return out


def eval_monitor(m: MonitorSpec, o: SymbolicState, a: Action) -> bool:
    return m.check(o, a)


def safe_action_set(m: MonitorSpec, o: SymbolicState, actions: Sequence[Action]) -> list[Action]:
    """The order-preserving sublist of ``actions`` the monitor accepts."""
    if not actions:
        return []
    mask = m.allowed(o, actions)
    return [a for a, ok in zip(actions, mask) if ok]


# Follower behind a leader that never reverses, so treating the leader as a
# static obstacle at its current position is conservative. ``d`` is the bumper
# gap. The middle clause is the stopping-distance constraint for accelerating
# with a for a full cycle then braking with B; it is only valid while the car
# does not come to rest inside the cycle (v + a*T >= 0). Gentle braking that
# stops early is covered by the coasting bound (a = 0), and full braking is
# always permitted.
ACC_SB = (
    "a = -B"
    " || (v + a*T >= 0 && 2*B*(d - eps) > v^2 + (a + B)*(a*T^2 + 2*T*v))"
    " || (a <= 0 && 2*B*(d - eps) > v^2 + 2*B*T*v)"
)

# 2-D point mass with per-axis acceleration. Braking against every moving
# axis is always permitted; any other action must leave room to stop after a
# worst-case cycle in which the full acceleration magnitude points at the hazard.
CIRCLE_STOP_2D = (
    "((vx > 0 -> ax = -B) && (vx < 0 -> ax = B) && (vx = 0 -> ax = 0)"
    " && (vy > 0 -> ay = -B) && (vy < 0 -> ay = B) && (vy = 0 -> ay = 0))"
    " || 2*B*(d - eps - r) > (v + a*T)^2 + 2*B*(v*T + 0.5*a*T^2)"
)

# Grid moves: standing still is always permitted; a move is rejected when its
# destination lies within eps (Chebyshev) of a perceived O.
XO_GRID = "(mx = 0 && my = 0) || dx > eps || dx < -eps || dy > eps || dy < -eps"

XO_MOVES = ((0.0, 0.0), (0.0, -1.0), (0.0, 1.0), (-1.0, 0.0), (1.0, 0.0))


def builtin_monitors() -> dict[str, MonitorSpec]:
    return {
        "acc_sb": MonitorSpec(
            "acc_sb", parse_formula(ACC_SB),
            params={"A": 2.0, "B": 2.0, "T": 1.0, "eps": 4.0, "length": 6.0},
            bindings={"d": "gap_x", "v": "vx", "a": "ax"},
        ),
        "circle_stop_2d": MonitorSpec(
            "circle_stop_2d", parse_formula(CIRCLE_STOP_2D),
            params={"A": 0.5, "B": 0.5, "T": 1.0, "eps": 1.0, "r": 1.5},
            bindings={"d": "dist", "v": "speed", "a": "accel", "vx": "vx", "vy": "vy", "ax": "ax", "ay": "ay"},
        ),
        "xo_grid": MonitorSpec(
            "xo_grid", parse_formula(XO_GRID),
            params={"eps": 0.5},
            bindings={"dx": "dx", "dy": "dy", "mx": "ax", "my": "ay"},
            moves=XO_MOVES,
        ),
    }


def monitor_from_config(cfg: Mapping) -> MonitorSpec:
    """Build a monitor from ``{"builtin": name, "params": {...}}`` or an inline
    ``{"name", "formula", "bindings", "params", ...}`` mapping."""
    if "builtin" in cfg:
        spec = builtin_monitors()[cfg["builtin"]]
        return spec.with_params(**cfg.get("params", {}))
    moves = cfg.get("moves")
    return MonitorSpec(
        cfg.get("name", "inline"), parse_formula(cfg["formula"]),
        params=cfg.get("params", {}), bindings=cfg["bindings"],
        agent_class=cfg.get("agent_class", 0), hazard_class=cfg.get("hazard_class", 1),
        moves=tuple(tuple(m) for m in moves) if moves else None,
    )
