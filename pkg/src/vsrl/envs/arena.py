"""Point-mass arenas: GoalFinding (reach the goal, avoid hazards) and PointMesses
(clean messes; striking a hazard spills new ones instead of ending the episode)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from vsrl.core import AffineMap, ContinuousAction, ContractError, Env, EnvInfo, SymbolicState
from vsrl.envs import sprites
from vsrl.envs._kin import advance_axis
from vsrl.monitor.plant import PlantModel

AGENT, HAZARD, GOAL, MESS = 0, 1, 2, 3
PIXEL_TOL = 2.0


@dataclass(frozen=True)
class GfConfig:
    arena: float = 16.0
    n_hazards: int = 4
    hazard_r: float = 1.0
    goal_r: float = 1.0
    agent_r: float = 0.5
    A: float = 0.5
    B: float = 0.5
    T: float = 1.0
    n_actions: int = 5  # per axis
    px_per_unit: int = 4
    hazard_sep: float = 3.0
    goal_reward: float = 1.0
    step_reward: float = -0.001
    max_steps: int = 40
    substeps: int = 10

    def validate(self) -> None:
        if min(self.A, self.B, self.T, self.arena) <= 0:
            raise ContractError("A, B, T and arena must be positive")
        if self.n_actions < 3 or self.n_actions % 2 == 0:
            raise ContractError("n_actions must be odd (the grid must contain -B, 0 and A)")
        if self.A != self.B:
            raise ContractError("per-axis braking needs +-B in the grid, so A must equal B")
        if self.n_hazards < 0 or self.max_steps < 1:
            raise ContractError("n_hazards >= 0 and max_steps >= 1 required")
        lo, hi = self.hazard_box
        if self.n_hazards and hi <= lo:
            raise ContractError("arena too small for hazards")
        # densest packing bound for the requested hazard separation
        area = max(hi - lo, 0.0) + self.hazard_sep
        if self.n_hazards * (self.hazard_sep ** 2) * 0.5 > area * area:
            raise ContractError("hazards too dense to satisfy init")

    @property
    def agent_box(self) -> tuple[float, float]:
        # keeps the whole agent sprite inside the frame
        return self.agent_r, self.arena - self.agent_r - 1.0 / self.px_per_unit

    @property
    def hazard_box(self) -> tuple[float, float]:
        # hazards sit clear of the walls, so being pinned against a wall is always collision-free
        clear = self.hazard_r + self.agent_r + 1.0
        lo, hi = self.agent_box
        return lo + clear, hi - clear


@dataclass(frozen=True)
class PmConfig(GfConfig):
    n_mess0: int = 2
    max_mess: int = 3
    mess_r: float = 0.5
    mess_reward: float = 1.0
    spill_radius: tuple[float, float] = (1.5, 3.0)

    def validate(self) -> None:
        super().validate()
        if self.n_mess0 < 0 or self.max_mess < 1:
            raise ContractError("n_mess0 >= 0 and max_mess >= 1 required")


class ArenaEnv(Env):
    """GoalFinding; subclassed by PointMesses."""

    name = "gf"

    def __init__(self, config: GfConfig | None = None, seed: int = 0):
        super().__init__(seed)
        self.config = cfg = config or self.default_config()
        cfg.validate()
        px = int(round(cfg.arena * cfg.px_per_unit))
        eps_world = PIXEL_TOL / cfg.px_per_unit
        grid = np.linspace(-cfg.B, cfg.A, cfg.n_actions)
        self.plant = PlantModel(AGENT, cfg.A, cfg.B, cfg.T, bounds=(cfg.agent_box, cfg.agent_box))
        self.info = EnvInfo(
            name=self.name, classes={"agent": AGENT, "hazard": HAZARD}, agent_class=AGENT,
            hazard_class=HAZARD, max_objects=1 + cfg.n_hazards, frame_shape=(px, px),
            actions=tuple(ContinuousAction((float(ax), float(ay))) for ay in grid for ax in grid),
            accel_bounds=(cfg.B, cfg.A), monitor="circle_stop_2d",
            monitor_params={"A": cfg.A, "B": cfg.B, "T": cfg.T, "eps": 2 * eps_world,
                            "r": cfg.hazard_r + cfg.agent_r},
            pixel_tolerance=PIXEL_TOL, percept_eps=eps_world, plant=self.plant,
        )
        s = cfg.px_per_unit
        self._map = AffineMap(s, s, 0.0, 0.0)
        self._box = cfg.agent_box
        self._sprites = {
            AGENT: sprites.plus(int(2 * cfg.agent_r * s) + 1),
            HAZARD: sprites.ring(int(2 * cfg.hazard_r * s) + 1),
            GOAL: sprites.disc(int(2 * cfg.goal_r * s) + 1),
            MESS: sprites.cross(int(2 * 0.5 * s) + 1, value=0.6),
        }

    @staticmethod
    def default_config() -> GfConfig:
        return GfConfig()

    # -- spawning -----------------------------------------------------------

    def _sample(self, lo: float, hi: float, ok, tries: int = 2000) -> tuple[float, float]:
        for _ in range(tries):
            p = (float(self.rng.uniform(lo, hi)), float(self.rng.uniform(lo, hi)))
            if ok(p):
                return p
        raise ContractError(f"{self.name}: could not place objects so that init holds; config too dense")

    def _reset(self) -> None:
        cfg = self.config
        r = cfg.hazard_r + cfg.agent_r
        margin = self.info.monitor_params["eps"]
        self.hazards: list[tuple[float, float]] = []
        for _ in range(cfg.n_hazards):
            self.hazards.append(self._sample(*cfg.hazard_box, lambda p: all(
                math.dist(p, h) >= cfg.hazard_sep for h in self.hazards)))
        self.goal = self._sample(cfg.goal_r + 0.5, cfg.arena - cfg.goal_r - 0.5, lambda p: all(
            math.dist(p, h) >= cfg.hazard_r + cfg.goal_r + 1.0 for h in self.hazards))
        # init: at rest and farther from every hazard than the monitor margin
        self.pos = self._sample(*cfg.agent_box, lambda p: all(
            math.dist(p, h) > r + margin + 0.5 for h in self.hazards)
            and math.dist(p, self.goal) > cfg.goal_r + cfg.agent_r + 1.0)
        self.vel = (0.0, 0.0)
        self.t = 0
        self._reset_extra()

    def _reset_extra(self) -> None:
        pass

    # -- dynamics -----------------------------------------------------------

    def _move(self, a: tuple[float, float], dt: float) -> tuple[tuple[float, float], tuple[float, float]]:
        lo, hi = self._box
        (x, vx), (y, vy) = advance_axis(self.pos[0], self.vel[0], a[0], dt), advance_axis(
            self.pos[1], self.vel[1], a[1], dt)
        if not lo <= x <= hi:
            x, vx = min(max(x, lo), hi), 0.0
        if not lo <= y <= hi:
            y, vy = min(max(y, lo), hi), 0.0
        return (x, y), (vx, vy)

    def _step(self, action: ContinuousAction) -> tuple[float, bool, bool]:
        cfg = self.config
        a = action.acceleration
        r = cfg.hazard_r + cfg.agent_r
        struck: set[int] = set()
        # the cycle's path stays within this distance of the start (clamping only shortens it)
        reach = math.hypot(*self.vel) * cfg.T + 0.5 * math.hypot(*a) * cfg.T ** 2
        near = [i for i, h in enumerate(self.hazards) if math.dist(self.pos, h) <= r + reach]
        if near:
            for k in range(1, cfg.substeps + 1):
                p, _ = self._move(a, cfg.T * k / cfg.substeps)
                for i in near:
                    h = self.hazards[i]
                    if (p[0] - h[0]) ** 2 + (p[1] - h[1]) ** 2 <= r * r:
                        struck.add(i)
        self.pos, self.vel = self._move(a, cfg.T)
        self.t += 1
        reward, done = cfg.step_reward, False
        if struck:
            r_hit, done = self._strike(sorted(struck))
            reward += r_hit
        r_task, task_done = self._task_events()
        reward += r_task
        done = done or task_done or self.t >= cfg.max_steps
        return reward, done, bool(struck)

    def _strike(self, struck: list[int]) -> tuple[float, bool]:
        return 0.0, True

    def _task_events(self) -> tuple[float, bool]:
        cfg = self.config
        if math.dist(self.pos, self.goal) <= cfg.goal_r + cfg.agent_r:
            return cfg.goal_reward, True
        return 0.0, False

    # -- observation --------------------------------------------------------

    def _snapshot(self):
        return self.pos, tuple(self.hazards), self.goal, self._extra_snapshot()

    def _extra_snapshot(self):
        return ()

    def _render(self, snapshot) -> np.ndarray:
        pos, hazards, goal, messes = snapshot
        frame = sprites.blank(self.info.frame_shape)
        s = self.config.px_per_unit
        sprites.paste(frame, self._sprites[GOAL], s * goal[1], s * goal[0])
        for m in messes:
            sprites.paste(frame, self._sprites[MESS], s * m[1], s * m[0])
        for h in hazards:
            sprites.paste(frame, self._sprites[HAZARD], s * h[1], s * h[0])
        sprites.paste(frame, self._sprites[AGENT], s * pos[1], s * pos[0])
        return frame

    def _symbolic_state(self) -> SymbolicState:
        classes = np.full(1 + len(self.hazards), HAZARD, dtype=np.int64)
        classes[0] = AGENT
        return SymbolicState(classes, np.array([self.pos, *self.hazards]), np.array(self.vel))

    def agent_velocity(self) -> np.ndarray:
        return np.array(self.vel)

    def pixel_map(self) -> AffineMap:
        return self._map

    def task_objects(self) -> dict[str, list[tuple[float, float]]]:
        return {"goal": [self.goal]}

    def templates(self) -> dict[int, np.ndarray]:
        return {AGENT: sprites.template(self._sprites[AGENT]), HAZARD: sprites.template(self._sprites[HAZARD])}


GfEnv = ArenaEnv


class PmEnv(ArenaEnv):
    name = "pm"

    @staticmethod
    def default_config() -> PmConfig:
        return PmConfig()

    def __init__(self, config: PmConfig | None = None, seed: int = 0):
        if config is not None and not isinstance(config, PmConfig):
            raise ContractError("PointMesses needs a PmConfig")
        super().__init__(config, seed)

    def _reset_extra(self) -> None:
        cfg = self.config
        self.messes: list[tuple[float, float]] = []
        for _ in range(cfg.n_mess0):
            self.messes.append(self._sample(1.5, cfg.arena - 1.5, self._mess_ok))

    def _mess_ok(self, p) -> bool:
        cfg = self.config
        return (all(math.dist(p, h) >= cfg.hazard_sep for h in self.hazards)
                and all(math.dist(p, m) >= 1.5 for m in self.messes)
                and math.dist(p, self.pos) > cfg.agent_r + cfg.mess_r + 0.5)

    def _strike(self, struck: list[int]) -> tuple[float, bool]:
        cfg = self.config
        lo, hi = 1.5, cfg.arena - 1.5
        for i in sorted(struck, reverse=True):
            hx, hy = self.hazards.pop(i)
            for _ in range(int(self.rng.integers(1, cfg.max_mess + 1))):
                for _try in range(50):
                    rad = self.rng.uniform(*cfg.spill_radius)
                    ang = self.rng.uniform(0.0, 2 * math.pi)
                    p = (min(max(hx + rad * math.cos(ang), lo), hi), min(max(hy + rad * math.sin(ang), lo), hi))
                    if all(math.dist(p, m) >= 1.5 for m in self.messes) and all(
                            math.dist(p, h) >= cfg.hazard_sep for h in self.hazards):
                        break
                else:
                    # crowded: spill onto the vacated hazard site, which is clear of the other hazards
                    p = (hx, hy)
                self.messes.append(p)
        return 0.0, False

    def _task_events(self) -> tuple[float, bool]:
        cfg = self.config
        reward = 0.0
        reach = cfg.agent_r + cfg.mess_r
        kept = [m for m in self.messes if math.dist(self.pos, m) > reach]
        reward += cfg.mess_reward * (len(self.messes) - len(kept))
        self.messes = kept
        if not self.messes and math.dist(self.pos, self.goal) <= cfg.goal_r + cfg.agent_r:
            return reward + cfg.goal_reward, True
        return reward, False

    def _extra_snapshot(self):
        return tuple(self.messes)

    def task_objects(self) -> dict[str, list[tuple[float, float]]]:
        return {"goal": [self.goal], "mess": list(self.messes)}
