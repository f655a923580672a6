"""Adaptive cruise control: a follower car keeps a target gap behind a randomly driven leader."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vsrl.core import AffineMap, ContinuousAction, ContractError, Env, EnvInfo, SymbolicState
from vsrl.envs import sprites
from vsrl.envs._kin import advance_axis, advance_capped
from vsrl.monitor.plant import PlantModel

FOLLOWER, LEADER = 0, 1
PIXEL_TOL = 2.0  # detector error bound; the camera maps one world unit to one pixel


@dataclass(frozen=True)
class AccConfig:
    A: float = 2.0
    B: float = 2.0
    T: float = 1.0
    n_actions: int = 5
    length: float = 6.0  # collision when centres are this close
    leader_accel: float = 1.0  # leader draws its acceleration from [-leader_accel, leader_accel]
    leader_vmax: float = 8.0
    init_gap: tuple[float, float] = (10.0, 30.0)
    init_speed: float = 6.0
    target_gap: float = 20.0
    view_gap: float = 44.0  # episode ends once the leader drives out of view
    max_steps: int = 40
    frame: tuple[int, int] = (16, 64)
    anchor_col: int = 6
    substeps: int = 16

    def validate(self) -> None:
        if min(self.A, self.B, self.T) <= 0:
            raise ContractError("A, B and T must be positive")
        if self.leader_accel > self.A:
            raise ContractError("leader must not out-accelerate the follower")
        if self.n_actions < 2:
            raise ContractError("need at least two actions")
        lo, hi = self.init_gap
        if not 2 * PIXEL_TOL < lo <= hi <= self.view_gap:
            raise ContractError("init_gap must lie in (perception margin, view_gap]")
        # the leader must be visible in every non-terminal frame
        if self.anchor_col + self.length + self.view_gap + 3 > self.frame[1] - 1:
            raise ContractError("frame too narrow for view_gap")
        if self.max_steps < 1:
            raise ContractError("max_steps must be positive")


class AccEnv(Env):
    def __init__(self, config: AccConfig | None = None, seed: int = 0):
        super().__init__(seed)
        self.config = cfg = config or AccConfig()
        cfg.validate()
        tol = PIXEL_TOL
        grid = np.linspace(-cfg.B, cfg.A, cfg.n_actions)
        self.plant = PlantModel(FOLLOWER, cfg.A, cfg.B, cfg.T, nonnegative_velocity=True,
                                dynamic_classes={LEADER: cfg.leader_vmax})
        self.info = EnvInfo(
            name="acc", classes={"follower": FOLLOWER, "leader": LEADER}, agent_class=FOLLOWER,
            hazard_class=LEADER, max_objects=2, frame_shape=cfg.frame,
            actions=tuple(ContinuousAction((float(a),)) for a in grid), accel_bounds=(cfg.B, cfg.A),
            monitor="acc_sb",
            monitor_params={"A": cfg.A, "B": cfg.B, "T": cfg.T, "eps": 2 * tol, "length": cfg.length},
            pixel_tolerance=tol, percept_eps=tol, plant=self.plant,
        )
        self._sprites = {"follower": sprites.striped_car(5), "leader": sprites.striped_car(5, 0.8, vertical=True)}

    def _reset(self) -> None:
        cfg = self.config
        eps = self.info.monitor_params["eps"]
        gap = self.rng.uniform(*cfg.init_gap)
        # init: braking from here stops short of the leader's current position by more than eps
        vmax = min(cfg.init_speed, 0.9 * np.sqrt(2 * cfg.B * (gap - eps)))
        self.xf, self.vf = 0.0, float(self.rng.uniform(0.0, vmax))
        self.xl, self.vl = gap + cfg.length, float(self.rng.uniform(0.0, cfg.init_speed))
        self.t = 0

    @property
    def gap(self) -> float:
        return self.xl - self.xf - self.config.length

    def _step(self, action: ContinuousAction) -> tuple[float, bool, bool]:
        cfg = self.config
        a = float(action.acceleration[0])
        if self.vf <= 0.0 and a < 0.0:
            a = 0.0
        al = float(self.rng.uniform(-cfg.leader_accel, cfg.leader_accel))
        violated = False
        for k in range(1, cfg.substeps + 1):
            dt = cfg.T * k / cfg.substeps
            xf, _ = advance_axis(self.xf, self.vf, a, dt)
            xl, _ = advance_capped(self.xl, self.vl, al, dt, cfg.leader_vmax)
            if xl - xf - cfg.length <= 0.0:
                violated = True
                break
        self.xf, self.vf = advance_axis(self.xf, self.vf, a, cfg.T)
        self.xl, self.vl = advance_capped(self.xl, self.vl, al, cfg.T, cfg.leader_vmax)
        self.t += 1
        gap = self.gap
        reward = min(1.0, max(0.0, 1.0 - abs(gap - cfg.target_gap) / cfg.target_gap))
        done = violated or gap > cfg.view_gap or self.t >= cfg.max_steps
        return reward, done, violated

    def _snapshot(self):
        return self.xf, self.xl

    def _render(self, snapshot) -> np.ndarray:
        xf, xl = snapshot
        m = self._pixel_map(xf)
        frame = sprites.blank(self.info.frame_shape)
        sprites.paste(frame, self._sprites["leader"], m.cy, m.sx * xl + m.cx)
        sprites.paste(frame, self._sprites["follower"], m.cy, m.sx * xf + m.cx)
        return frame

    def _pixel_map(self, xf: float) -> AffineMap:
        # camera rides with the follower
        return AffineMap(1.0, 1.0, self.config.anchor_col - xf, self.config.frame[0] // 2)

    def pixel_map(self) -> AffineMap:
        return self._pixel_map(self.xf)

    def _symbolic_state(self) -> SymbolicState:
        return SymbolicState.from_objects([(FOLLOWER, self.xf, 0.0), (LEADER, self.xl, 0.0)],
                                          agent_velocity=(self.vf, 0.0))

    def agent_velocity(self) -> np.ndarray:
        return np.array([self.vf, 0.0])

    def task_objects(self) -> dict[str, list[tuple[float, float]]]:
        return {}

    def templates(self) -> dict[int, np.ndarray]:
        return {FOLLOWER: sprites.template(self._sprites["follower"]),
                LEADER: sprites.template(self._sprites["leader"])}
