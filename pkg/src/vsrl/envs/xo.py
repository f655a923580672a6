"""XO gridworld: collect every X, never step on an O."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vsrl.core import AffineMap, ContractError, DiscreteAction, Env, EnvInfo, SymbolicState
from vsrl.envs import sprites

AGENT, O_CLASS = 0, 1
# stay, up, down, left, right; y grows downwards like image rows
MOVES = ((0, 0), (0, -1), (0, 1), (-1, 0), (1, 0))


@dataclass(frozen=True)
class XoConfig:
    grid_size: int = 10
    n_x: int = 3
    n_o: int = 4
    collect_x: float = 1.0
    hit_o: float = -1.0
    step: float = -0.01
    max_steps: int = 40
    cell_px: int = 8

    def validate(self) -> None:
        if self.grid_size < 3 or self.cell_px < 8:
            raise ContractError("XO needs grid_size >= 3 and cell_px >= 8")
        if min(self.n_x, self.n_o) < 0 or self.n_x < 1:
            raise ContractError("XO needs n_x >= 1 and n_o >= 0")
        # the agent needs a cell with no O in its 3x3 neighbourhood
        if self.n_x + 9 * self.n_o + 1 > self.grid_size ** 2:
            raise ContractError("too many objects for the grid to satisfy init")
        if self.max_steps < 1:
            raise ContractError("max_steps must be positive")


class XoEnv(Env):
    def __init__(self, config: XoConfig | None = None, seed: int = 0):
        super().__init__(seed)
        self.config = cfg = config or XoConfig()
        cfg.validate()
        px = cfg.grid_size * cfg.cell_px
        margin = 2.0 / cfg.cell_px
        self.info = EnvInfo(
            name="xo", classes={"agent": AGENT, "o": O_CLASS}, agent_class=AGENT, hazard_class=O_CLASS,
            max_objects=1 + cfg.n_o, frame_shape=(px, px),
            actions=tuple(DiscreteAction(i) for i in range(len(MOVES))), accel_bounds=None,
            monitor="xo_grid", monitor_params={"eps": 2 * margin},
            pixel_tolerance=2.0, percept_eps=margin,
        )
        self._map = AffineMap(cfg.cell_px, cfg.cell_px, cfg.cell_px / 2, cfg.cell_px / 2)
        self._sprites = {"agent": sprites.plus(5), "o": sprites.ring(7), "x": sprites.cross(7)}

    def _reset(self) -> None:
        n = self.config.grid_size
        while True:
            cells = self.rng.permutation(n * n)
            os_ = [divmod(int(c), n)[::-1] for c in cells[:self.config.n_o]]
            rest = [divmod(int(c), n)[::-1] for c in cells[self.config.n_o:]]
            free = [c for c in rest if all(max(abs(c[0] - o[0]), abs(c[1] - o[1])) > 1 for o in os_)]
            if free:
                break
        self.agent = free[0]
        self.os = set(os_)
        self.xs = set([c for c in rest if c != self.agent][:self.config.n_x])
        self.t = 0

    def _step(self, action: DiscreteAction) -> tuple[float, bool, bool]:
        cfg = self.config
        dx, dy = MOVES[action.index]
        x, y = self.agent[0] + dx, self.agent[1] + dy
        if 0 <= x < cfg.grid_size and 0 <= y < cfg.grid_size:
            self.agent = (x, y)
        reward, violated = cfg.step, False
        if self.agent in self.xs:
            self.xs.discard(self.agent)
            reward += cfg.collect_x
        if self.agent in self.os:
            self.os.discard(self.agent)
            reward += cfg.hit_o
            violated = True
        self.t += 1
        return reward, not self.xs or self.t >= cfg.max_steps, violated

    def _snapshot(self):
        return self.agent, tuple(sorted(self.os)), tuple(sorted(self.xs))

    def _render(self, snapshot) -> np.ndarray:
        agent, os_, xs = snapshot
        frame = sprites.blank(self.info.frame_shape)
        m = self._map
        for x, y in xs:
            sprites.paste(frame, self._sprites["x"], m.sy * y + m.cy, m.sx * x + m.cx)
        for x, y in os_:
            sprites.paste(frame, self._sprites["o"], m.sy * y + m.cy, m.sx * x + m.cx)
        sprites.paste(frame, self._sprites["agent"], m.sy * agent[1] + m.cy, m.sx * agent[0] + m.cx)
        return frame

    def _symbolic_state(self) -> SymbolicState:
        objs = [(AGENT, float(self.agent[0]), float(self.agent[1]))]
        objs += [(O_CLASS, float(x), float(y)) for x, y in sorted(self.os)]
        return SymbolicState.from_objects(objs)

    def agent_velocity(self) -> np.ndarray:
        return np.zeros(2)

    def pixel_map(self) -> AffineMap:
        return self._map

    def task_objects(self) -> dict[str, list[tuple[float, float]]]:
        """Non-safety objects (reward-relevant only)."""
        return {"x": [(float(x), float(y)) for x, y in sorted(self.xs)]}

    def templates(self) -> dict[int, np.ndarray]:
        return {AGENT: sprites.template(self._sprites["agent"]), O_CLASS: sprites.template(self._sprites["o"])}
