"""Shared domain types: symbolic states, actions, observations and the environment base class."""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np


class ContractError(ValueError):
    """An operation was called outside its contract (bad action, step before reset, ...)."""


@dataclass(frozen=True)
class DiscreteAction:
    index: int


@dataclass(frozen=True)
class ContinuousAction:
    acceleration: tuple[float, ...]

    @property
    def magnitude(self) -> float:
        return float(np.hypot(*self.acceleration)) if len(self.acceleration) > 1 else abs(self.acceleration[0])


Action = Union[DiscreteAction, ContinuousAction]


class Observation:
    """A grayscale frame in [0, 1], rendered lazily.

    Most rollouts never look at pixels (oracle extractor, tabular learners), so the
    environment hands out a snapshot-bound render callback instead of a finished
    image. The frame is produced on first access and cached.
    """

    __slots__ = ("_render", "_frame")

    def __init__(self, frame: np.ndarray | Callable[[], np.ndarray]):
        if callable(frame):
            self._render = frame
            self._frame = None
        else:
            self._render = None
            self._frame = np.clip(np.asarray(frame, dtype=np.float64), 0.0, 1.0)

    @property
    def frame(self) -> np.ndarray:
        if self._frame is None:
            self._frame = np.clip(self._render(), 0.0, 1.0)
            self._render = None
        return self._frame

    @property
    def shape(self) -> tuple[int, int]:
        return self.frame.shape


@dataclass(frozen=True, eq=False)
class SymbolicState:
    """Positions of safety-relevant objects plus proprioceptive agent velocity.

    ``classes`` has shape (n,), ``positions`` shape (n, 2) in world units.
    """

    classes: np.ndarray
    positions: np.ndarray
    agent_velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    time_in_cycle: float = 0.0

    @classmethod
    def from_objects(cls, objects: Sequence[tuple[int, float, float]], agent_velocity=(0.0, 0.0),
                     time_in_cycle: float = 0.0) -> "SymbolicState":
        classes = np.array([o[0] for o in objects], dtype=np.int64)
        positions = np.array([[o[1], o[2]] for o in objects], dtype=np.float64).reshape(-1, 2)
        return cls(classes, positions, np.asarray(agent_velocity, dtype=np.float64), float(time_in_cycle))

    def objects(self) -> list[tuple[int, float, float]]:
        return [(int(k), float(p[0]), float(p[1])) for k, p in zip(self.classes, self.positions)]

    def of_class(self, class_id: int) -> np.ndarray:
        return self.positions[self.classes == class_id]

    def with_positions(self, positions: np.ndarray) -> "SymbolicState":
        return SymbolicState(self.classes, positions, self.agent_velocity, self.time_in_cycle)

    def __len__(self) -> int:
        return len(self.classes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymbolicState):
            return NotImplemented
        return (np.array_equal(self.classes, other.classes)
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.agent_velocity, other.agent_velocity)
                and self.time_in_cycle == other.time_in_cycle)

    def __repr__(self) -> str:
        return f"SymbolicState(objects={self.objects()}, v={self.agent_velocity.tolist()})"


@dataclass(frozen=True)
class EnvStepResult:
    observation: Observation
    reward: float
    done: bool
    # Ground truth from the simulator. Evaluation harness only; never fed to learners or the shield.
    violated: bool = False


@dataclass(frozen=True)
class AffineMap:
    """World (x, y) to pixel (col, row): col = sx*x + cx, row = sy*y + cy."""

    sx: float
    sy: float
    cx: float = 0.0
    cy: float = 0.0

    def to_pixel(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64)
        return np.stack([self.sx * xy[..., 0] + self.cx, self.sy * xy[..., 1] + self.cy], axis=-1)

    def to_world(self, colrow: np.ndarray) -> np.ndarray:
        colrow = np.asarray(colrow, dtype=np.float64)
        return np.stack([(colrow[..., 0] - self.cx) / self.sx, (colrow[..., 1] - self.cy) / self.sy], axis=-1)

    def world_length(self, pixels: float) -> float:
        """Largest world distance a pixel error of ``pixels`` can correspond to."""
        return pixels / min(abs(self.sx), abs(self.sy))


@dataclass(frozen=True)
class EnvInfo:
    name: str
    classes: dict[str, int]
    agent_class: int
    hazard_class: int
    max_objects: int
    frame_shape: tuple[int, int]
    actions: tuple[Action, ...]
    accel_bounds: tuple[float, float] | None  # (B, A): -B <= a <= A per axis
    monitor: str
    monitor_params: dict[str, float]
    pixel_tolerance: float = 2.0
    percept_eps: float = 0.0  # world-unit image of pixel_tolerance
    plant: object | None = None

    @property
    def safety_classes(self) -> frozenset[int]:
        return frozenset(self.classes.values())


def validate_state(info: EnvInfo, state: SymbolicState) -> None:
    unknown = set(state.classes.tolist()) - info.safety_classes
    if unknown:
        raise ContractError(f"{info.name}: undeclared class ids {sorted(unknown)}")
    if len(state) > info.max_objects:
        raise ContractError(f"{info.name}: {len(state)} objects exceeds bound {info.max_objects}")


class Env(abc.ABC):
    """Seeded, single-owner environment rendering grayscale frames."""

    info: EnvInfo

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self._active = False
        self._sym: SymbolicState | None = None

    def reset(self) -> Observation:
        self._sym = None
        self._reset()
        self._active = True
        return self.observe()

    def step(self, action: Action) -> EnvStepResult:
        if not self._active:
            raise ContractError("step() called before reset() or after the episode ended")
        self.check_action(action)
        self._sym = None
        reward, done, violated = self._step(action)
        if done:
            self._active = False
        return EnvStepResult(self.observe(), float(reward), bool(done), bool(violated))

    def check_action(self, action: Action) -> None:
        grid = self.info.actions
        if isinstance(action, DiscreteAction):
            if not any(isinstance(g, DiscreteAction) for g in grid) or not 0 <= action.index < len(grid):
                raise ContractError(f"discrete action {action.index} outside 0..{len(grid) - 1}")
            return
        if not isinstance(action, ContinuousAction) or self.info.accel_bounds is None:
            raise ContractError(f"{self.info.name} does not accept {action!r}")
        lo, hi = -self.info.accel_bounds[0], self.info.accel_bounds[1]
        acc = action.acceleration
        if len(acc) != len(grid[0].acceleration):
            raise ContractError(f"expected {len(grid[0].acceleration)} acceleration components, got {len(acc)}")
        if any(not (lo - 1e-12 <= a <= hi + 1e-12) for a in acc):
            raise ContractError(f"acceleration {acc} outside [{lo}, {hi}]")

    def observe(self) -> Observation:
        snapshot = self._snapshot()
        return Observation(lambda: self._render(snapshot))

    def render(self) -> np.ndarray:
        return self._render(self._snapshot())

    @property
    def active(self) -> bool:
        return self._active

    @abc.abstractmethod
    def _reset(self) -> None: ...

    @abc.abstractmethod
    def _step(self, action: Action) -> tuple[float, bool, bool]: ...

    @abc.abstractmethod
    def _snapshot(self) -> object:
        """Immutable copy of whatever the renderer needs."""

    @abc.abstractmethod
    def _render(self, snapshot: object) -> np.ndarray: ...

    def true_symbolic_state(self) -> SymbolicState:
        """Simulator ground truth; for tests and the noisy oracle only."""
        if self._sym is None:
            self._sym = self._symbolic_state()
        return self._sym

    @abc.abstractmethod
    def _symbolic_state(self) -> SymbolicState: ...

    @abc.abstractmethod
    def pixel_map(self) -> AffineMap:
        """Current world-to-pixel map (camera pose is proprioceptive)."""

    def agent_velocity(self) -> np.ndarray:
        """Proprioceptive velocity; extractors combine it with perceived positions."""
        return self.true_symbolic_state().agent_velocity


def write_pgm(path: str | Path, frame: np.ndarray) -> None:
    """Binary PGM (P5, maxval 255)."""
    img = np.clip(np.rint(np.asarray(frame, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    if img.ndim != 2:
        raise ContractError("PGM frames must be 2-D")
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ContractError(f"{path}: not a binary PGM")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pixels = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)
    return pixels.astype(np.float64) / maxval
