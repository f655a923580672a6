"""Desk-scale learners: tabular Q-learning on coarse symbolic features, and a
linear softmax policy trained by REINFORCE on downsampled pixels.

Both act through the same ShieldedEnv as any other policy and only see the
attempted action, the observation and the reward; whether the shield replaced
the action is invisible to them.
"""

from __future__ import annotations

import csv
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median
from typing import Callable, Hashable

import numpy as np

from vsrl.core import Action, Env, Observation
from vsrl.shield import ShieldedEnv, run_episode


@dataclass(frozen=True)
class PpoDefaults:
    """Reference PPO settings (not executed here; kept for configuration parity)."""

    learning_rate: float = 0.001  # times alpha, annealed 1 -> 0
    epochs: int = 4
    actors: int = 32
    horizon: int = 64
    minibatch: int = 2048
    gamma: float = 0.99
    gae_lambda: float = 0.98
    clip: float = 0.1  # times alpha
    value_coeff: float = 1.0
    entropy_coeff: float = 0.01
    grad_norm_clip: float = 1.0


def _sign(x: float, dead: float = 0.0) -> int:
    return 0 if abs(x) <= dead else (1 if x > 0 else -1)


def _bin(x: float, edges: tuple[float, ...]) -> int:
    for i, e in enumerate(edges):
        if x < e:
            return i
    return len(edges)


def xo_features(env: Env, memory: dict) -> Hashable:
    st = env.true_symbolic_state()
    ax, ay = st.positions[0].tolist()
    os_ = {tuple(p) for p in st.positions[1:].tolist()}
    xs = env.task_objects()["x"]
    if xs:
        tx, ty = min(xs, key=lambda p: abs(p[0] - ax) + abs(p[1] - ay))
        target = (_sign(tx - ax), _sign(ty - ay), min(int(abs(tx - ax) + abs(ty - ay)), 4))
    else:
        target = (0, 0, 0)
    blocked = tuple((ax + dx, ay + dy) in os_ for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0)))
    return target + blocked


def acc_features(env: Env, memory: dict) -> Hashable:
    st = env.true_symbolic_state()
    gap = float(st.positions[1, 0] - st.positions[0, 0]) - env.config.length
    trend = _sign(gap - memory.get("gap", gap), 0.25)
    memory["gap"] = gap
    return min(int(gap // 3), 15), min(int(st.agent_velocity[0]), 9), trend


_VEL_EDGES = (-0.3, -0.05, 0.05, 0.3)


def arena_features(env: Env, memory: dict) -> Hashable:
    st = env.true_symbolic_state()
    px, py = st.positions[0].tolist()
    vx, vy = st.agent_velocity.tolist()
    tasks = env.task_objects()
    targets = tasks.get("mess") or tasks["goal"]
    tx, ty = min(targets, key=lambda p: math.dist(p, (px, py)))
    rel = tuple((_sign(d, 0.5), abs(d) > 3.0) for d in (tx - px, ty - py))
    hazard = -1
    if len(st) > 1:
        h = st.positions[1:]
        d = np.hypot(h[:, 0] - px, h[:, 1] - py)
        i = int(d.argmin())
        if d[i] < 4.0:
            hazard = int(((math.atan2(h[i, 1] - py, h[i, 0] - px) + math.pi) / (2 * math.pi) * 8) % 8)
    return rel, _bin(vx, _VEL_EDGES), _bin(vy, _VEL_EDGES), hazard


FEATURES: dict[str, Callable[[Env, dict], Hashable]] = {
    "xo": xo_features, "acc": acc_features, "gf": arena_features, "pm": arena_features,
}


class QLearner:
    """Epsilon-greedy tabular Q-learning over ``FEATURES[env]``.

    Features are read from the simulator (a stand-in for a learned encoder) and
    never include the safety flag or the shield's decisions.
    """

    def __init__(self, env: Env, seed: int = 0, lr: float = 0.1, gamma: float = 0.99,
                 epsilon_start: float = 1.0, epsilon_end: float = 0.05, decay_fraction: float = 0.5):
        self.env = env
        self.actions = env.info.actions
        self.features = FEATURES[env.info.name]
        self.lr, self.gamma = lr, gamma
        self.epsilon_start, self.epsilon_end, self.decay_fraction = epsilon_start, epsilon_end, decay_fraction
        self.epsilon = epsilon_start
        self.q: dict[Hashable, list[float]] = {}
        self.rng = random.Random(seed)
        self.frozen = False
        self._memory: dict = {}
        self._key: Hashable | None = None
        self._index = {a: i for i, a in enumerate(self.actions)}

    def reseed(self, seed: int) -> None:
        self.rng = random.Random(seed)

    def begin_episode(self, episode: int, total: int) -> None:
        horizon = max(1.0, self.decay_fraction * total)
        frac = min(1.0, episode / horizon)
        self.epsilon = self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
        self._memory = {}
        self._key = None

    def _row(self, key: Hashable) -> list[float]:
        row = self.q.get(key)
        if row is None:
            row = self.q[key] = [0.0] * len(self.actions)
        return row

    def __call__(self, obs: Observation) -> Action:
        key = self._key if self._key is not None else self.features(self.env, self._memory)
        self._key = key
        if not self.frozen and self.rng.random() < self.epsilon:
            return self.actions[self.rng.randrange(len(self.actions))]
        row = self._row(key)
        return self.actions[row.index(max(row))]

    def observe(self, action: Action, reward: float, obs: Observation, done: bool) -> None:
        key = self._key
        nxt = None if done else self.features(self.env, self._memory)
        self._key = nxt
        if self.frozen:
            return
        row = self._row(key)
        a = self._index[action]
        target = reward if done else reward + self.gamma * max(self._row(nxt))
        row[a] += self.lr * (target - row[a])


def downsample(frame: np.ndarray, factor: int) -> np.ndarray:
    h, w = frame.shape
    h, w = h - h % factor, w - w % factor
    return frame[:h, :w].reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


class LinearPolicy:
    """Softmax over a linear function of block-averaged pixels (plus bias),
    trained with REINFORCE and a running-mean baseline."""

    def __init__(self, env: Env, seed: int = 0, lr: float = 0.01, gamma: float = 0.99,
                 temperature: float = 1.0, factor: int = 4):
        self.env = env
        self.actions = env.info.actions
        h, w = env.info.frame_shape
        self.factor = factor
        self.n_features = (h // factor) * (w // factor) + 1
        self.W = np.zeros((self.n_features, len(self.actions)))
        self.lr, self.gamma, self.temperature = lr, gamma, temperature
        self.rng = np.random.default_rng(seed)
        self.baseline = 0.0
        self.frozen = False
        self.epsilon = 0.0
        self._trace: list[tuple[np.ndarray, int, np.ndarray]] = []
        self._rewards: list[float] = []

    def reseed(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def begin_episode(self, episode: int, total: int) -> None:
        self._trace, self._rewards = [], []

    def probs(self, x: np.ndarray) -> np.ndarray:
        z = x @ self.W / self.temperature
        z = np.exp(z - z.max())
        return z / z.sum()

    def __call__(self, obs: Observation) -> Action:
        x = np.append(downsample(obs.frame, self.factor).ravel(), 1.0)
        p = self.probs(x)
        i = int(p.argmax()) if self.frozen else int(self.rng.choice(len(p), p=p))
        self._trace.append((x, i, p))
        return self.actions[i]

    def observe(self, action: Action, reward: float, obs: Observation, done: bool) -> None:
        if self.frozen:
            return
        self._rewards.append(reward)
        if done:
            self._update()

    def end_episode(self) -> None:
        if not self.frozen and self._rewards:
            self._update()

    def _update(self) -> None:
        g, returns = 0.0, []
        for r in reversed(self._rewards):
            g = r + self.gamma * g
            returns.append(g)
        returns.reverse()
        for (x, i, p), G in zip(self._trace, returns):
            grad = -p
            grad[i] += 1.0
            self.W += self.lr * (G - self.baseline) * np.outer(x, grad) / self.temperature
        self.baseline += 0.05 * (returns[0] - self.baseline)
        self._trace, self._rewards = [], []


LEARNERS = {"q": QLearner, "linear": LinearPolicy}

CURVE_COLUMNS = ("episode", "return", "steps", "violations", "interventions", "epsilon_greedy", "seed")


@dataclass
class TrainResult:
    rows: list[dict] = field(default_factory=list)
    agent: object = None

    @property
    def violations(self) -> int:
        return sum(r["violations"] for r in self.rows)


def train(agent, senv: ShieldedEnv, episodes: int, seed: int = 0, max_steps: int | None = None,
          csv_path: str | Path | None = None) -> TrainResult:
    """Run ``episodes`` learning episodes; one CSV row per episode.

    Reproducible for a fixed seed in this single-process loop.
    """
    if hasattr(agent, "reseed"):
        agent.reseed(seed)
    observe = getattr(agent, "observe", None)
    hook = (lambda att, exe, res: observe(att, res.reward, res.observation, res.done)) if observe else None
    result = TrainResult(agent=agent)
    for ep in range(episodes):
        if hasattr(agent, "begin_episode"):
            agent.begin_episode(ep, episodes)
        e = run_episode(agent, senv, max_steps, on_step=hook)
        if hasattr(agent, "end_episode"):
            agent.end_episode()
        result.rows.append({"episode": ep, "return": e.ret, "steps": e.steps, "violations": e.violations,
                            "interventions": e.interventions,
                            "epsilon_greedy": getattr(agent, "epsilon", 1.0), "seed": seed})
    if csv_path is not None:
        write_curve_csv(csv_path, result.rows)
    return result


def write_curve_csv(path: str | Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(CURVE_COLUMNS), extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)


@dataclass(frozen=True)
class EvalResult:
    median_return: float
    violations: int
    interventions: int
    replicate_returns: tuple[float, ...]


def evaluate(policy, senv: ShieldedEnv, episodes: int, replicates: int = 4,
             max_steps: int | None = None) -> EvalResult:
    """Frozen-policy evaluation: mean return per replicate, median across replicates."""
    if replicates < 4:
        raise ValueError("evaluation needs at least 4 replicates")
    if episodes < replicates:
        raise ValueError("need at least one episode per replicate")
    was = getattr(policy, "frozen", None)
    if was is not None:
        policy.frozen = True
    try:
        per = [episodes // replicates + (i < episodes % replicates) for i in range(replicates)]
        means, viol, interv = [], 0, 0
        for n in per:
            total = 0.0
            for _ in range(n):
                if hasattr(policy, "begin_episode"):
                    policy.begin_episode(0, 1)
                e = run_episode(policy, senv, max_steps, on_step=_frozen_hook(policy))
                total += e.ret
                viol += e.violations
                interv += e.interventions
            means.append(total / n)
    finally:
        if was is not None:
            policy.frozen = was
    return EvalResult(float(median(means)), viol, interv, tuple(means))


def _frozen_hook(policy):
    observe = getattr(policy, "observe", None)
    if observe is None:
        return None
    # still advances feature memory (e.g. the ACC gap trend); frozen learners do not update
    return lambda att, exe, res: observe(att, res.reward, res.observation, res.done)
