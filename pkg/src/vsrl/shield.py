"""Action shielding: execute the attempted action if the monitor accepts it on
the extracted symbolic state, otherwise a uniformly drawn monitor-safe one."""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from vsrl.core import Action, Env, EnvStepResult, Observation, SymbolicState
from vsrl.monitor.monitors import MonitorSpec, builtin_monitors
from vsrl.monitor.plant import check_model_monitor

Policy = Callable[[Observation], Action]
Extractor = Callable[[Env, Observation], SymbolicState]


class EmptySafeSet(RuntimeError):
    """No candidate action satisfies the monitor: the env/monitor pair breaks the
    guarantee that some safe action always exists."""

    def __init__(self, state: SymbolicState):
        super().__init__(f"no safe action in {state!r}")
        self.state = state


@dataclass(frozen=True)
class Substitution:
    attempted: Action
    executed: Action
    state: SymbolicState


def env_monitor(env: Env) -> MonitorSpec:
    """The environment's declared monitor with its declared parameters."""
    return builtin_monitors()[env.info.monitor].with_params(**env.info.monitor_params)


class ShieldedEnv:
    """Wraps ``env``; with ``monitor=None`` it is a transparent pass-through that
    still counts steps and violations, which keeps shielded and unshielded
    harness code identical.

    Substitutes are drawn from a private RNG stream so a policy that never
    proposes unsafe actions sees exactly the unshielded trajectory. Counters
    are for the harness; the learner only ever receives observation and reward.
    """

    def __init__(self, env: Env, monitor: MonitorSpec | None, extractor: Extractor | None = None,
                 actions: Sequence[Action] | None = None, seed: int = 0, model_tol: float | None = None):
        if monitor is not None and extractor is None:
            raise ValueError("a shielded environment needs an extractor")
        self.env = env
        self.monitor = monitor
        self.extractor = extractor
        self.actions = tuple(actions if actions is not None else env.info.actions)
        self.rng = random.Random(seed)
        self.model_tol = model_tol
        self.rejection_tries = 4
        self.steps = 0
        self.interventions = 0
        self.violations = 0
        self.model_mismatches = 0
        self.last: Substitution | None = None
        self._obs: Observation | None = None

    @property
    def info(self):
        return self.env.info

    @property
    def shielded(self) -> bool:
        return self.monitor is not None

    def reset(self) -> Observation:
        self._obs = self.env.reset()
        self.last = None
        return self._obs

    def safe_actions(self, state: SymbolicState) -> list[Action]:
        mask = self.monitor.allowed(state, self.actions)
        return [a for a, ok in zip(self.actions, mask) if ok]

    def _substitute(self, state: SymbolicState) -> Action:
        """Uniform draw from the safe set.

        A few rounds of rejection sampling (uniform over the safe set whenever
        it succeeds) avoid building the whole set in the common case; otherwise
        the set is enumerated and drawn from directly, also uniformly.
        """
        n = len(self.actions)
        ok = self.monitor.bind(state)
        for _ in range(self.rejection_tries):
            a = self.actions[self.rng.randrange(n)]
            if ok(a):
                return a
        safe = self.safe_actions(state)
        if not safe:
            raise EmptySafeSet(state)
        return safe[self.rng.randrange(len(safe))]

    def step(self, action: Action) -> EnvStepResult:
        executed = action
        state = None
        if self.monitor is not None:
            state = self.extractor(self.env, self._obs)
            if not self.monitor.check(state, action):
                executed = self._substitute(state)
                self.interventions += 1
            self.last = Substitution(action, executed, state)
        result = self.env.step(executed)
        self.steps += 1
        self.violations += result.violated
        if self.model_tol is not None and self.env.info.plant is not None and not result.done:
            before = state if state is not None else self.extractor(self.env, self._obs)
            after = self.extractor(self.env, result.observation)
            if not check_model_monitor(self.env.info.plant, before, executed, after, self.model_tol):
                self.model_mismatches += 1
        self._obs = result.observation
        return result


class RandomPolicy:
    """Uniform over a fixed action list."""

    def __init__(self, actions: Sequence[Action], seed: int = 0):
        self.actions = tuple(actions)
        self.rng = random.Random(seed)

    def __call__(self, obs: Observation) -> Action:
        return self.actions[self.rng.randrange(len(self.actions))]


@dataclass
class Episode:
    ret: float = 0.0
    steps: int = 0
    interventions: int = 0
    violations: int = 0
    trajectory: list[tuple[Observation, Action, Action, float]] = field(default_factory=list)

    def metrics(self) -> dict[str, float]:
        return {"return": self.ret, "steps": self.steps, "interventions": self.interventions,
                "violations": self.violations}


def run_episode(policy: Policy, senv: ShieldedEnv, max_steps: int | None = None, record: bool = False,
                on_step: Callable[[Action, Action, EnvStepResult], None] | None = None) -> Episode:
    """Roll out one episode; ``max_steps`` = 0 returns an empty episode without resetting."""
    ep = Episode()
    if max_steps == 0:
        return ep
    obs = senv.reset()
    i0, v0 = senv.interventions, senv.violations
    done = False
    while not done and (max_steps is None or ep.steps < max_steps):
        attempted = policy(obs)
        result = senv.step(attempted)
        executed = senv.last.executed if senv.shielded else attempted
        if record:
            ep.trajectory.append((obs, attempted, executed, result.reward))
        if on_step is not None:
            on_step(attempted, executed, result)
        ep.ret += result.reward
        ep.steps += 1
        obs, done = result.observation, result.done
    ep.interventions = senv.interventions - i0
    ep.violations = senv.violations - v0
    return ep


METRIC_COLUMNS = ("episode", "return", "steps", "interventions", "violations", "seed")


def write_metrics_csv(path: str | Path, rows: Iterable[dict], columns: Sequence[str] = METRIC_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
        w.writeheader()
        for row in rows:
            w.writerow(row)
