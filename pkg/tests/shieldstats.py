"""Shield statistics shared by the shield tests and the acceptance run."""

from __future__ import annotations

import random
from collections import Counter

import numpy as np
from scipy.stats import chisquare

from vsrl.core import DiscreteAction
from vsrl.envs import make_env
from vsrl.perceive import make_extractor
from vsrl.shield import ShieldedEnv, env_monitor, run_episode

UP = DiscreteAction(1)


def boxed_xo(blocked, seed=0):
    """XO with the agent at (5, 5), O's on the ``blocked`` neighbours and a far X."""
    env = make_env("xo", {"max_steps": 10**6, "n_o": len(blocked)}, seed=seed)
    env.reset()
    scene = lambda: (setattr(env, "agent", (5, 5)), setattr(env, "xs", {(0, 9)}),  # noqa: E731
                     setattr(env, "os", {(5 + dx, 5 + dy) for dx, dy in blocked}))
    scene()
    return env, scene


def substitution_counts(n: int, blocked=((0, -1), (-1, 0), (0, 1)), seed: int = 0) -> Counter:
    """Attempt the blocked move UP ``n`` times and tally what actually ran."""
    env, scene = boxed_xo(blocked, seed)
    senv = ShieldedEnv(env, env_monitor(env), make_extractor("oracle", env), seed=seed)
    senv._obs = env.observe()
    counts = Counter()
    for _ in range(n):
        scene()
        senv.step(UP)
        counts[senv.last.executed.index] += 1
    assert senv.interventions == n
    return counts


def uniformity_pvalue(counts: Counter) -> float:
    return float(chisquare(np.array(list(counts.values()), dtype=float)).pvalue)


class SafeRandomPolicy:
    """Draws uniformly from the monitor-safe actions of the true state; never
    proposes anything the shield would replace."""

    def __init__(self, env, seed: int = 0):
        self.env, self.monitor = env, env_monitor(env)
        self.actions = env.info.actions
        self.rng = random.Random(seed)

    def __call__(self, obs):
        mask = self.monitor.allowed(self.env.true_symbolic_state(), self.actions)
        safe = [a for a, ok in zip(self.actions, mask) if ok]
        return safe[self.rng.randrange(len(safe))]


def transparency_mismatches(name: str, episodes: int = 20, seed: int = 0) -> int:
    """Episodes whose shielded and unshielded trajectories differ in any bit."""
    def trajectories(shielded):
        env = make_env(name, seed=seed)
        senv = ShieldedEnv(env, env_monitor(env), make_extractor("oracle", env), seed=seed + 1) if shielded \
            else ShieldedEnv(env, None)
        pi = SafeRandomPolicy(env, seed)
        out = []
        for _ in range(episodes):
            ep = run_episode(pi, senv, record=True)
            out.append((ep, senv.interventions))
        return out

    bad = 0
    for (a, ia), (b, _) in zip(trajectories(True), trajectories(False)):
        same = ia == 0 and a.ret == b.ret and len(a.trajectory) == len(b.trajectory)
        same = same and all(
            x[0].frame.tobytes() == y[0].frame.tobytes() and x[1] == y[1] and x[2] == y[2] and x[3] == y[3]
            for x, y in zip(a.trajectory, b.trajectory))
        bad += not same
    return bad
