"""Acceptance run: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into the terminal summary (see conftest.py).
"""

from __future__ import annotations

import math
import time

import numpy as np

import conftest
from shieldstats import substitution_counts, transparency_mismatches, uniformity_pvalue
from soundness import acc_soundness, arena_soundness
from vsrl.cli import detect_check
from vsrl.envs import make_env
from vsrl.learn import QLearner, train
from vsrl.mdp import chain_mdp, gridworld_mdp, random_mdp, value_iteration, verify_theorem2, wrap
from vsrl.perceive import create_labels, focal_loss, focal_loss_grad, make_extractor
from vsrl.shield import RandomPolicy, ShieldedEnv, env_monitor, run_episode

ENV_NAMES = ("xo", "acc", "gf", "pm")


def report(k: int, ok: bool, detail: str) -> None:
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}"
    conftest.ACCEPTANCE[k] = line
    print(line)


def test_criterion_1_zero_violation_safe_exploration():
    episodes = 10_000
    t0 = time.perf_counter()
    parts, total = [], 0
    for name in ENV_NAMES:
        for agent in ("random", "q"):
            for eps in (0.0, make_env(name).info.percept_eps):
                env = make_env(name, seed=11)
                senv = ShieldedEnv(env, env_monitor(env), make_extractor("oracle", env, eps, 12), seed=13)
                pi = RandomPolicy(env.info.actions, 11) if agent == "random" else QLearner(env, seed=11)
                res = train(pi, senv, episodes, seed=11)
                assert len(res.rows) == episodes
                total += res.violations
                parts.append(f"{name}/{agent}/eps={eps:g}:{res.violations}")
    elapsed = time.perf_counter() - t0
    ok = total == 0 and elapsed < 600
    report(1, ok, f"violations={total} over {len(parts)}x{episodes} episodes in {elapsed:.0f}s ({' '.join(parts)})")
    assert total == 0
    assert elapsed < 600


def test_criterion_2_unshielded_unsafety():
    firsts = {}
    for name in ENV_NAMES:
        env = make_env(name, seed=21)
        senv = ShieldedEnv(env, None)
        pi = RandomPolicy(env.info.actions, 21)
        firsts[name] = None
        for ep in range(1000):
            if run_episode(pi, senv).violations:
                firsts[name] = ep + 1
                break
    ok = all(v is not None for v in firsts.values())
    report(2, ok, "first violating episode " + " ".join(f"{k}:{v}" for k, v in firsts.items()))
    assert ok


def test_criterion_3_wrapped_mdp_theory():
    t0 = time.perf_counter()
    rng = np.random.default_rng(31)
    cases = [random_mdp(rng) for _ in range(200)]
    assert all(m.n_states <= 20 and m.n_actions <= 5 for m in cases)
    cases += [gridworld_mdp(), gridworld_mdp(4, (2, 1), slip=0.2), chain_mdp(), chain_mdp(10.0)]
    worst = dict.fromkeys(("safe_kernel", "safe_reward", "projected_kernel", "projected_reward", "optimal_value"), 0.0)
    passed = True
    for m in cases:
        rep = verify_theorem2(m, tol=1e-9, n_random_policies=20, rng=rng, exact_tol=1e-12)
        passed &= rep.passed
        for k in worst:
            worst[k] = max(worst[k], getattr(rep, k))
        # second opinion on the optimum from value iteration on both sides
        gap = np.max(np.abs(value_iteration(wrap(m), 1e-12)[0] - value_iteration(m, 1e-12, safe_only=True)[0]))
        worst["optimal_value"] = max(worst["optimal_value"], float(gap))
    elapsed = time.perf_counter() - t0
    exact = max(v for k, v in worst.items() if k != "optimal_value")
    ok = passed and exact <= 1e-12 and worst["optimal_value"] <= 1e-9 and elapsed < 60
    report(3, ok, f"{len(cases)} MDPs, max kernel/reward error {exact:.2e}, max optimal-value gap "
                  f"{worst['optimal_value']:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_4_monitor_soundness():
    t0 = time.perf_counter()
    acc_env, gf_env = make_env("acc"), make_env("gf")
    acc_grid = sorted({a.acceleration[0] for a in acc_env.info.actions})
    gf_grid = sorted({c for a in gf_env.info.actions for c in a.acceleration})
    r_acc = acc_soundness(env_monitor(acc_env), 100_000, np.random.default_rng(41), acc_grid)
    r_gf = arena_soundness(env_monitor(gf_env), 100_000, np.random.default_rng(42), gf_grid,
                           gf_env.info.percept_eps)
    elapsed = time.perf_counter() - t0
    ok = r_acc["bad"] == 0 and r_gf["bad"] == 0 and elapsed < 60
    report(4, ok, f"acc {r_acc['bad']}/{r_acc['pairs']} unsafe (min margin {r_acc['min_margin']:.3g}), "
                  f"gf {r_gf['bad']}/{r_gf['pairs']} unsafe (min margin {r_gf['min_margin']:.3g}), {elapsed:.1f}s")
    assert ok


def test_criterion_5_detection_epsilon_contract():
    results = [detect_check(name, 1000, seed=51) for name in ENV_NAMES]
    ok = all(r["passed"] for r in results)
    report(5, ok, " ".join(f"{r['env']}:frames={r['frames']},miss={r['misses']},fp={r['false_positives']},"
                           f"err={r['max_error_px']:.2f}px" for r in results))
    assert ok


def test_criterion_6_focal_loss_and_labels():
    loss = focal_loss(np.array([[0.5]]), np.array([[1.0]]), 1)
    rng = np.random.default_rng(61)
    target = create_labels([(3, 4), (7, 1)], 10, 10, sigma=(2.0, 2.0))
    worst, h = 0.0, 1e-5
    for _ in range(100):
        pred = rng.uniform(0.05, 0.95, target.shape)
        i, j = rng.integers(0, 10, 2)
        g = focal_loss_grad(pred, target, 2)[i, j]
        p, y = pred[i:i + 1, j:j + 1], target[i:i + 1, j:j + 1]
        num = (focal_loss(p + h, y, 2) - focal_loss(p - h, y, 2)) / (2 * h)
        worst = max(worst, abs(g - num) / max(abs(g), abs(num), 1e-12))
    y = create_labels([(6, 6)], 16, 16, sigma=(4.0, 4.0))
    peak, ratio = float(y.max()), float(y[8, 6])
    ok = (abs(loss - 0.17329) <= 1e-4 and worst <= 1e-5 and peak == 1.0
          and abs(ratio - 0.6065) <= 1e-4 and abs(ratio - math.exp(-0.5)) <= 1e-6)
    report(6, ok, f"loss={loss:.6f} grad rel err={worst:.2e} peak={peak} ratio={ratio:.7f}")
    assert ok


def test_criterion_7_shield_statistics():
    counts = substitution_counts(10_000, seed=71)
    p = uniformity_pvalue(counts)
    mismatches = {name: transparency_mismatches(name, episodes=20, seed=72) for name in ENV_NAMES}
    ok = p > 0.01 and sum(counts.values()) == 10_000 and len(counts) == 2 and not any(mismatches.values())
    report(7, ok, f"chi2 p={p:.3f} counts={dict(sorted(counts.items()))} transparency mismatches={mismatches}")
    assert ok
