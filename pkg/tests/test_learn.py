from __future__ import annotations

import csv
import math

import numpy as np
import pytest

from scripted import Seeker, hazards
from vsrl.envs import make_env
from vsrl.learn import CURVE_COLUMNS, LinearPolicy, PpoDefaults, QLearner, downsample, evaluate, train
from vsrl.perceive import make_extractor
from vsrl.shield import RandomPolicy, ShieldedEnv, env_monitor


def senv_for(name, seed=0, shield=True, eps=0.0, extractor="oracle"):
    env = make_env(name, seed=seed)
    if not shield:
        return ShieldedEnv(env, None)
    return ShieldedEnv(env, env_monitor(env), make_extractor(extractor, env, eps, seed + 1), seed=seed + 2)


def test_train_writes_curve_csv(tmp_path):
    senv = senv_for("xo")
    path = tmp_path / "curve.csv"
    res = train(QLearner(senv.env, seed=0), senv, 30, seed=4, csv_path=path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == CURVE_COLUMNS
    assert len(rows) == 30 == len(res.rows)
    assert [int(r["episode"]) for r in rows] == list(range(30))
    assert {r["seed"] for r in rows} == {"4"}
    eps = [float(r["epsilon_greedy"]) for r in rows]
    assert eps[0] == 1.0 and eps == sorted(eps, reverse=True)


@pytest.mark.parametrize("agent", ["q", "linear"])
def test_training_is_deterministic(agent):
    def run():
        senv = senv_for("gf", seed=3, eps=0.25)
        learner = QLearner(senv.env) if agent == "q" else LinearPolicy(senv.env)
        return train(learner, senv, 15, seed=3).rows

    assert run() == run()


@pytest.mark.parametrize("name", ["xo", "acc", "gf", "pm"])
def test_shielded_q_learning_never_violates(name):
    senv = senv_for(name, seed=1, eps=make_env(name).info.percept_eps)
    res = train(QLearner(senv.env, seed=1), senv, 300, seed=1)
    assert res.violations == 0
    assert all(r["interventions"] <= r["steps"] for r in res.rows)


@pytest.mark.parametrize("name", ["xo", "gf"])
def test_shielded_linear_policy_never_violates(name):
    senv = senv_for(name, seed=2)
    res = train(LinearPolicy(senv.env, seed=2), senv, 100, seed=2)
    assert res.violations == 0
    assert np.isfinite(res.agent.W).all()


def test_shielded_detector_training_never_violates():
    senv = senv_for("gf", seed=4, extractor="detector")
    assert train(QLearner(senv.env, seed=4), senv, 30, seed=4).violations == 0


def test_unshielded_xo_q_learning_violates():
    senv = senv_for("xo", shield=False)
    assert train(QLearner(senv.env, seed=0), senv, 500, seed=0).violations > 0


def test_acc_learned_beats_random():
    senv = senv_for("acc", seed=0)
    q = QLearner(senv.env, seed=0)
    assert train(q, senv, 1000, seed=0).violations == 0
    learned = evaluate(q, senv, 100)
    rand = evaluate(RandomPolicy(senv.info.actions, 9), senv_for("acc", seed=0), 100)
    assert learned.violations == 0 and rand.violations == 0
    assert learned.median_return > rand.median_return


def test_pm_shielded_learner_trades_reward_for_safety():
    # the unshielded learner discovers that smashing hazards spills collectible messes
    results = {}
    for shield in (True, False):
        senv = senv_for("pm", seed=0, shield=shield)
        q = QLearner(senv.env, seed=0)
        train_violations = train(q, senv, 1500, seed=0).violations
        results[shield] = (train_violations, evaluate(q, senv, 100))
    (safe_train, safe_eval), (free_train, free_eval) = results[True], results[False]
    assert safe_train == 0 and safe_eval.violations == 0
    assert free_train > 0
    assert safe_eval.median_return <= free_eval.median_return


def test_evaluate_replicates_and_format():
    senv = senv_for("acc", seed=5)
    res = evaluate(RandomPolicy(senv.info.actions, 5), senv, 10)
    assert len(res.replicate_returns) == 4
    assert math.isfinite(res.median_return)
    assert res.median_return == pytest.approx(float(np.median(res.replicate_returns)))
    assert res.violations == 0
    with pytest.raises(ValueError):
        evaluate(RandomPolicy(senv.info.actions), senv, 10, replicates=3)
    with pytest.raises(ValueError):
        evaluate(RandomPolicy(senv.info.actions), senv, 3)


def test_evaluate_hazard_seeker_unshielded_violates_every_episode():
    senv = senv_for("gf", seed=6, shield=False)
    res = evaluate(Seeker(senv.env, hazards), senv, 12)
    assert res.violations == 12


def test_evaluate_restores_learning_mode():
    senv = senv_for("xo")
    q = QLearner(senv.env)
    before = {k: list(v) for k, v in q.q.items()}
    evaluate(q, senv, 8)
    assert q.frozen is False
    assert all(q.q[k] == v for k, v in before.items())
    assert all(v == [0.0] * 5 for k, v in q.q.items() if k not in before)


def test_downsample_block_means():
    f = np.arange(16.0).reshape(4, 4)
    np.testing.assert_array_equal(downsample(f, 2), [[2.5, 4.5], [10.5, 12.5]])
    assert downsample(np.ones((5, 7)), 2).shape == (2, 3)


def test_ppo_reference_discount():
    assert PpoDefaults().gamma == 0.99
    assert LinearPolicy(make_env("xo")).gamma == 0.99
