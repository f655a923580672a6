from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vsrl.core import ContinuousAction, SymbolicState
from vsrl.envs import make_env
from vsrl.envs._kin import advance_axis
from vsrl.monitor import PlantModel, check_model_monitor
from vsrl.shield import RandomPolicy

TOL = 1e-9


def transitions(name, n, seed=0):
    env = make_env(name, seed=seed)
    pi = RandomPolicy(env.info.actions, seed)
    obs = env.reset()
    out = []
    while len(out) < n:
        before = env.true_symbolic_state()
        a = pi(obs)
        res = env.step(a)
        if res.done or res.violated:  # a strike (PM removes the hazard) is outside the plant
            obs = env.reset()
            continue
        out.append((env, before, a, env.true_symbolic_state()))
        obs = res.observation
    return out


@pytest.mark.parametrize("name", ["acc", "gf", "pm"])
def test_simulator_transitions_pass(name):
    for env, s0, a, s1 in transitions(name, 300):
        assert check_model_monitor(env.info.plant, s0, a, s1, TOL)


@pytest.mark.parametrize("name", ["acc", "gf", "pm"])
def test_perturbed_object_fails(name):
    rng = np.random.default_rng(0)
    for env, s0, a, s1 in transitions(name, 100):
        pos = s1.positions.copy()
        pos[rng.integers(1, len(pos)), 1] += 10 * TOL
        assert not check_model_monitor(env.info.plant, s0, a, s1.with_positions(pos), TOL)


def test_perturbed_agent_fails():
    # the agent's own displacement can be absorbed by a shorter cycle, except
    # when no cycle length could produce it
    plant = PlantModel(0, A=0.5, B=0.5, T=1.0)
    s0 = SymbolicState.from_objects([(0, 5.0, 5.0)], (0.0, 0.0))
    a = ContinuousAction((0.0, 0.0))
    assert check_model_monitor(plant, s0, a, s0, TOL)
    assert not check_model_monitor(plant, s0, a, s0.with_positions(np.array([[5.0, 5.0 + 10 * TOL]])), TOL)
    x1, v1 = plant.advance([5.0, 5.0], [0.3, 0.0], [0.5, 0.0], 1.0)
    s0 = SymbolicState.from_objects([(0, 5.0, 5.0)], (0.3, 0.0))
    past = SymbolicState.from_objects([(0, x1[0] + 10 * TOL, x1[1])], v1)
    assert not check_model_monitor(plant, s0, ContinuousAction((0.5, 0.0)), past, TOL)


def test_teleport_fails():
    plant = PlantModel(0, A=0.5, B=0.5, T=1.0)
    s0 = SymbolicState.from_objects([(0, 5.0, 5.0), (1, 9.0, 9.0)], (0.2, 0.0))
    a = ContinuousAction((0.5, 0.0))
    reach = 0.2 * 1.0 + 0.5 * 0.5 * 1.0
    far = SymbolicState.from_objects([(0, 5.0 + 10 * reach, 5.0), (1, 9.0, 9.0)], (0.7, 0.0))
    assert not check_model_monitor(plant, s0, a, far, 1e-6)
    # a static hazard that jumps is also inconsistent
    x1, v1 = plant.advance([5.0, 5.0], [0.2, 0.0], [0.5, 0.0], 1.0)
    ok = SymbolicState.from_objects([(0, *x1), (1, 9.0, 9.0)], v1)
    moved = SymbolicState.from_objects([(0, *x1), (1, 9.5, 9.0)], v1)
    assert check_model_monitor(plant, s0, a, ok, 1e-9)
    assert not check_model_monitor(plant, s0, a, moved, 1e-9)


def test_short_cycles_are_explained():
    plant = PlantModel(0, A=2.0, B=2.0, T=1.0, nonnegative_velocity=True)
    s0 = SymbolicState.from_objects([(0, 0.0, 0.0)], (3.0, 0.0))
    a = ContinuousAction((-2.0,))
    for dt in (0.1, 0.37, 0.9):
        x, v = plant.advance([0.0], [3.0], [-2.0], dt)
        s1 = SymbolicState.from_objects([(0, float(x[0]), 0.0)], (float(v[0]), 0.0))
        assert check_model_monitor(plant, s0, a, s1, 1e-9)


def test_negative_tolerance_rejected():
    plant = PlantModel(0, A=1.0, B=1.0, T=1.0)
    s = SymbolicState.from_objects([(0, 0.0, 0.0)])
    with pytest.raises(ValueError):
        check_model_monitor(plant, s, ContinuousAction((0.0, 0.0)), s, -1.0)


@settings(max_examples=300, deadline=None)
@given(st.floats(-50, 50), st.floats(-5, 5), st.floats(-2, 2), st.floats(0, 1))
def test_plant_matches_simulator_kinematics(x, v, a, dt):
    plant = PlantModel(0, A=2.0, B=2.0, T=1.0)
    px, pv = plant.advance([x], [v], [a], dt)
    sx, sv = advance_axis(x, v, a, dt)
    assert px[0] == pytest.approx(sx, abs=1e-9)
    assert pv[0] == pytest.approx(sv, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 8), st.floats(-2, 2), st.floats(0.01, 1))
def test_braking_stops_and_holds(v, a, dt):
    plant = PlantModel(0, A=2.0, B=2.0, T=1.0, nonnegative_velocity=True)
    x1, v1 = plant.advance([0.0], [v], [a], dt)
    assert v1[0] >= 0.0
    x2, v2 = plant.advance(x1, v1, plant.brake(v1), 10.0)
    assert v2[0] == 0.0
    assert x2[0] == pytest.approx(x1[0] + v1[0] ** 2 / 4.0, abs=1e-9)
