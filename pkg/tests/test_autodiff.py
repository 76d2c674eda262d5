import math
import random
from importlib import resources

import numpy as np
import pytest

from mxplan import autodiff
from mxplan.autodiff import (
    LossBreakdown,
    Tape,
    _norm2_terms,
    backward,
    relu,
    rollout_record,
    sqrt,
    stop_loss,
    update_params,
)
from mxplan.engine import NumericFault
from mxplan.grounder import ground
from mxplan.pddlx import parse_domain, parse_problem


def load_pair(family):
    root = resources.files("mxplan") / "domains"
    dom = parse_domain((root / f"{family}-domain.pddlx").read_text())
    prob = parse_problem((root / f"{family}-problem.pddlx").read_text(), dom)
    return dom, prob


@pytest.fixture(scope="module")
def auv():
    return ground(*load_pair("auv"))


@pytest.fixture(scope="module")
def toy():
    return ground(*load_pair("toy"))


def fd_gradient(rollout, h=1e-5):
    """Central finite differences over the recorded tape (frozen plan)."""
    tape, root = rollout.tape, rollout.root
    grads = {}
    for key, leaf in rollout.leaves.items():
        up = tape.reevaluate({leaf.i: leaf.value + h})[root.i]
        dn = tape.reevaluate({leaf.i: leaf.value - h})[root.i]
        grads[key] = (up - dn) / (2 * h)
    return grads


class TestTape:
    def test_basic_ops(self):
        t = Tape()
        x = t.leaf(3.0)
        y = t.leaf(4.0)
        z = sqrt(x * x + y * y)
        assert z.value == 5.0
        adj = t.backward(z)
        assert adj[x.i] == pytest.approx(3 / 5)
        assert adj[y.i] == pytest.approx(4 / 5)

    def test_reevaluate(self):
        t = Tape()
        x = t.leaf(2.0)
        y = (x * 3.0 + 1.0) ** 2
        assert y.value == 49.0
        out = t.reevaluate({x.i: 3.0})
        assert out[y.i] == 100.0

    def test_relu_subgradient_zero_at_zero(self):
        t = Tape()
        x = t.leaf(0.0)
        r = relu(x)
        adj = t.backward(r)
        assert adj[x.i] == 0.0

    def test_division(self):
        t = Tape()
        x = t.leaf(2.0)
        y = t.leaf(4.0)
        z = x / y
        adj = t.backward(z)
        assert adj[x.i] == pytest.approx(0.25)
        assert adj[y.i] == pytest.approx(-2 / 16)

    def test_non_finite_rejected(self):
        t = Tape()
        x = t.leaf(1e308)
        with pytest.raises(NumericFault):
            x * 1e308

    def test_norm2_mixed(self):
        t = Tape()
        x = t.leaf(3.0)
        n = _norm2_terms([x, 4.0])
        assert n.value == pytest.approx(5.0)
        assert _norm2_terms([3.0, 4.0]) == pytest.approx(5.0)


class TestRolloutLosses:
    def test_toy_reaches_goal(self, toy):
        Theta = np.ones((6, toy.T))
        r = rollout_record(toy, Theta)
        assert r.reached_goal and not r.deadend
        names = [toy.actions[s.index].name for s in r.plan.steps]
        # navigate's relaxed successor already satisfies x >= 1 (h = 2),
        # so it wins the first step over pick-up (h = 3)
        assert names == ["navigate", "pick-up p1 a", "move p1 a b"]
        assert r.losses.l_stop == 0
        assert stop_loss(toy, r) == 0

    def test_truncated_rollout_inf_stop(self, toy):
        Theta = np.zeros((2, toy.T))  # navigate with d=0 never reaches x>=1
        r = rollout_record(toy, Theta)
        assert not r.reached_goal
        assert r.losses.l_stop == math.inf

    def test_bound_loss_example(self):
        # V=5 with U=4, L=0 gives a unit bound loss
        t = Tape()
        v = t.leaf(5.0)
        lb = _norm2_terms([relu(v - 4.0)]) + _norm2_terms([relu(0.0 - v)])
        assert lb.value == pytest.approx(1.0, abs=1e-6)

    def test_no_violation_loss_is_cost_only(self, toy):
        Theta = np.ones((6, toy.T))
        r = rollout_record(toy, Theta, w=(1.0, 1.0, 100.0))
        # no movement pair in toy: psi stays 0; x=1 hits [1,inf) exactly
        assert all(o == 0 for o in r.losses.lo)
        assert all(p == 0 for p in r.losses.psi)
        assert r.losses.l_all == pytest.approx(sum(r.losses.lb))

    def test_nonnegativity(self, auv):
        rng = np.random.default_rng(3)
        for _ in range(10):
            Theta = rng.uniform(-10, 10, size=(8, auv.T))
            Theta[:, auv.slot("?d")] = rng.uniform(0, 1, size=8)
            r = rollout_record(auv, Theta)
            assert all(v >= 0 for v in r.losses.lb)
            assert all(v >= 0 for v in r.losses.lo)
            assert all(v >= 0 for v in r.losses.psi)

    def test_obstacle_loss_recorded(self, auv):
        # aim straight at the obstacle: (1,1) -> (10,8) ... -> crossing
        Theta = np.zeros((6, auv.T))
        Theta[:, auv.slot("?vx")] = 9
        Theta[:, auv.slot("?vy")] = 7
        Theta[:, auv.slot("?d")] = 1
        r = rollout_record(auv, Theta)
        assert any(v > 0 for v in r.losses.lo)


class TestGradients:
    def test_psi_gradient_345(self, auv):
        Theta = np.zeros((1, auv.T))
        Theta[0, auv.slot("?vx")] = 3
        Theta[0, auv.slot("?vy")] = 4
        Theta[0, auv.slot("?d")] = 1
        r = rollout_record(auv, Theta, w=(0.0, 0.0, 1.0))
        g = backward(r, 1, auv.T)
        assert g[0, auv.slot("?vx")] == pytest.approx(3 / 5, rel=1e-6)
        assert g[0, auv.slot("?vy")] == pytest.approx(4 / 5, rel=1e-6)
        # d(psi)/dd = (vx^2 + vy^2) * d / psi = 25/5
        assert g[0, auv.slot("?d")] == pytest.approx(5.0, rel=1e-6)

    def test_unused_slots_zero(self, toy):
        Theta = np.ones((6, toy.T))
        r = rollout_record(toy, Theta)
        g = backward(r, 6, toy.T)
        # steps 0 (pick-up) and 2 (move) read no parameters
        assert g[0].tolist() == [0.0]
        assert g[2].tolist() == [0.0]

    def test_matches_finite_differences(self, auv, toy):
        rng = np.random.default_rng(11)
        models = [auv, toy]
        checked = 0
        for trial in range(200):
            model = models[trial % 2]
            N = int(rng.integers(2, 8))
            Theta = rng.uniform(-5, 5, size=(N, model.T))
            if "?d" in model.param_slots:
                Theta[:, model.slot("?d")] = rng.uniform(0, 1, size=N)
            r = rollout_record(model, Theta)
            if r.root is None:
                continue
            g = backward(r, N, model.T)
            fd = fd_gradient(r)
            for (i, j), val in fd.items():
                if abs(g[i, j]) > 1e-8:
                    assert abs(g[i, j] - val) <= 1e-4 * max(1e-8, abs(g[i, j])), \
                        (model.param_slots[j], i, g[i, j], val)
                    checked += 1
        assert checked > 100  # the oracle really exercised coordinates


class TestUpdateParams:
    def test_gradient_step(self):
        theta = np.array([[0.5]])
        out = update_params(theta, np.array([[100.0]]), 0.001,
                            np.array([-10.0]), np.array([10.0]))
        assert out[0, 0] == pytest.approx(0.4)

    def test_clamp(self):
        theta = np.array([[25.0]])
        out = update_params(theta, np.zeros((1, 1)), 0.001,
                            np.array([-10.0]), np.array([10.0]))
        assert out[0, 0] == 10.0

    def test_zero_gradient_in_bounds_unchanged(self):
        theta = np.array([[1.5, -2.0]])
        out = update_params(theta, np.zeros((1, 2)), 0.01,
                            np.array([-10.0, -10.0]), np.array([10.0, 10.0]))
        assert np.array_equal(out, theta)
        again = update_params(out, np.zeros((1, 2)), 0.01,
                              np.array([-10.0, -10.0]), np.array([10.0, 10.0]))
        assert np.array_equal(again, out)
