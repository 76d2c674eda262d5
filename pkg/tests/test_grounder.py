import json
import math
from importlib import resources

import numpy as np
import pytest

from mxplan import grounder
from mxplan.grounder import (
    GFluent,
    GroundingExplosion,
    eval_ground_expr,
    ground,
    ground_expr,
)
from mxplan.pddlx import Binary, Const, ParamRef, parse_domain, parse_problem


def load_pair(family):
    root = resources.files("mxplan") / "domains"
    dom = parse_domain((root / f"{family}-domain.pddlx").read_text())
    prob = parse_problem((root / f"{family}-problem.pddlx").read_text(), dom)
    return dom, prob


@pytest.fixture(scope="module")
def toy():
    return ground(*load_pair("toy"))


@pytest.fixture(scope="module")
def auv():
    return ground(*load_pair("auv"))


class TestToyGrounding:
    def test_five_actions(self, toy):
        assert toy.X == 5
        assert [a.name for a in toy.actions] == [
            "pick-up p1 a", "pick-up p1 b",
            "move p1 a b", "move p1 b a", "navigate"]

    def test_one_hot_vectors(self, toy):
        pick = toy.action_by_name("pick-up p1 a")
        nav = toy.action_by_name("navigate")
        assert pick.one_hot(5).tolist() == [0, 0, 0, 0, 1]
        assert nav.one_hot(5).tolist() == [1, 0, 0, 0, 0]

    def test_self_move_pruned(self, toy):
        with pytest.raises(KeyError):
            toy.action_by_name("move p1 a a")

    def test_param_slots(self, toy):
        assert toy.param_slots == ("?d",)
        assert toy.lower.tolist() == [0] and toy.upper.tolist() == [1]

    def test_init_vectors(self, toy):
        # at(p1,a), agent-at(a) positive; everything else -1
        assert sorted(np.flatnonzero(toy.init_P == 1).tolist()) == sorted([
            toy.prop_index[("at", ("p1", "a"))],
            toy.prop_index[("agent-at", ("a",))]])
        assert toy.init_V.tolist() == [0]

    def test_numeric_precondition_compiled(self, toy):
        move = toy.action_by_name("move p1 a b")
        (pn,) = move.pre_n
        assert isinstance(pn.expr, GFluent) and pn.lo == 1 and pn.hi == math.inf
        assert pn.holds(1) and not pn.holds(0.999)

    def test_navigate_rows(self, toy):
        nav = toy.action_by_name("navigate")
        k = toy.fluent_index[("x", ())]
        assert nav.kappa == {k: 1}
        assert nav.eff_static == {} and list(nav.eff_dynamic) == [k]
        assert nav.is_numeric and nav.move_pair is None


class TestAuvGrounding:
    def test_take_sample_only_objectives(self, auv):
        names = [a.name for a in auv.actions if a.schema == "take-sample"]
        # o1 is an obstacle, not an objective: statically pruned
        assert names == ["take-sample ship a", "take-sample ship b"]

    def test_glide_is_movement(self, auv):
        glide = auv.action_by_name("glide ship")
        kx = auv.fluent_index[("location-x", ("ship",))]
        ky = auv.fluent_index[("location-y", ("ship",))]
        assert glide.move_pair == (kx, ky)
        assert glide.kappa == {kx: 1, ky: 1}

    def test_collide_events(self, auv):
        assert [e.name for e in auv.events] == ["collide ship o1"]

    def test_bounds_vectors(self, auv):
        j = auv.slot("?d")
        assert (auv.lower[j], auv.upper[j]) == (0, 1)
        j = auv.slot("?vx")
        assert (auv.lower[j], auv.upper[j]) == (-10, 10)

    def test_json_dump(self, auv):
        doc = json.loads(auv.to_json())
        assert len(doc["actions"]) == auv.X
        assert doc["end_index"] == auv.X
        assert doc["bounds"]["?vy"] == [-10, 10]


class TestEffectRows:
    def test_one_hot_selects_matching_row(self, toy):
        E = toy.effect_matrix()
        for a in toy.actions:
            via_product = a.one_hot(toy.X) @ E
            direct = np.zeros(toy.M)
            for m, v in a.eff_row.items():
                direct[m] = v
            assert np.array_equal(via_product, direct)

    def test_polarity_closure(self, toy):
        # aE + (1 - (aE)^2) P stays in {-1, 1}^M for random P
        rng = np.random.default_rng(0)
        E = toy.effect_matrix()
        for a in toy.actions:
            row = a.one_hot(toy.X) @ E
            for _ in range(100):
                P = rng.choice([-1.0, 1.0], size=toy.M)
                P2 = row + (1 - row**2) * P
                assert set(np.unique(P2)) <= {-1.0, 1.0}

    def test_delete_effects_are_minus_one(self, toy):
        pick = toy.action_by_name("pick-up p1 a")
        assert pick.eff_row[toy.prop_index[("holding", ("p1",))]] == 1
        assert pick.eff_row[toy.prop_index[("at", ("p1", "a"))]] == -1

    def test_logical_action_kappa_empty(self, toy):
        pick = toy.action_by_name("pick-up p1 a")
        assert pick.kappa == {} and not pick.is_numeric

    def test_decrease_direction(self):
        dom = parse_domain("""
          (define (domain d) (:types car) (:functions (fuel ?c - car))
            (:action burn :parameters (?c - car ?vx ?d - real)
              :precondition (and) :effect (and (decrease (fuel ?c) (* ?vx ?d)))))""")
        prob = parse_problem("""
          (define (problem p) (:domain d) (:objects c1 - car)
            (:init (= (fuel c1) 7)) (:goal (and (<= (fuel c1) 0))))""", dom)
        m = ground(dom, prob)
        a = m.action_by_name("burn c1")
        k = m.fluent_index[("fuel", ("c1",))]
        assert a.kappa == {k: -1}
        val = eval_ground_expr(a.eff_dynamic[k], m.init_V, {"?vx": 3, "?d": 2})
        assert val == 6


class TestGroundExpr:
    def test_eval(self, toy):
        e = Binary("*", ParamRef("?d"), Const(2.0))
        g = ground_expr(e, {}, toy.fluent_index)
        assert eval_ground_expr(g, toy.init_V, {"?d": 3.0}) == 6.0

    def test_fluent_lookup(self, toy):
        nav = toy.action_by_name("navigate")
        k = toy.fluent_index[("x", ())]
        assert eval_ground_expr(GFluent(k, "x", ()), np.array([4.5]), {}) == 4.5


class TestFailureModes:
    def test_empty_type_contributes_nothing(self):
        dom = parse_domain("""
          (define (domain d) (:types ghost) (:predicates (p ?g - ghost))
            (:action spook :parameters (?g - ghost)
              :precondition (and) :effect (and (p ?g))))""")
        prob = parse_problem(
            "(define (problem q) (:domain d) (:init) (:goal (and)))", dom)
        assert ground(dom, prob).X == 0

    def test_explosion_cap(self):
        dom, prob = load_pair("rover")
        with pytest.raises(GroundingExplosion):
            ground(dom, prob, cap=10)

    def test_missing_fluent_init(self):
        dom, _ = load_pair("toy")
        prob = parse_problem("""
          (define (problem t) (:domain toy) (:objects p1 - package a b - place)
            (:init (at p1 a) (agent-at a)) (:goal (and (holding p1))))""", dom)
        with pytest.raises(GroundingExplosion, match="initial value"):
            ground(dom, prob)


class TestCorpusGrounds:
    @pytest.mark.parametrize("family", ["auv", "taxi", "rover", "toy"])
    def test_grounds_cleanly(self, family):
        m = ground(*load_pair(family))
        assert m.X > 0
        assert m.end_index == m.X
        # indices dense and unique
        assert [a.index for a in m.actions] == list(range(m.X))
