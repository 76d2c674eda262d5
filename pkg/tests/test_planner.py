import math
from importlib import resources

import numpy as np
import pytest

from mxplan import engine, planner
from mxplan.grounder import ground
from mxplan.pddlx import parse_domain, parse_problem
from mxplan.planner import PlannerConfig, init_params, solve, solve_baseline


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


MINI_DOMAIN = """
(define (domain mini)
  (:types vehicle region)
  (:predicates (can-move ?v - vehicle) (sampled ?r - region))
  (:functions (location-x ?v - vehicle) (location-y ?v - vehicle))
  (:action glide
    :parameters (?v - vehicle ?vx ?vy ?d - real)
    :precondition (and (can-move ?v))
    :effect (and (increase (location-x ?v) (* ?vx ?d))
                 (increase (location-y ?v) (* ?vy ?d))))
  (:action take-sample
    :parameters (?v - vehicle ?r - region)
    :precondition (and (can-move ?v)
                       (objective ?r)
                       (inside (location-x ?v) (location-y ?v) ?r))
    :effect (and (sampled ?r))))
"""


def mini_problem(goal_rect, bounds="(<= -10 ?vx 10) (<= -10 ?vy 10) (<= 0 ?d 1)",
                 extra_regions="", extra_objects=""):
    x0, y0, x1, y1 = goal_rect
    src = f"""
(define (problem mini-1) (:domain mini)
  (:objects ship - vehicle a {extra_objects} - region)
  (:init (can-move ship)
         (= (location-x ship) 1) (= (location-y ship) 1))
  (:goal (and (sampled a)))
  (:regions (rect a {x0} {y0} {x1} {y1}) (objective a) {extra_regions})
  (:parameters-bounds {bounds}))
"""
    dom = parse_domain(MINI_DOMAIN)
    return ground(dom, parse_problem(src, dom))


class TestInitParams:
    def test_within_clipped_unit_box(self, auv):
        cfg = PlannerConfig(N=20, seed=5)
        Theta = init_params(auv, cfg, np.random.default_rng(5))
        assert Theta.shape == (20, auv.T)
        for j in range(auv.T):
            assert np.all(Theta[:, j] >= max(auv.lower[j], -1.0))
            assert np.all(Theta[:, j] <= min(auv.upper[j], 1.0))

    def test_seed_reproducible(self, auv):
        cfg = PlannerConfig(N=7, seed=42)
        a = init_params(auv, cfg, np.random.default_rng(42))
        b = init_params(auv, cfg, np.random.default_rng(42))
        assert np.array_equal(a, b)


class TestSolve:
    def test_toy_solves_and_validates(self, toy):
        res = solve(toy, PlannerConfig(N=10, seed=0))
        assert res.solved
        assert engine.validate(toy, res.plan).valid
        assert res.losses.l_stop == 0

    def test_goal_in_initial_state(self, toy):
        dom, prob = load_pair("toy")
        prob2 = type(prob)(prob.name, prob.domain_name, prob.objects,
                           prob.init_props + (("holding", ("p1",)),
                                              ("agent-at", ("b",))),
                           prob.init_fluents, prob.goal, prob.regions,
                           prob.bounds)
        model = ground(dom, prob2)
        res = solve(model, PlannerConfig(N=5, seed=0))
        assert res.solved and len(res.plan) == 0 and res.cost == 0

    def test_deterministic_by_seed(self, toy):
        cfg = PlannerConfig(N=10, seed=9)
        a = solve(toy, cfg)
        b = solve(toy, PlannerConfig(N=10, seed=9))
        assert engine.format_plan(toy, a.plan) == engine.format_plan(toy, b.plan)
        assert a.history == b.history

    def test_mini_converges_near_goal(self):
        # w3=1 keeps the bound-loss pull dominant; at the default w3=100
        # the cost term outweighs the normed pull and motion stalls
        model = mini_problem((4, 4, 8, 8))
        res = solve(model, PlannerConfig(N=10, seed=1, w3=1.0,
                                         max_iterations=3000))
        assert res.solved
        v = engine.validate(model, res.plan)
        assert v.valid
        assert res.cost < 10  # straight-line distance is about 4.2

    def test_far_goal_beats_coarse_lattice(self):
        model = mini_problem((30, 24, 40, 34))
        res = solve(model, PlannerConfig(N=50, seed=3, w3=1.0,
                                         max_iterations=5000,
                                         cutoff_seconds=120))
        assert res.solved
        assert engine.validate(model, res.plan).valid
        base = solve_baseline(model, 10.0, PlannerConfig(map_side=50))
        assert base.solved
        # straight-line distance 37.0; the lattice pays the quantization
        assert res.cost <= base.cost

    def test_history_rows_logged(self, toy):
        res = solve(toy, PlannerConfig(N=10, seed=0))
        assert res.history
        it, lb, lo, cost, l_all, l_stop = res.history[-1]
        assert it == res.iterations and l_stop == 0

    def test_cutoff_status(self):
        # unreachable objective outside clamped reach still burns iterations
        model = mini_problem((4, 4, 8, 8))
        res = solve(model, PlannerConfig(N=10, seed=1, max_iterations=2))
        assert res.status in ("Cutoff", "Solved")
        if res.status == "Cutoff":
            assert res.plan is None and res.cost == math.inf

    def test_bad_config_rejected(self, toy):
        with pytest.raises(ValueError):
            solve(toy, PlannerConfig(N=0))
        with pytest.raises(ValueError):
            solve(toy, PlannerConfig(omega=0))


class TestSolveBaseline:
    def test_obstacle_free_diagonal(self):
        model = mini_problem((4, 4, 8, 8))
        res = solve_baseline(model, 5.0, PlannerConfig(map_side=50))
        assert res.solved
        v = engine.validate(model, res.plan)
        assert v.valid
        # one diagonal step (1,1)->(6,6) then the sample
        assert res.cost == pytest.approx(5 * math.sqrt(2))

    def test_costs_multiples_of_delta(self):
        model = mini_problem((20, 4, 30, 14))
        res = solve_baseline(model, 5.0, PlannerConfig(map_side=50))
        assert res.solved
        for st in res.plan.steps:
            if model.actions[st.index].move_pair is not None:
                assert st.cost in (pytest.approx(5.0),
                                   pytest.approx(5 * math.sqrt(2)))

    def test_routes_around_obstacle(self):
        model = mini_problem((20, 4, 30, 14),
                             extra_regions="(rect o1 10 2 14 16) (obstacle o1)",
                             extra_objects="o1")
        res = solve_baseline(model, 5.0, PlannerConfig(map_side=50))
        assert res.solved
        assert engine.validate(model, res.plan).valid

    def test_coarse_step_overshoots(self):
        # lattice from (1,1) with step 20 skips the band [23,29]
        model = mini_problem((23, 23, 29, 29),
                             bounds="(<= -30 ?vx 30) (<= -30 ?vy 30) (<= 0 ?d 1)")
        coarse = solve_baseline(model, 20.0, PlannerConfig(map_side=50))
        fine = solve_baseline(model, 5.0, PlannerConfig(map_side=50))
        assert coarse.status == "Deadend"
        assert fine.solved

    def test_respects_param_bounds(self):
        # bounds cap the step at 10, so delta=20 has no legal direction
        model = mini_problem((23, 23, 29, 29))
        res = solve_baseline(model, 20.0, PlannerConfig(map_side=50))
        assert res.status == "Deadend"

    def test_toy_logical_plus_unit_numeric(self, toy):
        res = solve_baseline(toy, 5.0, PlannerConfig(map_side=50))
        assert res.solved
        assert engine.validate(toy, res.plan).valid

    def test_bad_delta(self, toy):
        with pytest.raises(ValueError):
            solve_baseline(toy, 0.0)
