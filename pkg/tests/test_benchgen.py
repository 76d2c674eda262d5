import math

import pytest

from mxplan import benchgen, engine, grounder, pddlx
from mxplan.benchgen import Comparison, GenSpec, PlacementFailure, evaluate
from mxplan.engine import Plan, PlanStep
from mxplan.planner import PlannerResult

SMALL = dict(map_side=60, objectives=2, obstacles=2)


def region_boxes(prob):
    return {r.name: (r.x0, r.y0, r.x1, r.y1) for r in prob.regions}


class TestGenSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            GenSpec(family="warehouse").check()
        with pytest.raises(ValueError):
            GenSpec(objectives=0).check()
        with pytest.raises(ValueError):
            GenSpec(objectives=6).check()
        with pytest.raises(ValueError):
            GenSpec(family="taxi", passengers=4).check()


class TestGenerate:
    @pytest.mark.parametrize("family", benchgen.FAMILIES)
    def test_parses_and_grounds(self, family):
        dom, prob = benchgen.generate(GenSpec(family=family, seed=7, **SMALL))
        model = grounder.ground(dom, prob)
        assert model.X > 0

    def test_deterministic_bytes(self, tmp_path):
        spec = GenSpec(family="auv", seed=7, objectives=3, obstacles=2,
                       map_side=60)
        d1, p1 = benchgen.write_instance(spec, tmp_path / "a")
        d2, p2 = benchgen.write_instance(spec, tmp_path / "b")
        assert d1.read_bytes() == d2.read_bytes()
        assert p1.read_bytes() == p2.read_bytes()
        assert p2.parent == tmp_path / "b" / "auv" / "7"

    @pytest.mark.parametrize("family", benchgen.FAMILIES)
    def test_boxes_within_map_and_disjoint(self, family):
        spec = GenSpec(family=family, seed=11, **SMALL)
        _, prob = benchgen.generate(spec)
        boxes = list(region_boxes(prob).values())
        for x0, y0, x1, y1 in boxes:
            assert 0 <= x0 < x1 <= spec.map_side
            assert 0 <= y0 < y1 <= spec.map_side
        for i, a in enumerate(boxes):
            for b in boxes[i + 1:]:
                assert benchgen._disjoint(a, b)

    def test_start_outside_obstacles(self):
        _, prob = benchgen.generate(GenSpec(family="auv", seed=5, **SMALL))
        for r in prob.regions:
            box = (r.x0, r.y0, r.x1, r.y1)
            assert not benchgen._contains(box, (1.0, 1.0))

    def test_placement_failure(self):
        with pytest.raises(PlacementFailure):
            benchgen.generate(GenSpec(family="auv", seed=0, obstacles=100,
                                      obstacle_side=(25, 25), screen=False))

    def test_taxi_structure(self):
        dom, prob = benchgen.generate(
            GenSpec(family="taxi", seed=7, passengers=2, **SMALL))
        pax = [o for o, t in prob.objects if t == "passenger"]
        assert pax == ["p1", "p2"]
        starts = [p for p, _ in prob.init_props if p == "at"]
        assert len(starts) == 2
        assert all(g.pred == "at" for g in prob.goal)

    def test_rover_structure(self):
        dom, prob = benchgen.generate(
            GenSpec(family="rover", seed=7, **SMALL))
        preds = {p for p, _ in prob.init_props}
        assert {"at-lander", "at-soil-sample", "visible",
                "visible-from"} <= preds
        goals = {g.pred for g in prob.goal}
        assert "communicated-soil-data" in goals

    def test_obstacle_resample_keeps_objectives(self):
        base = GenSpec(family="auv", seed=3, **SMALL)
        _, a = benchgen.generate(base)
        (varied,) = benchgen.fig_obstacle_series(base, [99])
        _, b = benchgen.generate(varied)
        objs = lambda p: sorted(v for k, v in region_boxes(p).items()
                                if k.startswith("g"))
        obst = lambda p: sorted(v for k, v in region_boxes(p).items()
                                if k.startswith("o"))
        assert objs(a) == objs(b)
        assert obst(a) != obst(b)

    def test_screening_rejects_walled_in_layouts(self):
        # with screening off anything placeable comes back, even unsolvable
        dom, prob = benchgen.generate(
            GenSpec(family="auv", seed=2, screen=False, **SMALL))
        assert prob is not None


def _solved(plan):
    return PlannerResult("Solved", plan, 1, None, plan.total_cost)


def _failed():
    return PlannerResult("Deadend", None, 1, None, math.inf)


@pytest.fixture()
def mini_model():
    from test_planner import mini_problem
    return mini_problem((4, 4, 8, 8))


class TestEvaluate:
    def test_three_four_five_cost(self, mini_model):
        glide = mini_model.action_by_name("glide ship")
        take = mini_model.action_by_name("take-sample ship a")
        plan = Plan([PlanStep(glide.index,
                              {"?vx": 3.0, "?vy": 4.0, "?d": 1.0}, 5.0),
                     PlanStep(take.index, {}, 0.0)])
        assert engine.validate(mini_model, plan).valid
        comp = evaluate([("i1", mini_model)],
                        {"stub": lambda m: _solved(plan)})
        assert comp.costs["i1", "stub"] == pytest.approx(5.0)
        assert comp.average("stub") == pytest.approx(5.0)

    def test_invalid_plan_scored_as_failure(self, mini_model):
        glide = mini_model.action_by_name("glide ship")
        bogus = Plan([PlanStep(glide.index,
                               {"?vx": 99.0, "?vy": 0.0, "?d": 1.0}, 99.0)])
        comp = evaluate([("i1", mini_model)],
                        {"stub": lambda m: _solved(bogus)})
        assert comp.costs["i1", "stub"] is None
        assert comp.solve_count("stub") == 0

    def test_common_instance_average(self, mini_model):
        glide = mini_model.action_by_name("glide ship")
        take = mini_model.action_by_name("take-sample ship a")
        plan = Plan([PlanStep(glide.index,
                              {"?vx": 3.0, "?vy": 4.0, "?d": 1.0}, 5.0),
                     PlanStep(take.index, {}, 0.0)])
        calls = {"n": 0}

        def flaky(m):
            calls["n"] += 1
            return _solved(plan) if calls["n"] == 1 else _failed()

        comp = evaluate([("i1", mini_model), ("i2", mini_model)],
                        {"good": lambda m: _solved(plan), "flaky": flaky})
        assert comp.solve_count("good") == 2
        assert comp.solve_count("flaky") == 1
        assert comp.common_instances() == ["i1"]
        assert comp.average("good") == pytest.approx(5.0)

    def test_empty_instance_set(self):
        comp = evaluate([], {"a": lambda m: _failed()})
        assert comp.average("a") is None
        assert "instance" in comp.to_csv()
        assert comp.to_text().strip()

    def test_csv_layout(self, mini_model):
        comp = evaluate([("i1", mini_model)], {"a": lambda m: _failed()})
        lines = comp.to_csv().strip().splitlines()
        assert lines[0] == "instance,a"
        assert lines[1] == "i1,"
        assert lines[2] == "solved,0"
