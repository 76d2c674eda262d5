"""Randomized benchmark instances and the cost-comparison harness.

Instances are axis-aligned region layouts on a square map: objective
squares (side 5 to 20), obstacle rectangles (side 5 to 25), all with
integer corners, pairwise disjoint, placed by rejection sampling.  Each
layout is screened for solvability with the discretized baseline before
it is emitted.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from random import Random
from typing import Callable

from . import engine, grounder, pddlx, planner

_MAX_ATTEMPTS = 10_000
_MAX_LAYOUTS = 50

FAMILIES = ("auv", "taxi", "rover")


class PlacementFailure(Exception):
    pass


@dataclass(frozen=True)
class GenSpec:
    family: str = "auv"
    seed: int = 0
    map_side: int = 150
    objectives: int = 3
    obstacles: int = 2
    objective_side: tuple[int, int] = (5, 20)
    obstacle_side: tuple[int, int] = (5, 25)
    passengers: int | None = None       # taxi only, default 1..3 by seed
    start: tuple[float, float] = (1.0, 1.0)
    screen: bool = True
    screen_delta: float = 5.0
    screen_seconds: float = 10.0
    obstacle_seed: int | None = None    # resample obstacles, keep objectives

    def check(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.map_side < 10:
            raise ValueError("map side too small")
        if not 1 <= self.objectives <= 5:
            raise ValueError("objective count must be 1..5")
        if self.obstacles < 0:
            raise ValueError("obstacle count must be non-negative")
        if self.passengers is not None and not 1 <= self.passengers <= 3:
            raise ValueError("passenger count must be 1..3")


Box = tuple[int, int, int, int]


def _disjoint(a: Box, b: Box) -> bool:
    return a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1]


def _contains(b: Box, p: tuple[float, float]) -> bool:
    return b[0] <= p[0] <= b[2] and b[1] <= p[1] <= b[3]


class _Budget:
    def __init__(self, limit: int):
        self.left = limit

    def spend(self) -> None:
        self.left -= 1
        if self.left < 0:
            raise PlacementFailure(
                f"could not place all regions in {_MAX_ATTEMPTS} attempts")


def _place(rng: Random, count: int, side_range: tuple[int, int],
           square: bool, spec: GenSpec, existing: list[Box],
           budget: _Budget) -> list[Box]:
    out: list[Box] = []
    for _ in range(count):
        while True:
            budget.spend()
            w = rng.randint(*side_range)
            h = w if square else rng.randint(*side_range)
            if w >= spec.map_side or h >= spec.map_side:
                continue
            x0 = rng.randint(0, spec.map_side - w)
            y0 = rng.randint(0, spec.map_side - h)
            box = (x0, y0, x0 + w, y0 + h)
            if _contains(box, spec.start):
                continue
            if all(_disjoint(box, b) for b in existing + out):
                out.append(box)
                break
    return out


@dataclass
class Layout:
    objectives: list[Box]
    obstacles: list[Box]
    extras: list[Box]       # taxi passenger start regions


def _layout(spec: GenSpec, attempt: int) -> Layout:
    budget = _Budget(_MAX_ATTEMPTS)
    obj_rng = Random(f"{spec.seed}:objectives:{attempt}")
    objectives = _place(obj_rng, spec.objectives, spec.objective_side,
                        True, spec, [], budget)
    extras: list[Box] = []
    if spec.family == "taxi":
        extras = _place(obj_rng, _passenger_count(spec),
                        spec.objective_side, True, spec, objectives, budget)
    obs_seed = spec.seed if spec.obstacle_seed is None else spec.obstacle_seed
    obs_rng = Random(f"{obs_seed}:obstacles:{attempt}")
    obstacles = _place(obs_rng, spec.obstacles, spec.obstacle_side,
                       False, spec, objectives + extras, budget)
    return Layout(objectives, obstacles, extras)


def _passenger_count(spec: GenSpec) -> int:
    if spec.passengers is not None:
        return spec.passengers
    return Random(f"{spec.seed}:passengers").randint(1, 3)


def _fmt_regions(named: list[tuple[str, Box]], flags: list[str]) -> str:
    lines = [f"(rect {n} {b[0]} {b[1]} {b[2]} {b[3]})" for n, b in named]
    return "\n            ".join(lines + flags)


_BOUNDS = "(<= -10 ?vx 10) (<= -10 ?vy 10) (<= 0 ?d 1)"


def _auv_problem(spec: GenSpec, lay: Layout) -> str:
    objs = [(f"g{i+1}", b) for i, b in enumerate(lay.objectives)]
    obst = [(f"o{i+1}", b) for i, b in enumerate(lay.obstacles)]
    flags = [f"(objective {n})" for n, _ in objs]
    flags += [f"(obstacle {n})" for n, _ in obst]
    goals = " ".join(f"(sampled {n})" for n, _ in objs)
    names = " ".join(n for n, _ in objs + obst)
    return f"""(define (problem auv-{spec.seed})
  (:domain auv)
  (:objects ship - vehicle {names} - region)
  (:regions {_fmt_regions(objs + obst, flags)})
  (:init (can-move ship)
         (= (location-x ship) {spec.start[0]:g})
         (= (location-y ship) {spec.start[1]:g}))
  (:goal (and {goals}))
  (:parameters-bounds {_BOUNDS})
)
"""


def _taxi_problem(spec: GenSpec, lay: Layout) -> str:
    dests = [(f"g{i+1}", b) for i, b in enumerate(lay.objectives)]
    starts = [(f"ps{i+1}", b) for i, b in enumerate(lay.extras)]
    obst = [(f"o{i+1}", b) for i, b in enumerate(lay.obstacles)]
    flags = [f"(objective {n})" for n, _ in dests]
    flags += [f"(obstacle {n})" for n, _ in obst]
    n_pass = len(starts)
    pax = [f"p{i+1}" for i in range(n_pass)]
    inits = [f"(at p{i+1} ps{i+1})" for i in range(n_pass)]
    goals = [f"(at p{i+1} {dests[i % len(dests)][0]})" for i in range(n_pass)]
    names = " ".join(n for n, _ in dests + starts + obst)
    return f"""(define (problem taxi-{spec.seed})
  (:domain taxi)
  (:objects t1 - taxi {' '.join(pax)} - passenger {names} - region)
  (:regions {_fmt_regions(dests + starts + obst, flags)})
  (:init {' '.join(inits)}
         (= (location-x t1) {spec.start[0]:g})
         (= (location-y t1) {spec.start[1]:g}))
  (:goal (and {' '.join(goals)}))
  (:parameters-bounds {_BOUNDS})
)
"""


def _rover_problem(spec: GenSpec, lay: Layout) -> str:
    wps = [(f"w{i+1}", b) for i, b in enumerate(lay.objectives)]
    obst = [(f"o{i+1}", b) for i, b in enumerate(lay.obstacles)]
    flags = [f"(objective {n})" for n, _ in wps]
    flags += [f"(obstacle {n})" for n, _ in obst]
    lander_wp = wps[-1][0]
    n = len(wps)
    targets = ["obj1"] + (["obj2"] if n >= 2 else [])
    inits = ["(available r1)",
             "(equipped-for-soil-analysis r1)",
             "(equipped-for-rock-analysis r1)",
             "(equipped-for-imaging r1)",
             "(store-of s1 r1)", "(empty s1)",
             "(on-board cam1 r1)",
             "(supports cam1 low-res)", "(supports cam1 high-res)",
             f"(at-lander l1 {lander_wp})", "(channel-free l1)",
             "(at-soil-sample w1)",
             "(visible-from obj1 w1)"]
    inits += [f"(visible {w} {lander_wp})" for w, _ in wps]
    goals = ["(communicated-soil-data w1)",
             "(communicated-image-data obj1 low-res)"]
    if n >= 2:
        inits += ["(at-rock-sample w2)", "(visible-from obj2 w2)"]
        goals.append("(communicated-rock-data w2)")
    wp_names = " ".join(x for x, _ in wps)
    obst_names = (" " + " ".join(x for x, _ in obst) + " - object"
                  if obst else "")
    return f"""(define (problem rover-{spec.seed})
  (:domain rover)
  (:objects r1 - rover s1 - store cam1 - camera
            low-res high-res - mode l1 - lander
            {' '.join(targets)} - target {wp_names} - waypoint{obst_names})
  (:regions {_fmt_regions(wps + obst, flags)})
  (:init {' '.join(inits)}
         (= (location-x r1) {spec.start[0]:g})
         (= (location-y r1) {spec.start[1]:g}))
  (:goal (and {' '.join(goals)}))
  (:parameters-bounds {_BOUNDS})
)
"""


_BUILDERS = {"auv": _auv_problem, "taxi": _taxi_problem,
             "rover": _rover_problem}


def domain_source(family: str) -> str:
    path = resources.files("mxplan") / "domains" / f"{family}-domain.pddlx"
    return path.read_text()


def generate(spec: GenSpec) -> tuple[pddlx.DomainDef, pddlx.ProblemDef]:
    """Deterministic under (family, seed); screened for baseline solvability."""
    spec.check()
    dom = pddlx.parse_domain(domain_source(spec.family))
    for attempt in range(_MAX_LAYOUTS):
        lay = _layout(spec, attempt)
        prob = pddlx.parse_problem(_BUILDERS[spec.family](spec, lay), dom)
        if not spec.screen:
            return dom, prob
        model = grounder.ground(dom, prob)
        cfg = planner.PlannerConfig(cutoff_seconds=spec.screen_seconds,
                                    map_side=float(spec.map_side))
        res = planner.solve_baseline(model, spec.screen_delta, cfg)
        if res.solved:
            return dom, prob
    raise PlacementFailure(
        f"no solvable layout found in {_MAX_LAYOUTS} attempts")


def problem_source(spec: GenSpec) -> str:
    dom, prob = generate(spec)
    return pddlx.print_problem(prob)


def write_instance(spec: GenSpec, root: Path) -> tuple[Path, Path]:
    """Emit bench/<family>/<seed>/{domain,problem}.pddlx."""
    dom, prob = generate(spec)
    out = Path(root) / spec.family / str(spec.seed)
    out.mkdir(parents=True, exist_ok=True)
    dom_path = out / "domain.pddlx"
    prob_path = out / "problem.pddlx"
    dom_path.write_text(domain_source(spec.family))
    prob_path.write_text(pddlx.print_problem(prob))
    return dom_path, prob_path


# ---------------------------------------------------------------------------
# evaluation harness

@dataclass
class Comparison:
    instance_names: list[str]
    planner_names: list[str]
    costs: dict[tuple[str, str], float | None]

    def solve_count(self, planner_name: str) -> int:
        return sum(self.costs[i, planner_name] is not None
                   for i in self.instance_names)

    def common_instances(self) -> list[str]:
        return [i for i in self.instance_names
                if all(self.costs[i, p] is not None
                       for p in self.planner_names)]

    def average(self, planner_name: str) -> float | None:
        common = self.common_instances()
        if not common:
            return None
        return sum(self.costs[i, planner_name] for i in common) / len(common)

    def to_csv(self) -> str:
        rows = ["instance," + ",".join(self.planner_names)]
        for i in self.instance_names:
            cells = [("" if self.costs[i, p] is None
                      else f"{self.costs[i, p]:.4f}")
                     for p in self.planner_names]
            rows.append(",".join([i] + cells))
        solved = [str(self.solve_count(p)) for p in self.planner_names]
        rows.append(",".join(["solved"] + solved))
        avgs = [("" if self.average(p) is None else f"{self.average(p):.4f}")
                for p in self.planner_names]
        rows.append(",".join(["average"] + avgs))
        return "\n".join(rows) + "\n"

    def to_text(self) -> str:
        header = ["instance"] + self.planner_names
        body = []
        for i in self.instance_names:
            body.append([i] + [("-" if self.costs[i, p] is None
                                else f"{self.costs[i, p]:.2f}")
                               for p in self.planner_names])
        body.append(["solved"] + [str(self.solve_count(p))
                                  for p in self.planner_names])
        body.append(["average"] + [("-" if self.average(p) is None
                                    else f"{self.average(p):.2f}")
                                   for p in self.planner_names])
        widths = [max(len(r[c]) for r in [header] + body)
                  for c in range(len(header))]
        lines = []
        for r in [header] + body:
            lines.append("  ".join(cell.rjust(w)
                                   for cell, w in zip(r, widths)))
        return "\n".join(lines) + "\n"


def evaluate(instances: list[tuple[str, grounder.GroundedModel]],
             planners: dict[str, Callable[[grounder.GroundedModel],
                                          planner.PlannerResult]]) -> Comparison:
    """Run each planner on each instance; invalid plans score as failures.

    Averages are reported over the instances every planner solved.
    """
    costs: dict[tuple[str, str], float | None] = {}
    for iname, model in instances:
        for pname, fn in planners.items():
            res = fn(model)
            cost = None
            if res.solved and res.plan is not None:
                if engine.validate(model, res.plan).valid:
                    cost = res.plan.total_cost
            costs[iname, pname] = cost
    return Comparison([i for i, _ in instances], list(planners), costs)


def fig_obstacle_series(spec: GenSpec, obstacle_seeds: list[int]) -> list[GenSpec]:
    """Specs that keep the objective layout and resample only obstacles."""
    return [replace(spec, obstacle_seed=s) for s in obstacle_seeds]
