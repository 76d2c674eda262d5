"""Planner drivers.

`solve` iterates: heuristic rollout, loss recording, reverse-mode
gradient, projected parameter update, until the stop loss hits zero
(valid, collision-free, goal-reaching plan) or a cutoff fires.

`solve_baseline` is the discretized comparison planner: greedy best-first
search over eight fixed-step movement directions plus the logical
actions, guided by the same relaxed-graph heuristic, with every movement
segment pre-checked against the obstacles.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff, engine, geometry, heuristic
from .engine import Plan, PlanStep, State
from .grounder import GroundedModel
from .pddlx import expr_params


@dataclass
class PlannerConfig:
    N: int = 50
    omega: float = 0.001
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 100.0
    max_iterations: int = 20000
    cutoff_seconds: float = 300.0
    seed: int = 0
    detour_eps: float = 0.5
    stagnation_limit: int = 200     # iterations without l_all improvement
    map_side: float = 150.0         # lattice clip for the baseline

    def check(self) -> None:
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if self.omega <= 0:
            raise ValueError("learning rate must be positive")
        if min(self.w1, self.w2, self.w3) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.cutoff_seconds <= 0:
            raise ValueError("cutoff must be positive")


@dataclass
class PlannerResult:
    status: str                     # Solved | Cutoff | Deadend
    plan: Plan | None
    iterations: int
    losses: autodiff.LossBreakdown | None
    cost: float
    history: list[tuple] = field(default_factory=list)  # (it, Lb, Lo, cost, Lall, Lstop)

    @property
    def solved(self) -> bool:
        return self.status == "Solved"


def init_params(model: GroundedModel, cfg: PlannerConfig,
                rng: np.random.Generator) -> np.ndarray:
    """Uniform start in [max(lo,-1), min(hi,1)] per slot (bounds permitting)."""
    Theta = np.zeros((cfg.N, model.T))
    for j in range(model.T):
        a = max(model.lower[j], -1.0)
        b = min(model.upper[j], 1.0)
        if a > b:
            a = model.lower[j] if math.isfinite(model.lower[j]) else -1.0
            b = model.upper[j] if math.isfinite(model.upper[j]) else 1.0
        Theta[:, j] = rng.uniform(a, b, size=cfg.N)
    return Theta


def solve(model: GroundedModel, cfg: PlannerConfig | None = None,
          observer=None) -> PlannerResult:
    """Gradient-descent search over per-step numeric parameters.

    observer, when given, is called as observer(iteration, Theta) before
    every rollout; it exists for instrumentation (e.g. invariant checks).
    """
    cfg = cfg or PlannerConfig()
    cfg.check()
    rng = np.random.default_rng(cfg.seed)
    Theta = init_params(model, cfg, rng)
    w = (cfg.w1, cfg.w2, cfg.w3)
    t0 = time.monotonic()
    best = math.inf
    stagnant = 0
    history: list[tuple] = []
    last = None
    for it in range(1, cfg.max_iterations + 1):
        if observer is not None:
            observer(it, Theta)
        r = autodiff.rollout_record(model, Theta, w=w,
                                    detour_eps=cfg.detour_eps)
        last = r
        ls = r.losses
        history.append((it, sum(ls.lb), sum(ls.lo), ls.cost, ls.l_all, ls.l_stop))
        if ls.l_stop == 0:
            return PlannerResult("Solved", r.plan, it, ls,
                                 r.plan.total_cost, history)
        if r.deadend and not r.plan.steps:
            return PlannerResult("Deadend", None, it, ls, math.inf, history)
        if ls.l_all < best - 1e-6:
            best = ls.l_all
            stagnant = 0
        else:
            stagnant += 1
            if stagnant >= cfg.stagnation_limit:
                return PlannerResult("Deadend", None, it, ls, math.inf, history)
        if time.monotonic() - t0 > cfg.cutoff_seconds:
            return PlannerResult("Cutoff", None, it, ls, math.inf, history)
        grad = autodiff.backward(r, cfg.N, model.T)
        Theta = autodiff.update_params(Theta, grad, cfg.omega,
                                       model.lower, model.upper)
    ls = last.losses if last else None
    return PlannerResult("Cutoff", None, cfg.max_iterations, ls,
                         math.inf, history)


# ---------------------------------------------------------------------------
# discretized baseline

_DIRS = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1)
         if (dx, dy) != (0, 0)]


def _fixed_step_theta(model: GroundedModel, action, dx: float,
                      dy: float) -> dict[str, float] | None:
    """Parameter assignment realizing displacement (dx, dy), or None when
    the assignment leaves the declared bounds."""
    kx, ky = action.move_pair
    px = expr_params(action.eff_dynamic[kx])
    py = expr_params(action.eff_dynamic[ky])
    shared = px & py
    theta: dict[str, float] = {}
    for s in shared:
        theta[s] = 1.0
    for s in px - shared:
        theta[s] = dx
    for s in py - shared:
        theta[s] = dy
    for s in action.num_params:
        theta.setdefault(s, 0.0)
        j = model.slot(s)
        if not (model.lower[j] <= theta[s] <= model.upper[j]):
            return None
    deltas = engine.numeric_deltas(action, theta, np.zeros(model.K))
    if not (math.isclose(deltas.get(kx, 0.0), dx, abs_tol=1e-9)
            and math.isclose(deltas.get(ky, 0.0), dy, abs_tol=1e-9)):
        return None
    return theta


def _state_h(s: State, model: GroundedModel) -> float:
    props = set(np.flatnonzero(s.P > 0).tolist())
    g = heuristic.build_and_extend(props, s.V.copy(), model)
    if g is heuristic.Unreachable:
        return math.inf
    return g.h


def _hash_state(s: State) -> tuple:
    return (s.P.tobytes(), tuple(np.round(s.V, 6)))


def solve_baseline(model: GroundedModel, delta: float,
                   cfg: PlannerConfig | None = None) -> PlannerResult:
    """Greedy best-first search with step length delta (ties: lower cost)."""
    if delta <= 0:
        raise ValueError("step length must be positive")
    cfg = cfg or PlannerConfig()
    cfg.check()
    obstacles = [r for r in model.regions.values() if r.is_obstacle]
    movers = [a for a in model.actions if a.move_pair is not None]
    logical: list[tuple] = []
    for a in model.actions:
        if a.move_pair is not None:
            continue
        # numeric non-movement actions run at a fixed unit setting
        theta = {}
        for s in a.num_params:
            j = model.slot(s)
            theta[s] = min(max(1.0, model.lower[j]), model.upper[j])
        logical.append((a, theta))
    move_steps = []
    for a in movers:
        for dx, dy in _DIRS:
            theta = _fixed_step_theta(model, a, dx * delta, dy * delta)
            if theta is not None:
                move_steps.append((a, theta, math.hypot(dx * delta, dy * delta)))

    t0 = time.monotonic()
    s0 = engine.initial_state(model)
    counter = 0
    frontier = [(_state_h(s0, model), 0.0, counter, s0, [])]
    seen = {_hash_state(s0)}
    expansions = 0
    while frontier:
        if time.monotonic() - t0 > cfg.cutoff_seconds:
            return PlannerResult("Cutoff", None, expansions, None, math.inf)
        h, cost, _, s, path = heapq.heappop(frontier)
        if h == math.inf:
            continue
        if engine.goal_satisfied(s, model):
            plan = Plan(list(path))
            return PlannerResult("Solved", plan, expansions, None,
                                 plan.total_cost)
        expansions += 1
        succs = []
        for a, theta in logical:
            if engine.applicable(s, a, theta):
                succs.append((a, theta, 0.0))
        for a, theta, step_cost in move_steps:
            if not engine.applicable(s, a, theta):
                continue
            kx, ky = a.move_pair
            p = (s.V[kx], s.V[ky])
            q = (p[0] + theta_dx(a, theta, model),
                 p[1] + theta_dy(a, theta, model))
            if not (0.0 <= q[0] <= cfg.map_side and 0.0 <= q[1] <= cfg.map_side):
                continue
            if any(geometry.segment_intersects(r, p, q) for r in obstacles):
                continue
            succs.append((a, theta, step_cost))
        for a, theta, step_cost in succs:
            try:
                s2 = engine.step(s, a, theta, model)
            except engine.NumericFault:
                continue
            key = _hash_state(s2)
            if key in seen:
                continue
            seen.add(key)
            counter += 1
            step = PlanStep(a.index, dict(theta), step_cost)
            heapq.heappush(frontier, (_state_h(s2, model), cost + step_cost,
                                      counter, s2, path + [step]))
    return PlannerResult("Deadend", None, expansions, None, math.inf)


def theta_dx(a, theta, model) -> float:
    kx, _ = a.move_pair
    return engine.numeric_deltas(a, theta, np.zeros(model.K)).get(kx, 0.0)


def theta_dy(a, theta, model) -> float:
    _, ky = a.move_pair
    return engine.numeric_deltas(a, theta, np.zeros(model.K)).get(ky, 0.0)
