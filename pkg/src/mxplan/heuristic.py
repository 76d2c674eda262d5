"""Relaxed-planning-graph heuristic with interval-based numeric relaxation.

The graph layers propositions and actions while representing every numeric
variable per level as an interval that only widens.  Construction runs in
three phases:

 1. layering: each ground action is scheduled at the first level where its
    propositional preconditions hold and its region preconditions overlap
    the interval box, until the goal appears;
 2. pruning: actions whose positive effects feed no goal and no later
    propositional precondition are removed to a fixed point;
 3. repair: numeric preconditions (and numeric/region goals) whose
    intervals no longer intersect after pruning pull provider actions back
    in at earlier levels, prepending new levels at the front when needed.

The heuristic value is the total number of action nodes in the final
graph.  The graph also yields per-variable target bounds: the constraining
interval of the nearest numeric condition on each variable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .grounder import (
    GFluent,
    GroundAction,
    GroundedModel,
    GroundNumeric,
    GroundRegion,
    eval_ground_expr,
)
from .pddlx import Binary, Const, Expr, Neg, ParamRef, Pow, Sqrt

_CLIP = 1e6  # finite stand-in for infinite parameter bounds in products

Unreachable = type("Unreachable", (), {"__repr__": lambda self: "Unreachable"})()


class Deadend(Exception):
    """No applicable action leads to a reachable relaxed goal."""


# ---------------------------------------------------------------------------
# interval arithmetic

Iv = tuple[float, float]


def _cmul(x: float, y: float) -> float:
    # inf * 0 is 0 here (an absent magnitude contributes nothing)
    if x == 0.0 or y == 0.0:
        return 0.0
    return x * y


def iv_add(a: Iv, b: Iv) -> Iv:
    return (a[0] + b[0], a[1] + b[1])


def iv_sub(a: Iv, b: Iv) -> Iv:
    return (a[0] - b[1], a[1] - b[0])


def iv_mul(a: Iv, b: Iv) -> Iv:
    c = [_cmul(a[0], b[0]), _cmul(a[0], b[1]), _cmul(a[1], b[0]), _cmul(a[1], b[1])]
    return (min(c), max(c))


def iv_neg(a: Iv) -> Iv:
    return (-a[1], -a[0])


def iv_union(a: Iv, b: Iv) -> Iv:
    return (min(a[0], b[0]), max(a[1], b[1]))


def iv_scale(a: Iv, s: int) -> Iv:
    return a if s >= 0 else iv_neg(a)


def expr_interval(e: Expr, I: list[Iv], pbounds: dict[str, Iv]) -> Iv:
    """Range of a grounded expression over level intervals and parameter bounds."""
    if isinstance(e, Const):
        return (e.value, e.value)
    if isinstance(e, GFluent):
        return I[e.k]
    if isinstance(e, ParamRef):
        lo, hi = pbounds.get(e.name, (-_CLIP, _CLIP))
        return (max(lo, -_CLIP), min(hi, _CLIP))
    if isinstance(e, Binary):
        l = expr_interval(e.left, I, pbounds)
        r = expr_interval(e.right, I, pbounds)
        if e.op == "+":
            return iv_add(l, r)
        if e.op == "-":
            return iv_sub(l, r)
        if e.op == "*":
            return iv_mul(l, r)
        if r[0] <= 0.0 <= r[1]:           # division by an interval through 0
            return (-math.inf, math.inf)
        return iv_mul(l, (1.0 / r[1], 1.0 / r[0]))
    if isinstance(e, Neg):
        return iv_neg(expr_interval(e.arg, I, pbounds))
    if isinstance(e, Sqrt):
        lo, hi = expr_interval(e.arg, I, pbounds)
        return (math.sqrt(max(lo, 0.0)), math.sqrt(max(hi, 0.0)))
    if isinstance(e, Pow):
        lo, hi = expr_interval(e.base, I, pbounds)
        c = [lo**e.exponent, hi**e.exponent]
        if e.exponent % 2 == 0 and lo <= 0.0 <= hi:
            c.append(0.0)
        return (min(c), max(c))
    raise TypeError(f"cannot bound {e!r}")


def numeric_cond_met(c: GroundNumeric, I: list[Iv], pbounds) -> bool:
    lo, hi = expr_interval(c.expr, I, pbounds)
    return hi >= c.lo and lo <= c.hi  # optimistic: intervals overlap


def region_cond_met(c: GroundRegion, I: list[Iv]) -> bool:
    bx0, by0, bx1, by1 = c.region.bounding_box()
    (xl, xh), (yl, yh) = I[c.kx], I[c.ky]
    return xh >= bx0 and xl <= bx1 and yh >= by0 and yl <= by1


# ---------------------------------------------------------------------------
# relaxed graph

@dataclass
class RelaxedGraph:
    prop_levels: list[set[int]]
    action_levels: list[list[GroundAction]]
    intervals: list[list[Iv]]          # one vector per proposition level
    goal_level: int                    # == len(action_levels)

    @property
    def h(self) -> int:
        return sum(len(level) for level in self.action_levels)


def relaxed_successor(s: engine.State, a: GroundAction,
                      theta: dict[str, float]) -> tuple[set[int], np.ndarray]:
    """Positive propositions plus adds; numerics updated at the given theta."""
    props = set(np.flatnonzero(s.P > 0).tolist())
    props.update(m for m, v in a.eff_row.items() if v > 0)
    V = s.V.copy()
    for k, d in engine.numeric_deltas(a, theta, s.V).items():
        V[k] += d
    return props, V


def _pbounds(model: GroundedModel) -> dict[str, Iv]:
    return {s: (model.lower[j], model.upper[j])
            for j, s in enumerate(model.param_slots)}


def _delta_interval(a: GroundAction, k: int, I: list[Iv], pbounds) -> Iv:
    mag: Iv = (0.0, 0.0)
    if k in a.eff_static:
        mag = iv_add(mag, expr_interval(a.eff_static[k], I, pbounds))
    if k in a.eff_dynamic:
        mag = iv_add(mag, expr_interval(a.eff_dynamic[k], I, pbounds))
    return iv_scale(mag, a.kappa[k])


def _apply_level(I: list[Iv], actions: list[GroundAction], pbounds) -> list[Iv]:
    """Next-level intervals: union of staying put and each action's update.

    Callers pass every action scheduled at this level or earlier (a
    scheduled action stays available at all later levels)."""
    out = list(I)
    for a in actions:
        for k in a.kappa:
            shifted = iv_add(I[k], _delta_interval(a, k, I, pbounds))
            out[k] = iv_union(out[k], shifted)
    return out


def _recompute_intervals(g: RelaxedGraph, pbounds) -> None:
    I = g.intervals[0]
    levels = [I]
    active: list[GroundAction] = []
    seen: set[int] = set()
    for acts in g.action_levels:
        for a in acts:
            if a.index not in seen:
                seen.add(a.index)
                active.append(a)
        I = _apply_level(I, active, pbounds)
        levels.append(I)
    g.intervals = levels


def _goal_met(model: GroundedModel, props: set[int], I: list[Iv],
              pbounds) -> bool:
    return (all(lit.m in props if lit.positive else lit.m not in props
                for lit in model.goal_p)
            and all(numeric_cond_met(c, I, pbounds) for c in model.goal_n)
            and all(region_cond_met(c, I) for c in model.goal_r))


_MAX_LEVELS = 1000


def build_and_extend(props0: set[int], V0: np.ndarray,
                     model: GroundedModel):
    """Build the relaxed graph from a relaxed state; Unreachable on failure."""
    pbounds = _pbounds(model)
    I0 = [(float(v), float(v)) for v in V0]
    g = _layer(props0, I0, model, pbounds)
    if g is Unreachable:
        return Unreachable
    _prune(g, model, protected=set())
    _recompute_intervals(g, pbounds)
    added = _repair(g, model, pbounds)
    if added is Unreachable:
        return Unreachable
    _prune(g, model, protected=added)
    _recompute_intervals(g, pbounds)
    if _repair(g, model, pbounds) is Unreachable:  # pruning must not break repair
        return Unreachable
    return g


def _layer(props0, I0, model, pbounds):
    props = set(props0)
    I = I0
    prop_levels = [set(props)]
    intervals = [I]
    action_levels: list[list[GroundAction]] = []
    scheduled: set[int] = set()
    if _goal_met(model, props, I, pbounds):
        return RelaxedGraph(prop_levels, [], intervals, 0)
    active: list[GroundAction] = []
    for _ in range(_MAX_LEVELS):
        layer = []
        for a in model.actions:
            if a.index in scheduled:
                continue
            if all(lit.m in props for lit in a.pre_p if lit.positive) and \
               all(region_cond_met(rc, I) for rc in a.pre_r):
                layer.append(a)
                scheduled.add(a.index)
        active.extend(layer)
        new_props = set(props)
        for a in layer:
            new_props.update(m for m, v in a.eff_row.items() if v > 0)
        new_I = _apply_level(I, active, pbounds)
        action_levels.append(layer)
        prop_levels.append(new_props)
        intervals.append(new_I)
        if _goal_met(model, new_props, new_I, pbounds):
            return RelaxedGraph(prop_levels, action_levels, intervals,
                                len(action_levels))
        if not layer and new_props == props and new_I == I:
            return Unreachable
        props, I = new_props, new_I
    return Unreachable


def _prune(g: RelaxedGraph, model: GroundedModel, protected: set[int]) -> None:
    """Drop actions whose adds feed no goal and no later propositional
    precondition, to a fixed point.  Protected actions stay."""
    goal_props = {lit.m for lit in model.goal_p if lit.positive}
    changed = True
    while changed:
        changed = False
        for n in range(len(g.action_levels) - 1, -1, -1):
            needed = set(goal_props)
            for later in g.action_levels[n + 1:]:
                for a in later:
                    needed.update(lit.m for lit in a.pre_p if lit.positive)
            kept = []
            for a in g.action_levels[n]:
                adds = {m for m, v in a.eff_row.items() if v > 0}
                if a.index in protected or adds & needed:
                    kept.append(a)
                else:
                    changed = True
            g.action_levels[n] = kept
    # proposition levels follow the surviving actions
    for n, layer in enumerate(g.action_levels):
        base = set(g.prop_levels[n])
        for a in layer:
            base.update(m for m, v in a.eff_row.items() if v > 0)
        g.prop_levels[n + 1] = base


def _constrained_vars(cond) -> list[int]:
    if isinstance(cond, GroundNumeric):
        return [cond.expr.k] if isinstance(cond.expr, GFluent) else _expr_vars(cond.expr)
    return [cond.kx, cond.ky]


def _expr_vars(e: Expr) -> list[int]:
    if isinstance(e, GFluent):
        return [e.k]
    if isinstance(e, Binary):
        return _expr_vars(e.left) + _expr_vars(e.right)
    if isinstance(e, (Neg, Sqrt)):
        return _expr_vars(e.arg)
    if isinstance(e, Pow):
        return _expr_vars(e.base)
    return []


def _repair(g: RelaxedGraph, model: GroundedModel, pbounds):
    """Re-add numeric provider actions until every numeric/region condition
    in the graph intersects its level's intervals.  Returns the indices of
    actions added (protected from the next pruning pass)."""
    cap = max(10, 10 * model.M * model.K)
    added: set[int] = set()
    for _ in range(cap):
        violation = _first_violation(g, model, pbounds)
        if violation is None:
            return added
        level, vars_needed = violation
        providers = [a for a in model.actions
                     if any(k in a.kappa for k in vars_needed)]
        if not providers:
            return Unreachable
        if not _insert_providers(g, providers, level, added):
            return Unreachable
        _recompute_intervals(g, pbounds)
    return Unreachable


def _first_violation(g: RelaxedGraph, model, pbounds):
    for n, layer in enumerate(g.action_levels):
        I = g.intervals[n]
        for a in layer:
            for c in a.pre_n:
                if not numeric_cond_met(c, I, pbounds):
                    return n, _constrained_vars(c)
            for c in a.pre_r:
                if not region_cond_met(c, I):
                    return n, [c.kx, c.ky]
    I = g.intervals[g.goal_level]
    for c in model.goal_n:
        if not numeric_cond_met(c, I, pbounds):
            return g.goal_level, _constrained_vars(c)
    for c in model.goal_r:
        if not region_cond_met(c, I):
            return g.goal_level, [c.kx, c.ky]
    return None


def _insert_providers(g: RelaxedGraph, providers, level, added: set[int]) -> bool:
    """Add providers at the latest level before `level` where one is missing;
    prepend a fresh first level when all earlier levels are saturated."""
    for n in range(level - 1, -1, -1):
        present = {a.index for a in g.action_levels[n]}
        fresh = [a for a in providers
                 if a.index not in present
                 and all(lit.m in g.prop_levels[n] for lit in a.pre_p
                         if lit.positive)]
        if fresh:
            g.action_levels[n].extend(fresh)
            added.update(a.index for a in fresh)
            for m in range(n + 1, len(g.prop_levels)):
                for a in fresh:
                    g.prop_levels[m].update(
                        mm for mm, v in a.eff_row.items() if v > 0)
            return True
    # prepend a new action level at the front (the graph grows backward)
    fresh = [a for a in providers
             if all(lit.m in g.prop_levels[0] for lit in a.pre_p if lit.positive)]
    if not fresh:
        return False
    g.action_levels.insert(0, list(fresh))
    g.prop_levels.insert(0, set(g.prop_levels[0]))
    g.intervals.insert(0, list(g.intervals[0]))
    for m in range(1, len(g.prop_levels)):
        for a in fresh:
            g.prop_levels[m].update(mm for mm, v in a.eff_row.items() if v > 0)
    g.goal_level += 1
    added.update(a.index for a in fresh)
    return True


# ---------------------------------------------------------------------------
# bound vectors and action selection

def _mid(lo: float, hi: float) -> float:
    return (max(lo, -_CLIP) + min(hi, _CLIP)) / 2.0


def extract_bounds(g: RelaxedGraph, model: GroundedModel,
                   V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-variable target interval from the nearest constraining condition.

    For each variable the constraining conditions at the smallest graph
    level are collected; the one whose midpoint is closest to the current
    value wins.  Unconstrained variables get (-inf, +inf).
    """
    K = model.K
    U = np.full(K, math.inf)
    L = np.full(K, -math.inf)
    per_var: dict[int, tuple[int, list[tuple[float, float]]]] = {}

    def offer(level: int, k: int, lo: float, hi: float):
        cur = per_var.get(k)
        if cur is None or level < cur[0]:
            per_var[k] = (level, [(lo, hi)])
        elif level == cur[0]:
            cur[1].append((lo, hi))

    def offer_cond(level: int, c):
        if isinstance(c, GroundNumeric):
            if isinstance(c.expr, GFluent):
                offer(level, c.expr.k, c.lo, c.hi)
        else:
            bx0, by0, bx1, by1 = c.region.bounding_box()
            offer(level, c.kx, bx0, bx1)
            offer(level, c.ky, by0, by1)

    for n, layer in enumerate(g.action_levels):
        for a in layer:
            for c in a.pre_n:
                offer_cond(n, c)
            for c in a.pre_r:
                offer_cond(n, c)
    for c in model.goal_n:
        offer_cond(g.goal_level, c)
    for c in model.goal_r:
        offer_cond(g.goal_level, c)

    for k, (_, cands) in per_var.items():
        best = min(cands, key=lambda b: abs(V[k] - _mid(b[0], b[1])))
        L[k], U[k] = best
    return U, L


@dataclass(frozen=True)
class Selection:
    action: GroundAction | None      # None means the end action
    h: int
    U: np.ndarray
    L: np.ndarray
    graph: RelaxedGraph | None = None

    @property
    def is_end(self) -> bool:
        return self.action is None


def select_action(s: engine.State, model: GroundedModel,
                  theta: dict[str, float]) -> Selection:
    """Pick the applicable action whose relaxed successor has least h.

    The end action is preferred whenever the goal holds.  Ties favor
    logical actions over numeric ones, then the lowest ground index.
    Raises Deadend when no candidate's relaxed goal is reachable.
    """
    K = model.K
    if engine.goal_satisfied(s, model):
        return Selection(None, 0, np.full(K, math.inf), np.full(K, -math.inf))
    best: tuple | None = None
    for a in model.actions:
        if not engine.applicable(s, a, theta):
            continue
        props, V = relaxed_successor(s, a, theta)
        g = build_and_extend(props, V, model)
        if g is Unreachable:
            continue
        rank = (g.h, a.is_numeric, a.index)
        if best is None or rank < best[0]:
            best = (rank, a, g, V)
    if best is None:
        raise Deadend("no applicable action reaches the relaxed goal")
    _, a, g, V = best
    U, L = extract_bounds(g, model, V)
    return Selection(a, g.h, U, L, g)
