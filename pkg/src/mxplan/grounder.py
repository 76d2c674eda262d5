"""Instantiate schemas over objects into an indexed ground model.

Ground actions are numbered by schema declaration order, then by the
lexicographic object binding; the one-hot encoding places the 1 at
position X-1-index (rightmost slot selects action 0).  Numeric action
parameters are never enumerated; they stay symbolic, one shared slot
per distinct parameter name across all schemas.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import pddlx
from .geometry import Region
from .pddlx import (
    ActionSchema,
    Binary,
    Condition,
    Const,
    DomainDef,
    EventSchema,
    Expr,
    FluentRef,
    Literal,
    Neg,
    NumericCond,
    ParamRef,
    Pow,
    ProblemDef,
    RegionCond,
    RegionFlagCond,
    Sqrt,
    expr_params,
)


class GroundingExplosion(Exception):
    """Raised when instantiation would exceed the configured action cap."""


@dataclass(frozen=True)
class GFluent(Expr):
    """Grounded fluent reference carrying its dense index."""

    k: int
    name: str
    args: tuple[str, ...]


@dataclass(frozen=True)
class GroundLiteral:
    m: int           # proposition index
    positive: bool


@dataclass(frozen=True)
class GroundNumeric:
    expr: Expr       # grounded: GFluent / ParamRef / Const / operators
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def holds(self, value: float) -> bool:
        if self.lo_closed:
            if value < self.lo:
                return False
        elif value <= self.lo:
            return False
        if self.hi_closed:
            return value <= self.hi
        return value < self.hi


@dataclass(frozen=True)
class GroundRegion:
    kx: int
    ky: int
    region: Region


@dataclass(frozen=True)
class GroundAction:
    index: int
    schema: str
    binding: tuple[str, ...]
    num_params: tuple[str, ...]          # slot names this action reads
    pre_p: tuple[GroundLiteral, ...]
    pre_n: tuple[GroundNumeric, ...]
    pre_r: tuple[GroundRegion, ...]
    eff_row: dict[int, int]              # m -> +-1 (row of the logical effect matrix)
    kappa: dict[int, int]                # k -> +-1 update direction
    eff_static: dict[int, Expr]          # k -> parameter-independent magnitude
    eff_dynamic: dict[int, Expr]         # k -> magnitude depending on parameters
    move_pair: tuple[int, int] | None = None   # (kx, ky) displaced by parameters

    @property
    def name(self) -> str:
        if self.binding:
            return f"{self.schema} {' '.join(self.binding)}"
        return self.schema

    @property
    def is_numeric(self) -> bool:
        return bool(self.kappa)

    def one_hot(self, X: int) -> np.ndarray:
        v = np.zeros(X)
        v[X - 1 - self.index] = 1.0
        return v


@dataclass(frozen=True)
class GroundEvent:
    name: str
    pre_p: tuple[GroundLiteral, ...]
    pre_n: tuple[GroundNumeric, ...]
    pre_r: tuple[GroundRegion, ...]
    eff_row: dict[int, int]


@dataclass(frozen=True)
class GroundedModel:
    props: tuple[tuple[str, tuple[str, ...]], ...]   # index -> grounded atom
    fluents: tuple[tuple[str, tuple[str, ...]], ...]
    actions: tuple[GroundAction, ...]                # end action excluded
    events: tuple[GroundEvent, ...]
    end_index: int                                   # == len(actions)
    goal_p: tuple[GroundLiteral, ...]
    goal_n: tuple[GroundNumeric, ...]
    goal_r: tuple[GroundRegion, ...]
    param_slots: tuple[str, ...]                     # slot universe, size T
    lower: np.ndarray                                # per-slot bounds, size T
    upper: np.ndarray
    regions: dict[str, Region]
    init_P: np.ndarray                               # polarity vector, +-1
    init_V: np.ndarray
    prop_index: dict[tuple[str, tuple[str, ...]], int] = field(default_factory=dict)
    fluent_index: dict[tuple[str, tuple[str, ...]], int] = field(default_factory=dict)

    @property
    def M(self) -> int:
        return len(self.props)

    @property
    def K(self) -> int:
        return len(self.fluents)

    @property
    def X(self) -> int:
        return len(self.actions)

    @property
    def T(self) -> int:
        return len(self.param_slots)

    def slot(self, name: str) -> int:
        return self.param_slots.index(name)

    def effect_matrix(self) -> np.ndarray:
        """Dense E with one row per action (indexed bottom-up to match one-hot)."""
        E = np.zeros((self.X, self.M))
        for a in self.actions:
            for m, v in a.eff_row.items():
                E[self.X - 1 - a.index, m] = v
        return E

    def action_by_name(self, name: str) -> GroundAction:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(name)

    def to_json(self) -> str:
        def row(d):
            return {str(k): v for k, v in d.items()}

        doc = {
            "M": self.M,
            "K": self.K,
            "X": self.X,
            "T": self.T,
            "propositions": [" ".join((n,) + a) for n, a in self.props],
            "fluents": [" ".join((n,) + a) for n, a in self.fluents],
            "parameter_slots": list(self.param_slots),
            "bounds": {
                s: [none_inf(self.lower[j]), none_inf(self.upper[j])]
                for j, s in enumerate(self.param_slots)
            },
            "end_index": self.end_index,
            "actions": [
                {
                    "index": a.index,
                    "name": a.name,
                    "numeric_params": list(a.num_params),
                    "effect_row": row(a.eff_row),
                    "kappa": row(a.kappa),
                }
                for a in self.actions
            ],
            "events": [e.name for e in self.events],
        }
        return json.dumps(doc, indent=2)


def none_inf(v: float):
    return None if math.isinf(v) else float(v)


# ---------------------------------------------------------------------------

def _objects_by_type(dom: DomainDef, prob: ProblemDef) -> dict[str, list[str]]:
    by_type: dict[str, list[str]] = {}
    for name, ty in prob.objects:
        for sup in dom.supertypes(ty):
            by_type.setdefault(sup, []).append(name)
    for names in by_type.values():
        names.sort()
    return by_type


def ground_expr(e: Expr, bind: dict[str, str],
                fluent_index: dict[tuple[str, tuple[str, ...]], int]) -> Expr:
    if isinstance(e, FluentRef):
        args = tuple(bind.get(a, a) for a in e.args)
        key = (e.name, args)
        if key not in fluent_index:
            raise KeyError(f"unknown fluent {key}")
        return GFluent(fluent_index[key], e.name, args)
    if isinstance(e, Binary):
        return Binary(e.op, ground_expr(e.left, bind, fluent_index),
                      ground_expr(e.right, bind, fluent_index))
    if isinstance(e, Neg):
        return Neg(ground_expr(e.arg, bind, fluent_index))
    if isinstance(e, Sqrt):
        return Sqrt(ground_expr(e.arg, bind, fluent_index))
    if isinstance(e, Pow):
        return Pow(ground_expr(e.base, bind, fluent_index), e.exponent)
    return e  # Const, ParamRef


def eval_ground_expr(e: Expr, V, theta: dict[str, float]) -> float:
    """Evaluate a grounded expression against numeric values and parameters."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, GFluent):
        return float(V[e.k])
    if isinstance(e, ParamRef):
        return theta[e.name]
    if isinstance(e, Binary):
        l = eval_ground_expr(e.left, V, theta)
        r = eval_ground_expr(e.right, V, theta)
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        return l / r
    if isinstance(e, Neg):
        return -eval_ground_expr(e.arg, V, theta)
    if isinstance(e, Sqrt):
        return math.sqrt(eval_ground_expr(e.arg, V, theta))
    if isinstance(e, Pow):
        return eval_ground_expr(e.base, V, theta) ** e.exponent
    raise TypeError(f"cannot evaluate {e!r}")


class _Grounder:
    def __init__(self, dom: DomainDef, prob: ProblemDef, cap: int):
        self.dom = dom
        self.prob = prob
        self.cap = cap
        self.by_type = _objects_by_type(dom, prob)
        self.regions = {
            r.name: Region.rect(r.name, r.x0, r.y0, r.x1, r.y1,
                                is_obstacle=r.is_obstacle,
                                is_objective=r.is_objective)
            for r in prob.regions
        }
        self.props: list[tuple[str, tuple[str, ...]]] = []
        self.prop_index: dict[tuple[str, tuple[str, ...]], int] = {}
        for pname, ptypes in dom.predicates:
            pools = [self.by_type.get(t, []) for t in ptypes]
            for combo in itertools.product(*pools):
                key = (pname, tuple(combo))
                self.prop_index[key] = len(self.props)
                self.props.append(key)
        self.fluents: list[tuple[str, tuple[str, ...]]] = []
        self.fluent_index: dict[tuple[str, tuple[str, ...]], int] = {}
        for fname, ftypes in dom.functions:
            pools = [self.by_type.get(t, []) for t in ftypes]
            for combo in itertools.product(*pools):
                key = (fname, tuple(combo))
                self.fluent_index[key] = len(self.fluents)
                self.fluents.append(key)
        slots: list[str] = []
        for schema in dom.actions:
            for s in schema.num_params:
                if s not in slots:
                    slots.append(s)
        self.param_slots = tuple(slots)

    # -- condition grounding ------------------------------------------------

    def _ground_conditions(self, conds, bind):
        """Returns (pre_p, pre_n, pre_r) or None when statically false."""
        pre_p: list[GroundLiteral] = []
        pre_n: list[GroundNumeric] = []
        pre_r: list[GroundRegion] = []
        for c in conds:
            if isinstance(c, Literal):
                args = tuple(bind.get(a, a) for a in c.args)
                key = (c.pred, args)
                if key not in self.prop_index:
                    return None  # binding outside the typed universe
                pre_p.append(GroundLiteral(self.prop_index[key], c.positive))
            elif isinstance(c, NumericCond):
                expr = ground_expr(c.expr, bind, self.fluent_index)
                pre_n.append(GroundNumeric(expr, c.lo, c.hi,
                                           c.lo_closed, c.hi_closed))
            elif isinstance(c, RegionCond):
                rname = bind.get(c.region, c.region)
                if rname not in self.regions:
                    return None  # object has no geometry attached
                gx = ground_expr(c.x, bind, self.fluent_index)
                gy = ground_expr(c.y, bind, self.fluent_index)
                assert isinstance(gx, GFluent) and isinstance(gy, GFluent)
                pre_r.append(GroundRegion(gx.k, gy.k, self.regions[rname]))
            elif isinstance(c, RegionFlagCond):
                rname = bind.get(c.region, c.region)
                r = self.regions.get(rname)
                if r is None:
                    return None
                flag = r.is_obstacle if c.flag == "obstacle" else r.is_objective
                if not flag:
                    return None  # statically false; drop this binding
            else:
                raise TypeError(f"unknown condition {c!r}")
        return tuple(pre_p), tuple(pre_n), tuple(pre_r)

    def _effect_rows(self, schema: ActionSchema | EventSchema, bind):
        eff_row: dict[int, int] = {}
        for lit in schema.eff_add:
            key = (lit.pred, tuple(bind.get(a, a) for a in lit.args))
            eff_row[self.prop_index[key]] = 1
        for lit in schema.eff_del:
            key = (lit.pred, tuple(bind.get(a, a) for a in lit.args))
            m = self.prop_index[key]
            if eff_row.get(m) == 1:
                return None  # contradictory add/delete: drop the binding
            eff_row[m] = -1
        return eff_row

    def _bindings(self, obj_params):
        pools = [self.by_type.get(t, []) for _, t in obj_params]
        names = [n for n, _ in obj_params]
        for combo in itertools.product(*pools):
            yield dict(zip(names, combo))

    def ground(self) -> GroundedModel:
        actions: list[GroundAction] = []
        for schema in self.dom.actions:
            for bind in self._bindings(schema.obj_params):
                if len(actions) >= self.cap:
                    raise GroundingExplosion(
                        f"more than {self.cap} ground actions")
                pre = self._ground_conditions(schema.pre, bind)
                if pre is None:
                    continue
                eff_row = self._effect_rows(schema, bind)
                if eff_row is None:
                    continue
                kappa: dict[int, int] = {}
                stat: dict[int, Expr] = {}
                dyn: dict[int, Expr] = {}
                for ne in schema.eff_num:
                    target = ground_expr(ne.fluent, bind, self.fluent_index)
                    assert isinstance(target, GFluent)
                    k = target.k
                    if k in kappa:
                        raise GroundingExplosion(
                            f"{schema.name}: two numeric effects on one fluent")
                    kappa[k] = ne.direction
                    expr = ground_expr(ne.expr, bind, self.fluent_index)
                    (dyn if expr_params(ne.expr) else stat)[k] = expr
                move = self._move_pair(dyn)
                actions.append(GroundAction(
                    len(actions), schema.name,
                    tuple(bind[n] for n, _ in schema.obj_params),
                    schema.num_params, *pre, eff_row, kappa, stat, dyn, move))
        events: list[GroundEvent] = []
        for schema in self.dom.events:
            for bind in self._bindings(schema.obj_params):
                pre = self._ground_conditions(schema.pre, bind)
                if pre is None:
                    continue
                eff_row = self._effect_rows(schema, bind)
                if eff_row is None:
                    continue
                name = schema.name
                if bind:
                    name += " " + " ".join(bind[n] for n, _ in schema.obj_params)
                events.append(GroundEvent(name, *pre, eff_row))

        goal = self._ground_conditions(self.prob.goal, {})
        if goal is None:
            raise GroundingExplosion("goal contains a statically false condition")

        P0 = np.full(len(self.props), -1.0)
        for pname, args in self.prob.init_props:
            P0[self.prop_index[(pname, args)]] = 1.0
        V0 = np.zeros(len(self.fluents))
        assigned = set()
        for fl, val in self.prob.init_fluents:
            k = self.fluent_index[(fl.name, fl.args)]
            V0[k] = val
            assigned.add(k)
        missing = [self.fluents[k] for k in range(len(self.fluents))
                   if k not in assigned]
        if missing:
            names = ", ".join(" ".join((n,) + a) for n, a in missing)
            raise GroundingExplosion(f"fluents without initial value: {names}")

        bmap = self.prob.bounds_map()
        lower = np.array([bmap.get(s, (-math.inf, math.inf))[0]
                          for s in self.param_slots])
        upper = np.array([bmap.get(s, (-math.inf, math.inf))[1]
                          for s in self.param_slots])
        return GroundedModel(
            tuple(self.props), tuple(self.fluents), tuple(actions),
            tuple(events), len(actions), *goal, self.param_slots,
            lower, upper, self.regions, P0, V0,
            dict(self.prop_index), dict(self.fluent_index))

    def _move_pair(self, dyn: dict[int, Expr]) -> tuple[int, int] | None:
        """Detect a parameter-driven planar displacement: a pair of fluents
        named <base>-x / <base>-y with identical arguments."""
        for k in dyn:
            name, args = self.fluents[k]
            if name.endswith("-x"):
                mate = (name[:-2] + "-y", args)
                km = self.fluent_index.get(mate)
                if km is not None and km in dyn:
                    return (k, km)
        return None


def ground(dom: DomainDef, prob: ProblemDef, cap: int = 100000) -> GroundedModel:
    """Ground a parsed domain/problem pair into dense-index form."""
    return _Grounder(dom, prob, cap).ground()
