"""Exact state semantics: applicability, transitions, events, plan validation.

States pair a proposition polarity vector P in {-1,1}^M with a numeric
vector V.  A transition writes the chosen action's effect row a over P as

    P' = a + (1 - a^2) * P

(entries touched by the row are overwritten, others kept), then updates
V by the action's signed effect magnitudes, then fires grounded events
to a fixed point (each event at most once per transition).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .grounder import GroundAction, GroundedModel, eval_ground_expr


class NumericFault(Exception):
    """A numeric update or expression produced NaN or infinity."""


@dataclass(frozen=True)
class State:
    P: np.ndarray  # polarity vector, entries -1.0 or 1.0
    V: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.V)):
            raise NumericFault("non-finite numeric state")

    def holds(self, m: int, positive: bool = True) -> bool:
        return (self.P[m] > 0) == positive

    @property
    def key(self) -> tuple:
        return (self.P.tobytes(), self.V.tobytes())


def initial_state(model: GroundedModel) -> State:
    return State(model.init_P.copy(), model.init_V.copy())


def _conditions_hold(s: State, pre_p, pre_n, pre_r, theta) -> bool:
    for lit in pre_p:
        if not s.holds(lit.m, lit.positive):
            return False
    for cond in pre_n:
        if not cond.holds(eval_ground_expr(cond.expr, s.V, theta)):
            return False
    for rc in pre_r:
        if not geometry.contains(rc.region, (s.V[rc.kx], s.V[rc.ky])):
            return False
    return True


def applicable(s: State, a: GroundAction, theta: dict[str, float]) -> bool:
    return _conditions_hold(s, a.pre_p, a.pre_n, a.pre_r, theta)


def goal_satisfied(s: State, model: GroundedModel) -> bool:
    """The end action's precondition: all goal conditions hold."""
    return _conditions_hold(s, model.goal_p, model.goal_n, model.goal_r, {})


def numeric_deltas(a: GroundAction, theta: dict[str, float],
                   V: np.ndarray) -> dict[int, float]:
    """Signed per-variable updates kappa * (static + dynamic magnitude)."""
    out: dict[int, float] = {}
    for k, sign in a.kappa.items():
        mag = 0.0
        if k in a.eff_static:
            mag += eval_ground_expr(a.eff_static[k], V, theta)
        if k in a.eff_dynamic:
            mag += eval_ground_expr(a.eff_dynamic[k], V, theta)
        if not math.isfinite(mag):
            raise NumericFault(f"effect of {a.name} on variable {k} is {mag}")
        out[k] = sign * mag
    return out


def fire_events(s: State, model: GroundedModel) -> State:
    """Fire triggered events to a fixed point; each fires at most once."""
    if not model.events:
        return s
    P = s.P
    fired: set[int] = set()
    changed = True
    while changed and len(fired) < len(model.events):
        changed = False
        cur = State(P, s.V)
        for i, ev in enumerate(model.events):
            if i in fired:
                continue
            if _conditions_hold(cur, ev.pre_p, ev.pre_n, ev.pre_r, {}):
                P = P.copy()
                for m, v in ev.eff_row.items():
                    P[m] = v
                fired.add(i)
                changed = True
                break
    return State(P, s.V)


def step(s: State, a: GroundAction, theta: dict[str, float],
         model: GroundedModel) -> State:
    """Apply an action (assumed applicable), then events."""
    row = np.zeros(model.M)
    for m, v in a.eff_row.items():
        row[m] = v
    P2 = row + (1.0 - row**2) * s.P
    V2 = s.V.copy()
    for k, delta in numeric_deltas(a, theta, s.V).items():
        V2[k] += delta
    return fire_events(State(P2, V2), model)


def action_cost(a: GroundAction, theta: dict[str, float], s: State) -> float:
    """Euclidean displacement for movement actions, 0 for logical ones."""
    if a.move_pair is None:
        return 0.0
    deltas = numeric_deltas(a, theta, s.V)
    kx, ky = a.move_pair
    return math.hypot(deltas.get(kx, 0.0), deltas.get(ky, 0.0))


# ---------------------------------------------------------------------------
# plans

@dataclass(frozen=True)
class PlanStep:
    index: int                  # ground action index
    theta: dict[str, float]     # values for the slots this action reads
    cost: float = 0.0


@dataclass
class Plan:
    steps: list[PlanStep] = field(default_factory=list)

    @property
    def total_cost(self) -> float:
        return sum(st.cost for st in self.steps)

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class Verdict:
    valid: bool
    step: int | None = None    # 1-based index of the first failing step
    reason: str | None = None
    mu: int = 0                # number of executed steps

    def __bool__(self) -> bool:
        return self.valid


def validate(model: GroundedModel, plan: Plan,
             tol: float = 1e-9) -> Verdict:
    """Replay a plan with exact semantics.

    Checks, in order per step: parameter bounds, applicability, obstacle
    crossing of the movement segment; finally that the goal holds in the
    terminal state.
    """
    obstacles = [r for r in model.regions.values() if r.is_obstacle]
    s = initial_state(model)
    for i, st in enumerate(plan.steps, start=1):
        a = model.actions[st.index]
        for slot in a.num_params:
            j = model.slot(slot)
            v = st.theta.get(slot)
            if v is None:
                return Verdict(False, i, "MissingParameter")
            if v < model.lower[j] - tol or v > model.upper[j] + tol:
                return Verdict(False, i, "BoundsViolated")
        if not applicable(s, a, st.theta):
            return Verdict(False, i, "NotApplicable")
        try:
            s2 = step(s, a, st.theta, model)
        except NumericFault:
            return Verdict(False, i, "NumericFault")
        if a.move_pair is not None:
            kx, ky = a.move_pair
            p = (s.V[kx], s.V[ky])
            q = (s2.V[kx], s2.V[ky])
            for r in obstacles:
                if geometry.segment_intersects(r, p, q):
                    return Verdict(False, i, "ObstacleCrossed")
        s = s2
    if not goal_satisfied(s, model):
        return Verdict(False, len(plan.steps) + 1, "GoalNotReached")
    return Verdict(True, mu=len(plan.steps))


# ---------------------------------------------------------------------------
# plan file format

def format_plan(model: GroundedModel, plan: Plan) -> str:
    lines = []
    total = 0.0
    for i, st in enumerate(plan.steps, start=1):
        a = model.actions[st.index]
        params = " ".join(f"{slot}={st.theta[slot]:.9f}" for slot in a.num_params)
        cost = f"{st.cost:.9f}"
        total += float(cost)  # sum the printed values so round trips are exact
        lines.append(f"{i} {a.name} | {params} | cost={cost}")
    lines.append(f"end total_cost={total:.9f}")
    return "\n".join(lines) + "\n"


_STEP_RE = re.compile(r"^(\d+) ([^|]+?) \| ([^|]*) \| cost=([-\d.eE+]+)$")
_END_RE = re.compile(r"^end total_cost=([-\d.eE+]+)$")


class PlanFormatError(Exception):
    pass


def parse_plan(model: GroundedModel, text: str) -> Plan:
    steps: list[PlanStep] = []
    saw_end = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if saw_end:
            raise PlanFormatError(f"line {lineno}: content after end line")
        m = _END_RE.match(line)
        if m:
            saw_end = True
            total = float(m.group(1))
            got = sum(s.cost for s in steps)
            if abs(total - got) > 1e-6 * max(1.0, abs(total)):
                raise PlanFormatError(
                    f"line {lineno}: total_cost {total} != sum of step costs {got}")
            continue
        m = _STEP_RE.match(line)
        if not m:
            raise PlanFormatError(f"line {lineno}: malformed step")
        if int(m.group(1)) != len(steps) + 1:
            raise PlanFormatError(f"line {lineno}: step numbering broken")
        name = m.group(2).strip()
        try:
            action = model.action_by_name(name)
        except KeyError:
            raise PlanFormatError(f"line {lineno}: unknown action {name!r}") from None
        theta: dict[str, float] = {}
        for part in m.group(3).split():
            slot, _, val = part.partition("=")
            theta[slot] = float(val)
        steps.append(PlanStep(action.index, theta, float(m.group(4))))
    if not saw_end:
        raise PlanFormatError("missing end line")
    return Plan(steps)
