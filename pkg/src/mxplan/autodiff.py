"""Recorded rollouts and exact reverse-mode gradients of the step losses.

A rollout freezes the discrete side (which action each step picks, which
obstacles a segment crosses, each detour target) and records every numeric
computation on a scalar tape.  Gradients therefore flow only through the
numeric parameters of the chosen actions, across states, into three loss
terms per step:

  bound loss    ||relu(V - U)||_2 + ||relu(L - V)||_2
  obstacle loss sum over crossed obstacles of ||detour - stop||_2
  step cost     sqrt(dx^2 + dy^2 + 1e-12)

weighted w1, w2, w3 and summed over steps.  The tape supports re-running
its recorded forward computation with perturbed leaves, which is what the
finite-difference oracle in the tests uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine, geometry, heuristic
from .engine import NumericFault, Plan, PlanStep, State
from .grounder import GFluent, GroundedModel
from .heuristic import Deadend, Selection
from .pddlx import Binary, Const, Expr, Neg, ParamRef, Pow, Sqrt

EPS_SMOOTH = 1e-12


class Tape:
    """Append-only record of scalar operations."""

    def __init__(self):
        self.op: list[str] = []
        self.a: list[int] = []
        self.b: list[int] = []
        self.aux: list[float] = []
        self.val: list[float] = []

    def __len__(self) -> int:
        return len(self.op)

    def _push(self, op, val, a=-1, b=-1, aux=0.0) -> "Var":
        if op != "leaf" and not math.isfinite(val):
            raise NumericFault(f"non-finite value from {op}")
        self.op.append(op)
        self.a.append(a)
        self.b.append(b)
        self.aux.append(aux)
        self.val.append(val)
        return Var(self, len(self.op) - 1)

    def leaf(self, value: float) -> "Var":
        return self._push("leaf", float(value))

    def const(self, value: float) -> "Var":
        return self._push("const", float(value))

    def reevaluate(self, overrides: dict[int, float]) -> list[float]:
        """Re-run the recorded computation with some leaves replaced."""
        out = [0.0] * len(self.op)
        for i, op in enumerate(self.op):
            if op in ("leaf", "const"):
                out[i] = overrides.get(i, self.val[i])
            else:
                out[i] = _apply(op, out[self.a[i]],
                                out[self.b[i]] if self.b[i] >= 0 else 0.0,
                                self.aux[i])
        return out

    def backward(self, root: "Var") -> np.ndarray:
        """Adjoints of every node with respect to the root scalar."""
        n = len(self.op)
        adj = np.zeros(n)
        adj[root.i] = 1.0
        for i in range(n - 1, -1, -1):
            g = adj[i]
            if g == 0.0:
                continue
            if not math.isfinite(g):
                raise NumericFault("non-finite adjoint")
            op, a, b = self.op[i], self.a[i], self.b[i]
            if op in ("leaf", "const"):
                continue
            va = self.val[a]
            vb = self.val[b] if b >= 0 else 0.0
            if op == "+":
                adj[a] += g
                adj[b] += g
            elif op == "-":
                adj[a] += g
                adj[b] -= g
            elif op == "*":
                adj[a] += g * vb
                adj[b] += g * va
            elif op == "/":
                adj[a] += g / vb
                adj[b] -= g * va / (vb * vb)
            elif op == "neg":
                adj[a] -= g
            elif op == "pow":
                p = self.aux[i]
                adj[a] += g * p * va ** (p - 1)
            elif op == "sqrt":
                adj[a] += g * 0.5 / max(self.val[i], 1e-12)
            elif op == "relu":
                if va > 0.0:
                    adj[a] += g
            elif op == "addc":
                adj[a] += g
            elif op == "mulc":
                adj[a] += g * self.aux[i]
            else:
                raise NumericFault(f"unknown op {op}")
        return adj


def _apply(op: str, va: float, vb: float, aux: float) -> float:
    if op == "+":
        return va + vb
    if op == "-":
        return va - vb
    if op == "*":
        return va * vb
    if op == "/":
        return va / vb
    if op == "neg":
        return -va
    if op == "pow":
        return va ** aux
    if op == "sqrt":
        return math.sqrt(va)
    if op == "relu":
        return max(va, 0.0)
    if op == "addc":
        return va + aux
    if op == "mulc":
        return va * aux
    raise NumericFault(f"unknown op {op}")


@dataclass(frozen=True)
class Var:
    tape: Tape
    i: int

    @property
    def value(self) -> float:
        return self.tape.val[self.i]

    def _bin(self, op, other):
        t = self.tape
        if isinstance(other, Var):
            return t._push(op, _apply(op, self.value, other.value, 0.0),
                           self.i, other.i)
        c = float(other)
        if op == "+":
            return t._push("addc", self.value + c, self.i, aux=c)
        if op == "*":
            return t._push("mulc", self.value * c, self.i, aux=c)
        return t._push(op, _apply(op, self.value, c, 0.0), self.i,
                       t.const(c).i)

    def __add__(self, other):
        return self._bin("+", other)

    __radd__ = __add__

    def __sub__(self, other):
        return self._bin("-", other)

    def __rsub__(self, other):
        return (-self)._bin("+", other)

    def __mul__(self, other):
        return self._bin("*", other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._bin("/", other)

    def __rtruediv__(self, other):
        t = self.tape
        return t.const(float(other))._bin("/", self)

    def __neg__(self):
        return self.tape._push("neg", -self.value, self.i)

    def __pow__(self, p):
        return self.tape._push("pow", self.value ** p, self.i, aux=float(p))


def sqrt(v: Var) -> Var:
    return v.tape._push("sqrt", math.sqrt(v.value), v.i)


def relu(v) -> "Var | float":
    if isinstance(v, Var):
        return v.tape._push("relu", max(v.value, 0.0), v.i)
    return max(v, 0.0)


# ---------------------------------------------------------------------------
# expression evaluation producing tape nodes

def eval_expr_var(e: Expr, V_num: np.ndarray, V_var: dict[int, Var],
                  theta_var: dict[str, Var]):
    """Evaluate a grounded expression; returns a Var when it touches a
    parameter leaf or a parameter-dependent state component, else a float."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, GFluent):
        return V_var.get(e.k, float(V_num[e.k]))
    if isinstance(e, ParamRef):
        return theta_var[e.name]
    if isinstance(e, Binary):
        l = eval_expr_var(e.left, V_num, V_var, theta_var)
        r = eval_expr_var(e.right, V_num, V_var, theta_var)
        if not isinstance(l, Var) and not isinstance(r, Var):
            return _apply(e.op, l, r, 0.0)
        if not isinstance(l, Var):
            if e.op == "+":
                return r + l
            if e.op == "*":
                return r * l
            l = r.tape.const(l)
        if e.op == "+":
            return l + r
        if e.op == "-":
            return l - r
        if e.op == "*":
            return l * r
        return l / r
    if isinstance(e, Neg):
        v = eval_expr_var(e.arg, V_num, V_var, theta_var)
        return -v
    if isinstance(e, Sqrt):
        v = eval_expr_var(e.arg, V_num, V_var, theta_var)
        return sqrt(v) if isinstance(v, Var) else math.sqrt(v)
    if isinstance(e, Pow):
        v = eval_expr_var(e.base, V_num, V_var, theta_var)
        return v**e.exponent
    raise TypeError(f"cannot evaluate {e!r}")


# ---------------------------------------------------------------------------
# losses

@dataclass
class LossBreakdown:
    lb: list[float] = field(default_factory=list)
    lo: list[float] = field(default_factory=list)
    psi: list[float] = field(default_factory=list)
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 100.0
    l_stop: float = math.inf

    @property
    def per_step(self) -> list[float]:
        return [self.w1 * b + self.w2 * o + self.w3 * p
                for b, o, p in zip(self.lb, self.lo, self.psi)]

    @property
    def l_all(self) -> float:
        return sum(self.per_step)

    @property
    def cost(self) -> float:
        return sum(self.psi)


@dataclass
class Rollout:
    plan: Plan
    reached_goal: bool
    deadend: bool
    tape: Tape
    root: Var | None                     # the recorded total loss
    leaves: dict[tuple[int, int], Var]   # (step, slot) -> parameter leaf
    losses: LossBreakdown
    states: list[State]
    selections: list[Selection]


def _norm2_terms(terms: list, eps: float = 0.0) -> "Var | float":
    """sqrt(sum of squares + eps); accepts a mix of Vars and floats.

    Without eps the norm is exact (zero stays zero); the guarded sqrt
    backward keeps the gradient finite there."""
    acc = None
    const_acc = eps
    for t in terms:
        if isinstance(t, Var):
            sq = t * t
            acc = sq if acc is None else acc + sq
        else:
            const_acc += t * t
    if acc is None:
        return math.sqrt(const_acc)
    return sqrt(acc + const_acc)


def rollout_record(model: GroundedModel, Theta: np.ndarray,
                   w: tuple[float, float, float] = (1.0, 1.0, 100.0),
                   detour_eps: float = 0.5) -> Rollout:
    """Run the heuristic policy for up to N steps, recording the losses.

    Theta has one row per step and one column per parameter slot.  The
    rollout stops at the end action (goal reached), at a dead end, or
    after N steps.
    """
    N = Theta.shape[0]
    tape = Tape()
    leaves: dict[tuple[int, int], Var] = {}
    losses = LossBreakdown(w1=w[0], w2=w[1], w3=w[2])
    obstacles = [r for r in model.regions.values() if r.is_obstacle]

    s = engine.initial_state(model)
    V_var: dict[int, Var] = {}
    states = [s]
    selections: list[Selection] = []
    plan = Plan([])
    loss_terms: list[Var] = []
    reached_goal = False
    deadend = False

    for i in range(N):
        theta_num = {slot: float(Theta[i, j])
                     for j, slot in enumerate(model.param_slots)}
        try:
            sel = heuristic.select_action(s, model, theta_num)
        except Deadend:
            deadend = True
            break
        selections.append(sel)
        if sel.is_end:
            reached_goal = True
            break
        a = sel.action

        theta_var: dict[str, Var] = {}
        for slot in a.num_params:
            j = model.slot(slot)
            v = tape.leaf(Theta[i, j])
            leaves[(i, j)] = v
            theta_var[slot] = v

        # numeric update, recorded where parameters are involved
        new_V_var = dict(V_var)
        deltas: dict[int, "Var | float"] = {}
        for k, sign in a.kappa.items():
            mag = None
            for table in (a.eff_static, a.eff_dynamic):
                if k in table:
                    part = eval_expr_var(table[k], s.V, V_var, theta_var)
                    mag = part if mag is None else mag + part
            d = mag if sign > 0 else -mag
            deltas[k] = d
            base = V_var.get(k, float(s.V[k]))
            nv = base + d
            if isinstance(nv, Var):
                new_V_var[k] = nv

        s2 = engine.step(s, a, theta_num, model)

        # step cost psi
        if a.move_pair is not None:
            kx, ky = a.move_pair
            psi = _norm2_terms([deltas.get(kx, 0.0), deltas.get(ky, 0.0)],
                               eps=EPS_SMOOTH)
        else:
            psi = 0.0
        losses.psi.append(psi.value if isinstance(psi, Var) else psi)

        # bound loss against the selected action's target interval
        over, under = [], []
        for k in range(model.K):
            v = new_V_var.get(k, float(s2.V[k]))
            if math.isfinite(sel.U[k]):
                over.append(v - sel.U[k] if isinstance(v, Var)
                            else v - sel.U[k])
            if math.isfinite(sel.L[k]):
                under.append(sel.L[k] - v)
        over = [relu(t) for t in over]
        under = [relu(t) for t in under]
        lb = 0.0
        if over or under:
            lb_over = _norm2_terms(over) if over else 0.0
            lb_under = _norm2_terms(under) if under else 0.0
            lb = lb_over + lb_under
        losses.lb.append(lb.value if isinstance(lb, Var) else lb)

        # obstacle loss: detour targets of crossed obstacles pull the stop
        lo = 0.0
        if a.move_pair is not None:
            kx, ky = a.move_pair
            p_from = (float(s.V[kx]), float(s.V[ky]))
            p_to = (float(s2.V[kx]), float(s2.V[ky]))
            vx = new_V_var.get(kx, p_to[0])
            vy = new_V_var.get(ky, p_to[1])
            for r in obstacles:
                if not geometry.segment_intersects(r, p_from, p_to):
                    continue
                try:
                    y = geometry.detour_target(r, p_from, p_to, eps=detour_eps)
                except geometry.ApexInsideRegion:
                    y = None
                if y is None:
                    continue
                term = _norm2_terms([vx - y[0], vy - y[1]])
                lo = term if (isinstance(lo, float) and lo == 0.0) else lo + term
        losses.lo.append(lo.value if isinstance(lo, Var) else lo)

        # weighted step loss
        step_loss = None
        for weight, part in ((w[0], lb), (w[1], lo), (w[2], psi)):
            if isinstance(part, Var):
                term = part * weight
                step_loss = term if step_loss is None else step_loss + term
        if step_loss is not None:
            loss_terms.append(step_loss)

        cost = engine.action_cost(a, theta_num, s)
        plan.steps.append(PlanStep(a.index, theta_num, cost))
        V_var = new_V_var
        s = s2
        states.append(s)

    root = None
    if loss_terms:
        root = loss_terms[0]
        for t in loss_terms[1:]:
            root = root + t

    rollout = Rollout(plan, reached_goal, deadend, tape, root, leaves,
                      losses, states, selections)
    losses.l_stop = stop_loss(model, rollout)
    return rollout


def stop_loss(model: GroundedModel, rollout: Rollout) -> float:
    """0 exactly when the rollout is a valid, collision-free solution."""
    if not rollout.reached_goal:
        return math.inf
    if sum(rollout.losses.lo) > 0.0:
        return math.inf
    return 0.0 if engine.validate(model, rollout.plan).valid else math.inf


def backward(rollout: Rollout, N: int, T: int) -> np.ndarray:
    """Gradient of the recorded total loss w.r.t. the N x T parameter grid.

    Slots unused by the chosen action of a step have zero gradient."""
    grad = np.zeros((N, T))
    if rollout.root is None:
        return grad
    adj = rollout.tape.backward(rollout.root)
    for (i, j), leaf in rollout.leaves.items():
        grad[i, j] = adj[leaf.i]
    return grad


def update_params(Theta: np.ndarray, grad: np.ndarray, omega: float,
                  lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Gradient step followed by componentwise clamping into the bounds."""
    return np.clip(Theta - omega * grad, lower, upper)
