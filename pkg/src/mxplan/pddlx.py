"""Parser and printer for the extended PDDL dialect used by this planner.

Extensions over classic PDDL:
  * real-valued action parameters, declared as ``?vx ?vy ?d - real``;
  * ``(:event ...)`` blocks: instantaneous actions that fire whenever their
    preconditions hold (propositional effects only);
  * region membership conditions ``(inside <x-expr> <y-expr> <region>)``;
  * a problem-level ``(:regions (rect NAME x0 y0 x1 y1) ... (obstacle NAME)
    (objective NAME))`` block attaching rectangle geometry to objects;
  * a ``(:parameters-bounds (<= LO ?p HI) ...)`` block; omitted slots default
    to (-inf, +inf).

Files use extension ``.pddlx``, UTF-8, ``;`` comments to end of line.
Identifiers are case-insensitive and normalized to lower case.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field


# ---------------------------------------------------------------------------
# errors

class PddlxError(Exception):
    """Base error; carries a 1-based line/column position."""

    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class LexError(PddlxError):
    pass


class ParseError(PddlxError):
    pass


class SemanticError(PddlxError):
    pass


class BoundsError(PddlxError):
    pass


# ---------------------------------------------------------------------------
# expressions

class Expr:
    """Base class for numeric expressions over fluents, parameters and constants."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class FluentRef(Expr):
    name: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class ParamRef(Expr):
    name: str  # includes the leading '?'


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: int


@dataclass(frozen=True)
class Sqrt(Expr):
    arg: Expr


def expr_params(e: Expr) -> set[str]:
    """Names of numeric parameters referenced by e."""
    if isinstance(e, ParamRef):
        return {e.name}
    if isinstance(e, Binary):
        return expr_params(e.left) | expr_params(e.right)
    if isinstance(e, (Neg, Sqrt)):
        return expr_params(e.arg)
    if isinstance(e, Pow):
        return expr_params(e.base)
    return set()


def expr_fluents(e: Expr) -> set[FluentRef]:
    if isinstance(e, FluentRef):
        return {e}
    if isinstance(e, Binary):
        return expr_fluents(e.left) | expr_fluents(e.right)
    if isinstance(e, (Neg, Sqrt)):
        return expr_fluents(e.arg)
    if isinstance(e, Pow):
        return expr_fluents(e.base)
    return set()


# ---------------------------------------------------------------------------
# conditions and effects

@dataclass(frozen=True)
class Literal:
    """Propositional condition; positive=False means a negated atom."""

    pred: str
    args: tuple[str, ...]
    positive: bool = True


@dataclass(frozen=True)
class NumericCond:
    """Interval test lo <= expr <= hi (open sides when *_closed is False)."""

    expr: Expr
    lo: float = -math.inf
    hi: float = math.inf
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("numeric condition with lo > hi")


@dataclass(frozen=True)
class RegionCond:
    """(inside x-expr y-expr region): point (x, y) lies in the named region."""

    x: FluentRef
    y: FluentRef
    region: str  # object name or ?variable


@dataclass(frozen=True)
class RegionFlagCond:
    """(obstacle r) / (objective r): built-in region-flag test."""

    flag: str  # "obstacle" | "objective"
    region: str


Condition = Literal | NumericCond | RegionCond | RegionFlagCond


@dataclass(frozen=True)
class NumericEffect:
    fluent: FluentRef
    direction: int  # +1 increase, -1 decrease
    expr: Expr


# ---------------------------------------------------------------------------
# schemas and definitions

@dataclass(frozen=True)
class ActionSchema:
    name: str
    obj_params: tuple[tuple[str, str], ...]  # (?name, type)
    num_params: tuple[str, ...]              # ?names of real-valued slots
    pre: tuple[Condition, ...]
    eff_add: tuple[Literal, ...]
    eff_del: tuple[Literal, ...]
    eff_num: tuple[NumericEffect, ...]

    @property
    def is_numeric(self) -> bool:
        return bool(self.eff_num)


@dataclass(frozen=True)
class EventSchema:
    name: str
    obj_params: tuple[tuple[str, str], ...]
    pre: tuple[Condition, ...]
    eff_add: tuple[Literal, ...]
    eff_del: tuple[Literal, ...]


@dataclass(frozen=True)
class DomainDef:
    name: str
    types: tuple[tuple[str, str | None], ...]       # (type, parent or None)
    predicates: tuple[tuple[str, tuple[str, ...]], ...]
    functions: tuple[tuple[str, tuple[str, ...]], ...]
    actions: tuple[ActionSchema, ...]
    events: tuple[EventSchema, ...]

    def type_names(self) -> set[str]:
        return {t for t, _ in self.types} | {p for _, p in self.types if p} | {"object"}

    def supertypes(self, t: str) -> set[str]:
        out = {t, "object"}
        parents = dict(self.types)
        while t in parents and parents[t]:
            t = parents[t]
            out.add(t)
        return out


@dataclass(frozen=True)
class RegionDecl:
    name: str
    x0: float
    y0: float
    x1: float
    y1: float
    is_obstacle: bool = False
    is_objective: bool = False


@dataclass(frozen=True)
class ProblemDef:
    name: str
    domain_name: str
    objects: tuple[tuple[str, str], ...]            # (name, type)
    init_props: tuple[tuple[str, tuple[str, ...]], ...]
    init_fluents: tuple[tuple[FluentRef, float], ...]
    goal: tuple[Condition, ...]
    regions: tuple[RegionDecl, ...]
    bounds: tuple[tuple[str, float, float], ...]    # (?slot, lo, hi)
    metric: Expr | None = None

    def bounds_map(self) -> dict[str, tuple[float, float]]:
        return {n: (lo, hi) for n, lo, hi in self.bounds}


# ---------------------------------------------------------------------------
# tokenizer

_ID_RE = re.compile(r"[A-Za-z0-9_.:=<>+*/-]+")
_NUM_RE = re.compile(r"[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


@dataclass(frozen=True)
class _Tok:
    kind: str  # '(' ')' 'id' 'var' 'num'
    value: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in "()":
            toks.append(_Tok(ch, ch, line, col))
            i += 1
            col += 1
            continue
        if ch == "?":
            m = _ID_RE.match(text, i + 1)
            if not m:
                raise LexError("dangling '?'", line, col)
            val = "?" + m.group(0).lower()
            toks.append(_Tok("var", val, line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _NUM_RE.match(text, i)
        if m and (m.end() >= n or text[m.end()] in " \t\r\n();"):
            toks.append(_Tok("num", m.group(0), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _ID_RE.match(text, i)
        if m:
            toks.append(_Tok("id", m.group(0).lower(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        raise LexError(f"unexpected character {ch!r}", line, col)
    return toks


# ---------------------------------------------------------------------------
# s-expression layer

class _SExpr:
    __slots__ = ("items", "line", "col")

    def __init__(self, items, line, col):
        self.items = items
        self.line = line
        self.col = col


def _read_sexprs(toks: list[_Tok]) -> list[_SExpr | _Tok]:
    out: list[_SExpr | _Tok] = []
    stack: list[_SExpr] = []
    for t in toks:
        if t.kind == "(":
            node = _SExpr([], t.line, t.col)
            (stack[-1].items if stack else out).append(node)
            stack.append(node)
        elif t.kind == ")":
            if not stack:
                raise ParseError("unbalanced ')'", t.line, t.col)
            stack.pop()
        else:
            (stack[-1].items if stack else out).append(t)
    if stack:
        raise ParseError("unbalanced '('", stack[-1].line, stack[-1].col)
    return out


def _is_id(x, *values: str) -> bool:
    return isinstance(x, _Tok) and x.kind == "id" and (not values or x.value in values)


def _pos(x) -> tuple[int, int]:
    return (x.line, x.col)


def _expect_id(x, what: str) -> str:
    if not (isinstance(x, _Tok) and x.kind == "id"):
        raise ParseError(f"expected {what}", *_pos(x))
    return x.value


def _num_value(tok) -> float:
    if isinstance(tok, _Tok) and tok.kind == "num":
        return float(tok.value)
    if isinstance(tok, _Tok) and tok.kind == "id" and tok.value in ("inf", "-inf"):
        return math.inf if tok.value == "inf" else -math.inf
    raise ParseError("expected a number", *_pos(tok))


# ---------------------------------------------------------------------------
# domain parsing

_COMPARISONS = {">=", "<=", ">", "<", "="}
_BINOPS = {"+", "-", "*", "/"}
_FLAGS = {"obstacle", "objective"}


def _parse_typed_list(items, *, what: str) -> list[tuple[str, str]]:
    """Parse ``a b - t c d - u`` name/type groups; untyped names get 'object'."""
    out: list[tuple[str, str]] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        it = items[i]
        if _is_id(it, "-"):
            if not pending:
                raise ParseError(f"type separator without {what} names", *_pos(it))
            if i + 1 >= len(items):
                raise ParseError("missing type after '-'", *_pos(it))
            ty = _expect_id(items[i + 1], "type name")
            out.extend((n, ty) for n in pending)
            pending = []
            i += 2
            continue
        if isinstance(it, _Tok) and it.kind in ("id", "var"):
            pending.append(it.value)
            i += 1
            continue
        raise ParseError(f"expected {what} name", *_pos(it))
    out.extend((n, "object") for n in pending)
    return out


def _parse_expr(x, num_params: set[str], ctx: "_DomainCtx") -> Expr:
    if isinstance(x, _Tok):
        if x.kind == "num":
            return Const(float(x.value))
        if x.kind == "var":
            if x.value not in num_params:
                raise SemanticError(f"undeclared numeric parameter {x.value}", *_pos(x))
            return ParamRef(x.value)
        if x.kind == "id":
            return ctx.fluent_ref(x.value, (), x)
        raise ParseError("bad expression", *_pos(x))
    items = x.items
    if not items:
        raise ParseError("empty expression", x.line, x.col)
    head = items[0]
    if _is_id(head) and head.value in _BINOPS:
        if len(items) != 3:
            raise ParseError(f"'{head.value}' takes two operands", x.line, x.col)
        l = _parse_expr(items[1], num_params, ctx)
        r = _parse_expr(items[2], num_params, ctx)
        return Binary(head.value, l, r)
    if _is_id(head, "neg"):
        if len(items) != 2:
            raise ParseError("'neg' takes one operand", x.line, x.col)
        return Neg(_parse_expr(items[1], num_params, ctx))
    if _is_id(head, "sqrt"):
        if len(items) != 2:
            raise ParseError("'sqrt' takes one operand", x.line, x.col)
        return Sqrt(_parse_expr(items[1], num_params, ctx))
    if _is_id(head, "pow"):
        if len(items) != 3:
            raise ParseError("'pow' takes base and integer exponent", x.line, x.col)
        exp = _num_value(items[2])
        if exp != int(exp):
            raise ParseError("'pow' exponent must be an integer", x.line, x.col)
        return Pow(_parse_expr(items[1], num_params, ctx), int(exp))
    # fluent application: (name arg*)
    name = _expect_id(head, "fluent name")
    args = tuple(_term(a, ctx) for a in items[1:])
    return ctx.fluent_ref(name, args, x)


def _term(x, ctx: "_DomainCtx") -> str:
    if isinstance(x, _Tok) and x.kind in ("id", "var"):
        return x.value
    raise ParseError("expected object or variable", *_pos(x))


class _DomainCtx:
    """Declared-symbol tables plus per-schema variable scope."""

    def __init__(self, predicates, functions, types):
        self.predicates = {n: len(a) for n, a in predicates}
        self.functions = {n: len(a) for n, a in functions}
        self.types = types
        self.scope: dict[str, str] = {}  # ?var -> type (object params only)

    def fluent_ref(self, name: str, args: tuple[str, ...], node) -> FluentRef:
        if name not in self.functions:
            raise SemanticError(f"undeclared function {name!r}", *_pos(node))
        if self.functions[name] != len(args):
            raise SemanticError(f"function {name!r} expects {self.functions[name]} arguments",
                                *_pos(node))
        return FluentRef(name, args)

    def check_atom(self, name: str, args: tuple[str, ...], node):
        if name not in self.predicates:
            raise SemanticError(f"undeclared predicate {name!r}", *_pos(node))
        if self.predicates[name] != len(args):
            raise SemanticError(f"predicate {name!r} expects {self.predicates[name]} arguments",
                                *_pos(node))


def _parse_condition(x, num_params: set[str], ctx: _DomainCtx) -> Condition:
    if not isinstance(x, _SExpr) or not x.items:
        raise ParseError("expected a condition", *_pos(x))
    head = x.items[0]
    if _is_id(head, "not"):
        if len(x.items) != 2 or not isinstance(x.items[1], _SExpr):
            raise ParseError("'not' takes one atom", x.line, x.col)
        inner = x.items[1]
        name = _expect_id(inner.items[0], "predicate name")
        args = tuple(_term(a, ctx) for a in inner.items[1:])
        ctx.check_atom(name, args, inner)
        return Literal(name, args, positive=False)
    if _is_id(head) and head.value in _COMPARISONS:
        if len(x.items) != 3:
            raise ParseError(f"'{head.value}' takes two operands", x.line, x.col)
        expr = _parse_expr(x.items[1], num_params, ctx)
        bound = _num_value(x.items[2])
        op = head.value
        if op == ">=":
            return NumericCond(expr, lo=bound)
        if op == ">":
            return NumericCond(expr, lo=bound, lo_closed=False)
        if op == "<=":
            return NumericCond(expr, hi=bound)
        if op == "<":
            return NumericCond(expr, hi=bound, hi_closed=False)
        return NumericCond(expr, lo=bound, hi=bound)
    if _is_id(head, "inside"):
        if len(x.items) != 4:
            raise ParseError("'inside' takes x-fluent, y-fluent and a region", x.line, x.col)
        fx = _parse_expr(x.items[1], num_params, ctx)
        fy = _parse_expr(x.items[2], num_params, ctx)
        if not isinstance(fx, FluentRef) or not isinstance(fy, FluentRef):
            raise ParseError("'inside' coordinates must be fluents", x.line, x.col)
        return RegionCond(fx, fy, _term(x.items[3], ctx))
    if _is_id(head) and head.value in _FLAGS:
        if len(x.items) != 2:
            raise ParseError(f"'{head.value}' takes one region", x.line, x.col)
        return RegionFlagCond(head.value, _term(x.items[1], ctx))
    name = _expect_id(head, "predicate name")
    args = tuple(_term(a, ctx) for a in x.items[1:])
    ctx.check_atom(name, args, x)
    return Literal(name, args)


def _flatten_and(x) -> list:
    if isinstance(x, _SExpr) and x.items and _is_id(x.items[0], "and"):
        return x.items[1:]
    return [x]


def _merge_numeric(conds: list[Condition], line: int, col: int) -> list[Condition]:
    """Intersect one-sided comparisons over the same expression into a
    single interval condition, preserving first-appearance order."""
    out: list[Condition] = []
    slot: dict[Expr, int] = {}
    for c in conds:
        if not isinstance(c, NumericCond):
            out.append(c)
            continue
        if c.expr in slot:
            prev = out[slot[c.expr]]
            lo, lc = max((prev.lo, not prev.lo_closed), (c.lo, not c.lo_closed))
            hi, hc = min((prev.hi, prev.hi_closed), (c.hi, c.hi_closed))
            if lo > hi or (lo == hi and (lc or not hc)):
                raise SemanticError("contradictory numeric conditions", line, col)
            out[slot[c.expr]] = NumericCond(c.expr, lo, hi, not lc, hc)
        else:
            slot[c.expr] = len(out)
            out.append(c)
    return out


def _parse_schema(x: _SExpr, ctx: _DomainCtx, *, is_event: bool):
    items = x.items
    name = _expect_id(items[1], "schema name")
    params: list[tuple[str, str]] = []
    pre: list[Condition] = []
    eff_items: list = []
    i = 2
    while i < len(items):
        key = _expect_id(items[i], "schema keyword")
        if i + 1 >= len(items):
            raise ParseError(f"missing value for {key}", x.line, x.col)
        val = items[i + 1]
        if key == ":parameters":
            if not isinstance(val, _SExpr):
                raise ParseError(":parameters needs a list", x.line, x.col)
            params = _parse_typed_list(val.items, what="parameter")
        elif key == ":precondition":
            pre_items = _flatten_and(val)
            ctx.scope = {n: t for n, t in params if t != "real"}
            num_params = {n for n, t in params if t == "real"}
            pre = _merge_numeric(
                [_parse_condition(c, num_params, ctx) for c in pre_items],
                x.line, x.col)
        elif key == ":effect":
            eff_items = _flatten_and(val)
        else:
            raise ParseError(f"unknown schema keyword {key}", x.line, x.col)
        i += 2
    obj_params = tuple((n, t) for n, t in params if t != "real")
    num_params = tuple(n for n, t in params if t == "real")
    for t in {t for _, t in obj_params}:
        if t not in ctx.types:
            raise SemanticError(f"undeclared type {t!r}", x.line, x.col)
    add: list[Literal] = []
    dele: list[Literal] = []
    num_eff: list[NumericEffect] = []
    for e in eff_items:
        if not isinstance(e, _SExpr) or not e.items:
            raise ParseError("expected an effect", *_pos(e))
        head = e.items[0]
        if _is_id(head, "increase", "decrease"):
            if is_event:
                raise SemanticError("events cannot have numeric effects", e.line, e.col)
            if len(e.items) != 3:
                raise ParseError(f"'{head.value}' takes a fluent and an expression",
                                 e.line, e.col)
            target = _parse_expr(e.items[1], set(num_params), ctx)
            if not isinstance(target, FluentRef):
                raise ParseError("numeric effect target must be a fluent", e.line, e.col)
            expr = _parse_expr(e.items[2], set(num_params), ctx)
            num_eff.append(NumericEffect(target, 1 if head.value == "increase" else -1, expr))
        elif _is_id(head, "not"):
            inner = e.items[1]
            name_ = _expect_id(inner.items[0], "predicate name")
            args = tuple(_term(a, ctx) for a in inner.items[1:])
            ctx.check_atom(name_, args, inner)
            dele.append(Literal(name_, args, positive=False))
        else:
            name_ = _expect_id(head, "predicate name")
            args = tuple(_term(a, ctx) for a in e.items[1:])
            ctx.check_atom(name_, args, e)
            add.append(Literal(name_, args))
    if is_event:
        return EventSchema(name, obj_params, tuple(pre), tuple(add), tuple(dele))
    return ActionSchema(name, obj_params, num_params, tuple(pre),
                        tuple(add), tuple(dele), tuple(num_eff))


def parse_domain(text: str) -> DomainDef:
    """Parse a domain source into a DomainDef; raises PddlxError subclasses."""
    top = _read_sexprs(_tokenize(text))
    if len(top) != 1 or not isinstance(top[0], _SExpr):
        raise ParseError("expected a single (define ...) form", 1, 1)
    root = top[0]
    if not (root.items and _is_id(root.items[0], "define")):
        raise ParseError("expected (define ...)", root.line, root.col)
    head = root.items[1] if len(root.items) > 1 else None
    if not (isinstance(head, _SExpr) and len(head.items) == 2
            and _is_id(head.items[0], "domain")):
        raise ParseError("expected (domain NAME)", root.line, root.col)
    name = _expect_id(head.items[1], "domain name")

    types: list[tuple[str, str | None]] = []
    predicates: list[tuple[str, tuple[str, ...]]] = []
    functions: list[tuple[str, tuple[str, ...]]] = []
    raw_schemas: list[tuple[_SExpr, bool]] = []
    for block in root.items[2:]:
        if not (isinstance(block, _SExpr) and block.items):
            raise ParseError("expected a domain block", *_pos(block))
        key = _expect_id(block.items[0], "block keyword")
        if key == ":types":
            for n, t in _parse_typed_list(block.items[1:], what="type"):
                types.append((n, None if t == "object" else t))
        elif key in (":predicates", ":functions"):
            target = predicates if key == ":predicates" else functions
            for d in block.items[1:]:
                if not (isinstance(d, _SExpr) and d.items):
                    raise ParseError("expected a declaration", *_pos(d))
                pname = _expect_id(d.items[0], "name")
                slots = _parse_typed_list(d.items[1:], what="parameter")
                target.append((pname, tuple(t for _, t in slots)))
        elif key in (":action", ":event"):
            raw_schemas.append((block, key == ":event"))
        elif key == ":requirements":
            continue
        else:
            raise ParseError(f"unknown domain block {key}", block.line, block.col)

    for decls, what in ((predicates, "predicate"), (functions, "function")):
        seen: set[str] = set()
        for n, _ in decls:
            if n in seen:
                raise SemanticError(f"duplicate {what} {n!r}", root.line, root.col)
            seen.add(n)
    if {n for n, _ in predicates} & _FLAGS:
        raise SemanticError("'obstacle'/'objective' are built-in region flags",
                            root.line, root.col)

    type_names = {t for t, _ in types} | {p for _, p in types if p} | {"object", "real"}
    ctx = _DomainCtx(predicates, functions, type_names)
    actions: list[ActionSchema] = []
    events: list[EventSchema] = []
    names_seen: set[str] = set()
    for block, is_event in raw_schemas:
        schema = _parse_schema(block, ctx, is_event=is_event)
        if schema.name in names_seen:
            raise SemanticError(f"duplicate action/event name {schema.name!r}",
                                block.line, block.col)
        names_seen.add(schema.name)
        (events if is_event else actions).append(schema)
    return DomainDef(name, tuple(types), tuple(predicates), tuple(functions),
                     tuple(actions), tuple(events))


# ---------------------------------------------------------------------------
# problem parsing

def parse_problem(text: str, dom: DomainDef) -> ProblemDef:
    """Parse a problem source against a parsed domain."""
    top = _read_sexprs(_tokenize(text))
    if len(top) != 1 or not isinstance(top[0], _SExpr):
        raise ParseError("expected a single (define ...) form", 1, 1)
    root = top[0]
    if not (root.items and _is_id(root.items[0], "define")):
        raise ParseError("expected (define ...)", root.line, root.col)
    head = root.items[1] if len(root.items) > 1 else None
    if not (isinstance(head, _SExpr) and len(head.items) == 2
            and _is_id(head.items[0], "problem")):
        raise ParseError("expected (problem NAME)", root.line, root.col)
    name = _expect_id(head.items[1], "problem name")

    domain_name = dom.name
    objects: list[tuple[str, str]] = []
    init_props: list[tuple[str, tuple[str, ...]]] = []
    init_fluents: list[tuple[FluentRef, float]] = []
    goal: list[Condition] = []
    regions: dict[str, RegionDecl] = {}
    bounds: list[tuple[str, float, float]] = []
    metric: Expr | None = None
    ctx = _DomainCtx(dom.predicates, dom.functions, dom.type_names() | {"real"})

    for block in root.items[2:]:
        if not (isinstance(block, _SExpr) and block.items):
            raise ParseError("expected a problem block", *_pos(block))
        key = _expect_id(block.items[0], "block keyword")
        if key == ":domain":
            domain_name = _expect_id(block.items[1], "domain name")
            if domain_name != dom.name:
                raise SemanticError(
                    f"problem references domain {domain_name!r}, expected {dom.name!r}",
                    block.line, block.col)
        elif key == ":objects":
            objects.extend(_parse_typed_list(block.items[1:], what="object"))
        elif key == ":regions":
            for d in block.items[1:]:
                if not (isinstance(d, _SExpr) and d.items):
                    raise ParseError("expected a region declaration", *_pos(d))
                rkey = _expect_id(d.items[0], "region keyword")
                if rkey == "rect":
                    if len(d.items) != 6:
                        raise ParseError("(rect NAME x0 y0 x1 y1)", d.line, d.col)
                    rname = _expect_id(d.items[1], "region name")
                    x0, y0, x1, y1 = (_num_value(t) for t in d.items[2:6])
                    if x1 <= x0 or y1 <= y0:
                        raise SemanticError(f"degenerate region {rname!r}", d.line, d.col)
                    if rname in regions:
                        raise SemanticError(f"duplicate region {rname!r}", d.line, d.col)
                    regions[rname] = RegionDecl(rname, x0, y0, x1, y1)
                elif rkey in _FLAGS:
                    rname = _expect_id(d.items[1], "region name")
                    if rname not in regions:
                        raise SemanticError(f"flag on undeclared region {rname!r}",
                                            d.line, d.col)
                    r = regions[rname]
                    regions[rname] = RegionDecl(
                        r.name, r.x0, r.y0, r.x1, r.y1,
                        is_obstacle=r.is_obstacle or rkey == "obstacle",
                        is_objective=r.is_objective or rkey == "objective")
                else:
                    raise ParseError(f"unknown region keyword {rkey}", d.line, d.col)
        elif key == ":init":
            for d in block.items[1:]:
                if not (isinstance(d, _SExpr) and d.items):
                    raise ParseError("expected an init entry", *_pos(d))
                if _is_id(d.items[0], "="):
                    if len(d.items) != 3:
                        raise ParseError("(= (fluent args) VALUE)", d.line, d.col)
                    fl = _parse_expr(d.items[1], set(), ctx)
                    if not isinstance(fl, FluentRef):
                        raise ParseError("assignment target must be a fluent", d.line, d.col)
                    init_fluents.append((fl, _num_value(d.items[2])))
                else:
                    pname = _expect_id(d.items[0], "predicate name")
                    args = tuple(_term(a, ctx) for a in d.items[1:])
                    ctx.check_atom(pname, args, d)
                    init_props.append((pname, args))
        elif key == ":goal":
            if len(block.items) != 2:
                raise ParseError(":goal takes one condition", block.line, block.col)
            goal = _merge_numeric(
                [_parse_condition(c, set(), ctx)
                 for c in _flatten_and(block.items[1])],
                block.line, block.col)
        elif key in (":parameters-bounds", ":parameters_bounds"):
            for d in block.items[1:]:
                if not (isinstance(d, _SExpr) and len(d.items) == 4
                        and _is_id(d.items[0], "<=")):
                    raise ParseError("(<= LO ?param HI)", *_pos(d))
                lo = _num_value(d.items[1])
                hi = _num_value(d.items[3])
                if not (isinstance(d.items[2], _Tok) and d.items[2].kind == "var"):
                    raise ParseError("bounds need a ?parameter", d.line, d.col)
                slot = d.items[2].value
                if lo > hi:
                    raise BoundsError(f"lower bound exceeds upper bound for {slot}",
                                      d.line, d.col)
                bounds.append((slot, lo, hi))
        elif key == ":metric":
            if len(block.items) != 3 or not _is_id(block.items[1], "minimize"):
                raise ParseError("(:metric minimize EXPR)", block.line, block.col)
            metric = _parse_expr(block.items[2], set(), ctx)
        else:
            raise ParseError(f"unknown problem block {key}", block.line, block.col)

    obj_types = dict(objects)
    declared_types = dom.type_names()
    for oname, otype in objects:
        if otype not in declared_types:
            raise SemanticError(f"object {oname!r} has undeclared type {otype!r}",
                                root.line, root.col)
    for rname in regions:
        if rname not in obj_types:
            raise SemanticError(f"region {rname!r} is not a declared object",
                                root.line, root.col)
    for pname, args in init_props:
        for a in args:
            if a not in obj_types:
                raise SemanticError(f"init proposition uses undeclared object {a!r}",
                                    root.line, root.col)
    for fl, _ in init_fluents:
        for a in fl.args:
            if a not in obj_types:
                raise SemanticError(f"init assignment uses undeclared object {a!r}",
                                    root.line, root.col)
    for cond in goal:
        for a in _condition_objects(cond):
            if not a.startswith("?") and a not in obj_types:
                raise SemanticError(f"goal uses undeclared object {a!r}",
                                    root.line, root.col)
    return ProblemDef(name, domain_name, tuple(objects), tuple(init_props),
                      tuple(init_fluents), tuple(goal),
                      tuple(regions.values()), tuple(bounds), metric)


def _condition_objects(cond: Condition) -> tuple[str, ...]:
    if isinstance(cond, Literal):
        return cond.args
    if isinstance(cond, RegionCond):
        return cond.x.args + cond.y.args + (cond.region,)
    if isinstance(cond, RegionFlagCond):
        return (cond.region,)
    return tuple(a for f in expr_fluents(cond.expr) for a in f.args)


# ---------------------------------------------------------------------------
# printer

def _fmt_num(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _fmt_expr(e: Expr) -> str:
    if isinstance(e, Const):
        return _fmt_num(e.value)
    if isinstance(e, ParamRef):
        return e.name
    if isinstance(e, FluentRef):
        if not e.args:
            return f"({e.name})"
        return "(" + " ".join((e.name,) + e.args) + ")"
    if isinstance(e, Binary):
        return f"({e.op} {_fmt_expr(e.left)} {_fmt_expr(e.right)})"
    if isinstance(e, Neg):
        return f"(neg {_fmt_expr(e.arg)})"
    if isinstance(e, Sqrt):
        return f"(sqrt {_fmt_expr(e.arg)})"
    if isinstance(e, Pow):
        return f"(pow {_fmt_expr(e.base)} {e.exponent})"
    raise TypeError(f"unknown expression {e!r}")


def _fmt_cond(c: Condition) -> str:
    if isinstance(c, Literal):
        atom = "(" + " ".join((c.pred,) + c.args) + ")"
        return atom if c.positive else f"(not {atom})"
    if isinstance(c, RegionCond):
        return f"(inside {_fmt_expr(c.x)} {_fmt_expr(c.y)} {c.region})"
    if isinstance(c, RegionFlagCond):
        return f"({c.flag} {c.region})"
    parts = []
    if c.lo != -math.inf:
        parts.append(f"({'>=' if c.lo_closed else '>'} {_fmt_expr(c.expr)} {_fmt_num(c.lo)})")
    if c.hi != math.inf:
        parts.append(f"({'<=' if c.hi_closed else '<'} {_fmt_expr(c.expr)} {_fmt_num(c.hi)})")
    if not parts:
        return f"(>= {_fmt_expr(c.expr)} -inf)"
    if len(parts) == 2:
        if c.lo == c.hi and c.lo_closed and c.hi_closed:
            return f"(= {_fmt_expr(c.expr)} {_fmt_num(c.lo)})"
        return "(and " + " ".join(parts) + ")"
    return parts[0]


def _fmt_cond_list(conds) -> str:
    # two-sided intervals print as (and ...) pairs which re-flatten on parse
    out = []
    for c in conds:
        s = _fmt_cond(c)
        if s.startswith("(and "):
            out.append(s[5:-1])
        else:
            out.append(s)
    return " ".join(out)


def _fmt_typed(pairs) -> str:
    parts = []
    i = 0
    pairs = list(pairs)
    while i < len(pairs):
        j = i
        while j < len(pairs) and pairs[j][1] == pairs[i][1]:
            j += 1
        names = " ".join(p[0] for p in pairs[i:j])
        parts.append(f"{names} - {pairs[i][1]}")
        i = j
    return " ".join(parts)


def _fmt_schema(s: ActionSchema | EventSchema) -> str:
    is_event = isinstance(s, EventSchema)
    kw = ":event" if is_event else ":action"
    params = list(s.obj_params)
    if not is_event:
        params += [(n, "real") for n in s.num_params]
    lines = [f"  ({kw} {s.name}", f"    :parameters ({_fmt_typed(params)})"]
    pre = _fmt_cond_list(s.pre)
    lines.append(f"    :precondition (and {pre})" if pre else "    :precondition (and)")
    effs = [_fmt_cond(l) for l in s.eff_add]
    effs += [_fmt_cond(l) for l in s.eff_del]
    if not is_event:
        for ne in s.eff_num:
            kw2 = "increase" if ne.direction > 0 else "decrease"
            effs.append(f"({kw2} {_fmt_expr(ne.fluent)} {_fmt_expr(ne.expr)})")
    lines.append(f"    :effect (and {' '.join(effs)}))")
    return "\n".join(lines)


def print_domain(d: DomainDef) -> str:
    lines = [f"(define (domain {d.name})"]
    if d.types:
        typed = [(t, p or "object") for t, p in d.types]
        lines.append(f"  (:types {_fmt_typed(typed)})")
    if d.predicates:
        decls = " ".join(
            "(" + " ".join([n] + [f"?a{i} - {t}" for i, t in enumerate(ts)]) + ")"
            for n, ts in d.predicates)
        lines.append(f"  (:predicates {decls})")
    if d.functions:
        decls = " ".join(
            "(" + " ".join([n] + [f"?a{i} - {t}" for i, t in enumerate(ts)]) + ")"
            for n, ts in d.functions)
        lines.append(f"  (:functions {decls})")
    for s in d.actions:
        lines.append(_fmt_schema(s))
    for s in d.events:
        lines.append(_fmt_schema(s))
    lines.append(")")
    return "\n".join(lines) + "\n"


def print_problem(p: ProblemDef) -> str:
    lines = [f"(define (problem {p.name})", f"  (:domain {p.domain_name})"]
    if p.objects:
        lines.append(f"  (:objects {_fmt_typed(p.objects)})")
    if p.regions:
        decls = []
        for r in p.regions:
            decls.append(f"(rect {r.name} {_fmt_num(r.x0)} {_fmt_num(r.y0)}"
                         f" {_fmt_num(r.x1)} {_fmt_num(r.y1)})")
        for r in p.regions:
            if r.is_obstacle:
                decls.append(f"(obstacle {r.name})")
            if r.is_objective:
                decls.append(f"(objective {r.name})")
        lines.append("  (:regions " + " ".join(decls) + ")")
    init = ["(" + " ".join((n,) + a) + ")" for n, a in p.init_props]
    init += [f"(= {_fmt_expr(f)} {_fmt_num(v)})" for f, v in p.init_fluents]
    lines.append("  (:init " + " ".join(init) + ")")
    goal = _fmt_cond_list(p.goal)
    lines.append(f"  (:goal (and {goal}))" if goal else "  (:goal (and))")
    if p.bounds:
        decls = " ".join(f"(<= {_fmt_num(lo)} {n} {_fmt_num(hi)})"
                         for n, lo, hi in p.bounds)
        lines.append(f"  (:parameters-bounds {decls})")
    if p.metric is not None:
        lines.append(f"  (:metric minimize {_fmt_expr(p.metric)})")
    lines.append(")")
    return "\n".join(lines) + "\n"
