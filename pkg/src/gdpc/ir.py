"""Core model types shared by every pipeline stage.

The expression tree carries every algebraic object in the system: right-hand
sides of assignments, testing conditions, disjunct constraints, and the rows
of the final mixed-integer model.  Constraints are always normalized to
``body REL 0``.  Disjunctions package alternative constraint sets behind
Boolean labels; logic propositions relate those labels.

All types are immutable after construction, so models can be shared freely
across threads and pipeline stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union

from .errors import err

# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------

Number = Union[int, float]

_FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "abs")


class Expr:
    """Base class for expression nodes; provides operator sugar."""

    __slots__ = ()

    def __add__(self, other) -> "Expr":
        return BinOp("+", self, as_expr(other))

    def __radd__(self, other) -> "Expr":
        return BinOp("+", as_expr(other), self)

    def __sub__(self, other) -> "Expr":
        return BinOp("-", self, as_expr(other))

    def __rsub__(self, other) -> "Expr":
        return BinOp("-", as_expr(other), self)

    def __mul__(self, other) -> "Expr":
        return BinOp("*", self, as_expr(other))

    def __rmul__(self, other) -> "Expr":
        return BinOp("*", as_expr(other), self)

    def __truediv__(self, other) -> "Expr":
        return BinOp("/", self, as_expr(other))

    def __rtruediv__(self, other) -> "Expr":
        return BinOp("/", as_expr(other), self)

    def __pow__(self, other) -> "Expr":
        return BinOp("^", self, as_expr(other))

    def __neg__(self) -> "Expr":
        return Neg(self)


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True, slots=True)
class VarRef(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True, slots=True)
class BinOp(Expr):
    op: str  # one of + - * / ^
    lhs: Expr
    rhs: Expr

    def __post_init__(self):
        if self.op not in ("+", "-", "*", "/", "^"):
            raise ValueError(f"unknown operator {self.op!r}")
        # Exponents are restricted to numeric constants so that interval
        # evaluation and the brute-force verifier stay total.
        if self.op == "^" and not isinstance(self.rhs, Const):
            raise ValueError("exponent must be a numeric constant")


@dataclass(frozen=True, slots=True)
class Call(Expr):
    fn: str
    args: tuple[Expr, ...]

    def __post_init__(self):
        if self.fn not in _FUNCTIONS:
            raise ValueError(f"unknown function {self.fn!r}")
        object.__setattr__(self, "args", tuple(self.args))


def as_expr(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float)):
        return Const(float(value))
    raise TypeError(f"cannot coerce {value!r} to an expression")


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, Neg):
        yield from walk(e.arg)
    elif isinstance(e, BinOp):
        yield from walk(e.lhs)
        yield from walk(e.rhs)
    elif isinstance(e, Call):
        for a in e.args:
            yield from walk(a)


def expr_vars(e: Expr) -> set[str]:
    return {n.name for n in walk(e) if isinstance(n, VarRef)}


def rename_vars(e: Expr, mapping: Mapping[str, str]) -> Expr:
    """Substitute variable names; the tree shape is preserved exactly."""
    if isinstance(e, Const):
        return e
    if isinstance(e, VarRef):
        new = mapping.get(e.name)
        return VarRef(new) if new is not None else e
    if isinstance(e, Neg):
        return Neg(rename_vars(e.arg, mapping))
    if isinstance(e, BinOp):
        return BinOp(e.op, rename_vars(e.lhs, mapping), rename_vars(e.rhs, mapping))
    if isinstance(e, Call):
        return Call(e.fn, tuple(rename_vars(a, mapping) for a in e.args))
    raise TypeError(f"unknown expression node {e!r}")


def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Replace variable references by expressions."""
    if isinstance(e, Const):
        return e
    if isinstance(e, VarRef):
        return bindings.get(e.name, e)
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, bindings))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.lhs, bindings), substitute(e.rhs, bindings))
    if isinstance(e, Call):
        return Call(e.fn, tuple(substitute(a, bindings) for a in e.args))
    raise TypeError(f"unknown expression node {e!r}")


def eval_expr(e: Expr, binding: Mapping[str, float]) -> float:
    """Evaluate recursively; raises E_DOMAIN on division by zero, log of a
    nonpositive value, sqrt of a negative value, or an ill-posed power."""
    if isinstance(e, Const):
        return e.value
    if isinstance(e, VarRef):
        try:
            return float(binding[e.name])
        except KeyError:
            raise err("E_DOMAIN", f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return -eval_expr(e.arg, binding)
    if isinstance(e, BinOp):
        a = eval_expr(e.lhs, binding)
        if e.op == "^":
            p = e.rhs.value  # type: ignore[union-attr]
            if p == 0.0:
                return 1.0
            if a == 0.0 and p < 0.0:
                raise err("E_DOMAIN", "zero raised to a negative power")
            if a < 0.0 and p != int(p):
                raise err("E_DOMAIN", "negative base with fractional exponent")
            return float(a ** p)
        b = eval_expr(e.rhs, binding)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0.0:
            raise err("E_DOMAIN", "division by zero")
        return a / b
    if isinstance(e, Call):
        x = eval_expr(e.args[0], binding)
        if e.fn == "exp":
            return math.exp(x)
        if e.fn == "log":
            if x <= 0.0:
                raise err("E_DOMAIN", f"log of nonpositive value {x}")
            return math.log(x)
        if e.fn == "sqrt":
            if x < 0.0:
                raise err("E_DOMAIN", f"sqrt of negative value {x}")
            return math.sqrt(x)
        if e.fn == "sin":
            return math.sin(x)
        if e.fn == "cos":
            return math.cos(x)
        if e.fn == "abs":
            return abs(x)
    raise TypeError(f"unknown expression node {e!r}")


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def render(e: Expr, parent_prec: int = 0) -> str:
    """Deterministic infix rendering used by the emitter and pretty-printer."""
    if isinstance(e, Const):
        v = e.value
        if v == int(v) and abs(v) < 1e16 and not (v == 0.0 and math.copysign(1, v) < 0):
            s = str(int(v))
        else:
            s = repr(v)
        return f"({s})" if v < 0 and parent_prec > 0 else s
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, Neg):
        inner = render(e.arg, 3)
        s = f"-{inner}"
        return f"({s})" if parent_prec > 1 else s
    if isinstance(e, BinOp):
        prec = _PRECEDENCE[e.op]
        # '-' and '/' are left-associative; '^' is right-associative.
        lhs = render(e.lhs, prec if e.op != "^" else prec + 1)
        rhs = render(e.rhs, prec + 1 if e.op in ("-", "/") else prec)
        s = f"{lhs} {e.op} {rhs}" if e.op != "^" else f"{lhs}{e.op}{rhs}"
        return f"({s})" if prec < parent_prec else s
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(render(a) for a in e.args)})"
    raise TypeError(f"unknown expression node {e!r}")


# ---------------------------------------------------------------------------
# Variables and constraints
# ---------------------------------------------------------------------------

KIND_CONTINUOUS = "continuous"
KIND_BINARY = "binary"

ORIGINS = ("user", "dummy", "disaggregated-true", "disaggregated-false", "hat-copy")


@dataclass(frozen=True, slots=True)
class Variable:
    name: str
    lb: float
    ub: float
    kind: str = KIND_CONTINUOUS
    origin: str = "user"

    def __post_init__(self):
        object.__setattr__(self, "lb", float(self.lb))
        object.__setattr__(self, "ub", float(self.ub))
        if self.lb > self.ub:
            raise ValueError(f"variable {self.name}: lb {self.lb} > ub {self.ub}")
        if self.kind == KIND_BINARY and (self.lb, self.ub) != (0.0, 1.0):
            raise ValueError(f"binary variable {self.name} must have bounds [0, 1]")
        if self.kind not in (KIND_CONTINUOUS, KIND_BINARY):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lb) and math.isfinite(self.ub)


LE = "<="
EQ = "="
GE = ">="
RELATIONS = (LE, EQ, GE)


@dataclass(frozen=True, slots=True)
class Constraint:
    """A constraint in moved-to-left form: ``body REL 0``."""

    body: Expr
    relation: str
    label: str

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")

    def satisfied(self, value: float, tol: float = 0.0) -> bool:
        if self.relation == LE:
            return value <= tol
        if self.relation == GE:
            return value >= -tol
        return abs(value) <= tol


def normalize_constraint(lhs: Expr, relation: str, rhs: Expr, label: str) -> Constraint:
    """Build ``lhs - rhs REL 0``.  A >= stays a >= so that emitted models read
    like their source."""
    if relation not in RELATIONS:
        raise ValueError(f"unknown relation {relation!r}")
    if isinstance(rhs, Const) and rhs.value == 0.0:
        body = lhs
    else:
        body = BinOp("-", lhs, rhs)
    return Constraint(body, relation, label)


def negate_comparison(c: Constraint) -> Constraint:
    """Closed-complement negation: <= flips to >= at the same boundary, so the
    boundary point satisfies both the constraint and its negation."""
    if c.relation == EQ:
        raise err("E_NEGATE_EQ", f"cannot negate equality constraint {c.label!r}")
    flipped = GE if c.relation == LE else LE
    return Constraint(c.body, flipped, c.label)


# ---------------------------------------------------------------------------
# Logic propositions
# ---------------------------------------------------------------------------


class Prop:
    """Base class for propositional formulas over Boolean variable names."""

    __slots__ = ()

    def __and__(self, other) -> "Prop":
        return And((self, other))

    def __or__(self, other) -> "Prop":
        return Or((self, other))

    def __invert__(self) -> "Prop":
        return Not(self)

    def implies(self, other) -> "Prop":
        return Implies(self, other)


@dataclass(frozen=True, slots=True)
class BoolRef(Prop):
    name: str


@dataclass(frozen=True, slots=True)
class Not(Prop):
    arg: Prop


@dataclass(frozen=True, slots=True)
class And(Prop):
    args: tuple[Prop, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True, slots=True)
class Or(Prop):
    args: tuple[Prop, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True, slots=True)
class Implies(Prop):
    premise: Prop
    conclusion: Prop


def prop_vars(p: Prop) -> set[str]:
    if isinstance(p, BoolRef):
        return {p.name}
    if isinstance(p, Not):
        return prop_vars(p.arg)
    if isinstance(p, (And, Or)):
        out: set[str] = set()
        for a in p.args:
            out |= prop_vars(a)
        return out
    if isinstance(p, Implies):
        return prop_vars(p.premise) | prop_vars(p.conclusion)
    raise TypeError(f"unknown proposition node {p!r}")


def eval_prop(p: Prop, assignment: Mapping[str, bool]) -> bool:
    if isinstance(p, BoolRef):
        return bool(assignment[p.name])
    if isinstance(p, Not):
        return not eval_prop(p.arg, assignment)
    if isinstance(p, And):
        return all(eval_prop(a, assignment) for a in p.args)
    if isinstance(p, Or):
        return any(eval_prop(a, assignment) for a in p.args)
    if isinstance(p, Implies):
        return (not eval_prop(p.premise, assignment)) or eval_prop(p.conclusion, assignment)
    raise TypeError(f"unknown proposition node {p!r}")


# ---------------------------------------------------------------------------
# GDP and MINLP models
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class DisjunctTerm:
    bool_var: str
    constraints: tuple[Constraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))


@dataclass(frozen=True, slots=True)
class TermOrigin:
    """Where a disjunct term came from, for verification and reporting.

    kind is one of:
      * "branch"     -- a branch of an if-block; ``branch`` is its 0-based index
                        (the else branch is the last index).
      * "cond"       -- the positive term of a testing-condition disjunction;
                        ``atom`` indexes the atom within the source condition.
      * "cond-not"   -- the complement term of a condition pair.
      * "cond-none"  -- the no-atom-holds term of an or-of-atoms disjunction.
    """

    kind: str
    branch: int | None = None
    atom: int | None = None


@dataclass(frozen=True, slots=True)
class DisjunctionOrigin:
    """Provenance of a whole disjunction.

    kind: "block" for a disjunction carrying an if-block's branches,
    "cond-pair" for a single-atom condition disjunction, "cond-or" for an
    or-of-atoms condition disjunction.
    """

    kind: str
    block_id: str
    terms: tuple[TermOrigin, ...]


@dataclass(frozen=True, slots=True)
class Disjunction:
    id: str
    terms: tuple[DisjunctTerm, ...]
    exactly_one: bool = True
    origin: DisjunctionOrigin | None = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise err("E_EMPTY_DISJUNCTION", f"disjunction {self.id} has no terms")
        names = [t.bool_var for t in self.terms]
        if len(set(names)) != len(names):
            raise ValueError(f"disjunction {self.id}: duplicate Boolean variables")


@dataclass(frozen=True, slots=True)
class GdpModel:
    variables: tuple[Variable, ...]
    global_constraints: tuple[Constraint, ...]
    disjunctions: tuple[Disjunction, ...]
    props: tuple[Prop, ...]
    disagg_sets: Mapping[str, tuple[str, ...]]  # disjunction id -> variable names

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "global_constraints", tuple(self.global_constraints))
        object.__setattr__(self, "disjunctions", tuple(self.disjunctions))
        object.__setattr__(self, "props", tuple(self.props))
        object.__setattr__(self, "disagg_sets",
                           {k: tuple(v) for k, v in self.disagg_sets.items()})

    def var(self, name: str) -> Variable:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def var_map(self) -> dict[str, Variable]:
        return {v.name: v for v in self.variables}


@dataclass(frozen=True, slots=True)
class Provenance:
    """Source of a reformulated constraint row.

    kind: "hat", "box-true", "box-false", "link", "term", "term-bigm",
    "logic-clause", or "global".  Box rows come in lo/hi pairs sharing one
    ``group`` key; the pair counts as a single constraint in the statistics.
    """

    kind: str
    disjunction: str | None = None
    term: int | None = None
    var: str | None = None
    source_label: str | None = None
    group: str | None = None
    m_value: float | None = None


@dataclass(frozen=True, slots=True)
class MinlpModel:
    variables: tuple[Variable, ...]
    constraints: tuple[Constraint, ...]
    binary_exactly_one: tuple[tuple[str, ...], ...]
    provenance: Mapping[str, Provenance]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "binary_exactly_one",
                           tuple(tuple(g) for g in self.binary_exactly_one))
        object.__setattr__(self, "provenance", dict(self.provenance))

    @property
    def var_map(self) -> dict[str, Variable]:
        return {v.name: v for v in self.variables}
