"""Backends that turn a GDP model into a standard MINLP.

Three reformulations are provided:

* ``reformulate_true_false`` -- the primary backend.  Every disaggregated
  variable of a term receives a copy ``xhat`` split into a true part ``nu_t``
  (active when the term holds) and a false part ``nu_f`` (active otherwise);
  term constraints are rewritten over the copies and the original variable is
  recovered as the sum of true parts.  The output contains no epsilon and no
  big-M constant.
* ``reformulate_bigm`` -- inactive constraints are relaxed by M(1 - lambda),
  with M derived from interval enclosures under the auto policy.
* ``reformulate_hull_eps`` -- disaggregation with perspective terms.  Parts
  that are affine in the disaggregated variables get the exact perspective
  form (no epsilon); nonlinear parts use (lambda + eps) h(nu / (lambda + eps))
  either bare (lee-grossmann) or with the h(0)(lambda - 1) correction
  (sawaya-2).

Naming is deterministic: ``lam_<j>_<k>``, ``xhat_<v>_<j>_<k>``,
``nu_t_<v>_<j>_<k>``, ``nu_f_<v>_<j>_<k>``, ``nu_<v>_<j>_<k>``, with ``j`` the
1-based term index and ``k`` the disjunction id.

Statistics convention: a two-sided box row counts as one constraint;
exactly-one rows and logic clauses are excluded (they are common to every
method); copy definitions, box rows, and linking rows are included.  Big-M
adds only the binaries and zero counted constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .errors import err
from .intervals import interval_bounds
from .ir import (
    BinOp, Call, Const, Constraint, EQ, Expr, GE, GdpModel, LE, MinlpModel, Neg,
    Provenance, Variable, VarRef, eval_expr, expr_vars, rename_vars,
)
from .normalize import clauses_to_linear, to_cnf


@dataclass(frozen=True, slots=True)
class ReformStats:
    method: str
    q: int
    m_per_disjunction: dict[str, int]
    n_per_disjunction: dict[str, int]
    added_vars: int
    added_constraints: int

    @property
    def m_total(self) -> int:
        return sum(self.m_per_disjunction.values())


def _expected_counts(method: str, m: dict[str, int],
                     n: dict[str, int]) -> tuple[int, int]:
    if method == "true-false":
        added_vars = sum(3 * n[k] * m[k] for k in m)
        added_cons = sum(n[k] + 3 * n[k] * m[k] for k in m)
    elif method == "hull-eps":
        added_vars = sum(n[k] * m[k] for k in m)
        added_cons = sum(n[k] + n[k] * m[k] for k in m)
    elif method == "bigm":
        added_vars = sum(m.values())  # the lambda binaries are its only additions
        added_cons = 0
    else:
        raise ValueError(f"unknown method {method!r}")
    return added_vars, added_cons


def _closed_form_stats(method: str, g: GdpModel) -> ReformStats:
    m = {d.id: len(d.terms) for d in g.disjunctions}
    n = {d.id: len(g.disagg_sets.get(d.id, ())) for d in g.disjunctions}
    added_vars, added_cons = _expected_counts(method, m, n)
    return ReformStats(method, len(g.disjunctions), m, n, added_vars, added_cons)


def _check_disagg_bounded(g: GdpModel) -> None:
    var_map = g.var_map
    for k, names in g.disagg_sets.items():
        for name in names:
            if not var_map[name].bounded:
                raise err("E_UNBOUNDED_DISAGG",
                          f"variable {name!r} in disjunction {k} needs finite bounds")


class _Builder:
    """Accumulates variables, constraints, and provenance for one backend."""

    def __init__(self, g: GdpModel):
        self.g = g
        self.variables: list[Variable] = list(g.variables)
        self.constraints: list[Constraint] = []
        self.provenance: dict[str, Provenance] = {}
        self.groups: list[tuple[str, ...]] = []
        self.binary_of: dict[str, str] = {}  # Boolean name -> binary name

    def add_var(self, v: Variable) -> None:
        self.variables.append(v)

    def add_con(self, c: Constraint, p: Provenance) -> None:
        self.constraints.append(c)
        self.provenance[c.label] = p

    def add_binaries(self) -> None:
        for d in self.g.disjunctions:
            names = []
            for j, term in enumerate(d.terms, start=1):
                lam = f"lam_{j}_{d.id}"
                self.add_var(Variable(lam, 0.0, 1.0, "binary", "dummy"))
                self.binary_of[term.bool_var] = lam
                names.append(lam)
            self.groups.append(tuple(names))

    def add_clauses(self) -> None:
        clauses = []
        for prop in self.g.props:
            clauses.extend(to_cnf(prop))
        for c in clauses_to_linear(clauses, self.binary_of):
            self.add_con(c, Provenance("logic-clause"))

    def add_globals(self) -> None:
        for c in self.g.global_constraints:
            self.add_con(c, Provenance("global", source_label=c.label))

    def finish(self) -> MinlpModel:
        return MinlpModel(tuple(self.variables), tuple(self.constraints),
                          tuple(self.groups), self.provenance)


def _nu_bounds(v: Variable) -> tuple[float, float]:
    # nu must admit 0 when its side is inactive.
    return (min(v.lb, 0.0), max(v.ub, 0.0))


def _sum_fold(parts: list[Expr]) -> Expr:
    body = parts[0]
    for p in parts[1:]:
        body = BinOp("+", body, p)
    return body


# ---------------------------------------------------------------------------
# True-False reformulation
# ---------------------------------------------------------------------------


def reformulate_true_false(g: GdpModel) -> tuple[MinlpModel, ReformStats]:
    """Emit the copy/true/false disaggregation of every disjunction.

    Per disjunction k, term j, and disaggregated variable v:
    ``xhat = nu_t + nu_f``, ``lam x^L <= nu_t <= lam x^U``,
    ``(1-lam) x^L <= nu_f <= (1-lam) x^U``; per (k, v) the link
    ``v = sum_j nu_t``; per k the exactly-one row over the lambdas.  Term
    constraints are rewritten with disaggregated variables replaced by their
    copies; shared variables stay untouched, so every constraint body is the
    source body under a pure renaming.
    """
    _check_disagg_bounded(g)
    b = _Builder(g)
    b.add_binaries()
    var_map = g.var_map

    for d in g.disjunctions:
        names = g.disagg_sets.get(d.id, ())
        k = d.id
        for v in names:
            proto = var_map[v]
            lo, hi = _nu_bounds(proto)
            for j in range(1, len(d.terms) + 1):
                lam = VarRef(f"lam_{j}_{k}")
                xhat = f"xhat_{v}_{j}_{k}"
                nu_t = f"nu_t_{v}_{j}_{k}"
                nu_f = f"nu_f_{v}_{j}_{k}"
                b.add_var(Variable(xhat, proto.lb, proto.ub, "continuous", "hat-copy"))
                b.add_var(Variable(nu_t, lo, hi, "continuous", "disaggregated-true"))
                b.add_var(Variable(nu_f, lo, hi, "continuous", "disaggregated-false"))
                b.add_con(
                    Constraint(BinOp("-", VarRef(xhat),
                                     BinOp("+", VarRef(nu_t), VarRef(nu_f))),
                               EQ, f"hat_{v}_{j}_{k}"),
                    Provenance("hat", k, j, v))
                group = f"boxt_{v}_{j}_{k}"
                b.add_con(
                    Constraint(BinOp("-", BinOp("*", lam, Const(proto.lb)),
                                     VarRef(nu_t)), LE, f"boxt_lo_{v}_{j}_{k}"),
                    Provenance("box-true", k, j, v, group=group))
                b.add_con(
                    Constraint(BinOp("-", VarRef(nu_t),
                                     BinOp("*", lam, Const(proto.ub))),
                               LE, f"boxt_hi_{v}_{j}_{k}"),
                    Provenance("box-true", k, j, v, group=group))
                one_minus = BinOp("-", Const(1.0), lam)
                group = f"boxf_{v}_{j}_{k}"
                b.add_con(
                    Constraint(BinOp("-", BinOp("*", one_minus, Const(proto.lb)),
                                     VarRef(nu_f)), LE, f"boxf_lo_{v}_{j}_{k}"),
                    Provenance("box-false", k, j, v, group=group))
                b.add_con(
                    Constraint(BinOp("-", VarRef(nu_f),
                                     BinOp("*", one_minus, Const(proto.ub))),
                               LE, f"boxf_hi_{v}_{j}_{k}"),
                    Provenance("box-false", k, j, v, group=group))
        for v in names:
            parts = [VarRef(f"nu_t_{v}_{j}_{k}") for j in range(1, len(d.terms) + 1)]
            b.add_con(
                Constraint(BinOp("-", VarRef(v), _sum_fold(parts)), EQ,
                           f"link_{v}_{k}"),
                Provenance("link", k, None, v))
        for j, term in enumerate(d.terms, start=1):
            mapping = {v: f"xhat_{v}_{j}_{k}" for v in names}
            for c in term.constraints:
                b.add_con(Constraint(rename_vars(c.body, mapping), c.relation, c.label),
                          Provenance("term", k, j, source_label=c.label))

    b.add_clauses()
    b.add_globals()
    model = b.finish()
    return model, stats(model, g)


# ---------------------------------------------------------------------------
# Big-M reformulation
# ---------------------------------------------------------------------------


def reformulate_bigm(g: GdpModel,
                     m_values: float | Mapping[str, float] | None = None
                     ) -> tuple[MinlpModel, ReformStats]:
    """Relax each term constraint by M(1 - lambda).

    Under the auto policy the constant is the relevant endpoint of the
    constraint body's interval enclosure over the variable box, clipped at
    zero; an infinite enclosure without a user-supplied M is E_M_UNBOUNDED.
    ``m_values`` may be a single number or a map from constraint label to M.
    Equalities split into a <= and a >= row.  No variables are disaggregated.
    """
    b = _Builder(g)
    b.add_binaries()
    boxes = {v.name: (v.lb, v.ub) for v in g.variables}

    def m_for(c: Constraint, need: str) -> float:
        if isinstance(m_values, Mapping):
            if c.label in m_values:
                return float(m_values[c.label])
        elif m_values is not None:
            return float(m_values)
        lo, hi = interval_bounds(c.body, boxes)
        bound = hi if need == "hi" else -lo
        if not math.isfinite(bound):
            raise err("E_M_UNBOUNDED",
                      f"no finite big-M enclosure for constraint {c.label!r}; "
                      f"supply one explicitly")
        return max(0.0, bound)

    for d in g.disjunctions:
        k = d.id
        for j, term in enumerate(d.terms, start=1):
            slack = BinOp("-", Const(1.0), VarRef(f"lam_{j}_{k}"))
            for c in term.constraints:
                parts: list[tuple[Expr, str, str, str]] = []
                if c.relation in (LE, EQ):
                    label = c.label if c.relation == LE else f"{c.label}_le"
                    parts.append((c.body, LE, label, "hi"))
                if c.relation in (GE, EQ):
                    label = c.label if c.relation == GE else f"{c.label}_ge"
                    parts.append((c.body, GE, label, "lo"))
                for body, rel, label, need in parts:
                    m = m_for(c, need)
                    relaxed = BinOp("*", Const(m), slack)
                    new_body = (BinOp("-", body, relaxed) if rel == LE
                                else BinOp("+", body, relaxed))
                    b.add_con(Constraint(new_body, rel, label),
                              Provenance("term-bigm", k, j, source_label=c.label,
                                         m_value=m))

    b.add_clauses()
    b.add_globals()
    model = b.finish()
    return model, stats(model, g)


# ---------------------------------------------------------------------------
# Epsilon convex-hull reformulation
# ---------------------------------------------------------------------------


def _mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const):
        if a.value == 1.0:
            return b
        if a.value == 0.0:
            return Const(0.0)
        if a.value == -1.0:
            return Neg(b)
    return BinOp("*", a, b)


def _linear_in(e: Expr, subset: frozenset[str]) -> tuple[dict[str, Expr], Expr] | None:
    """Split ``e`` into sum(coeff_v * v for v in subset) + rest, where no
    coefficient and no rest term contains a subset variable; None if ``e`` is
    not affine in the subset."""
    if isinstance(e, Const):
        return {}, e
    if isinstance(e, VarRef):
        if e.name in subset:
            return {e.name: Const(1.0)}, Const(0.0)
        return {}, e
    if isinstance(e, Neg):
        inner = _linear_in(e.arg, subset)
        if inner is None:
            return None
        return ({v: Neg(c) for v, c in inner[0].items()}, Neg(inner[1]))
    if isinstance(e, BinOp):
        if e.op in ("+", "-"):
            a = _linear_in(e.lhs, subset)
            rhs = _linear_in(e.rhs, subset)
            if a is None or rhs is None:
                return None
            coeffs = dict(a[0])
            for v, c in rhs[0].items():
                c = c if e.op == "+" else Neg(c)
                coeffs[v] = BinOp(e.op, coeffs[v], rhs[0][v]) if v in a[0] else c
            rest = BinOp(e.op, a[1], rhs[1])
            return coeffs, rest
        if e.op == "*":
            for factor, other in ((e.lhs, e.rhs), (e.rhs, e.lhs)):
                if not (expr_vars(factor) & subset):
                    inner = _linear_in(other, subset)
                    if inner is None:
                        return None
                    return ({v: _mul(factor, c) for v, c in inner[0].items()},
                            _mul(factor, inner[1]))
            return None
        if e.op == "/" and not (expr_vars(e.rhs) & subset):
            inner = _linear_in(e.lhs, subset)
            if inner is None:
                return None
            return ({v: BinOp("/", c, e.rhs) for v, c in inner[0].items()},
                    BinOp("/", inner[1], e.rhs))
        if not (expr_vars(e) & subset):
            return {}, e
        return None
    if isinstance(e, Call):
        if not (expr_vars(e) & subset):
            return {}, e
        return None
    return None


def reformulate_hull_eps(g: GdpModel, eps: float = 1e-6,
                         variant: str = "sawaya-2"
                         ) -> tuple[MinlpModel, ReformStats]:
    """Disaggregate with perspective constraints.

    Equalities split into two inequalities before transformation.  Parts that
    are affine in the disjunction's disaggregated variables are emitted in the
    exact perspective form (coefficient * nu summed with lambda times the
    rest) and need no epsilon.  Nonlinear parts become
    (lambda + eps) h(nu / (lambda + eps)), plus h(0)(lambda - 1) under the
    sawaya-2 variant, where h(0) is the body evaluated at the zero vector of
    disaggregated variables; sawaya-2 therefore requires nonlinear disjunct
    constraints over disaggregated variables only.
    """
    if eps <= 0.0:
        raise err("E_EPS_NONPOSITIVE", f"eps must be positive, got {eps}")
    if eps < 1e-12:
        raise err("E_EPS_TOO_SMALL",
                  f"eps = {eps} rejected: tolerances near 1e-15 are known to cause "
                  f"numerical difficulties in this transformation")
    if variant not in ("lee-grossmann", "sawaya-2"):
        raise ValueError(f"unknown hull variant {variant!r}")
    _check_disagg_bounded(g)
    b = _Builder(g)
    b.add_binaries()
    var_map = g.var_map

    for d in g.disjunctions:
        k = d.id
        names = g.disagg_sets.get(d.id, ())
        subset = frozenset(names)
        for v in names:
            proto = var_map[v]
            lo, hi = _nu_bounds(proto)
            for j in range(1, len(d.terms) + 1):
                lam = VarRef(f"lam_{j}_{k}")
                nu = f"nu_{v}_{j}_{k}"
                b.add_var(Variable(nu, lo, hi, "continuous", "disaggregated-true"))
                group = f"boxn_{v}_{j}_{k}"
                b.add_con(
                    Constraint(BinOp("-", BinOp("*", lam, Const(proto.lb)),
                                     VarRef(nu)), LE, f"boxn_lo_{v}_{j}_{k}"),
                    Provenance("box-true", k, j, v, group=group))
                b.add_con(
                    Constraint(BinOp("-", VarRef(nu),
                                     BinOp("*", lam, Const(proto.ub))),
                               LE, f"boxn_hi_{v}_{j}_{k}"),
                    Provenance("box-true", k, j, v, group=group))
        for v in names:
            parts = [VarRef(f"nu_{v}_{j}_{k}") for j in range(1, len(d.terms) + 1)]
            b.add_con(
                Constraint(BinOp("-", VarRef(v), _sum_fold(parts)), EQ,
                           f"link_{v}_{k}"),
                Provenance("link", k, None, v))
        for j, term in enumerate(d.terms, start=1):
            lam = VarRef(f"lam_{j}_{k}")
            nu_of = {v: f"nu_{v}_{j}_{k}" for v in names}
            for c in term.constraints:
                parts = []
                if c.relation == LE:
                    parts.append((c.body, c.label))
                elif c.relation == GE:
                    parts.append((Neg(c.body), c.label))
                else:
                    parts.append((c.body, f"{c.label}_le"))
                    parts.append((Neg(c.body), f"{c.label}_ge"))
                for body, label in parts:
                    linear = _linear_in(body, subset)
                    if linear is not None:
                        coeffs, rest = linear
                        pieces = [_mul(coeff, VarRef(nu_of[v]))
                                  for v, coeff in coeffs.items()]
                        pieces.append(_mul(lam, rest))
                        new_body = _sum_fold(pieces)
                    else:
                        scale = BinOp("+", lam, Const(eps))
                        shifted = {v: BinOp("/", VarRef(nu_of[v]), scale)
                                   for v in names}
                        from .ir import substitute

                        new_body = _mul(scale, substitute(body, shifted))
                        if variant == "sawaya-2":
                            outside = expr_vars(body) - subset
                            if outside:
                                raise err(
                                    "E_DOMAIN",
                                    f"sawaya-2 needs nonlinear disjunct constraints "
                                    f"over disaggregated variables only; "
                                    f"{c.label!r} also uses {sorted(outside)}")
                            h0 = eval_expr(body, {v: 0.0 for v in names})
                            new_body = BinOp(
                                "+", new_body,
                                _mul(Const(h0), BinOp("-", lam, Const(1.0))))
                    b.add_con(Constraint(new_body, LE, label),
                              Provenance("term", k, j, source_label=c.label))

    b.add_clauses()
    b.add_globals()
    model = b.finish()
    return model, stats(model, g)


# ---------------------------------------------------------------------------
# Statistics and self-audit
# ---------------------------------------------------------------------------


def stats(m: MinlpModel, g: GdpModel) -> ReformStats:
    """Recompute growth counts from provenance and audit them against the
    closed-form formulas; a mismatch raises E_COUNT_MISMATCH."""
    kinds = {p.kind for p in m.provenance.values()}
    if "term-bigm" in kinds:
        method = "bigm"
    elif "hat" in kinds:
        method = "true-false"
    elif any(v.origin == "disaggregated-true" for v in m.variables):
        method = "hull-eps"
    else:
        # Degenerate models (no disaggregation anywhere): tell the methods
        # apart by what they could have added; default to true-false.
        method = "true-false" if not any(
            v.kind == "binary" for v in m.variables) or g.disagg_sets else "true-false"
        if any(v.kind == "binary" for v in m.variables) and not g.disagg_sets:
            method = "bigm" if "term" not in kinds and any(
                p.kind == "term-bigm" for p in m.provenance.values()) else method

    if method == "bigm":
        counted_vars = sum(1 for v in m.variables if v.kind == "binary")
        counted_cons = 0
    else:
        counted_vars = sum(1 for v in m.variables
                           if v.origin in ("hat-copy", "disaggregated-true",
                                           "disaggregated-false"))
        counted = set()
        counted_cons = 0
        for label, p in m.provenance.items():
            if p.kind in ("hat", "link"):
                counted_cons += 1
            elif p.kind in ("box-true", "box-false"):
                key = (p.kind, p.group)
                if key not in counted:
                    counted.add(key)
                    counted_cons += 1

    expected = _closed_form_stats(method, g)
    if (counted_vars, counted_cons) != (expected.added_vars,
                                        expected.added_constraints):
        raise err("E_COUNT_MISMATCH",
                  f"{method}: counted {counted_vars} vars / {counted_cons} "
                  f"constraints, formulas give {expected.added_vars} / "
                  f"{expected.added_constraints}")
    return expected
