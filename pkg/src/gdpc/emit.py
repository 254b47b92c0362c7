"""Serialization of MINLP models.

Two formats:

* ``emit_json`` -- a canonical JSON document with variables and constraints
  sorted by name/label, expressions in round-trippable prefix arrays, and
  numbers rendered with 17 significant digits.  Identical models emit
  byte-identical documents; ``parse_model_json`` inverts it exactly.
* ``emit_algebraic`` -- a reviewable text form, one constraint per line,
  grouped per disjunction followed by logic clauses and globals.
"""

from __future__ import annotations

import json
import math

from .ir import (
    BinOp, Call, Const, Constraint, Expr, MinlpModel, Neg, Provenance, Variable,
    VarRef, render,
)

SCHEMA_VERSION = "1"


def _num(v: float) -> str:
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def _expr_json(e: Expr) -> str:
    if isinstance(e, Const):
        return f'["num",{_num(e.value)}]'
    if isinstance(e, VarRef):
        return f'["var",{json.dumps(e.name)}]'
    if isinstance(e, Neg):
        return f'["neg",{_expr_json(e.arg)}]'
    if isinstance(e, BinOp):
        return f'[{json.dumps(e.op)},{_expr_json(e.lhs)},{_expr_json(e.rhs)}]'
    if isinstance(e, Call):
        args = ",".join(_expr_json(a) for a in e.args)
        return f'["call",{json.dumps(e.fn)},{args}]'
    raise TypeError(f"unknown expression node {e!r}")


def _prov_json(p: Provenance) -> str:
    parts = [f'"kind":{json.dumps(p.kind)}']
    if p.disjunction is not None:
        parts.append(f'"disjunction":{json.dumps(p.disjunction)}')
    if p.term is not None:
        parts.append(f'"term":{p.term}')
    if p.var is not None:
        parts.append(f'"var":{json.dumps(p.var)}')
    if p.source_label is not None:
        parts.append(f'"source_label":{json.dumps(p.source_label)}')
    if p.group is not None:
        parts.append(f'"group":{json.dumps(p.group)}')
    if p.m_value is not None:
        parts.append(f'"m_value":{_num(p.m_value)}')
    return "{" + ",".join(parts) + "}"


def emit_json(m: MinlpModel) -> str:
    """Canonical UTF-8 JSON for a model; deterministic and byte-stable."""
    var_rows = []
    for v in sorted(m.variables, key=lambda v: v.name):
        var_rows.append(
            '{"name":%s,"lb":%s,"ub":%s,"kind":%s,"origin":%s}'
            % (json.dumps(v.name), _num(v.lb), _num(v.ub),
               json.dumps(v.kind), json.dumps(v.origin)))
    con_rows = []
    for c in sorted(m.constraints, key=lambda c: c.label):
        prov = m.provenance.get(c.label)
        prov_part = f',"provenance":{_prov_json(prov)}' if prov is not None else ""
        con_rows.append(
            '{"label":%s,"body":%s,"relation":%s%s}'
            % (json.dumps(c.label), _expr_json(c.body), json.dumps(c.relation),
               prov_part))
    groups = sorted(tuple(g) for g in m.binary_exactly_one)
    group_rows = ["[" + ",".join(json.dumps(n) for n in g) + "]" for g in groups]
    return ('{"schema_version":%s,"variables":[%s],"constraints":[%s],'
            '"exactly_one_groups":[%s]}'
            % (json.dumps(SCHEMA_VERSION), ",".join(var_rows), ",".join(con_rows),
               ",".join(group_rows)))


def _expr_from_json(node) -> Expr:
    tag = node[0]
    if tag == "num":
        return Const(float(node[1]))
    if tag == "var":
        return VarRef(node[1])
    if tag == "neg":
        return Neg(_expr_from_json(node[1]))
    if tag == "call":
        return Call(node[1], tuple(_expr_from_json(a) for a in node[2:]))
    return BinOp(tag, _expr_from_json(node[1]), _expr_from_json(node[2]))


def _bound_from_json(v) -> float:
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return float(v)


def parse_model_json(text: str) -> MinlpModel:
    doc = json.loads(text)
    variables = tuple(
        Variable(v["name"], _bound_from_json(v["lb"]), _bound_from_json(v["ub"]),
                 v["kind"], v["origin"])
        for v in doc["variables"])
    constraints = []
    provenance = {}
    for c in doc["constraints"]:
        constraints.append(Constraint(_expr_from_json(c["body"]), c["relation"],
                                      c["label"]))
        if "provenance" in c:
            p = c["provenance"]
            provenance[c["label"]] = Provenance(
                p["kind"], p.get("disjunction"), p.get("term"), p.get("var"),
                p.get("source_label"), p.get("group"),
                float(p["m_value"]) if "m_value" in p else None)
    groups = tuple(tuple(g) for g in doc["exactly_one_groups"])
    return MinlpModel(variables, tuple(constraints), groups, provenance)


# ---------------------------------------------------------------------------
# Algebraic text
# ---------------------------------------------------------------------------


def _additive_chain(e: Expr) -> tuple[list[str], list[str], float] | None:
    """Flatten a sum of variables, negated variables, and constants."""
    pos: list[str] = []
    neg: list[str] = []
    const = 0.0

    def walk(node: Expr, sign: int) -> bool:
        nonlocal const
        if isinstance(node, VarRef):
            (pos if sign > 0 else neg).append(node.name)
            return True
        if isinstance(node, Const):
            const += sign * node.value
            return True
        if isinstance(node, Neg):
            return walk(node.arg, -sign)
        if isinstance(node, BinOp) and node.op == "+":
            return walk(node.lhs, sign) and walk(node.rhs, sign)
        if isinstance(node, BinOp) and node.op == "-":
            return walk(node.lhs, sign) and walk(node.rhs, -sign)
        return False

    if not walk(e, 1):
        return None
    return pos, neg, const


def _line(c: Constraint, prov: Provenance | None) -> str:
    if prov is not None and prov.kind == "logic-clause":
        chain = _additive_chain(c.body)
        if chain is not None:
            pos, neg, const = chain
            lhs = " + ".join(pos) if pos else "0"
            rhs = " + ".join(neg)
            moved = -const  # body >= 0 becomes pos >= neg - const
            if moved != 0.0 or not rhs:
                term = render(Const(abs(moved)))
                if not rhs:
                    rhs = render(Const(moved))
                elif moved < 0.0:
                    rhs = f"{rhs} - {term}"
                else:
                    rhs = f"{rhs} + {term}"
            return f"{lhs} {c.relation} {rhs}"
    if isinstance(c.body, BinOp) and c.body.op == "-":
        return f"{render(c.body.lhs)} {c.relation} {render(c.body.rhs)}"
    return f"{render(c.body)} {c.relation} 0"


def emit_algebraic(m: MinlpModel) -> str:
    """One constraint per line, grouped by provenance for review."""
    by_disjunction: dict[str, list[str]] = {}
    clauses: list[str] = []
    globals_: list[str] = []
    order: list[str] = []
    for c in m.constraints:
        prov = m.provenance.get(c.label)
        line = _line(c, prov)
        if prov is None or prov.kind == "global":
            globals_.append(line)
        elif prov.kind == "logic-clause":
            clauses.append(line)
        else:
            k = prov.disjunction or "?"
            if k not in by_disjunction:
                by_disjunction[k] = []
                order.append(k)
            by_disjunction[k].append(line)

    group_of: dict[str, tuple[str, ...]] = {}
    for g in m.binary_exactly_one:
        if g:
            k = g[0].rsplit("_", 1)[-1]
            group_of[k] = g

    lines: list[str] = []
    for k in order:
        lines.append(f"# disjunction {k}")
        lines.extend(by_disjunction[k])
        if k in group_of:
            lines.append(" + ".join(group_of[k]) + " = 1")
        lines.append("")
    leftover = [k for k in group_of if k not in order]
    for k in leftover:
        lines.append(f"# disjunction {k}")
        lines.append(" + ".join(group_of[k]) + " = 1")
        lines.append("")
    if clauses:
        lines.append("# logic clauses")
        lines.extend(clauses)
        lines.append("")
    if globals_:
        lines.append("# global constraints")
        lines.extend(globals_)
        lines.append("")
    return "\n".join(lines)
