"""Normalization passes that turn an if/else program into disjunctions.

Pipeline order is fixed: validate -> insert_implicit_else -> sequentialize ->
flatten_nested -> split_conditions -> build_disjunctions.  Each pass is a pure
function from program to program; ``lower`` composes them and returns the
final GDP model together with the intermediate programs for ``--dump-pass``.

Artificial variables follow the deterministic scheme ``<base>__d<n>`` with a
per-base counter shared by all passes, so a variable rewritten first by the
implicit-else pass and later by flattening receives ``__d1`` and ``__d2`` in
that order.  Boolean labels are ``Y_<block>_<j>`` for branches and
``Z_<block>_<i>`` for testing conditions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .errors import err
from .ir import (
    And, BinOp, BoolRef, Const, Constraint, Disjunction, DisjunctionOrigin,
    DisjunctTerm, EQ, Expr, GdpModel, GE, Implies, LE, Neg, Not, Or, Prop,
    TermOrigin, Variable, VarRef, eval_expr, expr_vars, negate_comparison,
    normalize_constraint, prop_vars, rename_vars,
)
from .parser import (
    Assign, Branch, CmpAtom, Cond, CondAnd, CondNot, CondOr, IfBlock, Program,
    Statement, cond_atoms, resolve_params,
)

_DUMMY_RE = re.compile(r"^(?P<base>.+)__d(?P<n>\d+)$")


class NameAllocator:
    """Deterministic ``<base>__d<n>`` names, skipping anything already taken."""

    def __init__(self, program: Program):
        self.taken = {v.name for v in program.decls} | set(program.params)
        self.counters: dict[str, int] = {}
        for name in self.taken:
            m = _DUMMY_RE.match(name)
            if m:
                base, n = m.group("base"), int(m.group("n"))
                self.counters[base] = max(self.counters.get(base, 0), n)

    def fresh(self, base: str) -> str:
        n = self.counters.get(base, 0)
        while True:
            n += 1
            name = f"{base}__d{n}"
            if name not in self.taken:
                self.counters[base] = n
                self.taken.add(name)
                return name


def _dummy_decl(program: Program, name: str, base: str) -> Variable:
    proto = program.var_map[base]
    return Variable(name, proto.lb, proto.ub, proto.kind, origin="dummy")


# ---------------------------------------------------------------------------
# Read/write rewriting helpers
# ---------------------------------------------------------------------------


def _rename_cond_reads(cond: Cond, mapping: dict[str, str]) -> Cond:
    if isinstance(cond, CmpAtom):
        return CmpAtom(rename_vars(cond.lhs, mapping), cond.rel,
                       rename_vars(cond.rhs, mapping))
    if isinstance(cond, CondNot):
        return CondNot(_rename_cond_reads(cond.arg, mapping))
    if isinstance(cond, CondAnd):
        return CondAnd(tuple(_rename_cond_reads(a, mapping) for a in cond.args))
    return CondOr(tuple(_rename_cond_reads(a, mapping) for a in cond.args))


def _rename_reads_stmts(stmts: tuple[Statement, ...], var: str,
                        new: str) -> tuple[tuple[Statement, ...], bool]:
    """Rename reads of ``var`` to ``new`` until ``var`` is rewritten.

    Returns the rewritten statements and whether every path through them
    writes ``var`` (after which later statements read the fresh value).
    """
    mapping = {var: new}
    out: list[Statement] = []
    written = False
    for s in stmts:
        if written:
            out.append(s)
            continue
        if isinstance(s, Assign):
            out.append(replace(s, rhs=rename_vars(s.rhs, mapping)))
            if s.target == var:
                written = True
        else:
            branches = []
            branch_written = []
            for br in s.branches:
                body, w = _rename_reads_stmts(br.body, var, new)
                branches.append(Branch(_rename_cond_reads(br.cond, mapping), body))
                branch_written.append(w)
            else_body = s.else_body
            if else_body is not None:
                else_body, w = _rename_reads_stmts(else_body, var, new)
                branch_written.append(w)
            else:
                branch_written.append(False)
            out.append(replace(s, branches=tuple(branches), else_body=else_body))
            written = all(branch_written)
    return tuple(out), written


def _retarget_stmts(stmts: tuple[Statement, ...], var: str, new: str,
                    written: bool = False) -> tuple[tuple[Statement, ...], bool]:
    """Rename writes of ``var`` to ``new``; reads after a write on the same
    path follow the new name (they refer to the freshly written value)."""
    out: list[Statement] = []
    for s in stmts:
        if isinstance(s, Assign):
            rhs = rename_vars(s.rhs, {var: new}) if written else s.rhs
            if s.target == var:
                out.append(replace(s, target=new, rhs=rhs))
                written = True
            else:
                out.append(replace(s, rhs=rhs))
        else:
            cond_map = {var: new} if written else {}
            branches = []
            branch_written = []
            for br in s.branches:
                body, w = _retarget_stmts(br.body, var, new, written)
                cond = _rename_cond_reads(br.cond, cond_map) if cond_map else br.cond
                branches.append(Branch(cond, body))
                branch_written.append(w)
            else_body = s.else_body
            if else_body is not None:
                else_body, w = _retarget_stmts(else_body, var, new, written)
                branch_written.append(w)
            else:
                branch_written.append(written)
            out.append(replace(s, branches=tuple(branches), else_body=else_body))
            written = all(branch_written)
    return tuple(out), written


def _retarget_definition(s: Statement, var: str, new: str) -> Statement:
    stmts, _ = _retarget_stmts((s,), var, new)
    return stmts[0]


def _writes(s: Statement) -> list[str]:
    """Variables written by a statement at any depth, in first-write order."""
    out: list[str] = []

    def visit(stmt: Statement) -> None:
        if isinstance(stmt, Assign):
            if stmt.target not in out:
                out.append(stmt.target)
            return
        for br in stmt.branches:
            for b in br.body:
                visit(b)
        if stmt.else_body:
            for b in stmt.else_body:
                visit(b)

    visit(s)
    return out


def _branch_level_writes(s: IfBlock) -> list[str]:
    out: list[str] = []
    bodies = [br.body for br in s.branches]
    if s.else_body:
        bodies.append(s.else_body)
    for body in bodies:
        for b in body:
            if isinstance(b, Assign) and b.target not in out:
                out.append(b.target)
    return out


def _defines_all_paths(s: Statement, var: str) -> bool:
    if isinstance(s, Assign):
        return s.target == var
    if s.else_body is None:
        return False
    bodies = [br.body for br in s.branches] + [s.else_body]
    return all(any(_defines_all_paths(b, var) for b in body) for body in bodies)


def _reads(s: Statement, params: set[str]) -> set[str]:
    if isinstance(s, Assign):
        return expr_vars(s.rhs) - params
    out: set[str] = set()
    for br in s.branches:
        for atom in cond_atoms(br.cond):
            out |= expr_vars(atom.lhs) | expr_vars(atom.rhs)
        for b in br.body:
            out |= _reads(b, params)
    if s.else_body:
        for b in s.else_body:
            out |= _reads(b, params)
    return out - params


# ---------------------------------------------------------------------------
# Pass 1: insert_implicit_else
# ---------------------------------------------------------------------------


def insert_implicit_else(program: Program) -> Program:
    """Give every else-less if-block an explicit else branch.

    A block that rewrites a variable with a prior definition in the same
    statement list has that definition retargeted to a fresh dummy; the block
    reads the dummy and its new else branch restores ``v = dummy``.  A block
    whose branch-level target has no prior definition in scope raises
    E_NO_PRIOR_DEF: the default case the rewrite relies on is absent.
    """
    alloc = NameAllocator(program)
    new_decls = list(program.decls)

    def process_scope(stmts: tuple[Statement, ...]) -> tuple[Statement, ...]:
        out: list[Statement] = []
        defined: dict[str, int] = {}  # var -> index in out of latest full definition
        for s in stmts:
            if isinstance(s, IfBlock):
                s = replace(
                    s,
                    branches=tuple(Branch(br.cond, process_scope(br.body))
                                   for br in s.branches),
                    else_body=(process_scope(s.else_body)
                               if s.else_body is not None else None))
                if not s.has_else:
                    s = _complete_block(s, out, defined)
            out.append(s)
            for v in _writes(s):
                if _defines_all_paths(s, v):
                    defined[v] = len(out) - 1
        return tuple(out)

    def _complete_block(block: IfBlock, out: list[Statement],
                        defined: dict[str, int]) -> IfBlock:
        rewritten = [v for v in _writes(block) if v in defined]
        orphan = [v for v in _branch_level_writes(block) if v not in defined]
        if orphan:
            raise err("E_NO_PRIOR_DEF",
                      f"if-block {block.block_id} assigns {orphan[0]!r} without an "
                      f"else branch or a prior definition in the same scope")
        else_stmts: list[Statement] = []
        for v in rewritten:
            dummy = alloc.fresh(v)
            new_decls.append(_dummy_decl(program, dummy, v))
            idx = defined[v]
            out[idx] = _retarget_definition(out[idx], v, dummy)
            tail, _ = _rename_reads_stmts(tuple(out[idx + 1:]), v, dummy)
            out[idx + 1:] = list(tail)
            branches = []
            for br in block.branches:
                body, _ = _rename_reads_stmts(br.body, v, dummy)
                branches.append(Branch(_rename_cond_reads(br.cond, {v: dummy}), body))
            block = replace(block, branches=tuple(branches))
            else_stmts.append(Assign(v, VarRef(dummy)))
        return replace(block, else_body=tuple(else_stmts))

    statements = process_scope(program.statements)
    return replace(program, decls=tuple(new_decls), statements=statements)


# ---------------------------------------------------------------------------
# Pass 2: sequentialize
# ---------------------------------------------------------------------------


def sequentialize(program: Program) -> Program:
    """Rewrite repeated assignments of one variable into a dummy chain.

    After this pass each variable is written by at most one statement per
    scope; intermediate values live in ``v__d1 ... v__d{s-1}`` and the final
    writer keeps the original name.
    """
    alloc = NameAllocator(program)
    new_decls = list(program.decls)
    params = set(program.params)

    def process_scope(stmts: tuple[Statement, ...],
                      current: dict[str, str]) -> tuple[Statement, ...]:
        counts: dict[str, int] = {}
        for s in stmts:
            for v in _writes(s):
                counts[v] = counts.get(v, 0) + 1
        chained = {v for v, c in counts.items() if c > 1}
        for v in sorted(chained):
            for s in stmts:
                if v in _writes(s) and not _defines_all_paths(s, v):
                    raise err(
                        "E_PARTIAL_REDEF",
                        f"{v!r} is redefined by a statement that does not assign it "
                        f"on every path; add an explicit else branch")
        seen: dict[str, int] = {}
        out: list[Statement] = []
        for s in stmts:
            if isinstance(s, Assign):
                mapping = {v: n for v, n in current.items()
                           if v in expr_vars(s.rhs)}
                if mapping:
                    s = replace(s, rhs=rename_vars(s.rhs, mapping))
            else:
                branches = tuple(
                    Branch(_rename_cond_reads(br.cond, dict(current)),
                           process_scope(br.body, dict(current)))
                    for br in s.branches)
                else_body = (process_scope(s.else_body, dict(current))
                             if s.else_body is not None else None)
                s = replace(s, branches=branches, else_body=else_body)
            for v in _writes(s):
                if v not in chained:
                    current.pop(v, None)
                    continue
                seen[v] = seen.get(v, 0) + 1
                if seen[v] < counts[v]:
                    dummy = alloc.fresh(v)
                    new_decls.append(_dummy_decl(program, dummy, v))
                    s = _retarget_definition(s, v, dummy)
                    current[v] = dummy
                else:
                    current.pop(v, None)
            out.append(s)
        return tuple(out)

    statements = process_scope(program.statements, {})
    return replace(program, decls=tuple(new_decls), statements=statements)


# ---------------------------------------------------------------------------
# Pass 3: flatten_nested
# ---------------------------------------------------------------------------


def flatten_nested(program: Program) -> Program:
    """Hoist nested if-blocks to the top level with dummy result variables.

    A hoisted block whose target is also written elsewhere in the enclosing
    block is renamed to a fresh dummy and the enclosing branch keeps the link
    assignment ``v = dummy``.  Plain assignments that hoisted blocks depend on
    are hoisted with them.  Everything hoisted is evaluated unconditionally,
    which is the documented cost of this representation; the bound-escape
    diagnostic flags targets whose value range can leave their box.
    """
    alloc = NameAllocator(program)
    new_decls = list(program.decls)
    params = set(program.params)

    def flatten_stmts(stmts: tuple[Statement, ...] | list[Statement],
                      outer_writes: set[str]) -> list[Statement]:
        out: list[Statement] = []
        stmts = list(stmts)
        for s in stmts:
            if isinstance(s, Assign):
                out.append(s)
            else:
                others = outer_writes | {
                    w for t in stmts if t is not s for w in _writes(t)}
                out.extend(flatten_block(s, others))
        return out

    def flatten_block(block: IfBlock, outer_writes: set[str]) -> list[Statement]:
        bodies = [br.body for br in block.branches]
        if block.else_body is not None:
            bodies.append(block.else_body)
        inner_outer = outer_writes | set(_writes(block))
        flat_bodies = [flatten_stmts(body, inner_outer) for body in bodies]
        if not any(isinstance(b, IfBlock) for body in flat_bodies for b in body):
            return [_rebuild(block, flat_bodies)]

        all_writes = [set(w for b in body for w in _writes(b)) for body in flat_bodies]
        hoisted_all: list[Statement] = []
        remainders: list[list[Statement]] = []
        for bi, body in enumerate(flat_bodies):
            hoist = [isinstance(b, IfBlock) for b in body]
            changed = True
            while changed:  # pull in assignments the hoisted statements read
                changed = False
                needed: set[str] = set()
                for flag, b in zip(hoist, body):
                    if flag:
                        needed |= _reads(b, params)
                for i, b in enumerate(body):
                    if not hoist[i] and isinstance(b, Assign) and b.target in needed:
                        hoist[i] = True
                        changed = True
            remainder: list[Statement] = []
            i = 0
            while i < len(body):
                b = body[i]
                if not hoist[i]:
                    remainder.append(b)
                    i += 1
                    continue
                links: list[Statement] = []
                for v in _writes(b):
                    elsewhere = outer_writes | {
                        w for oi, ws in enumerate(all_writes) if oi != bi for w in ws}
                    elsewhere |= {w for j, ob in enumerate(body) if j != i
                                  for w in _writes(ob)}
                    if v in elsewhere:
                        dummy = alloc.fresh(v)
                        new_decls.append(_dummy_decl(program, dummy, v))
                        b = _retarget_definition(b, v, dummy)
                        tail, _ = _rename_reads_stmts(tuple(body[i + 1:]), v, dummy)
                        body[i + 1:] = list(tail)
                        links.append(Assign(v, VarRef(dummy)))
                hoisted_all.append(b)
                remainder.extend(links)
                i += 1
            remainders.append(remainder)
        return hoisted_all + [_rebuild(block, remainders)]

    def _rebuild(block: IfBlock, bodies: list[list[Statement]]) -> IfBlock:
        branches = tuple(Branch(br.cond, tuple(body))
                         for br, body in zip(block.branches, bodies))
        else_body = block.else_body
        if else_body is not None:
            else_body = tuple(bodies[-1])
        return replace(block, branches=branches, else_body=else_body)

    statements = tuple(flatten_stmts(program.statements, set()))
    return replace(program, decls=tuple(new_decls), statements=statements)


# ---------------------------------------------------------------------------
# Pass 4: split_conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CondGroup:
    """One condition disjunction to synthesize.

    kind "pair": a single atom and its closed complement (two terms).
    kind "or": the atoms of a pure-or condition plus a none-of-them term.
    """

    kind: str
    bools: tuple[str, ...]  # positive-term Boolean per atom
    atoms: tuple[CmpAtom, ...]
    none_bool: str | None = None


@dataclass(frozen=True, slots=True)
class BlockPlan:
    block_id: str
    mode: str  # "fused" or "split"
    groups: tuple[CondGroup, ...] = ()
    links: tuple[Prop, ...] = ()
    y_bools: tuple[str, ...] = ()


def _is_pure_or(cond: Cond) -> bool:
    return isinstance(cond, CondOr) and all(isinstance(a, CmpAtom) for a in cond.args)


def split_conditions(program: Program) -> tuple[Program, list[BlockPlan]]:
    """Decide, per block, how testing conditions reach the GDP model.

    Blocks whose branch conditions are all atomic stay fused: the comparisons
    travel inside the block's own disjunct terms.  Any compound condition
    switches the whole block to split mode: every atom receives a Boolean
    ``Z_<block>_<i>`` and either a two-term condition disjunction (atom vs.
    closed complement) or, for a pure or-combination, one disjunction whose
    terms are the atoms plus a none-of-them complement term.  Branch Booleans
    ``Y_<block>_<j>`` are then linked to the Z's by first-match implications.
    """
    plans: list[BlockPlan] = []

    for s in program.statements:
        if not isinstance(s, IfBlock):
            continue
        n_terms = len(s.branches) + (1 if s.has_else else 0)
        y_bools = tuple(f"Y_{s.block_id}_{j + 1}" for j in range(n_terms))
        if all(isinstance(br.cond, CmpAtom) for br in s.branches):
            plans.append(BlockPlan(s.block_id, "fused", y_bools=y_bools))
            continue

        atom_index: dict[CmpAtom, int] = {}
        groups: list[CondGroup] = []
        formulas: list[Prop] = []

        def z_of(atom: CmpAtom) -> str:
            if atom not in atom_index:
                atom_index[atom] = len(atom_index) + 1
            return f"Z_{s.block_id}_{atom_index[atom]}"

        def translate(cond: Cond) -> Prop:
            if isinstance(cond, CmpAtom):
                return BoolRef(z_of(cond))
            if isinstance(cond, CondNot):
                return Not(translate(cond.arg))
            if isinstance(cond, CondAnd):
                return And(tuple(translate(a) for a in cond.args))
            return Or(tuple(translate(a) for a in cond.args))

        grouped: set[str] = set()
        for br in s.branches:
            cond = br.cond
            if _is_pure_or(cond) and all(a not in atom_index for a in cond.args):
                bools = tuple(z_of(a) for a in cond.args)
                none_bool = f"Z_{s.block_id}_none{atom_index[cond.args[0]]}"
                groups.append(CondGroup("or", bools, tuple(cond.args), none_bool))
                grouped.update(bools)
                formulas.append(Or(tuple(BoolRef(b) for b in bools)))
            else:
                formulas.append(translate(cond))
        for atom, idx in sorted(atom_index.items(), key=lambda kv: kv[1]):
            name = f"Z_{s.block_id}_{idx}"
            if name not in grouped:
                groups.append(CondGroup("pair", (name,), (atom,)))
        groups.sort(key=lambda g: min(int(b.rsplit("_", 1)[1]) for b in g.bools
                                      if not b.endswith("_not")))

        links: list[Prop] = []
        for j, f in enumerate(formulas):
            premise: Prop = f
            for earlier in reversed(formulas[:j]):
                premise = And((Not(earlier), premise))
            links.append(Implies(premise, BoolRef(y_bools[j])))
        if s.has_else:
            premise = Not(formulas[-1])
            for earlier in reversed(formulas[:-1]):
                premise = And((Not(earlier), premise))
            links.append(Implies(premise, BoolRef(y_bools[-1])))
        plans.append(BlockPlan(s.block_id, "split", tuple(groups), tuple(links),
                               y_bools))
    return program, plans


# ---------------------------------------------------------------------------
# CNF conversion and clause linearization
# ---------------------------------------------------------------------------

Clause = frozenset[tuple[str, bool]]

MAX_CNF_VARS = 24
MAX_CNF_CLAUSES = 4096


def to_cnf(prop: Prop) -> list[Clause]:
    """Clause set equivalent to ``prop`` via negation normal form and
    distribution (no auxiliary variables).  Tautological clauses are dropped
    and duplicates keep their first position."""
    if len(prop_vars(prop)) > MAX_CNF_VARS:
        raise err("E_TOO_LARGE", f"proposition has more than {MAX_CNF_VARS} variables")

    def nnf(p: Prop, positive: bool) -> Prop:
        if isinstance(p, BoolRef):
            return p if positive else Not(p)
        if isinstance(p, Not):
            return nnf(p.arg, not positive)
        if isinstance(p, Implies):
            return nnf(Or((Not(p.premise), p.conclusion)), positive)
        if isinstance(p, And):
            args = tuple(nnf(a, positive) for a in p.args)
            return And(args) if positive else Or(args)
        args = tuple(nnf(a, positive) for a in p.args)
        return Or(args) if positive else And(args)

    def clauses_of(p: Prop) -> list[list[tuple[str, bool]]]:
        if isinstance(p, BoolRef):
            return [[(p.name, True)]]
        if isinstance(p, Not):
            assert isinstance(p.arg, BoolRef)
            return [[(p.arg.name, False)]]
        if isinstance(p, And):
            out: list[list[tuple[str, bool]]] = []
            for a in p.args:
                out.extend(clauses_of(a))
            return out
        assert isinstance(p, Or)
        parts = [clauses_of(a) for a in p.args]
        out = parts[0]
        for nxt in parts[1:]:
            merged = [a + b for a in out for b in nxt]
            if len(merged) > MAX_CNF_CLAUSES:
                raise err("E_TOO_LARGE",
                          f"distribution exceeds {MAX_CNF_CLAUSES} clauses")
            out = merged
        return out

    result: list[Clause] = []
    seen: set[Clause] = set()
    for raw in clauses_of(nnf(prop, True)):
        clause = frozenset(raw)
        names = [n for n, _ in clause]
        if len(set(names)) != len(names):
            continue  # tautology: contains a literal and its negation
        if clause not in seen:
            seen.add(clause)
            result.append(clause)
    return result


def clauses_to_linear(clauses: list[Clause], binary_of: dict[str, str],
                      label_prefix: str = "clause") -> list[Constraint]:
    """Linearize each clause as sum(pos) + sum(1 - neg) >= 1, written in the
    compact form sum(pos) - sum(neg) + (|neg| - 1) >= 0."""
    out: list[Constraint] = []
    for idx, clause in enumerate(clauses, start=1):
        pos = sorted(n for n, sign in clause if sign)
        neg = sorted(n for n, sign in clause if not sign)
        body: Expr | None = None
        for name in pos:
            term: Expr = VarRef(binary_of[name])
            body = term if body is None else BinOp("+", body, term)
        for name in neg:
            term = Neg(VarRef(binary_of[name]))
            body = term if body is None else BinOp("+", body, term)
        offset = float(len(neg) - 1)
        if body is None:
            body = Const(offset)
        elif offset != 0.0:
            body = BinOp("+", body, Const(offset))
        out.append(Constraint(body, GE, f"{label_prefix}_{idx}"))
    return out


# ---------------------------------------------------------------------------
# Pass 5: build_disjunctions
# ---------------------------------------------------------------------------


def _affine_decompose(e: Expr) -> tuple[dict[str, float], float] | None:
    """Write ``e`` as sum(coeff * var) + const, or None if not affine."""
    if not expr_vars(e):
        try:
            return {}, eval_expr(e, {})
        except Exception:
            return None
    if isinstance(e, VarRef):
        return {e.name: 1.0}, 0.0
    if isinstance(e, Neg):
        inner = _affine_decompose(e.arg)
        if inner is None:
            return None
        return {v: -c for v, c in inner[0].items()}, -inner[1]
    if isinstance(e, BinOp):
        if e.op in ("+", "-"):
            a = _affine_decompose(e.lhs)
            b = _affine_decompose(e.rhs)
            if a is None or b is None:
                return None
            sign = 1.0 if e.op == "+" else -1.0
            coeffs = dict(a[0])
            for v, c in b[0].items():
                coeffs[v] = coeffs.get(v, 0.0) + sign * c
            return coeffs, a[1] + sign * b[1]
        if e.op == "*":
            for const_side, var_side in ((e.lhs, e.rhs), (e.rhs, e.lhs)):
                if not expr_vars(const_side):
                    try:
                        k = eval_expr(const_side, {})
                    except Exception:
                        return None
                    inner = _affine_decompose(var_side)
                    if inner is None:
                        return None
                    return {v: k * c for v, c in inner[0].items()}, k * inner[1]
            return None
        if e.op == "/" and not expr_vars(e.rhs):
            try:
                k = eval_expr(e.rhs, {})
            except Exception:
                return None
            if k == 0.0:
                return None
            inner = _affine_decompose(e.lhs)
            if inner is None:
                return None
            return {v: c / k for v, c in inner[0].items()}, inner[1] / k
    return None


def _implied_by(weak: Constraint, strong: Constraint,
                boxes: dict[str, tuple[float, float]]) -> bool:
    """True when ``strong`` provably implies ``weak`` over the variable box.

    Both are brought to f <= 0 form; the implication holds when the affine
    difference f_weak - f_strong has a nonpositive upper bound over the box.
    """

    def le_form(c: Constraint) -> Expr:
        return c.body if c.relation == LE else Neg(c.body)

    a = _affine_decompose(le_form(weak))
    b = _affine_decompose(le_form(strong))
    if a is None or b is None:
        return False
    coeffs = dict(a[0])
    for v, c in b[0].items():
        coeffs[v] = coeffs.get(v, 0.0) - c
    hi = a[1] - b[1]
    for v, c in coeffs.items():
        if c == 0.0:
            continue
        if v not in boxes:
            return False
        lo_v, hi_v = boxes[v]
        hi += c * (hi_v if c > 0.0 else lo_v)
    return hi <= 0.0


@dataclass(frozen=True, slots=True)
class _TermSpec:
    bool_var: str
    conditions: tuple[Constraint, ...]
    equalities: tuple[Constraint, ...]
    targets: tuple[str, ...]
    origin: TermOrigin


def _canonical_atom(atom: CmpAtom, params: dict[str, float]) -> CmpAtom:
    """Resolve parameters and put a bare variable subject on the left."""
    lhs = resolve_params(atom.lhs, params)
    rhs = resolve_params(atom.rhs, params)
    if not isinstance(lhs, VarRef) and isinstance(rhs, VarRef):
        flipped = GE if atom.rel == LE else LE
        return CmpAtom(rhs, flipped, lhs)
    return CmpAtom(lhs, atom.rel, rhs)


def _atom_subjects(atom: CmpAtom) -> list[str]:
    if isinstance(atom.lhs, VarRef):
        return [atom.lhs.name]
    if isinstance(atom.rhs, VarRef):
        return [atom.rhs.name]
    if isinstance(atom.rhs, Const):
        return sorted(expr_vars(atom.lhs))
    if isinstance(atom.lhs, Const):
        return sorted(expr_vars(atom.rhs))
    return sorted(expr_vars(atom.lhs) | expr_vars(atom.rhs))


def _atom_constraint(atom: CmpAtom, label: str) -> Constraint:
    return normalize_constraint(atom.lhs, atom.rel, atom.rhs, label)


def build_disjunctions(program: Program,
                       plans: list[BlockPlan] | None = None) -> GdpModel:
    """Lower a normalized program to a GDP model.

    Each if-block becomes one disjunction (preceded by condition disjunctions
    for split blocks); top-level assignments become global constraints.  Per
    disjunction, the disaggregation set collects the branch-assigned variables
    and the subject variables of its testing comparisons; the ``disaggregate``
    override can add more.  Fused multi-branch chains attach the closed
    complements of earlier conditions to later terms, pruning any comparison
    provably implied by the remaining ones, which turns an else branch after
    bounds ``v >= a`` and ``v <= b`` into the two-sided band ``a <= v <= b``.
    """
    if plans is None:
        _, plans = split_conditions(program)
    plan_by_block = {p.block_id: p for p in plans}
    params = program.params
    boxes = {v.name: (v.lb, v.ub) for v in program.decls}
    decl_order = {v.name: i for i, v in enumerate(program.decls)}

    globals_out: list[Constraint] = []
    disjunctions: list[Disjunction] = []
    props: list[Prop] = []
    disagg: dict[str, list[str]] = {}

    def add_disjunction(term_specs: list[_TermSpec], kind: str, block_id: str,
                        subjects: list[str]) -> None:
        k = f"k{len(disjunctions) + 1}"
        terms = []
        term_origins = []
        for spec in term_specs:
            constraints = tuple(
                Constraint(c.body, c.relation, f"{k}_{c.label}")
                for c in (*spec.conditions, *spec.equalities))
            terms.append(DisjunctTerm(spec.bool_var, constraints))
            term_origins.append(spec.origin)
        origin = DisjunctionOrigin(kind, block_id, tuple(term_origins))
        disjunctions.append(Disjunction(k, tuple(terms), True, origin))
        names: list[str] = []
        for spec in term_specs:
            for t in spec.targets:
                if t not in names:
                    names.append(t)
        for sub in subjects:
            if sub not in names:
                names.append(sub)
        disagg[k] = sorted(names, key=lambda n: decl_order[n])

    def _prune_conditions(own: list[Constraint],
                          added: list[Constraint]) -> tuple[Constraint, ...]:
        kept: list[Constraint] = []
        for i, a in enumerate(added):
            redundant = False
            for b in own:
                if _implied_by(a, b, boxes):
                    redundant = True
                    break
            if not redundant:
                for j, b in enumerate(added):
                    if j == i:
                        continue
                    if _implied_by(a, b, boxes):
                        if _implied_by(b, a, boxes) and j > i:
                            continue  # equivalent pair: keep the earlier one
                        redundant = True
                        break
            if not redundant:
                kept.append(a)
        conds = own + kept
        ge = [c for c in conds if c.relation == GE]
        le = [c for c in conds if c.relation == LE]
        return tuple(ge + le)

    def _branch_equalities(body, prefix: str) -> tuple[tuple[Constraint, ...],
                                                       tuple[str, ...]]:
        out = []
        targets = []
        for stmt in body:
            if not isinstance(stmt, Assign):
                raise err("E_NESTED",
                          "nested if-block reached lowering; run flatten_nested first")
            rhs = resolve_params(stmt.rhs, params)
            out.append(normalize_constraint(VarRef(stmt.target), EQ, rhs,
                                            f"{prefix}_a_{stmt.target}"))
            targets.append(stmt.target)
        return tuple(out), tuple(targets)

    def fused_block(s: IfBlock, plan: BlockPlan) -> None:
        atoms = [_canonical_atom(br.cond, params) for br in s.branches]  # type: ignore[arg-type]
        subjects: list[str] = []
        for a in atoms:
            for v in _atom_subjects(a):
                if v not in subjects:
                    subjects.append(v)
        specs: list[_TermSpec] = []
        n = len(s.branches)
        for j, br in enumerate(s.branches):
            own = _atom_constraint(atoms[j], f"t{j + 1}_c1")
            added = [negate_comparison(_atom_constraint(atoms[i], f"t{j + 1}_n{i + 1}"))
                     for i in range(j)]
            conds = _prune_conditions([own], added)
            eqs, targets = _branch_equalities(br.body, f"t{j + 1}")
            specs.append(_TermSpec(plan.y_bools[j], conds, eqs, targets,
                                   TermOrigin("branch", branch=j)))
        if s.has_else:
            added = [negate_comparison(_atom_constraint(atoms[i], f"t{n + 1}_n{i + 1}"))
                     for i in range(n)]
            conds = _prune_conditions([], added)
            eqs, targets = _branch_equalities(s.else_body or (), f"t{n + 1}")
            specs.append(_TermSpec(plan.y_bools[n], conds, eqs, targets,
                                   TermOrigin("branch", branch=n)))
        add_disjunction(specs, "block", s.block_id, subjects)

    def split_block(s: IfBlock, plan: BlockPlan) -> None:
        for group in plan.groups:
            atoms = [_canonical_atom(a, params) for a in group.atoms]
            subjects: list[str] = []
            for a in atoms:
                for v in _atom_subjects(a):
                    if v not in subjects:
                        subjects.append(v)
            specs = []
            if group.kind == "pair":
                c = _atom_constraint(atoms[0], "t1_c1")
                specs.append(_TermSpec(group.bools[0], (c,), (), (),
                                       TermOrigin("cond", atom=0)))
                neg = negate_comparison(Constraint(c.body, c.relation, "t2_c1"))
                specs.append(_TermSpec(f"{group.bools[0]}_not", (neg,), (), (),
                                       TermOrigin("cond-not", atom=0)))
                add_disjunction(specs, "cond-pair", s.block_id, subjects)
            else:
                for i, a in enumerate(atoms):
                    c = _atom_constraint(a, f"t{i + 1}_c1")
                    specs.append(_TermSpec(group.bools[i], (c,), (), (),
                                           TermOrigin("cond", atom=i)))
                none_conds = tuple(
                    negate_comparison(
                        _atom_constraint(a, f"t{len(atoms) + 1}_c{i + 1}"))
                    for i, a in enumerate(atoms))
                assert group.none_bool is not None
                specs.append(_TermSpec(group.none_bool, none_conds, (), (),
                                       TermOrigin("cond-none")))
                add_disjunction(specs, "cond-or", s.block_id, subjects)
        specs = []
        for j, br in enumerate(s.branches):
            eqs, targets = _branch_equalities(br.body, f"t{j + 1}")
            specs.append(_TermSpec(plan.y_bools[j], (), eqs, targets,
                                   TermOrigin("branch", branch=j)))
        if s.has_else:
            eqs, targets = _branch_equalities(s.else_body or (), f"t{len(s.branches) + 1}")
            specs.append(_TermSpec(plan.y_bools[len(s.branches)], (), eqs, targets,
                                   TermOrigin("branch", branch=len(s.branches))))
        add_disjunction(specs, "block", s.block_id, [])
        props.extend(plan.links)

    for stmt in program.statements:
        if isinstance(stmt, Assign):
            rhs = resolve_params(stmt.rhs, params)
            globals_out.append(normalize_constraint(
                VarRef(stmt.target), EQ, rhs, f"global_{stmt.target}"))
        else:
            plan = plan_by_block[stmt.block_id]
            if plan.mode == "fused":
                fused_block(stmt, plan)
            else:
                split_block(stmt, plan)

    for var, disj_id in program.disagg_overrides:
        if disj_id not in disagg:
            raise err("E_UNDECLARED",
                      f"disaggregate override names unknown disjunction {disj_id!r}")
        if var not in disagg[disj_id]:
            disagg[disj_id] = sorted(disagg[disj_id] + [var],
                                     key=lambda n: decl_order[n])

    var_map = program.var_map
    for k, names in disagg.items():
        for name in names:
            if not var_map[name].bounded:
                raise err("E_UNBOUNDED_DISAGG",
                          f"variable {name!r} must have finite bounds to be "
                          f"disaggregated in {k}")

    return GdpModel(tuple(program.decls), tuple(globals_out), tuple(disjunctions),
                    tuple(props), {k: tuple(v) for k, v in disagg.items()})


# ---------------------------------------------------------------------------
# Pipeline driver
# ---------------------------------------------------------------------------

PASS_NAMES = ("parse", "implicit-else", "sequentialize", "flatten-nested",
              "split-conditions")


@dataclass(frozen=True, slots=True)
class Lowered:
    source: Program
    normalized: Program
    plans: tuple[BlockPlan, ...]
    gdp: GdpModel
    trace: dict[str, Program]


def lower(program: Program) -> Lowered:
    """Run the full normalization pipeline on a parsed program."""
    trace: dict[str, Program] = {"parse": program}
    p = insert_implicit_else(program)
    trace["implicit-else"] = p
    p = sequentialize(p)
    trace["sequentialize"] = p
    p = flatten_nested(p)
    trace["flatten-nested"] = p
    p, plans = split_conditions(p)
    trace["split-conditions"] = p
    gdp = build_disjunctions(p, plans)
    return Lowered(program, p, tuple(plans), gdp, trace)
