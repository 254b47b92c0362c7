"""Frontend for the ``.gdp`` source language.

Grammar (comments run from ``#`` to end of line)::

    program   := (decl | param | stmt | disagg)*
    decl      := "var" IDENT "in" "[" NUM "," NUM "]" ";"
    param     := "param" IDENT "=" NUM ";"
    stmt      := assign | ifblk
    assign    := IDENT "=" expr ";"
    ifblk     := "if" cond "then" stmt*
                 ("else" "if" cond "then" stmt*)*
                 ("else" stmt*)? "end"
    disagg    := "disaggregate" IDENT "in" IDENT ";"
    cond      := or-combination of and-combinations of
                 ("not" cond | "(" cond ")" | expr REL expr),  REL in <= >= < >
    expr      := + - * / ^ arithmetic, exp|log|sqrt|sin|cos|abs calls, parens

Strict ``<`` and ``>`` are accepted and coerced to their closed forms with a
warning; the downstream reformulations cannot express strict inequalities.
Parameters stay symbolic in the AST and are resolved to numbers at lowering.

Block ids ``b1, b2, ...`` are assigned in source pre-order and are stable
across normalization passes; the ``disaggregate v in k;`` override names a
disjunction id of the lowered model (``k1, k2, ...`` in final order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .errors import err
from .intervals import interval_bounds
from .ir import (
    BinOp, Call, Const, Expr, Neg, Variable, VarRef, expr_vars, render,
)

KEYWORDS = {"var", "param", "in", "if", "then", "else", "end", "and", "or",
            "not", "disaggregate", "inf"}

_FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos", "abs")


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CmpAtom:
    """Atomic testing comparison ``lhs REL rhs`` with REL in {<=, >=}."""

    lhs: Expr
    rel: str
    rhs: Expr


@dataclass(frozen=True, slots=True)
class CondNot:
    arg: "Cond"


@dataclass(frozen=True, slots=True)
class CondAnd:
    args: tuple["Cond", ...]


@dataclass(frozen=True, slots=True)
class CondOr:
    args: tuple["Cond", ...]


Cond = CmpAtom | CondNot | CondAnd | CondOr


@dataclass(frozen=True, slots=True)
class Assign:
    target: str
    rhs: Expr
    line: int = 0
    col: int = 0


@dataclass(frozen=True, slots=True)
class Branch:
    cond: Cond
    body: tuple["Statement", ...]


@dataclass(frozen=True, slots=True)
class IfBlock:
    branches: tuple[Branch, ...]
    else_body: tuple["Statement", ...] | None
    block_id: str
    line: int = 0
    col: int = 0

    @property
    def has_else(self) -> bool:
        return self.else_body is not None


Statement = Assign | IfBlock


@dataclass(frozen=True, slots=True)
class Program:
    decls: tuple[Variable, ...]
    params: dict[str, float]
    statements: tuple[Statement, ...]
    disagg_overrides: tuple[tuple[str, str], ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def var_map(self) -> dict[str, Variable]:
        return {v.name: v for v in self.decls}

    def assigned_vars(self) -> set[str]:
        out: set[str] = set()

        def visit(stmts: Iterable[Statement]) -> None:
            for s in stmts:
                if isinstance(s, Assign):
                    out.add(s.target)
                else:
                    for br in s.branches:
                        visit(br.body)
                    if s.else_body:
                        visit(s.else_body)

        visit(self.statements)
        return out

    def input_vars(self) -> list[str]:
        """Declared variables never assigned anywhere, in declaration order."""
        assigned = self.assigned_vars()
        return [v.name for v in self.decls if v.name not in assigned]


def cond_atoms(c: Cond) -> list[CmpAtom]:
    if isinstance(c, CmpAtom):
        return [c]
    if isinstance(c, CondNot):
        return cond_atoms(c.arg)
    out: list[CmpAtom] = []
    for a in c.args:
        out.extend(cond_atoms(a))
    return out


def cond_vars(c: Cond) -> set[str]:
    out: set[str] = set()
    for atom in cond_atoms(c):
        out |= expr_vars(atom.lhs) | expr_vars(atom.rhs)
    return out


def eval_cond(c: Cond, binding, eval_expr_fn) -> bool:
    """Closed-comparison evaluation of a condition at a point."""
    if isinstance(c, CmpAtom):
        lhs = eval_expr_fn(c.lhs, binding)
        rhs = eval_expr_fn(c.rhs, binding)
        return lhs <= rhs if c.rel == "<=" else lhs >= rhs
    if isinstance(c, CondNot):
        return not eval_cond(c.arg, binding, eval_expr_fn)
    if isinstance(c, CondAnd):
        return all(eval_cond(a, binding, eval_expr_fn) for a in c.args)
    return any(eval_cond(a, binding, eval_expr_fn) for a in c.args)


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # IDENT, NUMBER, SYMBOL, EOF
    text: str
    line: int
    col: int


_SYMBOLS = ("<=", ">=", "<", ">", "=", ";", ",", "[", "]", "(", ")",
            "+", "-", "*", "/", "^")


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col, i = 1, 1, 0
    n = len(text)
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
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(Token("NUMBER", text[i:j], line, col))
            col += j - i
            i = j
            continue
        two = text[i:i + 2]
        if two in ("<=", ">="):
            tokens.append(Token("SYMBOL", two, line, col))
            i += 2
            col += 2
            continue
        if ch in "<>=;,[]()+-*/^":
            tokens.append(Token("SYMBOL", ch, line, col))
            i += 1
            col += 1
            continue
        raise err("E_SYNTAX", f"unexpected character {ch!r}", line=line, col=col)
    tokens.append(Token("EOF", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.decls: list[Variable] = []
        self.params: dict[str, float] = {}
        self.known: set[str] = set()
        self.warnings: list[str] = []
        self.overrides: list[tuple[str, str]] = []
        self.block_counter = 0

    # -- token helpers ------------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "EOF":
            raise err("E_SYNTAX", f"expected {text!r}, found {tok.text or 'end of input'!r}",
                      line=tok.line, col=tok.col)
        return self.next()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.text in KEYWORDS:
            raise err("E_SYNTAX", f"expected identifier, found {tok.text or 'end of input'!r}",
                      line=tok.line, col=tok.col)
        return self.next()

    # -- program ------------------------------------------------------------

    def parse_program(self) -> Program:
        statements: list[Statement] = []
        while self.peek().kind != "EOF":
            tok = self.peek()
            if tok.text == "var":
                self.parse_decl()
            elif tok.text == "param":
                self.parse_param()
            elif tok.text == "disaggregate":
                self.parse_disagg()
            else:
                statements.append(self.parse_statement())
        return Program(tuple(self.decls), dict(self.params), tuple(statements),
                       tuple(self.overrides), tuple(self.warnings))

    def parse_decl(self) -> None:
        self.expect("var")
        name_tok = self.expect_ident()
        if name_tok.text in self.known:
            raise err("E_REDECLARED", f"{name_tok.text!r} is already declared",
                      line=name_tok.line, col=name_tok.col)
        self.expect("in")
        self.expect("[")
        lb = self.parse_signed_number()
        self.expect(",")
        ub = self.parse_signed_number()
        self.expect("]")
        self.expect(";")
        if lb > ub:
            raise err("E_SYNTAX", f"empty bound interval for {name_tok.text!r}",
                      line=name_tok.line, col=name_tok.col)
        self.decls.append(Variable(name_tok.text, lb, ub))
        self.known.add(name_tok.text)

    def parse_param(self) -> None:
        self.expect("param")
        name_tok = self.expect_ident()
        if name_tok.text in self.known:
            raise err("E_REDECLARED", f"{name_tok.text!r} is already declared",
                      line=name_tok.line, col=name_tok.col)
        self.expect("=")
        value = self.parse_signed_number()
        self.expect(";")
        self.params[name_tok.text] = value
        self.known.add(name_tok.text)

    def parse_disagg(self) -> None:
        self.expect("disaggregate")
        var_tok = self.expect_ident()
        self.check_declared_var(var_tok)
        self.expect("in")
        disj_tok = self.expect_ident()
        self.expect(";")
        self.overrides.append((var_tok.text, disj_tok.text))

    def parse_signed_number(self) -> float:
        sign = 1.0
        if self.peek().text == "-":
            self.next()
            sign = -1.0
        tok = self.peek()
        if tok.text == "inf":
            self.next()
            return sign * math.inf
        if tok.kind != "NUMBER":
            raise err("E_SYNTAX", f"expected number, found {tok.text!r}",
                      line=tok.line, col=tok.col)
        self.next()
        return sign * float(tok.text)

    def check_declared_var(self, tok: Token) -> None:
        if tok.text not in {v.name for v in self.decls}:
            raise err("E_UNDECLARED", f"unknown variable {tok.text!r}",
                      line=tok.line, col=tok.col)

    # -- statements ---------------------------------------------------------

    def parse_statement(self) -> Statement:
        tok = self.peek()
        if tok.text == "if":
            return self.parse_ifblock()
        if tok.kind == "IDENT" and tok.text not in KEYWORDS:
            name_tok = self.next()
            if name_tok.text in self.params:
                raise err("E_SYNTAX", f"cannot assign to parameter {name_tok.text!r}",
                          line=name_tok.line, col=name_tok.col)
            self.check_declared_var(name_tok)
            self.expect("=")
            rhs = self.parse_expr()
            self.expect(";")
            return Assign(name_tok.text, rhs, name_tok.line, name_tok.col)
        raise err("E_SYNTAX", f"expected statement, found {tok.text or 'end of input'!r}",
                  line=tok.line, col=tok.col)

    def parse_ifblock(self) -> IfBlock:
        start = self.expect("if")
        self.block_counter += 1
        block_id = f"b{self.block_counter}"
        branches: list[Branch] = []
        cond = self.parse_condition()
        self.expect("then")
        body = self.parse_branch_body()
        branches.append(Branch(cond, tuple(body)))
        else_body: tuple[Statement, ...] | None = None
        while self.peek().text == "else":
            self.next()
            if self.peek().text == "if":
                self.next()
                cond = self.parse_condition()
                self.expect("then")
                body = self.parse_branch_body()
                branches.append(Branch(cond, tuple(body)))
            else:
                else_body = tuple(self.parse_branch_body())
                break
        self.expect("end")
        return IfBlock(tuple(branches), else_body, block_id, start.line, start.col)

    def parse_branch_body(self) -> list[Statement]:
        body: list[Statement] = []
        while self.peek().text not in ("else", "end") and self.peek().kind != "EOF":
            body.append(self.parse_statement())
        return body

    # -- conditions ---------------------------------------------------------

    def parse_condition(self) -> Cond:
        terms = [self.parse_cond_and()]
        while self.peek().text == "or":
            self.next()
            terms.append(self.parse_cond_and())
        return terms[0] if len(terms) == 1 else CondOr(tuple(terms))

    def parse_cond_and(self) -> Cond:
        terms = [self.parse_cond_unary()]
        while self.peek().text == "and":
            self.next()
            terms.append(self.parse_cond_unary())
        return terms[0] if len(terms) == 1 else CondAnd(tuple(terms))

    def parse_cond_unary(self) -> Cond:
        if self.peek().text == "not":
            self.next()
            return CondNot(self.parse_cond_unary())
        if self.peek().text == "(":
            # A parenthesis may group a condition or start the left-hand
            # expression of a comparison; try the condition reading first.
            saved = self.pos
            saved_warnings = len(self.warnings)
            try:
                self.next()
                inner = self.parse_condition()
                self.expect(")")
                if self.peek().text in ("<=", ">=", "<", ">"):
                    raise err("E_SYNTAX", "comparison of a condition", line=0, col=0)
                return inner
            except Exception:
                self.pos = saved
                del self.warnings[saved_warnings:]
        return self.parse_comparison()

    def parse_comparison(self) -> CmpAtom:
        lhs = self.parse_expr()
        tok = self.peek()
        if tok.text not in ("<=", ">=", "<", ">"):
            raise err("E_SYNTAX", f"expected comparison operator, found {tok.text!r}",
                      line=tok.line, col=tok.col)
        self.next()
        rel = tok.text
        if rel == "<":
            self.warnings.append(
                f"line {tok.line}: strict '<' coerced to '<=' (closed comparisons only)")
            rel = "<="
        elif rel == ">":
            self.warnings.append(
                f"line {tok.line}: strict '>' coerced to '>=' (closed comparisons only)")
            rel = ">="
        rhs = self.parse_expr()
        return CmpAtom(lhs, rel, rhs)

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_unary()
        while self.peek().text in ("*", "/"):
            op = self.next().text
            node = BinOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> Expr:
        if self.peek().text == "-":
            self.next()
            return Neg(self.parse_unary())
        if self.peek().text == "+":
            self.next()
            return self.parse_unary()
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek().text == "^":
            tok = self.next()
            exponent = self.parse_unary()  # right-associative
            if isinstance(exponent, Neg) and isinstance(exponent.arg, Const):
                exponent = Const(-exponent.arg.value)
            if not isinstance(exponent, Const):
                raise err("E_SYNTAX", "exponent must be a numeric constant",
                          line=tok.line, col=tok.col)
            return BinOp("^", base, exponent)
        return base

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.text == "(":
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if tok.kind == "NUMBER":
            self.next()
            return Const(float(tok.text))
        if tok.kind == "IDENT" and tok.text in _FUNCTIONS:
            self.next()
            self.expect("(")
            args = [self.parse_expr()]
            while self.peek().text == ",":
                self.next()
                args.append(self.parse_expr())
            self.expect(")")
            return Call(tok.text, tuple(args))
        if tok.kind == "IDENT" and tok.text not in KEYWORDS:
            self.next()
            if tok.text not in self.known:
                raise err("E_UNDECLARED", f"unknown identifier {tok.text!r}",
                          line=tok.line, col=tok.col)
            return VarRef(tok.text)
        raise err("E_SYNTAX", f"expected expression, found {tok.text or 'end of input'!r}",
                  line=tok.line, col=tok.col)


def parse_program(text: str) -> Program:
    """Parse ``.gdp`` source into a program AST.

    Raises E_SYNTAX (with line/column), E_UNDECLARED, or E_REDECLARED.
    """
    return _Parser(tokenize(text)).parse_program()


def resolve_params(e: Expr, params: dict[str, float]) -> Expr:
    """Replace parameter references by their numeric values."""
    from .ir import substitute

    return substitute(e, {k: Const(v) for k, v in params.items()})


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Diagnostic:
    code: str
    subject: str
    message: str


def validate(program: Program) -> list[Diagnostic]:
    """Static checks that do not stop the pipeline.

    Reported: unbounded variables used inside conditional blocks (these become
    hard errors at lowering), dependent variables read before their first
    assignment, provably unreachable else branches, dead reassignments, and
    assignments whose right-hand side can leave the target's declared box.
    """
    diags: list[Diagnostic] = []
    var_map = program.var_map
    assigned = program.assigned_vars()

    # Unbounded variables inside if-blocks.
    conditional_vars: set[str] = set()

    def scan_blocks(stmts: Iterable[Statement]) -> None:
        for s in stmts:
            if isinstance(s, IfBlock):
                for br in s.branches:
                    conditional_vars.update(cond_vars(br.cond) - set(program.params))
                    for b in br.body:
                        if isinstance(b, Assign):
                            conditional_vars.add(b.target)
                            conditional_vars.update(expr_vars(b.rhs) - set(program.params))
                    scan_blocks(br.body)
                if s.else_body:
                    for b in s.else_body:
                        if isinstance(b, Assign):
                            conditional_vars.add(b.target)
                            conditional_vars.update(expr_vars(b.rhs) - set(program.params))
                    scan_blocks(s.else_body)

    scan_blocks(program.statements)
    for name in sorted(conditional_vars):
        v = var_map.get(name)
        if v is not None and not v.bounded:
            diags.append(Diagnostic("D_UNBOUNDED", name,
                                    f"unbounded variable {name!r} used in a conditional block"))

    # Dependent variables read before their first assignment (pre-order walk).
    seen_assign: set[str] = set()

    def reads_of(s: Statement) -> list[str]:
        if isinstance(s, Assign):
            return sorted(expr_vars(s.rhs) - set(program.params))
        out: set[str] = set()
        for br in s.branches:
            out |= cond_vars(br.cond)
        return sorted(out - set(program.params))

    flagged: set[str] = set()

    def walk_order(stmts: Iterable[Statement]) -> None:
        for s in stmts:
            for name in reads_of(s):
                if name in assigned and name not in seen_assign and name not in flagged:
                    flagged.add(name)
                    diags.append(Diagnostic(
                        "D_READ_BEFORE_ASSIGN", name,
                        f"dependent variable {name!r} read before any assignment"))
            if isinstance(s, Assign):
                seen_assign.add(s.target)
            else:
                for br in s.branches:
                    walk_order(br.body)
                if s.else_body:
                    walk_order(s.else_body)

    walk_order(program.statements)

    # Provably unreachable else branches (single-subject constant thresholds).
    def check_unreachable(s: Statement) -> None:
        if not isinstance(s, IfBlock):
            return
        for br in s.branches:
            for b in br.body:
                check_unreachable(b)
        if s.else_body:
            for b in s.else_body:
                check_unreachable(b)
        if not s.has_else:
            return
        subject: str | None = None
        window: list[float] | None = None
        for br in s.branches:
            if not isinstance(br.cond, CmpAtom):
                return
            atom = br.cond
            if not isinstance(atom.lhs, VarRef) or atom.lhs.name in program.params:
                return
            rhs = resolve_params(atom.rhs, program.params)
            if expr_vars(rhs):
                return
            from .ir import eval_expr
            threshold = eval_expr(rhs, {})
            if subject is None:
                subject = atom.lhs.name
                v = var_map.get(subject)
                if v is None:
                    return
                window = [v.lb, v.ub]
            elif atom.lhs.name != subject:
                return
            assert window is not None
            if atom.rel == ">=":  # complement: subject <= threshold
                window[1] = min(window[1], threshold)
            else:  # complement: subject >= threshold
                window[0] = max(window[0], threshold)
        if window is not None and window[0] > window[1]:
            diags.append(Diagnostic(
                "D_UNREACHABLE_ELSE", s.block_id,
                f"else branch of {s.block_id} is unreachable: branch conditions cover "
                f"the range of {subject!r}"))

    for s in program.statements:
        check_unreachable(s)

    # Dead reassignments at one scope level (write twice, no intervening read).
    def check_dead(stmts: Iterable[Statement]) -> None:
        last_write: dict[str, int] = {}
        read_since: set[str] = set()
        for idx, s in enumerate(stmts):
            for name in reads_of(s):
                read_since.add(name)
            if isinstance(s, Assign):
                if s.target in last_write and s.target not in read_since:
                    diags.append(Diagnostic(
                        "D_DEAD_ASSIGN", s.target,
                        f"{s.target!r} reassigned without an intervening read"))
                last_write[s.target] = idx
                read_since.discard(s.target)
            else:
                for br in s.branches:
                    check_dead(br.body)
                    for b in br.body:
                        if isinstance(b, Assign):
                            last_write[b.target] = idx
                            read_since.discard(b.target)
                if s.else_body:
                    check_dead(s.else_body)
                    for b in s.else_body:
                        if isinstance(b, Assign):
                            last_write[b.target] = idx
                            read_since.discard(b.target)

    check_dead(program.statements)

    # Assignments whose value range can escape the target's declared box.
    boxes = {v.name: (v.lb, v.ub) for v in program.decls}

    def check_escape(stmts: Iterable[Statement]) -> None:
        for s in stmts:
            if isinstance(s, Assign):
                rhs = resolve_params(s.rhs, program.params)
                if all(n in boxes for n in expr_vars(rhs)):
                    try:
                        lo, hi = interval_bounds(rhs, boxes)
                    except Exception:
                        continue
                    tlb, tub = boxes[s.target]
                    if lo < tlb or hi > tub:
                        diags.append(Diagnostic(
                            "D_BOUND_ESCAPE", s.target,
                            f"value of {s.target!r} may reach [{lo:g}, {hi:g}], outside "
                            f"its declared box [{tlb:g}, {tub:g}]"))
            else:
                for br in s.branches:
                    check_escape(br.body)
                if s.else_body:
                    check_escape(s.else_body)

    check_escape(program.statements)
    return diags


# ---------------------------------------------------------------------------
# Pretty-printer
# ---------------------------------------------------------------------------


def _render_cond(c: Cond, parent: int = 0) -> str:
    # precedence: or=1, and=2, not=3, atom=4
    if isinstance(c, CmpAtom):
        return f"{render(c.lhs)} {c.rel} {render(c.rhs)}"
    if isinstance(c, CondNot):
        return f"not {_render_cond(c.arg, 3)}"
    if isinstance(c, CondAnd):
        s = " and ".join(_render_cond(a, 2) for a in c.args)
        return f"({s})" if parent > 2 else s
    s = " or ".join(_render_cond(a, 1) for a in c.args)
    return f"({s})" if parent > 1 else s


def _num(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return render(Const(v)) if v >= 0 else f"-{render(Const(-v))}"


def pretty(program: Program) -> str:
    """Canonical source rendering; parsing it back yields the same AST."""
    lines: list[str] = []
    for v in program.decls:
        lines.append(f"var {v.name} in [{_num(v.lb)}, {_num(v.ub)}];")
    for name, value in program.params.items():
        lines.append(f"param {name} = {_num(value)};")

    def emit(stmts: Iterable[Statement], indent: int) -> None:
        pad = "  " * indent
        for s in stmts:
            if isinstance(s, Assign):
                lines.append(f"{pad}{s.target} = {render(s.rhs)};")
            else:
                for i, br in enumerate(s.branches):
                    head = "if" if i == 0 else "else if"
                    lines.append(f"{pad}{head} {_render_cond(br.cond)} then")
                    emit(br.body, indent + 1)
                if s.else_body is not None:
                    lines.append(f"{pad}else")
                    emit(s.else_body, indent + 1)
                lines.append(f"{pad}end")

    emit(program.statements, 0)
    for var, disj in program.disagg_overrides:
        lines.append(f"disaggregate {var} in {disj};")
    return "\n".join(lines) + "\n"
