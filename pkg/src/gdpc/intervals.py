"""Interval bound propagation over expression trees.

Computes a guaranteed enclosure [lo, hi] of an expression over a variable box
using standard interval arithmetic.  The enclosure is used to derive big-M
constants automatically, to prune dominated comparisons when synthesizing
else-branch conditions, and to warn when an always-evaluated expression can
leave its target's bounds.

Conventions:
  * division by an interval containing zero yields (-inf, +inf);
  * partial domain violations are clipped to the function's domain
    (sqrt([-1, 4]) = [0, 2]); a violation over the entire interval raises
    E_DOMAIN.
"""

from __future__ import annotations

import math
from typing import Mapping

from .errors import err
from .ir import BinOp, Call, Const, Expr, Neg, VarRef

INF = math.inf

Interval = tuple[float, float]


def _mul(a: Interval, b: Interval) -> Interval:
    candidates = []
    for x in a:
        for y in b:
            if (x == 0.0 and math.isinf(y)) or (y == 0.0 and math.isinf(x)):
                candidates.append(0.0)  # 0 * inf bounds a degenerate factor
            else:
                candidates.append(x * y)
    return (min(candidates), max(candidates))


def _div(a: Interval, b: Interval) -> Interval:
    if b[0] <= 0.0 <= b[1]:
        return (-INF, INF)
    return _mul(a, (1.0 / b[1], 1.0 / b[0]))


def _pow(base: Interval, p: float) -> Interval:
    lo, hi = base
    if p == 0.0:
        return (1.0, 1.0)
    if p == int(p):
        n = int(p)
        if n < 0:
            return _div((1.0, 1.0), _pow(base, float(-n)))
        if n % 2 == 1:
            return (lo ** n, hi ** n)
        top = max(lo ** n, hi ** n)
        if lo <= 0.0 <= hi:
            return (0.0, top)
        return (min(lo ** n, hi ** n), top)
    # Fractional exponent: domain is the nonnegative reals.
    if hi < 0.0:
        raise err("E_DOMAIN", f"power {p} of a wholly negative interval")
    lo = max(lo, 0.0)
    if p < 0.0:
        return _div((1.0, 1.0), _pow((lo, hi), -p))
    return (lo ** p, hi ** p)


def _sin_cos(a: Interval, phase: float) -> Interval:
    # cos(x) = sin(x + pi/2); extrema of sin occur at pi/2 + k*pi.
    lo, hi = a[0] + phase, a[1] + phase
    if hi - lo >= 2.0 * math.pi or math.isinf(lo) or math.isinf(hi):
        return (-1.0, 1.0)
    values = [math.sin(lo), math.sin(hi)]
    k = math.ceil((lo - math.pi / 2.0) / math.pi)
    crit = math.pi / 2.0 + k * math.pi
    while crit <= hi:
        values.append(math.sin(crit))
        crit += math.pi
    return (min(values), max(values))


def interval_bounds(e: Expr, bounds: Mapping[str, Interval]) -> Interval:
    """Return an enclosure of ``e`` over the box ``bounds``.

    Every variable referenced by ``e`` must have an entry in ``bounds``.
    """
    if isinstance(e, Const):
        return (e.value, e.value)
    if isinstance(e, VarRef):
        lo, hi = bounds[e.name]
        return (float(lo), float(hi))
    if isinstance(e, Neg):
        lo, hi = interval_bounds(e.arg, bounds)
        return (-hi, -lo)
    if isinstance(e, BinOp):
        a = interval_bounds(e.lhs, bounds)
        if e.op == "^":
            return _pow(a, e.rhs.value)  # type: ignore[union-attr]
        b = interval_bounds(e.rhs, bounds)
        if e.op == "+":
            return (a[0] + b[0], a[1] + b[1])
        if e.op == "-":
            return (a[0] - b[1], a[1] - b[0])
        if e.op == "*":
            return _mul(a, b)
        return _div(a, b)
    if isinstance(e, Call):
        a = interval_bounds(e.args[0], bounds)
        if e.fn == "exp":
            return (math.exp(a[0]) if a[0] > -INF else 0.0,
                    math.exp(a[1]) if a[1] < INF else INF)
        if e.fn == "log":
            if a[1] <= 0.0:
                raise err("E_DOMAIN", "log of a wholly nonpositive interval")
            lo = math.log(a[0]) if a[0] > 0.0 else -INF
            return (lo, math.log(a[1]) if a[1] < INF else INF)
        if e.fn == "sqrt":
            if a[1] < 0.0:
                raise err("E_DOMAIN", "sqrt of a wholly negative interval")
            return (math.sqrt(max(a[0], 0.0)), math.sqrt(a[1]) if a[1] < INF else INF)
        if e.fn == "sin":
            return _sin_cos(a, 0.0)
        if e.fn == "cos":
            return _sin_cos(a, math.pi / 2.0)
        if e.fn == "abs":
            if a[0] >= 0.0:
                return a
            if a[1] <= 0.0:
                return (-a[1], -a[0])
            return (0.0, max(-a[0], a[1]))
    raise TypeError(f"unknown expression node {e!r}")
