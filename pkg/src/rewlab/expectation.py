"""Symbolic expectations: maps from program states to extended reals.

An expectation is an `lang.Expr` read as a function of the state. This module
evaluates them (exactly wherever no scaled exponential is involved),
substitutes expressions for variables, simplifies, and decides the pointwise
order on finite state grids.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Optional

from .extreal import ExtReal, ZERO, ONE, gpow, exp_scaled, parse_extreal
from .lang import (
    Add, And, BExpr, BoolLit, Cmp, Const, Div, ExpScaled, Expr, GPow, Iverson,
    Max, Min, Monus, Mul, Not, Or, Param, PowN, State, Var, const,
)


class EvalError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Evaluation (compiled to nested closures; hot path of the whole toolkit)
# ---------------------------------------------------------------------------

_compiled: dict[int, tuple[Expr, Callable[[State], ExtReal]]] = {}
_compiled_b: dict[int, tuple[BExpr, Callable[[State], bool]]] = {}


def compile_expr(e: Expr) -> Callable[[State], ExtReal]:
    hit = _compiled.get(id(e))
    if hit is not None and hit[0] is e:
        return hit[1]
    fn = _build(e)
    _compiled[id(e)] = (e, fn)
    return fn


def _build(e: Expr) -> Callable[[State], ExtReal]:
    if isinstance(e, Const):
        v = e.value
        return lambda s: v
    if isinstance(e, (Var, Param)):
        name = e.name
        return lambda s: s.get(name)
    if isinstance(e, Add):
        f, g = _build(e.left), _build(e.right)
        return lambda s: f(s) + g(s)
    if isinstance(e, Monus):
        f, g = _build(e.left), _build(e.right)
        return lambda s: f(s) - g(s)
    if isinstance(e, Mul):
        f, g = _build(e.left), _build(e.right)
        return lambda s: f(s) * g(s)
    if isinstance(e, Div):
        f, g = _build(e.left), _build(e.right)

        def div(s):
            den = g(s)
            if den.is_zero:
                raise EvalError("division by zero")
            return f(s) / den

        return div
    if isinstance(e, PowN):
        f, k = _build(e.base), e.exponent
        return lambda s: f(s) ** k
    if isinstance(e, GPow):
        f, g = _build(e.base), _build(e.exponent)
        return lambda s: gpow(f(s), g(s))
    if isinstance(e, Min):
        f, g = _build(e.left), _build(e.right)
        return lambda s: min(f(s), g(s))
    if isinstance(e, Max):
        f, g = _build(e.left), _build(e.right)
        return lambda s: max(f(s), g(s))
    if isinstance(e, Iverson):
        c = compile_bexpr(e.cond)
        return lambda s: ONE if c(s) else ZERO
    if isinstance(e, ExpScaled):
        f, g = _build(e.scale), _build(e.arg)
        return lambda s: exp_scaled(f(s), g(s))
    raise TypeError("unknown expression node %r" % (e,))


def compile_bexpr(b: BExpr) -> Callable[[State], bool]:
    hit = _compiled_b.get(id(b))
    if hit is not None and hit[0] is b:
        return hit[1]
    fn = _build_b(b)
    _compiled_b[id(b)] = (b, fn)
    return fn


def _build_b(b: BExpr) -> Callable[[State], bool]:
    if isinstance(b, BoolLit):
        v = b.value
        return lambda s: v
    if isinstance(b, Cmp):
        f, g = _build(b.left), _build(b.right)
        op = b.op
        if op == "=":
            return lambda s: f(s) == g(s)
        if op == "!=":
            return lambda s: f(s) != g(s)
        if op == "<":
            return lambda s: f(s) < g(s)
        if op == "<=":
            return lambda s: f(s) <= g(s)
        if op == ">":
            return lambda s: f(s) > g(s)
        if op == ">=":
            return lambda s: f(s) >= g(s)
        raise TypeError("unknown comparison %r" % op)
    if isinstance(b, And):
        f, g = _build_b(b.left), _build_b(b.right)
        return lambda s: f(s) and g(s)
    if isinstance(b, Or):
        f, g = _build_b(b.left), _build_b(b.right)
        return lambda s: f(s) or g(s)
    if isinstance(b, Not):
        f = _build_b(b.arg)
        return lambda s: not f(s)
    raise TypeError("unknown boolean node %r" % (b,))


def evaluate(e: Expr, state: State) -> ExtReal:
    return compile_expr(e)(state)


def evaluate_bool(b: BExpr, state: State) -> bool:
    return compile_bexpr(b)(state)


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------


def substitute(e: Expr, var: str, replacement: Expr) -> Expr:
    """X[var/replacement]; evaluating the result at s equals X at s[var -> a(s)]."""
    if isinstance(e, Var):
        return replacement if e.name == var else e
    if isinstance(e, (Const, Param)):
        return e
    if isinstance(e, Add):
        return Add(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Monus):
        return Monus(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Mul):
        return Mul(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Div):
        return Div(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, PowN):
        return PowN(substitute(e.base, var, replacement), e.exponent)
    if isinstance(e, GPow):
        return GPow(substitute(e.base, var, replacement), substitute(e.exponent, var, replacement))
    if isinstance(e, Min):
        return Min(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Max):
        return Max(substitute(e.left, var, replacement), substitute(e.right, var, replacement))
    if isinstance(e, Iverson):
        return Iverson(substitute_bool(e.cond, var, replacement))
    if isinstance(e, ExpScaled):
        return ExpScaled(substitute(e.scale, var, replacement), substitute(e.arg, var, replacement))
    raise TypeError("unknown expression node %r" % (e,))


def substitute_bool(b: BExpr, var: str, replacement: Expr) -> BExpr:
    if isinstance(b, BoolLit):
        return b
    if isinstance(b, Cmp):
        return Cmp(b.op, substitute(b.left, var, replacement), substitute(b.right, var, replacement))
    if isinstance(b, And):
        return And(substitute_bool(b.left, var, replacement), substitute_bool(b.right, var, replacement))
    if isinstance(b, Or):
        return Or(substitute_bool(b.left, var, replacement), substitute_bool(b.right, var, replacement))
    if isinstance(b, Not):
        return Not(substitute_bool(b.arg, var, replacement))
    raise TypeError("unknown boolean node %r" % (b,))


def contains_float(e: Expr) -> bool:
    """True if evaluating e can produce float-tainted values."""
    if isinstance(e, ExpScaled):
        return True
    if isinstance(e, Const):
        return not e.value.is_exact
    if isinstance(e, (Var, Param)):
        return False
    if isinstance(e, (Add, Monus, Mul, Div, Min, Max)):
        return contains_float(e.left) or contains_float(e.right)
    if isinstance(e, PowN):
        return contains_float(e.base)
    if isinstance(e, GPow):
        return contains_float(e.base) or contains_float(e.exponent)
    if isinstance(e, Iverson):
        return False
    raise TypeError("unknown expression node %r" % (e,))


# ---------------------------------------------------------------------------
# Simplification
# ---------------------------------------------------------------------------
#
# Best-effort, node-count non-increasing rewriting: constant folding, Iverson
# algebra, annihilation/identity laws, and polynomial folding of monus
# differences whose result has non-negative coefficients. Two Iverson rules
# assume integer-valued operands ([x+1 >= N] - [x >= N] = [x+1 = N] and
# ((x+1) - N) - (x - N) = [x >= N]); they are only applied when the compared
# expressions differ by the constant polynomial 1, which in emitted programs
# happens for natural-valued counters only. Grid evaluation, not simplify,
# remains the ground truth for every check.

_POLY_NODE_LIMIT = 160


def node_count(e) -> int:
    if isinstance(e, (Const, Var, Param, BoolLit)):
        return 1
    if isinstance(e, (Add, Monus, Mul, Div, Min, Max, And, Or, Cmp)):
        return 1 + node_count(e.left) + node_count(e.right)
    if isinstance(e, GPow):
        return 1 + node_count(e.base) + node_count(e.exponent)
    if isinstance(e, ExpScaled):
        return 1 + node_count(e.scale) + node_count(e.arg)
    if isinstance(e, PowN):
        return 1 + node_count(e.base)
    if isinstance(e, Iverson):
        return 1 + node_count(e.cond)
    if isinstance(e, Not):
        return 1 + node_count(e.arg)
    raise TypeError("unknown node %r" % (e,))


# A polynomial is a dict: monomial -> Fraction coefficient, where a monomial
# is a sorted tuple of (name, power) pairs. Only exact, infinity-free
# expressions built from +, *, ^k and constants normalize.


def _poly(e: Expr) -> Optional[dict]:
    if isinstance(e, Const):
        if not e.value.is_exact or e.value.is_infinite:
            return None
        return {(): e.value.as_fraction()} if e.value.as_fraction() else {}
    if isinstance(e, (Var, Param)):
        key = (e.name, isinstance(e, Param))
        return {((key, 1),): Fraction(1)}
    if isinstance(e, Add):
        a, b = _poly(e.left), _poly(e.right)
        if a is None or b is None:
            return None
        for mono, c in b.items():
            a[mono] = a.get(mono, Fraction(0)) + c
            if not a[mono]:
                del a[mono]
        return a
    if isinstance(e, Mul):
        a, b = _poly(e.left), _poly(e.right)
        if a is None or b is None or len(a) * len(b) > 64:
            return None
        return _poly_mul(a, b)
    if isinstance(e, PowN):
        base = _poly(e.base)
        if base is None or e.exponent > 8:
            return None
        out = {(): Fraction(1)}
        for _ in range(e.exponent):
            out = _poly_mul(out, base)
            if len(out) > 64:
                return None
        return out
    return None


def _poly_mul(a: dict, b: dict) -> dict:
    out: dict = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            powers: dict[str, int] = {}
            for name, p in m1 + m2:
                powers[name] = powers.get(name, 0) + p
            mono = tuple(sorted(powers.items()))
            c = out.get(mono, Fraction(0)) + c1 * c2
            if c:
                out[mono] = c
            elif mono in out:
                del out[mono]
    return out


def _poly_to_expr(p: dict) -> Expr:
    if not p:
        return const(0)
    terms = []
    degree = lambda mono: sum(power for _, power in mono)
    for mono, coeff in sorted(p.items(), key=lambda kv: (-degree(kv[0]), kv[0])):
        factors: list[Expr] = []
        if coeff != 1 or not mono:
            factors.append(const(ExtReal(coeff)))
        for (name, is_param), power in mono:
            atom: Expr = Param(name) if is_param else Var(name)
            if power > 1:
                atom = PowN(atom, power)
            factors.append(atom)
        term = factors[0]
        for f in factors[1:]:
            term = Mul(term, f)
        terms.append(term)
    out = terms[0]
    for t in terms[1:]:
        out = Add(out, t)
    return out


def _poly_sub(a: Optional[dict], b: Optional[dict]) -> Optional[dict]:
    if a is None or b is None:
        return None
    out = dict(a)
    for mono, c in b.items():
        out[mono] = out.get(mono, Fraction(0)) - c
        if not out[mono]:
            del out[mono]
    return out


def _is_const(e: Expr, v) -> bool:
    return isinstance(e, Const) and e.value == ExtReal(v)


def simplify(e: Expr) -> Expr:
    """Pointwise-equal simplification; never increases the node count."""
    out = _simp(e)
    return out if node_count(out) <= node_count(e) else e


def _simp(e: Expr) -> Expr:
    if isinstance(e, (Const, Var, Param)):
        return e
    if isinstance(e, Add):
        l, r = _simp(e.left), _simp(e.right)
        if _is_const(l, 0):
            return r
        if _is_const(r, 0):
            return l
        if isinstance(l, Const) and isinstance(r, Const):
            return Const(l.value + r.value)
        return _try_poly(Add(l, r))
    if isinstance(e, Monus):
        return _simp_monus(_simp(e.left), _simp(e.right))
    if isinstance(e, Mul):
        l, r = _simp(e.left), _simp(e.right)
        if _is_const(l, 0) or _is_const(r, 0):
            return const(0)
        if _is_const(l, 1):
            return r
        if _is_const(r, 1):
            return l
        if isinstance(l, Const) and isinstance(r, Const):
            return Const(l.value * r.value)
        if isinstance(l, Iverson) and isinstance(r, Iverson):
            if l.cond == r.cond:
                return l
            if l.cond == Not(r.cond) or Not(l.cond) == r.cond:
                return const(0)
            return Iverson(And(l.cond, r.cond))
        return _try_poly(Mul(l, r))
    if isinstance(e, Div):
        l, r = _simp(e.left), _simp(e.right)
        if _is_const(r, 1):
            return l
        if isinstance(l, Const) and isinstance(r, Const) and not r.value.is_zero:
            return Const(l.value / r.value)
        return Div(l, r)
    if isinstance(e, PowN):
        base = _simp(e.base)
        if e.exponent == 0:
            return const(1)
        if e.exponent == 1:
            return base
        if isinstance(base, Const):
            return Const(base.value**e.exponent)
        return PowN(base, e.exponent)
    if isinstance(e, GPow):
        base, exponent = _simp(e.base), _simp(e.exponent)
        if _is_const(exponent, 0) or _is_const(base, 1):
            return const(1)
        if isinstance(base, Const) and isinstance(exponent, Const):
            return Const(gpow(base.value, exponent.value))
        return GPow(base, exponent)
    if isinstance(e, Min):
        l, r = _simp(e.left), _simp(e.right)
        if isinstance(l, Const) and isinstance(r, Const):
            return Const(min(l.value, r.value))
        if l == r:
            return l
        return Min(l, r)
    if isinstance(e, Max):
        l, r = _simp(e.left), _simp(e.right)
        if isinstance(l, Const) and isinstance(r, Const):
            return Const(max(l.value, r.value))
        if l == r:
            return l
        if _is_const(l, 0):
            return r
        if _is_const(r, 0):
            return l
        return Max(l, r)
    if isinstance(e, Iverson):
        c = _simp_bool(e.cond)
        if isinstance(c, BoolLit):
            return const(1 if c.value else 0)
        return Iverson(c)
    if isinstance(e, ExpScaled):
        scale, arg = _simp(e.scale), _simp(e.arg)
        if _is_const(scale, 0) or _is_const(arg, 0):
            return const(1)
        if isinstance(scale, Const) and isinstance(arg, Const):
            return Const(exp_scaled(scale.value, arg.value))
        return ExpScaled(scale, arg)
    raise TypeError("unknown expression node %r" % (e,))


def _simp_monus(l: Expr, r: Expr) -> Expr:
    if _is_const(r, 0):
        return l
    if _is_const(l, 0):
        return l  # 0 - e = 0 on the non-negative domain
    if isinstance(l, Const) and isinstance(r, Const):
        return Const(l.value - r.value)
    # [A >= N] - [B >= N]  ->  [A = N]   when A - B == 1 (integer reading)
    if (
        isinstance(l, Iverson)
        and isinstance(r, Iverson)
        and isinstance(l.cond, Cmp)
        and isinstance(r.cond, Cmp)
        and l.cond.op == ">="
        and r.cond.op == ">="
        and l.cond.right == r.cond.right
    ):
        diff = _poly_sub(_poly(l.cond.left), _poly(r.cond.left))
        if diff == {(): Fraction(1)}:
            return Iverson(Cmp("=", l.cond.left, l.cond.right))
    # (A - N) - (B - N)  ->  [B >= N]    when A - B == 1 (integer reading)
    if (
        isinstance(l, Monus)
        and isinstance(r, Monus)
        and l.right == r.right
    ):
        diff = _poly_sub(_poly(l.left), _poly(r.left))
        if diff == {(): Fraction(1)}:
            return Iverson(Cmp(">=", r.left, r.right))
    # Polynomial difference with non-negative coefficients folds exactly.
    # Guard: every name of the operands must survive in the difference,
    # otherwise the fold would disagree at infinite-valued states
    # (inf - inf = inf, while e.g. (x+1) - x would fold to 1).
    pl, pr = _poly(l), _poly(r)
    diff = _poly_sub(pl, pr)
    if diff is not None and all(c >= 0 for c in diff.values()):
        names = lambda p: {name for mono in p for name, _ in mono}
        if names(pl) | names(pr) <= names(diff):
            folded = _poly_to_expr(diff)
            if node_count(folded) <= 1 + node_count(l) + node_count(r):
                return folded
    return Monus(l, r)


def _try_poly(e: Expr) -> Expr:
    if node_count(e) > _POLY_NODE_LIMIT:
        return e
    p = _poly(e)
    if p is None:
        return e
    folded = _poly_to_expr(p)
    return folded if node_count(folded) < node_count(e) else e


def _simp_bool(b: BExpr) -> BExpr:
    if isinstance(b, BoolLit):
        return b
    if isinstance(b, Cmp):
        l, r = _simp(b.left), _simp(b.right)
        if isinstance(l, Const) and isinstance(r, Const):
            return BoolLit(evaluate_bool(Cmp(b.op, l, r), State({})))
        return Cmp(b.op, l, r)
    if isinstance(b, And):
        l, r = _simp_bool(b.left), _simp_bool(b.right)
        if isinstance(l, BoolLit):
            return r if l.value else l
        if isinstance(r, BoolLit):
            return l if r.value else r
        return And(l, r)
    if isinstance(b, Or):
        l, r = _simp_bool(b.left), _simp_bool(b.right)
        if isinstance(l, BoolLit):
            return l if l.value else r
        if isinstance(r, BoolLit):
            return r if r.value else l
        return Or(l, r)
    if isinstance(b, Not):
        arg = _simp_bool(b.arg)
        if isinstance(arg, BoolLit):
            return BoolLit(not arg.value)
        if isinstance(arg, Not):
            return arg.arg
        return Not(arg)
    raise TypeError("unknown boolean node %r" % (b,))


# ---------------------------------------------------------------------------
# State grids and the pointwise order
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StateGrid:
    """Finite per-variable value lists plus fixed parameter bindings."""

    variables: tuple[tuple[str, tuple[ExtReal, ...]], ...]
    params: tuple[tuple[str, ExtReal], ...] = ()

    @classmethod
    def build(cls, variables: dict[str, Iterable], params: dict[str, ExtReal] | None = None) -> "StateGrid":
        vars_norm = tuple(
            (name, tuple(v if isinstance(v, ExtReal) else ExtReal(v) for v in values))
            for name, values in variables.items()
        )
        params_norm = tuple(
            (name, v if isinstance(v, ExtReal) else ExtReal(v))
            for name, v in (params or {}).items()
        )
        return cls(vars_norm, params_norm)

    def states(self) -> Iterator[State]:
        names = [name for name, _ in self.variables]
        base = dict(self.params)
        for combo in itertools.product(*(values for _, values in self.variables)):
            m = dict(base)
            m.update(zip(names, combo))
            yield State(m)

    def describe(self) -> str:
        parts = []
        for name, values in self.variables:
            parts.append("%s in {%s}" % (name, ", ".join(str(v) for v in values))
                         if len(values) <= 6 else
                         "%s in {%s, ..., %s} (%d values)"
                         % (name, values[0], values[-1], len(values)))
        for name, v in self.params:
            parts.append("%s = %s" % (name, v))
        return "; ".join(parts) or "(empty grid)"


def parse_grid(spec: str, params: dict[str, ExtReal] | None = None) -> StateGrid:
    """Parse 'x=0..10,done=0..1,tau={0,1/2,1}' into a StateGrid."""
    variables: dict[str, list[ExtReal]] = {}
    for chunk in _split_top(spec):
        if not chunk:
            continue
        name, _, rhs = chunk.partition("=")
        name, rhs = name.strip(), rhs.strip()
        if not name or not rhs:
            raise EvalError("bad grid entry %r" % chunk)
        if rhs.startswith("{") and rhs.endswith("}"):
            variables[name] = [parse_extreal(v) for v in rhs[1:-1].split(",")]
        elif ".." in rhs:
            lo, hi = rhs.split("..", 1)
            lo_i, hi_i = int(lo), int(hi)
            variables[name] = [ExtReal(i) for i in range(lo_i, hi_i + 1)]
        else:
            variables[name] = [parse_extreal(rhs)]
    return StateGrid.build(variables, params)


def _split_top(spec: str) -> list[str]:
    out, depth, start = [], 0, 0
    for i, ch in enumerate(spec):
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
        elif ch == "," and depth == 0:
            out.append(spec[start:i].strip())
            start = i + 1
    out.append(spec[start:].strip())
    return out


def parse_bindings(spec: str) -> dict[str, ExtReal]:
    """Parse 'N=10,p=1/10' into a binding map."""
    out: dict[str, ExtReal] = {}
    for chunk in spec.split(","):
        if not chunk.strip():
            continue
        name, _, rhs = chunk.partition("=")
        if not rhs:
            raise EvalError("bad binding %r" % chunk)
        out[name.strip()] = parse_extreal(rhs)
    return out


DEFAULT_ABS_TOL = 1e-9
DEFAULT_REL_TOL = 1e-9


@dataclass
class GridCheckResult:
    passed: bool
    violations: list[tuple[State, ExtReal, ExtReal]]
    states_checked: int
    grid: str
    exact: bool
    all_equal: bool

    def __bool__(self):
        return self.passed


def leq_on_grid(
    lhs: Expr,
    rhs: Expr,
    grid: StateGrid,
    abs_tol: float = DEFAULT_ABS_TOL,
    rel_tol: float = DEFAULT_REL_TOL,
    max_violations: int = 20,
) -> GridCheckResult:
    """Check lhs <= rhs pointwise on the grid.

    Comparison is exact unless either side contains a scaled exponential or a
    float literal, in which case the looser of the absolute/relative
    tolerances applies. Violations are reported in grid order.
    """
    exact = not (contains_float(lhs) or contains_float(rhs))
    f, g = compile_expr(lhs), compile_expr(rhs)
    violations = []
    checked = 0
    all_equal = True
    for state in grid.states():
        a, b = f(state), g(state)
        checked += 1
        if a != b:
            all_equal = False
        if a <= b:
            continue
        if not exact and not b.is_infinite:
            slack = max(abs_tol, rel_tol * abs(float(b)))
            if float(a) <= float(b) + slack:
                continue
        if len(violations) < max_violations:
            violations.append((state, a, b))
    return GridCheckResult(
        passed=not violations,
        violations=violations,
        states_checked=checked,
        grid=grid.describe(),
        exact=exact,
        all_equal=all_equal and checked > 0,
    )
