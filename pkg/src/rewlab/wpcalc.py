"""Weakest pre-expectation calculus: symbolic wp for loop-free code, the
expected-runtime transformer as a cross-check, Kleene iteration of loop
functionals, and the Park-induction invariant checker on finite state grids.

Loops inside the symbolic transformer are handled only through user-supplied
invariants (upper-bound summaries); lower bounds come from the operational
semantics or from Kleene iterates. Verdicts are always relative to the grid
they were checked on.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .extreal import ExtReal, ZERO, ONE
from .lang import (
    Add, Assign, Expr, If, Iverson, Monus, Mul, Not, Prob,
    Program, Reward, Seq, Skip, State, Stmt, While, const,
)
from .expectation import (
    GridCheckResult, StateGrid, compile_bexpr, compile_expr,
    leq_on_grid, simplify, substitute,
)
from . import opsem
from .opsem import Bracket, MarkovChain, expected_reward


class LoopWithoutInvariantError(ValueError):
    pass


class MultiRewardError(ValueError):
    pass


@dataclass
class LoopObligation:
    """One Park-induction side condition: phi(I) <= I on the grid."""

    loop: While
    post: Expr
    phi: Expr
    invariant: Expr
    result: GridCheckResult


@dataclass
class CheckReport:
    verdict: str  # verified | violated | inconclusive
    counterexamples: list[tuple[State, ExtReal, ExtReal]]
    grid: str
    obligations: list[LoopObligation] = field(default_factory=list)
    fixed_point: Optional[bool] = None
    derived_bound: Optional[Expr] = None

    @property
    def verified(self) -> bool:
        return self.verdict == "verified"


# ---------------------------------------------------------------------------
# Symbolic wp (loop-free; loops via invariants in upper-bound mode)
# ---------------------------------------------------------------------------


def _reward_expr(s: Reward) -> Expr:
    if len(s.args) != 1:
        raise MultiRewardError(
            "symbolic wp handles single-reward statements; tuple rewards go "
            "through the operational semantics"
        )
    return s.args[0]


def wp_symbolic(s: Stmt, post: Expr) -> Expr:
    """Structural weakest pre-expectation of loop-free code."""
    if isinstance(s, Skip):
        return post
    if isinstance(s, Assign):
        return substitute(post, s.var, s.expr)
    if isinstance(s, Reward):
        return simplify(Add(_reward_expr(s), post))
    if isinstance(s, Seq):
        return wp_symbolic(s.first, wp_symbolic(s.second, post))
    if isinstance(s, Prob):
        left = wp_symbolic(s.left, post)
        right = wp_symbolic(s.right, post)
        return simplify(Add(Mul(s.prob, left), Mul(Monus(const(1), s.prob), right)))
    if isinstance(s, If):
        left = wp_symbolic(s.then, post)
        right = wp_symbolic(s.orelse, post)
        return simplify(Add(Mul(Iverson(s.cond), left), Mul(Iverson(Not(s.cond)), right)))
    if isinstance(s, While):
        raise LoopWithoutInvariantError(
            "loops have no structural wp; annotate with an invariant and use "
            "check_invariant / wp_upper, or evaluate numerically"
        )
    raise TypeError("unknown statement node %r" % (s,))


def loop_characteristic(loop: While, post: Expr, body_wp=wp_symbolic) -> Expr:
    """Phi_post(Y) = [b] * wp(body)(Y) + [not b] * post, applied at Y = I."""
    if loop.invariant is None:
        raise LoopWithoutInvariantError("loop carries no invariant annotation")
    inner = body_wp(loop.body, loop.invariant)
    return simplify(
        Add(Mul(Iverson(loop.cond), inner), Mul(Iverson(Not(loop.cond)), post))
    )


def wp_upper(s: Stmt, post: Expr, obligations: list[LoopObligation], grid: StateGrid) -> Expr:
    """Upper-bound wp: annotated loops are summarized by their invariants,
    discharging one Park obligation per loop (innermost first)."""
    if isinstance(s, While):
        if s.invariant is None:
            raise LoopWithoutInvariantError("loop carries no invariant annotation")
        body = lambda stmt, x: wp_upper(stmt, x, obligations, grid)
        phi = loop_characteristic(s, post, body_wp=body)
        result = leq_on_grid(phi, s.invariant, grid)
        obligations.append(LoopObligation(s, post, phi, s.invariant, result))
        return s.invariant
    if isinstance(s, Seq):
        return wp_upper(s.first, wp_upper(s.second, post, obligations, grid), obligations, grid)
    if isinstance(s, Prob):
        left = wp_upper(s.left, post, obligations, grid)
        right = wp_upper(s.right, post, obligations, grid)
        return simplify(Add(Mul(s.prob, left), Mul(Monus(const(1), s.prob), right)))
    if isinstance(s, If):
        left = wp_upper(s.then, post, obligations, grid)
        right = wp_upper(s.orelse, post, obligations, grid)
        return simplify(Add(Mul(Iverson(s.cond), left), Mul(Iverson(Not(s.cond)), right)))
    return wp_symbolic(s, post)


def check_invariant(loop: While, post: Expr, grid: StateGrid) -> CheckReport:
    """Park induction on a finite grid: phi_post(I) <= I there implies the
    loop's wp is bounded by I on the grid (verdict is grid-relative)."""
    obligations: list[LoopObligation] = []
    wp_upper(loop, post, obligations, grid)
    return _report_from_obligations(obligations, grid)


def check_program(program: Program, post: Expr, grid: StateGrid) -> CheckReport:
    """Check every annotated loop of a program; the derived bound is the
    invariant-summarized upper wp of the whole program."""
    obligations: list[LoopObligation] = []
    bound = wp_upper(program.body, post, obligations, grid)
    report = _report_from_obligations(obligations, grid)
    report.derived_bound = simplify(bound)
    return report


def _report_from_obligations(obligations: list[LoopObligation], grid: StateGrid) -> CheckReport:
    counterexamples = []
    for ob in obligations:
        counterexamples.extend(ob.result.violations)
    verdict = "verified" if not counterexamples else "violated"
    if not obligations:
        verdict = "verified"  # loop-free: nothing to discharge
    fixed_point = all(ob.result.all_equal for ob in obligations) if obligations else None
    return CheckReport(
        verdict=verdict,
        counterexamples=counterexamples,
        grid=grid.describe(),
        obligations=obligations,
        fixed_point=fixed_point,
    )


def check_bound(program: Program, bound: Expr, post: Expr, grid: StateGrid) -> CheckReport:
    """Verify wp_upper(program)(post) <= bound on the grid (obligations
    included); for loop-free programs this compares the exact wp."""
    obligations: list[LoopObligation] = []
    pre = wp_upper(program.body, post, obligations, grid)
    result = leq_on_grid(simplify(pre), bound, grid)
    report = _report_from_obligations(obligations, grid)
    report.derived_bound = simplify(pre)
    if not result.passed:
        report.verdict = "violated"
        report.counterexamples.extend(result.violations)
    return report


# ---------------------------------------------------------------------------
# Numeric wp via the operational semantics
# ---------------------------------------------------------------------------


def wp_numeric(
    program: Program,
    post: Optional[Expr],
    state: State,
    depth: int,
    budget: int = opsem.DEFAULT_BUDGET,
) -> Bracket:
    """Depth-bounded expected cumulative reward with post collected on
    termination; the lower bound is nondecreasing in depth and exact once
    the unabsorbed mass hits zero."""
    mc = MarkovChain.of_program(program, state)
    return expected_reward(mc, depth, post=post, budget=budget)


# ---------------------------------------------------------------------------
# Kleene iteration of loop functionals (semantic, memoized per state)
# ---------------------------------------------------------------------------


def _wp_semantic(s: Stmt, cont: Callable[[State], ExtReal]) -> Callable[[State], ExtReal]:
    """wp with a callable post; body must be loop-free."""
    if isinstance(s, Skip):
        return cont
    if isinstance(s, Assign):
        rhs = compile_expr(s.expr)
        var = s.var
        return lambda st: cont(st.updated(var, rhs(st)))
    if isinstance(s, Reward):
        arg = compile_expr(_reward_expr(s))
        return lambda st: arg(st) + cont(st)
    if isinstance(s, Seq):
        return _wp_semantic(s.first, _wp_semantic(s.second, cont))
    if isinstance(s, Prob):
        p = compile_expr(s.prob)
        left = _wp_semantic(s.left, cont)
        right = _wp_semantic(s.right, cont)

        def prob_case(st):
            pv = p(st)
            acc = ZERO
            if pv > ZERO:
                acc = acc + pv * left(st)
            if pv < ONE:
                acc = acc + (ONE - pv) * right(st)
            return acc

        return prob_case
    if isinstance(s, If):
        c = compile_bexpr(s.cond)
        left = _wp_semantic(s.then, cont)
        right = _wp_semantic(s.orelse, cont)
        return lambda st: left(st) if c(st) else right(st)
    if isinstance(s, While):
        raise LoopWithoutInvariantError("Kleene iteration needs a loop-free body")
    raise TypeError("unknown statement node %r" % (s,))


def _with_recursion_room(n: int):
    import sys

    needed = 4000 + 60 * n
    if sys.getrecursionlimit() < needed:
        sys.setrecursionlimit(needed)


def kleene_iterates(loop: While, post: Expr, state: State, n: int) -> list[ExtReal]:
    """Values Phi_post^k(0)(state) for k = 0..n; nondecreasing in k."""
    _with_recursion_room(n)
    guard = compile_bexpr(loop.cond)
    post_fn = compile_expr(post)
    prev: Callable[[State], ExtReal] = lambda st: ZERO
    values = [ZERO]
    for _ in range(n):
        memo: dict[State, ExtReal] = {}
        body = _wp_semantic(loop.body, prev)

        def current(st, body=body, memo=memo):
            hit = memo.get(st)
            if hit is None:
                hit = body(st) if guard(st) else post_fn(st)
                memo[st] = hit
            return hit

        values.append(current(state))
        prev = current
    return values


def _ert_semantic(s: Stmt, cont: Callable[[State], ExtReal]) -> Callable[[State], ExtReal]:
    """Expected-runtime transformer body case (loop-free, reward-free)."""
    if isinstance(s, Reward):
        raise MultiRewardError("the runtime transformer is defined on reward-free programs")
    if isinstance(s, While):
        raise LoopWithoutInvariantError("nested loops are out of scope for the ert cross-check")
    if isinstance(s, Seq):
        return _ert_semantic(s.first, _ert_semantic(s.second, cont))
    if isinstance(s, Prob):
        p = compile_expr(s.prob)
        left = _ert_semantic(s.left, cont)
        right = _ert_semantic(s.right, cont)

        def prob_case(st):
            pv = p(st)
            acc = ZERO
            if pv > ZERO:
                acc = acc + pv * left(st)
            if pv < ONE:
                acc = acc + (ONE - pv) * right(st)
            return acc

        return prob_case
    if isinstance(s, If):
        c = compile_bexpr(s.cond)
        left = _ert_semantic(s.then, cont)
        right = _ert_semantic(s.orelse, cont)
        return lambda st: left(st) if c(st) else right(st)
    return _wp_semantic(s, cont)  # Skip, Assign


def ert_kleene(loop: While, post: Expr, state: State, n: int) -> list[ExtReal]:
    """Kleene iterates of the runtime functional [b]*(1 + ert(body)(Y)) +
    [not b]*post, evaluated at the state."""
    _with_recursion_room(n)
    guard = compile_bexpr(loop.cond)
    post_fn = compile_expr(post)
    prev: Callable[[State], ExtReal] = lambda st: ZERO
    values = [ZERO]
    for _ in range(n):
        memo: dict[State, ExtReal] = {}
        body = _ert_semantic(loop.body, prev)

        def current(st, body=body, memo=memo):
            hit = memo.get(st)
            if hit is None:
                hit = ONE + body(st) if guard(st) else post_fn(st)
                memo[st] = hit
            return hit

        values.append(current(state))
        prev = current
    return values


def ert_equivalence_check(
    loop: While, post: Expr, grid: StateGrid, depth: int
) -> CheckReport:
    """Incremental runtime collection: wp of `while b { reward(1); body }`
    equals ert of `while b { body }`. Compared via Kleene iterates at equal
    iterate counts on every grid state, exactly (tolerance zero)."""
    instrumented = While(loop.cond, Seq(Reward((const(1),)), loop.body), None)
    counterexamples = []
    for state in grid.states():
        wp_values = kleene_iterates(instrumented, post, state, depth)
        ert_values = ert_kleene(loop, post, state, depth)
        for a, b in zip(wp_values, ert_values):
            if a != b:
                counterexamples.append((state, a, b))
                break
    return CheckReport(
        verdict="verified" if not counterexamples else "violated",
        counterexamples=counterexamples,
        grid=grid.describe() + "; iterates 0..%d" % depth,
    )


# ---------------------------------------------------------------------------
# The counter-variable unsoundness demo
# ---------------------------------------------------------------------------


def unsound_counter_demo(depth: int = 120, budget: int = opsem.DEFAULT_BUDGET) -> dict:
    """Three reward models for the runtime of a diverging loop.

    Tracking the runtime in a counter and collecting it on termination
    (plain or squared) reports zero for `while true { skip }`; collecting
    reward(1) incrementally inside the body reports a lower bound that grows
    without bound in the exploration depth.
    """
    from .lang import parse

    counter_first = parse("tau := 0; while true { tau := tau + 1; skip }; reward(tau)")
    counter_squared = parse("tau := 0; while true { tau := tau + 1; skip }; reward(tau ^ 2)")
    incremental = parse("while true { reward(1); skip }")
    state = State(tau=0)
    rows = {}
    for name, prog in (
        ("counter_on_termination", counter_first),
        ("squared_counter_on_termination", counter_squared),
        ("incremental_rewards", incremental),
    ):
        samples = []
        for d in (depth // 4, depth // 2, depth):
            br = wp_numeric(prog, None, state, max(d, 4), budget=budget)
            samples.append((max(d, 4), br.lower))
        rows[name] = samples
    return rows
