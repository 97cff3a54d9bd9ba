"""Ghost-variable gadgets: reward structures expressed inside the language.

Each gadget is a source-to-source rewrite. Ghost variables are initialized
to 0 at the program head and never influence the original control flow:

* on-termination: append `reward(X)`; the expected reward then equals the
  expected value of X on termination (diverging runs collect nothing).
* discounting: every `reward(a)` becomes `reward(gamma^tau * a); tau := tau+1`
  with discount factor gamma in [0, 1]; one time step per reward statement.
* step-indexed: rewards are collected only at step N (`at`) or up to step N
  (`upto`), with tau counting reward statements.
* expected visiting times / first visit / first return: a conditional reward
  probe is placed at the head of every loop body and once after the program,
  counting one visit per loop iteration plus the final state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .extreal import ExtReal, ZERO, ONE
from .lang import (
    Add, Assign, BExpr, Cmp, Expr, GPow, If, Iverson, Min, Mul, Param,
    Prob, Program, Reward, Seq, Skip, State, Stmt, Var, While, const,
    fresh_var, parse, seq,
)


class GadgetError(ValueError):
    pass


@dataclass(frozen=True)
class GadgetSpec:
    kind: str  # on-termination | discount | step-indexed | evt | first-visit | first-return
    post: Optional[Expr] = None  # on-termination
    gamma: Optional[ExtReal] = None  # discount
    step_param: str = "N"  # step-indexed
    mode: str = "at"  # step-indexed: at | upto
    cond: Optional[BExpr] = None  # evt / first-visit / first-return


def _rewrite_rewards(s: Stmt, rewrite) -> Stmt:
    if isinstance(s, Reward):
        return rewrite(s)
    if isinstance(s, Seq):
        return Seq(_rewrite_rewards(s.first, rewrite), _rewrite_rewards(s.second, rewrite))
    if isinstance(s, Prob):
        return Prob(s.prob, _rewrite_rewards(s.left, rewrite), _rewrite_rewards(s.right, rewrite))
    if isinstance(s, If):
        return If(s.cond, _rewrite_rewards(s.then, rewrite), _rewrite_rewards(s.orelse, rewrite))
    if isinstance(s, While):
        return While(s.cond, _rewrite_rewards(s.body, rewrite), s.invariant)
    return s


def _prepend_to_loop_bodies(s: Stmt, probe: Stmt) -> Stmt:
    if isinstance(s, Seq):
        return Seq(_prepend_to_loop_bodies(s.first, probe), _prepend_to_loop_bodies(s.second, probe))
    if isinstance(s, Prob):
        return Prob(s.prob, _prepend_to_loop_bodies(s.left, probe), _prepend_to_loop_bodies(s.right, probe))
    if isinstance(s, If):
        return If(s.cond, _prepend_to_loop_bodies(s.then, probe), _prepend_to_loop_bodies(s.orelse, probe))
    if isinstance(s, While):
        return While(s.cond, Seq(probe, _prepend_to_loop_bodies(s.body, probe)), s.invariant)
    return s


def apply_gadget(program: Program, g: GadgetSpec) -> Program:
    if g.kind == "on-termination":
        if g.post is None:
            raise GadgetError("on-termination needs a post expectation")
        if program.reward_arity != 1:
            raise GadgetError("on-termination instruments single-reward programs")
        return Program(
            Seq(program.body, Reward((g.post,))), program.params, 1
        )

    if g.kind == "discount":
        if g.gamma is None or not (ZERO <= g.gamma <= ONE):
            raise GadgetError("discount factor must lie in [0, 1]")
        if program.reward_arity != 1:
            raise GadgetError("discounting instruments single-reward programs")
        tau = fresh_var(program, "tau")
        factor = GPow(const(g.gamma), Var(tau))

        def rewrite(r: Reward) -> Stmt:
            return seq(
                Reward((Mul(factor, r.args[0]),)),
                Assign(tau, Add(Var(tau), const(1))),
            )

        body = seq(Assign(tau, const(0)), _rewrite_rewards(program.body, rewrite))
        return Program(body, program.params, 1)

    if g.kind == "step-indexed":
        if program.reward_arity != 1:
            raise GadgetError("step indexing instruments single-reward programs")
        tau = fresh_var(program, "tau")
        n = Param(g.step_param)
        op = "=" if g.mode == "at" else "<="
        if g.mode not in ("at", "upto"):
            raise GadgetError("step-indexed mode must be 'at' or 'upto'")

        def rewrite(r: Reward) -> Stmt:
            return seq(
                If(Cmp(op, Var(tau), n), Reward(r.args), Skip()),
                Assign(tau, Add(Var(tau), const(1))),
            )

        params = program.params
        if g.step_param not in program.param_names:
            from .lang import ParamDecl

            params = params + (ParamDecl(g.step_param),)
        body = seq(Assign(tau, const(0)), _rewrite_rewards(program.body, rewrite))
        return Program(body, params, 1)

    if g.kind in ("evt", "first-visit", "first-return"):
        if g.cond is None:
            raise GadgetError("%s needs a condition" % g.kind)
        if g.kind == "evt":
            probe: Stmt = If(g.cond, Reward((const(1),)), Skip())
            prelude: list[Stmt] = []
        elif g.kind == "first-visit":
            phi = fresh_var(program, "phi")
            probe = If(
                g.cond,
                seq(
                    Reward((Iverson(Cmp("=", Var(phi), const(0))),)),
                    Assign(phi, const(1)),
                ),
                Skip(),
            )
            prelude = [Assign(phi, const(0))]
        else:  # first-return
            phi = fresh_var(program, "phi")
            probe = If(
                g.cond,
                seq(
                    Reward((Iverson(Cmp("=", Var(phi), const(1))),)),
                    Assign(phi, Min(Add(Var(phi), const(1)), const(2))),
                ),
                Skip(),
            )
            prelude = [Assign(phi, const(0))]
        # one count per loop iteration (probe at the body head, seen only
        # while the guard holds) plus one for the state the program ends in;
        # probing body tails instead would count the exit state twice
        body = _prepend_to_loop_bodies(program.body, probe)
        body = seq(*prelude, body, probe)
        return Program(body, program.params, 1)

    raise GadgetError("unknown gadget kind %r" % g.kind)


# ---------------------------------------------------------------------------
# The fast-dice-roller fixture
# ---------------------------------------------------------------------------
#
# Seven-state chain sampling a fair die with coin flips: s0 splits into s1/s2,
# s1 into the terminal rolls {1,2}/{3,4} (via s3/s4), s2 into s5/s6, s6 into
# {5,6}, and s5 loops back to s1/s2. The query parameters select a (state,
# done) pair; the visit reward is collected at the loop head (counting the
# current state) and once after the loop (counting the terminal state), which
# makes the fundamental-matrix invariant below an exact fixed point of the
# loop functional. The branch order in the conditional chain keeps the
# recurrent states s2/s5 cheapest to step.

FDR_INVARIANT_TEXT = (
    "[done = 1] * [query_s = s and query_done = 1]"
    " + [done = 0] * [query_done = 0] * ("
    "   [query_s = 0] * [s = 0]"
    " + [query_s = 1] * ([s = 0] * (2/3) + [s = 1] + [s = 2] * (1/3) + [s = 5] * (2/3))"
    " + [query_s = 2] * ([s = 0] * (2/3) + [s = 2] * (4/3) + [s = 5] * (2/3))"
    " + [query_s = 3] * ([s = 0] * (1/3) + [s = 1] * (1/2) + [s = 2] * (1/6) + [s = 3] + [s = 5] * (1/3))"
    " + [query_s = 4] * ([s = 0] * (1/3) + [s = 1] * (1/2) + [s = 2] * (1/6) + [s = 4] + [s = 5] * (1/3))"
    " + [query_s = 5] * ([s = 0] * (1/3) + [s = 2] * (2/3) + [s = 5] * (4/3))"
    " + [query_s = 6] * ([s = 0] * (1/3) + [s = 2] * (2/3) + [s = 5] * (1/3) + [s = 6])"
    " )"
    " + [done = 0] * [query_done = 1] * ("
    "   [query_s = 3] * ([s = 0] * (1/3) + [s = 1] * (1/2) + [s = 2] * (1/6) + [s = 3] + [s = 5] * (1/3))"
    " + [query_s = 4] * ([s = 0] * (1/3) + [s = 1] * (1/2) + [s = 2] * (1/6) + [s = 4] + [s = 5] * (1/3))"
    " + [query_s = 6] * ([s = 0] * (1/3) + [s = 2] * (2/3) + [s = 5] * (1/3) + [s = 6])"
    " )"
)

FDR_SOURCE = """\
param query_s : 0..6
param query_done : 0..1

s := 0;
done := 0;
res := 0;
while done = 0 invariant %s {
    reward([query_s = s and query_done = done]);
    if s = 2 {
        { s := 5 } [1/2] { s := 6 }
    } else { if s = 5 {
        { s := 1 } [1/2] { s := 2 }
    } else { if s = 0 {
        { s := 1 } [1/2] { s := 2 }
    } else { if s = 1 {
        { s := 3 } [1/2] { s := 4 }
    } else { if s = 3 {
        done := 1;
        { res := 1 } [1/2] { res := 2 }
    } else { if s = 4 {
        done := 1;
        { res := 3 } [1/2] { res := 4 }
    } else {
        done := 1;
        { res := 5 } [1/2] { res := 6 }
    } } } } } }
};
reward([query_s = s and query_done = done])
""" % FDR_INVARIANT_TEXT

_fdr_cache: Optional[Program] = None


def fdr_fixture() -> Program:
    """The fast-dice-roller visiting-time fixture with query parameters
    query_s and query_done and the fundamental-matrix loop invariant."""
    global _fdr_cache
    if _fdr_cache is None:
        _fdr_cache = parse(FDR_SOURCE)
    return _fdr_cache


def fdr_initial_state(query_s: int, query_done: int) -> State:
    return State(s=0, done=0, res=0, query_s=query_s, query_done=query_done)
