"""Grammar-directed random programs for property tests.

Small exact values keep the oracles cheap: probabilities are drawn from
{1/4, 1/3, 1/2, 2/3}, constants from {0, 1/2, 1, 2, 3}, and at most three
variables are used, so path enumeration and symbolic wp stay fully rational.
"""

from __future__ import annotations

import random
from fractions import Fraction

from .extreal import ExtReal
from .lang import (
    Add, Assign, BExpr, Cmp, Expr, If, Iverson, Max, Min, Monus, Mul, Prob,
    Program, Reward, Skip, State, Stmt, Var, While, const, seq,
)

PROBABILITIES = [Fraction(1, 4), Fraction(1, 3), Fraction(1, 2), Fraction(2, 3)]
CONSTANTS = [Fraction(0), Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3)]
VARIABLES = ["x", "y", "z"]


def random_expr(rng: random.Random, depth: int = 2) -> Expr:
    """A non-negative arithmetic expression over the variable pool."""
    if depth <= 0 or rng.random() < 0.4:
        if rng.random() < 0.5:
            return const(ExtReal(rng.choice(CONSTANTS)))
        return Var(rng.choice(VARIABLES))
    kind = rng.randrange(5)
    a = random_expr(rng, depth - 1)
    b = random_expr(rng, depth - 1)
    if kind == 0:
        return Add(a, b)
    if kind == 1:
        return Monus(a, b)
    if kind == 2:
        return Mul(const(ExtReal(rng.choice(CONSTANTS[1:]))), a)
    if kind == 3:
        return Min(a, b)
    return Max(a, b)


def random_guard(rng: random.Random) -> BExpr:
    op = rng.choice(["=", "<", "<=", ">", ">="])
    left = Var(rng.choice(VARIABLES))
    right = const(ExtReal(rng.choice([0, 1, 2, 3])))
    return Cmp(op, left, right)


def random_stmt(
    rng: random.Random,
    depth: int,
    allow_loops: bool = True,
    allow_rewards: bool = True,
) -> Stmt:
    roll = rng.random()
    if depth <= 0:
        roll = min(roll, 0.59)  # leaves only
    if roll < 0.30:
        return Assign(rng.choice(VARIABLES), random_expr(rng, 1))
    if roll < 0.50 and allow_rewards:
        return Reward((random_expr(rng, 1),))
    if roll < 0.60:
        return Skip()
    if roll < 0.78:
        p = const(ExtReal(rng.choice(PROBABILITIES)))
        return Prob(
            p,
            random_stmt(rng, depth - 1, allow_loops, allow_rewards),
            random_stmt(rng, depth - 1, allow_loops, allow_rewards),
        )
    if roll < 0.90 or not allow_loops:
        return If(
            random_guard(rng),
            random_stmt(rng, depth - 1, allow_loops, allow_rewards),
            random_stmt(rng, depth - 1, allow_loops, allow_rewards),
        )
    body = seq(
        random_stmt(rng, 0, False, allow_rewards),
        Prob(
            const(ExtReal(rng.choice(PROBABILITIES))),
            Assign(rng.choice(VARIABLES), const(0)),
            random_stmt(rng, 0, False, allow_rewards),
        ),
    )
    return While(random_guard(rng), body, None)


def random_program(
    rng: random.Random,
    size: int = 3,
    depth: int = 2,
    allow_loops: bool = True,
    allow_rewards: bool = True,
) -> Program:
    stmts = [random_stmt(rng, depth, allow_loops, allow_rewards) for _ in range(size)]
    return Program(seq(*stmts), params=(), reward_arity=1)


def random_loop(rng: random.Random, reward_free: bool = True) -> While:
    """A single loop with a loop-free body, for the runtime cross-checks."""
    body = seq(
        random_stmt(rng, 1, allow_loops=False, allow_rewards=not reward_free),
        random_stmt(rng, 0, allow_loops=False, allow_rewards=not reward_free),
    )
    return While(random_guard(rng), body, None)


def random_expectation(rng: random.Random, depth: int = 2) -> Expr:
    e = random_expr(rng, depth)
    if rng.random() < 0.5:
        return Mul(Iverson(random_guard(rng)), e)
    return e


def random_state(rng: random.Random, integral: bool = True) -> State:
    pool = [0, 1, 2, 3, 5] if integral else [0, Fraction(1, 2), 1, Fraction(5, 2), 3]
    return State({name: ExtReal(rng.choice(pool)) for name in VARIABLES})
