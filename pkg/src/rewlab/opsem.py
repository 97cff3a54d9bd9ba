"""Operational semantics: configuration stepping, lazy Markov chains,
bounded exhaustive path enumeration, expected rewards, and the reward
transformation on Markov chains.

A configuration is a pair (pending statements, state); the empty statement
tuple is the termination marker, and BOTTOM is the absorbing sink. The step
relation follows the small-step inference rules of the calculus: skip,
assignment and reward each take one transition, sequencing is by congruence
(finishing a leaf pops directly to the continuation), probabilistic choice
branches with exact rational probabilities, and conditionals/loops branch on
their guard in one transition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Optional

from .extreal import ExtReal, ZERO, ONE
from .lang import (
    Assign, Expr, If, Program, Prob, Reward, Skip, State, Stmt, While,
    stmt_spine,
)
from .expectation import EvalError, compile_bexpr, compile_expr


class BudgetExceededError(RuntimeError):
    def __init__(self, budget: int):
        super().__init__(
            "node budget of %d exhausted; the reachable configuration space may "
            "be infinite (raise the budget to explore further)" % budget
        )
        self.budget = budget


class _Bottom:
    __slots__ = ()

    def __repr__(self):
        return "BOTTOM"


BOTTOM = _Bottom()

Config = object  # (tuple[Stmt, ...], State) for program chains, or BOTTOM
DEFAULT_BUDGET = 10**6


_spines: dict[int, tuple[Stmt, tuple[Stmt, ...]]] = {}


def _spine(stmt: Stmt) -> tuple[Stmt, ...]:
    """Seq tree flattened to a tuple (no Seq nodes remain), memoized."""
    hit = _spines.get(id(stmt))
    if hit is not None and hit[0] is stmt:
        return hit[1]
    out = stmt_spine(stmt)
    _spines[id(stmt)] = (stmt, out)
    return out


def program_config(program: Program, state: State) -> Config:
    return (_spine(program.body), state)


def is_terminated(config: Config) -> bool:
    return config is not BOTTOM and config[0] == ()


def config_state(config: Config) -> Optional[State]:
    return None if config is BOTTOM else config[1]


def step(config: Config) -> list[tuple[ExtReal, Config]]:
    """Successor distribution of a configuration (at most two successors)."""
    if config is BOTTOM:
        return [(ONE, BOTTOM)]
    konts, state = config
    if not konts:  # termination marker
        return [(ONE, BOTTOM)]
    head, rest = konts[0], konts[1:]
    if isinstance(head, Skip):
        return [(ONE, (rest, state))]
    if isinstance(head, Assign):
        value = compile_expr(head.expr)(state)
        return [(ONE, (rest, state.updated(head.var, value)))]
    if isinstance(head, Reward):
        return [(ONE, (rest, state))]
    if isinstance(head, Prob):
        p = compile_expr(head.prob)(state)
        if not (ZERO <= p <= ONE):
            raise EvalError("probability %s outside [0, 1]" % p)
        out = []
        if p > ZERO:
            out.append((p, (_spine(head.left) + rest, state)))
        q = ONE - p
        if q > ZERO:
            out.append((q, (_spine(head.right) + rest, state)))
        return out
    if isinstance(head, If):
        taken = head.then if compile_bexpr(head.cond)(state) else head.orelse
        return [(ONE, (_spine(taken) + rest, state))]
    if isinstance(head, While):
        if compile_bexpr(head.cond)(state):
            return [(ONE, (_spine(head.body) + konts, state))]
        return [(ONE, (rest, state))]
    raise TypeError("unknown statement node %r" % (head,))


def config_reward(config: Config, arity: int) -> tuple[ExtReal, ...]:
    """Reward of a configuration: the head reward statement's value, else 0."""
    if config is BOTTOM or not config[0]:
        return (ZERO,) * arity
    head = config[0][0]
    if isinstance(head, Reward):
        state = config[1]
        return tuple(compile_expr(a)(state) for a in head.args)
    return (ZERO,) * arity


class MarkovChain:
    """Lazily explored Markov chain with per-configuration reward tuples."""

    def __init__(
        self,
        initial: Config,
        step_fn: Callable[[Config], list[tuple[ExtReal, Config]]],
        reward_fn: Callable[[Config], tuple[ExtReal, ...]],
        arity: int = 1,
        term_fn: Optional[Callable[[Config], bool]] = None,
        state_of: Optional[Callable[[Config], State]] = None,
    ):
        self.initial = initial
        self.step = step_fn
        self.reward = reward_fn
        self.arity = arity
        self.terminated = term_fn or (lambda c: c is BOTTOM)
        self.state_of = state_of

    @classmethod
    def of_program(cls, program: Program, state: State) -> "MarkovChain":
        arity = program.reward_arity
        return cls(
            initial=program_config(program, state),
            step_fn=step,
            reward_fn=lambda c: config_reward(c, arity),
            arity=arity,
            term_fn=lambda c: c is BOTTOM or not c[0],
            state_of=config_state,
        )

    @classmethod
    def of_tables(
        cls,
        initial,
        transitions: dict,
        rewards: dict,
        arity: int = 1,
        terminals: frozenset = frozenset(),
    ) -> "MarkovChain":
        """A chain given explicitly: transitions[s] = [(prob, s'), ...]."""

        def step_fn(c):
            return [(p if isinstance(p, ExtReal) else ExtReal(p), t) for p, t in transitions[c]]

        def reward_fn(c):
            r = rewards.get(c, ZERO)
            if not isinstance(r, tuple):
                r = (r if isinstance(r, ExtReal) else ExtReal(r),)
            return r

        return cls(initial, step_fn, reward_fn, arity, term_fn=lambda c: c in terminals)


@dataclass(frozen=True)
class PathSummary:
    probability: ExtReal
    reward: tuple[ExtReal, ...]
    terminated: bool
    length: int


def enumerate_paths(
    mc: MarkovChain,
    depth: int,
    post: Optional[Expr] = None,
    budget: int = DEFAULT_BUDGET,
) -> Iterator[PathSummary]:
    """Exhaustively enumerate probability-positive paths of length <= depth.

    Paths reaching the termination marker are reported terminated and not
    extended (padding with the absorbing sink never changes probability or
    cumulative reward). A `post` expectation, when given, is collected once
    at the termination marker, on top of the per-configuration rewards.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    post_fn = compile_expr(post) if post is not None else None
    if post_fn is not None and mc.arity != 1:
        raise ValueError("post-expectations require reward arity 1")
    if post_fn is not None and mc.state_of is None:
        raise ValueError("this chain has no program states; post-expectations unsupported")
    explored = 0
    zero = (ZERO,) * mc.arity

    # stack of (config, probability, cumulative reward, length)
    stack = [(mc.initial, ONE, zero, 1)]
    while stack:
        config, prob, acc, length = stack.pop()
        explored += 1
        if explored > budget:
            raise BudgetExceededError(budget)
        acc = tuple(a + r for a, r in zip(acc, mc.reward(config)))
        if mc.terminated(config):
            if post_fn is not None and config is not BOTTOM:
                acc = (acc[0] + post_fn(mc.state_of(config)),)
            yield PathSummary(prob, acc, True, length)
            continue
        if length >= depth:
            yield PathSummary(prob, acc, False, length)
            continue
        for p, succ in mc.step(config):
            stack.append((succ, prob * p, acc, length + 1))


@dataclass
class Bracket:
    """Lower/upper bracket for an expected reward at a finite exploration depth."""

    lower: object  # ExtReal or tuple of ExtReal (multi-reward, no transform)
    upper: Optional[object]
    unabsorbed_mass: ExtReal
    depth: int
    paths_enumerated: int
    terminated_value: object = None  # contribution of terminated paths only


def expected_reward(
    mc: MarkovChain,
    depth: int,
    f=None,
    post: Optional[Expr] = None,
    budget: int = DEFAULT_BUDGET,
    step_reward_cap: Optional[ExtReal] = None,
) -> Bracket:
    """Finite-depth lower bound of the (f-transformed) expected reward.

    The lower bound sums prob * f(cumulative reward) over every enumerated
    path, including the partial rewards of paths cut at the depth bound, so
    it is nondecreasing in depth. The upper side is only known when all mass
    is absorbed, or when a per-step reward cap is given and the frontier mass
    decays geometrically over the explored depths.
    """
    if f is not None and f.arity != mc.arity:
        raise ValueError(
            "transform arity %d does not match reward arity %d" % (f.arity, mc.arity)
        )
    scalar = f is not None or mc.arity == 1
    lower = ZERO if scalar else (ZERO,) * mc.arity
    term_value = lower
    mass = ZERO
    paths = 0
    for path in enumerate_paths(mc, depth, post=post, budget=budget):
        paths += 1
        value = f.eval(path.reward) if f is not None else (
            path.reward[0] if scalar else path.reward
        )
        contribution = (
            path.probability * value
            if scalar
            else tuple(path.probability * v for v in value)
        )
        lower = lower + contribution if scalar else tuple(
            a + b for a, b in zip(lower, contribution)
        )
        if path.terminated:
            term_value = (
                term_value + contribution
                if scalar
                else tuple(a + b for a, b in zip(term_value, contribution))
            )
        else:
            mass = mass + path.probability

    upper = None
    if mass.is_zero:
        upper = lower
    elif (
        scalar
        and f is None
        and post is None
        and step_reward_cap is not None
        and depth >= 4
    ):
        # geometric frontier decay certificate: compare the unabsorbed mass
        # at half depth against the full depth; if it shrank, extrapolate the
        # per-step survival rate and bound the capped tail.
        half_mass = ZERO
        for path in enumerate_paths(mc, depth // 2, budget=budget):
            if not path.terminated:
                half_mass = half_mass + path.probability
        if not half_mass.is_zero and mass < half_mass:
            steps = depth - depth // 2
            rate = (float(mass) / float(half_mass)) ** (1.0 / steps)
            if 0.0 < rate < 1.0:
                tail = float(step_reward_cap) * float(mass) * rate / (1.0 - rate)
                upper = ExtReal(float(lower) + tail)
    return Bracket(
        lower=lower,
        upper=upper,
        unabsorbed_mass=mass,
        depth=depth,
        paths_enumerated=paths,
        terminated_value=term_value,
    )


def runtime_distribution(
    mc: MarkovChain,
    depth: int,
    budget: int = DEFAULT_BUDGET,
) -> tuple[dict, ExtReal]:
    """Histogram of cumulative reward over terminated paths, plus the
    unabsorbed probability mass. Keys are exact cumulative rewards (tuples
    for multi-reward programs)."""
    hist: dict = {}
    mass = ZERO
    for path in enumerate_paths(mc, depth, budget=budget):
        if not path.terminated:
            mass = mass + path.probability
            continue
        key = path.reward[0] if mc.arity == 1 else path.reward
        hist[key] = hist.get(key, ZERO) + path.probability
    return hist, mass


# ---------------------------------------------------------------------------
# Reward transformation of Markov chains
# ---------------------------------------------------------------------------

_INIT = ("#init",)  # prepended state carrying reward f(0) when f(0) != 0


def mc_transform(mc: MarkovChain, f) -> MarkovChain:
    """Augment states with the accumulated reward of the original chain and
    collect incremental differences f(alpha + rew) - f(alpha).

    Requires a monotone transform of matching arity. When f(0) != 0, a fresh
    initial state carrying reward f(0) is prepended and the difference chain
    uses the shifted function, so the path rewards still telescope to
    f(total). The reachable state space generally becomes infinite; rely on
    depth bounds and the node budget when exploring.
    """
    if f.arity != mc.arity:
        raise ValueError(
            "transform arity %d does not match reward arity %d" % (f.arity, mc.arity)
        )
    zeros = (ZERO,) * mc.arity
    f0 = f.eval(zeros)
    base = (mc.initial, zeros)

    def step_fn(c):
        if c is _INIT:
            return [(ONE, base)]
        inner, alpha = c
        if inner is BOTTOM:
            return [(ONE, (BOTTOM, alpha))]
        alpha2 = tuple(a + r for a, r in zip(alpha, mc.reward(inner)))
        return [(p, (succ, alpha2)) for p, succ in mc.step(inner)]

    def reward_fn(c):
        if c is _INIT:
            return (f0,)
        inner, alpha = c
        if inner is BOTTOM:
            return (ZERO,)
        alpha2 = tuple(a + r for a, r in zip(alpha, mc.reward(inner)))
        return (f.eval(alpha2) - f.eval(alpha),)

    def term_fn(c):
        return c is not _INIT and mc.terminated(c[0])

    return MarkovChain(
        initial=_INIT if not f0.is_zero else base,
        step_fn=step_fn,
        reward_fn=reward_fn,
        arity=1,
        term_fn=term_fn,
    )
