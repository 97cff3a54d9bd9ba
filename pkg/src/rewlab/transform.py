"""Incremental reward transformation of programs and its checkers.

Transforming a program with a monotone function f introduces a fresh
accumulator variable per reward component, prepends `tau := 0; reward(f(0))`,
and turns every `reward(a)` into `reward(f(tau + a) - f(tau)); tau := tau + a`
(componentwise for tuple rewards). All other statements map homomorphically.
The expected reward of the result equals the expected value of f applied to
the cumulative reward of the original program; the checkers in this module
verify the finite-depth shadow of that statement path by path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .extreal import ExtReal, ZERO, ONE, parse_extreal
from .lang import (
    Add, Assign, Const, Expr, If, Iverson, Cmp, Monus, Mul, PowN,
    Prob, Program, Reward, Seq, Skip, State, Stmt, Var, While, ExpScaled,
    const, fresh_var, parse_expr, seq,
)
from .expectation import compile_expr, simplify
from . import opsem
from .opsem import MarkovChain


class TransformError(ValueError):
    pass


_ARG_NAMES = tuple("#arg%d" % i for i in range(8))


class TransformSpec:
    """A named monotone function f from reward tuples to a single reward.

    Carries both a symbolic form (apply_expr builds the expression f(e) for
    source-level emission) and a point evaluator; agreement of the two is a
    tested invariant. Only monotone functions are accepted: the emitted
    reward differences f(tau + a) - f(tau) must be non-negative.
    """

    def __init__(
        self,
        name: str,
        arity: int,
        apply_expr: Callable[[tuple[Expr, ...]], Expr],
        env: Optional[dict[str, ExtReal]] = None,
    ):
        self.name = name
        self.arity = arity
        self.apply_expr = apply_expr
        self.env = dict(env or {})
        args = tuple(Var(n) for n in _ARG_NAMES[:arity])
        self._eval_fn = compile_expr(apply_expr(args))
        self._names = _ARG_NAMES[:arity]

    def eval(self, values: Sequence[ExtReal]) -> ExtReal:
        """Point evaluation; parameterized specs (cdf:N, ...) need bound()."""
        if len(values) != self.arity:
            raise TransformError(
                "%s expects %d reward component(s), got %d" % (self.name, self.arity, len(values))
            )
        mapping = dict(self.env)
        mapping.update(zip(self._names, values))
        return self._eval_fn(State(mapping))

    def eval_scalar(self, value) -> ExtReal:
        return self.eval((value if isinstance(value, ExtReal) else ExtReal(value),))

    def bound(self, params: dict[str, ExtReal]) -> "TransformSpec":
        """A copy with logical parameters fixed for point evaluation."""
        merged = dict(self.env)
        merged.update(params)
        return TransformSpec(self.name, self.arity, self.apply_expr, merged)

    @property
    def is_exact(self) -> bool:
        """False when point evaluation produces float-tainted values."""
        from .expectation import contains_float

        return not contains_float(self.apply_expr(tuple(Var(n) for n in self._names)))

    @property
    def at_zero(self) -> ExtReal:
        return self.eval((ZERO,) * self.arity)

    def __repr__(self):
        return "TransformSpec(%s)" % self.name


def identity() -> TransformSpec:
    return TransformSpec("identity", 1, lambda args: args[0])


def moment(k: int) -> TransformSpec:
    if k < 1:
        raise TransformError("moment order must be >= 1")
    return TransformSpec("moment:%d" % k, 1, lambda args: PowN(args[0], k) if k > 1 else args[0])


def cdf(threshold: Expr) -> TransformSpec:
    """f(x) = [x >= N]: the probability that the cumulative reward reaches N."""
    return TransformSpec("cdf", 1, lambda args: Iverson(Cmp(">=", args[0], threshold)))


def excess(budget: Expr) -> TransformSpec:
    """f(x) = x - N (truncated): expected amount exceeding the budget."""
    return TransformSpec("excess", 1, lambda args: Monus(args[0], budget))


def mgf(t) -> TransformSpec:
    """f(x) = e^(t*x) for t >= 0, the moment-generating function."""
    t = t if isinstance(t, ExtReal) else ExtReal(t)
    if t < ZERO:
        raise TransformError("mgf requires t >= 0")
    return TransformSpec("mgf:%s" % t, 1, lambda args: ExpScaled(const(t), args[0]))


def linear(alpha, beta) -> TransformSpec:
    alpha = alpha if isinstance(alpha, ExtReal) else ExtReal(alpha)
    beta = beta if isinstance(beta, ExtReal) else ExtReal(beta)
    spec = TransformSpec(
        "linear:%s,%s" % (alpha, beta),
        1,
        lambda args: Add(Mul(const(alpha), args[0]), const(beta)),
    )
    spec.linear_coeffs = (alpha, beta)
    return spec


def product(arity: int) -> TransformSpec:
    if arity < 1:
        raise TransformError("product needs arity >= 1")

    def apply(args):
        out = args[0]
        for a in args[1:]:
            out = Mul(out, a)
        return out

    return TransformSpec("product", arity, apply)


def custom(name: str, arity: int, apply_expr) -> TransformSpec:
    """User-supplied monotone function; monotonicity is the caller's claim
    and is spot-checked by check_monotone_on."""
    return TransformSpec(name, arity, apply_expr)


def pgf(base) -> TransformSpec:
    raise TransformError(
        "probability generating functions b^x are not monotone for b < 1; "
        "only monotone reward transforms are supported"
    )


def compose(g: TransformSpec, f: TransformSpec) -> TransformSpec:
    """g after f; defined for unary transforms."""
    if g.arity != 1 or f.arity != 1:
        raise TransformError("composition needs unary transforms")
    return TransformSpec(
        "%s.%s" % (g.name, f.name), 1, lambda args: g.apply_expr((f.apply_expr(args),))
    )


def parse_spec(text: str, params: set[str] = frozenset()) -> TransformSpec:
    """Parse CLI notation: moment:2, cdf:N, excess:N, mgf:0.5, linear:2,3,
    product, identity."""
    kind, _, arg = text.partition(":")
    kind = kind.strip()
    if kind == "identity":
        return identity()
    if kind == "moment":
        return moment(int(arg))
    if kind == "cdf":
        return cdf(parse_expr(arg, params=params))
    if kind == "excess":
        return excess(parse_expr(arg, params=params))
    if kind == "mgf":
        return mgf(parse_extreal(arg))
    if kind == "linear":
        a, b = arg.split(",")
        return linear(parse_extreal(a), parse_extreal(b))
    if kind == "product":
        return product(int(arg) if arg else 2)
    if kind == "pgf":
        return pgf(arg)
    raise TransformError("unknown transform spec %r" % text)


def check_monotone_on(f: TransformSpec, samples: Sequence[tuple]) -> bool:
    """Spot-check monotonicity: f(x) <= f(y) whenever x <= y componentwise."""
    pts = [tuple(v if isinstance(v, ExtReal) else ExtReal(v) for v in s) for s in samples]
    for x in pts:
        for y in pts:
            if all(a <= b for a, b in zip(x, y)) and not f.eval(x) <= f.eval(y):
                return False
    return True


# ---------------------------------------------------------------------------
# The program transformation
# ---------------------------------------------------------------------------


@dataclass
class TransformResult:
    program: Program
    ghost_vars: tuple[str, ...]
    spec: TransformSpec


def _transform_stmt(s: Stmt, f: TransformSpec, taus: tuple[str, ...]) -> Stmt:
    if isinstance(s, (Skip, Assign)):
        return s
    if isinstance(s, Reward):
        tau_vars = tuple(Var(t) for t in taus)
        shifted = tuple(Add(tv, a) for tv, a in zip(tau_vars, s.args))
        delta = Monus(f.apply_expr(shifted), f.apply_expr(tau_vars))
        updates = [Assign(t, Add(Var(t), a)) for t, a in zip(taus, s.args)]
        return seq(Reward((delta,)), *updates)
    if isinstance(s, Seq):
        return Seq(_transform_stmt(s.first, f, taus), _transform_stmt(s.second, f, taus))
    if isinstance(s, Prob):
        return Prob(s.prob, _transform_stmt(s.left, f, taus), _transform_stmt(s.right, f, taus))
    if isinstance(s, If):
        return If(s.cond, _transform_stmt(s.then, f, taus), _transform_stmt(s.orelse, f, taus))
    if isinstance(s, While):
        # invariant annotations certify bounds for the original objective and
        # are dropped: they are generally wrong for the transformed one
        return While(s.cond, _transform_stmt(s.body, f, taus), None)
    raise TypeError("unknown statement node %r" % (s,))


def transform_with_info(program: Program, f: TransformSpec) -> TransformResult:
    if program.reward_arity != f.arity:
        raise TransformError(
            "transform arity %d does not match program reward arity %d"
            % (f.arity, program.reward_arity)
        )
    from .lang import free_vars

    used = free_vars(program) | program.param_names
    taus = []
    for i in range(f.arity):
        name = "tau" if f.arity == 1 else "tau%d" % (i + 1)
        while name in used:
            name += "'"
        used.add(name)
        taus.append(name)
    taus = tuple(taus)
    zeros = tuple(const(0) for _ in taus)
    initial_reward = simplify(f.apply_expr(zeros))
    body = seq(
        *[Assign(t, const(0)) for t in taus],
        Reward((initial_reward,)),
        _transform_stmt(program.body, f, taus),
    )
    out = Program(body=body, params=program.params, reward_arity=1)
    return TransformResult(out, taus, f)


def transform(program: Program, f: TransformSpec) -> Program:
    """The f-transformed program (fresh accumulator, incremental differences)."""
    return transform_with_info(program, f).program


def ghost_bust(program: Program, alpha, beta) -> Program:
    """Linear transforms f(x) = alpha*x + beta need no accumulator: prepend
    reward(beta) and scale every reward by alpha."""
    alpha = alpha if isinstance(alpha, ExtReal) else ExtReal(alpha)
    beta = beta if isinstance(beta, ExtReal) else ExtReal(beta)
    if program.reward_arity != 1:
        raise TransformError("ghost_bust handles single-reward programs")

    def rewrite(s: Stmt) -> Stmt:
        if isinstance(s, (Skip, Assign)):
            return s
        if isinstance(s, Reward):
            return Reward((simplify(Mul(const(alpha), s.args[0])),))
        if isinstance(s, Seq):
            return Seq(rewrite(s.first), rewrite(s.second))
        if isinstance(s, Prob):
            return Prob(s.prob, rewrite(s.left), rewrite(s.right))
        if isinstance(s, If):
            return If(s.cond, rewrite(s.then), rewrite(s.orelse))
        if isinstance(s, While):
            return While(s.cond, rewrite(s.body), s.invariant)
        raise TypeError("unknown statement node %r" % (s,))

    body = rewrite(program.body)
    if not beta.is_zero:
        body = Seq(Reward((const(beta),)), body)
    return Program(body=body, params=program.params, reward_arity=1)


# ---------------------------------------------------------------------------
# Program simplification (constant folding of the transformed output)
# ---------------------------------------------------------------------------


def simplify_program(program: Program) -> Program:
    """Fold expressions, propagate constants through the straight-line
    prefix, drop literal reward(0) statements and dead prefix assignments."""
    body = _simplify_stmt(program.body)
    body = _fold_prefix(body)
    return Program(body=body, params=program.params, reward_arity=program.reward_arity)


def _simplify_stmt(s: Stmt) -> Stmt:
    if isinstance(s, Skip):
        return s
    if isinstance(s, Assign):
        return Assign(s.var, simplify(s.expr))
    if isinstance(s, Reward):
        return Reward(tuple(simplify(a) for a in s.args))
    if isinstance(s, Seq):
        return Seq(_simplify_stmt(s.first), _simplify_stmt(s.second))
    if isinstance(s, Prob):
        return Prob(simplify(s.prob), _simplify_stmt(s.left), _simplify_stmt(s.right))
    if isinstance(s, If):
        return If(s.cond, _simplify_stmt(s.then), _simplify_stmt(s.orelse))
    if isinstance(s, While):
        inv = simplify(s.invariant) if s.invariant is not None else None
        return While(s.cond, _simplify_stmt(s.body), inv)
    raise TypeError("unknown statement node %r" % (s,))


def _stmt_list(s: Stmt) -> list[Stmt]:
    if isinstance(s, Seq):
        return _stmt_list(s.first) + _stmt_list(s.second)
    return [s]


# ---------------------------------------------------------------------------
# Coupled path checks (finite-depth shadows of the soundness theorems)
# ---------------------------------------------------------------------------
#
# The transformed program's chain takes extra deterministic transitions: the
# accumulator prelude, and one accumulator update after every reward. No
# single depth offset aligns the two chains across paths, so equality of
# expected values is established per path: both chains are walked in lockstep
# along identical branch decisions, and at every aligned pair of
# configurations the image's cumulative reward must relate to the origin's
# (for the plain transformation: image = f(origin), which is exactly the
# telescoped sum f(0) + sum of increments).


@dataclass
class CouplingReport:
    passed: bool
    pairs_checked: int
    leaves: int
    depth: int
    failures: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.passed


def _coupled_walk(
    origin_prog: Program,
    image_prog: Program,
    origin_state: State,
    image_state: State,
    depth: int,
    relation: Callable[[tuple[ExtReal, ...], ExtReal], bool],
    prelude_steps: int,
    per_reward_steps: int,
    trailing_steps: int,
    budget: int = opsem.DEFAULT_BUDGET,
    describe: str = "",
    collect_leaves: Optional[list] = None,
) -> CouplingReport:
    origin = MarkovChain.of_program(origin_prog, origin_state)
    image = MarkovChain.of_program(image_prog, image_state)
    failures: list[str] = []
    pairs = 0
    leaves = 0

    def fail(msg, prob):
        if len(failures) < 10:
            failures.append("%s (path prob %s)%s" % (msg, prob, describe))

    def advance(cfg, cum, steps):
        for _ in range(steps):
            succs = image.step(cfg)
            if len(succs) != 1 or succs[0][0] != ONE:
                raise TransformError("expected a deterministic ghost transition")
            cfg = succs[0][1]
            cum = cum + image.reward(cfg)[0]
        return cfg, cum

    # stack: (origin cfg, image cfg, prob, origin cum, image cum, length)
    i_cfg = image.initial
    i_cum = image.reward(i_cfg)[0]
    i_cfg, i_cum = advance(i_cfg, i_cum, prelude_steps)
    o_cum = tuple(origin.reward(origin.initial))
    stack = [(origin.initial, i_cfg, ONE, o_cum, i_cum, 1)]
    explored = 0
    while stack:
        o_cfg, i_cfg, prob, o_cum, i_cum, length = stack.pop()
        explored += 1
        if explored > budget:
            raise opsem.BudgetExceededError(budget)
        pairs += 1
        if not relation(o_cum, i_cum):
            fail("reward relation violated: origin %s, image %s" % (o_cum, i_cum), prob)
            continue
        if origin.terminated(o_cfg):
            i_end, i_end_cum = advance(i_cfg, i_cum, trailing_steps)
            if not image.terminated(i_end):
                fail("image path did not terminate with the origin", prob)
            elif not relation(o_cum, i_end_cum):
                fail(
                    "final reward relation violated: origin %s, image %s"
                    % (o_cum, i_end_cum),
                    prob,
                )
            leaves += 1
            if collect_leaves is not None:
                collect_leaves.append((prob, o_cum, i_end_cum, True))
            continue
        if length >= depth:
            leaves += 1
            if collect_leaves is not None:
                collect_leaves.append((prob, o_cum, i_cum, False))
            continue
        o_succs = origin.step(o_cfg)
        i_succs = image.step(i_cfg)
        if len(o_succs) != len(i_succs):
            fail("branch shapes differ (%d vs %d successors)" % (len(o_succs), len(i_succs)), prob)
            continue
        if [p for p, _ in o_succs] != [p for p, _ in i_succs]:
            fail(
                "branch probabilities differ: %s vs %s"
                % ([str(p) for p, _ in o_succs], [str(p) for p, _ in i_succs]),
                prob,
            )
            continue
        was_reward = isinstance(o_cfg[0][0], Reward) if o_cfg[0] else False
        for (p, o_next), (_, i_next) in zip(o_succs, i_succs):
            o_cum2 = tuple(a + r for a, r in zip(o_cum, origin.reward(o_next)))
            i_cum2 = i_cum + image.reward(i_next)[0]
            i_next2 = i_next
            if was_reward and per_reward_steps:
                i_next2, i_cum2 = advance(i_next, i_cum2, per_reward_steps)
            stack.append((o_next, i_next2, prob * p, o_cum2, i_cum2, length + 1))
    return CouplingReport(
        passed=not failures,
        pairs_checked=pairs,
        leaves=leaves,
        depth=depth,
        failures=failures,
    )


def _value_relation(f: TransformSpec) -> Callable:
    """Equality of the coupled cumulative rewards: exact for exact
    transforms; float-tainted ones (mgf) telescope only up to rounding."""
    if f.is_exact:
        return lambda o, i: i == f.eval(o)

    def close(o, i):
        expect = f.eval(o)
        if expect.is_infinite or i.is_infinite:
            return expect == i
        a, b = float(i), float(expect)
        return abs(a - b) <= max(1e-9, 1e-9 * abs(b))

    return close


def soundness_check(
    program: Program,
    f: TransformSpec,
    state: State,
    depth: int,
    budget: int = opsem.DEFAULT_BUDGET,
) -> CouplingReport:
    """Per-path, per-depth equality between the transformed program's
    cumulative reward and f of the original's cumulative reward. The same
    relation at terminated leaves is the telescoping identity
    f(0) + sum of increments = f(total reward)."""
    params = {name: state.get(name) for name in _spec_params(f) if name in state}
    f = f.bound(params) if params else f
    info = transform_with_info(program, f)
    return _coupled_walk(
        program,
        info.program,
        state,
        state,
        depth,
        _value_relation(f),
        prelude_steps=f.arity + 1,
        per_reward_steps=f.arity,
        trailing_steps=0,
        budget=budget,
        describe=" [f=%s]" % f.name,
    )


def _spec_params(f: TransformSpec) -> set[str]:
    from .lang import expr_params

    out: set[str] = set()
    expr_params(f.apply_expr(tuple(Var(n) for n in _ARG_NAMES[: f.arity])), out)
    return out


def ghost_bust_check(
    program: Program, alpha, beta, state: State, depth: int
) -> CouplingReport:
    """ghost_bust(S, alpha, beta) and transform(S, linear(alpha, beta)) agree
    with alpha * reward + beta on every coupled path prefix."""
    alpha = alpha if isinstance(alpha, ExtReal) else ExtReal(alpha)
    beta = beta if isinstance(beta, ExtReal) else ExtReal(beta)
    relation = lambda o, i: i == alpha * o[0] + beta
    busted = ghost_bust(program, alpha, beta)
    rep1 = _coupled_walk(
        program, busted, state, state, depth, relation,
        prelude_steps=0 if beta.is_zero else 1,
        per_reward_steps=0,
        trailing_steps=0,
        describe=" [ghost_bust]",
    )
    rep2 = soundness_check(program, linear(alpha, beta), state, depth)
    return CouplingReport(
        passed=rep1.passed and rep2.passed,
        pairs_checked=rep1.pairs_checked + rep2.pairs_checked,
        leaves=rep1.leaves + rep2.leaves,
        depth=depth,
        failures=rep1.failures + rep2.failures,
    )


def compose_check(
    program: Program,
    f: TransformSpec,
    g: TransformSpec,
    depth: int,
    state: State,
    budget: int = opsem.DEFAULT_BUDGET,
) -> CouplingReport:
    """tau' := f(tau); inner_g(inner_f(S)) and inner_{g.f}(S); tau' := f(tau)
    collect identical rewards along coupled paths (composition theorem).

    The state must bind the shared accumulator tau (and tau'); both sides'
    cumulative rewards equal g(f(tau0 + R)) - g(f(tau0)) for origin reward R.
    """
    if f.arity != 1 or g.arity != 1:
        raise TransformError("composition checks need unary transforms")
    tau = fresh_var(program, "tau")
    tau2 = fresh_var(Program(Seq(program.body, Assign(tau, const(0))), program.params), "tau'")
    inner_f = _transform_stmt(program.body, f, (tau,))
    inner_gf = _transform_stmt(inner_f, g, (tau2,))
    gof = compose(g, f)
    inner_gof = _transform_stmt(program.body, gof, (tau,))
    tau_init = Assign(tau2, f.apply_expr((Var(tau),)))
    side_a = Program(Seq(tau_init, inner_gf), program.params, 1)
    side_b = Program(Seq(inner_gof, tau_init), program.params, 1)

    tau0 = state.get(tau) if tau in state else ZERO
    base = g.eval_scalar(f.eval_scalar(tau0))

    def relation(o, i):
        return i == g.eval_scalar(f.eval_scalar(tau0 + o[0])) - base

    st = state if tau in state else state.updated(tau, ZERO)
    st = st if tau2 in st else st.updated(tau2, ZERO)
    leaves_a: list = []
    leaves_b: list = []
    rep_a = _coupled_walk(
        program, side_a, st, st, depth, relation,
        prelude_steps=1, per_reward_steps=2, trailing_steps=0,
        budget=budget, describe=" [g(f) nested]", collect_leaves=leaves_a,
    )
    rep_b = _coupled_walk(
        program, side_b, st, st, depth, relation,
        prelude_steps=0, per_reward_steps=1, trailing_steps=1,
        budget=budget, describe=" [g.f direct]", collect_leaves=leaves_b,
    )
    failures = rep_a.failures + rep_b.failures
    if [l[:3] for l in leaves_a] != [l[:3] for l in leaves_b]:
        failures.append("leaf ensembles of the two sides differ")
    return CouplingReport(
        passed=not failures,
        pairs_checked=rep_a.pairs_checked + rep_b.pairs_checked,
        leaves=rep_a.leaves,
        depth=depth,
        failures=failures,
    )


def monotonicity_check(
    program: Program,
    f: TransformSpec,
    g: TransformSpec,
    depth: int,
    state: State,
    budget: int = opsem.DEFAULT_BUDGET,
) -> CouplingReport:
    """f <= g on every realized cumulative reward implies the transformed
    expected rewards are ordered at every depth. Checked on realized path
    rewards only (pointwise domination over all of the reals is not decided
    here); the per-depth lower bounds L_f(d) <= L_g(d) follow by summation."""
    mc = MarkovChain.of_program(program, state)
    failures: list[str] = []
    pairs = 0
    leaves = 0
    explored = 0
    stack = [(mc.initial, ONE, (ZERO,) * mc.arity, 1)]
    while stack:
        cfg, prob, cum, length = stack.pop()
        explored += 1
        if explored > budget:
            raise opsem.BudgetExceededError(budget)
        cum = tuple(a + r for a, r in zip(cum, mc.reward(cfg)))
        pairs += 1
        if not f.eval(cum) <= g.eval(cum):
            if len(failures) < 10:
                failures.append(
                    "f(%s) = %s exceeds g(%s) = %s on a realized reward"
                    % (cum, f.eval(cum), cum, g.eval(cum))
                )
        if mc.terminated(cfg) or length >= depth:
            leaves += 1
            continue
        for p, nxt in mc.step(cfg):
            stack.append((nxt, prob * p, cum, length + 1))
    return CouplingReport(
        passed=not failures,
        pairs_checked=pairs,
        leaves=leaves,
        depth=depth,
        failures=failures,
    )


def _fold_prefix(body: Stmt) -> Stmt:
    """Constant propagation along the maximal straight-line prefix, dropping
    zero rewards and assignments that are dead within the prefix."""
    from .expectation import substitute
    from .lang import expr_vars

    stmts = _stmt_list(body)
    known: dict[str, Expr] = {}
    prefix: list[Stmt] = []
    i = 0
    while i < len(stmts):
        s = stmts[i]
        if isinstance(s, Assign):
            rhs = s.expr
            for name, val in known.items():
                rhs = substitute(rhs, name, val)
            rhs = simplify(rhs)
            if isinstance(rhs, Const):
                known[s.var] = rhs
            else:
                known.pop(s.var, None)
            prefix.append(Assign(s.var, rhs))
        elif isinstance(s, Reward):
            args = []
            for a in s.args:
                for name, val in known.items():
                    a = substitute(a, name, val)
                args.append(simplify(a))
            if not all(isinstance(a, Const) and a.value.is_zero for a in args):
                prefix.append(Reward(tuple(args)))
        elif isinstance(s, Skip):
            pass
        else:
            break
        i += 1
    rest = stmts[i:]

    # an assignment overwritten later in the prefix with no read in between
    # is dead (the rest of the program only sees the overwriting value)
    pruned: list[Stmt] = []
    for j, s in enumerate(prefix):
        if isinstance(s, Assign):
            dead = False
            for later in prefix[j + 1:]:
                used: set = set()
                if isinstance(later, Assign):
                    expr_vars(later.expr, used)
                    if s.var in used:
                        break
                    if later.var == s.var:
                        dead = True
                        break
                else:  # Reward
                    for a in later.args:
                        expr_vars(a, used)
                    if s.var in used:
                        break
            if dead:
                continue
        pruned.append(s)
    return seq(*(pruned + rest)) if (pruned or rest) else Skip()
