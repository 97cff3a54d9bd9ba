import random
from fractions import Fraction

import pytest

from rewlab.extreal import ExtReal, ZERO
from rewlab.lang import Add, Mul, State, While, const, parse, parse_expr
from rewlab.expectation import evaluate, leq_on_grid, parse_grid, simplify
from rewlab.wpcalc import (
    LoopWithoutInvariantError, check_bound, check_invariant, check_program,
    ert_equivalence_check, ert_kleene, kleene_iterates, unsound_counter_demo,
    wp_numeric, wp_symbolic,
)
from rewlab.randprog import (
    random_expectation, random_loop, random_program, random_state,
)


def F(n, d=1):
    return ExtReal(Fraction(n, d))


# ---------------------------------------------------------------------------
# wp_symbolic structure
# ---------------------------------------------------------------------------


def test_wp_skip_is_identity():
    X = parse_expr("x + 1")
    assert wp_symbolic(parse("skip").body, X) == X


def test_wp_reward_adds():
    X = parse_expr("x")
    pre = wp_symbolic(parse("reward(3); x := 2").body, X)
    assert evaluate(pre, State(x=99)) == F(5)


def test_wp_of_transformed_reward_statement():
    # wp of `reward(f(tau+a) - f(tau)); tau := tau + a` with post X is
    # f(tau+a) - f(tau) + X[tau/tau+a]
    inner = parse("reward((tau + 1) ^ 2 - tau ^ 2); tau := tau + 1").body
    X = parse_expr("[not (done = 1)] * (4 * tau + 6)")
    pre = wp_symbolic(inner, X)
    rng = random.Random(3)
    expected = parse_expr(
        "((tau + 1) ^ 2 - tau ^ 2) + [not (done = 1)] * (4 * (tau + 1) + 6)"
    )
    for _ in range(50):
        st = random_state(rng).updated("tau", F(rng.randrange(20))).updated(
            "done", F(rng.randrange(2))
        )
        assert evaluate(pre, st) == evaluate(expected, st)


def test_wp_rejects_bare_loops():
    with pytest.raises(LoopWithoutInvariantError):
        wp_symbolic(parse("while x > 0 { x := x - 1 }").body, parse_expr("0"))


def test_wp_numeric_loop_free_exact():
    prog = parse("reward(3); x := 2")
    for x0 in (0, 7):
        bracket = wp_numeric(prog, parse_expr("x"), State(x=x0), depth=10)
        assert bracket.lower == F(5)
        assert bracket.upper == F(5)


def test_loop_free_agreement_with_operational_semantics():
    # 200 random loop-free programs: symbolic wp equals the exact numeric
    # value once every path is absorbed
    rng = random.Random(29)
    for _ in range(200):
        prog = random_program(rng, size=2, depth=2, allow_loops=False)
        X = random_expectation(rng)
        pre = wp_symbolic(prog.body, X)
        st = random_state(rng)
        bracket = wp_numeric(prog, X, st, depth=64)
        assert bracket.unabsorbed_mass == ZERO
        assert evaluate(pre, st) == bracket.lower


def test_wp_monotonicity_healthiness():
    rng = random.Random(31)
    grid = parse_grid("x=0..3,y=0..3,z=0..2")
    for _ in range(100):
        prog = random_program(rng, size=2, depth=2, allow_loops=False)
        X = random_expectation(rng)
        Y = simplify(Add(X, random_expectation(rng)))  # X <= Y pointwise
        pre_x = wp_symbolic(prog.body, X)
        pre_y = wp_symbolic(prog.body, Y)
        assert leq_on_grid(pre_x, pre_y, grid).passed


def test_wp_linearity_for_reward_free_programs():
    rng = random.Random(37)
    for _ in range(100):
        prog = random_program(rng, size=2, depth=2, allow_loops=False, allow_rewards=False)
        X = random_expectation(rng)
        Y = random_expectation(rng)
        a = const(ExtReal(rng.choice([0, 1, 2, Fraction(1, 2)])))
        combined = wp_symbolic(prog.body, simplify(Add(Mul(a, X), Y)))
        split = simplify(
            Add(Mul(a, wp_symbolic(prog.body, X)), wp_symbolic(prog.body, Y))
        )
        for _ in range(5):
            st = random_state(rng)
            assert evaluate(combined, st) == evaluate(split, st)


# ---------------------------------------------------------------------------
# Kleene iterates
# ---------------------------------------------------------------------------


def fig6a_loop():
    prog = parse(
        "while not (done = 1) { reward(2 * tau + 1); tau := tau + 1;"
        " { done := 1 } [1/2] { skip } }"
    )
    return prog.body


def test_kleene_iterates_squared_webserver():
    values = kleene_iterates(fig6a_loop(), parse_expr("0"), State(done=0, tau=0), 4)
    assert values == [ZERO, F(1), F(5, 2), F(15, 4), F(37, 8)]


def test_kleene_guard_false_state():
    X = parse_expr("5 * tau")
    values = kleene_iterates(fig6a_loop(), X, State(done=1, tau=3), 4)
    assert values[0] == ZERO
    assert values[1:] == [F(15)] * 4


def test_kleene_iterates_match_closed_form():
    # Phi_0^n(0) = [not done] * (1/2^(n-1)) * ((2^(n+1) - 2) tau + 3 (2^n - 1) - 2 n)
    loop = fig6a_loop()
    for tau0 in (0, 1, 5):
        for done0 in (0, 1):
            values = kleene_iterates(loop, parse_expr("0"), State(done=done0, tau=tau0), 8)
            for n in range(1, 9):
                if done0 == 1:
                    expected = Fraction(0)
                else:
                    expected = Fraction(
                        (2 ** (n + 1) - 2) * tau0 + 3 * (2**n - 1) - 2 * n, 2 ** (n - 1)
                    )
                assert values[n] == ExtReal(expected), (tau0, done0, n)


def test_kleene_monotone_on_random_loops():
    rng = random.Random(41)
    for _ in range(100):
        loop = random_loop(rng, reward_free=False)
        X = random_expectation(rng, depth=1)
        st = random_state(rng)
        values = kleene_iterates(loop, X, st, 6)
        assert all(a <= b for a, b in zip(values, values[1:]))


def test_kleene_converges_to_webserver_value(webserver_a):
    loop = webserver_a.body.second
    values = kleene_iterates(loop, parse_expr("0"), State(done=0), 60)
    assert abs(float(values[-1]) - 2.0) < 1e-15


def test_kleene_biased_walk_first_moment():
    # expected steps of the biased walk equal the start rounded down to the
    # nearest even number (negative drift of one position per move)
    loop = parse(
        "while x > 1 { reward(1); { x := x - 2 } [3/4] { x := x + 2 } }"
    ).body
    for x0, expected, iterates in ((6, 6, 250), (7, 6, 250), (2, 2, 150), (1, 0, 5)):
        values = kleene_iterates(loop, parse_expr("0"), State(x=x0), iterates)
        assert all(v <= F(expected) for v in values)  # approach from below
        assert abs(float(values[-1]) - expected) < 1e-6, x0


# ---------------------------------------------------------------------------
# Park induction
# ---------------------------------------------------------------------------


def test_check_invariant_fig6a_fixed_point():
    loop = While(
        fig6a_loop().cond,
        fig6a_loop().body,
        parse_expr("[not (done = 1)] * (4 * tau + 6)"),
    )
    report = check_invariant(loop, parse_expr("0"), parse_grid("done=0..1,tau=0..50"))
    assert report.verified
    assert report.fixed_point


def test_check_invariant_fig6b():
    prog = parse(
        "while not (done = 1) invariant [not (done = 1)] * (3 * (tau - 1/2) + 9/2)"
        " { reward(2 * tau + 1); tau := tau + 1; { done := 1 } [2/3] { skip } }"
    )
    halves = "{%s}" % ",".join(str(Fraction(k, 2)) for k in range(0, 101))
    report = check_invariant(
        prog.body, parse_expr("0"), parse_grid("done=0..1,tau=%s" % halves)
    )
    assert report.verified


def test_check_invariant_random_walk_bound():
    prog = parse(
        "tau := 0;"
        " while x > 1 invariant x ^ 2 + 2 * x * tau + 3 * x"
        " { reward(2 * tau + 1); tau := tau + 1; { x := x - 2 } [3/4] { x := x + 2 } }"
    )
    grid = parse_grid("x=0..100,tau=0..100")
    report = check_program(prog, parse_expr("0"), grid)
    assert report.verified
    # the conclusion at tau = 0 is the second-moment bound x^2 + 3x
    bound = report.derived_bound
    for x in (0, 2, 5, 10):
        st = State(x=x, tau=0)
        assert evaluate(bound, st) == F(x * x + 3 * x)


def test_check_invariant_unbound_grid_variable():
    from rewlab.lang import UnboundVariableError

    loop = While(
        fig6a_loop().cond,
        fig6a_loop().body,
        parse_expr("[not (done = 1)] * (4 * tau + 6)"),
    )
    with pytest.raises(UnboundVariableError):
        check_invariant(loop, parse_expr("0"), parse_grid("done=0..1"))  # tau missing


def test_check_invariant_detects_downward_perturbation():
    loop = While(
        fig6a_loop().cond,
        fig6a_loop().body,
        parse_expr("[not (done = 1)] * (4 * tau + 6) - 1/100 * [done = 0 and tau = 3]"),
    )
    report = check_invariant(loop, parse_expr("0"), parse_grid("done=0..1,tau=0..50"))
    assert report.verdict == "violated"
    assert report.counterexamples
    state, phi, inv = report.counterexamples[0]
    assert state.get("tau") == F(3)
    assert phi > inv


def test_check_nested_loops_innermost_out():
    # inner loop drains y collecting one per step; each outer round resets
    # y to 2, so the total from (x, y) with the reset is 2x. The inner
    # obligation is discharged against the post flowing from the outer
    # invariant through `x := x - 1`.
    prog = parse(
        """
        while x > 0 invariant 2 * x {
            y := 2;
            while y > 0 invariant y + 2 * (x - 1) {
                reward(1);
                y := y - 1
            };
            x := x - 1
        }
        """
    )
    grid = parse_grid("x=0..20,y=0..20")
    report = check_program(prog, parse_expr("0"), grid)
    assert report.verified
    assert len(report.obligations) == 2
    # operational cross-check at a concrete start
    bracket = wp_numeric(prog, None, State(x=3, y=0), depth=80)
    assert bracket.lower == F(6)
    assert bracket.unabsorbed_mass == ZERO


def test_check_sequential_loops_compose():
    # two-phase excess program with both loops annotated: the second loop's
    # invariant becomes the first loop's post, and the whole-program bound
    # is the closed form (1 - p)^N / p
    prog = parse(
        """
        param p : [0, 1]
        param N : 0..64
        tau := 0;
        done := 0;
        while done = 0 and tau < N invariant [done = 0] * ((1 - p) ^ (N - tau)) / p {
            tau := tau + 1;
            { done := 1 } [p] { skip }
        };
        while done = 0 invariant [done = 0] * (1 / p) {
            reward(1);
            tau := tau + 1;
            { done := 1 } [p] { skip }
        }
        """
    )
    grid = parse_grid("done=0..1,tau=0..12", params={"p": F(1, 10), "N": F(10)})
    report = check_program(prog, parse_expr("0"), grid)
    assert report.verified
    assert len(report.obligations) == 2
    # conclusion at tau = 0, done = 0: (9/10)^10 / (1/10)
    value = evaluate(report.derived_bound, State(done=0, tau=0, p=F(1, 10), N=F(10)))
    assert value == F(9, 10) ** 10 / F(1, 10)


def test_check_bound_loop_free():
    # wp(reward(3); x := 2)(x) = 3 + 2 = 5 regardless of the initial state
    prog = parse("reward(3); x := 2")
    grid = parse_grid("x=0..5")
    ok = check_bound(prog, parse_expr("5"), parse_expr("x"), grid)
    assert ok.verified
    assert evaluate(ok.derived_bound, State(x=0)) == F(5)
    bad = check_bound(prog, parse_expr("4"), parse_expr("x"), grid)
    assert bad.verdict == "violated"


# ---------------------------------------------------------------------------
# ert cross-check (incremental runtime collection)
# ---------------------------------------------------------------------------


def test_ert_equivalence_webserver(webserver_a):
    loop = webserver_a.body.second
    # strip the reward(1) from the body: ert adds its own +1
    stripped = While(loop.cond, loop.body.second, None)
    report = ert_equivalence_check(stripped, parse_expr("0"), parse_grid("done=0..1"), 40)
    assert report.verified


def test_ert_equivalence_diverging_loop():
    loop = parse("while true { skip }").body
    report = ert_equivalence_check(loop, parse_expr("0"), parse_grid("x=0..0"), 25)
    assert report.verified
    # both sides' iterates grow without bound: iterate k equals k
    values = ert_kleene(loop, parse_expr("0"), State(x=0), 12)
    assert values == [F(k) for k in range(13)]


def test_ert_equivalence_guard_initially_false():
    loop = parse("while x > 5 { x := x + 1 }").body
    X = parse_expr("3 * x")
    report = ert_equivalence_check(loop, X, parse_grid("x=0..5"), 10)
    assert report.verified
    assert ert_kleene(loop, X, State(x=2), 3)[1:] == [F(6)] * 3


def test_ert_equivalence_random_loops():
    rng = random.Random(43)
    for _ in range(50):
        loop = random_loop(rng, reward_free=True)
        X = random_expectation(rng, depth=1)
        report = ert_equivalence_check(loop, X, parse_grid("x=0..2,y=0..2,z=0..2"), 8)
        assert report.verified


# ---------------------------------------------------------------------------
# the counter-variable unsoundness demo
# ---------------------------------------------------------------------------


def test_unsound_counter_demo():
    rows = unsound_counter_demo(depth=240)
    for name in ("counter_on_termination", "squared_counter_on_termination"):
        assert all(value == ZERO for _, value in rows[name])
    growing = rows["incremental_rewards"]
    values = [v for _, v in growing]
    assert values[0] < values[1] < values[2]
    assert values[2] >= F(60)
