import random
from fractions import Fraction

import pytest

from rewlab.extreal import ExtReal, INF, ONE, ZERO
from rewlab.lang import State, free_vars, parse, parse_expr, pretty_print
from rewlab.opsem import MarkovChain, expected_reward
from rewlab.transform import (
    TransformError, cdf, check_monotone_on, compose, compose_check, excess,
    ghost_bust, ghost_bust_check, identity, linear, mgf, moment,
    monotonicity_check, parse_spec, pgf, product, simplify_program,
    soundness_check, transform, transform_with_info,
)
from rewlab.randprog import random_program, random_state
from tests.conftest import load_fixture


def F(n, d=1):
    return ExtReal(Fraction(n, d))


# ---------------------------------------------------------------------------
# the catalog
# ---------------------------------------------------------------------------


def test_catalog_point_evaluation():
    assert moment(2).eval_scalar(3) == F(9)
    assert cdf(parse_expr("3")).eval_scalar(2) == ZERO
    assert cdf(parse_expr("3")).eval_scalar(3) == ONE
    assert excess(parse_expr("2")).eval_scalar(5) == F(3)
    assert linear(2, 3).eval_scalar(4) == F(11)
    assert product(2).eval((F(3), F(5))) == F(15)
    assert mgf(0).eval_scalar(7) == ONE
    assert moment(2).eval_scalar(INF) == INF


def test_catalog_monotone_spot_check():
    samples = [(F(0),), (F(1, 2),), (F(1),), (F(3),), (INF,)]
    for spec in (identity(), moment(2), moment(3), cdf(parse_expr("2")),
                 excess(parse_expr("2")), mgf(Fraction(1, 2)), linear(2, 1)):
        assert check_monotone_on(spec, samples)


def test_pgf_rejected():
    with pytest.raises(TransformError, match="not monotone"):
        pgf(Fraction(1, 2))
    with pytest.raises(TransformError):
        parse_spec("pgf:1/2")


def test_parse_spec_roundtrip():
    assert parse_spec("moment:2").name == "moment:2"
    assert parse_spec("cdf:N", params={"N"}).name == "cdf"
    assert parse_spec("excess:N", params={"N"}).name == "excess"
    assert parse_spec("mgf:0.5").name == "mgf:1/2"
    assert parse_spec("linear:2,3").eval_scalar(1) == F(5)
    assert parse_spec("product").arity == 2
    with pytest.raises(TransformError):
        parse_spec("nope:1")


def test_mgf_negative_rate_rejected():
    with pytest.raises(Exception):
        mgf(-1)


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------


def test_transform_webserver_a_matches_squared_form(webserver_a):
    out = simplify_program(transform(webserver_a, moment(2)))
    expected = parse(
        """
        tau := 0;
        done := 0;
        while not (done = 1) {
            reward(2 * tau + 1);
            tau := tau + 1;
            { done := 1 } [1/2] { skip }
        }
        """
    )
    assert out == expected


def test_transform_webserver_b_folds_prefix(webserver_b):
    out = simplify_program(transform(webserver_b, moment(2)))
    expected = parse(
        """
        reward(1/4);
        tau := 1/2;
        done := 0;
        while not (done = 1) {
            reward(2 * tau + 1);
            tau := tau + 1;
            { done := 1 } [2/3] { skip }
        }
        """
    )
    assert out == expected


def test_transform_skip():
    out = transform(parse("skip"), moment(2))
    assert out == parse("tau := 0; reward(0); skip")


def test_transform_cdf_simplifies_to_equality_guard(webserver_a):
    out = simplify_program(transform(webserver_a, parse_spec("cdf:N", params={"N"})))
    text = pretty_print(out)
    assert "reward([0 >= N])" in text
    assert "reward([tau + 1 = N])" in text


def test_transform_excess_simplifies_to_threshold_guard(webserver_a):
    out = simplify_program(transform(webserver_a, parse_spec("excess:N", params={"N"})))
    text = pretty_print(out)
    assert "reward([tau >= N])" in text
    assert "reward(0 - N)" not in text  # 0 - N folds away


def test_transform_arity_mismatch():
    multi = load_fixture("multireward_cost.pgcl")
    with pytest.raises(TransformError):
        transform(multi, moment(2))


def test_transform_freshness_and_reparse():
    # a program already using tau gets tau'
    prog = parse("tau := 5; reward(tau)")
    info = transform_with_info(prog, moment(2))
    assert info.ghost_vars == ("tau'",)
    assert "tau'" in free_vars(info.program)
    assert parse(pretty_print(info.program)) == info.program


def test_transform_multi_reward():
    multi = load_fixture("multireward_cost.pgcl")
    info = transform_with_info(multi, product(2))
    assert info.ghost_vars == ("tau1", "tau2")
    assert info.program.reward_arity == 1
    assert parse(pretty_print(info.program)) == info.program


# ---------------------------------------------------------------------------
# soundness / telescoping couplings
# ---------------------------------------------------------------------------

CATALOG = [
    ("moment:2", lambda: moment(2)),
    ("moment:3", lambda: moment(3)),
    ("cdf:3", lambda: cdf(parse_expr("3"))),
    ("excess:2", lambda: excess(parse_expr("2"))),
    ("linear:2,1", lambda: linear(2, 1)),
]


@pytest.mark.parametrize("name,make", CATALOG)
def test_soundness_coupling_webserver(webserver_a, name, make):
    report = soundness_check(webserver_a, make(), State(done=0), depth=40)
    assert report.passed, report.failures


@pytest.mark.parametrize("name,make", CATALOG)
def test_soundness_coupling_random_programs(name, make):
    rng = random.Random(47)
    for _ in range(25):
        prog = random_program(rng, size=2, depth=2)
        report = soundness_check(prog, make(), random_state(rng), depth=16)
        assert report.passed, report.failures


def test_soundness_coupling_mgf(webserver_a):
    # float increments: telescoping still holds because each aligned value
    # is computed by the same float operations
    report = soundness_check(webserver_a, mgf(Fraction(1, 2)), State(done=0), depth=20)
    assert report.passed, report.failures


def test_telescoping_with_infinite_reward():
    prog = parse("reward(inf); reward(1); x := 0")
    report = soundness_check(prog, moment(2), State(x=0), depth=12)
    assert report.passed, report.failures


def test_soundness_multi_reward():
    multi = load_fixture("multireward_cost.pgcl")
    st = State(p=F(1, 2), q=F(1, 3))
    report = soundness_check(multi, product(2), st, depth=16)
    assert report.passed, report.failures


# ---------------------------------------------------------------------------
# ghost buster
# ---------------------------------------------------------------------------


def test_ghost_bust_identity_is_identity(webserver_a):
    assert ghost_bust(webserver_a, 1, 0) == webserver_a


def test_ghost_bust_rewrites_rewards(webserver_a):
    out = ghost_bust(webserver_a, 2, 3)
    text = pretty_print(out)
    assert text.startswith("reward(3);")
    assert "reward(2)" in text  # 2 * 1 folded


def test_ghost_bust_expected_value(webserver_a):
    # linearity: alpha * E + beta = 2 * 2 + 3 = 7
    out = ghost_bust(webserver_a, 2, 3)
    bracket = expected_reward(MarkovChain.of_program(out, State(done=0)), 300)
    assert abs(float(bracket.lower) - 7.0) < 1e-12


def test_ghost_bust_agrees_with_full_transform(webserver_a):
    report = ghost_bust_check(webserver_a, 2, 3, State(done=0), depth=30)
    assert report.passed, report.failures
    rng = random.Random(53)
    for _ in range(10):
        prog = random_program(rng, size=2, depth=2)
        report = ghost_bust_check(prog, Fraction(1, 2), 1, random_state(rng), depth=14)
        assert report.passed, report.failures


# ---------------------------------------------------------------------------
# composition
# ---------------------------------------------------------------------------


def test_compose_spec_pointwise():
    gf = compose(moment(2), linear(1, 1))
    assert gf.eval_scalar(3) == F(16)  # (3 + 1)^2


def test_compose_check_identity(webserver_a):
    report = compose_check(webserver_a, identity(), identity(), 24, State(done=0))
    assert report.passed, report.failures


def test_compose_check_square_after_shift(webserver_a):
    report = compose_check(webserver_a, linear(1, 1), moment(2), 24, State(done=0))
    assert report.passed, report.failures


def test_compose_check_square_then_identity(webserver_a):
    report = compose_check(webserver_a, moment(2), identity(), 24, State(done=0))
    assert report.passed, report.failures


def test_compose_check_random_programs():
    rng = random.Random(59)
    for _ in range(10):
        prog = random_program(rng, size=2, depth=1)
        report = compose_check(prog, linear(2, 0), moment(2), 14, random_state(rng))
        assert report.passed, report.failures


# ---------------------------------------------------------------------------
# monotonicity
# ---------------------------------------------------------------------------


def test_monotonicity_identity_vs_square(webserver_a):
    # realized rewards are naturals, where x <= x^2
    report = monotonicity_check(webserver_a, identity(), moment(2), 30, State(done=0))
    assert report.passed, report.failures


def test_monotonicity_excess_vs_identity(webserver_a):
    report = monotonicity_check(
        webserver_a, excess(parse_expr("4")), identity(), 30, State(done=0)
    )
    assert report.passed, report.failures


def test_monotonicity_equal_specs(webserver_a):
    report = monotonicity_check(webserver_a, moment(2), moment(2), 20, State(done=0))
    assert report.passed


def test_monotonicity_violation_detected(webserver_a):
    # g < f on realized rewards: flagged
    report = monotonicity_check(webserver_a, moment(2), identity(), 30, State(done=0))
    assert not report.passed


def test_monotonicity_implies_ordered_lower_bounds(webserver_a):
    mc = MarkovChain.of_program(webserver_a, State(done=0))
    f, g = excess(parse_expr("2")), identity()
    for depth in range(1, 25):
        lf = expected_reward(mc, depth, f=f).lower
        lg = expected_reward(mc, depth, f=g).lower
        assert lf <= lg
