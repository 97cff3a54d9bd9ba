import random
from fractions import Fraction

import pytest

from rewlab.extreal import ExtReal, INF
from rewlab.lang import (
    Assign, Const, ParseError, Prob, Reward, Seq, Skip,
    State, While, free_vars, fresh_var, parse, parse_expr, pretty_print,
)
from rewlab.expectation import evaluate
from rewlab.randprog import random_program
from tests.conftest import FIXTURES

WEBSERVER_A = """
done := 0;
while not (done = 1) {
    reward(1);
    { done := 1 } [1/2] { skip }
}
"""


def test_parse_webserver_a_shape():
    program = parse(WEBSERVER_A)
    stmts = program.body
    assert isinstance(stmts, Seq)
    init, loop = stmts.first, stmts.second
    assert init == Assign("done", Const(ExtReal(0)))
    assert isinstance(loop, While)
    body = loop.body
    assert isinstance(body, Seq)
    assert body.first == Reward((Const(ExtReal(1)),))
    assert isinstance(body.second, Prob)
    assert body.second.prob == Const(ExtReal(Fraction(1, 2)))


def test_parse_skip():
    program = parse("skip")
    assert program.body == Skip()


def test_reward_arity_mismatch_is_an_error():
    with pytest.raises(ParseError) as err:
        parse("reward(1, 2); reward(3)")
    assert "arity" in str(err.value)


def test_probability_literal_out_of_range():
    with pytest.raises(ParseError):
        parse("{ skip } [3/2] { skip }")


def test_parse_error_carries_location():
    with pytest.raises(ParseError) as err:
        parse("done := ;")
    assert err.value.line == 1
    assert err.value.col >= 9


def test_division_by_variable_rejected():
    with pytest.raises(ParseError):
        parse("x := 1 / y")
    # constant and parameter denominators are fine
    parse("param p\nx := 1 / p")


def test_assignment_to_parameter_rejected():
    with pytest.raises(ParseError):
        parse("param N\nN := 3")


def test_true_false_sugar():
    program = parse("done := false; done := true")
    assert program.body == Seq(
        Assign("done", Const(ExtReal(0))), Assign("done", Const(ExtReal(1)))
    )


def test_roundtrip_webserver():
    program = parse(WEBSERVER_A)
    text = pretty_print(program)
    assert parse(text) == program


@pytest.mark.parametrize("name", sorted(p.name for p in FIXTURES.glob("*.pgcl")))
def test_roundtrip_fixture_corpus(name):
    program = parse((FIXTURES / name).read_text())
    text = pretty_print(program)
    again = parse(text)
    assert again == program
    # print . parse . print is a fixpoint
    assert pretty_print(again) == text


def test_roundtrip_random_programs():
    rng = random.Random(7)
    for _ in range(60):
        program = random_program(rng, size=3, depth=2)
        assert parse(pretty_print(program)) == program


def test_empty_while_body_prints_as_skip():
    program = parse("while x > 0 { skip }")
    assert "while x > 0 {\n    skip\n}" in pretty_print(program)


def test_free_vars_and_fresh_var():
    program = parse(WEBSERVER_A)
    assert free_vars(program) == {"done"}
    assert fresh_var(program, "tau") == "tau"
    extended = parse("tau := 1; " + WEBSERVER_A)
    assert fresh_var(extended, "tau") == "tau'"
    assert fresh_var(parse("tau := 1; tau' := 2"), "tau") == "tau''"


def test_fresh_var_avoids_params():
    program = parse("param tau\nskip")
    assert fresh_var(program, "tau") == "tau'"


def test_negated_guard_matches_zero_test():
    # `not (done = 1)` and `done = 0` agree on 0/1-valued states
    a = parse_expr("[not (done = 1)]")
    b = parse_expr("[done = 0]")
    for v in (0, 1):
        st = State(done=v)
        assert evaluate(a, st) == evaluate(b, st)


def test_infinity_literal():
    assert evaluate(parse_expr("inf"), State()) == INF


def test_invariant_annotation_roundtrip():
    src = "while x > 0 invariant [x > 0] * (2 * x) { x := x - 1 }"
    program = parse(src)
    loop = program.body
    assert isinstance(loop, While)
    assert loop.invariant is not None
    assert parse(pretty_print(program)) == program


def test_param_ranges():
    program = parse("param p : [0, 1]\nparam N : 0..6\nskip")
    decls = {d.name: d for d in program.params}
    assert decls["p"].lo == ExtReal(0) and decls["p"].hi == ExtReal(1)
    assert decls["N"].integer


def test_prime_identifiers_lex():
    program = parse("tau' := 1; tau'' := tau'")
    assert free_vars(program) == {"tau'", "tau''"}


def test_boolean_operator_precedence():
    # `or` binds weaker than `and`, which binds weaker than `not`
    from rewlab.lang import And, Or, Not, Cmp
    from rewlab.lang import parse_bexpr

    b = parse_bexpr("x = 1 or y = 2 and not (z = 3)")
    assert isinstance(b, Or)
    assert isinstance(b.right, And)
    assert isinstance(b.right.right, Not)
    grouped = parse_bexpr("(x = 1 or y = 2) and z = 3")
    assert isinstance(grouped, And)
    assert isinstance(grouped.left, Or)


def test_roundtrip_with_all_constructs():
    src = """
param p : [0, 1]
param N : 0..9

x := 0;
reward([x = 0 or x >= 2 and not (y = 1)] * min(x + 1, max(y, 2)));
if x < 1 and (y = 0 or y = 1) {
    { x := (1/2) ^ (N - x) } [p] { skip }
} else {
    while x > 0 invariant exp(1/2, x) + 2 * x ^ 3 - 1/4 {
        reward(1);
        x := x - 1
    }
};
y := x / 2 + N
"""
    program = parse(src)
    text = pretty_print(program)
    assert parse(text) == program
    assert pretty_print(parse(text)) == text
