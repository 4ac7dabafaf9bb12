import random

import pytest
from hypothesis import given, strategies as st

from atmocat.cql import (
    And, AnyTextLike, BboxIntersects, Comparison, Like, Not, Or, evaluate, parse_cql, to_cql,
)
from atmocat.errors import CqlSyntaxError
from cqlgen import random_expr, random_record
from oracles import cql_oracle


def test_like_example():
    assert parse_cql("title LIKE '%SST%'") == Like("title", "%SST%")


def test_precedence_example():
    assert parse_cql("a = '1' AND (b = '2' OR NOT c = '3')") == And(
        Comparison("a", "=", "1"),
        Or(Comparison("b", "=", "2"), Not(Comparison("c", "=", "3"))))


def test_and_binds_tighter_than_or():
    assert parse_cql("a = 1 OR b = 2 AND c = 3") == Or(
        Comparison("a", "=", 1), And(Comparison("b", "=", 2), Comparison("c", "=", 3)))


def test_left_associative():
    assert parse_cql("a = 1 AND b = 2 AND c = 3") == And(
        And(Comparison("a", "=", 1), Comparison("b", "=", 2)), Comparison("c", "=", 3))


def test_keywords_case_insensitive_and_literals():
    assert parse_cql("anytext like 'it''s' or not bbox(-1, -2.5, 3, 4)") == Or(
        AnyTextLike("it's"), Not(BboxIntersects(-1, -2.5, 3, 4)))
    assert parse_cql("score >= -0.25") == Comparison("score", ">=", -0.25)


@pytest.mark.parametrize("text, position", [
    ("title LIKE", 10),
    ("", 0),
    ("title = ", 8),
    ("(a = 1", 6),
    ("a = 1 b", 6),
    ("a ! 1", 2),
    ("a LIKE 5", 7),
    ("BBOX(1,2,3)", 10),
    ("a = 'open", 4),
])
def test_syntax_errors_carry_position(text, position):
    with pytest.raises(CqlSyntaxError) as info:
        parse_cql(text)
    assert info.value.position == position


def test_evaluation_examples():
    assert evaluate(parse_cql("title LIKE '%sst%'"), {"title": "Sea Surface Temperature (SST)"})
    assert evaluate(BboxIntersects(0, 0, 10, 10), {"bbox": (10, 10, 20, 20)})
    assert not evaluate(BboxIntersects(0, 0, 10, 10), {"bbox": (10.5, 10, 20, 20)})
    assert not evaluate(parse_cql("nope = 1"), {"title": "x"})
    assert evaluate(parse_cql("NOT nope = 1"), {"title": "x"})


def test_numeric_versus_text_comparison():
    rec = {"n": "10", "v": "1.3.0"}
    assert evaluate(parse_cql("n > 9"), rec)  # numeric
    assert not evaluate(parse_cql("n > '9'"), {"n": "10x"})  # text: '1' < '9'
    assert evaluate(parse_cql("v > '1.10.0'"), rec)  # text: '3' > '1'
    assert evaluate(parse_cql("title = 'SEA'"), {"title": "sea"})


def test_list_values_match_any_element():
    rec = {"formats": ["image/png", "image/jpeg"]}
    assert evaluate(parse_cql("formats = 'IMAGE/JPEG'"), rec)
    assert not evaluate(parse_cql("formats = 'text/xml'"), rec)


def test_like_wildcards_are_anchored():
    assert evaluate(Like("t", "s_a"), {"t": "sea"})
    assert not evaluate(Like("t", "se"), {"t": "sea"})
    assert evaluate(Like("t", "a.b%"), {"t": "a.b(c"})
    assert not evaluate(Like("t", "a.b"), {"t": "axb"})


def test_random_expressions_match_oracle_and_round_trip():
    rng = random.Random(20240611)
    for _ in range(300):
        expr, tree = random_expr(rng)
        assert parse_cql(to_cql(expr)) == expr
        for _ in range(3):
            rec = random_record(rng)
            assert evaluate(expr, rec) == cql_oracle(tree, rec)


@given(st.integers(0, 2**32))
def test_negation_and_de_morgan(seed):
    rng = random.Random(seed)
    (a, _), (b, _) = random_expr(rng, 3), random_expr(rng, 3)
    rec = random_record(rng)
    assert evaluate(Not(a), rec) == (not evaluate(a, rec))
    assert evaluate(Not(And(a, b)), rec) == evaluate(Or(Not(a), Not(b)), rec)
    assert evaluate(And(a, b), rec) == evaluate(And(b, a), rec)


@given(st.text(max_size=40))
def test_parser_is_total(text):
    try:
        expr = parse_cql(text)
    except CqlSyntaxError as exc:
        assert 0 <= exc.position <= len(text)
    else:
        assert parse_cql(to_cql(expr)) == expr
