from __future__ import annotations

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncaudit.auditor import (
    Condition,
    RuleError,
    RuleSyntaxError,
    apply_ruleset,
    distance_profile,
    format_ruleset,
    judgment,
    load_ruleset,
    parse_ruleset,
    shipped_ruleset,
)
from ncaudit.tabular import Schema, from_frame, one_hot

CREDIT = """
output credit in {1, 2}
when savings > 500 and credit_history = Paid and employment > 2 -> 1
otherwise -> 2
"""


def test_parse_credit():
    rs = parse_ruleset(CREDIT)
    assert rs.output == "credit"
    assert rs.domain == (1, 2)
    assert len(rs.rules) == 1
    assert rs.default == 2
    assert rs.rules[0].conditions == (
        Condition("savings", ">", 500), Condition("credit_history", "=", "Paid"),
        Condition("employment", ">", 2))


def test_missing_default():
    with pytest.raises(RuleSyntaxError, match="missing default"):
        parse_ruleset("output y in {0, 1}\nwhen a = 1 -> 1\n")


@pytest.mark.parametrize("text, line", [
    ("when a = 1 -> 1\notherwise -> 0", 1),
    ("output y in {0, 1}\nwhen a ~ 1 -> 1\notherwise -> 0", 2),
    ("output y in {0, 1}\nwhen a = 1 -> 5\notherwise -> 0", 2),
    ("output y in {0, 1}\nwhen a = 1 1\notherwise -> 0", 2),
    ("output y in {0, 1}\notherwise -> 0\nwhen a = 1 -> 1", 3),
    ("output y in {0, 1}\nwhen a in [3, 1] -> 1\notherwise -> 0", 2),
    ("output y in {0, 1}\nwhen a < low -> 1\notherwise -> 0", 2),
])
def test_syntax_errors_carry_line(text, line):
    with pytest.raises(RuleSyntaxError) as info:
        parse_ruleset(text)
    assert info.value.line == line


def test_unknown_column():
    with pytest.raises(RuleSyntaxError, match="unknown column 'savings'"):
        parse_ruleset(CREDIT, columns=["credit_history", "employment"])


def test_adult_in_set():
    rs = shipped_ruleset("adult")
    (cond,) = rs.rules[0].conditions
    assert cond.op == "in-set"
    assert len(cond.operand) == 4
    assert "Bachelors" in cond.operand and "Doctorate" in cond.operand


def test_shipped_rules_parse():
    for name in ("compas", "compas-decile", "adult", "german"):
        rs = shipped_ruleset(name)
        assert rs.default in rs.domain
    assert shipped_ruleset("compas-decile").domain == tuple(range(1, 11))


def credit_rows(rows):
    frame = pd.DataFrame(rows, columns=["savings", "credit_history", "employment"])
    schema = Schema((("savings", "numeric"), ("credit_history", "categorical"), ("employment", "numeric")))
    return from_frame(frame, schema)


def test_apply_credit():
    ds = credit_rows([(800, "Paid", 4), (100, "Paid", 4), (800, "Delay", 4), (501, "Paid", 2)])
    assert apply_ruleset(parse_ruleset(CREDIT), ds).tolist() == [1, 2, 2, 2]


def test_apply_compas_binary_rule():
    frame = pd.DataFrame({"priors_count": [2, 2, 5, 0], "c_charge_degree": ["F", "M", "M", "F"]})
    schema = Schema((("priors_count", "numeric"), ("c_charge_degree", "categorical")))
    ds = one_hot(from_frame(frame, schema), ["c_charge_degree"])
    assert apply_ruleset(shipped_ruleset("compas"), ds).tolist() == [1, 0, 1, 0]


def test_first_match_wins():
    rs = parse_ruleset("output y in {a, b, c}\nwhen x >= 1 -> a\nwhen x >= 0 -> b\notherwise -> c")
    assert apply_ruleset(rs, {"x": np.array([2, 0, -1])}).tolist() == ["a", "b", "c"]


def test_in_range_inclusive():
    rs = parse_ruleset("output y in {0, 1}\nwhen x in [1, 3] -> 1\notherwise -> 0")
    assert apply_ruleset(rs, {"x": np.array([0, 1, 3, 4])}).tolist() == [0, 1, 1, 0]


def test_missing_column_before_evaluation():
    with pytest.raises(RuleError, match="savings"):
        apply_ruleset(parse_ruleset(CREDIT), {"employment": np.array([1])})


def test_ordering_on_categorical_rejected():
    ds = credit_rows([(1, "Paid", 1)])
    rs = parse_ruleset("output y in {0, 1}\nwhen credit_history > 2 -> 1\notherwise -> 0")
    with pytest.raises(RuleError, match="numeric"):
        apply_ruleset(rs, ds)


def test_load_ruleset_file(tmp_path):
    path = tmp_path / "f.rules"
    path.write_text(CREDIT)
    assert load_ruleset(path) == parse_ruleset(CREDIT)


cond_st = st.one_of(
    st.builds(lambda op, v: f"x {op} {v}", st.sampled_from(["=", "<", ">", "<=", ">="]), st.integers(-3, 3)),
    st.builds(lambda a, b: f"x in [{min(a, b)}, {max(a, b)}]", st.integers(-3, 3), st.integers(-3, 3)),
    st.builds(lambda vs: "x in {" + ", ".join(map(str, vs)) + "}", st.lists(st.integers(-3, 3), min_size=1, max_size=3)),
)
rule_st = st.lists(st.tuples(st.lists(cond_st, min_size=1, max_size=2), st.integers(0, 2)), max_size=4)


def build(rules, default):
    lines = ["output y in {0, 1, 2}"]
    lines += [f"when {' and '.join(conds)} -> {label}" for conds, label in rules]
    lines.append(f"otherwise -> {default}")
    return "\n".join(lines)


@settings(max_examples=100, deadline=None)
@given(rule_st, st.integers(0, 2), st.lists(st.integers(-4, 4), min_size=1, max_size=30))
def test_total_deterministic_and_roundtrip(rules, default, xs):
    rs = parse_ruleset(build(rules, default))
    data = {"x": np.array(xs)}
    out = apply_ruleset(rs, data)
    assert len(out) == len(xs)
    assert set(out.tolist()) <= {0, 1, 2}
    assert apply_ruleset(rs, data).tolist() == out.tolist()
    again = parse_ruleset(format_ruleset(rs))
    assert again == rs
    assert apply_ruleset(again, data).tolist() == out.tolist()


def test_shipped_roundtrip():
    for name in ("compas", "compas-decile", "adult", "german"):
        rs = shipped_ruleset(name)
        assert parse_ruleset(format_ruleset(rs)) == rs


# noncomparative profile and judgment


def test_profile_identical():
    prof = distance_profile([1, 2, 3], [1, 2, 3], 0.5)
    assert prof.nc_fair and prof.max_distance == 0


def test_profile_binary_one_flip():
    prof = distance_profile([0, 1, 1], [0, 1, 0], 1)
    assert not prof.nc_fair
    assert prof.judgments.tolist() == [0, 0, 1]


def test_profile_decile_gap_three():
    prof = distance_profile([1, 5, 10], [4, 5, 9], 4)
    assert prof.nc_fair and prof.max_distance == 3


def test_profile_errors():
    with pytest.raises(ValueError):
        distance_profile([1], [1, 2], 1)
    with pytest.raises(ValueError):
        distance_profile([1], [1], 0)


@pytest.mark.parametrize("g, f, eps, s", [(1, 1, 1, 0), (0, 1, 1, 1), (5, 3, 4, 0)])
def test_judgment(g, f, eps, s):
    assert judgment(g, f, eps) == s


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10), st.integers(0, 10), st.fractions(min_value=0, max_value=12),
       st.fractions(min_value=0, max_value=12))
def test_judgment_monotone_in_epsilon(g, f, e1, e2):
    lo, hi = sorted((e1, e2))
    if lo > 0:
        assert judgment(g, f, hi) <= judgment(g, f, lo)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=1, max_size=30),
       st.integers(1, 10))
def test_profile_consistent_with_judgments(pairs, eps):
    g, f = zip(*pairs)
    prof = distance_profile(g, f, eps)
    assert prof.nc_fair == all(judgment(a, b, eps) == 0 for a, b in pairs)


# real data


def test_compas_relations_total(compas, compas_decile):
    f = apply_ruleset(shipped_ruleset("compas"), compas)
    assert set(f.tolist()) <= {0, 1}
    d = apply_ruleset(shipped_ruleset("compas-decile"), compas_decile)
    assert set(d.tolist()) <= set(range(1, 11))
    assert len(d) == 5278


def test_german_relation(german):
    f = apply_ruleset(shipped_ruleset("german"), german)
    sav, emp, hist = (np.asarray(german.values(c)) for c in ("savings", "employment", "credit_history"))
    expected = np.where((sav > 500) & (hist == "Paid") & (emp > 2), 1, 2)
    assert f.tolist() == expected.tolist()
