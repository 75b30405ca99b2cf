from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncaudit.auditor import apply_ruleset, shipped_ruleset
from ncaudit.metrics import (
    CovarianceModel,
    InsufficientDataError,
    UndefinedRateError,
    calibration_difference,
    covariance,
    equal_opportunity_difference,
    exact_difference,
    mahalanobis,
    max_pairwise_distance,
    metric_report,
    pairwise_if_scan,
    satisfies_coarse,
    statistical_parity_difference,
)

NOTIONS = ("statistical_parity", "equal_opportunity", "calibration")


def naive_difference(pred, labels, groups, privileged, fav, notion):
    """Direct per-row counting, written independently of the library."""
    def rate(in_group):
        num = den = 0
        for p, y, g in zip(pred, labels, groups):
            if (g == privileged) != in_group:
                continue
            if notion == "statistical_parity":
                den += 1
                num += p == fav
            elif notion == "equal_opportunity":
                if y == fav:
                    den += 1
                    num += p == fav
            else:
                if p == fav:
                    den += 1
                    num += y == fav
        return None if den == 0 else Fraction(int(num), den)

    u, p = rate(False), rate(True)
    return None if u is None or p is None else u - p


IDENTITY2 = CovarianceModel(np.eye(2), np.eye(2), 2, "inverse")


def test_spd_toy_four_rows():
    pred = [1, 0, 1, 1]
    groups = ["u", "u", "p", "p"]
    assert statistical_parity_difference(pred, groups, "p", 1) == -0.5


def test_spd_constant_predictions():
    assert statistical_parity_difference([1] * 6, list("uupppu"), "p", 1) == 0


def test_eod_toy():
    # unprivileged TPR 2/3, privileged TPR 1/3
    pred = [1, 1, 0, 1, 0, 0]
    labels = [1, 1, 1, 1, 1, 1]
    groups = ["u", "u", "u", "p", "p", "p"]
    assert exact_difference(pred, labels, groups, "p", 1, "equal_opportunity") == Fraction(1, 3)
    assert equal_opportunity_difference(pred, labels, groups, "p", 1) == pytest.approx(1 / 3)


def test_calibration_toy_symmetric():
    pred = [1, 1, 1, 1]
    labels = [1, 0, 0, 1]
    groups = ["u", "u", "p", "p"]
    assert calibration_difference(pred, labels, groups, "p", 1) == 0


def test_perfect_predictor_zero():
    labels = [1, 0, 1, 1, 0, 1]
    groups = ["u", "u", "u", "p", "p", "p"]
    assert equal_opportunity_difference(labels, labels, groups, "p", 1) == 0
    assert calibration_difference(labels, labels, groups, "p", 1) == 0


def test_empty_group_error_names_group():
    with pytest.raises(UndefinedRateError, match="unprivileged"):
        statistical_parity_difference([1, 0], ["p", "p"], "p", 1)


def test_zero_support_errors():
    groups = ["u", "u", "p", "p"]
    with pytest.raises(UndefinedRateError):
        equal_opportunity_difference([1, 1, 1, 1], [0, 0, 1, 1], groups, "p", 1)
    with pytest.raises(UndefinedRateError):
        calibration_difference([0, 0, 1, 1], [1, 1, 1, 1], groups, "p", 1)


@pytest.mark.parametrize("value, delta, expected", [(-0.05, 0.1, True), (0.12, 0.1, False), (0, 0, True)])
def test_satisfies_coarse(value, delta, expected):
    assert satisfies_coarse(value, delta) is expected


def test_metric_report_fields():
    rep = metric_report([1, 0, 1, 1], [1, 1, 1, 0], ["u", "u", "p", "p"], "p", 1,
                        "statistical_parity", protected="g", delta=0.6)
    assert rep.as_dict() == {"metric": "statistical_parity", "protected": "g", "value": -0.5,
                             "delta": 0.6, "satisfied": True,
                             "support_unprivileged": 2, "support_privileged": 2}


group_data = st.integers(min_value=2, max_value=50).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.integers(0, 1), min_size=n, max_size=n),
    st.lists(st.sampled_from(["a", "b"]), min_size=n, max_size=n),
))


@settings(max_examples=150, deadline=None)
@given(group_data, st.sampled_from(NOTIONS))
def test_matches_naive_counting(data, notion):
    pred, labels, groups = data
    expected = naive_difference(pred, labels, groups, "a", 1, notion)
    if expected is None:
        with pytest.raises(UndefinedRateError):
            exact_difference(pred, labels, groups, "a", 1, notion)
    else:
        assert exact_difference(pred, labels, groups, "a", 1, notion) == expected


@settings(max_examples=150, deadline=None)
@given(group_data, st.sampled_from(NOTIONS))
def test_antisymmetry_and_range(data, notion):
    pred, labels, groups = data
    try:
        forward = exact_difference(pred, labels, groups, "a", 1, notion)
    except UndefinedRateError:
        return
    # with two groups, naming the other one privileged swaps the roles
    assert exact_difference(pred, labels, groups, "b", 1, notion) == -forward
    assert -1 <= forward <= 1


@settings(max_examples=100, deadline=None)
@given(group_data)
def test_perfect_predictor_property(data):
    _, labels, groups = data
    for notion in ("equal_opportunity", "calibration"):
        try:
            assert exact_difference(labels, labels, groups, "a", 1, notion) == 0
        except UndefinedRateError:
            pass


# covariance and distance


def test_covariance_identical_rows():
    model = covariance(np.array([[1.0, 2.0], [1.0, 2.0]]))
    assert np.all(model.matrix == 0)
    assert np.all(model.inverse == 0)
    assert model.method == "pinv"


def test_covariance_collinear_columns():
    X = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 4.0], [5.0, 10.0]])
    model = covariance(X)
    assert model.rank == 1
    assert model.method in ("pinv", "ridge")
    C, P = model.matrix, model.inverse
    assert np.allclose(C @ P @ C, C, atol=1e-8)
    assert np.allclose(P @ C @ P, P, atol=1e-8)


def test_covariance_full_rank_matches_numpy():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 3))
    model = covariance(X)
    assert model.method == "inverse"
    assert np.allclose(model.matrix, np.cov(X.T))
    assert np.allclose(model.inverse @ model.matrix, np.eye(3))


def test_covariance_needs_two_rows():
    with pytest.raises(InsufficientDataError):
        covariance(np.ones((1, 3)))


def test_mahalanobis_basic():
    assert mahalanobis([1, 2], [1, 2], IDENTITY2) == 0
    assert abs(mahalanobis([3, 4], [0, 0], IDENTITY2) - 5.0) <= 1e-9
    with pytest.raises(ValueError):
        mahalanobis([1, 2, 3], [0, 0, 0], IDENTITY2)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5), st.integers(-5, 5)), min_size=3, max_size=12))
def test_mahalanobis_axioms(points):
    X = np.array(points, float)
    model = covariance(X)
    for i, j in combinations(range(len(X)), 2):
        d = mahalanobis(X[i], X[j], model)
        assert d >= 0
        assert d == pytest.approx(mahalanobis(X[j], X[i], model), abs=1e-9)
    whitened = X @ model.whitener()
    for i, j in combinations(range(len(X)), 2):
        assert np.linalg.norm(whitened[i] - whitened[j]) == pytest.approx(
            mahalanobis(X[i], X[j], model), abs=1e-7)


def test_max_pairwise_identity():
    X = np.array([[0, 0], [3, 4], [6, 8]], float)
    assert max_pairwise_distance(X, IDENTITY2) == pytest.approx(10.0, abs=1e-9)


# pair scan


def test_scan_three_points_by_hand():
    # pair distances: (0,1)=5, (1,2)=5, (0,2)=10; output gaps 2, 5, 7
    X = np.array([[0, 0], [3, 4], [6, 8]], float)
    out = [0, 2, 7]
    res = pairwise_if_scan(X, out, [4, 5, 10], [1, 4, 6], model=IDENTITY2)
    assert res.violations.tolist() == [[0, 0, 0], [2, 1, 0], [3, 2, 1]]
    assert res.witnesses[(1, 0)] == (0, 1)
    assert res.witnesses[(1, 1)] == (1, 2)
    assert res.witnesses[(2, 2)] == (0, 2)
    assert (0, 0) not in res.witnesses
    assert res.max_input_distance == pytest.approx(10.0)
    assert res.n_pairs == 3


def test_scan_single_row():
    res = pairwise_if_scan(np.zeros((1, 2)), [3], [1, 2], [0, 1])
    assert res.violations.sum() == 0
    assert res.satisfied.all()


def test_scan_duplicates_counted():
    # two identical rows with different outputs are at distance 0
    X = np.array([[1, 1], [1, 1], [1, 1], [4, 5]], float)
    res = pairwise_if_scan(X, [0, 3, 3, 3], [0.5], [1], model=IDENTITY2)
    assert res.violations.tolist() == [[2]]
    assert res.witnesses[(0, 0)] == (0, 1)


def test_scan_rejects_empty_grid():
    with pytest.raises(ValueError):
        pairwise_if_scan(np.zeros((2, 1)), [0, 1], [], [0])


def naive_scan(X, out, kappas, deltas):
    counts = np.zeros((len(kappas), len(deltas)), dtype=int)
    for i, j in combinations(range(len(X)), 2):
        D = float(np.sqrt(((X[i] - X[j]) ** 2).sum()))
        d = abs(out[i] - out[j])
        for ki, k in enumerate(kappas):
            for di, dl in enumerate(deltas):
                counts[ki, di] += D <= k and d > dl
    return counts


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 50).flatmap(lambda n: st.tuples(
    st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=n, max_size=n),
    st.lists(st.integers(0, 5), min_size=n, max_size=n))))
def test_scan_matches_brute_force(data):
    points, out = data
    X = np.array(points, float)
    # half-integer kappas never coincide with a sqrt of an integer
    kappas, deltas = [0.5, 1.5, 2.5, 4.5], [0, 1, 2.5, 4]
    res = pairwise_if_scan(X, out, kappas, deltas, model=IDENTITY2, block_pairs=7)
    assert res.violations.tolist() == naive_scan(X, out, kappas, deltas).tolist()
    # monotone: nonincreasing in delta, nondecreasing in kappa
    v = res.violations
    assert (np.diff(v, axis=1) <= 0).all()
    assert (np.diff(v, axis=0) >= 0).all()


def test_scan_subsample_deterministic():
    rng = np.random.default_rng(0)
    X = rng.integers(0, 4, size=(60, 2)).astype(float)
    out = rng.integers(0, 3, size=60)
    a = pairwise_if_scan(X, out, [1, 2], [0, 1], pair_cap=20, seed=5)
    b = pairwise_if_scan(X, out, [1, 2], [0, 1], pair_cap=20, seed=5)
    assert a.sampled and a.n_rows == 20
    assert a.violations.tolist() == b.violations.tolist()
    assert a.witnesses == b.witnesses


# real data


def test_compas_max_distance(compas):
    model = covariance(compas)
    assert abs(max_pairwise_distance(compas.feature_matrix(), model) - 9.2) <= 0.3


def test_compas_decile_scan_corner(compas_decile):
    f = apply_ruleset(shipped_ruleset("compas-decile"), compas_decile)
    res = pairwise_if_scan(compas_decile, f, [9.2], [8.9])
    assert res.violations[0, 0] >= 1
