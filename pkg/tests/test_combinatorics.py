import math

import pytest
from hypothesis import given, strategies as st

from chaoslab import combinatorics as cb


@pytest.mark.parametrize("q1, q, expected", [(0, 1, 2), (0, 2, 24), (1, 2, 32), (3, 3, 36)])
def test_upsilon_values(q1, q, expected):
    assert cb.upsilon(q1, q) == expected


def test_upsilon_log():
    assert cb.upsilon_log(0, 1) == pytest.approx(math.log(2), abs=1e-12)
    assert cb.upsilon_log(1, 2) == pytest.approx(math.log(32), abs=1e-12)
    for q in range(1, 101):
        for q1 in range(0, q + 1, max(1, q // 7)):
            assert cb.upsilon_log(q1, q) == pytest.approx(math.log(cb.upsilon(q1, q)), rel=1e-10)


def test_domain_errors():
    with pytest.raises(ValueError):
        cb.upsilon(3, 2)
    with pytest.raises(ValueError):
        cb.enumerate_matchings(5, 0)
    with pytest.raises(ValueError):
        cb.offdiag_count(2, 1, 0)


@pytest.mark.parametrize("q1, q", [(1, 2), (0, 3), (4, 4)])
def test_identity_examples(q1, q):
    assert cb.upsilon_identity(q1, q)


@given(st.integers(1, 60).flatmap(lambda q: st.tuples(st.integers(0, q), st.just(q))))
def test_identity_property(pair):
    assert cb.upsilon_identity(*pair)


@pytest.mark.parametrize("q, q1, expected", [(1, 0, 2), (2, 0, 24), (3, 3, 36)])
def test_enumeration_examples(q, q1, expected):
    assert cb.enumerate_matchings(q, q1) == expected


def test_enumeration_total_and_workers():
    for q in range(1, 4):
        hist = cb.enumerate_matching_histogram(q)
        assert hist == cb.enumerate_matching_histogram(q, workers=3)
        # all flat-edge-free matchings of four rows of q nodes
        assert hist == [cb.upsilon(k, q) for k in range(q + 1)]


def test_diagram_count_consistency():
    dc = cb.diagram_count(3, with_oracle=True)
    assert dc.consistent() and dc.counts[1] == 1944


@pytest.mark.parametrize("q, argmax", [(30, 10), (60, 20)])
def test_max_profile(q, argmax):
    assert cb.upsilon_max_profile(q).argmax == argmax


def test_max_profile_ratio_bounded():
    assert all(cb.upsilon_max_profile(q).ratio <= 1 for q in range(10, 201))


def test_exact_and_log_profiles_agree_at_crossover():
    a = cb.upsilon_max_profile(30)
    logs = [cb.upsilon_log(q1, 30) for q1 in range(30)]
    assert a.argmax == max(range(30), key=logs.__getitem__)
    assert a.log_max == pytest.approx(max(logs), rel=1e-12)


def test_offdiag_examples():
    assert cb.offdiag_count(2, 1, 1) == 8
    assert cb.offdiag_count(3, 2, 2) == 288


def test_offdiag_dominance():
    for p in range(2, 9):
        for q in range(1, p):
            for p1 in range(p - q, p):
                assert cb.offdiag_dominance(p, q, p1)
