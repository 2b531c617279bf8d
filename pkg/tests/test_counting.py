import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bell, enumerate_paths, random_chain
from markovkey.counting import (
    attach_counter,
    error_pmf,
    error_table,
    grid_size,
    heralded_error,
    joint_error_pmf,
    nonheralded_error,
)
from markovkey.exceptions import GridTooLarge, UnknownEdge, ZeroMass
from markovkey.markov import CountedMatrix, compose_and, completion_pmf, pmf_by_power
from markovkey.poly import Poly


def two_pair_and(p=0.5):
    return compose_and(bell(p), bell(p), hold_a="w")


def test_attach_then_unit_counter_is_identity():
    m = random_chain(np.random.default_rng(0), 6)
    edges = list(m.entries)[:3]
    counted = attach_counter(m, edges, "w")
    np.testing.assert_allclose(
        completion_pmf(counted, 50, {"w": 1.0}), completion_pmf(m, 50), atol=1e-15
    )


def test_attach_to_terminal_column_rejected():
    with pytest.raises(UnknownEdge):
        attach_counter(bell(0.5), [(0, 1)], "w")


def test_two_pair_polynomial():
    m = two_pair_and()
    assert pmf_by_power(m, 2, {"w": 0.0}) == pytest.approx(0.1875)
    assert pmf_by_power(m, 2, {"w": 1.0}) - pmf_by_power(m, 2, {"w": 0.0}) == pytest.approx(0.125)


def test_two_pair_conditional_counts():
    d = error_pmf(two_pair_and(), 2)
    assert d[0] == pytest.approx(0.6, abs=1e-12)
    assert d[1] == pytest.approx(0.4, abs=1e-12)
    assert d.total == pytest.approx(0.3125)
    assert error_pmf(two_pair_and(), 1)[0] == pytest.approx(1.0)


def test_degree_bound():
    m = two_pair_and(0.3)
    for t in (3, 7, 12):
        d = error_pmf(m, t)
        assert np.all(np.abs(d.counts[t * m.degree("w") + 1 :]) < 1e-12)
        assert d.counts.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("t", range(1, 9))
def test_matches_enumeration(t):
    m = two_pair_and()
    paths = enumerate_paths(m, t, ("w",))
    total = sum(v for (s, _), v in paths.items() if s == t)
    d = error_pmf(m, t)
    for k in range(t + 1):
        expected = paths.get((t, k), 0.0) / total
        assert d[k] == pytest.approx(expected, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
def test_random_chain_enumeration(seed, t):
    rng = np.random.default_rng(seed)
    m = random_chain(rng, 5)
    edges = [e for e in m.entries if rng.random() < 0.4] or [next(iter(m.entries))]
    m = attach_counter(m, edges, "w")
    paths = enumerate_paths(m, t, ("w",))
    total = sum(v for (s, _), v in paths.items() if s == t)
    if total < 1e-12:
        return
    d = error_pmf(m, t)
    for k in range(t + 1):
        assert d[k] == pytest.approx(paths.get((t, k), 0.0) / total, abs=1e-10)


def test_doubling_grid_changes_nothing():
    m = compose_and(bell(0.3), bell(0.6), hold_a="w")
    n = grid_size(m, 30, "w")
    a, _ = error_table(m, 30, "w")
    b, _ = error_table(m, 30, "w", size=2 * n)
    np.testing.assert_allclose(a, b[:, :n], atol=1e-11)
    assert np.all(np.abs(b[:, n:]) < 1e-11)


def test_heralded_examples():
    assert heralded_error(1, 0.25) == pytest.approx(0.25)
    assert heralded_error(0, 0.3) == 0.0
    assert heralded_error(2, 0.1) == pytest.approx(0.19)


def test_nonheralded_examples():
    m = two_pair_and()
    assert nonheralded_error(m, 2, 0.0) == 0.0
    assert nonheralded_error(m, 2, 0.5) == pytest.approx(0.2)
    assert nonheralded_error(m, 5, 1.0) == pytest.approx(1 - error_pmf(m, 5)[0])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(1, 12), st.floats(0.0, 1.0))
def test_nonheralded_is_average_of_heralded(p, t, eps):
    m = two_pair_and(p)
    d = error_pmf(m, t)
    k = np.arange(len(d.counts))
    expected = float(d.counts @ heralded_error(k, eps))
    assert nonheralded_error(m, t, eps) == pytest.approx(expected, abs=1e-10)


def _three_pairs():
    inner = compose_and(bell(0.4), bell(0.5), hold_a="b")
    return compose_and(bell(0.3), inner, hold_a="a")


def test_joint_marginals():
    m = _three_pairs()
    for t in (2, 4, 6):
        joint = joint_error_pmf(m, t, ("a", "b"))
        np.testing.assert_allclose(joint.marginal("a")[: t + 1], error_pmf(m, t, "a").counts[: t + 1], atol=1e-12)
        np.testing.assert_allclose(joint.marginal("b")[: t + 1], error_pmf(m, t, "b").counts[: t + 1], atol=1e-12)
        assert joint.counts.sum() == pytest.approx(1.0, abs=1e-12)


def test_joint_matches_enumeration():
    m = _three_pairs()
    for t in range(1, 7):
        paths = enumerate_paths(m, t, ("a", "b"))
        total = sum(v for (s, *_), v in paths.items() if s == t)
        joint = joint_error_pmf(m, t, ("a", "b"))
        for (s, ka, kb), v in paths.items():
            if s == t:
                assert joint[ka, kb] == pytest.approx(v / total, abs=1e-10)


def test_counter_that_never_fires():
    # w sits on a branch that cannot finish at t = 1
    m = CountedMatrix(4, {(1, 0): 0.5, (2, 0): 0.5, (3, 2): Poly.var("w")}, {1, 3}, 0)
    d = joint_error_pmf(m, 1, ("w",))
    assert d[0] == pytest.approx(1.0)
    assert d.counts[1:].sum() == pytest.approx(0.0, abs=1e-14)
    plain = attach_counter(bell(0.5), [(1, 0)], "v")
    assert error_pmf(plain, 4)[1] == pytest.approx(1.0)
    assert error_pmf(plain, 4)[0] == pytest.approx(0.0, abs=1e-14)


def test_grid_budget():
    m = _three_pairs()
    with pytest.raises(GridTooLarge):
        joint_error_pmf(m, 200, ("a", "b"), budget=1000)


def test_impossible_time():
    det = attach_counter(CountedMatrix(3, {(1, 0): 1.0, (2, 1): 1.0}, {2}, 0), [(1, 0)], "w")
    with pytest.raises(ZeroMass):
        error_pmf(det, 1)
    with pytest.raises(ZeroMass):
        nonheralded_error(det, 3, 0.1)
    assert error_pmf(det, 2)[1] == pytest.approx(1.0)


def test_no_warnings_on_clean_input():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        error_pmf(two_pair_and(0.2), 40)
