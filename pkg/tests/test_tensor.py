import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mreweight.errors import DimensionError, NumericError, ParameterError
from mreweight.tensor import dot, logsumexp, make_rng, pinv_small, spawn_seeds

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_dot_small_cases():
    assert dot([1, 2, 3], [4, 5, 6]) == 32.0
    assert dot([1.5, -2.0], [0.0, 0.0]) == 0.0


def test_dot_length_mismatch():
    with pytest.raises(DimensionError):
        dot([1, 2], [1, 2, 3])


@given(arrays(np.float64, 17, elements=finite), arrays(np.float64, 17, elements=finite))
def test_dot_is_reproducible_and_left_to_right(a, b):
    expected = 0.0
    for x, y in zip(a, b):
        expected += float(x) * float(y)
    assert dot(a, b) == expected
    assert dot(a, b) == dot(a.copy(), b.copy())


def test_logsumexp_examples():
    assert logsumexp([0.0, 0.0]) == pytest.approx(math.log(2), abs=1e-15)
    assert logsumexp([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2), abs=1e-12)
    with pytest.raises(DimensionError):
        logsumexp([])


def test_logsumexp_matches_naive():
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = rng.normal(scale=5, size=10)
        assert abs(logsumexp(v) - math.log(np.sum(np.exp(v)))) < 1e-12


@given(arrays(np.float64, st.integers(1, 12), elements=finite), finite)
def test_logsumexp_shift(v, c):
    assert abs(logsumexp(v + c) - (logsumexp(v) + c)) <= 1e-12 * max(1.0, abs(logsumexp(v) + c))


def test_pinv_small_examples():
    np.testing.assert_array_equal(pinv_small(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(pinv_small(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]), atol=1e-15)
    v = np.array([1.0, 2.0, -2.0]) / 3.0
    a = np.outer(v, v)
    np.testing.assert_allclose(pinv_small(a), a, atol=1e-14)
    np.testing.assert_allclose(a @ pinv_small(a) @ a, a, atol=1e-14)


def _penrose(a, tol=1e-9):
    g = pinv_small(a)
    scale = max(1.0, np.abs(a).max(), np.abs(g).max())
    assert np.abs(a @ g @ a - a).max() <= tol * scale
    assert np.abs(g @ a @ g - g).max() <= tol * scale
    assert np.abs((a @ g).T - a @ g).max() <= tol * scale
    assert np.abs((g @ a).T - g @ a).max() <= tol * scale


def test_pinv_penrose_random():
    rng = np.random.default_rng(11)
    for _ in range(40):
        m, n = rng.integers(1, 17, size=2)
        a = rng.normal(size=(m, n))
        _penrose(a)
        np.testing.assert_allclose(pinv_small(a), np.linalg.pinv(a), atol=1e-9)


def test_pinv_rank_deficient_random():
    rng = np.random.default_rng(5)
    for _ in range(20):
        r = int(rng.integers(1, 4))
        a = rng.normal(size=(9, r)) @ rng.normal(size=(r, 7))
        _penrose(a)
        np.testing.assert_allclose(pinv_small(a), np.linalg.pinv(a, rcond=1e-12), atol=1e-9)


def test_pinv_rejects_bad_input():
    with pytest.raises(DimensionError):
        pinv_small(np.eye(65))
    with pytest.raises(DimensionError):
        pinv_small(np.ones(3))
    with pytest.raises(NumericError):
        pinv_small(np.array([[1.0, np.nan], [0.0, 1.0]]))
    with pytest.raises(ParameterError):
        pinv_small(np.eye(2), tol=0.0)


def test_pinv_zero_matrix():
    np.testing.assert_array_equal(pinv_small(np.zeros((2, 3))), np.zeros((3, 2)))


def test_rng_streams_repeat():
    a = make_rng(42).random(10_000)
    b = make_rng(42).random(10_000)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, make_rng(43).random(10_000))


def test_spawn_seeds_distinct_and_stable():
    s = spawn_seeds(7, 5)
    assert s == spawn_seeds(7, 5)
    assert len(set(s)) == 5
