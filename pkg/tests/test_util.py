import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from radarclf._util import canonical_order, derive_seed, format_float, row_digests


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_format_float_round_trips(v):
    assert float(format_float(v)) == v


def test_format_float_keeps_17_digits():
    assert format_float(0.1) == "0.10000000000000001"


def test_row_digests_depend_on_content_not_position():
    X = np.array([[1.0, 2.0], [3.0, 4.0], [1.0, 2.0]])
    d = row_digests(X)
    assert d[0] == d[2]
    assert d[0] != d[1]


def test_row_digests_include_labels_and_weights():
    X = np.ones((2, 3))
    assert row_digests(X, [0, 1])[0] != row_digests(X, [1, 1])[0]
    assert (row_digests(X, [0, 0], [1.0, 2.0])[0]
            != row_digests(X, [0, 0], [2.0, 2.0])[0])


def test_canonical_order_unscrambles_permutations():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(40, 5))
    y = rng.integers(0, 3, size=40)
    perm = rng.permutation(40)
    a = canonical_order(X, y)
    b = canonical_order(X[perm], y[perm])
    assert np.array_equal(X[a], X[perm][b])
    assert np.array_equal(y[a], y[perm][b])


def test_derive_seed_stable_and_sensitive():
    assert derive_seed(7, "tree", 3) == derive_seed(7, "tree", 3)
    assert derive_seed(7, "tree", 3) != derive_seed(7, "tree", 4)
    assert derive_seed(7, "tree", 3) != derive_seed(7, "fold", 3)
    assert 0 <= derive_seed(0) < 2 ** 32
