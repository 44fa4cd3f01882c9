import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from confgeom.errors import DegenerateMetric, DimensionMismatch, NullPivot
from confgeom.indefinite import (Signature, gram, indefinite_gram_schmidt, inner,
                                 random_pseudo_orthogonal)


def test_inner_basis_vectors():
    sig = Signature(2, 1)
    assert inner([1, 0, 0], [1, 0, 0], sig) == 1.0
    assert inner([0, 0, 1], [0, 0, 1], sig) == -1.0


def test_inner_symmetric_on_random_pairs():
    rng = np.random.default_rng(0)
    sig = Signature(3, 2)
    x = rng.normal(size=(100, 5))
    y = rng.normal(size=(100, 5))
    assert np.array_equal(inner(x, y, sig), inner(y, x, sig))


def test_inner_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        inner([1, 0], [1, 0, 0], Signature(2, 1))


def test_gram_orthonormal_basis():
    mm = gram(np.eye(3), Signature(2, 1))
    assert np.array_equal(mm.entries, np.diag([1.0, 1.0, -1.0]))
    assert mm.signs == (2, 1)


def test_gram_repeated_vector_is_degenerate():
    with pytest.raises(DegenerateMetric):
        gram([[1, 0, 0], [1, 0, 0]], Signature(2, 1))


def test_gram_inverse_random_basis():
    rng = np.random.default_rng(1)
    sig = Signature(3, 2)
    for _ in range(20):
        mm = gram(rng.normal(size=(5, 5)), sig)
        assert np.max(np.abs(mm.entries @ mm.inverse - np.eye(5))) <= 1e-10


@pytest.mark.parametrize("plus,minus", [(3, 1), (4, 2), (5, 1), (2, 2)])
def test_pseudo_orthogonal_defining_property(plus, minus):
    sig = Signature(plus, minus)
    G = sig.matrix
    for seed in range(25):
        T = random_pseudo_orthogonal(sig, seed).matrix
        assert np.max(np.abs(T.T @ G @ T - G)) <= 1e-12


def test_pseudo_orthogonal_zero_generator_is_identity():
    T = random_pseudo_orthogonal(Signature(3, 1), seed=5, scale=0.0)
    assert np.array_equal(T.matrix, np.eye(4))


def test_pseudo_orthogonal_determinant():
    sig = Signature(4, 2)
    for seed in range(1, 21):
        d = np.linalg.det(random_pseudo_orthogonal(sig, seed).matrix)
        assert min(abs(d - 1.0), abs(d + 1.0)) <= 1e-9


def test_pseudo_orthogonal_is_seeded():
    sig = Signature(4, 1)
    a = random_pseudo_orthogonal(sig, 7).matrix
    b = random_pseudo_orthogonal(sig, 7).matrix
    assert np.array_equal(a, b)


def test_gram_schmidt_orthonormal_input():
    sig = Signature(2, 1)
    frame, signs = indefinite_gram_schmidt(np.eye(3), sig)
    G = (frame * sig.diag) @ frame.T
    assert np.allclose(G, np.diag(signs), atol=1e-15)
    assert sorted(signs) == [-1.0, 1.0, 1.0]


def test_gram_schmidt_null_vector():
    with pytest.raises(NullPivot):
        indefinite_gram_schmidt([[1.0, 0.0, 1.0]], Signature(2, 1))


def test_gram_schmidt_random_frame():
    rng = np.random.default_rng(3)
    sig = Signature(3, 2)
    for _ in range(20):
        frame, signs = indefinite_gram_schmidt(rng.normal(size=(3, 5)), sig)
        G = gram(frame, sig).entries
        assert np.max(np.abs(G - np.diag(signs))) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(0, 3), st.integers(0, 2**31 - 1))
def test_group_preserves_inner_product(plus, minus, seed):
    sig = Signature(plus, minus)
    T = random_pseudo_orthogonal(sig, seed)
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, sig.dim))
    assert abs(inner(T.apply(x), T.apply(y), sig) - inner(x, y, sig)) <= 1e-11 * (
        1 + np.abs(x).sum() * np.abs(y).sum())
