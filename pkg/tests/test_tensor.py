import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from auxcpd.tensor import (
    KruskalModel,
    coproduct_matrix,
    fold,
    frobenius_norm,
    khatri_rao,
    kronecker,
    mttkrp,
    pseudo_inverse,
    reconstruct,
    unfold,
)

from conftest import random_model

shapes = st.lists(st.integers(1, 4), min_size=2, max_size=5).map(tuple)


def brute_unfold(t, n):
    # column index of entry (i_1..i_N) without i_n: first remaining mode fastest
    others = [m for m in range(t.ndim) if m != n]
    out = np.zeros((t.shape[n], int(np.prod([t.shape[m] for m in others]))))
    for idx in itertools.product(*(range(s) for s in t.shape)):
        col, stride = 0, 1
        for m in others:
            col += idx[m] * stride
            stride *= t.shape[m]
        out[idx[n], col] = t[idx]
    return out


def test_unfold_2x2x2_by_enumeration():
    t = np.fromfunction(lambda i, j, k: 4 * i + 2 * j + k, (2, 2, 2))
    m = unfold(t, 0)
    assert m.shape == (2, 4)
    np.testing.assert_array_equal(m, brute_unfold(t, 0))
    np.testing.assert_array_equal(m, [[0, 2, 1, 3], [4, 6, 5, 7]])


def test_unfold_vector_keeps_data():
    # I_1 rows and a single column; fold also accepts the row form
    v = np.arange(5.0)
    np.testing.assert_array_equal(unfold(v, 0).ravel(), v)
    assert unfold(v, 0).shape == (5, 1)
    np.testing.assert_array_equal(fold(v[None, :], 0, (5,)), v)


def test_unfold_mode_out_of_range():
    with pytest.raises(ValueError):
        unfold(np.zeros((2, 3)), 2)
    with pytest.raises(ValueError):
        unfold(np.zeros((2, 3)), -1)


def test_fold_examples(rng):
    m = rng.standard_normal((3, 8))
    np.testing.assert_array_equal(unfold(fold(m, 0, (3, 4, 2)), 0), m)
    row = np.arange(6.0)[None, :]
    np.testing.assert_array_equal(fold(row, 0, (6,)), np.arange(6.0))
    t = rng.standard_normal((2, 3, 4))
    np.testing.assert_array_equal(fold(unfold(t, 1), 1, t.shape), t)
    with pytest.raises(ValueError):
        fold(m, 0, (3, 5, 2))


@settings(max_examples=40, deadline=None)
@given(shape=shapes, data=st.data())
def test_fold_unfold_identities(shape, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**31)))
    t = rng.standard_normal(shape)
    n = data.draw(st.integers(0, len(shape) - 1))
    m = unfold(t, n)
    np.testing.assert_array_equal(m, brute_unfold(t, n))
    np.testing.assert_array_equal(fold(m, n, shape), t)
    np.testing.assert_array_equal(unfold(fold(m, n, shape), n), m)


def test_kronecker_entries():
    a = np.array([[1, 2], [3, 4]], float)
    b = np.array([[0, 1], [1, 0]], float)
    k = kronecker(a, b)
    assert k.shape == (4, 4)
    for i, j, p, q in itertools.product(range(2), repeat=4):
        assert k[2 * i + p, 2 * j + q] == a[i, j] * b[p, q]
    np.testing.assert_array_equal(kronecker(np.eye(1), b), b)
    assert kronecker(np.ones((2, 3)), np.ones((4, 5))).shape == (8, 15)


def test_khatri_rao_examples(rng):
    a, b = rng.standard_normal((3, 2)), rng.standard_normal((4, 2))
    kr = khatri_rao(a, b)
    for j in range(2):
        np.testing.assert_array_equal(kr[:, j], np.kron(a[:, j], b[:, j]))
    np.testing.assert_array_equal(khatri_rao(np.ones((1, 3)), b[:, :1].repeat(3, 1)), b[:, :1].repeat(3, 1))
    assert khatri_rao(np.ones((2, 2)), np.ones((3, 2)), np.ones((4, 2))).shape == (24, 2)
    with pytest.raises(ValueError):
        khatri_rao(a, rng.standard_normal((4, 3)))


@settings(max_examples=40, deadline=None)
@given(rows=st.lists(st.integers(1, 5), min_size=2, max_size=4), r=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_khatri_rao_columns_are_kronecker(rows, r, seed):
    rng = np.random.default_rng(seed)
    mats = [rng.standard_normal((n, r)) for n in rows]
    kr = khatri_rao(*mats)
    for j in range(r):
        col = mats[0][:, j]
        for m in mats[1:]:
            col = np.kron(col, m[:, j])
        np.testing.assert_array_equal(kr[:, j], col)


def test_reconstruct_rank_one(rng):
    a, b, c = rng.standard_normal(2), rng.standard_normal(3), rng.standard_normal(4)
    t = reconstruct(KruskalModel([a[:, None], b[:, None], c[:, None]]))
    for i, j, k in itertools.product(range(2), range(3), range(4)):
        assert t[i, j, k] == pytest.approx(a[i] * b[j] * c[k], rel=1e-15)


def test_reconstruct_zero_factor(rng):
    k = random_model(rng, (3, 4, 5), 2)
    assert not reconstruct(k.replace(1, np.zeros((4, 2)))).any()


@settings(max_examples=40, deadline=None)
@given(shape=shapes, r=st.integers(1, 4), seed=st.integers(0, 2**31))
def test_matricized_identity(shape, r, seed):
    k = random_model(np.random.default_rng(seed), shape, r)
    full = reconstruct(k)
    scale = max(np.linalg.norm(full), 1e-300)
    for n in range(len(shape)):
        diff = unfold(full, n) - k.factors[n] @ coproduct_matrix(k, n).T
        assert np.linalg.norm(diff) <= 1e-12 * scale


def test_coproduct_examples(rng):
    k2 = random_model(rng, (3, 4), 2)
    np.testing.assert_array_equal(coproduct_matrix(k2, 0), k2.factors[1])
    k3 = random_model(rng, (3, 4, 5), 3)
    a1, a2, a3 = k3.factors
    np.testing.assert_allclose(unfold(reconstruct(k3), 0), a1 @ khatri_rao(a3, a2).T, atol=1e-13)
    ones = KruskalModel([np.ones((n, 1)) for n in (2, 3, 4)])
    np.testing.assert_array_equal(coproduct_matrix(ones, 1), np.ones((8, 1)))
    with pytest.raises(ValueError):
        coproduct_matrix(k3, 3)


def test_mttkrp_matches_explicit(rng):
    for shape in [(3, 4, 5), (2, 3, 4, 5), (1, 6, 7, 3, 2)]:
        k = random_model(rng, shape, 3)
        t = rng.standard_normal(shape)
        for n in range(len(shape)):
            ref = unfold(t, n) @ coproduct_matrix(k, n)
            np.testing.assert_allclose(mttkrp(t, k.factors, n), ref, rtol=1e-12, atol=1e-12)


def test_frobenius_norm():
    assert frobenius_norm(np.zeros((2, 3))) == 0
    assert frobenius_norm(np.array([3.0])) == 3
    assert frobenius_norm(np.ones((2, 2))) == 2


def test_pseudo_inverse_examples(rng):
    m = np.array([[2.0, 1.0], [1.0, 3.0]])
    np.testing.assert_allclose(pseudo_inverse(m), np.linalg.inv(m), rtol=1e-13)
    tall = rng.standard_normal((7, 3))
    np.testing.assert_allclose(pseudo_inverse(tall), np.linalg.solve(tall.T @ tall, tall.T), rtol=1e-10, atol=1e-12)
    z = pseudo_inverse(np.zeros((2, 5)))
    assert z.shape == (5, 2) and not z.any()


@settings(max_examples=50, deadline=None)
@given(
    m=st.integers(1, 7), n=st.integers(1, 7), r=st.integers(0, 7), seed=st.integers(0, 2**31)
)
def test_penrose_identities(m, n, r, seed):
    rng = np.random.default_rng(seed)
    r = min(r, m, n)
    a = rng.standard_normal((m, r)) @ rng.standard_normal((r, n)) if r else np.zeros((m, n))
    p = pseudo_inverse(a)
    scale = max(np.linalg.norm(a), 1.0)
    pscale = max(np.linalg.norm(p), 1.0)
    assert np.linalg.norm(a @ p @ a - a) <= 1e-10 * scale
    assert np.linalg.norm(p @ a @ p - p) <= 1e-10 * pscale
    assert np.linalg.norm((a @ p).T - a @ p) <= 1e-10 * scale * pscale
    assert np.linalg.norm((p @ a).T - p @ a) <= 1e-10 * scale * pscale


def test_kruskal_model_validation_and_immutability(rng):
    with pytest.raises(ValueError):
        KruskalModel([np.ones((2, 2)), np.ones((3, 3))])
    src = rng.standard_normal((3, 2))
    k = KruskalModel([src, np.ones((4, 2))])
    src[0, 0] = 99.0
    assert k.factors[0][0, 0] != 99.0
    with pytest.raises(ValueError):
        k.factors[0][0, 0] = 1.0
    assert k.rank == 2 and k.shape == (3, 4) and k.ndim == 2


def test_normalized_preserves_tensor(rng):
    k = random_model(rng, (3, 4, 5), 2)
    kn = k.normalized()
    np.testing.assert_allclose(reconstruct(kn), reconstruct(k), atol=1e-12)
    for f in kn.factors[:-1]:
        np.testing.assert_allclose(np.linalg.norm(f, axis=0), 1.0)
