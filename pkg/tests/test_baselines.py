import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from auxcpd.baselines import (
    CPDPipeline,
    CSPModel,
    CSPPipeline,
    RidgeLDA,
    VARIANCE_FLOOR,
    cpd_features_test,
    cpd_features_train,
    csp_features,
    csp_fit,
    csp_from_covariances,
    lda_fit,
    lda_predict,
    ovr_classify,
)
from auxcpd.nls import SolverOptions
from auxcpd.supervised import LabeledTrialSet
from auxcpd.tensor import KruskalModel, reconstruct


def random_spd(rng, n):
    a = rng.standard_normal((n, n + 3))
    return a @ a.T / n


# --------------------------------------------------------------------------
# CPD features


def planted4(rng, shape=(2, 5, 6, 8), rank=2):
    k = KruskalModel([rng.uniform(0.2, 1.0, size=(s, rank)) for s in shape])
    return k, reconstruct(k)


def best_perm_corr(a, b):
    r = a.shape[1]
    best = -1.0
    for perm in itertools.permutations(range(r)):
        c = min(np.corrcoef(a[:, i], b[:, j])[0, 1] for i, j in enumerate(perm))
        best = max(best, c)
    return best


def test_cpd_features_recover_trial_factor():
    rng = np.random.default_rng(0)
    truth, t = planted4(rng)
    model, feats, rep = cpd_features_train(t, SolverOptions(rank=2, seed=1))
    assert rep.rel_error < 1e-6
    assert best_perm_corr(feats, truth.factors[3]) > 0.99


def test_cpd_features_rank_one_proportional_to_energy():
    rng = np.random.default_rng(1)
    pattern = np.einsum("i,j,k->ijk", *(rng.uniform(0.5, 1, s) for s in (2, 4, 5)))
    d = rng.uniform(0.5, 2.0, size=6)
    t = np.stack([dj * pattern for dj in d], axis=-1)
    _, feats, _ = cpd_features_train(t, SolverOptions(rank=1))
    ratio = feats[:, 0] / d
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-6)


def test_cpd_features_deterministic_and_reprojection():
    rng = np.random.default_rng(2)
    _, t = planted4(rng)
    m1, f1, rep = cpd_features_train(t, SolverOptions(rank=2, seed=4))
    m2, f2, _ = cpd_features_train(t, SolverOptions(rank=2, seed=4))
    assert f1.tobytes() == f2.tobytes()
    trials = np.moveaxis(t, -1, 0)
    np.testing.assert_allclose(cpd_features_test(trials, m1), f1, rtol=1e-5, atol=1e-8)
    assert not cpd_features_test(np.zeros(t.shape[:3]), m1).any()
    with pytest.raises(ValueError):
        cpd_features_test(np.zeros((1, 1, 1)), m1)
    with pytest.raises(ValueError):
        cpd_features_train(t[..., :1], SolverOptions(rank=2))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), lam=st.floats(-10, 10))
def test_cpd_features_linear(seed, lam):
    rng = np.random.default_rng(seed)
    k = KruskalModel([rng.uniform(size=(s, 2)) for s in (2, 3, 4, 5)])
    x, y = rng.standard_normal((2, 2, 3, 4))
    f = lambda z: cpd_features_test(z, k)
    np.testing.assert_allclose(f(lam * x + y), lam * f(x) + f(y), atol=1e-9 * (1 + abs(lam)))


# --------------------------------------------------------------------------
# CSP


def test_csp_diagonal_pair():
    m = csp_from_covariances(np.diag([2.0, 1.0]), np.diag([1.0, 2.0]))
    lead, trail = m.filters[:, 0], m.filters[:, -1]
    assert abs(lead[1]) < 1e-12 and abs(lead[0]) > 0
    assert abs(trail[0]) < 1e-12 and abs(trail[1]) > 0
    np.testing.assert_allclose(m.eigenvalues, [2 / 3, 1 / 3])


def test_csp_identical_classes():
    rng = np.random.default_rng(0)
    s = random_spd(rng, 4)
    m = csp_from_covariances(s, s)
    np.testing.assert_allclose(m.eigenvalues, 0.5, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 8), seed=st.integers(0, 2**31))
def test_csp_whitening_identity(n, seed):
    rng = np.random.default_rng(seed)
    sa, sb = random_spd(rng, n), random_spd(rng, n)
    w = csp_from_covariances(sa, sb).filters
    np.testing.assert_allclose(w.T @ sa @ w + w.T @ sb @ w, np.eye(n), atol=1e-8)
    da = w.T @ sa @ w
    assert np.abs(da - np.diag(np.diag(da))).max() <= 1e-8


def test_csp_fit_from_trials_and_features():
    rng = np.random.default_rng(3)
    mix_a, mix_b = np.diag([3.0, 1.0, 1.0]), np.diag([1.0, 1.0, 3.0])
    a = np.array([mix_a @ rng.standard_normal((3, 400)) for _ in range(10)])
    b = np.array([mix_b @ rng.standard_normal((3, 400)) for _ in range(10)])
    m = csp_fit(a, b)
    assert np.argmax(np.abs(m.filters[:, 0])) == 0
    assert np.argmax(np.abs(m.filters[:, -1])) == 2
    f = csp_features(a[0], m)
    assert f.shape == (2,)
    lam = 3.0
    np.testing.assert_allclose(csp_features(lam * a[0], m) - f, 2 * np.log(lam), atol=1e-10)
    with pytest.raises(ValueError):
        csp_fit(a[:1], b)
    with pytest.raises(ValueError):
        csp_features(np.zeros((2, 10)), m)


def test_csp_white_noise_identity_filters():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((4, 5000)) * np.array([[1.0], [2.0], [0.5], [3.0]])
    m = CSPModel(np.eye(4), np.array([4.0, 3.0, 2.0, 1.0]), 1)
    np.testing.assert_allclose(csp_features(x, m), np.log([np.var(x[0]), np.var(x[3])]))


def test_csp_floor():
    m = CSPModel(np.eye(2), np.array([1.0, 0.0]), 1)
    f = csp_features(np.zeros((2, 10)), m)
    np.testing.assert_array_equal(f, np.log(VARIANCE_FLOOR))


def test_csp_singular_composite_is_regularized():
    sa = np.diag([1.0, 0.0, 0.0])
    sb = np.diag([0.0, 1.0, 0.0])
    m = csp_from_covariances(sa, sb)
    assert np.isfinite(m.filters).all()


# --------------------------------------------------------------------------
# LDA and one-vs-rest


def test_lda_separated_blobs():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.standard_normal((30, 3)), rng.standard_normal((30, 3)) + 10])
    y = [0] * 30 + [1] * 30
    labels, scores = lda_predict(lda_fit(x, y), x)
    assert labels == y and scores.shape == (60, 2)


def test_lda_identical_means_is_chance():
    rng = np.random.default_rng(1)
    x, xt = rng.standard_normal((200, 4)), rng.standard_normal((400, 4))
    y, yt = [0, 1] * 100, [0, 1] * 200
    acc = np.mean(np.array(lda_fit(x, y).predict(xt)) == np.array(yt))
    half = 1.96 * np.sqrt(0.25 / 400)
    assert 0.5 - half <= acc <= 0.5 + half


def test_lda_large_ridge_is_nearest_mean():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((40, 3)) * [1, 5, 0.2]
    y = [0] * 20 + [1] * 20
    x[20:] += [1.0, 0.5, 0.3]
    clf = lda_fit(x, y, ridge=1e12)
    xt = rng.standard_normal((100, 3)) * 3
    d = np.linalg.norm(xt[:, None, :] - clf.means_[None], axis=2)
    assert clf.predict(xt) == list(np.argmin(d, axis=1))


def test_lda_errors():
    with pytest.raises(ValueError):
        RidgeLDA(-1)
    with pytest.raises(ValueError):
        lda_fit(np.zeros((2, 2)), [0])
