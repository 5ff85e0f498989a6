import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from auxcpd.nls import SolverOptions
from auxcpd.supervised import (
    LabeledTrialSet,
    classify,
    classify_many,
    fold_training_tensor,
    parameter_count,
    projection_matrix,
    train,
)
from auxcpd.tensor import khatri_rao, pseudo_inverse


def planted(rng, shape=(2, 5, 6), n_per=4, n_classes=2):
    """Training set that is exactly a fifth-order CP tensor with identity class factor."""
    a = [rng.uniform(0.2, 1.0, size=(s, n_classes)) for s in shape]
    d = rng.uniform(0.5, 1.5, size=(n_per, n_classes))
    trials, labels = [], []
    for c in range(n_classes):
        pattern = np.einsum("i,j,k->ijk", a[0][:, c], a[1][:, c], a[2][:, c])
        for j in range(n_per):
            trials.append(d[j, c] * pattern)
            labels.append(c + 1)
    return a, d, LabeledTrialSet(trials, labels)


def test_fold_placement():
    t1 = np.arange(8.0).reshape(2, 2, 2)
    t2 = -np.arange(8.0).reshape(2, 2, 2)
    t, classes = fold_training_tensor(LabeledTrialSet([t2, t1], ["b", "a"]))
    assert t.shape == (2, 2, 2, 1, 2) and classes == ["a", "b"]
    np.testing.assert_array_equal(t[:, :, :, 0, 0], t1)
    np.testing.assert_array_equal(t[:, :, :, 0, 1], t2)


def test_fold_fifty_per_class():
    data = LabeledTrialSet(np.zeros((100, 1, 2, 2)), [1] * 50 + [2] * 50)
    assert fold_training_tensor(data)[0].shape[3] == 50


def test_fold_subsample_is_seeded():
    trials = np.arange(8.0)[:, None, None, None] * np.ones((8, 1, 1, 1))
    data = LabeledTrialSet(trials, [1] * 5 + [2] * 3)
    t1, _ = fold_training_tensor(data, seed=4)
    t2, _ = fold_training_tensor(data, seed=4)
    assert t1.shape[3] == 3
    np.testing.assert_array_equal(t1, t2)
    picked = t1[0, 0, 0, :, 0]
    assert set(picked) <= {0, 1, 2, 3, 4} and list(picked) == sorted(picked)
    with pytest.raises(ValueError):
        fold_training_tensor(data, subsample=False)


def test_trial_set_validation():
    with pytest.raises(ValueError):
        LabeledTrialSet(np.zeros((3, 2, 2)), [1, 2])
    with pytest.raises(ValueError):
        LabeledTrialSet([np.zeros((2, 2)), np.zeros((2, 3))], [1, 2])


def test_train_on_planted_model():
    rng = np.random.default_rng(5)
    a, d, data = planted(rng)
    model = train(data, SolverOptions(rank=2, seed=0))
    assert model.report.rel_error < 1e-6
    labels, _ = classify_many(data.trials, model)
    assert labels == data.labels
    np.testing.assert_array_equal(model.factors[4], np.eye(2))
    assert all((f >= 0).all() for f in model.factors[:4])
    # cached projection matches its definition
    a1, a2, a3 = model.factors[:3]
    np.testing.assert_allclose(model.projection, pseudo_inverse(khatri_rao(a3, a2, a1).T))


def test_four_class_identity():
    rng = np.random.default_rng(8)
    _, _, data = planted(rng, shape=(2, 6, 7), n_per=3, n_classes=4)
    model = train(data, SolverOptions(rank=4, seed=1, max_iter=50))
    np.testing.assert_array_equal(model.factors[4], np.eye(4))
    assert model.rank == 4


def test_rank_is_forced_to_class_count(caplog):
    rng = np.random.default_rng(2)
    _, _, data = planted(rng)
    model = train(data, SolverOptions(rank=5, max_iter=5))
    assert model.rank == 2
    with pytest.raises(ValueError):
        train(LabeledTrialSet(np.ones((3, 2, 2, 2)), [1, 1, 1]))


def test_class_factor_is_not_mutated():
    rng = np.random.default_rng(3)
    _, _, data = planted(rng)
    model = train(data, SolverOptions(max_iter=10))
    before = model.factors[4].tobytes()
    classify(data.trials[0], model)
    assert model.factors[4].tobytes() == before == np.eye(2).tobytes()


def test_classify_planted_pattern_gives_unit_scores():
    rng = np.random.default_rng(4)
    a, _, data = planted(rng)
    model = train(data, SolverOptions(seed=0))
    a1, a2, a3 = model.factors[:3]
    for c in range(2):
        trial = 3.7 * np.einsum("i,j,k->ijk", a1[:, c], a2[:, c], a3[:, c])
        pred = classify(trial, model)
        assert pred.label == c + 1
        np.testing.assert_allclose(pred.scores, 3.7 * np.eye(2)[c], atol=1e-8)


def test_zero_trial_ties_to_first_class():
    rng = np.random.default_rng(4)
    _, _, data = planted(rng)
    model = train(data, SolverOptions(max_iter=10))
    pred = classify(np.zeros(model.trial_shape), model)
    assert pred.label == 1 and not pred.scores.any()
    with pytest.raises(ValueError):
        classify(np.zeros((1, 1, 1)), model)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), lam=st.floats(1e-3, 1e3))
def test_scaling_invariance_and_argmax(seed, lam):
    rng = np.random.default_rng(seed)
    model = _cached_model()
    trial = rng.uniform(size=model.trial_shape)
    p1, p2 = classify(trial, model), classify(lam * trial, model)
    assert p1.label == p2.label
    np.testing.assert_allclose(p2.scores, lam * p1.scores, rtol=1e-10, atol=1e-12)
    assert p1.label == model.classes[int(np.argmax(p1.scores))]


_MODEL = []


def _cached_model():
    if not _MODEL:
        _, _, data = planted(np.random.default_rng(11))
        _MODEL.append(train(data, SolverOptions(seed=0)))
    return _MODEL[0]


def test_determinism():
    _, _, data = planted(np.random.default_rng(6))
    m1 = train(data, SolverOptions(seed=9, max_iter=20))
    m2 = train(data, SolverOptions(seed=9, max_iter=20))
    assert all(x.tobytes() == y.tobytes() for x, y in zip(m1.factors, m2.factors))
    assert classify_many(data.trials, m1)[0] == classify_many(data.trials, m2)[0]


def test_projection_matrix_shape(rng):
    f = [rng.uniform(size=(n, 2)) for n in (2, 3, 4)]
    assert projection_matrix(f).shape == (24, 2)


def test_parameter_count():
    assert parameter_count((3, 10, 20, 70), 2, 2) == (206, 346)
    assert parameter_count((3, 10, 20, 70), 2, 0) == (0, 0)


@given(dims=st.tuples(*[st.integers(1, 200)] * 4), r=st.integers(1, 10), c=st.integers(2, 5))
def test_parameter_count_order(dims, r, c):
    p, u = parameter_count(dims, c, r)
    assert p < u
    assert u - p == (c - 1) * dims[3] * r
