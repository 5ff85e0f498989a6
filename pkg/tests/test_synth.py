import numpy as np
import pytest
from scipy import stats
from scipy.integrate import trapezoid
from hypothesis import given, settings, strategies as st

from auxcpd.signal import snr_db
from auxcpd.synth import (
    SynthConfig,
    gamma_mode1,
    make_dataset,
    make_trial,
    mode1_for_class,
    mode2_components,
    mode2_course,
)


def test_gamma_exponential_case():
    g = gamma_mode1(1.0, 1.0, 61)
    assert g[0] == pytest.approx(1.0)
    x = np.linspace(0, 12, 61)
    np.testing.assert_allclose(g, np.exp(-x), rtol=1e-12)


def test_gamma_mode():
    g = gamma_mode1(2.0, 2.0, 61)
    x = np.linspace(0, 12, 61)
    assert x[np.argmax(g)] == pytest.approx(x[np.argmin(np.abs(x - 2.0))])


def test_gamma_trapezoid_matches_cdf():
    x = np.linspace(0, 12, 61)
    # shape < 2 has an unbounded slope at 0, where the trapezoid rule itself loses accuracy
    for k, theta in [(2.0, 2.0), (2.1, 1.9), (3.0, 1.0)]:
        area = trapezoid(gamma_mode1(k, theta, 61), x)
        assert area == pytest.approx(stats.gamma.cdf(12, k, scale=theta), abs=1e-3)


def test_gamma_errors():
    with pytest.raises(ValueError):
        gamma_mode1(0.0, 1.0, 10)
    with pytest.raises(ValueError):
        gamma_mode1(1.0, -1.0, 10)


def test_class_reversal():
    c1 = mode1_for_class(1, 2.0, 2.0, 61)
    c2 = mode1_for_class(2, 2.0, 2.0, 61)
    np.testing.assert_array_equal(c2[::-1], c1)
    assert np.argmax(c2) == 60 - np.argmax(c1)
    diff = c1 - c2
    # class 1 is higher on the left, class 2 on the right
    assert diff[2:15].min() > 0 and diff[-15:-2].max() < 0
    assert np.any(np.diff(np.sign(diff)) != 0)
    with pytest.raises(ValueError):
        mode1_for_class(3, 2.0, 2.0, 61)


def test_mode2_course():
    c = mode2_course(201)
    np.testing.assert_array_equal(c, mode2_course(201))
    np.testing.assert_allclose(c, mode2_components(201).sum(axis=0) + SynthConfig().mode2_offset)
    assert mode2_components(201).shape[0] == 3
    assert c.max() - c.min() > 0 and c.min() > 0


def test_high_snr_trial_matches_clean():
    cfg = SynthConfig(snr_db=60.0)
    clean, noise = make_trial(1, cfg, np.random.default_rng(0), with_parts=True)
    assert np.corrcoef(clean.ravel(), (clean + noise).ravel())[0, 1] > 0.999


def test_clean_trial_is_rank_one_and_nonnegative():
    clean, _ = make_trial(2, SynthConfig(), np.random.default_rng(3), with_parts=True)
    s = np.linalg.svd(clean, compute_uv=False)
    assert (clean >= 0).all() and s[1] <= 1e-12 * s[0]


@pytest.mark.parametrize("target", [-16.8, -8.0, 0.0, 4.0])
def test_realized_snr_100_trials(target):
    cfg = SynthConfig(snr_db=target)
    rng = np.random.default_rng(17)
    for i in range(100):
        clean, noise = make_trial(1 + i % 2, cfg, rng, with_parts=True)
        assert abs(snr_db(clean, noise) - target) <= 0.1


def test_same_seed_same_trial():
    cfg = SynthConfig(snr_db=-5)
    a = make_trial(1, cfg, np.random.default_rng(9))
    b = make_trial(1, cfg, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_dataset_default_layout():
    tr, te = make_dataset(SynthConfig())
    assert len(tr) == 100 and len(te) == 100
    assert tr.trial_shape == (1, 61, 201)
    assert tr.counts() == {1: 50, 2: 50} and te.counts() == {1: 50, 2: 50}
    flat_tr = {t.tobytes() for t in tr.trials}
    assert not flat_tr & {t.tobytes() for t in te.trials}


def test_dataset_reproducible():
    cfg = SynthConfig(n_train=3, n_test=2, seed=5)
    (a, b), (c, d) = make_dataset(cfg), make_dataset(cfg)
    np.testing.assert_array_equal(a.trials, c.trials)
    np.testing.assert_array_equal(b.trials, d.trials)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(len1=1)
    with pytest.raises(ValueError):
        SynthConfig(n_train=0)
