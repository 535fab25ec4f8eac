import math

import numpy as np
import pytest

import pdmotion


def test_window_count():
    assert pdmotion.window_count(1500, 250, 125) == 11
    assert pdmotion.window_count(100, 250, 125) == 0


def test_metrics():
    ap = pdmotion.average_precision([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0])
    assert ap == 0.5 * 1.0 + 0.5 * (2.0 / 3.0)
    assert pdmotion.balanced_accuracy([0, 0, 1, 1], [0, 1, 1, 1]) == 0.75
    assert pdmotion.rc_baseline([0.25] * 4) == (0.25, 0.25)
    with pytest.raises(pdmotion.DataError):
        pdmotion.average_precision([0.1, 0.2], [0, 0])


def test_aso_and_bonferroni():
    a = [0.90 + 0.001 * i for i in range(10)]
    b = [0.50 + 0.001 * i for i in range(10)]
    r = pdmotion.aso(a, b, seed=1)
    assert r["dominant"] and r["epsilon_min"] < 0.05
    assert not pdmotion.aso(a, a, seed=1)["dominant"]
    assert math.isclose(pdmotion.epsilon_w2(a, b) + pdmotion.epsilon_w2(b, a), 1.0)
    assert math.isclose(pdmotion.bonferroni(0.05, 30), 0.05 / 30)


def test_architecture_counts():
    assert pdmotion.inception_parameter_count() == 490564
    assert pdmotion.mlp_parameter_count() == 26116
    assert pdmotion.filter_lengths(40, 3) == [40, 20, 10]


def test_rocket_ridge_pipeline():
    data = pdmotion.synth_windows(n_patients=4, labels=[0, 2], segment_seconds=30.0, window_seconds=10.0, seed=3)
    x, y = data["x"], data["y"]
    assert x.ndim == 3 and x.shape[1] == 3 and x.shape[2] == 500
    assert len(data["patients"]) == len(y)
    features = pdmotion.rocket_transform(x, n_kernels=100, seed=1)
    assert features.shape == (x.shape[0], 600)
    assert np.all(np.isfinite(features))
    model = pdmotion.ridge_cv(features, y.tolist(), k=3)
    scores = model.decision_function(features)
    assert scores.shape == (x.shape[0], 2)
    assert pdmotion.accuracy(y.tolist(), model.predict(features)) > 0.9


def test_wavelet_features():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(3, 3, 512))
    f = pdmotion.wavelet_features(x)
    assert f.shape == (3, 70)
    assert np.allclose(pdmotion.wavelet_features(-x), f)
