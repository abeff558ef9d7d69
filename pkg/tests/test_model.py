import json

import numpy as np
import pytest

from gvar.autodiff import Tensor
from gvar.errors import DimensionError, InsufficientDataError, UsageError
from gvar.model import (
    GvarModel,
    coefficients_over_series,
    forecast_series,
    lag_coefficients,
    predict,
)


def constant_model(mats, p):
    """Model whose k-th network ignores its input and returns ``mats[k]``."""
    model = GvarModel.initialise(p, len(mats), hidden=(3,), seed=0)
    for net, M in zip(model.nets, mats):
        for name in net:
            net[name].data[...] = 0.0
        net["b1"].data[...] = np.asarray(M, float).ravel()
    return model


def naive_predict(doc, window):
    """Forecast recomputed from the JSON checkpoint with plain numpy."""
    p, K = doc["p"], doc["K"]
    mean = np.array(doc["standardization"]["mean"])
    std = np.array(doc["standardization"]["std"])
    z = (window - mean) / std
    total = np.zeros(p)
    for k in range(1, K + 1):
        params = doc["nets"][k - 1]["parameters"]
        h = z[K - k]
        n_layers = len(doc["nets"][k - 1]["layer_spec"]) - 1
        for layer in range(n_layers):
            W = np.array(params[f"W{layer}"]["data"]).reshape(params[f"W{layer}"]["shape"])
            h = h @ W + np.array(params[f"b{layer}"]["data"])
            if layer < n_layers - 1:
                h = np.maximum(h, 0)
        total += h.reshape(p, p) @ z[K - k]
    return mean + std * total


def test_zero_networks_forecast_zero(rng):
    model = constant_model([np.zeros((3, 3))] * 2, 3)
    forecast, coefs = predict(model, rng.normal(size=(2, 3)))
    assert np.array_equal(forecast, np.zeros(3))
    assert coefs.shape == (2, 3, 3)


def test_constant_network_is_linear_var(rng):
    M = rng.normal(size=(3, 3))
    model = constant_model([M], 3)
    x = rng.normal(size=(1, 3))
    forecast, coefs = predict(model, x)
    assert np.max(np.abs(forecast - M @ x[0])) < 1e-12
    assert np.array_equal(coefs[0], M)


def test_linear_reduction_with_two_lags(rng):
    M1, M2 = rng.normal(size=(2, 4, 4))
    model = constant_model([M1, M2], 4)
    x = rng.normal(size=(30, 4))
    expected = x[1:-1] @ M1.T + x[:-2] @ M2.T
    assert np.max(np.abs(forecast_series(model, x) - expected)) < 1e-12


def test_row_is_target_column_is_source():
    M = np.zeros((2, 2))
    M[0, 1] = 2.0  # variable 1 drives variable 0
    model = constant_model([M], 2)
    forecast, _ = predict(model, np.array([[0.0, 1.0]]))
    assert np.array_equal(forecast, [2.0, 0.0])


def test_predict_matches_checkpoint_reimplementation(rng, tmp_path):
    model = GvarModel.initialise(4, 3, hidden=(8, 6), seed=5, mean=rng.normal(size=4),
                                 std=rng.uniform(0.5, 2, size=4))
    path = tmp_path / "model.json"
    model.save(path)
    doc = json.loads(path.read_text())
    window = rng.normal(size=(3, 4))
    forecast, _ = predict(model, window)
    assert np.max(np.abs(forecast - naive_predict(doc, window))) < 1e-12
    loaded = GvarModel.load(path)
    assert np.array_equal(predict(loaded, window)[0], forecast)


def test_window_errors():
    model = GvarModel.initialise(3, 2, hidden=(4,))
    with pytest.raises(DimensionError):
        predict(model, np.ones((2, 4)))
    with pytest.raises(DimensionError):
        predict(model, np.ones((3, 3)))


def test_coefficient_tensor_matches_predict(rng):
    model = GvarModel.initialise(3, 2, hidden=(5,), seed=1)
    x = rng.normal(size=(12, 3))
    coefs = coefficients_over_series(model, x)
    assert coefs.values.shape == (10, 2, 3, 3)
    assert list(coefs.times) == list(range(3, 13))
    for row, t in enumerate(coefs.times):
        window = x[t - 1 - 2:t - 1]
        forecast, mats = predict(model, window)
        # batched and single-row BLAS calls may differ in the last ulp
        assert np.max(np.abs(coefs.values[row] - mats)) < 1e-12
        assert np.max(np.abs(coefs.forecasts(x, model)[row] - forecast)) < 1e-12


def test_boundary_length(rng):
    model = GvarModel.initialise(2, 3, hidden=(4,))
    assert coefficients_over_series(model, rng.normal(size=(4, 2))).values.shape[0] == 1
    with pytest.raises(InsufficientDataError):
        coefficients_over_series(model, rng.normal(size=(3, 2)))


def test_constant_networks_give_constant_tensor(rng):
    model = constant_model([rng.normal(size=(2, 2))], 2)
    values = coefficients_over_series(model, rng.normal(size=(20, 2))).values
    assert np.all(values == values[0])


def test_k_th_network_sees_lag_k(rng):
    model = GvarModel.initialise(2, 2, hidden=(4,), seed=3)
    x = rng.normal(size=(5, 2))
    coefs = coefficients_over_series(model, x).values
    direct = lag_coefficients(model, 2, Tensor(x[:1])).data[0]
    assert np.array_equal(coefs[0, 1], direct)  # t = 3 uses x_1 at lag 2


def test_checkpoint_version_check(rng):
    doc = GvarModel.initialise(2, 1, hidden=(3,)).to_dict()
    doc["format_version"] = 0
    with pytest.raises(UsageError):
        GvarModel.from_dict(doc)


def test_network_count_invariant():
    model = GvarModel.initialise(2, 2, hidden=(3,))
    with pytest.raises(DimensionError):
        GvarModel(2, 3, (3,), model.nets)
