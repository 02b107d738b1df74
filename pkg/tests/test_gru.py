import numpy as np
import pytest

from fxcast.errors import DivergenceError, ValidationError
from fxcast.gru import (
    GruForecaster,
    GruParams,
    build_sequences,
    fit_gru,
    gru_backward,
    gru_forward,
    gru_loss_and_gradients,
    init_gru_params,
)
from fxcast.metrics import ForecastSeries, nrmse


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def randomize(params, rng, scale=0.5):
    for k in params.tensors:
        params.tensors[k] = rng.uniform(-scale, scale, params.tensors[k].shape)
    return params


def finite_difference_worst_error(params, seqs, targets, eps=1e-5):
    _, grads = gru_loss_and_gradients(params, seqs, targets)
    worst = 0.0
    for k, tensor in params.tensors.items():
        flat = tensor.ravel()
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + eps
            lp, _ = gru_loss_and_gradients(params, seqs, targets)
            flat[idx] = orig - eps
            lm, _ = gru_loss_and_gradients(params, seqs, targets)
            flat[idx] = orig
            fd = (lp - lm) / (2 * eps)
            an = grads[k].ravel()[idx]
            worst = max(worst, abs(an - fd) / max(abs(an), abs(fd), 1e-6))
    return worst


# ---------------------------------------------------------------------------
# forward


def test_forward_zero_weights_identity_head_predicts_zero(rng):
    params = init_gru_params(input_dim=3, hidden_units=4, n_layers=1, activation="identity", seed=0)
    for k in params.tensors:
        params.tensors[k] = np.zeros_like(params.tensors[k])
    pred, _ = gru_forward(params, rng.normal(size=(6, 3)))
    assert pred == 0.0


def test_forward_scalar_hand_evaluated_closed_form():
    params = init_gru_params(input_dim=1, hidden_units=1, n_layers=1, activation="identity", seed=0)
    w = {
        "layer0.W_z": 0.3, "layer0.U_z": 0.0, "layer0.b_z": 0.1,
        "layer0.W_r": -0.2, "layer0.U_r": 0.0, "layer0.b_r": 0.05,
        "layer0.W_h": 0.7, "layer0.U_h": 0.4, "layer0.b_h": -0.1,
        "head.w": 1.5, "head.b": 0.25,
    }
    for k, v in w.items():
        params.tensors[k] = np.full(params.tensors[k].shape, v)
    x = 0.8
    # hand evaluation with h0 = 0: the reset gate cannot act on a zero state
    z = sigmoid(w["layer0.W_z"] * x + w["layer0.b_z"])
    c = np.tanh(w["layer0.W_h"] * x + w["layer0.b_h"])  # r * h0 = 0
    h = (1 - z) * 0.0 + z * c
    expected = w["head.w"] * h + w["head.b"]
    pred, _ = gru_forward(params, np.array([[x]]))
    assert pred == pytest.approx(expected, abs=1e-12)


def test_forward_zero_recurrent_weights_collapse_to_last_step(rng):
    params = init_gru_params(input_dim=2, hidden_units=3, n_layers=1, activation="identity", seed=1)
    randomize(params, rng)
    for gate in ("z", "r", "h"):
        params.tensors[f"layer0.U_{gate}"] = np.zeros((3, 3))
    last = rng.normal(size=(1, 2))
    seq = np.vstack([rng.normal(size=(4, 2)), last])
    pred_long, _ = gru_forward(params, seq)
    pred_short, _ = gru_forward(params, last)
    # with zero recurrent matrices the gates ignore history, but h_{t-1}
    # still leaks through (1 - z); only the candidate/update path survives
    # when the previous state is zero, so compare against a fresh one-step run
    assert pred_long != pytest.approx(pred_short, abs=0)  # history via (1-z)h
    # true collapse requires z == 1: force b_z huge
    params.tensors["layer0.b_z"] = np.full(3, 60.0)
    pred_long, _ = gru_forward(params, seq)
    pred_short, _ = gru_forward(params, last)
    assert pred_long == pytest.approx(pred_short, abs=1e-9)


def test_forward_dimension_mismatch(rng):
    params = init_gru_params(input_dim=3, hidden_units=2, n_layers=1, seed=0)
    with pytest.raises(ValidationError):
        gru_forward(params, rng.normal(size=(4, 2)))


def test_hidden_states_bounded(rng):
    params = init_gru_params(input_dim=2, hidden_units=5, n_layers=2, seed=3)
    randomize(params, rng, scale=2.0)
    from fxcast.gru import _forward_batch

    _, cache = _forward_batch(params, rng.normal(size=(3, 10, 2)) * 5.0)
    for layer in cache["layers"]:
        assert np.all(np.abs(layer["H"]) < 1.0)


# ---------------------------------------------------------------------------
# backward


def test_backward_zero_loss_gives_zero_gradients():
    params = init_gru_params(input_dim=2, hidden_units=3, n_layers=1, activation="identity", seed=0)
    for k in params.tensors:
        params.tensors[k] = np.zeros_like(params.tensors[k])
    seqs = np.zeros((3, 4, 2))
    targets = np.zeros(3)  # prediction is exactly 0 -> zero loss
    grads = gru_backward(params, seqs, targets)
    for g in grads.values():
        np.testing.assert_array_equal(g, 0.0)


def test_backward_matches_central_differences_small_net(rng):
    params = init_gru_params(input_dim=3, hidden_units=2, n_layers=1, activation="identity", seed=0)
    randomize(params, rng)
    seqs = rng.normal(size=(5, 3, 3))
    targets = rng.normal(size=5)
    assert finite_difference_worst_error(params, seqs, targets) < 1e-4


def test_backward_gradient_keys_match_configured_layers():
    params = init_gru_params(input_dim=2, hidden_units=2, n_layers=1, seed=0)
    grads = gru_backward(params, np.zeros((2, 3, 2)), np.zeros(2))
    assert set(grads) == set(params.tensors)
    assert not any(k.startswith("layer1.") for k in grads)


# ---------------------------------------------------------------------------
# training


def test_fit_constant_target_converges_to_constant(rng):
    X = rng.normal(size=(60, 2))
    y = np.full(60, 0.7)
    model = GruForecaster.fit(X, y, hidden_units=3, n_layers=1, activation="identity",
                              lookback=3, epochs=150, learning_rate=0.01, seed=5)
    assert model.log.epoch_loss[-1] < 1e-4
    assert model.log.epoch_loss[-1] < model.log.epoch_loss[0]
    # the head bias moves toward the constant (the rest rides on w.h)
    assert model.params.tensors["head.b"][0] > 0.1
    preds = model.predict(rng.normal(size=(10, 2)))
    np.testing.assert_allclose(preds, 0.7, atol=0.05)


def test_fit_same_seed_identical_train_log(rng):
    X = rng.normal(size=(50, 2))
    y = rng.normal(size=50)
    a = GruForecaster.fit(X, y, hidden_units=2, epochs=10, seed=9)
    b = GruForecaster.fit(X, y, hidden_units=2, epochs=10, seed=9)
    assert a.log.epoch_loss == b.log.epoch_loss
    assert a.params.to_json() == b.params.to_json()
    c = GruForecaster.fit(X, y, hidden_units=2, epochs=10, seed=10)
    assert a.log.epoch_loss != c.log.epoch_loss


def test_fit_linear_target_reaches_low_nrmse(rng):
    x = rng.uniform(0.0, 1.0, size=300)
    X = x.reshape(-1, 1)
    y = x.copy()
    model = GruForecaster.fit(X, y, hidden_units=8, n_layers=1, activation="identity",
                              lookback=3, epochs=200, seed=2)
    seq_targets = y[2:]
    preds = model_predict_in_sample(model, X)
    score = nrmse(ForecastSeries(y=seq_targets, yhat=preds))
    assert score < 0.1


def model_predict_in_sample(model, X):
    """Forward passes over the training rows themselves (sequence-aligned)."""
    from fxcast.gru import build_sequences, gru_forward

    Xs = (X - model.x_means) / model.x_sds
    seqs, _ = build_sequences(Xs, np.zeros(X.shape[0]), model.params.lookback)
    return np.array([gru_forward(model.params, s)[0] for s in seqs])


def test_fit_divergence_aborts():
    # targets so large the squared error overflows to inf: the trainer must
    # stop with a diagnostic instead of grinding on garbage
    X = np.arange(40, dtype=float).reshape(-1, 1)
    y = np.full(40, 1e160)
    with pytest.raises(DivergenceError):
        GruForecaster.fit(X, y, hidden_units=2, epochs=5, seed=0)


def test_train_log_length_matches_epochs(rng):
    X = rng.normal(size=(30, 2))
    y = rng.normal(size=30)
    model = GruForecaster.fit(X, y, hidden_units=2, epochs=7, seed=0)
    assert model.log.epochs == 7
    assert np.isfinite(model.log.final_gradient_norm)


def test_build_sequences_shapes(rng):
    X = rng.normal(size=(10, 3))
    y = np.arange(10.0)
    seqs, targets = build_sequences(X, y, lookback=4)
    assert seqs.shape == (7, 4, 3)
    np.testing.assert_array_equal(targets, y[3:])
    np.testing.assert_array_equal(seqs[0], X[0:4])
    with pytest.raises(ValidationError):
        build_sequences(X, y, lookback=11)


def test_params_json_round_trip(rng):
    params = init_gru_params(input_dim=2, hidden_units=3, n_layers=2, activation="relu", seed=4)
    clone = GruParams.from_json(params.to_json())
    assert clone.activation == "relu"
    for k in params.tensors:
        np.testing.assert_array_equal(clone.tensors[k], params.tensors[k])
    seq = rng.normal(size=(4, 2))
    assert gru_forward(clone, seq)[0] == gru_forward(params, seq)[0]


def test_gradient_check_across_architectures(rng):
    # 10 random parameterizations spanning 1-2 layers and hidden 2/8
    cases = [(1, 2), (1, 8), (2, 2), (2, 8), (1, 2), (2, 8), (1, 8), (2, 2), (1, 2), (2, 8)]
    for i, (layers, hidden) in enumerate(cases):
        params = init_gru_params(input_dim=2, hidden_units=hidden, n_layers=layers,
                                 activation="sigmoid" if i % 2 else "identity", seed=i)
        randomize(params, np.random.default_rng(100 + i))
        seqs = np.random.default_rng(200 + i).normal(size=(3, 3, 2))
        targets = np.random.default_rng(300 + i).normal(size=3)
        assert finite_difference_worst_error(params, seqs, targets) < 1e-4
