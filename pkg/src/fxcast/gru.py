"""Gated recurrent unit forecaster trained by backprop through time.

Gate equations per step (update z, reset r, tanh candidate):

    z_t = sigmoid(x_t W_z + h_{t-1} U_z + b_z)
    r_t = sigmoid(x_t W_r + h_{t-1} U_r + b_r)
    c_t = tanh(x_t W_h + (r_t * h_{t-1}) U_h + b_h)
    h_t = (1 - z_t) * h_{t-1} + z_t * c_t

The prediction is an activated affine head on the final hidden state of the
top layer. Training uses Adam on mean squared error over sliding sequences;
all randomness flows from one seed so runs are bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ValidationError

HIDDEN_UNITS_GRID = [2, 4, 8, 16, 32, 64]
N_LAYERS_GRID = [1, 2]
ACTIVATION_GRID = ["sigmoid", "relu"]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
DEFAULT_LEARNING_RATE = 1e-3
DEFAULT_EPOCHS = 200
DEFAULT_LOOKBACK = 5
DEFAULT_BATCH_SIZE = 32
INIT_SCALE = 0.1

_GATE_NAMES = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


def _head_activation(name: str, s: np.ndarray) -> np.ndarray:
    if name == "identity":
        return s
    if name == "sigmoid":
        return _sigmoid(s)
    if name == "relu":
        return np.maximum(0.0, s)
    raise ValidationError(f"unknown activation {name!r}")


def _head_activation_grad(name: str, s: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "identity":
        return np.ones_like(s)
    if name == "sigmoid":
        return a * (1.0 - a)
    return (s > 0).astype(float)


@dataclass
class GruParams:
    """All trainable tensors keyed by name, plus architecture metadata.

    Tensor names follow ``layer{i}.{gate}`` and ``head.w`` / ``head.b``.
    """

    tensors: dict[str, np.ndarray]
    n_layers: int
    hidden_units: int
    input_dim: int
    activation: str = "identity"
    lookback: int = DEFAULT_LOOKBACK
    seed: int = 0

    def layer(self, i: int, name: str) -> np.ndarray:
        return self.tensors[f"layer{i}.{name}"]

    def names(self) -> list[str]:
        return sorted(self.tensors)

    def to_json(self) -> str:
        doc = {
            "n_layers": self.n_layers,
            "hidden_units": self.hidden_units,
            "input_dim": self.input_dim,
            "activation": self.activation,
            "lookback": self.lookback,
            "seed": self.seed,
            "tensors": {
                k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in sorted(self.tensors.items())
            },
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GruParams":
        doc = json.loads(text)
        tensors = {
            k: np.array(spec["data"], dtype=float).reshape(spec["shape"]) for k, spec in doc["tensors"].items()
        }
        return cls(
            tensors=tensors,
            n_layers=doc["n_layers"],
            hidden_units=doc["hidden_units"],
            input_dim=doc["input_dim"],
            activation=doc["activation"],
            lookback=doc["lookback"],
            seed=doc["seed"],
        )


def init_gru_params(
    input_dim: int,
    hidden_units: int,
    n_layers: int,
    activation: str = "identity",
    lookback: int = DEFAULT_LOOKBACK,
    seed: int = 0,
) -> GruParams:
    """Uniform(-0.1, 0.1) weights; biases zero."""
    if n_layers not in (1, 2):
        raise ValidationError("n_layers must be 1 or 2")
    if hidden_units < 1:
        raise ValidationError("hidden_units must be >= 1")
    _head_activation(activation, np.zeros(1))  # validates name
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for layer in range(n_layers):
        d_in = input_dim if layer == 0 else hidden_units
        for gate in ("z", "r", "h"):
            tensors[f"layer{layer}.W_{gate}"] = rng.uniform(-INIT_SCALE, INIT_SCALE, (d_in, hidden_units))
            tensors[f"layer{layer}.U_{gate}"] = rng.uniform(-INIT_SCALE, INIT_SCALE, (hidden_units, hidden_units))
            tensors[f"layer{layer}.b_{gate}"] = np.zeros(hidden_units)
    tensors["head.w"] = rng.uniform(-INIT_SCALE, INIT_SCALE, hidden_units)
    tensors["head.b"] = np.zeros(1)
    return GruParams(
        tensors=tensors,
        n_layers=n_layers,
        hidden_units=hidden_units,
        input_dim=input_dim,
        activation=activation,
        lookback=lookback,
        seed=seed,
    )


def _forward_batch(params: GruParams, seqs: np.ndarray):
    """Run the recurrence over a (batch, steps, features) tensor.

    Returns (predictions, cache) where the cache holds every intermediate
    needed by the backward pass.
    """
    seqs = np.asarray(seqs, dtype=float)
    if seqs.ndim != 3:
        raise ValidationError("sequences must be 3-D (batch, steps, features)")
    B, L, D = seqs.shape
    if D != params.input_dim:
        raise ValidationError(f"feature count mismatch: params expect {params.input_dim}, got {D}")
    H = params.hidden_units
    layers_cache = []
    layer_input = seqs
    for li in range(params.n_layers):
        W_z, U_z, b_z = params.layer(li, "W_z"), params.layer(li, "U_z"), params.layer(li, "b_z")
        W_r, U_r, b_r = params.layer(li, "W_r"), params.layer(li, "U_r"), params.layer(li, "b_r")
        W_h, U_h, b_h = params.layer(li, "W_h"), params.layer(li, "U_h"), params.layer(li, "b_h")
        Z = np.empty((B, L, H))
        R = np.empty((B, L, H))
        C = np.empty((B, L, H))
        Hs = np.empty((B, L, H))
        h = np.zeros((B, H))
        for t in range(L):
            x = layer_input[:, t, :]
            z = _sigmoid(x @ W_z + h @ U_z + b_z)
            r = _sigmoid(x @ W_r + h @ U_r + b_r)
            c = np.tanh(x @ W_h + (r * h) @ U_h + b_h)
            h = (1.0 - z) * h + z * c
            Z[:, t], R[:, t], C[:, t], Hs[:, t] = z, r, c, h
        layers_cache.append({"input": layer_input, "Z": Z, "R": R, "C": C, "H": Hs})
        layer_input = Hs
    h_last = layers_cache[-1]["H"][:, -1, :]
    s = h_last @ params.tensors["head.w"] + params.tensors["head.b"][0]
    pred = _head_activation(params.activation, s)
    cache = {"layers": layers_cache, "s": s, "pred": pred, "shape": (B, L, D)}
    return pred, cache


def gru_forward(params: GruParams, sequence: np.ndarray) -> tuple[float, dict]:
    """Single-sequence forward pass; hidden states start at zero."""
    sequence = np.asarray(sequence, dtype=float)
    if sequence.ndim != 2:
        raise ValidationError("sequence must be 2-D (steps, features)")
    pred, cache = _forward_batch(params, sequence[None, :, :])
    return float(pred[0]), cache


def _backward_batch(params: GruParams, cache: dict, dpred: np.ndarray) -> dict[str, np.ndarray]:
    """BPTT given d(loss)/d(prediction) for each batch element."""
    B, L, D = cache["shape"]
    H = params.hidden_units
    grads = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    s, pred = cache["s"], cache["pred"]
    dLds = dpred * _head_activation_grad(params.activation, s, pred)
    h_last = cache["layers"][-1]["H"][:, -1, :]
    grads["head.w"] += h_last.T @ dLds
    grads["head.b"][0] += dLds.sum()
    # Gradient flowing into each layer's hidden sequence from above.
    d_upper = np.zeros((B, L, H))
    d_upper[:, -1, :] = np.outer(dLds, params.tensors["head.w"])
    for li in range(params.n_layers - 1, -1, -1):
        lc = cache["layers"][li]
        X, Z, R, C, Hs = lc["input"], lc["Z"], lc["R"], lc["C"], lc["H"]
        W_z, U_z = params.layer(li, "W_z"), params.layer(li, "U_z")
        W_r, U_r = params.layer(li, "W_r"), params.layer(li, "U_r")
        W_h, U_h = params.layer(li, "W_h"), params.layer(li, "U_h")
        dX = np.zeros_like(X)
        dh_carry = np.zeros((B, H))
        for t in range(L - 1, -1, -1):
            h_prev = Hs[:, t - 1, :] if t > 0 else np.zeros((B, H))
            x = X[:, t, :]
            z, r, c = Z[:, t, :], R[:, t, :], C[:, t, :]
            dh = d_upper[:, t, :] + dh_carry
            dz = dh * (c - h_prev)
            dc = dh * z
            dh_prev = dh * (1.0 - z)
            da_c = dc * (1.0 - c * c)
            grads[f"layer{li}.W_h"] += x.T @ da_c
            grads[f"layer{li}.U_h"] += (r * h_prev).T @ da_c
            grads[f"layer{li}.b_h"] += da_c.sum(axis=0)
            d_rh = da_c @ U_h.T
            dr = d_rh * h_prev
            dh_prev += d_rh * r
            dx = da_c @ W_h.T
            da_z = dz * z * (1.0 - z)
            grads[f"layer{li}.W_z"] += x.T @ da_z
            grads[f"layer{li}.U_z"] += h_prev.T @ da_z
            grads[f"layer{li}.b_z"] += da_z.sum(axis=0)
            dx += da_z @ W_z.T
            dh_prev += da_z @ U_z.T
            da_r = dr * r * (1.0 - r)
            grads[f"layer{li}.W_r"] += x.T @ da_r
            grads[f"layer{li}.U_r"] += h_prev.T @ da_r
            grads[f"layer{li}.b_r"] += da_r.sum(axis=0)
            dx += da_r @ W_r.T
            dh_prev += da_r @ U_r.T
            dX[:, t, :] = dx
            dh_carry = dh_prev
        d_upper = dX  # becomes the external gradient for the layer below
    return grads


def gru_loss_and_gradients(
    params: GruParams, seqs: np.ndarray, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean squared error over the batch and its full gradient."""
    targets = np.asarray(targets, dtype=float)
    pred, cache = _forward_batch(params, seqs)
    if targets.shape != pred.shape:
        raise ValidationError("targets length must match batch size")
    B = targets.shape[0]
    err = pred - targets
    loss = float(np.mean(err**2))
    dpred = 2.0 * err / B
    return loss, _backward_batch(params, cache, dpred)


def gru_backward(params: GruParams, seqs: np.ndarray, targets: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the batch-mean squared error for every parameter."""
    return gru_loss_and_gradients(params, seqs, targets)[1]


@dataclass(frozen=True)
class TrainLog:
    epoch_loss: tuple[float, ...]
    final_gradient_norm: float

    @property
    def epochs(self) -> int:
        return len(self.epoch_loss)


def build_sequences(X: np.ndarray, y: np.ndarray, lookback: int) -> tuple[np.ndarray, np.ndarray]:
    """Sliding windows of ``lookback`` consecutive rows; the target belongs
    to the window's final row. Drops the first lookback-1 rows."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if lookback < 1:
        raise ValidationError("lookback must be >= 1")
    if n < lookback:
        raise ValidationError(f"need at least {lookback} rows, got {n}")
    seqs = np.stack([X[t - lookback + 1 : t + 1] for t in range(lookback - 1, n)])
    return seqs, y[lookback - 1 :]


def fit_gru(
    seqs: np.ndarray,
    targets: np.ndarray,
    params: GruParams,
    epochs: int = DEFAULT_EPOCHS,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    batch_size: int | None = DEFAULT_BATCH_SIZE,
) -> tuple[GruParams, TrainLog]:
    """Adam training loop; aborts on non-finite loss."""
    seqs = np.asarray(seqs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n = seqs.shape[0]
    if batch_size is None or batch_size >= n:
        batch_size = n
    shuffle_rng = np.random.default_rng(np.random.SeedSequence(entropy=params.seed, spawn_key=(1,)))
    m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    v = {k: np.zeros_like(va) for k, va in params.tensors.items()}
    step = 0
    losses = []
    for epoch in range(epochs):
        order = shuffle_rng.permutation(n)
        sq_sum = 0.0
        for lo in range(0, n, batch_size):
            batch = order[lo : lo + batch_size]
            loss, grads = gru_loss_and_gradients(params, seqs[batch], targets[batch])
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"non-finite loss at epoch {epoch + 1}: gradients exploded; "
                    "lower the learning rate or standardize inputs"
                )
            sq_sum += loss * batch.size
            step += 1
            for k, g in grads.items():
                m[k] = ADAM_BETA1 * m[k] + (1 - ADAM_BETA1) * g
                v[k] = ADAM_BETA2 * v[k] + (1 - ADAM_BETA2) * g * g
                m_hat = m[k] / (1 - ADAM_BETA1**step)
                v_hat = v[k] / (1 - ADAM_BETA2**step)
                params.tensors[k] -= learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        losses.append(sq_sum / n)
    final_loss, final_grads = gru_loss_and_gradients(params, seqs, targets)
    if not np.isfinite(final_loss):
        raise DivergenceError("non-finite loss after training")
    grad_norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in final_grads.values())))
    return params, TrainLog(epoch_loss=tuple(losses), final_gradient_norm=grad_norm)


@dataclass
class GruForecaster:
    """Fitted-model wrapper: standardizes inputs with training statistics
    and keeps the last lookback-1 training rows as context so predictions
    can be made for rows that immediately follow the training block."""

    params: GruParams
    log: TrainLog
    x_means: np.ndarray
    x_sds: np.ndarray
    context: np.ndarray  # raw trailing training rows, may be empty

    @classmethod
    def fit(
        cls,
        X: np.ndarray,
        y: np.ndarray,
        hidden_units: int = 4,
        n_layers: int = 1,
        activation: str = "identity",
        lookback: int = DEFAULT_LOOKBACK,
        epochs: int = DEFAULT_EPOCHS,
        learning_rate: float = DEFAULT_LEARNING_RATE,
        batch_size: int | None = DEFAULT_BATCH_SIZE,
        seed: int = 0,
    ) -> "GruForecaster":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        means = X.mean(axis=0)
        sds = X.std(axis=0)
        sds = np.where(sds == 0.0, 1.0, sds)
        Xs = (X - means) / sds
        seqs, targets = build_sequences(Xs, y, lookback)
        params = init_gru_params(
            input_dim=X.shape[1],
            hidden_units=hidden_units,
            n_layers=n_layers,
            activation=activation,
            lookback=lookback,
            seed=seed,
        )
        params, log = fit_gru(
            seqs, targets, params, epochs=epochs, learning_rate=learning_rate, batch_size=batch_size
        )
        return cls(params=params, log=log, x_means=means, x_sds=sds, context=X[-(lookback - 1) :] if lookback > 1 else X[:0])

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Predict rows assumed to follow the training block in time; the
        stored context supplies lookback history for the earliest rows."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        full = np.vstack([self.context, X]) if self.context.size else X
        Xs = (full - self.x_means) / self.x_sds
        L = self.params.lookback
        n_ctx = full.shape[0] - X.shape[0]
        preds = np.empty(X.shape[0])
        for i in range(X.shape[0]):
            end = n_ctx + i + 1
            start = max(0, end - L)
            window = Xs[start:end]
            if window.shape[0] < L:  # not enough history: left-pad with the first row
                pad = np.repeat(window[:1], L - window.shape[0], axis=0)
                window = np.vstack([pad, window])
            pred, _ = gru_forward(self.params, window)
            preds[i] = pred
        return preds

    def describe(self) -> dict:
        return {
            "kind": "gru",
            "n_layers": self.params.n_layers,
            "hidden_units": self.params.hidden_units,
            "activation": self.params.activation,
            "lookback": self.params.lookback,
            "final_loss": self.log.epoch_loss[-1] if self.log.epoch_loss else None,
        }
