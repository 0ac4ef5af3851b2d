"""Dense fully-connected networks with hand-rolled backpropagation.

Hidden layers are rectified-linear, the output layer is softmax, and the
loss is mean cross-entropy. Two optimizers are supported: plain SGD and
DP-SGD (per-sample gradient clipping plus Gaussian noise on the averaged
clipped gradient). Everything is seeded and bit-deterministic.

A Network is immutable during inference; training works on a private copy.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

PROB_FLOOR = 1e-12  # cross-entropy clamp, prevents log(0) on confident nets

_CHECKPOINT_MAGIC = b"CLPNET1\n"
_DTYPE_CODES = {1: np.dtype("<f8"), 2: np.dtype("<f4")}


@dataclass
class Network:
    """A stack of affine layers: weights[i] has shape (dims[i+1], dims[i])."""

    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def dtype(self) -> np.dtype:
        return self.weights[0].dtype

    def copy(self) -> "Network":
        return Network(
            self.layer_dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass
class TrainConfig:
    """Hyper-parameters for one training run."""

    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 0.1
    optimizer: str = "sgd"  # "sgd" | "dp_sgd"
    dp_clip: float | None = None  # per-sample gradient L2 bound
    dp_noise: float | None = None  # noise multiplier sigma
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.optimizer not in ("sgd", "dp_sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.optimizer == "dp_sgd":
            if self.dp_clip is None or self.dp_noise is None:
                raise ConfigError("dp_sgd requires dp_clip and dp_noise")
            if self.dp_clip <= 0:
                raise ConfigError("dp_clip must be positive")
            if self.dp_noise < 0:
                raise ConfigError("dp_noise must be nonnegative")


def init_network(
    layer_dims: tuple[int, ...] | list[int],
    seed: int = 0,
    dtype: np.dtype | str = np.float64,
) -> Network:
    """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ConfigError(f"layer_dims must be >= 2 positive sizes, got {dims}")
    rng = np.random.default_rng(seed)
    dt = np.dtype(dtype)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)).astype(dt))
        biases.append(rng.uniform(-bound, bound, size=fan_out).astype(dt))
    return Network(dims, weights, biases)


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def _forward_cache(net: Network, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Returns per-layer input activations and the output probabilities."""
    acts = [x]
    a = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        if i < net.n_layers - 1:
            a = np.maximum(z, 0.0)
            acts.append(a)
        else:
            return acts, _softmax_rows(z)
    raise AssertionError("unreachable")


def _check_features(net: Network, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=net.dtype)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise InputError(
            f"feature dimension {x.shape[-1] if x.ndim else '?'} does not match "
            f"network input dim {net.input_dim}"
        )
    return x


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Posterior vector (softmax of final logits) for a single sample."""
    batch = _check_features(net, np.asarray(x))
    if batch.shape[0] != 1:
        raise InputError("forward takes a single sample; use forward_batch")
    return _forward_cache(net, batch)[1][0]


def forward_batch(net: Network, x: np.ndarray) -> np.ndarray:
    """Row-wise posteriors for a batch, shape (n, output_dim)."""
    return _forward_cache(net, _check_features(net, x))[1]


def predict(net: Network, x: np.ndarray) -> np.ndarray:
    """Predicted class ids for a batch."""
    return np.argmax(forward_batch(net, x), axis=1)


def accuracy(net: Network, x: np.ndarray, y: np.ndarray) -> float:
    """Fraction of samples whose argmax posterior equals the label."""
    return float(np.mean(predict(net, x) == np.asarray(y)))


def per_sample_loss(net: Network, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cross-entropy loss of each sample, shape (n,)."""
    probs = forward_batch(net, x)
    y = _check_labels(y, probs.shape[0], net.output_dim)
    p = np.clip(probs[np.arange(len(y)), y], PROB_FLOOR, None)
    return -np.log(p)


def _check_labels(y: np.ndarray, n: int, n_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.shape != (n,):
        raise InputError(f"labels shape {y.shape} does not match batch size {n}")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise InputError(f"labels must be in [0, {n_classes})")
    return y.astype(np.intp)


def _backward(
    net: Network,
    acts: list[np.ndarray],
    probs: np.ndarray,
    y: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Exact gradients of the mean cross-entropy; deltas scaled by 1/n."""
    n = probs.shape[0]
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    for i in range(net.n_layers - 1, -1, -1):
        grad_w[i] = delta.T @ acts[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i]) * (acts[i] > 0)
    return grad_w, grad_b


def loss_and_grad(
    net: Network, x: np.ndarray, y: np.ndarray
) -> tuple[float, tuple[list[np.ndarray], list[np.ndarray]]]:
    """Mean cross-entropy over the batch and its exact analytic gradients.

    Gradients come back as (per-layer weight grads, per-layer bias grads)
    with the same shapes as the network parameters.
    """
    x = _check_features(net, x)
    if x.shape[0] == 0:
        raise InputError("batch must be nonempty")
    y = _check_labels(y, x.shape[0], net.output_dim)
    acts, probs = _forward_cache(net, x)
    p = np.clip(probs[np.arange(len(y)), y], PROB_FLOOR, None)
    loss = float(np.mean(-np.log(p)))
    return loss, _backward(net, acts, probs, y)


def sgd_step(
    net: Network,
    grads: tuple[list[np.ndarray], list[np.ndarray]],
    lr: float,
) -> Network:
    """Pure SGD update: every parameter p becomes p - lr * g."""
    grad_w, grad_b = grads
    if len(grad_w) != net.n_layers or len(grad_b) != net.n_layers:
        raise InputError("gradient layer count does not match network")
    for gw, gb, w, b in zip(grad_w, grad_b, net.weights, net.biases):
        if gw.shape != w.shape or gb.shape != b.shape:
            raise InputError("gradient shapes do not match network parameters")
    return Network(
        net.layer_dims,
        [w - lr * gw for w, gw in zip(net.weights, grad_w)],
        [b - lr * gb for b, gb in zip(net.biases, grad_b)],
    )


def _clipped_noisy_grads(
    net: Network,
    x: np.ndarray,
    y: np.ndarray,
    clip: float,
    noise: float,
    rng: np.random.Generator,
) -> tuple[float, tuple[list[np.ndarray], list[np.ndarray]], np.ndarray]:
    """DP aggregation: clip per-sample grads to L2 <= clip, average, add noise.

    Per-sample gradients are never materialized; for an affine layer the
    sample gradient is an outer product delta x act, so its squared norm
    factorizes as |delta|^2 * (|act|^2 + 1).
    """
    if clip <= 0:
        raise ConfigError("dp clip bound must be positive")
    if noise < 0:
        raise ConfigError("dp noise multiplier must be nonnegative")
    n = x.shape[0]
    acts, probs = _forward_cache(net, x)
    p = np.clip(probs[np.arange(len(y)), y], PROB_FLOOR, None)
    loss = float(np.mean(-np.log(p)))

    # Unscaled per-sample deltas for every layer, output to input.
    deltas: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    for i in range(net.n_layers - 1, -1, -1):
        deltas[i] = delta
        if i > 0:
            delta = (delta @ net.weights[i]) * (acts[i] > 0)

    sq_norms = np.zeros(n, dtype=net.dtype)
    for i in range(net.n_layers):
        sq_norms += (deltas[i] ** 2).sum(axis=1) * ((acts[i] ** 2).sum(axis=1) + 1.0)
    norms = np.sqrt(sq_norms)
    factors = np.minimum(1.0, clip / np.maximum(norms, PROB_FLOOR))
    clipped = norms * factors
    assert np.all(clipped <= clip * (1.0 + 1e-9)), "per-sample clip bound violated"

    noise_std = noise * clip / n
    grad_w, grad_b = [], []
    for i in range(net.n_layers):
        scaled = deltas[i] * factors[:, None]
        gw = (scaled.T @ acts[i]) / n
        gb = scaled.sum(axis=0) / n
        if noise > 0:
            gw = gw + rng.normal(0.0, noise_std, size=gw.shape).astype(net.dtype)
            gb = gb + rng.normal(0.0, noise_std, size=gb.shape).astype(net.dtype)
        grad_w.append(gw)
        grad_b.append(gb)
    return loss, (grad_w, grad_b), probs


def dp_sgd_step(
    net: Network,
    x: np.ndarray,
    y: np.ndarray,
    lr: float,
    clip: float,
    noise: float,
    rng: np.random.Generator,
) -> Network:
    """One DP-SGD update on a batch; deterministic given the rng state.

    Gaussian noise with std noise * clip / batch_size is added per
    coordinate of the averaged clipped gradient. With noise = 0 the rng
    is left untouched, so the update stream matches plain SGD whenever
    clipping is inactive.
    """
    x = _check_features(net, x)
    if x.shape[0] == 0:
        raise InputError("batch must be nonempty")
    y = _check_labels(y, x.shape[0], net.output_dim)
    _, grads, _ = _clipped_noisy_grads(net, x, y, clip, noise, rng)
    return sgd_step(net, grads, lr)


def _apply_step_inplace(
    net: Network, grads: tuple[list[np.ndarray], list[np.ndarray]], lr: float
) -> None:
    for w, gw in zip(net.weights, grads[0]):
        w -= lr * gw
    for b, gb in zip(net.biases, grads[1]):
        b -= lr * gb


def train(
    net: Network,
    x: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
) -> tuple[Network, dict[str, list[float]]]:
    """Epoch-based training with a fresh random batch order every epoch.

    Returns the trained network (the input is left untouched) and a
    history dict with per-epoch mean batch loss and accuracy. The last
    partial batch is kept. Bit-deterministic under a fixed seed.
    """
    config.validate()
    x = _check_features(net, x)
    if x.shape[0] == 0:
        raise InputError("training split must be nonempty")
    y = _check_labels(y, x.shape[0], net.output_dim)
    rng = np.random.default_rng(config.seed)
    out = net.copy()
    history: dict[str, list[float]] = {"loss": [], "accuracy": []}
    n = x.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        epoch_correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            bx, by = x[idx], y[idx]
            epoch_loss, epoch_correct = _train_step(
                out, bx, by, config, rng, epoch_loss, epoch_correct
            )
        history["loss"].append(epoch_loss / n)
        history["accuracy"].append(epoch_correct / n)
    return out, history


def _train_step(
    net: Network,
    bx: np.ndarray,
    by: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
    loss_sum: float,
    correct_sum: int,
) -> tuple[float, int]:
    """One optimizer step, mutating net in place; returns updated tallies."""
    if config.optimizer == "dp_sgd":
        loss, grads, probs = _clipped_noisy_grads(
            net, bx, by, config.dp_clip, config.dp_noise, rng
        )
    else:
        acts, probs = _forward_cache(net, bx)
        p = np.clip(probs[np.arange(len(by)), by], PROB_FLOOR, None)
        loss = float(np.mean(-np.log(p)))
        grads = _backward(net, acts, probs, by)
    correct = int(np.sum(probs.argmax(axis=1) == by))
    _apply_step_inplace(net, grads, config.learning_rate)
    return loss_sum + loss * len(by), correct_sum + correct


def embed(net: Network, x: np.ndarray) -> np.ndarray:
    """Penultimate-layer activations for a single sample."""
    x = np.asarray(x)
    return embed_batch(net, x[None, :] if x.ndim == 1 else x)[0]


def embed_batch(net: Network, x: np.ndarray) -> np.ndarray:
    """Penultimate-layer activations for a batch, shape (n, dims[-2])."""
    if net.n_layers < 2:
        raise ConfigError("embeddings need a network with at least 2 layers")
    x = _check_features(net, x)
    a = x
    for i in range(net.n_layers - 1):
        a = np.maximum(a @ net.weights[i].T + net.biases[i], 0.0)
    return a


def save_checkpoint(net: Network, path: str) -> None:
    """Versioned little-endian binary: magic, dtype code, dims, parameters.

    Parameters are stored row-major, weight then bias per layer, so the
    bytes are stable across platforms.
    """
    code = 1 if net.dtype == np.float64 else 2
    with open(path, "wb") as fh:
        fh.write(_CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", code, len(net.layer_dims)))
        fh.write(np.asarray(net.layer_dims, dtype="<u4").tobytes())
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype=_DTYPE_CODES[code]).tobytes())
            fh.write(np.ascontiguousarray(b, dtype=_DTYPE_CODES[code]).tobytes())


def load_checkpoint(path: str) -> Network:
    """Inverse of save_checkpoint."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_CHECKPOINT_MAGIC))
        if magic != _CHECKPOINT_MAGIC:
            raise InputError(f"{path}: not a network checkpoint")
        code, n_dims = struct.unpack("<II", fh.read(8))
        if code not in _DTYPE_CODES:
            raise InputError(f"{path}: unknown dtype code {code}")
        dims = tuple(int(d) for d in np.frombuffer(fh.read(4 * n_dims), dtype="<u4"))
        dt = _DTYPE_CODES[code]
        native = np.dtype(np.float64 if code == 1 else np.float32)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(fh.read(dt.itemsize * fan_out * fan_in), dtype=dt)
            b = np.frombuffer(fh.read(dt.itemsize * fan_out), dtype=dt)
            weights.append(w.astype(native).reshape(fan_out, fan_in))
            biases.append(b.astype(native))
        if fh.read(1):
            raise InputError(f"{path}: trailing bytes after parameters")
    return Network(dims, weights, biases)
