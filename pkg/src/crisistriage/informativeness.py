"""Binary informativeness classifier: a character-level convolutional
network trained with momentum SGD and loss-crossover early stopping."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import BinaryInformativeness, Message, Source, Split
from .text import DEFAULT_ALPHABET, DEFAULT_MAX_LEN, quantize_chars

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class CnnConfig:
    alphabet: str = DEFAULT_ALPHABET
    max_len: int = DEFAULT_MAX_LEN
    # (filter_count, kernel_width, pool_width) per conv layer
    conv_layers: tuple[tuple[int, int, int], ...] = ((64, 7, 3), (64, 3, 3))
    hidden_sizes: tuple[int, ...] = (128,)
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 16
    max_epochs: int = 100
    # weight multipliers: per class (not-informative, informative) and per source
    class_weights: tuple[float, float] = (1.0, 1.0)
    source_weights: dict[Source, float] = field(
        default_factory=lambda: {Source.CCSID: 2.0}
    )
    seed: int = 0

    def __post_init__(self):
        if not self.conv_layers:
            raise ValueError("need at least one conv layer")
        for f, k, p in self.conv_layers:
            if f <= 0 or k <= 0 or p <= 0:
                raise ValueError("conv layer sizes must be positive")
        if any(h <= 0 for h in self.hidden_sizes):
            raise ValueError("hidden sizes must be positive")
        if self.max_len <= 0 or not self.alphabet:
            raise ValueError("alphabet must be non-empty and max_len positive")
        if any(w <= 0 for w in self.class_weights):
            raise ValueError("class weights must be positive")


class CnnModel:
    """Parameter container. Layer names, in order: conv0, conv1, ..., fc0, ..., out."""

    def __init__(self, config: CnnConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params

    def copy(self) -> "CnnModel":
        return CnnModel(self.config, {k: v.copy() for k, v in self.params.items()})

    @property
    def layer_names(self) -> list[str]:
        names = []
        for name in self.params:
            base = name.rsplit("_", 1)[0]
            if base not in names:
                names.append(base)
        return names


@dataclass
class TrainingTrace:
    training_loss: list[float]
    validation_loss: list[float]
    selected_epoch: int
    crossover_epoch: int | None  # first epoch with training < validation loss


@dataclass(frozen=True)
class InformativenessDecision:
    probability_informative: float
    decision: BinaryInformativeness
    threshold: float


def _layer_dims(config: CnnConfig) -> tuple[list[tuple[int, int, int, int]], list[tuple[int, int]]]:
    """Shapes for every layer: conv (filters, in_channels, kernel, out_len), fc (out, in)."""
    channels = len(config.alphabet)
    length = config.max_len
    conv_dims = []
    for filters, kernel, pool in config.conv_layers:
        conv_len = length - kernel + 1
        if conv_len < 1:
            raise ValueError("sequence too short for conv kernel")
        pooled = conv_len // pool
        if pooled < 1:
            raise ValueError("sequence too short for pooling")
        conv_dims.append((filters, channels, kernel, pooled))
        channels, length = filters, pooled
    fc_dims = []
    n_in = channels * length
    for h in config.hidden_sizes:
        fc_dims.append((h, n_in))
        n_in = h
    fc_dims.append((2, n_in))
    return conv_dims, fc_dims


def init_model(config: CnnConfig) -> CnnModel:
    """Fan-in-scaled uniform weights, zero biases, deterministic from config.seed."""
    rng = np.random.default_rng(config.seed)
    conv_dims, fc_dims = _layer_dims(config)
    params: dict[str, np.ndarray] = {}
    # Biases share the weight distribution: a nonzero bias keeps padded
    # regions off the exact ReLU kink, where gradients are undefined.
    for i, (filters, channels, kernel, _) in enumerate(conv_dims):
        fan_in = channels * kernel
        scale = 1.0 / np.sqrt(fan_in)
        params[f"conv{i}_W"] = rng.uniform(-scale, scale, size=(filters, channels, kernel))
        params[f"conv{i}_b"] = rng.uniform(-scale, scale, size=filters)
    for i, (n_out, n_in) in enumerate(fc_dims):
        name = "out" if i == len(fc_dims) - 1 else f"fc{i}"
        scale = 1.0 / np.sqrt(n_in)
        params[f"{name}_W"] = rng.uniform(-scale, scale, size=(n_out, n_in))
        params[f"{name}_b"] = rng.uniform(-scale, scale, size=n_out)
    return CnnModel(config, params)


def _one_hot(chars: np.ndarray, alphabet_size: int) -> np.ndarray:
    """(B, L) int indices -> (B, C, L) one-hot; index 0 (padding/unknown) is all-zero."""
    batch, length = chars.shape
    x = np.zeros((batch, alphabet_size, length))
    b_idx, l_idx = np.nonzero(chars)
    x[b_idx, chars[b_idx, l_idx] - 1, l_idx] = 1.0
    return x


def _forward_pass(model: CnnModel, chars: np.ndarray) -> tuple[np.ndarray, dict]:
    """Batched forward. chars: (B, max_len) indices. Returns (probs (B,2), cache)."""
    cfg = model.config
    cache: dict = {}
    x = _one_hot(chars, len(cfg.alphabet))
    cache["inputs"] = []
    cache["relu_masks"] = []
    cache["pool_argmax"] = []
    cache["pre_pool_len"] = []
    for i, (filters, kernel, pool) in enumerate(cfg.conv_layers):
        w = model.params[f"conv{i}_W"]
        b = model.params[f"conv{i}_b"]
        cols = np.lib.stride_tricks.sliding_window_view(x, kernel, axis=2)  # (B,C,T,k)
        pre = np.einsum("bctk,fck->bft", cols, w) + b[None, :, None]
        act = np.maximum(pre, 0.0)
        t = act.shape[2]
        t2 = t // pool
        windows = act[:, :, : t2 * pool].reshape(act.shape[0], filters, t2, pool)
        argmax = windows.argmax(axis=3)
        pooled = np.take_along_axis(windows, argmax[..., None], axis=3)[..., 0]
        cache["inputs"].append(x)
        cache["relu_masks"].append(pre > 0.0)
        cache["pool_argmax"].append(argmax)
        cache["pre_pool_len"].append(t)
        x = pooled
    flat = x.reshape(x.shape[0], -1)
    cache["conv_out_shape"] = x.shape
    cache["fc_inputs"] = []
    cache["fc_relu_masks"] = []
    h = flat
    for i in range(len(cfg.hidden_sizes)):
        w = model.params[f"fc{i}_W"]
        b = model.params[f"fc{i}_b"]
        cache["fc_inputs"].append(h)
        pre = h @ w.T + b
        cache["fc_relu_masks"].append(pre > 0.0)
        h = np.maximum(pre, 0.0)
    cache["fc_inputs"].append(h)
    logits = h @ model.params["out_W"].T + model.params["out_b"]
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    cache["probs"] = probs
    return probs, cache


def forward(model: CnnModel, chars: np.ndarray) -> np.ndarray:
    """Class probabilities (not-informative, informative) for one char sequence."""
    chars = np.asarray(chars)
    if chars.shape != (model.config.max_len,):
        raise ValueError(
            f"expected char sequence of length {model.config.max_len}, got {chars.shape}"
        )
    probs, _ = _forward_pass(model, chars[None, :])
    return probs[0]


def _loss_and_grads(
    model: CnnModel,
    chars: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean weighted cross-entropy over the batch, plus parameter gradients."""
    cfg = model.config
    probs, cache = _forward_pass(model, chars)
    batch = chars.shape[0]
    eps = 1e-12
    losses = -np.log(probs[np.arange(batch), labels] + eps)
    loss = float(np.mean(weights * losses))

    grads: dict[str, np.ndarray] = {}
    dlogits = probs.copy()
    dlogits[np.arange(batch), labels] -= 1.0
    dlogits *= (weights / batch)[:, None]

    h_last = cache["fc_inputs"][-1]
    grads["out_W"] = dlogits.T @ h_last
    grads["out_b"] = dlogits.sum(axis=0)
    dh = dlogits @ model.params["out_W"]
    for i in reversed(range(len(cfg.hidden_sizes))):
        dpre = dh * cache["fc_relu_masks"][i]
        grads[f"fc{i}_W"] = dpre.T @ cache["fc_inputs"][i]
        grads[f"fc{i}_b"] = dpre.sum(axis=0)
        dh = dpre @ model.params[f"fc{i}_W"]

    dx = dh.reshape(cache["conv_out_shape"])
    for i in reversed(range(len(cfg.conv_layers))):
        filters, kernel, pool = cfg.conv_layers[i]
        w = model.params[f"conv{i}_W"]
        t = cache["pre_pool_len"][i]
        argmax = cache["pool_argmax"][i]
        b_n, f_n, t2 = dx.shape
        dwindows = np.zeros((b_n, f_n, t2, pool))
        np.put_along_axis(dwindows, argmax[..., None], dx[..., None], axis=3)
        dact = np.zeros((b_n, f_n, t))
        dact[:, :, : t2 * pool] = dwindows.reshape(b_n, f_n, t2 * pool)
        dpre = dact * cache["relu_masks"][i]
        x_in = cache["inputs"][i]
        cols = np.lib.stride_tricks.sliding_window_view(x_in, kernel, axis=2)
        grads[f"conv{i}_W"] = np.einsum("bft,bctk->fck", dpre, cols)
        grads[f"conv{i}_b"] = dpre.sum(axis=(0, 2))
        t_out = dpre.shape[2]
        dx_in = np.zeros_like(x_in)
        for dk in range(kernel):
            dx_in[:, :, dk : dk + t_out] += np.einsum("fc,bft->bct", w[:, :, dk], dpre)
        dx = dx_in
    return loss, grads


def example_weight(config: CnnConfig, label: int, source: Source) -> float:
    return config.class_weights[label] * config.source_weights.get(source, 1.0)


def _prepare(
    config: CnnConfig, messages: Sequence[Message], labels: dict[str, BinaryInformativeness]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    chars = np.stack([quantize_chars(m.text, config.alphabet, config.max_len) for m in messages])
    y = np.array(
        [1 if labels[m.id] is BinaryInformativeness.INFORMATIVE else 0 for m in messages],
        dtype=np.int64,
    )
    w = np.array([example_weight(config, yi, m.source) for m, yi in zip(messages, y)])
    return chars, y, w


def _dataset_loss(model: CnnModel, chars, labels, weights, batch_size=64) -> float:
    total = 0.0
    n = len(labels)
    for start in range(0, n, batch_size):
        sl = slice(start, start + batch_size)
        probs, _ = _forward_pass(model, chars[sl])
        eps = 1e-12
        losses = -np.log(probs[np.arange(len(labels[sl])), labels[sl]] + eps)
        total += float(np.sum(weights[sl] * losses))
    return total / n


def inverse_frequency_weights(labels: Sequence[BinaryInformativeness]) -> tuple[float, float]:
    """Per-class weights proportional to inverse class frequency, mean-normalized."""
    n = len(labels)
    n_pos = sum(1 for l in labels if l is BinaryInformativeness.INFORMATIVE)
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        return (1.0, 1.0)
    w_neg, w_pos = n / (2.0 * n_neg), n / (2.0 * n_pos)
    return (w_neg, w_pos)


def train(model: CnnModel, split: Split, config: CnnConfig | None = None) -> tuple[CnnModel, TrainingTrace]:
    """Momentum-SGD training with loss-crossover early stopping.

    Stops at the first epoch where training loss drops strictly below
    validation loss (the overfitting signal), or at max_epochs; the
    checkpoint returned is the one with minimum validation loss among
    epochs before the crossover.
    """
    config = config or model.config
    if not split.train.messages or not split.validation.messages:
        raise ValueError("both split sides must be non-empty")
    train_chars, train_y, train_w = _prepare(config, split.train.messages, split.train.labels)
    val_chars, val_y, val_w = _prepare(config, split.validation.messages, split.validation.labels)

    model = model.copy()
    velocity = {k: np.zeros_like(v) for k, v in model.params.items()}
    rng = np.random.default_rng(config.seed + 1)
    n = len(train_y)

    train_losses: list[float] = []
    val_losses: list[float] = []
    best: tuple[float, int, CnnModel] | None = None
    crossover: int | None = None

    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = _loss_and_grads(model, train_chars[idx], train_y[idx], train_w[idx])
            if not np.isfinite(loss):
                raise ArithmeticError(
                    f"non-finite training loss at epoch {epoch}; "
                    f"try a smaller learning rate than {config.learning_rate}"
                )
            for name, g in grads.items():
                velocity[name] = config.momentum * velocity[name] - config.learning_rate * g
                model.params[name] += velocity[name]
        # Both losses are measured at epoch end over the full sets, so the
        # crossover comparison is like for like.
        t_loss = _dataset_loss(model, train_chars, train_y, train_w)
        v_loss = _dataset_loss(model, val_chars, val_y, val_w)
        train_losses.append(t_loss)
        val_losses.append(v_loss)
        if t_loss < v_loss:
            crossover = epoch
            if best is None:
                best = (v_loss, epoch, model.copy())
            break
        if best is None or v_loss < best[0]:
            best = (v_loss, epoch, model.copy())

    assert best is not None
    _, selected_epoch, selected = best
    return selected, TrainingTrace(train_losses, val_losses, selected_epoch, crossover)


def classify(model: CnnModel, message: Message, threshold: float = 0.5) -> InformativenessDecision:
    """Gate decision for one message: informative iff p(informative) >= threshold."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    chars = quantize_chars(message.text, model.config.alphabet, model.config.max_len)
    prob = float(forward(model, chars)[1])
    decision = (
        BinaryInformativeness.INFORMATIVE
        if prob >= threshold
        else BinaryInformativeness.NOT_INFORMATIVE
    )
    return InformativenessDecision(prob, decision, threshold)


def gradient_check(
    model: CnnModel,
    chars: np.ndarray,
    label: int,
    epsilon: float = 1e-5,
    sample_size: int = 200,
    seed: int = 0,
    flip_layer: str | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Samples at least sample_size parameters spread across every layer.
    flip_layer negates one layer's analytic gradient, for verifying the
    check itself can detect a broken backward pass.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    chars_b = np.asarray(chars)[None, :]
    labels = np.array([label])
    weights = np.array([1.0])
    _, grads = _loss_and_grads(model, chars_b, labels, weights)
    if flip_layer is not None:
        grads[f"{flip_layer}_W"] = -grads[f"{flip_layer}_W"]
        grads[f"{flip_layer}_b"] = -grads[f"{flip_layer}_b"]
    rng = np.random.default_rng(seed)
    names = list(model.params)
    per_name = max(1, -(-sample_size // len(names)))
    max_err = 0.0
    for name in names:
        param = model.params[name]
        flat = param.reshape(-1)
        count = min(per_name, flat.size)
        picks = rng.choice(flat.size, size=count, replace=False)
        for j in picks:
            orig = flat[j]
            flat[j] = orig + epsilon
            lp, _ = _loss_and_grads(model, chars_b, labels, weights)
            flat[j] = orig - epsilon
            lm, _ = _loss_and_grads(model, chars_b, labels, weights)
            flat[j] = orig
            numeric = (lp - lm) / (2 * epsilon)
            analytic = grads[name].reshape(-1)[j]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            max_err = max(max_err, abs(analytic - numeric) / denom)
    return max_err


# ---------------------------------------------------------------------------
# Model persistence: versioned binary container, bit-exact round trips.

_MAGIC = b"CTIF"


def _config_to_json(config: CnnConfig) -> str:
    return json.dumps(
        {
            "alphabet": config.alphabet,
            "max_len": config.max_len,
            "conv_layers": [list(l) for l in config.conv_layers],
            "hidden_sizes": list(config.hidden_sizes),
            "learning_rate": config.learning_rate,
            "momentum": config.momentum,
            "batch_size": config.batch_size,
            "max_epochs": config.max_epochs,
            "class_weights": list(config.class_weights),
            "source_weights": {s.value: w for s, w in config.source_weights.items()},
            "seed": config.seed,
        },
        sort_keys=True,
    )


def _config_from_json(data: str) -> CnnConfig:
    d = json.loads(data)
    return CnnConfig(
        alphabet=d["alphabet"],
        max_len=d["max_len"],
        conv_layers=tuple(tuple(l) for l in d["conv_layers"]),
        hidden_sizes=tuple(d["hidden_sizes"]),
        learning_rate=d["learning_rate"],
        momentum=d["momentum"],
        batch_size=d["batch_size"],
        max_epochs=d["max_epochs"],
        class_weights=tuple(d["class_weights"]),
        source_weights={Source(k): v for k, v in d["source_weights"].items()},
        seed=d["seed"],
    )


def write_tensors(f, tensors: dict[str, np.ndarray]) -> None:
    f.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        encoded = name.encode("utf-8")
        f.write(struct.pack("<H", len(encoded)))
        f.write(encoded)
        arr = np.ascontiguousarray(arr, dtype=np.float64)
        f.write(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            f.write(struct.pack("<I", dim))
        f.write(arr.astype("<f8").tobytes())


def read_tensors(f) -> dict[str, np.ndarray]:
    (count,) = struct.unpack("<I", f.read(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", f.read(2))
        name = f.read(name_len).decode("utf-8")
        (ndim,) = struct.unpack("<B", f.read(1))
        shape = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(ndim))
        size = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(f.read(size * 8), dtype="<f8").reshape(shape)
        tensors[name] = data.copy()
    return tensors


def save_model(model: CnnModel, path: str | Path) -> None:
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<I", MODEL_FORMAT_VERSION))
        header = _config_to_json(model.config).encode("utf-8")
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        write_tensors(f, model.params)


def load_model(path: str | Path) -> CnnModel:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path}: not an informativeness model file")
        (version,) = struct.unpack("<I", f.read(4))
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        (header_len,) = struct.unpack("<I", f.read(4))
        config = _config_from_json(f.read(header_len).decode("utf-8"))
        params = read_tensors(f)
    return CnnModel(config, params)
