"""Small feedforward network, analytic backprop, Adam, training loop.

The driving policy maps the feature vector to (steering, throttle).
Hidden layers use tanh; the output head is linear and only clamped at
inference so training gradients never saturate at the command limits.
Everything is numpy and fully deterministic under a fixed seed.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .imitation import DatasetRow, FeatureConfig, featurize_frame
from .rng import NoiseStream

MODEL_FORMAT_VERSION = 1


@dataclass
class MlpModel:
    layer_sizes: tuple  # e.g. (37, 64, 32, 16, 2)
    weights: list = field(default_factory=list)  # per layer, (out, in)
    biases: list = field(default_factory=list)  # per layer, (out,)

    @classmethod
    def init(cls, layer_sizes=(37, 64, 32, 16, 2), seed: int = 0) -> "MlpModel":
        stream = NoiseStream(seed, "mlp-init")
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            w = stream.uniforms(fan_out * fan_in, -limit, limit).reshape(fan_out, fan_in)
            weights.append(w)
            biases.append(np.zeros(fan_out))
        return cls(tuple(layer_sizes), weights, biases)

    def check(self):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_sizes[i + 1], self.layer_sizes[i])
            if w.shape != expect or b.shape != (expect[0],):
                raise ValueError(f"layer {i}: weight shape {w.shape} != {expect}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i}: non-finite parameters")

    def raw_forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        """Unclamped batch forward pass; returns (output, activations)."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            h = z if i == last else np.tanh(z)
            acts.append(h)
        return h, acts


def forward(model: MlpModel, features) -> tuple[float, float]:
    """Inference: (steering, throttle) clamped to the command range."""
    x = np.asarray(features, dtype=float)
    if x.shape != (model.layer_sizes[0],):
        raise ValueError(
            f"feature length {x.shape} does not match input layer {model.layer_sizes[0]}"
        )
    out, _ = model.raw_forward(x[None, :])
    out = np.clip(out[0], -1.0, 1.0)
    return (float(out[0]), float(out[1]))


def backward(model: MlpModel, features: np.ndarray, labels: np.ndarray):
    """Mean-squared-error loss and exact gradients for one batch.

    Loss is the mean over both the batch and the two outputs; outputs are
    not clamped here so gradients stay exact.
    """
    out, acts = model.raw_forward(features)
    diff = out - labels
    loss = float(np.mean(diff**2))
    batch = features.shape[0]
    grad_z = diff * (2.0 / (batch * labels.shape[1]))
    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.weights)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = grad_z.T @ acts[i]
        grads_b[i] = grad_z.sum(axis=0)
        if i > 0:
            grad_h = grad_z @ model.weights[i]
            grad_z = grad_h * (1.0 - acts[i] ** 2)  # tanh'
    return grads_w, grads_b, loss


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m_w: list = field(default_factory=list)
    v_w: list = field(default_factory=list)
    m_b: list = field(default_factory=list)
    v_b: list = field(default_factory=list)

    @classmethod
    def for_model(cls, model: MlpModel, lr: float = 1e-3) -> "AdamState":
        return cls(
            lr=lr,
            m_w=[np.zeros_like(w) for w in model.weights],
            v_w=[np.zeros_like(w) for w in model.weights],
            m_b=[np.zeros_like(b) for b in model.biases],
            v_b=[np.zeros_like(b) for b in model.biases],
        )


def adam_step(model: MlpModel, grads_w, grads_b, state: AdamState):
    """Bias-corrected Adam update in place; returns (model, state)."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for i in range(len(model.weights)):
        for params, grad, m, v in (
            (model.weights[i], grads_w[i], state.m_w[i], state.v_w[i]),
            (model.biases[i], grads_b[i], state.m_b[i], state.v_b[i]),
        ):
            m *= state.beta1
            m += (1.0 - state.beta1) * grad
            v *= state.beta2
            v += (1.0 - state.beta2) * grad * grad
            params -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
    return model, state


def train(
    rows: list[DatasetRow],
    epochs: int = 4,
    batch_size: int = 64,
    lr: float = 1e-3,
    seed: int = 0,
    layer_sizes=(37, 64, 32, 16, 2),
) -> tuple[MlpModel, list[float]]:
    """Train on (steering, throttle) labels; returns per-epoch mean loss."""
    if not rows:
        raise ValueError("cannot train on an empty dataset")
    x = np.array([r.features for r in rows], dtype=float)
    y = np.array([[r.label_steering, r.label_throttle] for r in rows], dtype=float)
    if x.shape[1] != layer_sizes[0]:
        raise ValueError(
            f"feature length {x.shape[1]} does not match input layer {layer_sizes[0]}"
        )
    model = MlpModel.init(layer_sizes, seed=seed)
    state = AdamState.for_model(model, lr=lr)
    shuffler = NoiseStream(seed, "train-shuffle")
    curve = []
    for _ in range(epochs):
        order = shuffler.shuffle_order(len(rows))
        losses = []
        for lo in range(0, len(rows), batch_size):
            sel = order[lo : lo + batch_size]
            gw, gb, loss = backward(model, x[sel], y[sel])
            adam_step(model, gw, gb, state)
            losses.append(loss)
        curve.append(float(np.mean(losses)))
    return model, curve


def drive(
    model: MlpModel,
    frame,
    cfg: FeatureConfig = FeatureConfig(),
    last_cmd: tuple[float, float] = (0.0, 0.0),
    fixed_throttle: float | None = None,
) -> tuple[float, float]:
    """Policy step: featurize exactly like recording, forward, clamp.

    Holds the last command between scans; fixed_throttle overrides the
    speed channel for velocity-limit testing.
    """
    if frame.lidar is None:
        return last_cmd
    steering, throttle = forward(model, featurize_frame(frame, cfg))
    if fixed_throttle is not None:
        throttle = max(-1.0, min(1.0, fixed_throttle))
    return (throttle, steering)


# ---------------------------------------------------------------------------
# model files


def save_model(path: str, model: MlpModel, meta: dict | None = None):
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "weights": [w.ravel().tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "metadata": meta or {},
    }
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_model(path: str) -> tuple[MlpModel, dict]:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format_version {doc.get('format_version')}")
    sizes = tuple(doc["layer_sizes"])
    weights = [
        np.array(flat, dtype=float).reshape(sizes[i + 1], sizes[i])
        for i, flat in enumerate(doc["weights"])
    ]
    biases = [np.array(b, dtype=float) for b in doc["biases"]]
    model = MlpModel(sizes, weights, biases)
    model.check()
    return model, doc.get("metadata", {})
