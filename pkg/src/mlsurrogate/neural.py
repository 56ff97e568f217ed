"""Fully connected ReLU regression networks trained by full-batch ADAM.

The network alternates affine maps and componentwise ReLU activations, with
no activation after the final affine map.  Training minimizes a summed
power-p data loss plus an optional weight-norm penalty (biases are never
penalized), with gradients computed by reverse-mode differentiation.

All arithmetic is 64-bit.  Weight matrices are stored in the row-vector
convention, shape ``(fan_in, fan_out)``, so a batch propagates as
``X @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "NetworkArchitecture",
    "NetworkParameters",
    "TrainingConfig",
    "ErrorReport",
    "AdamState",
    "TrainedNetwork",
    "he_init",
    "forward",
    "loss_and_gradient",
    "adam_step",
    "train",
    "split_train_validation",
    "network_to_json",
    "network_from_json",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class NetworkArchitecture:
    """Layer widths from the input dimension down to the scalar output."""

    widths: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.widths) < 2:
            raise ValueError("need at least input and output widths")
        if any(w < 1 for w in self.widths):
            raise ValueError("all widths must be >= 1")
        if self.widths[-1] != 1:
            raise ValueError("output width must be 1")

    @classmethod
    def mlp(cls, input_dim: int, hidden_layers: int, width: int) -> "NetworkArchitecture":
        return cls(widths=(input_dim, *([width] * hidden_layers), 1))

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def parameter_count(self) -> int:
        return sum((a + 1) * b for a, b in zip(self.widths, self.widths[1:]))


@dataclass(frozen=True)
class NetworkParameters:
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases):
            raise ValueError("one bias vector per weight matrix")
        for w, b in zip(self.weights, self.biases):
            if w.shape[1] != b.shape[0]:
                raise ValueError(f"bias shape {b.shape} does not match weight {w.shape}")


@dataclass(frozen=True)
class TrainingConfig:
    p: int = 2
    q: int = 2
    reg_weight: float = 0.0
    learning_rate: float = 0.01
    epochs: int = 10000
    init_seed: int = 0
    validation_fraction: float = 0.1
    split_seed: int = 0
    record_loss: bool = False

    def __post_init__(self) -> None:
        if self.p not in (1, 2) or self.q not in (1, 2):
            raise ValueError("loss and regularization exponents must be 1 or 2")
        if self.reg_weight < 0.0:
            raise ValueError("regularization weight must be >= 0")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation fraction must lie in [0, 1)")


@dataclass(frozen=True)
class ErrorReport:
    training_error: float
    validation_error: float
    validation_gap: float
    sample_count: int


def he_init(arch: NetworkArchitecture, seed: int) -> NetworkParameters:
    """Gaussian weights with variance 2/fan_in per layer; zero biases."""
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(arch.widths, arch.widths[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParameters(weights=tuple(weights), biases=tuple(biases))


def _forward_cached(params: NetworkParameters, x: np.ndarray):
    """Activations of every layer for a batch; last entry is the raw output."""
    acts = [x]
    a = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        if k < last:
            z = np.maximum(z, 0.0)
        acts.append(z)
        a = z
    return acts


def forward(params: NetworkParameters, y: np.ndarray) -> float | np.ndarray:
    """Network output for one point (returns a float) or a batch (an array)."""
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    x = y[None, :] if single else y
    if x.shape[1] != params.weights[0].shape[0]:
        raise ValueError(
            f"input dimension {x.shape[1]} does not match network "
            f"({params.weights[0].shape[0]})"
        )
    out = _forward_cached(params, x)[-1][:, 0]
    return float(out[0]) if single else out


def loss_and_gradient(
    params: NetworkParameters,
    inputs: np.ndarray,
    targets: np.ndarray,
    config: TrainingConfig,
):
    """Regularized loss and its exact gradient on a full batch.

    The data term is ``sum |target - output|**p``; the penalty is
    ``reg_weight * sum_k ||W_k||_q^q`` over weights only.  For p=1 or q=1 the
    subgradient at zero is taken as zero.
    """
    if inputs.shape[0] == 0:
        raise ValueError("dataset must be non-empty")
    acts = _forward_cached(params, inputs)
    out = acts[-1][:, 0]
    r = out - np.asarray(targets, dtype=float)
    if config.p == 2:
        loss = float(r @ r)
        dout = 2.0 * r
    else:
        loss = float(np.abs(r).sum())
        dout = np.sign(r)
    lam = config.reg_weight
    grad_w = [np.empty(0)] * len(params.weights)
    grad_b = [np.empty(0)] * len(params.biases)
    delta = dout[:, None]
    for k in range(len(params.weights) - 1, -1, -1):
        grad_w[k] = acts[k].T @ delta
        grad_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k].T) * (acts[k] > 0.0)
    if lam > 0.0:
        for k, w in enumerate(params.weights):
            if config.q == 2:
                loss += lam * float((w * w).sum())
                grad_w[k] = grad_w[k] + 2.0 * lam * w
            else:
                loss += lam * float(np.abs(w).sum())
                grad_w[k] = grad_w[k] + lam * np.sign(w)
    return loss, (tuple(grad_w), tuple(grad_b))


@dataclass(frozen=True)
class AdamState:
    step: int
    m_w: tuple[np.ndarray, ...]
    v_w: tuple[np.ndarray, ...]
    m_b: tuple[np.ndarray, ...]
    v_b: tuple[np.ndarray, ...]

    @classmethod
    def zeros_like(cls, params: NetworkParameters) -> "AdamState":
        return cls(
            step=0,
            m_w=tuple(np.zeros_like(w) for w in params.weights),
            v_w=tuple(np.zeros_like(w) for w in params.weights),
            m_b=tuple(np.zeros_like(b) for b in params.biases),
            v_b=tuple(np.zeros_like(b) for b in params.biases),
        )


def _adam_update(theta, grad, m, v, t, lr):
    m_new = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * grad
    v_new = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * grad * grad
    m_hat = m_new / (1.0 - ADAM_BETA1**t)
    v_hat = v_new / (1.0 - ADAM_BETA2**t)
    return theta - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS), m_new, v_new


def adam_step(
    params: NetworkParameters,
    gradient,
    state: AdamState,
    learning_rate: float,
):
    """One bias-corrected ADAM update; returns new parameters and state."""
    grad_w, grad_b = gradient
    t = state.step + 1
    new_w, new_mw, new_vw = [], [], []
    for w, g, m, v in zip(params.weights, grad_w, state.m_w, state.v_w):
        wn, mn, vn = _adam_update(w, g, m, v, t, learning_rate)
        new_w.append(wn)
        new_mw.append(mn)
        new_vw.append(vn)
    new_b, new_mb, new_vb = [], [], []
    for b, g, m, v in zip(params.biases, grad_b, state.m_b, state.v_b):
        bn, mn, vn = _adam_update(b, g, m, v, t, learning_rate)
        new_b.append(bn)
        new_mb.append(mn)
        new_vb.append(vn)
    return (
        NetworkParameters(weights=tuple(new_w), biases=tuple(new_b)),
        AdamState(
            step=t,
            m_w=tuple(new_mw),
            v_w=tuple(new_vw),
            m_b=tuple(new_mb),
            v_b=tuple(new_vb),
        ),
    )


def split_train_validation(n: int, fraction: float, seed: int):
    """Shuffle 0..n-1 by seed; the last chunk becomes the validation part."""
    perm = np.random.default_rng(seed).permutation(n)
    if fraction <= 0.0:
        return perm, np.empty(0, dtype=int)
    n_val = max(1, int(round(fraction * n)))
    if n_val >= n:
        raise ValueError(f"validation fraction {fraction} leaves no training data")
    return perm[:-n_val], perm[-n_val:]


@dataclass(frozen=True)
class TrainedNetwork:
    architecture: NetworkArchitecture
    parameters: NetworkParameters
    config: TrainingConfig
    report: ErrorReport
    loss_history: np.ndarray | None = None

    def predict(self, y: np.ndarray) -> float | np.ndarray:
        return forward(self.parameters, y)


def _mean_power_error(params: NetworkParameters, x: np.ndarray, z: np.ndarray, p: int) -> float:
    r = np.abs(forward(params, x) - z)
    return float(np.mean(r**p))


def train(
    inputs: np.ndarray,
    targets: np.ndarray,
    arch: NetworkArchitecture,
    config: TrainingConfig,
) -> tuple[TrainedNetwork, ErrorReport]:
    """Run the full epoch budget of ADAM on the training split.

    The dataset is split into training and validation parts before
    optimization (``validation_fraction`` of the points, chosen by
    ``split_seed``).  Non-convergence is reported through the error report,
    never raised.
    """
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if inputs.ndim != 2 or inputs.shape[0] != targets.shape[0]:
        raise ValueError("inputs must be (n, d) with one target per row")
    tr_idx, val_idx = split_train_validation(
        inputs.shape[0], config.validation_fraction, config.split_seed
    )
    x_tr, z_tr = inputs[tr_idx], targets[tr_idx]
    params = he_init(arch, config.init_seed)
    state = AdamState.zeros_like(params)
    history = np.empty(config.epochs) if config.record_loss else None
    for epoch in range(config.epochs):
        loss, grads = loss_and_gradient(params, x_tr, z_tr, config)
        if history is not None:
            history[epoch] = loss
        params, state = adam_step(params, grads, state, config.learning_rate)
    e_t = _mean_power_error(params, x_tr, z_tr, config.p)
    if val_idx.size:
        e_v = _mean_power_error(params, inputs[val_idx], targets[val_idx], config.p)
        gap = abs(e_t - e_v)
    else:
        e_v = float("nan")
        gap = float("nan")
    report = ErrorReport(
        training_error=e_t,
        validation_error=e_v,
        validation_gap=gap,
        sample_count=inputs.shape[0],
    )
    net = TrainedNetwork(
        architecture=arch,
        parameters=params,
        config=config,
        report=report,
        loss_history=history,
    )
    return net, report


_FORMAT_VERSION = 1


def network_to_json(net: TrainedNetwork, path: str | Path) -> None:
    doc = {
        "format_version": _FORMAT_VERSION,
        "widths": list(net.architecture.widths),
        "weights": [w.tolist() for w in net.parameters.weights],
        "biases": [b.tolist() for b in net.parameters.biases],
        "config": {
            "p": net.config.p,
            "q": net.config.q,
            "reg_weight": net.config.reg_weight,
            "learning_rate": net.config.learning_rate,
            "epochs": net.config.epochs,
            "init_seed": net.config.init_seed,
            "validation_fraction": net.config.validation_fraction,
            "split_seed": net.config.split_seed,
        },
        "report": {
            "training_error": net.report.training_error,
            "validation_error": net.report.validation_error,
            "validation_gap": net.report.validation_gap,
            "sample_count": net.report.sample_count,
        },
    }
    Path(path).write_text(json.dumps(doc))


def network_from_json(path: str | Path) -> TrainedNetwork:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != _FORMAT_VERSION:
        raise ValueError(f"unsupported network file version {doc.get('format_version')}")
    arch = NetworkArchitecture(widths=tuple(doc["widths"]))
    params = NetworkParameters(
        weights=tuple(np.array(w) for w in doc["weights"]),
        biases=tuple(np.array(b) for b in doc["biases"]),
    )
    rep = doc["report"]
    report = ErrorReport(
        training_error=rep["training_error"],
        validation_error=rep["validation_error"],
        validation_gap=rep["validation_gap"],
        sample_count=rep["sample_count"],
    )
    return TrainedNetwork(
        architecture=arch,
        parameters=params,
        config=TrainingConfig(**doc["config"]),
        report=report,
    )
