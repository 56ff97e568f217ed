"""Zero-mean Gaussian-process interpolation with RBF and Matern kernels.

Fitting factorizes the jittered Gram matrix by Cholesky (O(n^3)); prediction
uses the standard posterior mean/variance formulas.  Only the half-integer
Matern orders 0.5, 1.5, 2.5 are supported, evaluated through their closed
forms, so no Bessel functions are needed.

Targets are centered before the fit and the mean is added back at predict
time, except for single-point fits where centering would erase the data.
The length scale is chosen by minimizing the negative log marginal
likelihood over a log-spaced grid followed by golden-section refinement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import NotPositiveDefiniteError, cholesky, solve_spd

__all__ = [
    "KernelSpec",
    "GPModel",
    "DuplicateInputError",
    "kernel_eval",
    "kernel_matrix",
    "fit",
    "predict",
    "nlml",
    "select_length_scale",
    "select_kernel",
    "DEFAULT_KERNEL_CANDIDATES",
    "gp_to_json",
    "gp_from_json",
]

JITTER_START = 1e-10
JITTER_MAX = 1e-6

#: Candidate kernels in selection order; ties go to the earlier entry.
DEFAULT_KERNEL_CANDIDATES = (
    ("squared_exponential", None),
    ("matern", 0.5),
    ("matern", 1.5),
    ("matern", 2.5),
)


class DuplicateInputError(ValueError):
    """Training inputs must be pairwise distinct for a noise-free fit."""


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    length_scale: float
    nu: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("squared_exponential", "matern"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.length_scale <= 0.0:
            raise ValueError("length scale must be > 0")
        if self.kind == "matern" and self.nu not in (0.5, 1.5, 2.5):
            raise ValueError(f"unsupported Matern order {self.nu}")


def _kernel_from_r(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    s = r / spec.length_scale
    if spec.kind == "squared_exponential":
        return np.exp(-0.5 * s * s)
    if spec.nu == 0.5:
        return np.exp(-s)
    if spec.nu == 1.5:
        t = math.sqrt(3.0) * s
        return (1.0 + t) * np.exp(-t)
    t = math.sqrt(5.0) * s
    return (1.0 + t + t * t / 3.0) * np.exp(-t)


def kernel_eval(spec: KernelSpec, y1: np.ndarray, y2: np.ndarray) -> float:
    r = float(np.linalg.norm(np.asarray(y1, dtype=float) - np.asarray(y2, dtype=float)))
    return float(_kernel_from_r(spec, np.array(r)))


def _pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sq = (
        (a * a).sum(axis=1)[:, None]
        + (b * b).sum(axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.sqrt(np.maximum(sq, 0.0))


def kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return _kernel_from_r(spec, _pairwise_distances(a, b))


@dataclass(frozen=True)
class GPModel:
    inputs: np.ndarray
    targets: np.ndarray
    spec: KernelSpec
    jitter: float
    factor: np.ndarray  # lower Cholesky factor of the jittered Gram matrix
    weights: np.ndarray  # (G + jitter I)^{-1} (targets - offset)
    offset: float

    def predict(self, y: np.ndarray):
        return predict(self, y)

    def predict_mean(self, y: np.ndarray):
        return predict(self, y)[0]


def _check_distinct(inputs: np.ndarray) -> None:
    n = inputs.shape[0]
    if n < 2:
        return
    d = _pairwise_distances(inputs, inputs)
    d[np.diag_indices(n)] = np.inf
    if d.min() == 0.0:
        i, j = np.unravel_index(int(d.argmin()), d.shape)
        raise DuplicateInputError(f"training inputs {i} and {j} coincide")


def fit(inputs: np.ndarray, targets: np.ndarray, spec: KernelSpec) -> GPModel:
    """Factorize the jittered Gram matrix, escalating jitter on failure."""
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise ValueError("need at least one training input of shape (n, d)")
    if inputs.shape[0] != targets.shape[0]:
        raise ValueError("one target per input required")
    _check_distinct(inputs)
    offset = float(targets.mean()) if targets.shape[0] >= 2 else 0.0
    centered = targets - offset
    gram = kernel_matrix(spec, inputs, inputs)
    jitter = JITTER_START
    last_exc: NotPositiveDefiniteError | None = None
    while jitter <= JITTER_MAX:
        try:
            factor = cholesky(gram + jitter * np.eye(inputs.shape[0]))
        except NotPositiveDefiniteError as exc:
            last_exc = exc
            jitter *= 10.0
            continue
        weights = solve_spd(factor, centered)
        return GPModel(
            inputs=inputs,
            targets=targets,
            spec=spec,
            jitter=jitter,
            factor=factor,
            weights=weights,
            offset=offset,
        )
    raise NotPositiveDefiniteError(last_exc.pivot if last_exc else 0)


def predict(model: GPModel, y: np.ndarray):
    """Posterior mean and variance at one point or a batch of points.

    The variance is floored at zero; round-off can otherwise push the
    noise-free posterior slightly negative.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    ys = y[None, :] if single else y
    k_star = kernel_matrix(model.spec, model.inputs, ys)
    mean = model.offset + k_star.T @ model.weights
    # Solve L u = k_star once; the quadratic form k*^T (G+jI)^{-1} k* is |u|^2.
    lower = model.factor
    n = lower.shape[0]
    u = np.zeros_like(k_star)
    for i in range(n):
        u[i] = (k_star[i] - lower[i, :i] @ u[:i]) / lower[i, i]
    v = 1.0 - (u * u).sum(axis=0)
    var = np.maximum(v, 0.0)
    if single:
        return float(mean[0]), float(var[0])
    return mean, var


def nlml(
    inputs: np.ndarray,
    targets: np.ndarray,
    spec: KernelSpec,
) -> float:
    """Negative log marginal likelihood of the centered targets."""
    model = fit(inputs, targets, spec)
    centered = model.targets - model.offset
    n = inputs.shape[0]
    log_det = 2.0 * float(np.log(np.diag(model.factor)).sum())
    return 0.5 * float(centered @ model.weights) + 0.5 * log_det + 0.5 * n * math.log(2.0 * math.pi)


_GRID = np.logspace(-2.0, 1.0, 25)
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def select_length_scale(
    inputs: np.ndarray,
    targets: np.ndarray,
    kind: str,
    nu: float | None = None,
) -> float:
    """Length scale minimizing the negative log marginal likelihood.

    Scans a 25-point log-spaced grid on [1e-2, 1e1], then refines the
    bracketing interval by golden-section search in log space.  The returned
    scale never scores worse than any grid point.
    """
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    if inputs.shape[0] < 2:
        raise ValueError("need at least two points to select a length scale")

    def objective(scale: float) -> float:
        try:
            return nlml(inputs, targets, KernelSpec(kind=kind, length_scale=scale, nu=nu))
        except NotPositiveDefiniteError:
            return math.inf

    scores = [objective(s) for s in _GRID]
    best_idx = int(np.argmin(scores))
    best_scale = float(_GRID[best_idx])
    best_score = scores[best_idx]
    lo = math.log(_GRID[max(best_idx - 1, 0)])
    hi = math.log(_GRID[min(best_idx + 1, len(_GRID) - 1)])
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = objective(math.exp(c)), objective(math.exp(d))
    for _ in range(40):
        if b - a < 1e-4:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = objective(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = objective(math.exp(d))
    for log_s, score in ((c, fc), (d, fd)):
        if score < best_score:
            best_score = score
            best_scale = math.exp(log_s)
    return best_scale


def select_kernel(
    inputs: np.ndarray,
    targets: np.ndarray,
    validation_inputs: np.ndarray,
    validation_targets: np.ndarray,
    candidates: Sequence[tuple[str, float | None]] = DEFAULT_KERNEL_CANDIDATES,
) -> KernelSpec:
    """Pick the kernel whose fitted model best predicts the validation set.

    Each candidate gets its own likelihood-selected length scale; candidates
    are compared by mean squared validation error with ties broken toward
    the earlier entry in ``candidates``.
    """
    if len(candidates) == 0:
        raise ValueError("need at least one kernel candidate")
    best_spec: KernelSpec | None = None
    best_err = math.inf
    for kind, nu in candidates:
        scale = select_length_scale(inputs, targets, kind, nu)
        spec = KernelSpec(kind=kind, length_scale=scale, nu=nu)
        model = fit(inputs, targets, spec)
        pred, _ = predict(model, validation_inputs)
        err = float(np.mean((pred - validation_targets) ** 2))
        if err < best_err:
            best_err = err
            best_spec = spec
    assert best_spec is not None
    return best_spec


_FORMAT_VERSION = 1


def gp_to_json(model: GPModel, path: str | Path) -> None:
    """Persist inputs, targets and kernel; the factor is rebuilt on load."""
    doc = {
        "format_version": _FORMAT_VERSION,
        "inputs": model.inputs.tolist(),
        "targets": model.targets.tolist(),
        "kind": model.spec.kind,
        "length_scale": model.spec.length_scale,
        "nu": model.spec.nu,
        "jitter": model.jitter,
    }
    Path(path).write_text(json.dumps(doc))


def gp_from_json(path: str | Path) -> GPModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != _FORMAT_VERSION:
        raise ValueError(f"unsupported GP file version {doc.get('format_version')}")
    spec = KernelSpec(kind=doc["kind"], length_scale=doc["length_scale"], nu=doc["nu"])
    return fit(np.array(doc["inputs"]), np.array(doc["targets"]), spec)
