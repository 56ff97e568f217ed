"""Error functionals and diagnostics for surrogates and empirical measures.

Includes the relative prediction error, the single-vs-multi-level gain, the
exact one-dimensional Wasserstein-1 distance between equally weighted atom
clouds, unbiased variance estimators, the generalization-error upper bound
(training error + validation gap + a standard-deviation term shrinking like
1/sqrt(N)), and the retrain-and-average study that measures how sharply that
bound tracks the observed generalization error.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .neural import NetworkArchitecture, TrainingConfig, forward, train
from .sampling import derived_seed

__all__ = [
    "BoundReport",
    "SizeStudyRow",
    "prediction_error",
    "gain",
    "wasserstein1",
    "sample_std",
    "sample_variance",
    "generalization_bound",
    "cumulative_error_study",
    "STUDY_CSV_COLUMNS",
]


def prediction_error(predictions: np.ndarray, truths: np.ndarray, p: int = 2) -> float:
    """Relative p-norm error: ||pred - truth||_p / ||truth||_p."""
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    predictions = np.asarray(predictions, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if truths.size == 0:
        raise ValueError("test set must be non-empty")
    denom = float((np.abs(truths) ** p).sum() ** (1.0 / p))
    if denom == 0.0:
        raise ValueError("truth values have zero norm; relative error undefined")
    num = float((np.abs(predictions - truths) ** p).sum() ** (1.0 / p))
    return num / denom


def gain(single_level_error: float, multi_level_error: float) -> float:
    """Error ratio of the single-level to the multi-level surrogate."""
    if multi_level_error <= 0.0:
        raise ZeroDivisionError("multi-level error must be > 0")
    return single_level_error / multi_level_error


def _atom_values(measure) -> np.ndarray:
    values = getattr(measure, "values", measure)
    return np.asarray(values, dtype=float)


def wasserstein1(m1, m2) -> float:
    """Exact W1 between two equally weighted atom clouds (any sizes).

    Integrates |F1^{-1}(u) - F2^{-1}(u)| over the merged grid of quantile
    breakpoints, so unequal atom counts are handled without resampling.
    """
    a = np.sort(_atom_values(m1))
    b = np.sort(_atom_values(m2))
    na, nb = a.size, b.size
    if na == 0 or nb == 0:
        raise ValueError("both measures must be non-empty")
    cuts = np.union1d(np.arange(1, na) / na, np.arange(1, nb) / nb)
    edges = np.concatenate([[0.0], cuts, [1.0]])
    widths = np.diff(edges)
    mids = 0.5 * (edges[:-1] + edges[1:])
    ia = np.minimum((mids * na).astype(int), na - 1)
    ib = np.minimum((mids * nb).astype(int), nb - 1)
    return float(np.sum(widths * np.abs(a[ia] - b[ib])))


def sample_variance(values: np.ndarray) -> float:
    """Unbiased (1/(N-1)) variance estimator."""
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        raise ValueError("variance needs at least two values")
    return float(values.var(ddof=1))


def sample_std(values: np.ndarray) -> float:
    return math.sqrt(sample_variance(values))


@dataclass(frozen=True)
class BoundReport:
    training_error: float
    validation_gap: float
    map_std: float
    surrogate_std: float
    sample_count: int
    bound: float
    measured: float | None = None
    compression: float | None = None


def generalization_bound(
    training_error: float,
    validation_gap: float,
    map_std: float,
    surrogate_std: float,
    sample_count: int,
    measured: float | None = None,
) -> BoundReport:
    """Computable upper bound on the generalization error.

    ``bound = E_T + E_TV + 2*sqrt(2) * (std_map + std_surrogate) / sqrt(N)``;
    the compression ratio bound/measured is filled when a measured error is
    supplied.
    """
    if sample_count < 1:
        raise ValueError("sample count must be >= 1")
    if min(training_error, validation_gap, map_std, surrogate_std) < 0:
        raise ValueError("all bound inputs must be >= 0")
    bound = (
        training_error
        + validation_gap
        + 2.0 * math.sqrt(2.0) * (map_std + surrogate_std) / math.sqrt(sample_count)
    )
    compression = None if measured is None else bound / measured
    return BoundReport(
        training_error=training_error,
        validation_gap=validation_gap,
        map_std=map_std,
        surrogate_std=surrogate_std,
        sample_count=sample_count,
        bound=bound,
        measured=measured,
        compression=compression,
    )


@dataclass(frozen=True)
class SizeStudyRow:
    size: int
    training_error: float
    validation_error: float
    validation_gap: float
    generalization_error: float
    bound: float
    compression: float


STUDY_CSV_COLUMNS = (
    "size",
    "training_error",
    "validation_error",
    "validation_gap",
    "generalization_error",
    "bound",
    "compression",
)


def _study_task(args):
    """Train one retraining and evaluate it on the shared point sets."""
    (x_train, z_train, arch, config, x_val_sets, x_test, x_std) = args
    net, report = train(x_train, z_train, arch, config)
    params = net.parameters
    val_preds = [forward(params, xv) for xv in x_val_sets]
    return (
        report.training_error,
        val_preds,
        forward(params, x_test),
        forward(params, x_std),
    )


def cumulative_error_study(
    map_fn,
    dimension: int,
    arch: NetworkArchitecture,
    config: TrainingConfig,
    sizes,
    retrainings: int,
    validation_realizations: int,
    master_seed: int,
    evaluation_budget: int = 2000,
    surrogate_std_points: int = 1000,
    workers: int | None = None,
) -> list[SizeStudyRow]:
    """Retrain-and-average error study over training-set sizes.

    For each size N the network is retrained on ``retrainings`` fresh
    training sets (the full set is used for training; no split).  Training
    and generalization errors are averaged over the retrainings; the
    validation gap averages |E_T - E_V| over ``validation_realizations``
    independent validation sets of size N.  The map's standard deviation is
    estimated from ``evaluation_budget`` samples and the surrogate's from
    ``surrogate_std_points`` evaluations of every retrained network.  The
    test set per size holds ``evaluation_budget - N`` points.
    """
    rng = np.random.default_rng(derived_seed(master_seed, 0x57D))
    map_std_points = rng.random((evaluation_budget, dimension))
    map_std = sample_std(map_fn(map_std_points))
    x_std = rng.random((surrogate_std_points, dimension))

    rows = []
    for size_index, size in enumerate(sizes):
        if not 0 < size < evaluation_budget:
            raise ValueError(f"size {size} outside 1..{evaluation_budget - 1}")
        test_rng = np.random.default_rng(derived_seed(master_seed, 0x7E5, size_index))
        x_test = test_rng.random((evaluation_budget - size, dimension))
        z_test = map_fn(x_test)
        x_val_sets = []
        z_val_sets = []
        for j in range(validation_realizations):
            vr = np.random.default_rng(derived_seed(master_seed, 0x7A1, size_index, j))
            xv = vr.random((size, dimension))
            x_val_sets.append(xv)
            z_val_sets.append(map_fn(xv))

        tasks = []
        for k in range(retrainings):
            tr = np.random.default_rng(derived_seed(master_seed, 0x7B2, size_index, k))
            x_train = tr.random((size, dimension))
            z_train = map_fn(x_train)
            cfg = replace(
                config,
                validation_fraction=0.0,
                init_seed=derived_seed(master_seed, 0x7C3, size_index, k),
            )
            tasks.append((x_train, z_train, arch, cfg, x_val_sets, x_test, x_std))

        if workers and workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_study_task, tasks))
        else:
            results = [_study_task(t) for t in tasks]

        p = config.p
        train_errors = [r[0] for r in results]
        mean_train = float(np.mean(train_errors))
        val_means = []
        for j in range(validation_realizations):
            per_net = [np.mean(np.abs(r[1][j] - z_val_sets[j]) ** p) for r in results]
            val_means.append(float(np.mean(per_net)))
        mean_val = float(np.mean(val_means))
        val_gap = float(np.mean([abs(v - mean_train) for v in val_means]))
        gen_errors = [float(np.mean(np.abs(r[2] - z_test) ** p)) for r in results]
        mean_gen = float(np.mean(gen_errors))
        pooled = np.concatenate([np.asarray(r[3]) for r in results])
        surrogate_std = sample_std(pooled)
        report = generalization_bound(
            training_error=mean_train,
            validation_gap=val_gap,
            map_std=map_std,
            surrogate_std=surrogate_std,
            sample_count=size,
            measured=mean_gen,
        )
        rows.append(
            SizeStudyRow(
                size=int(size),
                training_error=mean_train,
                validation_error=mean_val,
                validation_gap=val_gap,
                generalization_error=mean_gen,
                bound=report.bound,
                compression=report.compression,
            )
        )
    return rows
