"""Hyperparameter-ensemble training of one map and NN/GP blending.

Every cell of the network grid (regularization exponent x penalty weight x
initialization seed) is trained on the same 90/10 split of the dataset; the
cell with the smallest validation error wins, ties going to the earlier cell
in iteration order (q ascending, penalty ascending, seed ascending).  The
Gaussian-process side picks its kernel by validation error as well.

The two model families are blended linearly: with more than 500 training
samples the weights come from a least-squares fit on the validation set,
otherwise both weights are 0.5.  A singular least-squares system (the two
predictors coincide on the validation set) also falls back to equal weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import gp as gpmod
from .linalg import lstsq_2
from .neural import (
    NetworkArchitecture,
    TrainedNetwork,
    TrainingConfig,
    network_from_json,
    network_to_json,
    split_train_validation,
    train,
)
from .sampling import derived_seed

__all__ = [
    "HyperparameterGrid",
    "GridCell",
    "SurrogateEnsemble",
    "BLEND_SAMPLE_THRESHOLD",
    "default_grid",
    "nn_only_grid",
    "ensemble_train",
    "blend_weights",
    "ensemble_predict",
    "ensemble_to_json",
    "ensemble_from_json",
    "search_log_rows",
]

#: Least-squares blending is used only above this many training samples.
BLEND_SAMPLE_THRESHOLD = 500

_DEFAULT_LAMBDAS = (5e-7, 1e-6, 5e-6, 1e-5, 5e-5, 1e-4)


@dataclass(frozen=True)
class HyperparameterGrid:
    qs: tuple[int, ...] = (1, 2)
    reg_weights: tuple[float, ...] = _DEFAULT_LAMBDAS
    init_seeds: int = 5
    gp_kernels: tuple[tuple[str, float | None], ...] = gpmod.DEFAULT_KERNEL_CANDIDATES

    def cells(self):
        """Iteration order fixed for reproducible tie-breaking."""
        index = 0
        for q in self.qs:
            for lam in self.reg_weights:
                for s in range(self.init_seeds):
                    yield index, q, lam, s
                    index += 1


def default_grid() -> HyperparameterGrid:
    return HyperparameterGrid()


def nn_only_grid(
    qs: tuple[int, ...] = (1, 2),
    reg_weights: tuple[float, ...] = _DEFAULT_LAMBDAS,
    init_seeds: int = 5,
) -> HyperparameterGrid:
    return HyperparameterGrid(qs=qs, reg_weights=reg_weights, init_seeds=init_seeds, gp_kernels=())


@dataclass(frozen=True)
class GridCell:
    index: int
    q: int
    reg_weight: float
    seed: int
    training_error: float
    validation_error: float


@dataclass(frozen=True)
class SurrogateEnsemble:
    nn: TrainedNetwork | None
    gp: gpmod.GPModel | None
    alpha_nn: float
    alpha_gp: float
    validation_error: float
    search_log: tuple[GridCell, ...] = ()

    def predict(self, y: np.ndarray):
        return ensemble_predict(self, y)


def blend_weights(
    nn_values: np.ndarray,
    gp_values: np.ndarray,
    targets: np.ndarray,
    n_train: int,
) -> tuple[float, float]:
    """Blending coefficients for the two families on a validation set.

    Above the sample threshold the coefficients solve the two-column least
    squares ``targets ~ a1*nn + a2*gp``; otherwise, or when the system is
    singular, both are 0.5.
    """
    if n_train <= BLEND_SAMPLE_THRESHOLD:
        return 0.5, 0.5
    res = lstsq_2(np.asarray(nn_values, float), np.asarray(gp_values, float), np.asarray(targets, float))
    if res.singular:
        return 0.5, 0.5
    return res.alpha1, res.alpha2


def ensemble_predict(ens: SurrogateEnsemble, y: np.ndarray):
    nn_part = ens.alpha_nn * ens.nn.predict(y) if ens.nn is not None else 0.0
    gp_part = ens.alpha_gp * ens.gp.predict_mean(y) if ens.gp is not None else 0.0
    total = nn_part + gp_part
    if np.ndim(total) == 0:
        return float(total)
    return total


def ensemble_train(
    inputs: np.ndarray,
    targets: np.ndarray,
    arch: NetworkArchitecture,
    grid: HyperparameterGrid,
    base_config: TrainingConfig,
    seed: int,
) -> SurrogateEnsemble:
    """Grid-search the network, select the GP kernel, and blend the winners."""
    inputs = np.asarray(inputs, dtype=float)
    targets = np.asarray(targets, dtype=float)
    n = inputs.shape[0]
    if n < 4:
        raise ValueError(f"ensemble training needs at least 4 samples, got {n}")
    fraction = base_config.validation_fraction if base_config.validation_fraction > 0 else 0.1
    tr_idx, val_idx = split_train_validation(n, fraction, seed)
    x_val, z_val = inputs[val_idx], targets[val_idx]

    best_net: TrainedNetwork | None = None
    best_val = np.inf
    log: list[GridCell] = []
    for index, q, lam, s in grid.cells():
        cfg = replace(
            base_config,
            q=q,
            reg_weight=lam,
            init_seed=derived_seed(seed, 0x11, s),
            split_seed=seed,
            validation_fraction=fraction,
        )
        net, report = train(inputs, targets, arch, cfg)
        log.append(
            GridCell(
                index=index,
                q=q,
                reg_weight=lam,
                seed=s,
                training_error=report.training_error,
                validation_error=report.validation_error,
            )
        )
        if report.validation_error < best_val:
            best_val = report.validation_error
            best_net = net
    assert best_net is not None

    gp_model: gpmod.GPModel | None = None
    if grid.gp_kernels:
        spec = gpmod.select_kernel(
            inputs[tr_idx], targets[tr_idx], x_val, z_val, candidates=grid.gp_kernels
        )
        gp_model = gpmod.fit(inputs[tr_idx], targets[tr_idx], spec)

    if gp_model is None:
        alpha_nn, alpha_gp = 1.0, 0.0
    else:
        nn_val = np.asarray(best_net.predict(x_val))
        gp_val = np.asarray(gp_model.predict_mean(x_val))
        alpha_nn, alpha_gp = blend_weights(nn_val, gp_val, z_val, n_train=n)

    ens = SurrogateEnsemble(
        nn=best_net,
        gp=gp_model,
        alpha_nn=alpha_nn,
        alpha_gp=alpha_gp,
        validation_error=best_val,
        search_log=tuple(log),
    )
    return ens


def search_log_rows(ens: SurrogateEnsemble) -> list[dict]:
    """Grid-search log as CSV-ready dictionaries."""
    return [
        {
            "cell": c.index,
            "q": c.q,
            "reg_weight": c.reg_weight,
            "seed": c.seed,
            "training_error": c.training_error,
            "validation_error": c.validation_error,
        }
        for c in ens.search_log
    ]


def ensemble_to_json(ens: SurrogateEnsemble, path: str | Path) -> None:
    """Persist as a manifest plus sibling NN/GP artifact files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "format_version": 1,
        "alpha_nn": ens.alpha_nn,
        "alpha_gp": ens.alpha_gp,
        "validation_error": ens.validation_error,
        "nn_file": None,
        "gp_file": None,
        "search_log": search_log_rows(ens),
    }
    if ens.nn is not None:
        nn_file = path.with_suffix(".nn.json")
        network_to_json(ens.nn, nn_file)
        doc["nn_file"] = nn_file.name
    if ens.gp is not None:
        gp_file = path.with_suffix(".gp.json")
        gpmod.gp_to_json(ens.gp, gp_file)
        doc["gp_file"] = gp_file.name
    path.write_text(json.dumps(doc))


def ensemble_from_json(path: str | Path) -> SurrogateEnsemble:
    path = Path(path)
    doc = json.loads(path.read_text())
    nn = network_from_json(path.parent / doc["nn_file"]) if doc["nn_file"] else None
    gp_model = gpmod.gp_from_json(path.parent / doc["gp_file"]) if doc["gp_file"] else None
    log = tuple(
        GridCell(
            index=row["cell"],
            q=row["q"],
            reg_weight=row["reg_weight"],
            seed=row["seed"],
            training_error=row["training_error"],
            validation_error=row["validation_error"],
        )
        for row in doc["search_log"]
    )
    return SurrogateEnsemble(
        nn=nn,
        gp=gp_model,
        alpha_nn=doc["alpha_nn"],
        alpha_gp=doc["alpha_gp"],
        validation_error=doc["validation_error"],
        search_log=log,
    )
