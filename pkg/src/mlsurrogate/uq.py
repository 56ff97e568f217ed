"""Forward uncertainty propagation through direct simulation or surrogates.

The push-forward distribution of the observable is approximated by
equally-weighted empirical measures: either by running the forward model at
one resolution for every sample (Monte Carlo / quasi-Monte Carlo), or by
evaluating a trained surrogate at many cheap sample points.

Cost accounting follows the forward-model ledger: a direct measure costs one
solve per atom, a surrogate measure costs whatever generating its training
data cost - surrogate evaluations are treated as free.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sampling import ParameterSpace, derived_seed, sobol_sample, uniform_sample

__all__ = [
    "EmpiricalMeasure",
    "TooFewAtomsError",
    "push_forward_direct",
    "push_forward_reference",
    "push_forward_surrogate",
    "measure_mean",
    "measure_stats",
    "mix_measures",
    "measure_to_csv",
    "measure_from_csv",
]

_SOURCES = ("mc", "qmc", "sl2mc", "ml2mc", "reference")


class TooFewAtomsError(ValueError):
    """At least two atoms are needed for a standard deviation."""


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Equally weighted atom cloud approximating the push-forward measure."""

    values: np.ndarray
    source: str
    cost: float
    seed: int

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("a measure needs a 1-D array of at least one atom")
        if self.source not in _SOURCES:
            raise ValueError(f"unknown source tag {self.source!r}")
        vals = np.ascontiguousarray(vals)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def count(self) -> int:
        return self.values.size

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.count, 1.0 / self.count)


def push_forward_direct(
    model,
    level: int,
    n_samples: int,
    seed: int,
    provenance_kind: str = "random",
    sobol_skip: int = 0,
    source: str = "mc",
) -> EmpiricalMeasure:
    """One forward solve per atom at the given ladder level."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    space = ParameterSpace(model.dimension)
    if provenance_kind == "sobol":
        pts = sobol_sample(space, n_samples, skip=sobol_skip).points
    else:
        pts = uniform_sample(space, n_samples, seed=seed).points
    values = model.level_values(pts, level)
    return EmpiricalMeasure(
        values=values,
        source=source,
        cost=n_samples * model.cost(level),
        seed=seed,
    )


def push_forward_reference(model, dt: float, n_samples: int, seed: int) -> EmpiricalMeasure:
    """High-accuracy reference measure at an arbitrary (non-ladder) step."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    pts = uniform_sample(ParameterSpace(model.dimension), n_samples, seed=seed).points
    values = model.values_at_dt(pts, dt)
    cost = n_samples * dt ** (-model.ladder.cost_exponent)
    return EmpiricalMeasure(values=values, source="reference", cost=cost, seed=seed)


def push_forward_surrogate(
    surrogate,
    dimension: int,
    n_samples: int,
    seed: int,
    source: str = "ml2mc",
    generation_cost: float | None = None,
) -> EmpiricalMeasure:
    """Evaluate a trained surrogate on fresh uniform sample points.

    The evaluation points are drawn independently of any training set.  The
    ledger records the surrogate's training-data generation cost; pass
    ``generation_cost`` explicitly for surrogates that do not carry one.
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    pts = uniform_sample(ParameterSpace(dimension), n_samples, seed=derived_seed(seed, 0xF)).points
    values = np.asarray(surrogate.predict(pts), dtype=float)
    if generation_cost is None:
        generation_cost = float(getattr(surrogate, "generation_cost"))
    return EmpiricalMeasure(values=values, source=source, cost=generation_cost, seed=seed)


def measure_mean(measure: EmpiricalMeasure) -> float:
    return float(measure.values.mean())


def measure_stats(measure: EmpiricalMeasure) -> tuple[float, float]:
    """Sample mean and sample standard deviation (1/(J-1) normalization)."""
    if measure.count < 2:
        raise TooFewAtomsError("standard deviation needs at least two atoms")
    return measure_mean(measure), float(measure.values.std(ddof=1))


def mix_measures(m1: EmpiricalMeasure, m2: EmpiricalMeasure) -> EmpiricalMeasure:
    """Concatenate two atom clouds; costs add."""
    return EmpiricalMeasure(
        values=np.concatenate([m1.values, m2.values]),
        source=m1.source,
        cost=m1.cost + m2.cost,
        seed=m1.seed,
    )


def measure_to_csv(measure: EmpiricalMeasure, path: str | Path) -> None:
    """Atom-per-row CSV with a JSON sidecar holding the metadata."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["value"])
        for v in measure.values:
            writer.writerow([f"{v:.17g}"])
    sidecar = {
        "source": measure.source,
        "count": measure.count,
        "seed": measure.seed,
        "cost": measure.cost,
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar))


def measure_from_csv(path: str | Path) -> EmpiricalMeasure:
    path = Path(path)
    values = np.loadtxt(path, skiprows=1, ndmin=1)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return EmpiricalMeasure(
        values=values, source=meta["source"], cost=meta["cost"], seed=meta["seed"]
    )
