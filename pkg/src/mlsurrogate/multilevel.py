"""Multi-level surrogate assembly.

A surrogate of the fine-resolution map is built telescopically: one ensemble
learns the coarsest-level map and one ensemble per step of the level
sequence learns the corresponding detail (difference between two successive
resolutions).  The prediction is the sum of all of them.

Per-level training sets never share points: random sets are freshly drawn
per level, Sobol sets consume consecutive blocks of one sequence.  The cost
ledger counts forward-model evaluations only - training and evaluating the
surrogates is treated as free.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .ensemble import (
    HyperparameterGrid,
    SurrogateEnsemble,
    ensemble_from_json,
    ensemble_to_json,
    ensemble_train,
)
from .neural import NetworkArchitecture, TrainingConfig
from .sampling import (
    InvalidSequenceError,
    ParameterSpace,
    Provenance,
    SampleAllocation,
    derived_seed,
    sobol_sample,
    uniform_sample,
)

__all__ = [
    "LevelSequence",
    "LevelDataset",
    "MultilevelSurrogate",
    "SurrogateDiagnostics",
    "WellTrainedReport",
    "build_sequence",
    "generate_level_data",
    "train_multilevel",
    "predict",
    "well_trained_check",
    "estimate_speedup",
    "multilevel_to_dir",
    "multilevel_from_dir",
]


@dataclass(frozen=True)
class LevelSequence:
    """Strictly increasing level indices from 0 to the finest level."""

    indices: tuple[int, ...]

    @property
    def detail_count(self) -> int:
        return len(self.indices) - 1

    @property
    def finest_level(self) -> int:
        return self.indices[-1]

    @property
    def complexity(self) -> float:
        """Scalar summary of how many intermediate levels are used: n^2/L."""
        return self.detail_count**2 / self.finest_level

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.indices, self.indices[1:]))


def build_sequence(finest_level: int, indices: Sequence[int]) -> LevelSequence:
    idx = tuple(int(v) for v in indices)
    if len(idx) < 2:
        raise InvalidSequenceError(
            f"a sequence needs at least the endpoints (0, {finest_level}), got {idx}"
        )
    if idx[0] != 0 or idx[-1] != finest_level:
        raise InvalidSequenceError(f"sequence must run from 0 to {finest_level}, got {idx}")
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise InvalidSequenceError(f"sequence must be strictly increasing, got {idx}")
    return LevelSequence(indices=idx)


@dataclass(frozen=True)
class LevelDataset:
    """Training data for one map: the base level or one detail."""

    inputs: np.ndarray
    values: np.ndarray
    coarse_level: int | None  # None for the base map
    fine_level: int
    cost: float
    provenance: Provenance

    @property
    def is_base(self) -> bool:
        return self.coarse_level is None

    @property
    def count(self) -> int:
        return self.inputs.shape[0]


def _draw(
    space: ParameterSpace,
    n: int,
    provenance_kind: str,
    seed: int,
    sobol_offset: int,
) -> tuple[np.ndarray, Provenance, int]:
    if provenance_kind == "sobol":
        s = sobol_sample(space, n, skip=sobol_offset)
        return s.points, s.provenance, sobol_offset + n
    s = uniform_sample(space, n, seed=seed)
    return s.points, s.provenance, sobol_offset


def generate_level_data(
    model,
    sequence: LevelSequence,
    allocation: SampleAllocation,
    provenance_kind: str = "random",
    seed: int = 0,
    sobol_skip: int = 0,
    finest_inputs: np.ndarray | None = None,
) -> list[LevelDataset]:
    """Produce the base dataset and one detail dataset per sequence step.

    ``model`` must expose ``dimension``, ``level_values``, ``detail_values``,
    ``cost`` and ``detail_cost``.  Random levels draw from seeds derived per
    level; Sobol levels consume consecutive blocks of one stream, in level
    order.  ``finest_inputs`` optionally pins the input points of the finest
    detail (their evaluation is still paid into the cost ledger).
    """
    if allocation.ladder_indices != sequence.indices:
        raise InvalidSequenceError(
            f"allocation levels {allocation.ladder_indices} do not match "
            f"sequence {sequence.indices}"
        )
    space = ParameterSpace(model.dimension)
    datasets: list[LevelDataset] = []
    offset = sobol_skip
    pts, prov, offset = _draw(
        space, allocation.counts[0], provenance_kind, derived_seed(seed, 0xB, 0), offset
    )
    datasets.append(
        LevelDataset(
            inputs=pts,
            values=model.level_values(pts, 0),
            coarse_level=None,
            fine_level=0,
            cost=allocation.counts[0] * model.cost(0),
            provenance=prov,
        )
    )
    n_details = sequence.detail_count
    for k, (coarse, fine) in enumerate(sequence.pairs(), start=1):
        n_k = allocation.counts[k]
        if k == n_details and finest_inputs is not None:
            if finest_inputs.shape[0] < n_k:
                raise ValueError(
                    f"finest_inputs provides {finest_inputs.shape[0]} points, need {n_k}"
                )
            pts = np.array(finest_inputs[:n_k], dtype=float)
            prov = Provenance("random", derived_seed(seed, 0xB, k))
        else:
            pts, prov, offset = _draw(
                space, n_k, provenance_kind, derived_seed(seed, 0xB, k), offset
            )
        datasets.append(
            LevelDataset(
                inputs=pts,
                values=model.detail_values(pts, coarse, fine),
                coarse_level=coarse,
                fine_level=fine,
                cost=n_k * model.detail_cost(coarse, fine),
                provenance=prov,
            )
        )
    return datasets


@dataclass(frozen=True)
class MultilevelSurrogate:
    base: SurrogateEnsemble
    details: tuple[SurrogateEnsemble, ...]
    sequence: LevelSequence
    allocation: SampleAllocation
    generation_cost: float

    def predict(self, y: np.ndarray):
        return predict(self, y)


def train_multilevel(
    datasets: Sequence[LevelDataset],
    arch: NetworkArchitecture,
    grid: HyperparameterGrid,
    base_config: TrainingConfig,
    sequence: LevelSequence,
    allocation: SampleAllocation,
    seed: int = 0,
) -> MultilevelSurrogate:
    """One ensemble per level dataset, assembled telescopically."""
    if len(datasets) != sequence.detail_count + 1:
        raise ValueError(
            f"expected {sequence.detail_count + 1} datasets for sequence "
            f"{sequence.indices}, got {len(datasets)}"
        )
    if not datasets[0].is_base:
        raise ValueError("first dataset must be the base level")
    surrogates = []
    for k, ds in enumerate(datasets):
        surrogates.append(
            ensemble_train(
                ds.inputs, ds.values, arch, grid, base_config, seed=derived_seed(seed, 0x7, k)
            )
        )
    return MultilevelSurrogate(
        base=surrogates[0],
        details=tuple(surrogates[1:]),
        sequence=sequence,
        allocation=allocation,
        generation_cost=float(sum(ds.cost for ds in datasets)),
    )


def predict(surrogate: MultilevelSurrogate, y: np.ndarray):
    """Telescopic sum of the base and detail predictions."""
    total = surrogate.base.predict(y)
    for det in surrogate.details:
        total = total + det.predict(y)
    return total


@dataclass(frozen=True)
class SurrogateDiagnostics:
    """Measured quantities of one trained surrogate and its target map."""

    label: str
    training_error: float
    validation_gap: float
    sample_count: int
    surrogate_std: float
    target_std: float


@dataclass(frozen=True)
class WellTrainedVerdict:
    label: str
    training_error: float
    validation_gap: float
    threshold: float
    surrogate_std: float
    target_std: float
    well_trained: bool


@dataclass(frozen=True)
class WellTrainedReport:
    entries: tuple[WellTrainedVerdict, ...]

    @property
    def all_well_trained(self) -> bool:
        return all(e.well_trained for e in self.entries)


def well_trained_check(diagnostics: Sequence[SurrogateDiagnostics]) -> WellTrainedReport:
    """Verdict per surrogate: both errors under std/sqrt(N) and stds comparable.

    'Comparable' is operationalized as the surrogate's standard deviation
    lying within a factor of two of the target map's.
    """
    entries = []
    for d in diagnostics:
        threshold = d.target_std / math.sqrt(d.sample_count)
        comparable = 0.5 * d.target_std <= d.surrogate_std <= 2.0 * d.target_std
        verdict = d.training_error < threshold and d.validation_gap < threshold and comparable
        entries.append(
            WellTrainedVerdict(
                label=d.label,
                training_error=d.training_error,
                validation_gap=d.validation_gap,
                threshold=threshold,
                surrogate_std=d.surrogate_std,
                target_std=d.target_std,
                well_trained=verdict,
            )
        )
    return WellTrainedReport(entries=tuple(entries))


def estimate_speedup(
    level_variances: Sequence[float],
    sequence: LevelSequence,
    cost_exponent: float,
    map_variance: float,
) -> float:
    """Predicted cost ratio of direct fine-level training to multi-level.

    ``level_variances`` holds the base-map variance followed by one detail
    variance per sequence step.  The inverse speedup is
    ``(L / V_map) * [V_0 2^{-L*d} + sum_k V_k 2^{-(L - l_k)*d}]``.
    """
    if len(level_variances) != sequence.detail_count + 1:
        raise ValueError("need one variance for the base and one per detail")
    if any(v < 0 for v in level_variances):
        raise ValueError("variances must be >= 0")
    if map_variance <= 0:
        raise ValueError("map variance must be > 0")
    big_l = sequence.finest_level
    bracket = level_variances[0] * 2.0 ** (-big_l * cost_exponent)
    for v_k, l_k in zip(level_variances[1:], sequence.indices[1:]):
        bracket += v_k * 2.0 ** (-(big_l - l_k) * cost_exponent)
    inverse = big_l / map_variance * bracket
    return 1.0 / inverse


def multilevel_to_dir(surrogate: MultilevelSurrogate, path: str | Path) -> None:
    """Persist as a directory: manifest plus one artifact per level."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": 1,
        "sequence": list(surrogate.sequence.indices),
        "allocation_counts": list(surrogate.allocation.counts),
        "allocation_exponent": surrogate.allocation.exponent,
        "generation_cost": surrogate.generation_cost,
        "levels": ["level_0.json"]
        + [f"detail_{k}.json" for k in range(1, surrogate.sequence.detail_count + 1)],
    }
    ensemble_to_json(surrogate.base, path / "level_0.json")
    for k, det in enumerate(surrogate.details, start=1):
        ensemble_to_json(det, path / f"detail_{k}.json")
    (path / "manifest.json").write_text(json.dumps(manifest))


def multilevel_from_dir(path: str | Path) -> MultilevelSurrogate:
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    sequence = build_sequence(manifest["sequence"][-1], manifest["sequence"])
    counts = manifest["allocation_counts"]
    allocation = SampleAllocation(
        ladder_indices=sequence.indices,
        counts=tuple(counts),
        exponent=manifest["allocation_exponent"],
    )
    files = manifest["levels"]
    base = ensemble_from_json(path / files[0])
    details = tuple(ensemble_from_json(path / f) for f in files[1:])
    return MultilevelSurrogate(
        base=base,
        details=details,
        sequence=sequence,
        allocation=allocation,
        generation_cost=manifest["generation_cost"],
    )
