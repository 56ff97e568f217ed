"""Parameter domain, training-set generation and per-level sample allocation.

The parameter domain is always the unit hypercube with the uniform measure.
Point sets come from one of two provenances:

* ``random`` -- i.i.d. uniform draws from NumPy's PCG64 generator
  (``numpy.random.default_rng``), fully determined by a 64-bit seed.
* ``sobol`` -- consecutive points of the canonical Sobol sequence built from
  the Joe-Kuo D(6) direction numbers.  The leading all-zeros point of the raw
  sequence is never emitted, so the first 1-D point is 0.5.

Sample counts for a ladder of resolutions follow a geometric interpolation
between the coarse-level and fine-level budgets, rounded half-to-even.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "ParameterSpace",
    "Provenance",
    "SampleSet",
    "SampleAllocation",
    "SobolDimensionError",
    "InvalidSequenceError",
    "uniform_sample",
    "sobol_sample",
    "allocate_samples",
    "derived_seed",
]


class SobolDimensionError(ValueError):
    """Requested dimension exceeds the embedded direction-number table."""


class InvalidSequenceError(ValueError):
    """Level indices are not strictly increasing from 0 to the finest level."""


def derived_seed(*parts: int) -> int:
    """Derive a reproducible 64-bit child seed from a tuple of integers.

    All randomness in the package flows from one master seed; children are
    produced with ``numpy.random.SeedSequence`` so different contexts never
    collide.
    """
    ss = np.random.SeedSequence([int(p) & 0xFFFFFFFFFFFFFFFF for p in parts])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ParameterSpace:
    """Unit hypercube [0, 1]^d with the uniform probability measure."""

    dimension: int

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")


@dataclass(frozen=True)
class Provenance:
    """How a point set was produced: ``random`` (seed) or ``sobol`` (skip)."""

    kind: str
    value: int

    def __post_init__(self) -> None:
        if self.kind not in ("random", "sobol"):
            raise ValueError(f"unknown provenance kind {self.kind!r}")


@dataclass(frozen=True)
class SampleSet:
    """An ordered, immutable point cloud in the unit hypercube."""

    points: np.ndarray
    provenance: Provenance

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("points must be a 2-D array of shape (n, d)")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path: str | Path) -> None:
        """Write one row per point with header ``y0..y{d-1}``."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"y{j}" for j in range(self.dimension)])
            for row in self.points:
                writer.writerow([f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path: str | Path, provenance: Provenance) -> "SampleSet":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(points=data, provenance=provenance)


def uniform_sample(space: ParameterSpace, n: int, seed: int) -> SampleSet:
    """Draw ``n`` i.i.d. uniform points; identical seeds give identical sets."""
    if n < 0:
        raise ValueError(f"sample count must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    pts = rng.random((n, space.dimension))
    return SampleSet(points=pts, provenance=Provenance("random", seed))


# ---------------------------------------------------------------------------
# Sobol sequence, Joe-Kuo D(6) direction numbers.
#
# Rows: dimension -> (polynomial degree s, coefficient bits a, initial m_k).
# Dimension 1 is the van der Corput sequence and needs no table entry.
# ---------------------------------------------------------------------------

_JOE_KUO_D6 = {
    2: (1, 0, (1,)),
    3: (2, 1, (1, 3)),
    4: (3, 1, (1, 3, 1)),
    5: (3, 2, (1, 1, 1)),
    6: (4, 1, (1, 1, 3, 3)),
    7: (4, 4, (1, 3, 5, 13)),
    8: (5, 2, (1, 1, 5, 5, 17)),
    9: (5, 4, (1, 1, 5, 5, 5)),
    10: (5, 7, (1, 1, 7, 11, 19)),
}

MAX_SOBOL_DIMENSION = 1 + len(_JOE_KUO_D6)

_SOBOL_BITS = 30
_SOBOL_SCALE = float(2**_SOBOL_BITS)


def _direction_integers(dim: int) -> list[int]:
    if dim == 1:
        return [1 << (_SOBOL_BITS - k) for k in range(1, _SOBOL_BITS + 1)]
    s, a, m_init = _JOE_KUO_D6[dim]
    m = list(m_init)
    for k in range(s, _SOBOL_BITS):
        new = m[k - s] ^ (m[k - s] << s)
        for i in range(1, s):
            if (a >> (s - 1 - i)) & 1:
                new ^= m[k - i] << i
        m.append(new)
    return [m[k] << (_SOBOL_BITS - 1 - k) for k in range(_SOBOL_BITS)]


def sobol_sample(space: ParameterSpace, n: int, skip: int = 0) -> SampleSet:
    """Emit ``n`` consecutive Sobol points, starting after ``skip`` points.

    The skip counts emitted points, so concatenating ``(n1, skip)`` with
    ``(n2, skip + n1)`` equals one call with ``(n1 + n2, skip)``.
    """
    if n < 0:
        raise ValueError(f"sample count must be >= 0, got {n}")
    if skip < 0:
        raise ValueError(f"skip must be >= 0, got {skip}")
    d = space.dimension
    if d > MAX_SOBOL_DIMENSION:
        raise SobolDimensionError(
            f"Sobol direction numbers available up to dimension "
            f"{MAX_SOBOL_DIMENSION}, got {d}"
        )
    directions = [_direction_integers(j + 1) for j in range(d)]
    state = [0] * d
    pts = np.empty((n, d))
    # Raw index 0 is the all-zeros point; emitted index j corresponds to raw
    # index skip + j + 1.
    for i in range(1, skip + n + 1):
        c = 0
        value = i - 1
        while value & 1:
            value >>= 1
            c += 1
        for j in range(d):
            state[j] ^= directions[j][c]
        if i > skip:
            row = i - skip - 1
            for j in range(d):
                pts[row, j] = state[j] / _SOBOL_SCALE
    return SampleSet(points=pts, provenance=Provenance("sobol", skip))


@dataclass(frozen=True)
class SampleAllocation:
    """Per-level sample counts interpolating between coarse and fine budgets."""

    ladder_indices: tuple[int, ...]
    counts: tuple[int, ...]
    exponent: float

    def __post_init__(self) -> None:
        if len(self.ladder_indices) != len(self.counts):
            raise ValueError("ladder_indices and counts must have equal length")
        if any(b <= a for a, b in zip(self.ladder_indices, self.ladder_indices[1:])):
            raise InvalidSequenceError(
                f"level indices must be strictly increasing, got {self.ladder_indices}"
            )
        if any(b > a for a, b in zip(self.counts, self.counts[1:])):
            raise ValueError(f"counts must be non-increasing, got {self.counts}")


def allocate_samples(
    ladder_indices: Sequence[int], n_coarse: int, n_fine: int, finest_level: int
) -> SampleAllocation:
    """Geometric sample-count interpolation along a level sequence.

    Endpoints are exact; interior counts are ``n_fine * 2**(e*(L - l_k))``
    with ``e = log2(n_coarse/n_fine)/L``, rounded half-to-even and clamped
    to at least 1.
    """
    idx = tuple(int(v) for v in ladder_indices)
    if not idx or idx[0] != 0 or idx[-1] != finest_level:
        raise InvalidSequenceError(
            f"sequence must run from 0 to {finest_level}, got {idx}"
        )
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise InvalidSequenceError(f"sequence must be strictly increasing, got {idx}")
    if n_fine < 1 or n_coarse < n_fine:
        raise ValueError(
            f"need n_coarse >= n_fine >= 1, got n_coarse={n_coarse} n_fine={n_fine}"
        )
    e = math.log2(n_coarse / n_fine) / finest_level
    counts = [n_coarse]
    for level in idx[1:-1]:
        raw = n_fine * 2.0 ** (e * (finest_level - level))
        counts.append(max(1, round(raw)))
    counts.append(n_fine)
    return SampleAllocation(ladder_indices=idx, counts=tuple(counts), exponent=e)
