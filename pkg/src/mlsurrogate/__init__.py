"""Multi-level surrogate learning for parameters-to-observable maps.

Approximates an expensive map by combining many cheap coarse-resolution
training samples with a few expensive fine-resolution ones: one surrogate
learns the coarsest map, further surrogates learn the details between
successive resolutions, and the telescopic sum of their predictions stands
in for the fine-resolution map.  The trained surrogate then powers forward
uncertainty propagation at negligible per-sample cost.
"""

from . import (
    config,
    ensemble,
    experiments,
    gp,
    linalg,
    metrics,
    multilevel,
    neural,
    projectile,
    sampling,
    uq,
)

__version__ = "0.1.0"

__all__ = [
    "config",
    "ensemble",
    "experiments",
    "gp",
    "linalg",
    "metrics",
    "multilevel",
    "neural",
    "projectile",
    "sampling",
    "uq",
    "__version__",
]
