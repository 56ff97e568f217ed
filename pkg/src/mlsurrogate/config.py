"""Experiment configuration: JSON schema, defaults and validation.

One human-editable JSON file drives every CLI command.  The shipped
defaults reproduce the projectile study: a seven-level time-step ladder from
0.08 down to 0.00125, four level sequences, coarse budgets {256, 512, 1024,
2048} and fine budgets {4, 8, 16, 32, 64, 92, 128}.  All randomness derives
from the single ``master_seed``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

__all__ = [
    "ConfigError",
    "SCHEMA_VERSION",
    "ForwardModelConfig",
    "SamplingConfig",
    "TrainingSection",
    "MultilevelSection",
    "UQSection",
    "BoundStudySection",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "dump_config",
]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class ForwardModelConfig:
    epsilon: float = 0.1
    coarsest_dt: float = 0.08
    levels: int = 6
    cost_exponent: float = 1.0
    physical_drag: bool = False


@dataclass(frozen=True)
class SamplingConfig:
    provenance: str = "random"
    sobol_skip: int = 0
    pool_size: int = 2000


@dataclass(frozen=True)
class TrainingSection:
    p: int = 2
    q: int = 2
    reg_weight: float = 5e-7
    learning_rate: float = 0.01
    epochs: int = 10000
    hidden_layers: int = 6
    width: int = 10
    validation_fraction: float = 0.1
    nn_init_seeds: int = 2
    derive_reference_hyperparameters: bool = False
    gp_kernels: tuple[str, ...] = ()


@dataclass(frozen=True)
class MultilevelSection:
    sequences: tuple[tuple[int, ...], ...] = (
        (0, 6),
        (0, 3, 6),
        (0, 2, 4, 6),
        (0, 1, 2, 3, 4, 5, 6),
    )
    coarse_samples: tuple[int, ...] = (256, 512, 1024, 2048)
    fine_samples: tuple[int, ...] = (4, 8, 16, 32, 64, 92, 128)


@dataclass(frozen=True)
class UQSection:
    surrogate_evaluations: int = 10000
    reference_dt: float = 0.001
    reference_samples: int = 20000
    mc_repeats: int = 5
    sl2mc_sizes: tuple[int, ...] = (9, 15, 21, 64, 191, 322)
    ml2mc_configs: tuple[dict, ...] = (
        {"sequence": (0, 6), "coarse_samples": 256, "fine_samples": 4},
        {"sequence": (0, 3, 6), "coarse_samples": 256, "fine_samples": 8},
        {"sequence": (0, 3, 6), "coarse_samples": 2048, "fine_samples": 8},
        {"sequence": (0, 3, 6), "coarse_samples": 2048, "fine_samples": 32},
        {"sequence": (0, 2, 4, 6), "coarse_samples": 2048, "fine_samples": 64},
    )


@dataclass(frozen=True)
class BoundStudySection:
    sizes: tuple[int, ...] = (16, 32, 64, 128, 256, 512, 1024)
    retrainings: int = 10
    validation_realizations: int = 5
    full_fidelity: bool = False
    p: int = 1
    q: int = 2
    reg_weight: float = 1e-6
    epochs: int = 20000
    evaluation_budget: int = 2000
    surrogate_std_points: int = 1000

    @property
    def effective_retrainings(self) -> int:
        return 60 if self.full_fidelity else self.retrainings

    @property
    def effective_validation_realizations(self) -> int:
        return 30 if self.full_fidelity else self.validation_realizations


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int = 20260808
    output_dir: str = "runs/projectile"
    forward_model: ForwardModelConfig = field(default_factory=ForwardModelConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    training: TrainingSection = field(default_factory=TrainingSection)
    multilevel: MultilevelSection = field(default_factory=MultilevelSection)
    uq: UQSection = field(default_factory=UQSection)
    bound_study: BoundStudySection = field(default_factory=BoundStudySection)


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ConfigError(f"{path}: {message}")


def _check_int(doc: dict, path: str, key: str, minimum: int | None = None) -> None:
    if key not in doc:
        return
    value = doc[key]
    _require(isinstance(value, int) and not isinstance(value, bool), f"{path}.{key}", "must be an integer")
    if minimum is not None:
        _require(value >= minimum, f"{path}.{key}", f"must be >= {minimum}")


def _check_number(doc: dict, path: str, key: str, positive: bool = False) -> None:
    if key not in doc:
        return
    value = doc[key]
    _require(
        isinstance(value, (int, float)) and not isinstance(value, bool),
        f"{path}.{key}",
        "must be a number",
    )
    if positive:
        _require(value > 0, f"{path}.{key}", "must be > 0")


def _validate_sequence(seq: Any, levels: int, path: str) -> tuple[int, ...]:
    _require(isinstance(seq, (list, tuple)), path, "must be a list of level indices")
    _require(len(seq) >= 2, path, "needs at least the two endpoint levels")
    _require(all(isinstance(v, int) for v in seq), path, "entries must be integers")
    _require(seq[0] == 0, path, "must start at level 0")
    _require(seq[-1] == levels, path, f"must end at the finest level {levels}")
    _require(
        all(b > a for a, b in zip(seq, seq[1:])), path, "must be strictly increasing"
    )
    return tuple(seq)


_SECTION_KEYS = {
    "forward_model": ForwardModelConfig,
    "sampling": SamplingConfig,
    "training": TrainingSection,
    "multilevel": MultilevelSection,
    "uq": UQSection,
    "bound_study": BoundStudySection,
}


def _parse(doc: dict) -> ExperimentConfig:
    _require(isinstance(doc, dict), "config", "top level must be a JSON object")
    version = doc.get("schema_version")
    _require(
        version == SCHEMA_VERSION,
        "config.schema_version",
        f"must be {SCHEMA_VERSION}, got {version!r}",
    )
    known = {"schema_version", "master_seed", "output_dir", *_SECTION_KEYS}
    for key in doc:
        _require(key in known, f"config.{key}", "unknown key")
    _check_int(doc, "config", "master_seed", minimum=0)
    if "output_dir" in doc:
        _require(isinstance(doc["output_dir"], str), "config.output_dir", "must be a string")

    sections: dict[str, Any] = {}
    for name, cls in _SECTION_KEYS.items():
        sub = doc.get(name, {})
        _require(isinstance(sub, dict), f"config.{name}", "must be an object")
        defaults = asdict(cls())
        for key in sub:
            _require(key in defaults, f"config.{name}.{key}", "unknown key")
        merged = dict(defaults)
        merged.update(sub)
        sections[name] = merged

    fm = sections["forward_model"]
    _check_number(fm, "config.forward_model", "epsilon")
    _require(0 <= fm["epsilon"] < 1, "config.forward_model.epsilon", "must lie in [0, 1)")
    _check_number(fm, "config.forward_model", "coarsest_dt", positive=True)
    _check_int(fm, "config.forward_model", "levels", minimum=1)
    _check_number(fm, "config.forward_model", "cost_exponent", positive=True)
    levels = fm["levels"]

    sm = sections["sampling"]
    _require(
        sm["provenance"] in ("random", "sobol"),
        "config.sampling.provenance",
        "must be 'random' or 'sobol'",
    )
    _check_int(sm, "config.sampling", "sobol_skip", minimum=0)
    _check_int(sm, "config.sampling", "pool_size", minimum=2)

    tr = sections["training"]
    _require(tr["p"] in (1, 2), "config.training.p", "must be 1 or 2")
    _require(tr["q"] in (1, 2), "config.training.q", "must be 1 or 2")
    _check_number(tr, "config.training", "reg_weight")
    _require(tr["reg_weight"] >= 0, "config.training.reg_weight", "must be >= 0")
    _check_number(tr, "config.training", "learning_rate", positive=True)
    _check_int(tr, "config.training", "epochs", minimum=1)
    _check_int(tr, "config.training", "hidden_layers", minimum=1)
    _check_int(tr, "config.training", "width", minimum=1)
    _check_int(tr, "config.training", "nn_init_seeds", minimum=1)
    _require(
        0 < tr["validation_fraction"] < 1,
        "config.training.validation_fraction",
        "must lie in (0, 1)",
    )
    kernels = tr["gp_kernels"]
    _require(
        isinstance(kernels, (list, tuple)),
        "config.training.gp_kernels",
        "must be a list of kernel names",
    )
    valid_kernels = ("squared_exponential", "matern05", "matern15", "matern25")
    for k in kernels:
        _require(
            k in valid_kernels,
            "config.training.gp_kernels",
            f"unknown kernel {k!r}; choose from {valid_kernels}",
        )
    tr["gp_kernels"] = tuple(kernels)

    ml = sections["multilevel"]
    _require(
        isinstance(ml["sequences"], (list, tuple)) and len(ml["sequences"]) >= 1,
        "config.multilevel.sequences",
        "must be a non-empty list",
    )
    ml["sequences"] = tuple(
        _validate_sequence(s, levels, f"config.multilevel.sequences[{i}]")
        for i, s in enumerate(ml["sequences"])
    )
    for key in ("coarse_samples", "fine_samples"):
        vals = ml[key]
        _require(
            isinstance(vals, (list, tuple)) and len(vals) >= 1,
            f"config.multilevel.{key}",
            "must be a non-empty list",
        )
        _require(
            all(isinstance(v, int) and v >= 1 for v in vals),
            f"config.multilevel.{key}",
            "entries must be integers >= 1",
        )
        ml[key] = tuple(vals)
    _require(
        min(ml["coarse_samples"]) >= max(ml["fine_samples"]),
        "config.multilevel.coarse_samples",
        "every coarse budget must be >= every fine budget",
    )

    qu = sections["uq"]
    _check_int(qu, "config.uq", "surrogate_evaluations", minimum=1)
    _check_number(qu, "config.uq", "reference_dt", positive=True)
    _check_int(qu, "config.uq", "reference_samples", minimum=2)
    _check_int(qu, "config.uq", "mc_repeats", minimum=1)
    _require(
        isinstance(qu["sl2mc_sizes"], (list, tuple)),
        "config.uq.sl2mc_sizes",
        "must be a list of sample counts",
    )
    qu["sl2mc_sizes"] = tuple(int(v) for v in qu["sl2mc_sizes"])
    _require(
        isinstance(qu["ml2mc_configs"], (list, tuple)) and len(qu["ml2mc_configs"]) >= 1,
        "config.uq.ml2mc_configs",
        "must be a non-empty list",
    )
    parsed_cfgs = []
    for i, item in enumerate(qu["ml2mc_configs"]):
        path = f"config.uq.ml2mc_configs[{i}]"
        _require(isinstance(item, dict), path, "must be an object")
        for key in ("sequence", "coarse_samples", "fine_samples"):
            _require(key in item, f"{path}.{key}", "missing")
        seq = _validate_sequence(list(item["sequence"]), levels, f"{path}.sequence")
        _require(
            isinstance(item["coarse_samples"], int) and item["coarse_samples"] >= 1,
            f"{path}.coarse_samples",
            "must be an integer >= 1",
        )
        _require(
            isinstance(item["fine_samples"], int) and item["fine_samples"] >= 1,
            f"{path}.fine_samples",
            "must be an integer >= 1",
        )
        parsed_cfgs.append(
            {
                "sequence": seq,
                "coarse_samples": item["coarse_samples"],
                "fine_samples": item["fine_samples"],
            }
        )
    qu["ml2mc_configs"] = tuple(parsed_cfgs)

    bs = sections["bound_study"]
    _require(
        isinstance(bs["sizes"], (list, tuple)) and len(bs["sizes"]) >= 1,
        "config.bound_study.sizes",
        "must be a non-empty list",
    )
    bs["sizes"] = tuple(int(v) for v in bs["sizes"])
    _check_int(bs, "config.bound_study", "retrainings", minimum=1)
    _check_int(bs, "config.bound_study", "validation_realizations", minimum=1)
    _check_int(bs, "config.bound_study", "epochs", minimum=1)
    _require(bs["p"] in (1, 2), "config.bound_study.p", "must be 1 or 2")
    _require(bs["q"] in (1, 2), "config.bound_study.q", "must be 1 or 2")
    _check_int(bs, "config.bound_study", "evaluation_budget", minimum=2)
    _check_int(bs, "config.bound_study", "surrogate_std_points", minimum=2)
    for size in bs["sizes"]:
        _require(
            0 < size < bs["evaluation_budget"],
            "config.bound_study.sizes",
            f"size {size} must lie in 1..evaluation_budget-1",
        )

    return ExperimentConfig(
        master_seed=doc.get("master_seed", ExperimentConfig().master_seed),
        output_dir=doc.get("output_dir", ExperimentConfig().output_dir),
        forward_model=ForwardModelConfig(**fm),
        sampling=SamplingConfig(**sm),
        training=TrainingSection(**tr),
        multilevel=MultilevelSection(**ml),
        uq=UQSection(**qu),
        bound_study=BoundStudySection(**bs),
    )


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read and validate a JSON config; ``None`` yields the defaults."""
    if path is None:
        return default_config()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} line {exc.lineno}: invalid JSON ({exc.msg})") from exc
    return _parse(doc)


def dump_config(config: ExperimentConfig, path: str | Path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "master_seed": config.master_seed,
        "output_dir": config.output_dir,
        "forward_model": asdict(config.forward_model),
        "sampling": asdict(config.sampling),
        "training": asdict(config.training),
        "multilevel": {
            "sequences": [list(s) for s in config.multilevel.sequences],
            "coarse_samples": list(config.multilevel.coarse_samples),
            "fine_samples": list(config.multilevel.fine_samples),
        },
        "uq": {
            "surrogate_evaluations": config.uq.surrogate_evaluations,
            "reference_dt": config.uq.reference_dt,
            "reference_samples": config.uq.reference_samples,
            "mc_repeats": config.uq.mc_repeats,
            "sl2mc_sizes": list(config.uq.sl2mc_sizes),
            "ml2mc_configs": [
                {
                    "sequence": list(c["sequence"]),
                    "coarse_samples": c["coarse_samples"],
                    "fine_samples": c["fine_samples"],
                }
                for c in config.uq.ml2mc_configs
            ],
        },
        "bound_study": asdict(config.bound_study),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
