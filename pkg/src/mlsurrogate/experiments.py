"""End-to-end experiment drivers behind the command-line interface.

Everything here is a pure function of (config, on-disk state): datasets,
trained surrogates and result rows are all derived from the master seed, so
re-running a command reproduces its outputs byte for byte.

The multilevel sweep deduplicates its training work: identical (level pair,
sample count) datasets appear in many of the swept configurations, are
seeded identically, and are therefore trained once and reused.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .ensemble import HyperparameterGrid, ensemble_train
from .metrics import (
    SizeStudyRow,
    cumulative_error_study,
    gain,
    prediction_error,
    wasserstein1,
)
from .multilevel import (
    MultilevelSurrogate,
    build_sequence,
    generate_level_data,
    train_multilevel,
)
from .neural import NetworkArchitecture, TrainingConfig
from .projectile import ProjectileModel, ResolutionLadder
from .sampling import ParameterSpace, allocate_samples, derived_seed, uniform_sample
from .uq import (
    EmpiricalMeasure,
    measure_stats,
    push_forward_direct,
    push_forward_reference,
    push_forward_surrogate,
)

__all__ = [
    "DataError",
    "build_model",
    "build_arch",
    "build_training_config",
    "build_grid",
    "worker_count",
    "generate_pool_data",
    "load_pool",
    "run_sweep",
    "run_uq",
    "run_bound_study",
    "SweepRow",
    "UQRow",
]

_KERNEL_NAMES = {
    "squared_exponential": ("squared_exponential", None),
    "matern05": ("matern", 0.5),
    "matern15": ("matern", 1.5),
    "matern25": ("matern", 2.5),
}


class DataError(RuntimeError):
    """Missing or corrupted on-disk datasets."""


def worker_count(cli_value: int | None = None) -> int:
    if cli_value is not None and cli_value >= 1:
        return cli_value
    env = os.environ.get("MLSURROGATE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def build_model(config: ExperimentConfig) -> ProjectileModel:
    fm = config.forward_model
    ladder = ResolutionLadder.from_coarsest(
        fm.coarsest_dt, fm.levels, cost_exponent=fm.cost_exponent
    )
    return ProjectileModel(ladder=ladder, epsilon=fm.epsilon, physical_drag=fm.physical_drag)


def build_arch(config: ExperimentConfig) -> NetworkArchitecture:
    tr = config.training
    return NetworkArchitecture.mlp(7, tr.hidden_layers, tr.width)


def build_training_config(config: ExperimentConfig) -> TrainingConfig:
    tr = config.training
    return TrainingConfig(
        p=tr.p,
        q=tr.q,
        reg_weight=tr.reg_weight,
        learning_rate=tr.learning_rate,
        epochs=tr.epochs,
        validation_fraction=tr.validation_fraction,
    )


def build_grid(config: ExperimentConfig, q: int | None = None, reg_weight: float | None = None) -> HyperparameterGrid:
    """Training grid for one swept map: fixed (q, penalty), several inits."""
    tr = config.training
    kernels = tuple(_KERNEL_NAMES[name] for name in tr.gp_kernels)
    return HyperparameterGrid(
        qs=(q if q is not None else tr.q,),
        reg_weights=(reg_weight if reg_weight is not None else tr.reg_weight,),
        init_seeds=tr.nn_init_seeds,
        gp_kernels=kernels,
    )


# ---------------------------------------------------------------------------
# Dataset pool on disk (gen-data command)
# ---------------------------------------------------------------------------

_MANIFEST_NAME = "manifest.json"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _pool_signature(config: ExperimentConfig) -> dict:
    fm = config.forward_model
    sm = config.sampling
    return {
        "schema_version": 1,
        "master_seed": config.master_seed,
        "epsilon": fm.epsilon,
        "coarsest_dt": fm.coarsest_dt,
        "levels": fm.levels,
        "cost_exponent": fm.cost_exponent,
        "physical_drag": fm.physical_drag,
        "gravity": 9.81,
        "provenance": sm.provenance,
        "sobol_skip": sm.sobol_skip,
        "pool_size": sm.pool_size,
    }


def _pool_points(config: ExperimentConfig) -> np.ndarray:
    space = ParameterSpace(7)
    sm = config.sampling
    if sm.provenance == "sobol":
        from .sampling import sobol_sample

        return sobol_sample(space, sm.pool_size, skip=sm.sobol_skip).points
    seed = derived_seed(config.master_seed, 0xA0)
    return uniform_sample(space, sm.pool_size, seed=seed).points


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _level_csv_text(points: np.ndarray, values: np.ndarray, level: int) -> str:
    lines = [",".join([f"y{j}" for j in range(points.shape[1])] + ["level", "value"])]
    for row, v in zip(points, values):
        lines.append(",".join(f"{x:.17g}" for x in row) + f",{level},{v:.17g}")
    return "\n".join(lines) + "\n"


def generate_pool_data(config: ExperimentConfig, out_dir: str | Path) -> list[Path]:
    """Evaluate one master point pool at every ladder level and cache it.

    Level files share the point set, so any detail is available by
    subtracting two cached columns.  A manifest records the generating
    parameters plus content hashes; reruns with a matching manifest skip the
    computation, while a corrupted or mismatched manifest is refused.
    """
    out = Path(out_dir) / "data"
    manifest_path = out / _MANIFEST_NAME
    signature = _pool_signature(config)
    levels = config.forward_model.levels
    expected = [f"level_{l}.csv" for l in range(levels + 1)]
    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(
                f"corrupted manifest {manifest_path} ({exc.msg}); delete the data "
                f"directory and rerun gen-data"
            ) from exc
        if manifest.get("signature") == signature:
            hashes = manifest.get("files", {})
            if set(hashes) == set(expected) and all(
                (out / name).exists() and _sha256(out / name) == digest
                for name, digest in hashes.items()
            ):
                return [out / name for name in expected]
            raise DataError(
                f"data files under {out} do not match their manifest; delete the "
                f"data directory and rerun gen-data"
            )
        raise DataError(
            f"existing manifest {manifest_path} was produced by a different "
            f"configuration; delete the data directory or change output_dir"
        )
    out.mkdir(parents=True, exist_ok=True)
    model = build_model(config)
    points = _pool_points(config)
    files = {}
    for level in range(levels + 1):
        values = model.level_values(points, level)
        name = f"level_{level}.csv"
        _write_atomic(out / name, _level_csv_text(points, values, level))
        files[name] = _sha256(out / name)
    _write_atomic(manifest_path, json.dumps({"signature": signature, "files": files}))
    return [out / name for name in expected]


def load_pool(config: ExperimentConfig, out_dir: str | Path, level: int):
    """Read one cached level file; raises :class:`DataError` if absent."""
    path = Path(out_dir) / "data" / f"level_{level}.csv"
    if not path.exists():
        raise DataError(f"missing dataset {path}; run gen-data first")
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return raw[:, :7], raw[:, 8]


# ---------------------------------------------------------------------------
# Multilevel sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    sequence: str
    complexity: float
    coarse_samples: int
    fine_samples: int
    ml_cost: float
    sl_samples: int
    ml_error: float
    sl_error: float
    gain: float


def _train_task(payload):
    key, inputs, values, widths, grid, cfg, seed = payload
    arch = NetworkArchitecture(widths=widths)
    ens = ensemble_train(inputs, values, arch, grid, cfg, seed=seed)
    return key, ens


def _run_tasks(tasks, workers: int):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return dict(pool.map(_train_task, tasks))
    return dict(_train_task(t) for t in tasks)


def _reference_hyperparameters(config, model, arch, base_cfg):
    """One-off full-grid searches for the base map and the coarsest detail."""
    tr = config.training
    if not tr.derive_reference_hyperparameters:
        return (tr.q, tr.reg_weight), (tr.q, tr.reg_weight)
    n = max(config.multilevel.coarse_samples)
    full = HyperparameterGrid(init_seeds=5, gp_kernels=())
    space = ParameterSpace(7)
    x_base = uniform_sample(space, n, derived_seed(config.master_seed, 0xD0)).points
    base_ens = ensemble_train(
        x_base, model.level_values(x_base, 0), arch, full, base_cfg,
        seed=derived_seed(config.master_seed, 0xD1),
    )
    x_det = uniform_sample(space, n, derived_seed(config.master_seed, 0xD2)).points
    det_ens = ensemble_train(
        x_det, model.detail_values(x_det, 0, 1), arch, full, base_cfg,
        seed=derived_seed(config.master_seed, 0xD3),
    )

    def winner(ens):
        best = min(ens.search_log, key=lambda c: (c.validation_error, c.index))
        return best.q, best.reg_weight

    return winner(base_ens), winner(det_ens)


def run_sweep(config: ExperimentConfig, out_dir: str | Path, workers: int = 1) -> list[SweepRow]:
    """Gain of every multilevel configuration over a cost-matched baseline.

    The test pool is the cached finest-level dataset; its first
    ``fine_samples`` points double as the training inputs of the finest
    detail, so the held-out test set has pool_size - fine_samples points.
    The baseline is a single-level surrogate trained on as many fine-level
    samples as the multilevel generation cost buys.
    """
    model = build_model(config)
    arch = build_arch(config)
    base_cfg = build_training_config(config)
    pool_x, pool_z = load_pool(config, out_dir, config.forward_model.levels)
    finest = config.forward_model.levels
    (base_q, base_lam), (det_q, det_lam) = _reference_hyperparameters(
        config, model, arch, base_cfg
    )
    base_grid = build_grid(config, q=base_q, reg_weight=base_lam)
    det_grid = build_grid(config, q=det_q, reg_weight=det_lam)

    combos = []
    for seq_indices in config.multilevel.sequences:
        seq = build_sequence(finest, seq_indices)
        for n0 in config.multilevel.coarse_samples:
            for nl in config.multilevel.fine_samples:
                alloc = allocate_samples(seq.indices, n0, nl, finest)
                cost = alloc.counts[0] * model.cost(0)
                for k, (coarse, fine) in enumerate(seq.pairs(), start=1):
                    cost += alloc.counts[k] * model.detail_cost(coarse, fine)
                n_sl = max(1, int(cost / model.cost(finest)))
                combos.append((seq, n0, nl, alloc, cost, n_sl))

    space = ParameterSpace(7)
    tasks = {}
    _KIND_CODES = {"base": 1, "detail": 2, "baseline": 3}

    def add_task(key, inputs, values, grid):
        if key not in tasks:
            seed = derived_seed(config.master_seed, 0xE0, _KIND_CODES[key[0]], *key[1:])
            tasks[key] = (key, inputs, values, arch.widths, grid, base_cfg, seed)

    for seq, n0, nl, alloc, cost, n_sl in combos:
        key = ("base", n0)
        if key not in tasks:
            x = uniform_sample(space, n0, derived_seed(config.master_seed, 0xA1, n0)).points
            add_task(key, x, model.level_values(x, 0), base_grid)
        for k, (coarse, fine) in enumerate(seq.pairs(), start=1):
            n_k = alloc.counts[k]
            key = ("detail", coarse, fine, n_k)
            if key not in tasks:
                if fine == finest:
                    x = pool_x[:n_k]
                else:
                    x = uniform_sample(
                        space, n_k, derived_seed(config.master_seed, 0xA2, coarse, fine, n_k)
                    ).points
                add_task(key, x, model.detail_values(x, coarse, fine), det_grid)
        key = ("baseline", n_sl)
        if key not in tasks:
            x = uniform_sample(space, n_sl, derived_seed(config.master_seed, 0xA3, n_sl)).points
            add_task(key, x, model.level_values(x, finest), base_grid)

    trained = _run_tasks(list(tasks.values()), workers)

    rows = []
    for seq, n0, nl, alloc, cost, n_sl in combos:
        x_test = pool_x[nl:]
        z_test = pool_z[nl:]
        pred = np.asarray(trained[("base", n0)].predict(x_test), dtype=float)
        for k, (coarse, fine) in enumerate(seq.pairs(), start=1):
            pred = pred + trained[("detail", coarse, fine, alloc.counts[k])].predict(x_test)
        e_ml = prediction_error(pred, z_test, p=2)
        e_sl = prediction_error(
            np.asarray(trained[("baseline", n_sl)].predict(x_test), dtype=float), z_test, p=2
        )
        rows.append(
            SweepRow(
                sequence="-".join(str(i) for i in seq.indices),
                complexity=seq.complexity,
                coarse_samples=n0,
                fine_samples=nl,
                ml_cost=cost,
                sl_samples=n_sl,
                ml_error=e_ml,
                sl_error=e_sl,
                gain=gain(e_sl, e_ml),
            )
        )
    return rows


# ---------------------------------------------------------------------------
# UQ comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UQRow:
    method: str
    config_id: str
    cost: float
    samples: int
    wasserstein: float
    mean_error: float
    std_error: float


def _measure_row(method, config_id, measure: EmpiricalMeasure, reference: EmpiricalMeasure, w1=None):
    ref_mean, ref_std = measure_stats(reference)
    mean, std = measure_stats(measure)
    return UQRow(
        method=method,
        config_id=config_id,
        cost=measure.cost,
        samples=measure.count,
        wasserstein=w1 if w1 is not None else wasserstein1(measure, reference),
        mean_error=abs(mean - ref_mean),
        std_error=abs(std - ref_std),
    )


def train_ml2mc_surrogate(
    config: ExperimentConfig, ml_config: dict, index: int, workers: int = 1
) -> MultilevelSurrogate:
    model = build_model(config)
    arch = build_arch(config)
    base_cfg = build_training_config(config)
    grid = build_grid(config)
    finest = config.forward_model.levels
    seq = build_sequence(finest, ml_config["sequence"])
    alloc = allocate_samples(
        seq.indices, ml_config["coarse_samples"], ml_config["fine_samples"], finest
    )
    datasets = generate_level_data(
        model,
        seq,
        alloc,
        provenance_kind=config.sampling.provenance,
        seed=derived_seed(config.master_seed, 0xC0, index),
        sobol_skip=config.sampling.sobol_skip,
    )
    return train_multilevel(
        datasets,
        arch,
        grid,
        base_cfg,
        seq,
        alloc,
        seed=derived_seed(config.master_seed, 0xC1, index),
    )


def run_uq(config: ExperimentConfig, out_dir: str | Path, workers: int = 1) -> list[UQRow]:
    """Wasserstein-vs-cost comparison of direct and surrogate push-forwards.

    Emits one row per ML2MC configuration, per single-level surrogate size,
    and per matched-cost Monte Carlo / quasi-Monte Carlo run.  Monte Carlo
    distances are averaged over ``mc_repeats`` independent replications.
    Costs count forward-model work only; surrogate rows carry their
    training-data generation cost.
    """
    model = build_model(config)
    arch = build_arch(config)
    base_cfg = build_training_config(config)
    grid = build_grid(config)
    finest = config.forward_model.levels
    uqc = config.uq

    reference = push_forward_reference(
        model,
        uqc.reference_dt,
        uqc.reference_samples,
        seed=derived_seed(config.master_seed, 0xF0),
    )

    rows: list[UQRow] = []
    ml_costs: list[float] = []
    for i, ml_config in enumerate(uqc.ml2mc_configs):
        surrogate = train_ml2mc_surrogate(config, ml_config, i, workers=workers)
        measure = push_forward_surrogate(
            surrogate,
            7,
            uqc.surrogate_evaluations,
            seed=derived_seed(config.master_seed, 0xF1, i),
            source="ml2mc",
        )
        seq_str = "-".join(str(v) for v in ml_config["sequence"])
        config_id = (
            f"ml2mc[{seq_str},n0={ml_config['coarse_samples']},nl={ml_config['fine_samples']}]"
        )
        rows.append(_measure_row("ml2mc", config_id, measure, reference))
        ml_costs.append(measure.cost)

    for i, n in enumerate(uqc.sl2mc_sizes):
        x = uniform_sample(
            ParameterSpace(7), n, derived_seed(config.master_seed, 0xF2, i)
        ).points
        ens = ensemble_train(
            x,
            model.level_values(x, finest),
            arch,
            grid,
            base_cfg,
            seed=derived_seed(config.master_seed, 0xF3, i),
        )
        measure = push_forward_surrogate(
            ens,
            7,
            uqc.surrogate_evaluations,
            seed=derived_seed(config.master_seed, 0xF4, i),
            source="sl2mc",
            generation_cost=n * model.cost(finest),
        )
        rows.append(_measure_row("sl2mc", f"sl2mc[n={n}]", measure, reference))

    ref_mean, ref_std = measure_stats(reference)
    for i, ml_cost in enumerate(ml_costs):
        n_mc = max(2, int(ml_cost / model.cost(finest)))
        distances = []
        mean_errs = []
        std_errs = []
        for r in range(uqc.mc_repeats):
            m = push_forward_direct(
                model,
                finest,
                n_mc,
                seed=derived_seed(config.master_seed, 0xF5, i, r),
                source="mc",
            )
            distances.append(wasserstein1(m, reference))
            mean, std = measure_stats(m)
            mean_errs.append(abs(mean - ref_mean))
            std_errs.append(abs(std - ref_std))
        rows.append(
            UQRow(
                method="mc",
                config_id=f"mc[J={n_mc}]",
                cost=n_mc * model.cost(finest),
                samples=n_mc,
                wasserstein=float(np.mean(distances)),
                mean_error=float(np.mean(mean_errs)),
                std_error=float(np.mean(std_errs)),
            )
        )
        qm = push_forward_direct(
            model,
            finest,
            n_mc,
            seed=0,
            provenance_kind="sobol",
            sobol_skip=0,
            source="qmc",
        )
        rows.append(_measure_row("qmc", f"qmc[J={n_mc}]", qm, reference))
    return rows


# ---------------------------------------------------------------------------
# Bound study
# ---------------------------------------------------------------------------


def run_bound_study(config: ExperimentConfig, workers: int = 1) -> list[SizeStudyRow]:
    model = build_model(config)
    bs = config.bound_study
    finest = config.forward_model.levels
    study_cfg = TrainingConfig(
        p=bs.p,
        q=bs.q,
        reg_weight=bs.reg_weight,
        learning_rate=config.training.learning_rate,
        epochs=bs.epochs,
        validation_fraction=0.0,
    )

    def map_fn(points):
        return model.level_values(points, finest)

    return cumulative_error_study(
        map_fn,
        7,
        build_arch(config),
        study_cfg,
        sizes=bs.sizes,
        retrainings=bs.effective_retrainings,
        validation_realizations=bs.effective_validation_realizations,
        master_seed=config.master_seed,
        evaluation_budget=bs.evaluation_budget,
        surrogate_std_points=bs.surrogate_std_points,
        workers=workers,
    )
