"""Command-line experiment harness.

Subcommands: ``gen-data``, ``train-sl``, ``train-ml``, ``sweep``, ``uq``,
``bound-study``, ``validate-config``.  Every command is driven by one JSON
config file (defaults are built in; see ``validate-config --write-default``)
and writes CSV outputs under the configured output directory.  Exit codes:
0 on success, 2 on configuration errors, 3 on data errors.

Worker processes default to the machine's cores; override with ``--workers``
or the ``MLSURROGATE_WORKERS`` environment variable.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, default_config, dump_config, load_config
from .ensemble import ensemble_to_json, ensemble_train, search_log_rows
from .experiments import (
    DataError,
    build_arch,
    build_grid,
    build_model,
    build_training_config,
    generate_pool_data,
    run_bound_study,
    run_sweep,
    run_uq,
    train_ml2mc_surrogate,
    worker_count,
)
from .metrics import STUDY_CSV_COLUMNS
from .multilevel import multilevel_to_dir
from .sampling import ParameterSpace, derived_seed, uniform_sample

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for value in row:
            if isinstance(value, float):
                cells.append(f"{value:.17g}")
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


def _cmd_validate_config(args) -> int:
    if args.write_default:
        dump_config(default_config(), args.write_default)
        print(f"wrote default config to {args.write_default}")
        return EXIT_OK
    config = load_config(args.config)
    print(f"config ok (master_seed={config.master_seed}, output_dir={config.output_dir})")
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    config = load_config(args.config)
    files = generate_pool_data(config, config.output_dir)
    for f in files:
        print(f)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    rows = run_sweep(config, config.output_dir, workers=worker_count(args.workers))
    out = Path(config.output_dir) / "sweep.csv"
    _write_csv(
        out,
        (
            "sequence",
            "complexity",
            "coarse_samples",
            "fine_samples",
            "ml_cost",
            "sl_samples",
            "ml_error",
            "sl_error",
            "gain",
        ),
        (
            (
                r.sequence,
                r.complexity,
                r.coarse_samples,
                r.fine_samples,
                r.ml_cost,
                r.sl_samples,
                r.ml_error,
                r.sl_error,
                r.gain,
            )
            for r in rows
        ),
    )
    print(out)
    return EXIT_OK


def _cmd_uq(args) -> int:
    config = load_config(args.config)
    rows = run_uq(config, config.output_dir, workers=worker_count(args.workers))
    out = Path(config.output_dir) / "uq.csv"
    _write_csv(
        out,
        ("method", "config_id", "cost", "samples", "wasserstein1", "mean_error", "std_error"),
        (
            (r.method, r.config_id, r.cost, r.samples, r.wasserstein, r.mean_error, r.std_error)
            for r in rows
        ),
    )
    print(out)
    return EXIT_OK


def _cmd_bound_study(args) -> int:
    config = load_config(args.config)
    rows = run_bound_study(config, workers=worker_count(args.workers))
    out = Path(config.output_dir) / "bound_study.csv"
    _write_csv(
        out,
        STUDY_CSV_COLUMNS,
        (
            (
                r.size,
                r.training_error,
                r.validation_error,
                r.validation_gap,
                r.generalization_error,
                r.bound,
                r.compression,
            )
            for r in rows
        ),
    )
    print(out)
    return EXIT_OK


def _cmd_train_sl(args) -> int:
    config = load_config(args.config)
    model = build_model(config)
    finest = config.forward_model.levels
    n = args.samples
    x = uniform_sample(ParameterSpace(7), n, derived_seed(config.master_seed, 0x51)).points
    ens = ensemble_train(
        x,
        model.level_values(x, finest),
        build_arch(config),
        build_grid(config),
        build_training_config(config),
        seed=derived_seed(config.master_seed, 0x52),
    )
    out = Path(config.output_dir) / "models" / f"single_level_n{n}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    ensemble_to_json(ens, out)
    log_rows = search_log_rows(ens)
    _write_csv(
        out.with_suffix(".log.csv"),
        ("cell", "q", "reg_weight", "seed", "training_error", "validation_error"),
        ((r["cell"], r["q"], r["reg_weight"], r["seed"], r["training_error"], r["validation_error"]) for r in log_rows),
    )
    print(out)
    return EXIT_OK


def _cmd_train_ml(args) -> int:
    config = load_config(args.config)
    ml_config = {
        "sequence": tuple(int(v) for v in args.sequence.split(",")),
        "coarse_samples": args.coarse,
        "fine_samples": args.fine,
    }
    surrogate = train_ml2mc_surrogate(config, ml_config, index=args.index)
    seq_str = "-".join(str(v) for v in ml_config["sequence"])
    out = Path(config.output_dir) / "models" / f"multilevel_{seq_str}_n0{args.coarse}_nl{args.fine}"
    multilevel_to_dir(surrogate, out)
    print(out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlsurrogate",
        description="Multi-level surrogate learning experiments for the projectile observable",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", type=str, default=None, help="JSON config file (defaults used if omitted)")
        p.add_argument("--workers", type=int, default=None, help="worker process count")

    p = sub.add_parser("validate-config", help="check a config file or write the defaults")
    p.add_argument("--config", type=str, default=None)
    p.add_argument("--write-default", type=str, default=None, metavar="PATH")
    p.set_defaults(func=_cmd_validate_config)

    p = sub.add_parser("gen-data", help="evaluate the master pool at every ladder level")
    add_common(p)
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("sweep", help="multilevel configuration sweep with cost-matched baselines")
    add_common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("uq", help="push-forward comparison: mc, qmc, sl2mc, ml2mc")
    add_common(p)
    p.set_defaults(func=_cmd_uq)

    p = sub.add_parser("bound-study", help="generalization error vs bound across training sizes")
    add_common(p)
    p.set_defaults(func=_cmd_bound_study)

    p = sub.add_parser("train-sl", help="train one single-level ensemble at the finest level")
    add_common(p)
    p.add_argument("--samples", type=int, required=True)
    p.set_defaults(func=_cmd_train_sl)

    p = sub.add_parser("train-ml", help="train one multilevel surrogate")
    add_common(p)
    p.add_argument("--sequence", type=str, default="0,3,6", help="comma-separated level indices")
    p.add_argument("--coarse", type=int, default=256, help="samples at the coarsest level")
    p.add_argument("--fine", type=int, default=8, help="samples at the finest level")
    p.add_argument("--index", type=int, default=0, help="seed index for this build")
    p.set_defaults(func=_cmd_train_ml)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
