"""Command line entry point.

Subcommands: ``run`` (experiment), ``fit`` (hyperparameter MLE), ``verify``
(near-optimality sweep), ``synth`` (synthetic dataset generation).  Every
subcommand reads a plain-text config; ``--out``, ``--seed`` and
``--threads`` override the corresponding config values.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import (
    load_experiment_config,
    load_verify_config,
    save_hyperparams,
)
from .data import load_dataset, load_schema, normalize, save_dataset
from .experiment import generate_synthetic, run_experiment, verify_sweep
from .hyperlearn import fit_hyperparams


def _parser():
    parser = argparse.ArgumentParser(
        prog="mogpal",
        description="Active learning of multi-output Gaussian processes",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("run", "run an experiment config and write result tables"),
        ("fit", "fit hyperparameters by maximum likelihood"),
        ("verify", "run the near-optimality verification sweep"),
        ("synth", "generate a synthetic dataset"),
    ):
        cmd = sub.add_parser(name, help=helptext)
        cmd.add_argument("--config", required=True, help="path to the config file")
        cmd.add_argument("--out", default=None, help="output directory override")
        cmd.add_argument("--seed", type=int, default=None, help="seed override")
        cmd.add_argument("--threads", type=int, default=1, help="concurrent repeats")
    return parser


def _cmd_run(args):
    config = load_experiment_config(args.config)
    table = run_experiment(
        config, out_dir=args.out, seed_override=args.seed, threads=args.threads
    )
    out = Path(args.out if args.out is not None else config.output_dir)
    print(f"wrote {len(table.rows)} rows to {out / 'result_table.csv'}")
    for algorithm in config.algorithms:
        final = config.checkpoints[-1]
        print(f"  {algorithm}: mean rmse at budget {final} = "
              f"{table.mean_rmse(algorithm, final):.6g}")
    return 0


def _cmd_fit(args):
    config = load_experiment_config(args.config)
    if config.dataset_path is None:
        print("fit needs a [data] section with dataset and schema", file=sys.stderr)
        return 2
    schema = load_schema(config.schema_path)
    dataset = load_dataset(config.dataset_path, schema)
    norm, _ = normalize(dataset)
    tuples, values = [], []
    for (li, ti), v in sorted(norm.values.items()):
        tuples.append(norm.tuple_at(li, ti))
        values.append(v)
    seed = args.seed if args.seed is not None else config.seed
    fit = fit_hyperparams(
        tuples, np.asarray(values), config.hyperparams,
        budget=config.fit_budget, restarts=config.fit_restarts, seed=seed,
    )
    out = Path(args.out if args.out is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "fitted_hyperparams.ini"
    save_hyperparams(
        fit.h, path,
        extras={
            "final_nll": fit.final_nll,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "restarts_used": fit.restarts_used,
        },
    )
    print(f"wrote {path} (nll {fit.final_nll:.6g}, converged={fit.converged})")
    return 0


def _cmd_verify(args):
    config = load_verify_config(args.config)
    if args.seed is not None:
        from dataclasses import replace

        config = replace(config, seed=args.seed)
    passes, failures, inconclusive = verify_sweep(config, out_dir=args.out)
    out = Path(args.out if args.out is not None else config.output_dir)
    print(f"wrote {out / 'verify_report.txt'}")
    print(f"pass={passes} fail={failures} inconclusive={inconclusive}")
    return 0 if failures == 0 else 1


def _cmd_synth(args):
    config = load_experiment_config(args.config)
    if config.synthetic is None:
        print("synth needs a [synthetic] section", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else config.seed
    dataset = generate_synthetic(config.synthetic, config.hyperparams, seed)
    out = Path(args.out if args.out is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "synthetic.csv"
    save_dataset(dataset, csv_path)
    schema_path = out / "synthetic.schema"
    coords = ", ".join(f"x{v}" for v in range(dataset.coords.shape[1]))
    types = ", ".join(dataset.type_names)
    schema_path.write_text(f"[schema]\ncoords = {coords}\ntypes = {types}\n")
    print(f"wrote {csv_path} and {schema_path}")
    return 0


def main(argv=None):
    args = _parser().parse_args(argv)
    handler = {
        "run": _cmd_run, "fit": _cmd_fit, "verify": _cmd_verify, "synth": _cmd_synth,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
