"""Reproducible experiment harness: selection traces and error-vs-budget tables.

One repeat = one seeded test split (plus one synthetic realization when
generating data), one inducing selection, one sparse model, and one
selection run per algorithm; prediction error is evaluated at every budget
checkpoint using the same nested selection prefix.  Everything downstream
of the config (including all seeds) is deterministic; wall-clock timings
are written to a separate sidecar file so the main result table is
byte-stable across runs.
"""

import concurrent.futures
import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import data as data_mod
from .config import ExperimentConfig, GeneratorSpec, VerifySweepConfig
from .criterion import build_cache
from .data import Dataset, SplitSpec, denormalize, normalize, rmse, split_test
from .errors import ConfigError
from .hyperlearn import fit_hyperparams
from .kernels import Hyperparams, TupleArray, TypedLocation
from .linalg import chol_spd
from .pitc import build_model, pitc_posterior, select_inducing
from .selector import (
    select_greedy,
    select_mvar,
    select_smi,
    select_svar,
    write_selection_log,
)
from .verify import check_guarantee, random_instance

__all__ = [
    "ResultRow", "ResultTable", "run_experiment", "generate_synthetic",
    "verify_sweep",
]

SYNTHETIC_TUPLE_GUARD = 2000


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------

def generate_synthetic(spec: GeneratorSpec, h: Hyperparams, seed) -> Dataset:
    """Sample one noisy realization of the prior over a location layout.

    Draws the full joint exactly (guarded to 2000 tuples) and adds per-type
    measurement noise; every (location, type) pair is measured.
    """
    rng = np.random.default_rng(seed)
    if spec.layout == "grid":
        coords = np.linspace(0.0, spec.extent, spec.n_locations)[:, None]
    else:
        coords = rng.uniform(0.0, spec.extent, size=(spec.n_locations, spec.dim))
    m = h.n_types
    total = spec.n_locations * m
    if total > SYNTHETIC_TUPLE_GUARD:
        raise ConfigError(
            f"{total} tuples exceed the {SYNTHETIC_TUPLE_GUARD} sampling guard"
        )
    tuples = [
        TypedLocation(tuple(float(c) for c in coords[li]), ti)
        for ti in range(m)
        for li in range(spec.n_locations)
    ]
    from . import kernels

    cov = kernels.cov_matrix(tuples, tuples, h)
    noise = h.noise_var[[t.type_index for t in tuples]]
    smooth = cov - np.diag(noise)
    factor = chol_spd(smooth + 1e-10 * np.eye(total), "synthetic prior")
    field = factor.lower @ rng.standard_normal(total)
    measured = field + rng.standard_normal(total) * np.sqrt(noise)
    values = {}
    for k, t in enumerate(tuples):
        li = k % spec.n_locations
        values[(li, t.type_index)] = float(measured[k])
    return Dataset(
        coords=coords,
        type_names=tuple(f"type{i}" for i in range(m)),
        values=values,
        transforms=("identity",) * m,
    )


# ---------------------------------------------------------------------------
# result table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    algorithm: str
    seed: int
    budget: int
    rmse: float
    wall_ms: float


@dataclass
class ResultTable:
    rows: list

    def write_csv(self, path):
        """Deterministic table: one row per (algorithm, seed, checkpoint)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["algorithm", "seed", "budget", "rmse"])
            for r in self.rows:
                writer.writerow([r.algorithm, r.seed, r.budget, f"{r.rmse:.12g}"])

    def write_timings(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["algorithm", "seed", "budget", "wall_ms"])
            for r in self.rows:
                writer.writerow([r.algorithm, r.seed, r.budget, f"{r.wall_ms:.3f}"])

    def mean_rmse(self, algorithm, budget):
        vals = [r.rmse for r in self.rows if r.algorithm == algorithm and r.budget == budget]
        if not vals:
            raise KeyError(f"no rows for {algorithm} at budget {budget}")
        return float(np.mean(vals))


# ---------------------------------------------------------------------------
# one repeat
# ---------------------------------------------------------------------------

def _pool_by_type(pool_tuples, n_types):
    per_type = {i: [] for i in range(n_types)}
    for t in pool_tuples:
        per_type[t.type_index].append(t)
    return {i: v for i, v in per_type.items() if v}


def _single_output_refits(config, h_model, pool_tuples, pool_values, seed):
    refits = {}
    value_of = dict(zip(pool_tuples, pool_values))
    for t in sorted(config.target_types):
        tuples = [p for p in pool_tuples if p.type_index == t]
        remapped = [TypedLocation(p.location, 0) for p in tuples]
        y = np.array([value_of[p] for p in tuples])
        init = h_model.single_output(t)
        fit = fit_hyperparams(
            remapped, y, init, budget=config.fit_budget,
            restarts=config.fit_restarts, seed=seed, tie_dims=True,
        )
        refits[t] = fit.h
    return refits


def _run_repeat(config: ExperimentConfig, dataset, repeat_index, out_dir):
    rep_seed = config.seed + repeat_index
    if dataset is None:
        dataset = generate_synthetic(config.synthetic, config.hyperparams, rep_seed)
    norm, stats = normalize(dataset)
    split = split_test(
        norm, SplitSpec(config.target_types, config.test_count, seed=rep_seed)
    )
    value_of = dict(zip(split.pool_tuples, split.pool_values))

    if config.fit:
        fit = fit_hyperparams(
            split.pool_tuples, split.pool_values, config.hyperparams,
            budget=config.fit_budget, restarts=config.fit_restarts,
            seed=rep_seed, tie_dims=True,
        )
        h_model = fit.h
    else:
        h_model = config.hyperparams

    pool_locs = np.array([t.location for t in split.pool_tuples])
    inducing = select_inducing(pool_locs, config.inducing_count, seed=rep_seed)
    model = build_model(h_model, inducing, _pool_by_type(split.pool_tuples, h_model.n_types))
    cache = build_cache(model)

    max_budget = config.checkpoints[-1]
    single_output = None
    if config.svar_mode == "refit" and {"s-var", "s-mi"} & set(config.algorithms):
        single_output = _single_output_refits(
            config, h_model, split.pool_tuples, split.pool_values, rep_seed
        )

    test = TupleArray.build(split.test_tuples, h_model)
    test_types = [t.type_index for t in split.test_tuples]

    rows = []
    for algorithm in config.algorithms:
        started = time.perf_counter()
        if algorithm == "m-greedy":
            state = select_greedy(model, cache, max_budget)
        elif algorithm == "m-var":
            state = select_mvar(model, max_budget, cache)
        elif algorithm == "s-var":
            state = select_svar(model, max_budget, single_output, cap_to_pool=True)
        else:
            state = select_smi(model, max_budget, single_output, cap_to_pool=True)
        select_ms = (time.perf_counter() - started) * 1000.0

        if out_dir is not None:
            write_selection_log(
                state, out_dir / f"selection_{algorithm}_{rep_seed}.csv",
                dim=model.h.dim,
            )

        for budget in config.checkpoints:
            x = state.selected[:budget]
            y_x = np.array([value_of[t] for t in x])
            pred = pitc_posterior(model, x, y_x, test).mean
            per_type = []
            for t in sorted(config.target_types):
                mask = [k for k, ti in enumerate(test_types) if ti == t]
                per_type.append(
                    rmse(
                        denormalize(pred[mask], stats[t]),
                        denormalize(split.test_values[mask], stats[t]),
                    )
                )
            rows.append(
                ResultRow(
                    algorithm=algorithm,
                    seed=rep_seed,
                    budget=budget,
                    rmse=float(np.mean(per_type)),
                    wall_ms=select_ms,
                )
            )
    return rows


def run_experiment(config: ExperimentConfig, out_dir=None, seed_override=None,
                   threads=1) -> ResultTable:
    """Run every repeat and algorithm of an experiment description.

    Writes ``result_table.csv`` (deterministic), ``timings.csv`` and one
    selection log per (algorithm, repeat) into the output directory.
    Repeats may run concurrently; the row order of the outputs does not
    depend on the scheduling.
    """
    if seed_override is not None:
        from dataclasses import replace

        config = replace(config, seed=int(seed_override))
    out_dir = Path(out_dir if out_dir is not None else config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    dataset = None
    if config.dataset_path is not None:
        schema = data_mod.load_schema(config.schema_path)
        dataset = data_mod.load_dataset(config.dataset_path, schema)

    def one(r):
        return _run_repeat(config, dataset, r, out_dir)

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(one, range(config.repeats)))
    else:
        chunks = [one(r) for r in range(config.repeats)]

    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r.algorithm, r.seed, r.budget))
    table = ResultTable(rows=rows)
    table.write_csv(out_dir / "result_table.csv")
    table.write_timings(out_dir / "timings.csv")
    return table


# ---------------------------------------------------------------------------
# verification sweep
# ---------------------------------------------------------------------------

def verify_sweep(config: VerifySweepConfig, out_dir=None):
    """Check the near-optimality certificate over a seeded instance family.

    Writes one key=value line per instance plus a summary line; returns
    ``(passes, failures, inconclusive)``.
    """
    out_dir = Path(out_dir if out_dir is not None else config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    counts = {"pass": 0, "fail": 0, "inconclusive": 0}
    lines = []
    for k in range(config.instances):
        model, cache = random_instance(
            config.seed + k, n_per_type=config.pool_shape
        )
        report = check_guarantee(
            model, cache, config.budget, instance=f"seed{config.seed + k}"
        )
        counts[report.status] += 1
        lines.append(report.to_line())
    lines.append(
        "summary pass={pass} fail={fail} inconclusive={inconclusive}".format(**counts)
    )
    (out_dir / "verify_report.txt").write_text("\n".join(lines) + "\n")
    return counts["pass"], counts["fail"], counts["inconclusive"]
