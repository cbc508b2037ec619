"""Dataset ingestion, normalization, splitting, and the error metric.

Datasets are CSV files whose header lists the coordinate columns first and
then one column per measurement type; empty cells mean the type was not
measured at that location.  A small key=value schema file declares which
columns are coordinates, which are types, and any per-type transform
(identity or log10).
"""

import configparser
import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DomainError
from .kernels import TypedLocation

__all__ = [
    "Schema", "Dataset", "SplitSpec", "SplitResult", "load_schema",
    "load_dataset", "save_dataset", "normalize", "denormalize",
    "split_test", "rmse",
]

TRANSFORMS = ("identity", "log10")


@dataclass(frozen=True)
class Schema:
    coord_columns: tuple
    type_columns: tuple
    transforms: dict = field(default_factory=dict)

    def __post_init__(self):
        for col, tf in self.transforms.items():
            if col not in self.type_columns:
                raise ConfigError(f"transform declared for unknown column {col!r}")
            if tf not in TRANSFORMS:
                raise ConfigError(f"unknown transform {tf!r} for column {col!r}")

    def transform_of(self, col):
        return self.transforms.get(col, "identity")


def load_schema(path) -> Schema:
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    if "schema" not in parser:
        raise ConfigError(f"{path}: missing [schema] section")
    sec = parser["schema"]
    coords = tuple(c.strip() for c in sec.get("coords", "").split(",") if c.strip())
    types = tuple(c.strip() for c in sec.get("types", "").split(",") if c.strip())
    if not coords or not types:
        raise ConfigError(f"{path}: schema must declare coords and types")
    transforms = {}
    for key, value in sec.items():
        if key.startswith("transform."):
            transforms[key[len("transform."):]] = value.strip()
    return Schema(coord_columns=coords, type_columns=types, transforms=transforms)


@dataclass(frozen=True)
class Dataset:
    """Sparse multi-type spatial measurements.

    ``values`` maps ``(location_index, type_index)`` to the measured value
    (after any declared transform); absent keys are unmeasured pairs.
    """

    coords: np.ndarray
    type_names: tuple
    values: dict
    transforms: tuple

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        n, m = coords.shape[0], len(self.type_names)
        counts = [0] * m
        for (li, ti) in self.values:
            if not (0 <= li < n and 0 <= ti < m):
                raise ConfigError(f"measurement index ({li}, {ti}) out of range")
            counts[ti] += 1
        for ti, c in enumerate(counts):
            if c == 0:
                raise ConfigError(f"type {self.type_names[ti]!r} has no measurements")

    @property
    def n_locations(self):
        return self.coords.shape[0]

    @property
    def n_types(self):
        return len(self.type_names)

    def tuple_at(self, loc_index, type_index) -> TypedLocation:
        return TypedLocation(tuple(float(c) for c in self.coords[loc_index]), type_index)

    def measured(self, type_index):
        """Sorted location indices and values measured for one type."""
        items = sorted(
            (li, v) for (li, ti), v in self.values.items() if ti == type_index
        )
        idx = np.array([li for li, _ in items], dtype=int)
        vals = np.array([v for _, v in items], dtype=float)
        return idx, vals


def _apply_transform(raw, transform, where):
    if transform == "identity":
        return raw
    if raw <= 0:
        raise DomainError(f"{where}: log10 transform needs a positive value, got {raw}")
    return math.log10(raw)


def load_dataset(path, schema: Schema) -> Dataset:
    """Parse and validate a CSV dataset, applying declared transforms.

    Malformed rows raise with their line number; missing cells simply leave
    the (location, type) pair unmeasured.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        header = [c.strip() for c in header]
        expected = list(schema.coord_columns) + list(schema.type_columns)
        if header != expected:
            raise ConfigError(
                f"{path}: header {header} does not match schema columns {expected}"
            )
        d = len(schema.coord_columns)
        coords, values = [], {}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(expected):
                raise ConfigError(
                    f"{path}:{line_no}: expected {len(expected)} cells, got {len(row)}"
                )
            try:
                coords.append([float(c) for c in row[:d]])
            except ValueError as exc:
                raise ConfigError(f"{path}:{line_no}: bad coordinate: {exc}") from None
            loc_index = len(coords) - 1
            for ti, col in enumerate(schema.type_columns):
                cell = row[d + ti].strip()
                if not cell:
                    continue
                try:
                    raw = float(cell)
                except ValueError:
                    raise ConfigError(
                        f"{path}:{line_no}: bad value {cell!r} in column {col!r}"
                    ) from None
                try:
                    values[(loc_index, ti)] = _apply_transform(
                        raw, schema.transform_of(col), f"{path}:{line_no}"
                    )
                except DomainError as exc:
                    raise DomainError(str(exc)) from None
    if not coords:
        raise ConfigError(f"{path}: no data rows")
    return Dataset(
        coords=np.asarray(coords, dtype=float),
        type_names=tuple(schema.type_columns),
        values=values,
        transforms=tuple(schema.transform_of(c) for c in schema.type_columns),
    )


def save_dataset(ds: Dataset, path, coord_names=None):
    """Write the canonical CSV form (used for round-trips and synthesis).

    Values are written as repr floats post-transform; reloading with an
    identity-transform schema reproduces the dataset exactly.
    """
    d = ds.coords.shape[1]
    coord_names = coord_names or [f"x{v}" for v in range(d)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(coord_names) + list(ds.type_names))
        for li in range(ds.n_locations):
            row = [repr(float(c)) for c in ds.coords[li]]
            for ti in range(ds.n_types):
                v = ds.values.get((li, ti))
                row.append("" if v is None else repr(float(v)))
            writer.writerow(row)


def normalize(ds: Dataset):
    """Zero-mean unit-variance scaling per type over measured values.

    Returns the scaled dataset and per-type ``(mean, std)`` statistics for
    later de-normalization of predictions.
    """
    stats = []
    new_values = {}
    for ti in range(ds.n_types):
        _, vals = ds.measured(ti)
        mean = float(np.mean(vals))
        std = float(np.std(vals))
        if std == 0.0:
            raise DomainError(
                f"type {ds.type_names[ti]!r} is constant, cannot normalize"
            )
        stats.append((mean, std))
    for (li, ti), v in ds.values.items():
        mean, std = stats[ti]
        new_values[(li, ti)] = (v - mean) / std
    return replace(ds, values=new_values), stats


def denormalize(values, stats_entry):
    mean, std = stats_entry
    return np.asarray(values, dtype=float) * std + mean


@dataclass(frozen=True)
class SplitSpec:
    """How to carve the held-out test set out of the target measurements."""

    target_types: tuple
    test_count: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "target_types", tuple(int(t) for t in self.target_types))
        if not self.target_types:
            raise ConfigError("at least one target type is required")
        if self.test_count < 1:
            raise ConfigError("test_count must be at least 1")


@dataclass(frozen=True)
class SplitResult:
    pool_tuples: list
    pool_values: np.ndarray
    test_tuples: list
    test_values: np.ndarray


def split_test(ds: Dataset, spec: SplitSpec) -> SplitResult:
    """Remove seeded-uniform test tuples of each target type from the pool.

    ``test_count`` tuples are held out per target type; auxiliary pools are
    untouched.  The candidate pool and the test set are disjoint.
    """
    rng = np.random.default_rng(spec.seed)
    held = set()
    test_tuples, test_values = [], []
    for t in sorted(spec.target_types):
        if t >= ds.n_types:
            raise ConfigError(f"target type {t} out of range [0, {ds.n_types})")
        idx, vals = ds.measured(t)
        if spec.test_count >= idx.size:
            raise ConfigError(
                f"test_count {spec.test_count} must be below the {idx.size} "
                f"measurements of type {ds.type_names[t]!r}"
            )
        pick = rng.choice(idx.size, size=spec.test_count, replace=False)
        for k in sorted(pick):
            held.add((int(idx[k]), t))
            test_tuples.append(ds.tuple_at(int(idx[k]), t))
            test_values.append(vals[k])
    pool_tuples, pool_values = [], []
    for ti in range(ds.n_types):
        idx, vals = ds.measured(ti)
        for li, v in zip(idx, vals):
            if (int(li), ti) in held:
                continue
            pool_tuples.append(ds.tuple_at(int(li), ti))
            pool_values.append(v)
    return SplitResult(
        pool_tuples=pool_tuples,
        pool_values=np.asarray(pool_values, dtype=float),
        test_tuples=test_tuples,
        test_values=np.asarray(test_values, dtype=float),
    )


def rmse(predictions, truths):
    """Root mean squared prediction error."""
    predictions = np.asarray(predictions, dtype=float).ravel()
    truths = np.asarray(truths, dtype=float).ravel()
    if predictions.shape != truths.shape or predictions.size == 0:
        raise DomainError(
            f"need equal nonempty vectors, got {predictions.shape} and {truths.shape}"
        )
    return float(np.sqrt(np.mean((predictions - truths) ** 2)))
