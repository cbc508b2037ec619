import math

import numpy as np
import pytest

from mogpal import ConfigError, DomainError
from mogpal.data import (
    Dataset,
    Schema,
    SplitSpec,
    denormalize,
    load_dataset,
    load_schema,
    normalize,
    rmse,
    save_dataset,
    split_test,
)

SCHEMA_TEXT = """[schema]
coords = x, y
types = lg-cd, ni, lg-zn
transform.lg-cd = log10
transform.lg-zn = log10
"""


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


@pytest.fixture
def jura_like(tmp_path):
    """A synthetic file with the three-type layout: coords then per-type
    columns, log transforms on the first and third."""
    schema = load_schema(_write(tmp_path, "jura.schema", SCHEMA_TEXT))
    rng = np.random.default_rng(0)
    lines = ["x,y,lg-cd,ni,lg-zn"]
    for k in range(359):
        x, y = rng.uniform(0, 5, 2)
        cd = math.exp(rng.normal(0.2, 0.5))
        ni = rng.uniform(5, 40)
        zn = math.exp(rng.normal(3.5, 0.6))
        lines.append(f"{x},{y},{cd},{ni},{zn}")
    path = _write(tmp_path, "jura.csv", "\n".join(lines) + "\n")
    return path, schema


class TestSchema:
    def test_parse(self, tmp_path):
        schema = load_schema(_write(tmp_path, "s.schema", SCHEMA_TEXT))
        assert schema.coord_columns == ("x", "y")
        assert schema.type_columns == ("lg-cd", "ni", "lg-zn")
        assert schema.transform_of("lg-cd") == "log10"
        assert schema.transform_of("ni") == "identity"

    def test_rejects_unknown_transform(self):
        with pytest.raises(ConfigError):
            Schema(("x",), ("a",), {"a": "sqrt"})

    def test_rejects_transform_for_unknown_column(self):
        with pytest.raises(ConfigError):
            Schema(("x",), ("a",), {"b": "log10"})


class TestLoadDataset:
    def test_two_rows_single_type(self, tmp_path):
        schema = load_schema(
            _write(tmp_path, "s.schema", "[schema]\ncoords = x\ntypes = a\n")
        )
        path = _write(tmp_path, "d.csv", "x,a\n0.0,1.5\n2.0,2.5\n")
        ds = load_dataset(path, schema)
        assert ds.n_locations == 2
        assert ds.values == {(0, 0): 1.5, (1, 0): 2.5}

    def test_jura_like_shape(self, jura_like):
        path, schema = jura_like
        ds = load_dataset(path, schema)
        assert ds.n_locations == 359
        assert ds.n_types == 3
        assert ds.transforms == ("log10", "identity", "log10")

    def test_missing_cells_stay_unmeasured(self, tmp_path):
        schema = load_schema(
            _write(tmp_path, "s.schema", "[schema]\ncoords = x\ntypes = a, b\n")
        )
        path = _write(tmp_path, "d.csv", "x,a,b\n0.0,1.5,\n1.0,,2.5\n")
        ds = load_dataset(path, schema)
        assert (0, 1) not in ds.values
        assert (1, 0) not in ds.values
        assert ds.values[(1, 1)] == 2.5

    def test_malformed_row_cites_line(self, tmp_path):
        schema = load_schema(
            _write(tmp_path, "s.schema", "[schema]\ncoords = x\ntypes = a\n")
        )
        path = _write(tmp_path, "d.csv", "x,a\n0.0,1.5\noops,2.0\n")
        with pytest.raises(ConfigError, match=":3"):
            load_dataset(path, schema)

    def test_nonpositive_under_log_rejected(self, tmp_path):
        schema = load_schema(
            _write(
                tmp_path, "s.schema",
                "[schema]\ncoords = x\ntypes = a\ntransform.a = log10\n",
            )
        )
        path = _write(tmp_path, "d.csv", "x,a\n0.0,-3.0\n")
        with pytest.raises(DomainError, match=":2"):
            load_dataset(path, schema)

    def test_header_mismatch(self, tmp_path):
        schema = load_schema(
            _write(tmp_path, "s.schema", "[schema]\ncoords = x\ntypes = a\n")
        )
        path = _write(tmp_path, "d.csv", "x,b\n0.0,1.0\n")
        with pytest.raises(ConfigError):
            load_dataset(path, schema)

    def test_round_trip(self, tmp_path, jura_like):
        path, schema = jura_like
        ds = load_dataset(path, schema)
        out = tmp_path / "canon.csv"
        save_dataset(ds, out, coord_names=schema.coord_columns)
        plain = Schema(schema.coord_columns, schema.type_columns, {})
        again = load_dataset(out, plain)
        assert np.array_equal(ds.coords, again.coords)
        assert ds.values == again.values


class TestNormalize:
    def test_zero_mean_unit_std(self, jura_like):
        path, schema = jura_like
        ds = load_dataset(path, schema)
        norm, stats = normalize(ds)
        for ti in range(norm.n_types):
            _, vals = norm.measured(ti)
            assert abs(float(np.mean(vals))) < 1e-12
            assert abs(float(np.std(vals)) - 1.0) < 1e-12

    def test_round_trip_denormalize(self, jura_like):
        path, schema = jura_like
        ds = load_dataset(path, schema)
        norm, stats = normalize(ds)
        for ti in range(ds.n_types):
            _, raw = ds.measured(ti)
            _, scaled = norm.measured(ti)
            np.testing.assert_allclose(denormalize(scaled, stats[ti]), raw, atol=1e-12)

    def test_constant_column_rejected(self):
        ds = Dataset(
            coords=[[0.0], [1.0]], type_names=("a",),
            values={(0, 0): 2.0, (1, 0): 2.0}, transforms=("identity",),
        )
        with pytest.raises(DomainError):
            normalize(ds)


class TestSplit:
    def test_counts_and_disjointness(self, jura_like):
        path, schema = jura_like
        ds, _ = normalize(load_dataset(path, schema))
        split = split_test(ds, SplitSpec(target_types=(0,), test_count=100, seed=4))
        assert len(split.test_tuples) == 100
        target_pool = [t for t in split.pool_tuples if t.type_index == 0]
        assert len(target_pool) == 259
        assert not set(split.test_tuples) & set(split.pool_tuples)
        assert all(t.type_index == 0 for t in split.test_tuples)

    def test_auxiliary_untouched(self, jura_like):
        path, schema = jura_like
        ds, _ = normalize(load_dataset(path, schema))
        split = split_test(ds, SplitSpec(target_types=(0,), test_count=50, seed=1))
        aux = [t for t in split.pool_tuples if t.type_index != 0]
        assert len(aux) == 2 * 359

    def test_seed_determinism(self, jura_like):
        path, schema = jura_like
        ds, _ = normalize(load_dataset(path, schema))
        a = split_test(ds, SplitSpec((0,), 30, seed=9))
        b = split_test(ds, SplitSpec((0,), 30, seed=9))
        assert a.test_tuples == b.test_tuples
        assert np.array_equal(a.pool_values, b.pool_values)

    def test_multi_target_counts(self, jura_like):
        path, schema = jura_like
        ds, _ = normalize(load_dataset(path, schema))
        split = split_test(ds, SplitSpec((0, 2), 40, seed=2))
        assert sum(t.type_index == 0 for t in split.test_tuples) == 40
        assert sum(t.type_index == 2 for t in split.test_tuples) == 40

    def test_guard(self, jura_like):
        path, schema = jura_like
        ds, _ = normalize(load_dataset(path, schema))
        with pytest.raises(ConfigError):
            split_test(ds, SplitSpec((0,), 359, seed=0))


class TestRmse:
    def test_exact_predictions(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_unit_residuals(self):
        assert rmse([1.0, 3.0, 0.0], [0.0, 2.0, 1.0]) == pytest.approx(1.0)

    def test_three_four(self):
        assert rmse([3.0, 0.0], [0.0, 4.0]) == pytest.approx(3.5355339059327378)

    def test_permutation_invariant(self, rng):
        pred = rng.normal(size=10)
        truth = rng.normal(size=10)
        perm = rng.permutation(10)
        assert rmse(pred, truth) == pytest.approx(rmse(pred[perm], truth[perm]))

    def test_length_mismatch(self):
        with pytest.raises(DomainError):
            rmse([1.0], [1.0, 2.0])
