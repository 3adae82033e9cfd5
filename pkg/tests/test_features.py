"""Attribute construction: aggregation, zonal statistics, neighbor means,
encoding."""

import numpy as np
import pytest

from landfuse.features import (
    ABSENT,
    AttributeTable,
    ColumnMeta,
    EncoderState,
    IngestionError,
    LayerObject,
    LayerPoint,
    RasterGrid,
    SchemaError,
    SourceLayer,
    aggregate_layer,
    apply_encoder,
    fit_encoder,
    neighbor_attributes,
    table_columns,
    zonal_stats,
)
from landfuse.geometry import Polygon, adjacency_weights, contains_point


def square(pid, x, y, size=1.0, label=None):
    return Polygon(pid, [(x, y), (x + size, y), (x + size, y + size), (x, y + size)],
                   label=label)


class TestAggregatePolygonLayer:
    def test_building_inside(self):
        p = square("P", 0, 0, 4)
        building = Polygon("b1", [(1, 1), (3, 1), (3, 2), (1, 2)])  # area 2
        layer = SourceLayer("bld", "polygon-categorical",
                            categories=("residential", "industrial"),
                            objects=(LayerObject(building, "residential"),))
        metas, data = aggregate_layer([p], layer)
        assert data["bld__residential_area"][0] == pytest.approx(2.0)
        assert data["bld__residential_count"][0] == 1
        assert data["bld__industrial_area"][0] == 0.0
        assert data["bld__majority"][0] == "residential"

    def test_straddling_object_counted_per_polygon(self):
        p = square("P", 0, 0, 2)
        q = square("Q", 2, 0, 2)
        # 1x2 object: 1.2 in P, 0.8 in Q
        obj = Polygon("b", [(0.8, 0), (2.8, 0), (2.8, 1), (0.8, 1)])
        layer = SourceLayer("bld", "polygon-categorical", categories=("c",),
                            objects=(LayerObject(obj, "c"),))
        _, data = aggregate_layer([p, q], layer)
        assert data["bld__c_area"][0] == pytest.approx(1.2)
        assert data["bld__c_area"][1] == pytest.approx(0.8)
        assert list(data["bld__c_count"]) == [1, 1]

    def test_majority_by_area(self):
        p = square("P", 0, 0, 1)
        a = Polygon("a", [(0, 0), (0.6, 0), (0.6, 1), (0, 1)])      # 60 %
        b = Polygon("b", [(0.6, 0), (1, 0), (1, 1), (0.6, 1)])      # 40 %
        layer = SourceLayer("lc", "polygon-categorical", categories=("A", "B"),
                            objects=(LayerObject(a, "A"), LayerObject(b, "B")))
        _, data = aggregate_layer([p], layer)
        assert data["lc__majority"][0] == "A"

    def test_no_intersection_gives_missing_majority(self):
        p = square("P", 10, 10)
        layer = SourceLayer("lc", "polygon-categorical", categories=("A",),
                            objects=(LayerObject(square("o", 0, 0), "A"),))
        _, data = aggregate_layer([p], layer)
        assert data["lc__majority"][0] is None
        assert data["lc__A_area"][0] == 0.0

    def test_undeclared_category_rejected(self):
        with pytest.raises(IngestionError, match="xyz"):
            SourceLayer("lc", "polygon-categorical", categories=("A",),
                        objects=(LayerObject(square("o", 0, 0), "xyz"),))


class TestAggregatePointLayer:
    def test_point_counts(self):
        p = square("P", 0, 0, 2)
        q = square("Q", 2, 0, 2)
        pts = (LayerPoint(0.5, 0.5, "shop"), LayerPoint(1.5, 1.5, "shop"),
               LayerPoint(2.5, 0.5, "office"), LayerPoint(9, 9, "shop"))
        layer = SourceLayer("poi", "point-categorical",
                            categories=("shop", "office"), points=pts)
        _, data = aggregate_layer([p, q], layer)
        assert data["poi__shop_count"][0] == 2
        assert data["poi__office_count"][1] == 1
        assert data["poi__shop_count"][1] == 0


class TestZonalStats:
    @staticmethod
    def grid_layer(bands, xll=0.0, yll=0.0, cellsize=1.0, nodata=-9999.0):
        return SourceLayer("img", "raster-grid",
                           grid=RasterGrid(xll, yll, cellsize,
                                           bands=bands, nodata=nodata))

    def test_constant_band(self):
        band = np.full((4, 4), 7.0)
        _, data = zonal_stats([square("P", 0.2, 0.2, 3.5)],
                              self.grid_layer({"b": band}))
        assert data["img__b_mean"][0] == pytest.approx(7.0)
        assert data["img__b_std"][0] == pytest.approx(0.0)

    def test_two_cells(self):
        band = np.array([[1.0, 3.0]])  # centers (0.5, 0.5) and (1.5, 0.5)
        _, data = zonal_stats([square("P", 0, 0, 2)], self.grid_layer({"b": band}))
        assert data["img__b_mean"][0] == pytest.approx(2.0)
        assert data["img__b_std"][0] == pytest.approx(1.0)  # population std

    def test_outside_extent_missing_with_warning(self):
        band = np.ones((2, 2))
        with pytest.warns(UserWarning, match="outside"):
            _, data = zonal_stats([square("P", 50, 50)],
                                  self.grid_layer({"b": band}))
        assert np.isnan(data["img__b_mean"][0])

    def test_matches_bruteforce_oracle(self):
        rng = np.random.default_rng(99)
        band = rng.normal(0, 5, (16, 16))
        layer = self.grid_layer({"b": band}, xll=-3.0, yll=-2.0, cellsize=0.7)
        grid = layer.grid
        for _ in range(20):
            cx, cy = rng.uniform(-3, 8, 2)
            angles = 2 * np.pi * np.cumsum(rng.uniform(0.5, 1, 7)) / 7
            radii = rng.uniform(1, 4, 7)
            poly = Polygon("r", np.column_stack(
                [cx + radii * np.cos(angles), cy + radii * np.sin(angles)]))
            _, data = zonal_stats([poly], layer)
            # oracle: visit every cell center with the scalar point test
            values = []
            for r in range(16):
                for c in range(16):
                    x = grid.xllcorner + (c + 0.5) * grid.cellsize
                    y = grid.yllcorner + (16 - r - 0.5) * grid.cellsize
                    if contains_point(poly, (x, y)):
                        values.append(band[r, c])
            if values:
                assert data["img__b_mean"][0] == pytest.approx(np.mean(values))
                assert data["img__b_std"][0] == pytest.approx(np.std(values))
            else:
                assert np.isnan(data["img__b_mean"][0])

    def test_nodata_excluded(self):
        band = np.array([[1.0, -9999.0]])
        _, data = zonal_stats([square("P", 0, 0, 2)], self.grid_layer({"b": band}))
        assert data["img__b_mean"][0] == pytest.approx(1.0)


class TestNeighborAttributes:
    @staticmethod
    def three_strip():
        polys = [square(f"s{i}", float(i), 0.0) for i in range(3)]
        return polys, adjacency_weights(polys)

    @staticmethod
    def table_for(polys, name, kind, values):
        table = AttributeTable([p.id for p in polys])
        table.add_column(ColumnMeta(name, "src", kind, "intrinsic"),
                         np.array(values, dtype=object if kind == "categorical"
                                  else float))
        return table

    def test_weighted_mean(self):
        # weights 3 and 1 on values 10 and 20 -> 12.5
        a = square("a", 0, 0, 3)
        b = Polygon("b", [(0, 3), (3, 3), (3, 6), (0, 6)])       # shares len 3
        c = Polygon("c", [(3, 0), (4, 0), (4, 1), (3, 1)])       # shares len 1
        weights = adjacency_weights([a, b, c])
        table = self.table_for([a, b, c], "v", "numeric", [0.0, 10.0, 20.0])
        _, data = neighbor_attributes(table, weights)
        assert data["v__nbr"][0] == pytest.approx(12.5)

    def test_categorical_majority_by_weight(self):
        a = square("a", 0, 0, 3)
        b = Polygon("b", [(0, 3), (3, 3), (3, 6), (0, 6)])
        c = Polygon("c", [(3, 0), (4, 0), (4, 1), (3, 1)])
        weights = adjacency_weights([a, b, c])
        table = self.table_for([a, b, c], "v", "categorical", ["X", "A", "B"])
        _, data = neighbor_attributes(table, weights)
        assert data["v__nbr"][0] == "A"

    def test_isolated_polygon_missing(self):
        polys = [square("a", 0, 0), square("b", 10, 10)]
        weights = adjacency_weights(polys)
        table = self.table_for(polys, "v", "numeric", [1.0, 2.0])
        _, data = neighbor_attributes(table, weights)
        assert np.isnan(data["v__nbr"][0]) and np.isnan(data["v__nbr"][1])

    def test_constant_column_stays_constant(self):
        polys, weights = self.three_strip()
        table = self.table_for(polys, "v", "numeric", [5.0, 5.0, 5.0])
        _, data = neighbor_attributes(table, weights)
        assert np.allclose(data["v__nbr"], 5.0)

    def test_column_doubling_and_tagging(self):
        polys, weights = self.three_strip()
        table = self.table_for(polys, "v", "numeric", [1.0, 2.0, 3.0])
        metas, data = neighbor_attributes(table, weights)
        assert len(metas) == len([m for m in table.columns
                                  if m.scope == "intrinsic"])
        assert all(m.scope == "neighbor" for m in metas)
        assert all(m.source == "src" for m in metas)


class TestEncoder:
    @staticmethod
    def simple_table(train_vals, test_vals, kind="numeric"):
        ids = [f"p{i}" for i in range(len(train_vals) + len(test_vals))]
        table = AttributeTable(ids)
        dtype = object if kind == "categorical" else float
        table.add_column(ColumnMeta("v", "s", kind, "intrinsic"),
                         np.array(list(train_vals) + list(test_vals), dtype=dtype))
        train_ids = set(ids[:len(train_vals)])
        return table, train_ids

    def test_minmax_and_out_of_range_test_value(self):
        table, train = self.simple_table([2.0, 4.0], [6.0])
        state = fit_encoder(table, train)
        encoded = apply_encoder(table, state)
        assert list(encoded.data["v"]) == [0.0, 1.0, 2.0]

    def test_unseen_category_reserved_code(self):
        table, train = self.simple_table(["A", "B"], ["C"], kind="categorical")
        state = fit_encoder(table, train)
        encoded = apply_encoder(table, state)
        assert list(encoded.data["v"]) == [0.0, 1.0, 2.0]
        assert state.unseen_code("v") == 2

    def test_constant_column_encodes_to_zero(self):
        table, train = self.simple_table([5.0, 5.0], [5.0])
        state = fit_encoder(table, train)
        assert state.numeric_ranges["v"] == (5.0, 6.0)
        encoded = apply_encoder(table, state)
        assert list(encoded.data["v"]) == [0.0, 0.0, 0.0]

    def test_missing_numeric_becomes_zero_after_normalization(self):
        table, train = self.simple_table([2.0, 4.0], [np.nan])
        encoded = apply_encoder(table, fit_encoder(table, train))
        assert encoded.data["v"][2] == 0.0

    def test_missing_categorical_gets_absent_category(self):
        table, train = self.simple_table(["A", None], ["B", None],
                                         kind="categorical")
        state = fit_encoder(table, train)
        assert ABSENT in state.categorical_maps["v"]
        encoded = apply_encoder(table, state)
        assert encoded.data["v"][1] == encoded.data["v"][3] == 1.0

    def test_double_encoding_rejected(self):
        table, train = self.simple_table([1.0], [2.0])
        state = fit_encoder(table, train)
        encoded = apply_encoder(table, state)
        with pytest.raises(SchemaError, match="already encoded"):
            apply_encoder(encoded, state)

    def test_column_mismatch_rejected(self):
        table, train = self.simple_table([1.0], [2.0])
        state = EncoderState({}, {"other": (0.0, 1.0)})
        with pytest.raises(SchemaError):
            apply_encoder(table, state)

    def test_roundtrip_training_values(self):
        rng = np.random.default_rng(4)
        values = rng.normal(0, 100, 50)
        ids = [f"p{i}" for i in range(50)]
        table = AttributeTable(ids)
        table.add_column(ColumnMeta("v", "s", "numeric", "intrinsic"), values)
        state = fit_encoder(table, set(ids[:40]))
        encoded = apply_encoder(table, state)
        back = state.decode_numeric("v", encoded.data["v"][:40])
        assert np.allclose(back, values[:40], rtol=1e-9)

    def test_categorical_kind_preserved_for_matrix_mask(self):
        table, train = self.simple_table(["A", "B"], ["A"], kind="categorical")
        encoded = apply_encoder(table, fit_encoder(table, train))
        assert encoded.categorical_mask(["v"])[0]
        assert encoded.matrix(["v"]).dtype == float


class TestManifest:
    def test_partition(self):
        table = AttributeTable(["p0"])
        table.add_column(ColumnMeta("a", "s1", "numeric", "intrinsic"), [1.0])
        table.add_column(ColumnMeta("b", "s2", "numeric", "intrinsic"), [1.0])
        table.add_column(ColumnMeta("c", "s1", "numeric", "neighbor"), [1.0])
        manifest = table.manifest()
        assert manifest == {"s1": ["a", "c"], "s2": ["b"]}
        assert sum(len(v) for v in manifest.values()) == len(table.columns)

    def test_duplicate_column_rejected(self):
        table = AttributeTable(["p0"])
        table.add_column(ColumnMeta("a", "s1", "numeric", "intrinsic"), [1.0])
        with pytest.raises(SchemaError):
            table.add_column(ColumnMeta("a", "s2", "numeric", "intrinsic"), [2.0])


class TestTableColumns:
    def test_kind_inference_and_prefixing(self):
        polys = [square("p0", 0, 0), square("p1", 1, 0)]
        layer = SourceLayer("census", "table", table={
            "p0": {"pop": "120", "iris": "housing"},
            "p1": {"pop": "80", "iris": "business"},
        })
        metas, data = table_columns(polys, layer, {"pop": "demo", "iris": "demo"})
        kinds = {m.name: m.kind for m in metas}
        assert kinds["demo__pop"] == "numeric"
        assert kinds["demo__iris"] == "categorical"
        assert data["demo__pop"][1] == 80.0

    def test_missing_rows_become_missing_values(self):
        polys = [square("p0", 0, 0), square("p1", 1, 0)]
        layer = SourceLayer("census", "table", table={"p0": {"pop": "120"}})
        _, data = table_columns(polys, layer, {"pop": "demo"})
        assert np.isnan(data["demo__pop"][1])

    def test_unmapped_column_rejected(self):
        polys = [square("p0", 0, 0)]
        layer = SourceLayer("census", "table", table={"p0": {"pop": "120"}})
        with pytest.raises(IngestionError, match="pop"):
            table_columns(polys, layer, {})
