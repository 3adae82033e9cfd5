"""Per-polygon attribute construction from heterogeneous source layers.

Each source layer is aggregated to the polygon scale (category areas and
counts, majority categories, point counts, zonal raster statistics, or
passthrough table columns); every intrinsic attribute is then mirrored by a
neighbor attribute averaged over adjacent polygons, weighted by shared
boundary length.  Ordinal encoding and minmax normalization are fitted on the
training partition only and applied everywhere.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from shapely.strtree import STRtree

from landfuse.geometry import (
    AREA_TOL,
    Polygon,
    contains_points,
    to_shapely,
)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
INTRINSIC = "intrinsic"
NEIGHBOR = "neighbor"

# Categorical code for values never seen while fitting the encoder.
ABSENT = "__absent__"


class SchemaError(ValueError):
    """Column/manifest mismatch or misuse of an encoded table."""


class IngestionError(ValueError):
    """A source layer violates its declared structure."""


# ---------------------------------------------------------------------------
# source layers

@dataclass(frozen=True)
class LayerObject:
    """One polygon-shaped record of a categorical layer."""

    geometry: Polygon
    category: str


@dataclass(frozen=True)
class LayerPoint:
    """One point record of a categorical layer."""

    x: float
    y: float
    category: str


@dataclass(frozen=True)
class RasterGrid:
    """Rectangular georeferenced grid; row 0 is the northernmost row.

    Cell centers: x = xllcorner + (col + .5) * cellsize,
                  y = yllcorner + (nrows - row - .5) * cellsize.
    """

    xllcorner: float
    yllcorner: float
    cellsize: float
    bands: dict[str, np.ndarray]
    nodata: float = -9999.0

    def __post_init__(self) -> None:
        shapes = {b.shape for b in self.bands.values()}
        if len(shapes) != 1:
            raise IngestionError("raster bands differ in shape")
        if self.cellsize <= 0:
            raise IngestionError("raster cellsize must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return next(iter(self.bands.values())).shape

    def cell_centers(self, rows: np.ndarray, cols: np.ndarray):
        nrows = self.shape[0]
        x = self.xllcorner + (cols + 0.5) * self.cellsize
        y = self.yllcorner + (nrows - rows - 0.5) * self.cellsize
        return x, y


@dataclass(frozen=True)
class SourceLayer:
    """A named source: polygon/point records with categories, a raster grid,
    or precomputed per-polygon table columns."""

    name: str
    kind: str  # polygon-categorical | point-categorical | raster-grid | table
    categories: tuple[str, ...] = ()
    objects: tuple[LayerObject, ...] = ()
    points: tuple[LayerPoint, ...] = ()
    grid: RasterGrid | None = None
    table: dict[str, dict[str, str]] = field(default_factory=dict)  # id -> col -> raw

    def __post_init__(self) -> None:
        kinds = {"polygon-categorical", "point-categorical", "raster-grid", "table"}
        if self.kind not in kinds:
            raise IngestionError(f"layer {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "polygon-categorical":
            bad = sorted({o.category for o in self.objects} - set(self.categories))
            if bad:
                raise IngestionError(
                    f"layer {self.name!r}: category code(s) {bad} outside the "
                    f"declared set")
        if self.kind == "point-categorical":
            bad = sorted({p.category for p in self.points} - set(self.categories))
            if bad:
                raise IngestionError(
                    f"layer {self.name!r}: category code(s) {bad} outside the "
                    f"declared set")
        if self.kind == "raster-grid" and self.grid is None:
            raise IngestionError(f"layer {self.name!r}: missing grid payload")


# ---------------------------------------------------------------------------
# attribute table

@dataclass(frozen=True)
class ColumnMeta:
    name: str
    source: str
    kind: str   # numeric | categorical
    scope: str  # intrinsic | neighbor


class AttributeTable:
    """Rows keyed by polygon id; columns tagged with (source, kind, scope).

    Numeric columns are float arrays with NaN for missing values; categorical
    columns are object arrays of category codes with None for missing.
    """

    def __init__(self, ids: list[str]):
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate polygon ids")
        self.ids: list[str] = list(ids)
        self._row = {pid: i for i, pid in enumerate(self.ids)}
        self.columns: list[ColumnMeta] = []
        self._by_name: dict[str, ColumnMeta] = {}
        self.data: dict[str, np.ndarray] = {}
        self.encoded = False

    def __len__(self) -> int:
        return len(self.ids)

    def row_of(self, pid: str) -> int:
        return self._row[pid]

    def add_column(self, meta: ColumnMeta, values: np.ndarray) -> None:
        if meta.name in self._by_name:
            raise SchemaError(f"column {meta.name!r} already exists")
        values = np.asarray(values)
        if values.shape != (len(self.ids),):
            raise SchemaError(f"column {meta.name!r} has wrong length")
        if meta.kind == NUMERIC:
            values = values.astype(float)
        else:
            values = values.astype(object)
        self.columns.append(meta)
        self._by_name[meta.name] = meta
        self.data[meta.name] = values

    def meta(self, name: str) -> ColumnMeta:
        return self._by_name[name]

    def manifest(self) -> dict[str, list[str]]:
        """source -> column names, preserving column order.  The sources
        partition the columns by construction."""
        out: dict[str, list[str]] = {}
        for meta in self.columns:
            out.setdefault(meta.source, []).append(meta.name)
        return out

    @property
    def sources(self) -> tuple[str, ...]:
        return tuple(self.manifest().keys())

    def column_names(self, sources=None, scope=None) -> list[str]:
        out = []
        for meta in self.columns:
            if sources is not None and meta.source not in sources:
                continue
            if scope is not None and meta.scope != scope:
                continue
            out.append(meta.name)
        return out

    def is_missing(self, name: str) -> np.ndarray:
        values = self.data[name]
        if self.meta(name).kind == NUMERIC:
            return np.isnan(values.astype(float))
        return np.array([v is None for v in values], dtype=bool)

    def matrix(self, names: list[str]) -> np.ndarray:
        """Float matrix of the given (encoded) columns."""
        if not self.encoded:
            raise SchemaError("matrix() requires an encoded table")
        return np.column_stack([self.data[n].astype(float) for n in names])

    def categorical_mask(self, names: list[str]) -> np.ndarray:
        return np.array([self.meta(n).kind == CATEGORICAL for n in names])


# ---------------------------------------------------------------------------
# aggregation

def aggregate_layer(polygons: list[Polygon], layer: SourceLayer,
                    ) -> tuple[list[ColumnMeta], dict[str, np.ndarray]]:
    """Polygon-scale attributes from a categorical layer.

    Polygon layers yield, per category, the intersected area and the count of
    intersecting objects, plus one majority-category column; an object
    straddling several polygons contributes its locally intersected area to
    each of them.  Point layers yield per-category point counts.
    """
    if layer.kind == "polygon-categorical":
        return _aggregate_polygon_layer(polygons, layer)
    if layer.kind == "point-categorical":
        return _aggregate_point_layer(polygons, layer)
    raise IngestionError(
        f"layer {layer.name!r}: aggregate_layer cannot handle kind {layer.kind!r}")


def _aggregate_polygon_layer(polygons, layer):
    n = len(polygons)
    cats = list(layer.categories)
    cat_index = {c: k for k, c in enumerate(cats)}
    areas = np.zeros((n, len(cats)))
    counts = np.zeros((n, len(cats)))
    if layer.objects:
        shapes = [to_shapely(o.geometry) for o in layer.objects]
        tree = STRtree(shapes)
        for i, p in enumerate(polygons):
            ps = to_shapely(p)
            for j in tree.query(ps, predicate="intersects").tolist():
                inter = ps.intersection(shapes[j]).area
                if inter > AREA_TOL:
                    k = cat_index[layer.objects[j].category]
                    areas[i, k] += inter
                    counts[i, k] += 1
    metas: list[ColumnMeta] = []
    data: dict[str, np.ndarray] = {}
    for k, c in enumerate(cats):
        for suffix, values in (("area", areas[:, k]), ("count", counts[:, k])):
            name = f"{layer.name}__{c}_{suffix}"
            metas.append(ColumnMeta(name, layer.name, NUMERIC, INTRINSIC))
            data[name] = values
    majority = np.empty(n, dtype=object)
    for i in range(n):
        if areas[i].sum() > 0.0:
            top = areas[i].max()
            # ties resolved toward the lexicographically smallest category
            majority[i] = sorted(c for c in cats if areas[i, cat_index[c]] == top)[0]
        else:
            majority[i] = None
    name = f"{layer.name}__majority"
    metas.append(ColumnMeta(name, layer.name, CATEGORICAL, INTRINSIC))
    data[name] = majority
    return metas, data


def _aggregate_point_layer(polygons, layer):
    n = len(polygons)
    cats = list(layer.categories)
    counts = np.zeros((n, len(cats)))
    if layer.points:
        pts = np.array([[p.x, p.y] for p in layer.points])
        pt_cats = np.array([cat_index for p in layer.points
                            for cat_index in [cats.index(p.category)]])
        for i, poly in enumerate(polygons):
            # bounding-box prefilter keeps the exact test cheap
            ext = poly.exterior
            box = ((pts[:, 0] >= ext[:, 0].min()) & (pts[:, 0] <= ext[:, 0].max())
                   & (pts[:, 1] >= ext[:, 1].min()) & (pts[:, 1] <= ext[:, 1].max()))
            if not box.any():
                continue
            hit = contains_points(poly, pts[box])
            for k in pt_cats[box][hit]:
                counts[i, k] += 1
    metas: list[ColumnMeta] = []
    data: dict[str, np.ndarray] = {}
    for k, c in enumerate(cats):
        name = f"{layer.name}__{c}_count"
        metas.append(ColumnMeta(name, layer.name, NUMERIC, INTRINSIC))
        data[name] = counts[:, k]
    return metas, data


def zonal_stats(polygons: list[Polygon], layer: SourceLayer,
                ) -> tuple[list[ColumnMeta], dict[str, np.ndarray]]:
    """Mean and population standard deviation of each band over the cells
    whose centers fall inside the polygon (cell-center rule, no partial-cell
    weighting).  Polygons covering no cell center get missing values."""
    if layer.kind != "raster-grid" or layer.grid is None:
        raise IngestionError(f"layer {layer.name!r} is not a raster grid")
    grid = layer.grid
    nrows, ncols = grid.shape
    x0 = grid.xllcorner
    y0 = grid.yllcorner
    cs = grid.cellsize
    band_names = list(grid.bands.keys())
    n = len(polygons)
    means = {b: np.full(n, np.nan) for b in band_names}
    stds = {b: np.full(n, np.nan) for b in band_names}
    for i, poly in enumerate(polygons):
        ext = poly.exterior
        col_lo = max(0, int(math.floor((ext[:, 0].min() - x0) / cs - 0.5)))
        col_hi = min(ncols - 1, int(math.ceil((ext[:, 0].max() - x0) / cs)))
        row_top = (y0 + nrows * cs - ext[:, 1].max()) / cs - 0.5
        row_bot = (y0 + nrows * cs - ext[:, 1].min()) / cs
        r_lo = max(0, int(math.floor(row_top)))
        r_hi = min(nrows - 1, int(math.ceil(row_bot)))
        if col_lo > col_hi or r_lo > r_hi:
            warnings.warn(
                f"polygon {poly.id!r} lies outside raster {layer.name!r}",
                stacklevel=2)
            continue
        rr, cc = np.meshgrid(np.arange(r_lo, r_hi + 1),
                             np.arange(col_lo, col_hi + 1), indexing="ij")
        rr = rr.ravel()
        cc = cc.ravel()
        cx, cy = grid.cell_centers(rr, cc)
        inside = contains_points(poly, np.column_stack([cx, cy]))
        if not inside.any():
            warnings.warn(
                f"polygon {poly.id!r} covers no cell center of {layer.name!r}",
                stacklevel=2)
            continue
        rr = rr[inside]
        cc = cc[inside]
        for b in band_names:
            values = grid.bands[b][rr, cc]
            values = values[values != grid.nodata]
            if len(values) == 0:
                continue
            means[b][i] = float(np.mean(values))
            stds[b][i] = float(np.std(values))
    metas: list[ColumnMeta] = []
    data: dict[str, np.ndarray] = {}
    for b in band_names:
        for suffix, store in (("mean", means), ("std", stds)):
            name = f"{layer.name}__{b}_{suffix}"
            metas.append(ColumnMeta(name, layer.name, NUMERIC, INTRINSIC))
            data[name] = store[b]
    return metas, data


def table_columns(polygons: list[Polygon], layer: SourceLayer,
                  column_sources: dict[str, str],
                  ) -> tuple[list[ColumnMeta], dict[str, np.ndarray]]:
    """Pass-through columns from a precomputed per-polygon table.

    column_sources maps each raw column to the source it belongs to.  A column
    whose non-missing values all parse as floats is numeric, otherwise it is
    categorical.
    """
    if layer.kind != "table":
        raise IngestionError(f"layer {layer.name!r} is not a table")
    raw_cols: list[str] = []
    for row in layer.table.values():
        for c in row:
            if c not in raw_cols:
                raw_cols.append(c)
    metas: list[ColumnMeta] = []
    data: dict[str, np.ndarray] = {}
    for col in raw_cols:
        if col not in column_sources:
            raise IngestionError(
                f"table layer {layer.name!r}: column {col!r} missing from the "
                f"source manifest")
        raw = [layer.table.get(p.id, {}).get(col, "") for p in polygons]
        numeric = True
        for v in raw:
            if v == "":
                continue
            try:
                float(v)
            except ValueError:
                numeric = False
                break
        name = f"{column_sources[col]}__{col}"
        if numeric:
            values = np.array([float(v) if v != "" else np.nan for v in raw])
            metas.append(ColumnMeta(name, column_sources[col], NUMERIC, INTRINSIC))
        else:
            values = np.array([v if v != "" else None for v in raw], dtype=object)
            metas.append(ColumnMeta(name, column_sources[col], CATEGORICAL, INTRINSIC))
        data[name] = values
    return metas, data


# ---------------------------------------------------------------------------
# neighbor attributes

def neighbor_attributes(table: AttributeTable,
                        weights: dict[str, list[tuple[str, float]]],
                        ) -> tuple[list[ColumnMeta], dict[str, np.ndarray]]:
    """One neighbor column per intrinsic column: the shared-boundary-weighted
    mean (numeric) or weighted majority (categorical) over adjacent polygons.

    Neighbors with a missing value drop out of the aggregate; polygons with no
    neighbors (or only missing ones) get a missing value.
    """
    if table.encoded:
        raise SchemaError("neighbor attributes must come from raw values")
    metas: list[ColumnMeta] = []
    data: dict[str, np.ndarray] = {}
    neighbor_rows = [
        [(table.row_of(nid), w) for nid, w in weights.get(pid, [])]
        for pid in table.ids
    ]
    for meta in [m for m in table.columns if m.scope == INTRINSIC]:
        values = table.data[meta.name]
        name = f"{meta.name}__nbr"
        if meta.kind == NUMERIC:
            out = np.full(len(table), np.nan)
            for i, neigh in enumerate(neighbor_rows):
                num = 0.0
                den = 0.0
                for j, w in neigh:
                    v = values[j]
                    if not np.isnan(v):
                        num += w * v
                        den += w
                if den > 0.0:
                    out[i] = num / den
        else:
            out = np.empty(len(table), dtype=object)
            for i, neigh in enumerate(neighbor_rows):
                tally: dict[str, float] = {}
                for j, w in neigh:
                    v = values[j]
                    if v is not None:
                        tally[v] = tally.get(v, 0.0) + w
                if tally:
                    top = max(tally.values())
                    # ties go to the lexicographically smallest category
                    out[i] = sorted(c for c, w in tally.items() if w == top)[0]
                else:
                    out[i] = None
        metas.append(ColumnMeta(name, meta.source, meta.kind, NEIGHBOR))
        data[name] = out
    return metas, data


# ---------------------------------------------------------------------------
# encoding

@dataclass
class EncoderState:
    """Ordinal code maps and minmax ranges fitted on the training rows.

    Unseen categories map to the reserved code one past the largest training
    code; after normalization, missing numerics become 0 and missing
    categoricals become the dedicated absent category.
    """

    categorical_maps: dict[str, dict[str, int]]
    numeric_ranges: dict[str, tuple[float, float]]

    def unseen_code(self, column: str) -> int:
        return len(self.categorical_maps[column])

    def decode_numeric(self, column: str, values: np.ndarray) -> np.ndarray:
        lo, hi = self.numeric_ranges[column]
        return np.asarray(values, dtype=float) * (hi - lo) + lo


def fit_encoder(table: AttributeTable, train_ids: set[str]) -> EncoderState:
    """Category maps (order of first appearance in the training rows) and
    per-column (min, max) from the training partition only.

    A constant numeric column gets max = min + 1 so the transform stays
    defined.
    """
    if table.encoded:
        raise SchemaError("table is already encoded")
    missing_ids = set(train_ids) - set(table.ids)
    if missing_ids:
        raise SchemaError(f"train ids not in table: {sorted(missing_ids)[:5]}")
    rows = [i for i, pid in enumerate(table.ids) if pid in train_ids]
    cat_maps: dict[str, dict[str, int]] = {}
    ranges: dict[str, tuple[float, float]] = {}
    for meta in table.columns:
        values = table.data[meta.name]
        if meta.kind == CATEGORICAL:
            codes: dict[str, int] = {}
            for i in rows:
                v = values[i] if values[i] is not None else ABSENT
                if v not in codes:
                    codes[v] = len(codes)
            cat_maps[meta.name] = codes
        else:
            train_vals = values[rows]
            train_vals = train_vals[~np.isnan(train_vals.astype(float))]
            if len(train_vals) == 0:
                lo, hi = 0.0, 1.0
            else:
                lo = float(train_vals.min())
                hi = float(train_vals.max())
                if hi == lo:
                    hi = lo + 1.0
            ranges[meta.name] = (lo, hi)
    return EncoderState(cat_maps, ranges)


def apply_encoder(table: AttributeTable, state: EncoderState) -> AttributeTable:
    """Deterministic encoding pass: ordinal codes for categoricals (still
    flagged categorical), minmax for numerics, missing values imputed.

    Raises if the table was already encoded or its columns don't match the
    fitted state.
    """
    if table.encoded:
        raise SchemaError("table is already encoded")
    names = {m.name for m in table.columns}
    fitted = set(state.categorical_maps) | set(state.numeric_ranges)
    if names != fitted:
        raise SchemaError(
            f"encoder/table column mismatch: {sorted(names ^ fitted)[:5]}")
    out = AttributeTable(table.ids)
    for meta in table.columns:
        values = table.data[meta.name]
        if meta.kind == CATEGORICAL:
            codes = state.categorical_maps[meta.name]
            unseen = float(len(codes))
            encoded = np.empty(len(table), dtype=float)
            for i, v in enumerate(values):
                key = v if v is not None else ABSENT
                encoded[i] = float(codes.get(key, unseen))
        else:
            lo, hi = state.numeric_ranges[meta.name]
            encoded = (values.astype(float) - lo) / (hi - lo)
            encoded[np.isnan(encoded)] = 0.0
        out.add_column(meta, encoded)
    out.encoded = True
    return out
