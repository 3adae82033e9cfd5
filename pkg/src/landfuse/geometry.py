"""Planar polygon kernel: areas, hulls, oriented boxes, adjacency, shape descriptors.

Coordinates are planar meters.  Every function here is a pure function of
immutable inputs, so all of them are safe to call concurrently across
polygons.  Boolean overlay operations (intersection area, shared boundary
length) are delegated to GEOS via shapely; everything else is plain numpy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import shapely.geometry as sgeom
from shapely.strtree import STRtree
from shapely.validation import explain_validity

# Geometric tolerances, overridable per call. Areas below AREA_TOL count as
# zero; lengths below LENGTH_TOL count as zero (also used for snapping and
# boundary tests).
AREA_TOL = 1e-9
LENGTH_TOL = 1e-6


class GeometryError(ValueError):
    """Degenerate or invalid polygon input."""


# ---------------------------------------------------------------------------
# rings

def ring_signed_area(ring: np.ndarray) -> float:
    """Shoelace signed area of an open ring (last vertex not repeated).

    Positive for counter-clockwise orientation.
    """
    x = ring[:, 0]
    y = ring[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def ring_length(ring: np.ndarray) -> float:
    """Perimeter of an open ring."""
    closed = np.vstack([ring, ring[:1]])
    return float(np.sum(np.hypot(*np.diff(closed, axis=0).T)))


def _normalize_ring(ring, what: str, length_tol: float, area_tol: float) -> np.ndarray:
    pts = np.asarray(ring, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise GeometryError(f"{what} ring must be an (n, 2) coordinate array")
    if not np.all(np.isfinite(pts)):
        raise GeometryError(f"{what} ring contains non-finite coordinates")
    # Rings may arrive closed (first == last); store them open.
    if len(pts) >= 2 and np.hypot(*(pts[0] - pts[-1])) <= length_tol:
        pts = pts[:-1]
    if len(pts) >= 2:
        keep = np.hypot(*np.diff(pts, axis=0).T) > length_tol
        pts = pts[np.concatenate([[True], keep])]
    if len(pts) < 3:
        raise GeometryError(f"{what} ring has fewer than 3 distinct vertices")
    if abs(ring_signed_area(pts)) <= area_tol:
        raise GeometryError(f"{what} ring has zero area")
    return pts


@dataclass(frozen=True, eq=False)
class Polygon:
    """A planar polygon with optional holes and an optional class label.

    Rings are normalized on construction: the closing duplicate vertex is
    stripped, consecutive duplicates are snapped away, the exterior is stored
    counter-clockwise and holes clockwise.  Self-intersecting input is
    rejected, never repaired.
    """

    id: str
    exterior: np.ndarray
    interiors: tuple[np.ndarray, ...] = ()
    label: str | None = None

    def __post_init__(self) -> None:
        ext = _normalize_ring(self.exterior, f"polygon {self.id!r} exterior",
                              LENGTH_TOL, AREA_TOL)
        if ring_signed_area(ext) < 0:
            ext = ext[::-1].copy()
        holes = []
        for k, hole in enumerate(self.interiors):
            h = _normalize_ring(hole, f"polygon {self.id!r} hole {k}",
                                LENGTH_TOL, AREA_TOL)
            if ring_signed_area(h) > 0:
                h = h[::-1].copy()
            holes.append(h)
        ext.setflags(write=False)
        for h in holes:
            h.setflags(write=False)
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "interiors", tuple(holes))
        shape = sgeom.Polygon(ext, holes)
        if not shape.is_valid:
            raise GeometryError(
                f"polygon {self.id!r} rejected: {explain_validity(shape)}")

    def __repr__(self) -> str:  # keep ndarray noise out of error messages
        return (f"Polygon(id={self.id!r}, vertices={len(self.exterior)}, "
                f"holes={len(self.interiors)}, label={self.label!r})")


def to_shapely(p: Polygon) -> sgeom.Polygon:
    return sgeom.Polygon(p.exterior, [h for h in p.interiors])


def polygon_area(p: Polygon) -> float:
    """Exterior ring area minus hole areas."""
    area = abs(ring_signed_area(p.exterior))
    for h in p.interiors:
        area -= abs(ring_signed_area(h))
    return area


def polygon_perimeter(p: Polygon) -> float:
    """Length of the exterior ring. Hole boundaries are not included."""
    return ring_length(p.exterior)


def centroid(p: Polygon) -> tuple[float, float]:
    """Area centroid of the polygon region, holes subtracted."""
    area2 = 0.0
    mx = 0.0
    my = 0.0
    # Exterior is CCW (positive cross terms), holes CW (negative), so one
    # accumulation handles the subtraction.
    for ring in (p.exterior, *p.interiors):
        closed = np.vstack([ring, ring[:1]])
        x0, y0 = closed[:-1, 0], closed[:-1, 1]
        x1, y1 = closed[1:, 0], closed[1:, 1]
        cross = x0 * y1 - x1 * y0
        area2 += float(np.sum(cross))
        mx += float(np.sum((x0 + x1) * cross))
        my += float(np.sum((y0 + y1) * cross))
    if abs(area2) <= 2.0 * AREA_TOL:
        raise GeometryError(f"polygon {p.id!r} has zero net area")
    return mx / (3.0 * area2), my / (3.0 * area2)


# ---------------------------------------------------------------------------
# convex hull and oriented bounding box

def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull (Andrew's monotone chain), counter-clockwise, no collinear
    points kept."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 3:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def half(seq):
        chain: list[np.ndarray] = []
        for q in seq:
            while len(chain) >= 2:
                o, a = chain[-2], chain[-1]
                if (a[0] - o[0]) * (q[1] - o[1]) - (a[1] - o[1]) * (q[0] - o[0]) <= 0:
                    chain.pop()
                else:
                    break
            chain.append(q)
        return chain

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def min_area_obb(points: np.ndarray) -> tuple[float, float]:
    """(length, width) of the minimum-area oriented bounding box.

    Rotating calipers over the convex hull's edge directions.  Exact area ties
    between different box orientations do occur; they are broken by the larger
    aspect ratio (a rotation-invariant key, so elongation stays invariant
    under rigid motions) and then by the smaller edge angle.
    """
    hull = convex_hull(points)
    if len(hull) < 3:
        raise GeometryError("oriented bounding box needs a 2-dimensional point set")
    edges = np.roll(hull, -1, axis=0) - hull
    angles = np.mod(np.arctan2(edges[:, 1], edges[:, 0]), 0.5 * math.pi)
    candidates = []  # (area, ratio, angle, length, width)
    for ang in angles:
        c, s = math.cos(ang), math.sin(ang)
        xr = hull[:, 0] * c + hull[:, 1] * s
        yr = -hull[:, 0] * s + hull[:, 1] * c
        w = float(xr.max() - xr.min())
        h = float(yr.max() - yr.min())
        length, width = max(w, h), min(w, h)
        candidates.append((w * h, length / width, float(ang), length, width))
    min_area = min(c[0] for c in candidates)
    tied = [c for c in candidates if c[0] <= min_area * (1.0 + 1e-9)]
    tied.sort(key=lambda c: (-c[1], c[2]))
    best = tied[0]
    return best[3], best[4]


# ---------------------------------------------------------------------------
# point containment

def _points_on_ring(pts: np.ndarray, ring: np.ndarray, tol: float) -> np.ndarray:
    closed = np.vstack([ring, ring[:1]])
    on = np.zeros(len(pts), dtype=bool)
    for a, b in zip(closed[:-1], closed[1:]):
        d = b - a
        L2 = float(d @ d)
        t = np.clip(((pts - a) @ d) / L2, 0.0, 1.0)
        q = a + t[:, None] * d
        on |= np.hypot(*(pts - q).T) <= tol
    return on


def _points_in_ring(pts: np.ndarray, ring: np.ndarray) -> np.ndarray:
    """Strict even-odd interior test. Points on the boundary give an
    arbitrary answer and must be filtered beforehand."""
    closed = np.vstack([ring, ring[:1]])
    px, py = pts[:, 0], pts[:, 1]
    inside = np.zeros(len(pts), dtype=bool)
    for (x0, y0), (x1, y1) in zip(closed[:-1], closed[1:]):
        crosses = (y0 > py) != (y1 > py)
        if not crosses.any():
            continue
        xi = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < xi)
    return inside


def contains_points(p: Polygon, pts, tol: float = LENGTH_TOL) -> np.ndarray:
    """Boundary-inclusive containment for an array of points."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    on_boundary = _points_on_ring(pts, p.exterior, tol)
    for h in p.interiors:
        on_boundary |= _points_on_ring(pts, h, tol)
    inside = _points_in_ring(pts, p.exterior)
    for h in p.interiors:
        inside &= ~_points_in_ring(pts, h)
    return on_boundary | inside


def contains_point(p: Polygon, pt, tol: float = LENGTH_TOL) -> bool:
    """True iff pt lies inside the exterior and outside every hole; points on
    any ring count as inside."""
    return bool(contains_points(p, np.asarray(pt, dtype=float)[None, :], tol)[0])


# ---------------------------------------------------------------------------
# shape descriptors

@dataclass(frozen=True)
class ShapeDescriptors:
    """Per-polygon geometry attributes.

    convexity and compactness lie in (0, 1]; elongation >= 1; the signature is
    scale invariant (distances normalized by the perimeter).
    """

    surface: float
    convexity: float
    compactness: float
    elongation: float
    hole_count: int
    signature: np.ndarray = field(repr=False)


def polygonal_signature(p: Polygon, n_samples: int = 20) -> np.ndarray:
    """Centroid-distance profile along the exterior ring.

    n_samples points are placed at equal arc-length intervals, starting at the
    boundary point nearest the centroid and proceeding clockwise; each
    distance is divided by the perimeter, which makes the profile invariant
    under uniform scaling.
    """
    if n_samples < 3:
        raise GeometryError("signature needs at least 3 samples")
    cx, cy = centroid(p)
    c = np.array([cx, cy])
    ring = p.exterior[::-1]  # stored CCW; traverse clockwise
    closed = np.vstack([ring, ring[:1]])
    seg = np.diff(closed, axis=0)
    seglen = np.hypot(seg[:, 0], seg[:, 1])
    perimeter = float(seglen.sum())
    cum = np.concatenate([[0.0], np.cumsum(seglen)])

    # Exact nearest boundary point: project the centroid on every segment.
    a = closed[:-1]
    t = np.clip(np.einsum("ij,ij->i", c - a, seg) / (seglen ** 2), 0.0, 1.0)
    foot = a + t[:, None] * seg
    dist = np.hypot(*(foot - c).T)
    j = int(np.argmin(dist))
    start = cum[j] + t[j] * seglen[j]

    pos = np.mod(start + perimeter * np.arange(n_samples) / n_samples, perimeter)
    idx = np.clip(np.searchsorted(cum, pos, side="right") - 1, 0, len(seglen) - 1)
    local = (pos - cum[idx]) / seglen[idx]
    samples = a[idx] + local[:, None] * seg[idx]
    return np.hypot(*(samples - c).T) / perimeter


def shape_descriptors(p: Polygon, n_signature: int = 20) -> ShapeDescriptors:
    """Surface, convexity, compactness, elongation, hole count and signature.

    convexity = area / area of the convex hull; compactness compares the shape
    to a disc (4*pi*area / perimeter^2, exterior perimeter only); elongation is
    the aspect ratio of the minimum-area oriented bounding box.
    """
    surface = polygon_area(p)
    if surface <= AREA_TOL:
        raise GeometryError(f"polygon {p.id!r} has no positive surface")
    hull_area = abs(ring_signed_area(convex_hull(p.exterior)))
    convexity = min(1.0, surface / hull_area)
    perimeter = polygon_perimeter(p)
    compactness = 4.0 * math.pi * surface / perimeter ** 2
    length, width = min_area_obb(p.exterior)
    return ShapeDescriptors(
        surface=surface,
        convexity=convexity,
        compactness=compactness,
        elongation=length / width,
        hole_count=len(p.interiors),
        signature=polygonal_signature(p, n_signature),
    )


# ---------------------------------------------------------------------------
# layer-level operations

def intersection_area(a: Polygon, b: Polygon) -> float:
    """Area of the geometric intersection (0 for disjoint inputs)."""
    return float(to_shapely(a).intersection(to_shapely(b)).area)


def adjacency_weights(
    polygons: list[Polygon],
    length_tol: float = LENGTH_TOL,
    area_tol: float = AREA_TOL,
) -> dict[str, list[tuple[str, float]]]:
    """Shared-boundary lengths between polygons of one layer.

    Returns, for every polygon id, the neighbors sharing a boundary strip
    longer than length_tol together with that length.  The relation is
    symmetric; point contacts are dropped.  Overlapping polygons (positive
    intersection area) are tolerated but flagged with a warning.
    """
    ids = [p.id for p in polygons]
    if len(set(ids)) != len(ids):
        raise GeometryError("duplicate polygon ids in adjacency input")
    out: dict[str, list[tuple[str, float]]] = {pid: [] for pid in ids}
    if len(polygons) < 2:
        return out
    geoms = [to_shapely(p) for p in polygons]
    tree = STRtree(geoms)
    left, right = tree.query(geoms, predicate="intersects")
    for i, j in zip(left.tolist(), right.tolist()):
        if i >= j:
            continue
        shared = geoms[i].boundary.intersection(geoms[j].boundary).length
        if geoms[i].intersection(geoms[j]).area > area_tol:
            warnings.warn(
                f"polygons {ids[i]!r} and {ids[j]!r} overlap with positive area",
                stacklevel=2,
            )
        if shared > length_tol:
            out[ids[i]].append((ids[j], float(shared)))
            out[ids[j]].append((ids[i], float(shared)))
    for pid in out:
        out[pid].sort(key=lambda item: item[0])
    return out
