"""Support-function embedding of convex bodies.

A convex body K is represented by its support values h_K(u) = max_{x in K} <u, x>
on a finite grid of unit directions.  The map is additive and positively
homogeneous, and the sup-norm of the difference of two embeddings is the
Hausdorff distance of the bodies up to the grid's covering radius.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .geometry import (
    ConvexBody,
    DimensionMismatch,
    PointCloud,
    SetLike,
    convex_hull,
    minkowski_sum,
    scale,
)


@dataclass(frozen=True, eq=False)
class DirectionGrid:
    """Unit directions plus the angular covering radius of the grid.

    ``resolution`` is 0 when the grid is the whole sphere (d = 1) and
    ``exact_resolution`` is False when it was estimated by sampling.
    """

    directions: np.ndarray
    resolution: float
    exact_resolution: bool = True

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self) -> int:
        return len(self.directions)

    @classmethod
    def make(cls, dim: int, count: int = 720, seed: int = 0) -> "DirectionGrid":
        if dim == 1:
            return cls(np.array([[1.0], [-1.0]]), 0.0)
        if dim == 2:
            theta = 2 * np.pi * np.arange(count) / count
            return cls(np.column_stack([np.cos(theta), np.sin(theta)]), np.pi / count)
        if dim == 3:
            dirs = fibonacci_sphere(count)
            return cls(dirs, _hull_covering_radius(dirs))
        rng = np.random.default_rng(seed)
        dirs = rng.standard_normal((count, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        probe = rng.standard_normal((20_000, dim))
        probe /= np.linalg.norm(probe, axis=1, keepdims=True)
        cos = np.clip((probe @ dirs.T).max(axis=1), -1.0, 1.0)
        return cls(dirs, float(np.arccos(cos).max()), exact_resolution=False)

    def refine(self, extra: np.ndarray) -> "DirectionGrid":
        """Grid with more directions; the recorded resolution cannot grow."""
        extra = np.atleast_2d(extra) / np.linalg.norm(np.atleast_2d(extra), axis=1, keepdims=True)
        return DirectionGrid(np.vstack([self.directions, extra]), self.resolution,
                             self.exact_resolution)


def fibonacci_sphere(count: int) -> np.ndarray:
    i = np.arange(count) + 0.5
    z = 1 - 2 * i / count
    r = np.sqrt(1 - z**2)
    phi = np.pi * (1 + 5**0.5) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _hull_covering_radius(dirs: np.ndarray) -> float:
    # Facets of the hull of points on the sphere are empty spherical caps;
    # the deepest cap centre is the point farthest from the grid.
    hull = ConvexHull(dirs)
    offsets = -hull.equations[:, -1]
    return float(np.arccos(np.clip(offsets, -1.0, 1.0)).max())


@dataclass(frozen=True, eq=False)
class SupportVector:
    grid: DirectionGrid
    values: np.ndarray

    def __add__(self, other: "SupportVector") -> "SupportVector":
        _same_grid(self, other)
        return SupportVector(self.grid, self.values + other.values)

    def __mul__(self, lam: float) -> "SupportVector":
        if lam < 0:
            raise ValueError("support vectors form a cone; scalars must be nonnegative")
        return SupportVector(self.grid, self.values * lam)

    __rmul__ = __mul__

    def to_csv(self, path) -> None:
        path = Path(path)
        d = self.grid.dim
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([f"u{i}" for i in range(d)] + ["value"])
            for u, v in zip(self.grid.directions, self.values):
                writer.writerow([repr(float(c)) for c in u] + [repr(float(v))])


def _same_grid(a: SupportVector, b: SupportVector):
    if a.grid is not b.grid and not (
            a.grid.directions.shape == b.grid.directions.shape
            and np.array_equal(a.grid.directions, b.grid.directions)):
        raise ValueError("support vectors live on different direction grids")


def embed(x: SetLike, grid: DirectionGrid) -> SupportVector:
    pts = x.vertices.points if isinstance(x, ConvexBody) else x.points
    if pts.shape[1] != grid.dim:
        raise DimensionMismatch(f"dimension mismatch: {pts.shape[1]} vs {grid.dim}")
    return SupportVector(grid, (grid.directions @ pts.T).max(axis=1))


def embedded_distance(a: SupportVector, b: SupportVector) -> float:
    _same_grid(a, b)
    return float(np.abs(a.values - b.values).max())


def isometry_gap_bound(x: SetLike, y: SetLike, grid: DirectionGrid) -> float:
    """Upper bound on ``hausdorff(co x, co y) - embedded_distance``.

    The support difference is Lipschitz on the sphere with constant
    ``||x|| + ||y||`` and every unit vector is within ``resolution`` (an
    angle, hence at least the chord) of the grid.
    """
    from .geometry import set_norm
    return grid.resolution * (set_norm(x) + set_norm(y))


def linearity_check(x: SetLike, y: SetLike, lam: float, mu: float, grid: DirectionGrid) -> float:
    xv = convex_hull(x).vertices
    yv = convex_hull(y).vertices
    combo = minkowski_sum(scale(xv, lam), scale(yv, mu))
    lhs = embed(combo, grid).values
    rhs = lam * embed(xv, grid).values + mu * embed(yv, grid).values
    return float(np.abs(lhs - rhs).max())


def cancellation_check(x: SetLike, y: SetLike, z: SetLike, grid: DirectionGrid,
                       tolerance: float = 1e-9) -> bool:
    """If x ∔ z and y ∔ z embed within ``tolerance``, so must x and y."""
    xz = minkowski_sum(convex_hull(x).vertices, convex_hull(z).vertices)
    yz = minkowski_sum(convex_hull(y).vertices, convex_hull(z).vertices)
    if embedded_distance(embed(xz, grid), embed(yz, grid)) > tolerance:
        return True
    return embedded_distance(embed(x, grid), embed(y, grid)) <= tolerance + 1e-12


def cancellation_gap(x: SetLike, y: SetLike, z: SetLike, grid: DirectionGrid) -> float:
    """|d(x ∔ z, y ∔ z) - d(x, y)| in the embedded metric (zero in exact arithmetic)."""
    xz = minkowski_sum(convex_hull(x).vertices, convex_hull(z).vertices)
    yz = minkowski_sum(convex_hull(y).vertices, convex_hull(z).vertices)
    return abs(embedded_distance(embed(xz, grid), embed(yz, grid))
               - embedded_distance(embed(x, grid), embed(y, grid)))


def expectation_commutes(rs, grid: DirectionGrid) -> float:
    """Max deviation between embed(E F) and the expected support vector."""
    from .random_sets import aumann_expectation
    lhs = embed(aumann_expectation(rs).body, grid).values
    rhs = sum(p * embed(v, grid).values for p, v in zip(rs.probs, rs.values))
    return float(np.abs(lhs - rhs).max())


def exact_hausdorff_2d(a: SetLike, b: SetLike) -> float:
    """Hausdorff distance between two convex polygons.

    The excess of one convex polygon over another is a convex function of the
    point, so it peaks at a vertex; each vertex-to-polygon distance is
    resolved with an explicit edge walk.
    """
    pa, pb = _ccw_polygon(a), _ccw_polygon(b)
    return max(max(_point_polygon_distance(p, pb) for p in pa),
               max(_point_polygon_distance(p, pa) for p in pb))


def _ccw_polygon(x: SetLike) -> np.ndarray:
    pts = x.vertices.points if isinstance(x, ConvexBody) else x.points
    if pts.shape[1] != 2:
        raise DimensionMismatch("exact_hausdorff_2d needs planar input")
    if len(pts) < 3:
        return pts
    try:
        hull = ConvexHull(pts)
    except Exception:
        # collinear: keep the two extreme points
        d = pts - pts.mean(axis=0)
        axis = np.linalg.svd(d)[2][0]
        t = d @ axis
        return pts[[int(np.argmin(t)), int(np.argmax(t))]]
    return pts[hull.vertices]


def _point_polygon_distance(p: np.ndarray, poly: np.ndarray) -> float:
    if len(poly) == 1:
        return float(np.hypot(*(p - poly[0])))
    if len(poly) >= 3:
        inside = True
        for i in range(len(poly)):
            a, b = poly[i], poly[(i + 1) % len(poly)]
            if (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) < -1e-15:
                inside = False
                break
        if inside:
            return 0.0
    best = np.inf
    m = len(poly) if len(poly) >= 3 else 1
    for i in range(m):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        ab = b - a
        t = 0.0 if not ab.any() else min(1.0, max(0.0, float((p - a) @ ab / (ab @ ab))))
        best = min(best, float(np.hypot(*(p - a - t * ab))))
    return best


def grid_rank(vectors: list[SupportVector]) -> int:
    """Rank of a family of support vectors (at most the grid size)."""
    return int(np.linalg.matrix_rank(np.vstack([v.values for v in vectors])))


def body_from_support(sv: SupportVector) -> PointCloud:
    """Vertices of the polytope ``{x : <u, x> <= h(u)}`` cut out by the grid.

    Used for round-tripping cone combinations back to bodies.
    """
    from scipy.spatial import HalfspaceIntersection
    from scipy.optimize import linprog

    A = sv.grid.directions
    h = sv.values
    d = sv.grid.dim
    if d == 1:
        return PointCloud([[-h[1]], [h[0]]] if h[0] != -h[1] else [[h[0]]])
    res = linprog(np.r_[np.zeros(d), -1.0], A_ub=np.column_stack([A, np.ones(len(A))]),
                  b_ub=h, bounds=[(None, None)] * d + [(0, None)], method="highs")
    hs = np.column_stack([A, -h])
    return PointCloud(HalfspaceIntersection(hs, res.x[:d]).intersections)
