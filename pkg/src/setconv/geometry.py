"""Finite point sets, convex bodies, Minkowski arithmetic and set distances.

A :class:`PointCloud` is a finite nonempty subset of R^d.  A
:class:`ConvexBody` is the convex hull of finitely many points, stored by its
extreme points.  Distances involving a ``ConvexBody`` are taken to the whole
hull, not just its vertices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
from scipy.spatial import cKDTree

from ._polytope import HullData, cover_excess

CANON_TOL = 1e-12
EXACT_CARDINALITY_CAP = 2_000_000


class DimensionMismatch(ValueError):
    pass


class CardinalityOverflow(RuntimeError):
    """An exact Minkowski sum would exceed the in-memory cap."""


def _canonical(points: np.ndarray, tol: float = CANON_TOL) -> np.ndarray:
    order = np.lexsort(points.T[::-1])
    pts = points[order]
    if len(pts) > 1:
        gaps = np.abs(np.diff(pts, axis=0))
        pts = pts[np.concatenate([[True], gaps.max(axis=1) > tol])]
        if ((gaps > 0) & (gaps <= tol)).any():
            # Near-ties can separate close points in lexicographic order.
            pairs = cKDTree(pts).query_pairs(tol, p=np.inf, output_type="ndarray")
            keep = np.ones(len(pts), dtype=bool)
            for i, j in pairs[np.lexsort(pairs.T[::-1])]:
                if keep[i]:
                    keep[j] = False
            pts = pts[keep]
    return pts


class PointCloud:
    """Finite nonempty set of points in R^d, canonically ordered.

    Points are sorted lexicographically and deduplicated with an absolute
    per-coordinate tolerance of 1e-12, so two clouds describing the same set
    compare equal.
    """

    __slots__ = ("_points",)

    def __init__(self, points, *, canonical: bool = False):
        arr = np.array(points, dtype=float, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise ValueError(f"expected a nonempty (n, d) array, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("point coordinates must be finite")
        if not canonical:
            arr = _canonical(arr)
        arr.setflags(write=False)
        self._points = arr

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def dim(self) -> int:
        return self._points.shape[1]

    def __len__(self) -> int:
        return self._points.shape[0]

    def __iter__(self):
        return iter(self._points)

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        if self._points.shape != other._points.shape:
            return False
        if np.all(np.abs(self._points - other._points) <= CANON_TOL):
            return True
        # Rounding can reorder near-ties, so fall back to matching as sets.
        fwd = cKDTree(other._points).query(self._points, p=np.inf)[0]
        back = cKDTree(self._points).query(other._points, p=np.inf)[0]
        return bool(fwd.max() <= CANON_TOL and back.max() <= CANON_TOL)

    __hash__ = None

    def __repr__(self):
        if len(self) <= 6:
            return f"PointCloud({self._points.tolist()})"
        return f"PointCloud(<{len(self)} points in R^{self.dim}>)"

    def to_json(self) -> dict:
        return {"dim": self.dim, "points": self._points.tolist()}

    @classmethod
    def from_json(cls, obj) -> "PointCloud":
        if isinstance(obj, str):
            obj = json.loads(obj)
        pts = np.asarray(obj["points"], dtype=float).reshape(len(obj["points"]), -1)
        if pts.shape[1] != obj["dim"]:
            raise DimensionMismatch(f"declared dim {obj['dim']} but points have {pts.shape[1]}")
        return cls(pts)


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Convex hull of a finite point set, kept as its extreme points.

    Build one with :func:`convex_hull`; the constructor trusts that
    ``vertices`` are already in convex position.
    """

    vertices: PointCloud
    _hull: HullData | None = field(default=None, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.vertices.dim

    @cached_property
    def hull(self) -> HullData:
        return self._hull if self._hull is not None else HullData(self.vertices.points)

    @property
    def affine_dim(self) -> int:
        return self.hull.rank

    def contains(self, z, tol: float = 1e-9) -> np.ndarray:
        return self.hull.distances(np.atleast_2d(z)) <= tol

    def __eq__(self, other):
        if not isinstance(other, ConvexBody):
            return NotImplemented
        return self.vertices == other.vertices

    __hash__ = None

    def to_json(self) -> dict:
        return self.vertices.to_json()


SetLike = Union[PointCloud, ConvexBody]


def _check_dims(a: SetLike, b: SetLike):
    if a.dim != b.dim:
        raise DimensionMismatch(f"dimension mismatch: {a.dim} vs {b.dim}")


def _points_of(x: SetLike) -> np.ndarray:
    return x.vertices.points if isinstance(x, ConvexBody) else x.points


def origin(dim: int) -> PointCloud:
    return PointCloud(np.zeros((1, dim)), canonical=True)


# -- arithmetic ------------------------------------------------------------


def minkowski_sum(a: PointCloud, b: PointCloud, *, cap: int = EXACT_CARDINALITY_CAP) -> PointCloud:
    """Exact pairwise-sum set ``{x + y}``, deduplicated."""
    _check_dims(a, b)
    if len(a) * len(b) > cap:
        raise CardinalityOverflow(f"|a|*|b| = {len(a) * len(b)} exceeds cap {cap}")
    sums = (a.points[:, None, :] + b.points[None, :, :]).reshape(-1, a.dim)
    return PointCloud(sums)


def scale(a: PointCloud, lam: float) -> PointCloud:
    if lam < 0:
        raise ValueError(f"scale factor must be nonnegative, got {lam}")
    if lam == 0:
        return origin(a.dim)
    return PointCloud(a.points * lam)


def convex_hull(a: SetLike) -> ConvexBody:
    if isinstance(a, ConvexBody):
        return a
    hull = HullData(a.points)
    return ConvexBody(PointCloud(hull.vertices, canonical=True), hull)


def minkowski_sum_bodies(a: ConvexBody, b: ConvexBody) -> ConvexBody:
    return convex_hull(minkowski_sum(a.vertices, b.vertices))


def scale_body(a: ConvexBody, lam: float) -> ConvexBody:
    if lam == 0:
        return ConvexBody(origin(a.dim))
    return ConvexBody(scale(a.vertices, lam))


def minkowski_combination(bodies, weights) -> ConvexBody:
    """Convex body ``sum_i w_i * co(bodies_i)`` with nonnegative weights."""
    bodies = list(bodies)
    if not bodies:
        raise ValueError("need at least one body")
    acc = None
    for body, wt in zip(bodies, weights, strict=True):
        term = scale(convex_hull(body).vertices, float(wt))
        acc = term if acc is None else minkowski_sum(acc, term)
        acc = convex_hull(acc).vertices
    return convex_hull(acc)


# -- distances -------------------------------------------------------------


def _nearest(z: np.ndarray, pts: np.ndarray, chunk: int = 2048) -> np.ndarray:
    """Min distance from each row of z to the rows of pts."""
    out = np.empty(len(z))
    if pts.shape[1] == 1 and len(pts) > 64:
        s = np.sort(pts[:, 0])
        t = z[:, 0]
        pos = np.searchsorted(s, t)
        left = s[np.clip(pos - 1, 0, len(s) - 1)]
        right = s[np.clip(pos, 0, len(s) - 1)]
        return np.minimum(np.abs(t - left), np.abs(t - right))
    if len(z) * len(pts) > 1_000_000:
        return cKDTree(pts).query(z)[0]
    step = max(1, chunk * 256 // max(len(pts), 1))
    for lo in range(0, len(z), step):
        diff = z[lo:lo + step, None, :] - pts[None, :, :]
        out[lo:lo + step] = np.sqrt(np.einsum("qpj,qpj->qp", diff, diff).min(axis=1))
    return out


def distances_to(z, x: SetLike) -> np.ndarray:
    """Vectorized ``dist_point_set`` over the rows of ``z``."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    if z.shape[1] != x.dim:
        raise DimensionMismatch(f"dimension mismatch: {z.shape[1]} vs {x.dim}")
    if isinstance(x, ConvexBody):
        return x.hull.distances(z)
    return _nearest(z, x.points)


def dist_point_set(z, x: SetLike) -> float:
    """Distance from a point to a cloud (nearest point) or to a body's hull."""
    return float(distances_to(np.asarray(z, dtype=float).reshape(1, -1), x)[0])


def directed_excess(x: SetLike, y: SetLike) -> float:
    """``sup_{p in x} dist(p, y)``.

    For a body ``x`` the supremum runs over its whole hull: against a body ``y``
    it is attained at a vertex, against a cloud it is computed exactly over
    the power cells of ``y`` restricted to ``x``.
    """
    _check_dims(x, y)
    if isinstance(x, ConvexBody) and isinstance(y, PointCloud):
        return cover_excess(x.hull, y.points)
    return float(distances_to(_points_of(x), y).max())


def hausdorff(x: SetLike, y: SetLike) -> float:
    return max(directed_excess(x, y), directed_excess(y, x))


def set_norm(x: SetLike) -> float:
    return float(np.linalg.norm(_points_of(x), axis=1).max())


def diameter(x: SetLike) -> float:
    pts = _points_of(x)
    diff = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff).max()))


# -- pruning ---------------------------------------------------------------


@dataclass
class PruneBudget:
    """Per-step Hausdorff tolerance and the running sum of errors spent."""

    delta: float
    accumulated: float = 0.0

    def __post_init__(self):
        if self.delta < 0 or self.accumulated < 0:
            raise ValueError("prune budget fields must be nonnegative")

    def spend(self, amount: float) -> None:
        self.accumulated += float(amount)


def greedy_cover(points: np.ndarray, radius: float) -> tuple[np.ndarray, float]:
    """Farthest-point selection until every point is within ``radius``.

    Returns the selected row indices and the achieved covering radius
    (which equals the Hausdorff distance between the subset and the input).
    """
    n = len(points)
    if radius <= 0 or n == 1:
        return np.arange(n), 0.0
    if points.shape[1] == 1:
        gap = float(np.diff(np.sort(points[:, 0])).min())
    else:
        gap = float(cKDTree(points).query(points, k=2)[0][:, 1].min())
    if gap > radius:
        return np.arange(n), 0.0
    tree = cKDTree(points)
    chosen = [0]
    dist = np.linalg.norm(points - points[0], axis=1)
    while True:
        far = int(np.argmax(dist))
        reach = dist[far]
        if reach <= radius:
            break
        chosen.append(far)
        # Only points within the current covering radius can move closer.
        near = np.asarray(tree.query_ball_point(points[far], reach), dtype=np.intp)
        dist[near] = np.minimum(dist[near], np.linalg.norm(points[near] - points[far], axis=1))
    return np.sort(np.array(chosen)), float(dist.max())


def prune(x: PointCloud, budget: PruneBudget) -> PointCloud:
    """Subset of ``x`` within ``budget.delta`` in Hausdorff distance.

    The achieved error (not the nominal delta) is charged to the budget.
    """
    if budget.delta == 0 or len(x) == 1:
        return x
    idx, achieved = greedy_cover(x.points, budget.delta)
    budget.spend(achieved)
    if len(idx) == len(x):
        return x
    return PointCloud(x.points[idx], canonical=True)
