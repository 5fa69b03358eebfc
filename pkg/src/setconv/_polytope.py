"""Low-level convex polytope kernels on raw numpy arrays.

Everything here works in the *reduced* coordinates of a point set's affine
hull, so that lower-dimensional bodies (a segment in R^3, a triangle in R^3)
are handled by the same code as full-dimensional ones.
"""
from __future__ import annotations

import itertools
import logging

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, Delaunay, HalfspaceIntersection, QhullError

logger = logging.getLogger(__name__)

AFFINE_RTOL = 1e-10
INSIDE_TOL = 1e-12


class AffineFrame:
    """Orthonormal frame of the affine hull of a point array.

    Attributes
    ----------
    origin : (d,) array
    basis : (d, k) array with orthonormal columns
    """

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=float)
        self.origin = points.mean(axis=0)
        centered = points - self.origin
        scale = max(1.0, float(np.abs(points).max(initial=0.0)))
        if len(points) == 1 or not centered.any():
            self.basis = np.zeros((points.shape[1], 0))
            return
        _, sing, vt = np.linalg.svd(centered, full_matrices=False)
        rank = int(np.sum(sing > AFFINE_RTOL * scale * max(1.0, np.sqrt(len(points)))))
        self.basis = vt[:rank].T

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def reduce(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return (in-frame coordinates, squared distance to the affine hull)."""
        rel = np.atleast_2d(points) - self.origin
        coords = rel @ self.basis
        resid = rel - coords @ self.basis.T
        return coords, np.einsum("ij,ij->i", resid, resid)

    def lift(self, coords: np.ndarray) -> np.ndarray:
        return self.origin + coords @ self.basis.T


class HullData:
    """Vertex set plus facet structure of a convex polytope."""

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=float)
        self.dim = points.shape[1]
        self.frame = AffineFrame(points)
        k = self.frame.rank
        coords, _ = self.frame.reduce(points)
        self.equations = None
        self.facets = None
        if k == 0:
            idx = np.array([0])
            self.reduced = coords[idx]
        elif k == 1:
            idx = np.unique([int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))])
            self.reduced = coords[idx]
        else:
            hull = ConvexHull(coords)
            idx = np.sort(hull.vertices)
            remap = -np.ones(len(points), dtype=int)
            remap[idx] = np.arange(len(idx))
            self.reduced = coords[idx]
            self.equations = hull.equations
            self.facets = remap[hull.simplices]
        self.vertex_index = idx
        self.vertices = points[idx]

    @property
    def rank(self) -> int:
        return self.frame.rank

    def interior_point(self) -> np.ndarray:
        return self.reduced.mean(axis=0)

    # -- distances ---------------------------------------------------------

    def distances(self, z: np.ndarray, chunk: int = 4096) -> np.ndarray:
        """Euclidean distance from each row of ``z`` to the polytope."""
        z = np.atleast_2d(np.asarray(z, dtype=float))
        out = np.empty(len(z))
        for lo in range(0, len(z), chunk):
            y, perp2 = self.frame.reduce(z[lo:lo + chunk])
            inplane = self._reduced_distances(y)
            out[lo:lo + chunk] = np.sqrt(perp2 + inplane**2)
        return out

    def _reduced_distances(self, y: np.ndarray) -> np.ndarray:
        k = self.rank
        if k == 0:
            return np.zeros(len(y))
        if k == 1:
            lo, hi = self.reduced[:, 0].min(), self.reduced[:, 0].max()
            t = y[:, 0]
            return np.maximum(np.maximum(lo - t, t - hi), 0.0)
        A, b = self.equations[:, :-1], self.equations[:, -1]
        viol = (y @ A.T + b).max(axis=1)
        out = np.zeros(len(y))
        outside = viol > INSIDE_TOL
        if not outside.any():
            return out
        yo = y[outside]
        if k == 2:
            out[outside] = _segments_distance(yo, self.reduced, self.facets)
        elif k == 3:
            out[outside] = _triangles_distance(yo, self.reduced, self.facets)
        else:
            out[outside] = [min_norm_point(self.reduced - q)[1] for q in yo]
        return out


def _segments_distance(q: np.ndarray, verts: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Min distance from each query to a set of segments (vectorized)."""
    a = verts[edges[:, 0]]
    ab = verts[edges[:, 1]] - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    rel = q[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("qej,ej->qe", rel, ab) / denom, 0.0, 1.0)
    diff = rel - t[..., None] * ab[None]
    return np.sqrt(np.einsum("qej,qej->qe", diff, diff).min(axis=1))


def _triangles_distance(q: np.ndarray, verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Min distance from each query to the union of triangles.

    The distance to a triangle is either the plane distance (when the
    projection falls inside) or the distance to one of its edges; taking the
    min over both candidate families over all facets gives the exact value.
    """
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [0, 2]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    best = _segments_distance(q, verts, edges)
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    e0, e1 = b - a, c - a
    n = np.cross(e0, e1)
    nn = np.einsum("ij,ij->i", n, n)
    good = nn > 1e-30
    if not good.any():
        return best
    a, e0, e1, n, nn = a[good], e0[good], e1[good], n[good], nn[good]
    rel = q[:, None, :] - a[None]
    height = np.einsum("qtj,tj->qt", rel, n) / np.sqrt(nn)
    proj = rel - (np.einsum("qtj,tj->qt", rel, n) / nn)[..., None] * n[None]
    d00 = np.einsum("ij,ij->i", e0, e0)
    d01 = np.einsum("ij,ij->i", e0, e1)
    d11 = np.einsum("ij,ij->i", e1, e1)
    p0 = np.einsum("qtj,tj->qt", proj, e0)
    p1 = np.einsum("qtj,tj->qt", proj, e1)
    det = d00 * d11 - d01**2
    u = (d11 * p0 - d01 * p1) / det
    v = (d00 * p1 - d01 * p0) / det
    inside = (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1 + 1e-12)
    plane = np.where(inside, np.abs(height), np.inf).min(axis=1)
    return np.minimum(best, plane)


def min_norm_point(points: np.ndarray, tol: float = 1e-12, max_iter: int = 10_000):
    """Wolfe's algorithm for the minimum-norm point of conv(points).

    Returns
    -------
    x : (k,) array, the nearest point of the hull to the origin
    norm : float
    """
    pts = np.asarray(points, dtype=float)
    norms = np.einsum("ij,ij->i", pts, pts)
    active = [int(np.argmin(norms))]
    w = np.array([1.0])
    x = pts[active[0]].copy()
    scale = max(1.0, float(norms.max()))
    for _ in range(max_iter):
        j = int(np.argmin(pts @ x))
        if x @ x - pts[j] @ x <= tol * scale or j in active:
            break
        active.append(j)
        w = np.append(w, 0.0)
        while True:
            S = pts[active]
            m = len(active)
            # affine minimizer: [S S^T  1; 1^T 0] [a; mu] = [0; 1]
            K = np.zeros((m + 1, m + 1))
            K[:m, :m] = S @ S.T
            K[:m, m] = 1.0
            K[m, :m] = 1.0
            rhs = np.zeros(m + 1)
            rhs[m] = 1.0
            alpha = np.linalg.lstsq(K, rhs, rcond=None)[0][:m]
            if (alpha > tol).all():
                w = alpha
                break
            neg = alpha <= tol
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(neg, w / (w - alpha), np.inf)
            theta = min(1.0, float(np.nanmin(ratios)))
            w = (1 - theta) * w + theta * alpha
            keep = w > tol
            if keep.all():
                keep[int(np.argmin(w))] = False
            active = [a for a, kk in zip(active, keep) if kk]
            w = w[keep]
            w = w / w.sum()
        x = w @ pts[active]
    return x, float(np.sqrt(max(x @ x, 0.0)))


# -- body-over-cloud excess ------------------------------------------------


def cover_excess(hull: HullData, sites: np.ndarray) -> float:
    """sup over x in the polytope of min_s ||x - s||, computed exactly.

    On each power cell the distance to the owning site is convex, so its
    maximum sits at a vertex of (cell ∩ polytope); enumerating those vertices
    gives the exact supremum.
    """
    sites = np.atleast_2d(np.asarray(sites, dtype=float))
    y, w = hull.frame.reduce(sites)
    w[w <= (INSIDE_TOL * max(1.0, float(np.abs(sites).max()))) ** 2] = 0.0
    k = hull.rank
    if k == 0:
        return float(np.sqrt(w.min()))
    verts = hull.reduced
    best = float(np.sqrt(_power_min(verts, y, w)).max())
    if k == 1:
        return max(best, _cover_excess_1d(verts[:, 0].min(), verts[:, 0].max(), y[:, 0], w))
    if not np.any(w) and len(y) > k + 1:
        fast = _cover_excess_delaunay(hull, y, best)
        if fast is not None:
            return fast
    return max(best, _cover_excess_cells(hull, y, w))


def _power_min(x: np.ndarray, y: np.ndarray, w: np.ndarray, chunk: int = 2048) -> np.ndarray:
    out = np.empty(len(x))
    for lo in range(0, len(x), chunk):
        diff = x[lo:lo + chunk, None, :] - y[None]
        out[lo:lo + chunk] = (np.einsum("qsj,qsj->qs", diff, diff) + w).min(axis=1)
    return out


def _cover_excess_1d(lo: float, hi: float, t: np.ndarray, w: np.ndarray) -> float:
    if not np.any(w):
        ts = np.unique(t)
        cand = np.concatenate([[lo, hi], (ts[1:] + ts[:-1]) / 2])
        cand = cand[(cand >= lo) & (cand <= hi)]
        pos = np.searchsorted(ts, cand)
        left = ts[np.clip(pos - 1, 0, len(ts) - 1)]
        right = ts[np.clip(pos, 0, len(ts) - 1)]
        return float(np.minimum(np.abs(cand - left), np.abs(cand - right)).max())
    # per-site cells: 2 t (t_o - t_s) <= c_o - c_s with c = t^2 + w
    c = t**2 + w
    best = 0.0
    for s in range(len(t)):
        slope = 2 * (t - t[s])
        rhs = c - c[s]
        a, b = lo, hi
        pos, neg = slope > 0, slope < 0
        if pos.any():
            b = min(b, float((rhs[pos] / slope[pos]).min()))
        if neg.any():
            a = max(a, float((rhs[neg] / slope[neg]).max()))
        if (slope == 0).any() and (rhs[slope == 0] < 0).any():
            continue
        if a > b:
            continue
        for x in (a, b):
            best = max(best, float(np.sqrt((x - t[s]) ** 2 + w[s])))
    return best


def _circumcenters(verts: np.ndarray):
    """Circumcenters and radii of a batch of simplices, shape (m, k+1, k)."""
    base = verts[:, 0]
    rel = verts[:, 1:] - base[:, None]
    rhs = 0.5 * np.einsum("mij,mij->mi", rel, rel)
    det = np.linalg.det(rel)
    scale = np.abs(rel).max(axis=(1, 2)) ** rel.shape[1]
    ok = np.abs(det) > 1e-12 * np.maximum(scale, 1e-300)
    centers = np.full(base.shape, np.nan)
    if ok.any():
        centers[ok] = base[ok] + np.linalg.solve(rel[ok], rhs[ok][..., None])[..., 0]
    radii = np.linalg.norm(centers - base, axis=1)
    return centers, radii, ok


def _cover_excess_delaunay(hull: HullData, y: np.ndarray, lower: float):
    """Voronoi shortcut for plain (unweighted) sites.

    A circumcenter inside the polytope is a local candidate whose value is
    its circumradius.  A bounded cell whose circumcenters all lie inside is
    fully accounted for by them; only cells reaching outside (or unbounded
    ones) are clipped explicitly.
    """
    try:
        tri = Delaunay(y)
    except QhullError:
        return None
    n, k = y.shape
    if len(tri.coplanar):
        return None
    centers, radii, ok = _circumcenters(y[tri.simplices])
    A, b = hull.equations[:, :-1], hull.equations[:, -1]
    inside = np.zeros(len(centers), dtype=bool)
    inside[ok] = (centers[ok] @ A.T + b).max(axis=1) <= INSIDE_TOL
    best = max(lower, float(radii[inside].max(initial=0.0)))
    on_hull = np.zeros(n, dtype=bool)
    on_hull[np.unique(tri.convex_hull)] = True
    m = len(tri.simplices)
    flat = tri.simplices.ravel()
    owner = np.repeat(np.arange(m), k + 1)
    ub = np.zeros(n)
    np.maximum.at(ub, flat, np.where(ok, radii, np.inf)[owner])
    all_in = np.ones(n, dtype=bool)
    np.logical_and.at(all_in, flat, inside[owner])
    todo = np.flatnonzero(on_hull | (~all_in & (ub > best)))
    if len(todo) == 0:
        return best
    indptr, indices = tri.vertex_neighbor_vertices
    nbrs = {int(s): set(indices[indptr[s]:indptr[s + 1]].tolist()) for s in todo}
    return max(best, _cover_excess_cells(hull, y, np.zeros(n), sites=todo, nbrs=nbrs))


def _power_neighbors(y: np.ndarray, w: np.ndarray) -> dict[int, set[int]] | None:
    n, k = y.shape
    if n <= k + 1:
        return None
    lifted = np.column_stack([y, np.einsum("ij,ij->i", y, y) + w])
    try:
        if not np.any(w):
            tri = Delaunay(y)
            simplices = tri.simplices
        else:
            hull = ConvexHull(lifted)
            simplices = hull.simplices[hull.equations[:, -2] < 0]
    except QhullError:
        return None
    nbrs: dict[int, set[int]] = {i: set() for i in range(n)}
    for simplex in simplices:
        for a, b in itertools.combinations(simplex, 2):
            nbrs[a].add(int(b))
            nbrs[b].add(int(a))
    return nbrs


def _chebyshev_center(halfspaces: np.ndarray) -> tuple[np.ndarray, float] | None:
    A, b = halfspaces[:, :-1], halfspaces[:, -1]
    norm = np.linalg.norm(A, axis=1)
    k = A.shape[1]
    c = np.zeros(k + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=np.column_stack([A, norm]), b_ub=-b,
                  bounds=[(None, None)] * k + [(0, None)], method="highs")
    if res.status != 0:
        return None
    return res.x[:k], float(res.x[-1])


def _cover_excess_cells(hull: HullData, y: np.ndarray, w: np.ndarray,
                        sites=None, nbrs=None) -> float:
    n, k = y.shape
    body = hull.equations
    scale = max(1.0, float(np.abs(hull.reduced).max()))
    center = hull.interior_point()
    if nbrs is None:
        nbrs = _power_neighbors(y, w)
    c = np.einsum("ij,ij->i", y, y) + w
    best = 0.0
    for s in (range(n) if sites is None else sites):
        if nbrs is not None and nbrs.get(s):
            others = np.array(sorted(nbrs[s]), dtype=int)
        else:
            others = np.delete(np.arange(n), s)
        if len(others):
            bis = np.column_stack([2 * (y[others] - y[s]), c[s] - c[others]])
            hs = np.vstack([body, bis])
        else:
            hs = body
        x0 = _interior_guess(hs, y[s], center, scale)
        if x0 is None:
            found = _chebyshev_center(hs)
            if found is None or found[1] <= 1e-12 * scale:
                continue
            x0 = found[0]
        try:
            verts = HalfspaceIntersection(hs, x0).intersections
        except QhullError:
            found = _chebyshev_center(hs)
            if found is None or found[1] <= 1e-12 * scale:
                continue
            try:
                verts = HalfspaceIntersection(hs, found[0]).intersections
            except QhullError:
                logger.warning("skipping degenerate power cell of site %d", s)
                continue
        verts = verts[np.isfinite(verts).all(axis=1)]
        if len(verts):
            diff = verts - y[s]
            best = max(best, float(np.sqrt((np.einsum("ij,ij->i", diff, diff) + w[s]).max())))
    return best


def _interior_guess(hs: np.ndarray, site: np.ndarray, center: np.ndarray, scale: float):
    A, b = hs[:, :-1], hs[:, -1]
    norm = np.linalg.norm(A, axis=1)
    t = 0.5
    for _ in range(40):
        x = site + t * (center - site)
        slack = -(A @ x + b) / np.where(norm > 0, norm, 1.0)
        if slack.min() > 1e-11 * scale:
            return x
        t *= 0.5
    return None
