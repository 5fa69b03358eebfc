"""Minkowski averages, epsilon-nets of set families and convexification gaps."""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import (
    EXACT_CARDINALITY_CAP,
    CardinalityOverflow,
    ConvexBody,
    DimensionMismatch,
    PointCloud,
    PruneBudget,
    SetLike,
    convex_hull,
    directed_excess,
    greedy_cover,
    hausdorff,
    minkowski_combination,
    minkowski_sum,
    scale,
)

SIMPLEX_TOL = 1e-12


def _prune_sum(total: PointCloud, radius: float) -> tuple[PointCloud, float]:
    if radius <= 0 or len(total) == 1:
        return total, 0.0
    idx, achieved = greedy_cover(total.points, radius)
    if len(idx) == len(total):
        return total, 0.0
    return PointCloud(total.points[idx], canonical=True), achieved


def repeated_average(d: PointCloud, n: int, budget: PruneBudget | None = None,
                     cap: int = EXACT_CARDINALITY_CAP) -> PointCloud:
    """D[n] = (D + ... + D) / n.

    With a positive ``budget.delta`` each partial sum is pruned so that the
    final average moves by at most ``delta`` per step; the achieved error is
    charged to the budget.  Exact mode raises :class:`CardinalityOverflow`
    once a partial sum would exceed ``cap`` points.
    """
    if n < 1:
        raise ValueError("n must be positive")
    delta = 0.0 if budget is None else budget.delta
    total = d
    for _ in range(n - 1):
        total = minkowski_sum(total, d, cap=cap)
        if delta > 0:
            total, achieved = _prune_sum(total, n * delta)
            budget.spend(achieved / n)
    return scale(total, 1.0 / n) if n > 1 else total


def rational_witness(d: PointCloud, weights: Sequence, n: int, anchor=None):
    """Point of D[n] approximating z = sum_i w_i x_i for rational weights.

    ``weights`` align with the canonical points of ``d``.  With p the common
    denominator, n = k p + j yields (k p z + j c) / n, which is an average of
    n points of D.  Returns None when n < p.
    """
    w = [Fraction(x) for x in weights]
    if len(w) != len(d):
        raise ValueError(f"expected {len(d)} weights, got {len(w)}")
    if any(x < 0 for x in w) or sum(w) != 1:
        raise ValueError("weights must be nonnegative rationals summing to 1")
    p = math.lcm(*(x.denominator for x in w))
    if n < p:
        return None
    pts = d.points
    z = sum(float(x) * pts[i] for i, x in enumerate(w) if x)
    k, j = divmod(n, p)
    if j == 0:
        return np.asarray(z, dtype=float)
    c = pts[0] if anchor is None else np.asarray(anchor, dtype=float).reshape(-1)
    return (k * p * z + j * c) / n


# -- nets over families of sets -------------------------------------------


@dataclass(frozen=True, eq=False)
class FamilyNet:
    epsilon: float
    centers: tuple
    provenance: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.centers)

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon,
                "provenance": list(self.provenance),
                "centers": [c.to_json() for c in self.centers]}

    @classmethod
    def from_json(cls, obj) -> "FamilyNet":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls(float(obj["epsilon"]),
                   tuple(PointCloud.from_json(c) for c in obj["centers"]),
                   tuple(int(i) for i in obj["provenance"]))


def _pairwise_to(family: Sequence[SetLike], center: SetLike, cache: dict) -> np.ndarray:
    out = np.empty(len(family))
    for i, member in enumerate(family):
        key = (id(member), id(center))
        if key not in cache:
            cache[key] = hausdorff(member, center)
        out[i] = cache[key]
    return out


def build_family_net(family: Sequence[SetLike], epsilon: float) -> FamilyNet:
    """Greedy farthest-point net: every member ends strictly within ``epsilon``."""
    family = list(family)
    if not family:
        raise ValueError("empty family")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if len({m.dim for m in family}) != 1:
        raise DimensionMismatch("family members have mixed dimensions")
    cache: dict = {}
    chosen = [0]
    dist = _pairwise_to(family, family[0], cache)
    while True:
        far = int(np.argmax(dist))
        if dist[far] < epsilon:
            break
        chosen.append(far)
        dist = np.minimum(dist, _pairwise_to(family, family[far], cache))
    return FamilyNet(float(epsilon), tuple(family[i] for i in chosen), tuple(chosen))


class UncoveredTerm(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuantizedSequence:
    assignments: np.ndarray   # center index per term
    counts: np.ndarray        # (N, centers) running counts
    errors: np.ndarray        # h(X_n, C'_n) per term

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / np.arange(1, len(self.counts) + 1)[:, None]

    @property
    def averaged_error(self) -> np.ndarray:
        """(1/n) sum_{i<=n} h(X_i, C'_i) for every n."""
        return np.cumsum(self.errors) / np.arange(1, len(self.errors) + 1)


def quantize(seq, net: FamilyNet) -> QuantizedSequence:
    """Assign each term to the smallest-index center strictly within epsilon."""
    cache: dict[int, tuple[int, float]] = {}
    assign = np.empty(len(seq), dtype=int)
    errors = np.empty(len(seq))
    for n, term in enumerate(seq):
        if id(term) not in cache:
            for i, center in enumerate(net.centers):
                h = hausdorff(term, center)
                if h < net.epsilon:
                    cache[id(term)] = (i, h)
                    break
            else:
                raise UncoveredTerm(f"term {n + 1} is not within {net.epsilon} of any center")
        assign[n], errors[n] = cache[id(term)]
    onehot = np.zeros((len(seq), len(net)), dtype=np.int64)
    onehot[np.arange(len(seq)), assign] = 1
    return QuantizedSequence(assign, np.cumsum(onehot, axis=0), errors)


@dataclass(frozen=True, eq=False)
class GammaLimit:
    weights: np.ndarray
    body: ConvexBody


def _check_simplex(weights, size: int) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (size,):
        raise ValueError(f"expected {size} weights, got shape {w.shape}")
    if (w < 0).any() or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("weights must lie in the probability simplex")
    return w


def gamma_limit(net: FamilyNet, weights) -> GammaLimit:
    """The body sum_i w_i co C_i."""
    w = _check_simplex(weights, len(net))
    return GammaLimit(w, minkowski_combination(net.centers, w))


# -- Mazur: nets of the convex hull of a family ---------------------------


@dataclass(frozen=True, eq=False)
class MazurNet:
    epsilon: float
    centers: tuple[ConvexBody, ...]
    resolution: int                    # simplex grid denominator K
    grid: np.ndarray                   # integer weights, rows sum to K
    bodies: tuple[ConvexBody, ...]
    verified_gap: float                # worst gap seen in post-verification

    def __len__(self) -> int:
        return len(self.bodies)

    def __iter__(self):
        return iter(self.bodies)


def simplex_grid(parts: int, K: int) -> np.ndarray:
    """All nonnegative integer vectors of length ``parts`` summing to K."""
    rows = []
    for bars in itertools.combinations(range(K + parts - 1), parts - 1):
        edges = (-1,) + bars + (K + parts - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(parts)])
    return np.array(rows, dtype=int)


def round_to_grid(alpha: np.ndarray, K: int) -> np.ndarray:
    """Largest-remainder rounding of a simplex point to multiples of 1/K."""
    scaled = alpha * K
    base = np.floor(scaled).astype(int)
    short = K - base.sum()
    order = np.argsort(-(scaled - base), kind="stable")
    base[order[:short]] += 1
    return base


def mazur_conet(family: Sequence[SetLike], epsilon: float, checks: int = 1000,
                seed: int = 0, max_bodies: int = 200_000) -> MazurNet:
    """An epsilon-net of the convex hull of a family of convex bodies.

    An epsilon/2 net {A_i} of the family is followed by the images of a
    simplex grid under alpha -> sum alpha_i A_i.  The grid step keeps the
    image within epsilon/2 of any combination, using
    h(Phi(a), Phi(b)) <= |a - b|_1 * max_i |A_i - c| for a common centre c.
    """
    bodies = [convex_hull(b) for b in family]
    if not bodies:
        raise ValueError("empty family")
    half = build_family_net(bodies, epsilon / 2)
    centers = half.centers
    p = len(centers)
    c = np.mean([a.vertices.points.mean(axis=0) for a in centers], axis=0)
    spread = max(float(np.linalg.norm(a.vertices.points - c, axis=1).max()) for a in centers)
    K = max(1, math.ceil(2 * p * spread / epsilon)) if p > 1 else 1
    if math.comb(K + p - 1, p - 1) > max_bodies:
        raise CardinalityOverflow(f"simplex grid with K={K}, p={p} is too large")
    grid = simplex_grid(p, K)
    net_bodies = tuple(minkowski_combination(centers, row / K) for row in grid)

    # Post-verification with the witness from the covering argument.
    rng = np.random.default_rng(seed)
    owner = []
    for b in bodies:
        owner.append(next(i for i, a in enumerate(centers) if hausdorff(b, a) < epsilon / 2))
    lookup = {tuple(row): i for i, row in enumerate(grid)}
    worst = 0.0
    for _ in range(checks if len(bodies) > 1 else 1):
        beta = rng.dirichlet(np.ones(len(bodies)))
        combo = minkowski_combination(bodies, beta)
        alpha = np.zeros(p)
        np.add.at(alpha, owner, beta)
        target = net_bodies[lookup[tuple(round_to_grid(alpha, K))]]
        worst = max(worst, hausdorff(combo, target))
    if worst > epsilon + 1e-9:
        raise AssertionError(f"Mazur net misses a combination by {worst:.3e} > {epsilon}")
    return MazurNet(float(epsilon), centers, K, grid, net_bodies, worst)


# -- Shapley-Folkman oracle -----------------------------------------------


def _circumcenter(pts: np.ndarray):
    p0 = pts[0]
    B = (pts[1:] - p0).T
    if B.shape[1] == 0:
        return p0
    G = B.T @ B
    try:
        lam = np.linalg.solve(G, 0.5 * np.diag(G))
    except np.linalg.LinAlgError:
        return None
    if not np.allclose(G @ lam, 0.5 * np.diag(G), atol=1e-12 * max(1.0, np.abs(G).max())):
        return None
    return p0 + B @ lam


def enclosing_radius(x: SetLike) -> float:
    """Radius of the smallest ball containing the set.

    Exact by enumerating boundary subsets for small sets; otherwise an upper
    bound from a numerically optimized centre.
    """
    pts = x.vertices.points if isinstance(x, ConvexBody) else x.points
    if len(pts) == 1:
        return 0.0
    if pts.shape[1] == 1:
        return float(pts.max() - pts.min()) / 2
    if len(pts) <= 8:
        best = np.inf
        for size in range(2, min(len(pts), pts.shape[1] + 1) + 1):
            for sub in itertools.combinations(range(len(pts)), size):
                ctr = _circumcenter(pts[list(sub)])
                if ctr is None:
                    continue
                r = float(np.linalg.norm(pts - ctr, axis=1).max())
                best = min(best, r)
        return best
    from scipy.optimize import minimize
    d = pts.shape[1]
    x0 = np.r_[pts.mean(axis=0), np.linalg.norm(pts - pts.mean(axis=0), axis=1).max() ** 2]
    cons = {"type": "ineq", "fun": lambda v: v[d] - ((pts - v[:d]) ** 2).sum(axis=1)}
    res = minimize(lambda v: v[d], x0, constraints=[cons], method="SLSQP")
    ctr = res.x[:d] if res.success else pts.mean(axis=0)
    return float(np.linalg.norm(pts - ctr, axis=1).max())


@dataclass(frozen=True)
class GapResult:
    raw_gap: float
    bound: float
    accumulated: float
    n: int

    def __iter__(self):
        return iter((self.raw_gap, self.bound))


def raw_average(terms: Sequence[PointCloud], budget: PruneBudget | None = None,
                cap: int = EXACT_CARDINALITY_CAP) -> PointCloud:
    """(X_1 + ... + X_n)/n with optional pruning of the partial sums."""
    n = len(terms)
    delta = 0.0 if budget is None else budget.delta
    total = terms[0]
    for t in terms[1:]:
        total = minkowski_sum(total, t, cap=cap)
        if delta > 0:
            total, achieved = _prune_sum(total, n * delta)
            budget.spend(achieved / n)
    return scale(total, 1.0 / n)


def shapley_folkman_gap(terms: Sequence[PointCloud], budget: PruneBudget | None = None,
                        cap: int = EXACT_CARDINALITY_CAP) -> GapResult:
    """Gap between the raw and convexified averages against the classical bound.

    raw_gap = h((X_1+...+X_n)/n, (co X_1+...+co X_n)/n) and
    bound = sqrt(d)/n * max_i radius(X_i).  Raises AssertionError if the
    gap exceeds the bound plus the pruning error.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("need at least one term")
    if len({t.dim for t in terms}) != 1:
        raise DimensionMismatch("terms have mixed dimensions")
    n, d = len(terms), terms[0].dim
    start = 0.0 if budget is None else budget.accumulated
    raw = raw_average(terms, budget, cap)
    conv = minkowski_combination(terms, [1.0 / n] * n)
    gap = max(directed_excess(raw, conv), directed_excess(conv, raw))
    bound = math.sqrt(d) / n * max(enclosing_radius(t) for t in terms)
    spent = 0.0 if budget is None else budget.accumulated - start
    if gap > bound + spent + 1e-12:
        raise AssertionError(f"raw gap {gap:.6g} exceeds bound {bound:.6g} + {spent:.3g}")
    return GapResult(gap, bound, spent, n)


def random_instance(rng: np.random.Generator, max_dim: int = 3, max_terms: int = 6,
                    max_points: int = 5) -> list[PointCloud]:
    d = int(rng.integers(1, max_dim + 1))
    n = int(rng.integers(1, max_terms + 1))
    return [PointCloud(rng.uniform(-1, 1, size=(int(rng.integers(1, max_points + 1)), d)))
            for _ in range(n)]


def oracle_sweep(count: int, seed: int = 0, **kwargs) -> list[GapResult]:
    rng = np.random.default_rng(seed)
    return [shapley_folkman_gap(random_instance(rng, **kwargs)) for _ in range(count)]


def write_oracle_csv(results: Sequence[GapResult], path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "raw_gap", "bound", "budget_accumulated"])
        for r in results:
            writer.writerow([r.n, repr(r.raw_gap), repr(r.bound), repr(r.accumulated)])
