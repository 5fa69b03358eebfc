"""Finite-prefix diagnostics for Hausdorff, Fisher and Wijsman convergence.

No finite computation decides a limit, so every check here answers the
weaker question "is this prefix consistent with convergence at tolerance
``tol`` over the last ``window`` indices".  Quantifiers over points are
replaced by finite probe sets; since ``z -> d(z, X)`` is 1-Lipschitz a
delta-dense probe set certifies the quantifier up to delta.
"""
from __future__ import annotations

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import (
    ConvexBody,
    DimensionMismatch,
    PointCloud,
    SetLike,
    directed_excess,
    distances_to,
    hausdorff,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-2
DEFAULT_WINDOW = 8
DEFAULT_PROBES = 64
MODES = ("hausdorff", "fisher", "wijsman")


class SetSequence:
    """Finite prefix X_1..X_N of a set sequence with a common dimension."""

    def __init__(self, terms: Sequence[SetLike], tag: dict | None = None):
        terms = list(terms)
        if not terms:
            raise ValueError("a set sequence needs at least one term")
        dims = {t.dim for t in terms}
        if len(dims) != 1:
            raise DimensionMismatch(f"terms have mixed dimensions {sorted(dims)}")
        self.terms = terms
        self.tag = dict(tag or {})

    @property
    def dim(self) -> int:
        return self.terms[0].dim

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, i):
        return self.terms[i]

    def __iter__(self):
        return iter(self.terms)

    def to_json(self) -> dict:
        return {"dim": self.dim,
                "terms": [(t.vertices if isinstance(t, ConvexBody) else t).points.tolist()
                          for t in self.terms],
                "tag": self.tag}

    @classmethod
    def from_json(cls, obj) -> "SetSequence":
        if isinstance(obj, str):
            obj = json.loads(obj)
        d = obj["dim"]
        terms = [PointCloud(np.asarray(t, dtype=float).reshape(len(t), d)) for t in obj["terms"]]
        return cls(terms, obj.get("tag"))


@dataclass(frozen=True, eq=False)
class ProbeSet:
    """Probe points split into limit probes (z in X) and exterior ones."""

    limit: np.ndarray
    exterior: np.ndarray

    def __post_init__(self):
        if len(self.limit) + len(self.exterior) == 0:
            raise ValueError("empty probe set")

    @property
    def dim(self) -> int:
        return (self.limit if len(self.limit) else self.exterior).shape[1]

    @property
    def all(self) -> np.ndarray:
        return np.vstack([self.limit, self.exterior])

    def refine(self, limit=None, exterior=None) -> "ProbeSet":
        lim = self.limit if limit is None else np.vstack([self.limit, np.atleast_2d(limit)])
        ext = self.exterior if exterior is None else np.vstack(
            [self.exterior, np.atleast_2d(exterior)])
        return ProbeSet(lim, ext)


def hull_samples(body: ConvexBody, count: int, seed: int = 0) -> np.ndarray:
    """Random convex combinations of the body's vertices."""
    verts = body.vertices.points
    if count == 0:
        return verts[:0]
    if len(verts) == 1:
        return np.repeat(verts, count, axis=0)
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(len(verts)), size=count) @ verts


def make_probes(seq: SetSequence | None, limit: SetLike, count: int = DEFAULT_PROBES,
                seed: int = 0, hull_count: int | None = None,
                min_distance: float = 1e-12) -> ProbeSet:
    """Default probes.

    Limit probes are the limit's points, plus ``hull_count`` (default
    ``count``) hull samples when the limit is convex.  Exterior probes are
    ``count`` seeded uniform points of the bounding box of the limit and the
    terms, inflated by 50%, kept only when farther than ``min_distance``
    from the limit.
    """
    if isinstance(limit, ConvexBody):
        extra = hull_samples(limit, count if hull_count is None else hull_count, seed)
        lim = np.vstack([limit.vertices.points, extra])
    else:
        lim = limit.points.copy()
    pts = [lim]
    if seq is not None:
        pts += [(t.vertices if isinstance(t, ConvexBody) else t).points for t in seq]
    allpts = np.vstack(pts)
    lo, hi = allpts.min(axis=0), allpts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    if min_distance > 1e-12:
        span = np.maximum(span, 4 * min_distance)
    lo, hi = lo - 0.25 * span, hi + 0.25 * span
    rng = np.random.default_rng(seed)
    ext = np.empty((0, limit.dim))
    for _ in range(256):
        cand = rng.uniform(lo, hi, size=(count, limit.dim))
        cand = cand[distances_to(cand, limit) > min_distance]
        ext = np.vstack([ext, cand])[:count]
        if len(ext) == count:
            break
    return ProbeSet(lim, ext)


@dataclass
class MetricRow:
    n: int
    e_excess: float
    fisher_probe_deficit: float
    wijsman_error: float
    hausdorff: float


@dataclass
class ModeVerdict:
    consistent: bool
    tolerance: float
    window: int
    worst: float


@dataclass
class ConvergenceReport:
    rows: list[MetricRow]
    verdicts: dict[str, ModeVerdict] = field(default_factory=dict)
    fisher_quantifier: str = "limit"
    wijsman_quantifier: str = "ambient"

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["n", "e_excess", "fisher_probe_deficit", "wijsman_error", "hausdorff"])
            for r in self.rows:
                writer.writerow([r.n] + [repr(float(v)) for v in
                                         (r.e_excess, r.fisher_probe_deficit,
                                          r.wijsman_error, r.hausdorff)])

    def trailer(self) -> dict:
        return {"verdicts": {k: asdict(v) for k, v in self.verdicts.items()},
                "fisher_quantifier": self.fisher_quantifier,
                "wijsman_quantifier": self.wijsman_quantifier}

    def write(self, csv_path, json_path) -> None:
        self.to_csv(csv_path)
        Path(json_path).write_text(json.dumps(self.trailer(), indent=2, sort_keys=True) + "\n")


# -- per-index metrics -----------------------------------------------------


def _check(seq: SetSequence, limit: SetLike, probes: ProbeSet | None = None):
    if seq.dim != limit.dim:
        raise DimensionMismatch(f"sequence dim {seq.dim} vs limit dim {limit.dim}")
    if probes is not None and probes.dim != seq.dim:
        raise DimensionMismatch(f"probe dim {probes.dim} vs sequence dim {seq.dim}")


def hausdorff_metrics(seq: SetSequence, limit: SetLike) -> np.ndarray:
    _check(seq, limit)
    return np.array([hausdorff(x, limit) for x in seq])


def _probe_points(probes: ProbeSet, quantifier: str) -> np.ndarray:
    if quantifier == "limit":
        pts = probes.limit
    elif quantifier == "ambient":
        pts = probes.all
    else:
        raise ValueError(f"quantifier must be 'limit' or 'ambient', got {quantifier!r}")
    if len(pts) == 0:
        raise ValueError("no probes for the requested quantifier")
    return pts


def fisher_metrics(seq: SetSequence, limit: SetLike, probes: ProbeSet,
                   quantifier: str = "limit") -> tuple[np.ndarray, np.ndarray]:
    """Per index: e(X_n, X) and max over probes z of d(z, X_n)."""
    _check(seq, limit, probes)
    pts = _probe_points(probes, quantifier)
    excess = np.array([directed_excess(x, limit) for x in seq])
    deficit = np.array([distances_to(pts, x).max() for x in seq])
    return excess, deficit


def wijsman_metrics(seq: SetSequence, limit: SetLike, probes: ProbeSet,
                    quantifier: str = "ambient") -> np.ndarray:
    """Per index: max over probes z of |d(z, X_n) - d(z, X)|."""
    _check(seq, limit, probes)
    pts = _probe_points(probes, quantifier)
    ref = distances_to(pts, limit)
    return np.array([np.abs(distances_to(pts, x) - ref).max() for x in seq])


def wijsman_errors(seq: SetSequence, limit: SetLike, probes: np.ndarray) -> np.ndarray:
    """Matrix of |d(z, X_n) - d(z, X)|, shape (N, number of probes)."""
    ref = distances_to(probes, limit)
    return np.vstack([np.abs(distances_to(probes, x) - ref) for x in seq])


@dataclass
class ProbeCheck:
    probe: int
    kind: str            # "limit" or "exterior"
    holds: bool
    n0: int | None       # first index after which the condition holds throughout
    violations: int      # indices at which the condition fails
    skipped: bool = False


def wijsman_characterization(seq: SetSequence, limit: SetLike, probes: ProbeSet,
                             epsilon: float, window: int = 1) -> list[ProbeCheck]:
    """Ball-avoidance form of Wijsman convergence, probe by probe.

    For an exterior probe z the terms must eventually miss the open ball
    B(z, d(z, X) - epsilon); for a limit probe d(z, X_n) must eventually stay
    below epsilon.  A probe holds when the tail starting at n0 covers at
    least the last ``window`` indices.  Exterior probes with
    ``d(z, X) <= epsilon`` are out of range and skipped.
    """
    _check(seq, limit, probes)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    N = len(seq)
    out = []
    for kind, pts in (("limit", probes.limit), ("exterior", probes.exterior)):
        if len(pts) == 0:
            continue
        ref = distances_to(pts, limit)
        dist = np.vstack([distances_to(pts, x) for x in seq])  # (N, P)
        for j in range(len(pts)):
            if kind == "exterior":
                if ref[j] <= epsilon:
                    out.append(ProbeCheck(j, kind, False, None, 0, skipped=True))
                    continue
                bad = dist[:, j] < ref[j] - epsilon
            else:
                bad = dist[:, j] >= epsilon
            last_bad = np.flatnonzero(bad)
            n0 = 1 if len(last_bad) == 0 else int(last_bad[-1]) + 2
            n0_ok = n0 <= N - window + 1
            out.append(ProbeCheck(j, kind, n0_ok, n0 if n0 <= N else None, int(bad.sum())))
    return out


def verdict(values: np.ndarray, tolerance: float = DEFAULT_TOLERANCE,
            window: int = DEFAULT_WINDOW) -> ModeVerdict:
    """Consistent iff the metric is within tolerance on the last ``window`` indices."""
    values = np.asarray(values, dtype=float)
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if window < 1 or window > len(values):
        raise ValueError(f"window {window} must be between 1 and {len(values)}")
    tail = values[-window:]
    return ModeVerdict(bool(np.all(tail <= tolerance)), tolerance, window, float(tail.max()))


def diagnose(seq: SetSequence, limit: SetLike, probes: ProbeSet | None = None, *,
             tolerance: float = DEFAULT_TOLERANCE, window: int = DEFAULT_WINDOW,
             fisher_quantifier: str = "limit", wijsman_quantifier: str = "ambient",
             indices: Sequence[int] | None = None) -> ConvergenceReport:
    """All metrics plus per-mode verdicts.

    The Fisher mode metric is ``max(e(X_n, X), probe deficit)``.
    """
    if probes is None:
        probes = make_probes(seq, limit)
    h = hausdorff_metrics(seq, limit)
    e, deficit = fisher_metrics(seq, limit, probes, fisher_quantifier)
    w = wijsman_metrics(seq, limit, probes, wijsman_quantifier)
    ns = list(indices) if indices is not None else list(range(1, len(seq) + 1))
    rows = [MetricRow(int(n), float(a), float(b), float(c), float(d))
            for n, a, b, c, d in zip(ns, e, deficit, w, h)]
    report = ConvergenceReport(rows, fisher_quantifier=fisher_quantifier,
                               wijsman_quantifier=wijsman_quantifier)
    report.verdicts = verdicts_from_rows(rows, tolerance, window)
    return report


def verdicts_from_rows(rows: Sequence[MetricRow], tolerance: float = DEFAULT_TOLERANCE,
                       window: int = DEFAULT_WINDOW) -> dict[str, ModeVerdict]:
    if not rows:
        raise ValueError("no rows")
    h = np.array([r.hausdorff for r in rows])
    fisher = np.array([max(r.e_excess, r.fisher_probe_deficit) for r in rows])
    w = np.array([r.wijsman_error for r in rows])
    return {"hausdorff": verdict(h, tolerance, window),
            "fisher": verdict(fisher, tolerance, window),
            "wijsman": verdict(w, tolerance, window)}
