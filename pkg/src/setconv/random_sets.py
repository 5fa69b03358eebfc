"""Simple (finitely-valued) random sets and their expectations.

Only the distribution of a random set is stored: a list of atoms, each a
probability and a set value.  The underlying atomless probability space never
appears explicitly; its effect on selections is reproduced by splitting each
atom into ``m`` equal-probability cells.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ConvexBody,
    DimensionMismatch,
    PointCloud,
    convex_hull,
    directed_excess,
    minkowski_combination,
    minkowski_sum,
    set_norm,
)

PROB_TOL = 1e-12


class NonConvexAtom(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SimpleRandomSet:
    probs: tuple[float, ...]
    values: tuple[PointCloud, ...]

    def __post_init__(self):
        if len(self.probs) != len(self.values) or not self.probs:
            raise ValueError("need one probability per atom and at least one atom")
        if any(p <= 0 for p in self.probs):
            raise ValueError("atom probabilities must be positive")
        if abs(sum(self.probs) - 1.0) > PROB_TOL:
            raise ValueError(f"atom probabilities sum to {sum(self.probs)!r}, not 1")
        dims = {v.dim for v in self.values}
        if len(dims) != 1:
            raise DimensionMismatch(f"atom values have mixed dimensions {sorted(dims)}")

    @classmethod
    def from_atoms(cls, atoms) -> "SimpleRandomSet":
        """Build from ``[(prob, points), ...]``."""
        probs, values = zip(*[(float(p), v if isinstance(v, PointCloud) else PointCloud(v))
                              for p, v in atoms])
        return cls(tuple(probs), tuple(values))

    @property
    def dim(self) -> int:
        return self.values[0].dim

    def __len__(self) -> int:
        return len(self.probs)

    def to_json(self) -> dict:
        return {"dim": self.dim,
                "atoms": [{"prob": p, "points": v.points.tolist()}
                          for p, v in zip(self.probs, self.values)]}

    @classmethod
    def from_json(cls, obj) -> "SimpleRandomSet":
        if isinstance(obj, str):
            obj = json.loads(obj)
        rs = cls.from_atoms([(a["prob"], np.asarray(a["points"], dtype=float).reshape(
            len(a["points"]), -1)) for a in obj["atoms"]])
        if rs.dim != obj["dim"]:
            raise DimensionMismatch(f"declared dim {obj['dim']} but atoms have {rs.dim}")
        return rs


def product(a: SimpleRandomSet, b: SimpleRandomSet) -> SimpleRandomSet:
    """Distribution of F1 + F2 for independent F1, F2."""
    atoms = [(p * q, minkowski_sum(u, v))
             for p, u in zip(a.probs, a.values) for q, v in zip(b.probs, b.values)]
    total = sum(p for p, _ in atoms)
    return SimpleRandomSet(tuple(p / total for p, _ in atoms), tuple(v for _, v in atoms))


# -- sampling --------------------------------------------------------------


def substreams(seed: int, count: int) -> list[np.random.Generator]:
    """Independent generators derived from one seed (for parallel batches)."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def sample_labels(rs: SimpleRandomSet, n: int, seed: int) -> np.ndarray:
    """Atom index of each of ``n`` i.i.d. draws."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(rs.probs)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right")


def sample_iid(rs: SimpleRandomSet, n: int, seed: int):
    """``n`` independent draws as a SetSequence (terms share atom objects)."""
    from .convergence import SetSequence
    labels = sample_labels(rs, n, seed)
    return SetSequence([rs.values[i] for i in labels],
                       tag={"scenario": "iid", "seed": seed, "n": n})


# -- integrals -------------------------------------------------------------


def is_convex_position(x: PointCloud) -> bool:
    return len(convex_hull(x).vertices) == len(x)


def hukuhara_integral(rs: SimpleRandomSet, convexify: bool = True) -> ConvexBody:
    """Probability-weighted Minkowski combination of the atom values.

    With ``convexify`` off each atom must already list the vertices of a
    polytope (its points in convex position).
    """
    if not convexify:
        for i, v in enumerate(rs.values):
            if not is_convex_position(v):
                raise NonConvexAtom(f"atom {i} is not in convex position")
    return minkowski_combination(rs.values, rs.probs)


@dataclass(frozen=True, eq=False)
class ExpectationBody:
    body: ConvexBody


def aumann_expectation(rs: SimpleRandomSet) -> ExpectationBody:
    """E(F): weighted sum of the atoms' convex hulls."""
    return ExpectationBody(hukuhara_integral(rs, convexify=True))


def integrability_bound(rs: SimpleRandomSet) -> float:
    return float(sum(p * set_norm(v) for p, v in zip(rs.probs, rs.values)))


@dataclass(frozen=True, eq=False)
class SelectionIntegral:
    value: np.ndarray
    subdivision: int
    chosen: tuple[np.ndarray, ...] = field(repr=False)


def _selection_values(rs: SimpleRandomSet, m: int, count: int,
                      rng: np.random.Generator, keep_choices: bool):
    values = np.zeros((count, rs.dim))
    choices = []
    for p, atom in zip(rs.probs, rs.values):
        k = len(atom)
        # Cells pick points with a shared random mixing law drawn from
        # Dirichlet(1/2): each cell is still uniform over the atom's points
        # marginally, but extreme selections keep positive mass for large m.
        mix = rng.dirichlet(np.full(k, 0.5), size=count) if k > 1 else np.ones((count, 1))
        u = rng.random((count, m))
        idx = (u[..., None] > np.cumsum(mix, axis=1)[:, None, :]).sum(axis=2)
        idx = np.minimum(idx, k - 1)
        values += p * atom.points[idx].mean(axis=1)
        if keep_choices:
            choices.append(idx)
    return values, choices


def selection_integral_sample(rs: SimpleRandomSet, m: int, count: int, seed: int,
                              check: bool = True) -> list[SelectionIntegral]:
    """Integrals of random selections over an m-fold subdivision of each atom.

    Every atom is split into ``m`` cells of probability ``prob/m``; each cell
    carries one point of the atom.  The returned integrals are checked to lie
    in E(F).
    """
    if m < 1 or count < 1:
        raise ValueError("m and count must be positive")
    rng = np.random.default_rng(seed)
    values, choices = _selection_values(rs, m, count, rng, keep_choices=True)
    if check:
        _assert_inside(rs, values)
    return [SelectionIntegral(values[i], m, tuple(c[i] for c in choices)) for i in range(count)]


def selection_values(rs: SimpleRandomSet, m: int, count: int, seed: int) -> np.ndarray:
    """Array form of :func:`selection_integral_sample` (no per-sample objects)."""
    values, _ = _selection_values(rs, m, count, np.random.default_rng(seed), keep_choices=False)
    return values


def _assert_inside(rs: SimpleRandomSet, values: np.ndarray, tol: float = 1e-9):
    body = aumann_expectation(rs).body
    gap = float(body.hull.distances(values).max())
    if gap > tol:
        raise AssertionError(f"selection integral outside E(F) by {gap:.3e}")


def expectation_consistency(rs: SimpleRandomSet, m: int, count: int,
                            seed: int) -> tuple[float, float]:
    """(inner_gap, outer_gap) between sampled selection integrals and E(F).

    ``inner_gap`` is the excess of the samples over E(F) and must vanish.
    ``outer_gap`` is the excess of E(F) over the sampled set itself, i.e. the
    largest hole the samples leave in E(F); it shrinks as ``m`` and ``count``
    grow, which is the finite trace of the convexity of the Aumann integral.
    """
    values = selection_values(rs, m, count, seed)
    body = aumann_expectation(rs).body
    cloud = PointCloud(values)
    inner = directed_excess(cloud, body)
    outer = directed_excess(body, cloud)
    return inner, outer
