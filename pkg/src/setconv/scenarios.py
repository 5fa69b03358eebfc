"""Built-in set sequences and random-set configurations used by demos and tests."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .convergence import ProbeSet, SetSequence, make_probes
from .convexification import repeated_average
from .geometry import ConvexBody, PointCloud, SetLike, convex_hull
from .radstrom import fibonacci_sphere
from .random_sets import SimpleRandomSet


@dataclass(frozen=True, eq=False)
class Scenario:
    """A sequence with its intended limit and the probes it should be judged on."""

    name: str
    seq: SetSequence
    limit: SetLike
    probes: ProbeSet


def coin_flip() -> SimpleRandomSet:
    return SimpleRandomSet.from_atoms([(0.5, [[0.0]]), (0.5, [[1.0]])])


def two_segments() -> SimpleRandomSet:
    return SimpleRandomSet.from_atoms([(0.5, [[0.0], [1.0]]), (0.5, [[1.0], [2.0]])])


def two_pairs() -> SimpleRandomSet:
    """Nonconvex atoms {0,1} and {0,2} with expectation [0, 3/2]."""
    return SimpleRandomSet.from_atoms([(0.5, [[0.0], [1.0]]), (0.5, [[0.0], [2.0]])])


def averaging(d: PointCloud, indices) -> SetSequence:
    """The averages D[n] for the given n (exact, so keep |D|^n modest)."""
    indices = list(indices)
    return SetSequence([repeated_average(d, n) for n in indices],
                       tag={"scenario": "averaging", "indices": indices,
                            "points": d.points.tolist()})


def averaging_scenario(n_max: int = 128) -> Scenario:
    d = PointCloud([[0.0], [1.0]])
    seq = averaging(d, range(1, n_max + 1))
    limit = convex_hull(d)
    return Scenario("averaging", seq, limit, make_probes(seq, limit))


def ball_sample(radius: float = 1.0, count: int = 256, dim: int = 2) -> PointCloud:
    if dim == 2:
        t = 2 * np.pi * np.arange(count) / count
        pts = np.column_stack([np.cos(t), np.sin(t)])
    elif dim == 3:
        pts = fibonacci_sphere(count)
    else:
        raise ValueError("ball samples are provided for d = 2 and 3")
    return PointCloud(radius * pts)


def shrinking_balls(n_max: int = 128, count: int = 256) -> Scenario:
    """Balls of radius 1 + 1/n against the unit ball, probed on the radius-2 sphere."""
    terms = [convex_hull(ball_sample(1 + 1 / n, count)) for n in range(1, n_max + 1)]
    limit = convex_hull(ball_sample(1.0, count))
    t = 2 * np.pi * (np.arange(32) + 0.5) / 32
    probes = ProbeSet(limit.vertices.points, 2 * np.column_stack([np.cos(t), np.sin(t)]))
    seq = SetSequence(terms, tag={"scenario": "shrinking_balls", "n_max": n_max})
    return Scenario("shrinking_balls", seq, limit, probes)


def icosahedron_directions() -> np.ndarray:
    """The 12 unit vertex directions of an icosahedron, the first one being e_1."""
    phi = (1 + 5 ** 0.5) / 2
    v = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            v += [(0.0, a, b), (a, b, 0.0), (b, 0.0, a)]
    v = np.array(v) / np.linalg.norm(v[0])
    first = v[int(np.argmax(v[:, 0]))]
    # Householder reflection taking ``first`` to e_1.
    w = first - np.array([1.0, 0.0, 0.0])
    if np.linalg.norm(w) > 1e-15:
        w /= np.linalg.norm(w)
        v = v - 2 * np.outer(v @ w, w)
    order = np.lexsort(np.round(v, 12).T[::-1])[::-1]
    v = v[order]
    return v[np.argsort(-v[:, 0], kind="stable")]


def spike_scenario(lam: float = 1.1, count: int = 400, probes: int = 64, seed: int = 0) -> Scenario:
    """Finite truncation of the unit ball with a spike lambda*e_n added to term n.

    Terms are hull(B u {lambda e_n}) for 12 well-separated unit directions
    e_n, and the limit is B.  Every term sticks out of B by lambda - 1, yet a
    fixed probe is disturbed by at most one term.
    """
    dirs = icosahedron_directions()
    ball = PointCloud(np.vstack([fibonacci_sphere(count), dirs]))
    limit = convex_hull(ball)
    terms = [convex_hull(PointCloud(np.vstack([ball.points, lam * e]))) for e in dirs]
    seq = SetSequence(terms, tag={"scenario": "spike", "lambda": lam, "count": count})
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((probes, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = rng.uniform(1.2, 3.0, size=(probes, 1))
    ext = np.vstack([[2.0, 0.0, 0.0], u * r])
    return Scenario("spike", seq, limit, ProbeSet(dirs.copy(), ext))


# -- generators for the implication-chain suite ---------------------------


def _rotation(rng: np.random.Generator, d: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def jittered_sequence(rng: np.random.Generator, n_max: int = 32, amplitude: float = 0.05,
                      dim: int | None = None) -> Scenario:
    """Noisy copies of a random cloud with noise of size amplitude / n."""
    d = int(rng.integers(1, 4)) if dim is None else dim
    base = rng.uniform(-1, 1, size=(int(rng.integers(2, 9)), d))
    limit = PointCloud(base)
    terms = []
    for n in range(1, n_max + 1):
        noise = rng.uniform(-1, 1, size=base.shape) * amplitude / (n * np.sqrt(d))
        terms.append(PointCloud(base + noise))
    seq = SetSequence(terms, tag={"scenario": "jitter", "amplitude": amplitude})
    return Scenario("jitter", seq, limit, make_probes(seq, limit, seed=int(rng.integers(1 << 31))))


@lru_cache(maxsize=64)
def _unit_average(k: int, n: int) -> np.ndarray:
    cube = np.array(np.meshgrid(*[[0.0, 1.0]] * k, indexing="ij")).reshape(k, -1).T
    return repeated_average(PointCloud(cube), n).points


def lattice_sequence(rng: np.random.Generator, n_terms: int = 8, base: int = 16,
                     margin: float = 0.1) -> Scenario:
    """D[base*j] for D a similarity image of {0,1} or {0,1}^2 in R^d.

    The limit is co D.  Limit probes are the image of the lattice
    {k/base}, which every term contains, so the Fisher metric vanishes while
    the Hausdorff distance is still of order 1/(base*j).  Exterior probes stay
    ``margin`` away from the limit.
    """
    k = int(rng.integers(1, 3))
    d = int(rng.integers(k, 4))
    cube = np.array(np.meshgrid(*[[0.0, 1.0]] * k, indexing="ij")).reshape(k, -1).T
    frame = _rotation(rng, d)[:, :k] * rng.uniform(0.5, 1.5)
    shift = rng.uniform(-1, 1, size=d)

    def image(p):
        return p @ frame.T + shift

    terms = [PointCloud(image(_unit_average(k, base * j))) for j in range(1, n_terms + 1)]
    limit = convex_hull(PointCloud(image(cube)))
    grid = np.array(np.meshgrid(*[np.arange(base + 1) / base] * k, indexing="ij")).reshape(k, -1).T
    seq = SetSequence(terms, tag={"scenario": "lattice", "base": base, "k": k, "d": d})
    ext = make_probes(None, limit, seed=int(rng.integers(1 << 31)), min_distance=margin).exterior
    return Scenario("lattice", seq, limit, ProbeSet(image(grid), ext))
