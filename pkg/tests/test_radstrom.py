import numpy as np
import pytest

from setconv.geometry import (
    DimensionMismatch,
    PointCloud,
    convex_hull,
    hausdorff,
    minkowski_sum,
    scale,
)
from setconv.radstrom import (
    DirectionGrid,
    SupportVector,
    body_from_support,
    cancellation_check,
    cancellation_gap,
    embed,
    embedded_distance,
    exact_hausdorff_2d,
    expectation_commutes,
    grid_rank,
    isometry_gap_bound,
    linearity_check,
)
from setconv.random_sets import SimpleRandomSet

GRID = DirectionGrid.make(2, 720)
SQUARE = PointCloud([[0, 0], [1, 0], [0, 1], [1, 1]])


def disk(radius=1.0, k=720):
    t = 2 * np.pi * np.arange(k) / k
    return PointCloud(radius * np.column_stack([np.cos(t), np.sin(t)]))


def random_polygon(rng, k=6, spread=1.0):
    return convex_hull(PointCloud(rng.uniform(-spread, spread, size=(k, 2))))


def test_grid_invariants():
    for dim, count in ((1, 2), (2, 360), (3, 500), (5, 300)):
        g = DirectionGrid.make(dim, count)
        assert np.allclose(np.linalg.norm(g.directions, axis=1), 1, atol=1e-12)
        assert len(g) >= 2
    assert GRID.resolution == pytest.approx(np.pi / 720)
    assert not DirectionGrid.make(5, 300).exact_resolution


def test_three_dimensional_covering_radius_is_exact():
    g = DirectionGrid.make(3, 400)
    # No unit vector is farther than the recorded radius from the grid, and
    # some facet centre attains it.
    rng = np.random.default_rng(0)
    u = rng.standard_normal((50_000, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    worst = np.arccos(np.clip((u @ g.directions.T).max(axis=1), -1, 1)).max()
    assert worst <= g.resolution + 1e-12
    assert worst >= 0.7 * g.resolution


def test_embed_examples():
    assert not embed(PointCloud([[0.0, 0.0]]), GRID).values.any()
    assert np.allclose(embed(disk(), GRID).values, 1, atol=1e-12)
    sv = embed(SQUARE, GRID)
    assert sv.values[0] == 1.0          # direction (1, 0)
    assert sv.values[360] == pytest.approx(0.0, abs=1e-15)  # direction (-1, 0)
    with pytest.raises(DimensionMismatch):
        embed(PointCloud([[0.0]]), GRID)


def test_support_is_sublinear_on_symmetric_pairs():
    sv = embed(random_polygon(np.random.default_rng(1)), GRID)
    assert (sv.values[:360] + sv.values[360:] >= -1e-12).all()
    assert (embed(SQUARE, GRID).values >= 0).all()  # contains the origin


def test_embedded_distance_examples():
    x = embed(SQUARE, GRID)
    assert embedded_distance(x, x) == 0
    assert embedded_distance(embed(disk(1), GRID), embed(disk(2), GRID)) == pytest.approx(1, abs=1e-12)
    seg = PointCloud([[-1, 0], [1, 0]])
    assert abs(embedded_distance(embed(seg, GRID), embed(PointCloud([[0, 0]]), GRID)) - 1) <= 1e-2
    with pytest.raises(ValueError):
        embedded_distance(x, embed(SQUARE, DirectionGrid.make(2, 10)))


def test_isometry_bracket_against_exact_planar_distance():
    rng = np.random.default_rng(2)
    coarse = DirectionGrid.make(2, 16)
    for _ in range(200):
        a, b = random_polygon(rng), random_polygon(rng, k=4)
        true = exact_hausdorff_2d(a, b)
        assert true == pytest.approx(hausdorff(a, b), abs=1e-12)
        for g in (coarse, GRID):
            emb = embedded_distance(embed(a, g), embed(b, g))
            assert emb <= true + 1e-9
            assert true - emb <= isometry_gap_bound(a, b, g) + 1e-12


def test_exact_planar_distance_handles_degenerate_polygons():
    seg = PointCloud([[-1, 0], [1, 0]])
    assert exact_hausdorff_2d(seg, PointCloud([[0, 0]])) == 1
    collinear = PointCloud([[0, 0], [1, 0], [2, 0]])
    assert exact_hausdorff_2d(collinear, SQUARE) == pytest.approx(1.0)
    assert exact_hausdorff_2d(collinear, SQUARE) == pytest.approx(
        hausdorff(convex_hull(collinear), convex_hull(SQUARE)))


def test_refinement_is_monotone():
    rng = np.random.default_rng(3)
    a, b = random_polygon(rng), random_polygon(rng)
    g = DirectionGrid.make(2, 8)
    prev = embedded_distance(embed(a, g), embed(b, g))
    for _ in range(6):
        g = g.refine(rng.standard_normal((5, 2)))
        cur = embedded_distance(embed(a, g), embed(b, g))
        assert cur >= prev
        prev = cur
    assert prev <= hausdorff(a, b) + 1e-12


def test_linearity_examples():
    rng = np.random.default_rng(4)
    a, b = random_polygon(rng), random_polygon(rng)
    assert linearity_check(a, b, 1, 0, GRID) == 0
    assert linearity_check(a, b, 0.5, 0.5, GRID) <= 1e-9
    assert linearity_check(a, b, 0, 0, GRID) == 0
    for _ in range(50):
        lam, mu = rng.uniform(0, 3, size=2)
        assert linearity_check(random_polygon(rng), random_polygon(rng), lam, mu, GRID) <= 1e-9


def test_cancellation_examples():
    seg = PointCloud([[0, 0], [1, 0]])
    shifted = PointCloud(seg.points + [0.5, 0])
    assert cancellation_check(seg, seg, disk(), GRID)
    assert cancellation_gap(seg, shifted, disk(), GRID) <= 1e-9
    assert embedded_distance(embed(minkowski_sum(seg, disk()), GRID),
                             embed(minkowski_sum(shifted, disk()), GRID)) == pytest.approx(0.5)


def test_cancellation_sweep():
    rng = np.random.default_rng(5)
    g = DirectionGrid.make(2, 90)
    for _ in range(1000):
        x, z = random_polygon(rng, 4), random_polygon(rng, 4)
        y = x if rng.random() < 0.3 else random_polygon(rng, 4)
        assert cancellation_check(x, y, z, g)
        assert cancellation_gap(x, y, z, g) <= 1e-9


def test_expectation_commutes():
    single = SimpleRandomSet.from_atoms([(1.0, [[0, 0], [1, 2], [3, 1]])])
    assert expectation_commutes(single, GRID) <= 1e-12
    coin = SimpleRandomSet.from_atoms([(0.5, [[0.0], [1.0]]), (0.5, [[0.0], [2.0]])])
    g1 = DirectionGrid.make(1)
    assert expectation_commutes(coin, g1) <= 1e-9
    assert np.allclose(embed(PointCloud([[0.0], [1.5]]), g1).values, [1.5, 0])
    rng = np.random.default_rng(6)
    g3 = DirectionGrid.make(3, 300)
    for _ in range(10):
        p = rng.dirichlet(np.ones(5))
        rs = SimpleRandomSet.from_atoms([(q, rng.normal(size=(4, 3))) for q in p])
        assert expectation_commutes(rs, g3) <= 1e-9


def test_cone_closure_round_trip():
    rng = np.random.default_rng(7)
    g = DirectionGrid.make(2, 64)
    a, b = random_polygon(rng), random_polygon(rng)
    lam, mu = 0.7, 1.9
    combo = lam * embed(a, g) + mu * embed(b, g)
    assert isinstance(combo, SupportVector)
    body = body_from_support(combo)
    target = convex_hull(minkowski_sum(scale(a.vertices, lam), scale(b.vertices, mu)))
    assert embedded_distance(embed(target, g), combo) <= 1e-9
    assert embedded_distance(embed(body, g), combo) <= 1e-9
    # The grid polytope circumscribes the combination and shrinks onto it.
    assert convex_hull(body).contains(target.vertices.points).all()
    assert hausdorff(convex_hull(body), target) <= 0.05
    with pytest.raises(ValueError):
        embed(a, g) * -1


def test_rank_of_combinations_is_bounded():
    rng = np.random.default_rng(8)
    g = DirectionGrid.make(2, 32)
    family = [embed(random_polygon(rng), g) for _ in range(3)]
    combos = family + [a * rng.uniform() + b * rng.uniform() for a in family for b in family]
    assert grid_rank(combos) == grid_rank(family) == 3
    many = [embed(random_polygon(rng), g) for _ in range(60)]
    assert grid_rank(many) <= len(g)


def test_support_vector_csv(tmp_path):
    g = DirectionGrid.make(2, 4)
    embed(SQUARE, g).to_csv(tmp_path / "sv.csv")
    rows = (tmp_path / "sv.csv").read_text().splitlines()
    assert rows[0] == "u0,u1,value" and len(rows) == 5
    assert [float(r.split(",")[-1]) for r in rows[1:]] == pytest.approx([1, 1, 0, 0], abs=1e-15)
