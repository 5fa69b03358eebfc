import json

import numpy as np
import pytest

from setconv.convergence import (
    ProbeSet,
    SetSequence,
    diagnose,
    fisher_metrics,
    hausdorff_metrics,
    make_probes,
    verdict,
    verdicts_from_rows,
    wijsman_characterization,
    wijsman_metrics,
)
from setconv.convexification import repeated_average
from setconv.geometry import (
    DimensionMismatch,
    PointCloud,
    convex_hull,
    hausdorff,
    minkowski_sum,
    scale,
)
from setconv import scenarios

PAIR = PointCloud([[0.0], [1.0]])


def grid(n):
    return PointCloud(np.arange(n + 1)[:, None] / n)


@pytest.fixture(scope="module")
def averages():
    return SetSequence([repeated_average(PAIR, n) for n in range(1, 129)])


def constant(x, n=10):
    return SetSequence([x] * n)


# -- sequences and probes --------------------------------------------------


def test_sequence_validation_and_json():
    with pytest.raises(ValueError):
        SetSequence([])
    with pytest.raises(DimensionMismatch):
        SetSequence([PAIR, PointCloud([[0, 0]])])
    seq = SetSequence([PAIR, grid(2)], tag={"scenario": "x"})
    back = SetSequence.from_json(json.dumps(seq.to_json()))
    assert back.tag == {"scenario": "x"}
    assert all(a == b for a, b in zip(back, seq))


def test_probe_set_rejects_empty():
    with pytest.raises(ValueError):
        ProbeSet(np.empty((0, 1)), np.empty((0, 1)))


def test_default_probes_lie_where_documented():
    limit = convex_hull(PointCloud([[0, 0], [1, 0], [0, 1]]))
    seq = constant(limit.vertices, 2)
    probes = make_probes(seq, limit, count=64, seed=3)
    assert len(probes.exterior) == 64
    assert limit.contains(probes.limit).all()
    assert not limit.contains(probes.exterior, tol=1e-12).any()
    assert (probes.exterior >= -0.25 - 1e-12).all() and (probes.exterior <= 1.25 + 1e-12).all()
    again = make_probes(seq, limit, count=64, seed=3)
    assert np.array_equal(again.exterior, probes.exterior)


# -- Hausdorff -------------------------------------------------------------


def test_constant_sequence_all_zero():
    x = PointCloud([[0, 1], [2, 3]])
    seq = constant(x)
    probes = make_probes(seq, x)
    assert not hausdorff_metrics(seq, x).any()
    e, deficit = fisher_metrics(seq, x, probes)
    assert not e.any() and not deficit.any()
    assert not wijsman_metrics(seq, x, probes).any()


def test_averages_do_not_approach_the_pair(averages):
    h = hausdorff_metrics(averages, PAIR)
    assert (h[1:] >= 0.25).all()


def test_averages_approach_a_sampled_segment(averages):
    fine = grid(128 * 9)
    h = hausdorff_metrics(SetSequence(list(averages)[:16]), fine)
    assert h == pytest.approx([1 / (2 * n) for n in range(1, 17)], abs=1e-12)


def test_dimension_mismatch_is_reported(averages):
    with pytest.raises(DimensionMismatch):
        hausdorff_metrics(averages, PointCloud([[0, 0]]))


# -- Fisher ----------------------------------------------------------------


def test_averages_are_fisher_consistent_with_the_hull(averages):
    limit = convex_hull(PAIR)
    probes = ProbeSet(grid(16).points, np.empty((0, 1)))
    e, deficit = fisher_metrics(averages, limit, probes)
    assert not e.any()
    n = np.arange(1, 129)
    assert (deficit <= 1 / (2 * n) + 1e-12).all()
    assert deficit[15] == 0  # D[16] contains every probe


def test_spike_excess_is_lambda_minus_one():
    sc = scenarios.spike_scenario(1.1)
    e, _ = fisher_metrics(sc.seq, sc.limit, sc.probes)
    assert e == pytest.approx(0.1, abs=1e-12)
    report = diagnose(sc.seq, sc.limit, sc.probes, window=4)
    assert not report.verdicts["fisher"].consistent


def test_fisher_needs_probes(averages):
    probes = ProbeSet(np.empty((0, 1)), np.array([[3.0]]))
    with pytest.raises(ValueError):
        fisher_metrics(averages, PAIR, probes)


def test_quantifier_switch(averages):
    limit = convex_hull(PAIR)
    probes = ProbeSet(np.array([[0.5]]), np.array([[3.0]]))
    _, lim = fisher_metrics(averages, limit, probes, quantifier="limit")
    _, amb = fisher_metrics(averages, limit, probes, quantifier="ambient")
    assert (amb >= lim).all() and amb[0] == pytest.approx(2.0)
    with pytest.raises(ValueError):
        fisher_metrics(averages, limit, probes, quantifier="everywhere")


# -- Wijsman ---------------------------------------------------------------


def test_balls_wijsman_error_is_one_over_n():
    sc = scenarios.shrinking_balls(16)
    w = wijsman_metrics(sc.seq, sc.limit, sc.probes)
    assert w == pytest.approx(1 / np.arange(1, 17), rel=1e-3)


def test_spike_probe_on_the_first_axis():
    sc = scenarios.spike_scenario(1.1)
    probe = ProbeSet(np.empty((0, 3)), np.array([[2.0, 0.0, 0.0]]))
    w = wijsman_metrics(sc.seq, sc.limit, probe)
    assert w[0] == pytest.approx(0.1, abs=1e-12)
    assert w[1:] == pytest.approx(0.0, abs=1e-12)


def test_characterization_constant_sequence():
    x = PointCloud([[0.0], [1.0]])
    probes = ProbeSet(x.points, np.array([[3.0]]))
    checks = wijsman_characterization(constant(x, 4), x, probes, epsilon=0.5)
    assert all(c.holds and c.n0 == 1 for c in checks)


def test_characterization_reciprocal_sequence():
    seq = SetSequence([PointCloud([[1 / n]]) for n in range(1, 11)])
    probes = ProbeSet(np.empty((0, 1)), np.array([[1.0]]))
    (check,) = wijsman_characterization(seq, PointCloud([[0.0]]), probes, epsilon=0.4)
    assert check.holds and check.n0 == 3 and check.violations == 2


def test_characterization_oscillation_fails():
    terms = [PointCloud([[0.9]]) if n % 2 == 0 else PointCloud([[0.0]]) for n in range(1, 21)]
    probes = ProbeSet(np.empty((0, 1)), np.array([[1.0]]))
    (check,) = wijsman_characterization(SetSequence(terms), PointCloud([[0.0]]), probes, 0.4)
    assert not check.holds


def test_characterization_skips_out_of_range_probes():
    probes = ProbeSet(np.empty((0, 1)), np.array([[0.3]]))
    (check,) = wijsman_characterization(constant(PAIR, 3), PointCloud([[0.0]]), probes, 0.5)
    assert check.skipped and not check.holds
    with pytest.raises(ValueError):
        wijsman_characterization(constant(PAIR, 3), PAIR, probes, 0.0)


# -- verdicts --------------------------------------------------------------


def test_verdict_examples(averages):
    assert verdict(np.zeros(5), 1e-9, 5).consistent
    assert not verdict(np.linspace(0, 1, 20), 0.5, 3).consistent
    with pytest.raises(ValueError):
        verdict(np.zeros(5), 0.1, 6)
    limit = convex_hull(PAIR)
    probes = ProbeSet(grid(16).points, np.empty((0, 1)))
    fisher = diagnose(averages, limit, probes, tolerance=0.01, window=8)
    assert fisher.verdicts["fisher"].consistent
    pair = diagnose(averages, PAIR, tolerance=0.01, window=8)
    assert not pair.verdicts["hausdorff"].consistent


def test_report_csv_and_trailer(tmp_path, averages):
    report = diagnose(SetSequence(list(averages)[:8]), convex_hull(PAIR), window=2)
    report.write(tmp_path / "r.csv", tmp_path / "r.json")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "n,e_excess,fisher_probe_deficit,wijsman_error,hausdorff"
    assert len(lines) == 9
    trailer = json.loads((tmp_path / "r.json").read_text())
    assert set(trailer["verdicts"]) == {"hausdorff", "fisher", "wijsman"}
    assert trailer["verdicts"]["fisher"]["window"] == 2


# -- relations between the modes -------------------------------------------


def test_implication_chain_on_jittered_sequences():
    rng = np.random.default_rng(5)
    for _ in range(20):
        sc = scenarios.jittered_sequence(rng)
        report = diagnose(sc.seq, sc.limit, sc.probes, tolerance=1e-2, window=8)
        assert report.verdicts["hausdorff"].consistent
        doubled = verdicts_from_rows(report.rows, 2e-2, 8)
        assert doubled["fisher"].consistent and doubled["wijsman"].consistent


def test_wrong_limit_is_rejected_by_wijsman():
    rng = np.random.default_rng(8)
    tol = 1e-2
    for _ in range(10):
        sc = scenarios.jittered_sequence(rng)
        other = PointCloud(sc.limit.points + np.r_[10 * tol + 0.01, np.zeros(sc.limit.dim - 1)])
        assert hausdorff(other, sc.limit) >= 10 * tol
        report = diagnose(sc.seq, other, make_probes(sc.seq, other), tolerance=tol, window=8)
        assert not report.verdicts["wijsman"].consistent


def test_combinations_of_fisher_sequences():
    # lambda_n X_n + mu_n Y_n against lambda X + mu Y, with X = [0, 1] and Y = {0, 2, 3}.
    tol = 0.02
    ns = range(1, 41)
    y = PointCloud([[0.0], [2.0], [3.0]])
    xs = [repeated_average(PAIR, n) for n in ns]
    lam = [0.5 + 0.01 / n for n in ns]
    mu = [2 - 0.01 / n for n in ns]
    terms = [minkowski_sum(scale(x, a), scale(y, b)) for x, a, b in zip(xs, lam, mu)]
    limit = minkowski_sum(scale(grid(2048), 0.5), scale(y, 2))
    x_rep = diagnose(SetSequence(xs), convex_hull(PAIR), tolerance=tol, window=4)
    assert x_rep.verdicts["fisher"].consistent
    report = diagnose(SetSequence(terms), limit, tolerance=tol * (0.5 + 2 + 1), window=4)
    assert report.verdicts["fisher"].consistent


def test_limits_of_close_sequences_are_close():
    rng = np.random.default_rng(2)
    tol, r = 1e-2, 0.3
    for _ in range(5):
        a = scenarios.jittered_sequence(rng, dim=2)
        shift = np.array([r * 0.9, 0.0])
        b_terms = [PointCloud(t.points + shift) for t in a.seq]
        assert all(hausdorff(x, y) < r for x, y in zip(a.seq, b_terms))
        b_limit = PointCloud(a.limit.points + shift)
        for seq, lim in ((a.seq, a.limit), (SetSequence(b_terms), b_limit)):
            rep = diagnose(seq, lim, tolerance=tol, window=8)
            assert rep.verdicts["wijsman"].consistent
        assert hausdorff(a.limit, b_limit) <= r + tol


def test_wijsman_implies_hausdorff_for_a_finite_family():
    # Terms drawn from a fixed family of D[n] averages converging to [0, 1].
    family = [repeated_average(PAIR, n) for n in (64, 100, 128, 200)]
    rng = np.random.default_rng(0)
    terms = [family[i] for i in rng.integers(0, 4, size=30)]
    limit = convex_hull(PAIR)
    report = diagnose(SetSequence(terms), limit, tolerance=1e-2, window=8)
    assert report.verdicts["wijsman"].consistent
    assert report.verdicts["hausdorff"].consistent


def test_probe_refinement_is_monotone():
    sc = scenarios.jittered_sequence(np.random.default_rng(4), dim=2)
    coarse = sc.probes
    fine = coarse.refine(exterior=np.random.default_rng(1).uniform(-2, 2, size=(50, 2)),
                         limit=sc.limit.points[:1])
    _, d1 = fisher_metrics(sc.seq, sc.limit, coarse)
    _, d2 = fisher_metrics(sc.seq, sc.limit, fine)
    assert (d2 >= d1).all()
    assert (wijsman_metrics(sc.seq, sc.limit, fine) >= wijsman_metrics(sc.seq, sc.limit, coarse)).all()
