"""Command line entry point: ``setconv {slln,converge,demo,oracle}``."""
from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import convergence as cv
from . import harness, scenarios
from .convexification import random_instance, shapley_folkman_gap, write_oracle_csv
from .geometry import PointCloud, convex_hull

out_option = click.option("--out", "out", type=click.Path(file_okay=False, path_type=Path),
                          default=Path("out"), show_default=True, help="Output directory.")
seed_option = click.option("--seed", type=int, default=None, help="Random seed.")


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Set convergence, convexification and strong-law experiments."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")


def _finish(ok: bool, message: str) -> None:
    click.echo(message)
    sys.exit(0 if ok else 1)


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="ExperimentConfig JSON file.")
@seed_option
@click.option("--seeds", type=int, default=1, show_default=True,
              help="Number of consecutive seeds to sweep.")
@click.option("--workers", type=int, default=1, show_default=True)
@out_option
@click.option("--svg", is_flag=True, help="Also write a log-log chart per run.")
def slln(config_path: Path, seed, seeds: int, workers: int, out: Path, svg: bool) -> None:
    """Run a strong-law experiment from a config file."""
    try:
        cfg = harness.ExperimentConfig.load(config_path)
    except (ValueError, KeyError, TypeError) as exc:
        raise click.BadParameter(str(exc), param_hint="--config") from exc
    if seed is not None:
        cfg = cfg.with_seed(seed)
    if seeds < 1:
        raise click.BadParameter("must be at least 1", param_hint="--seeds")
    if seeds == 1:
        report = harness.run(cfg)
        harness.emit(report, out, cfg, svg=svg)
        _finish(report.ok, f"seed {cfg.seed}: passed={report.passed()} "
                           f"invariants_ok={report.ok} -> {out}")
    result = harness.sweep(cfg, seeds, workers)
    for rep in result.reports:
        harness.emit(rep, out, cfg.with_seed(rep.seed), svg=svg, stem=f"run_seed{rep.seed}")
    summary = {"seeds": [r.seed for r in result.reports],
               "passed": [r.passed() for r in result.reports],
               "fraction_passed": result.fraction_passed,
               "pass_fraction": result.pass_fraction,
               "invariants_ok": all(r.ok for r in result.reports),
               "ok": result.ok}
    (out / "sweep.json").write_text(json.dumps(summary, indent=2) + "\n")
    _finish(result.ok, f"{sum(summary['passed'])}/{seeds} seeds passed "
                       f"(need {result.pass_fraction:.0%}) -> {out}")


@main.command()
@click.option("--sequence", "seq_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='SetSequence JSON: {"dim", "terms", "tag"}.')
@click.option("--limit", "limit_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help='PointCloud JSON: {"dim", "points"}.')
@click.option("--convex", is_flag=True, help="Treat the limit as the hull of its points.")
@click.option("--tolerance", type=float, default=cv.DEFAULT_TOLERANCE, show_default=True)
@click.option("--window", type=int, default=cv.DEFAULT_WINDOW, show_default=True)
@click.option("--probes", type=int, default=cv.DEFAULT_PROBES, show_default=True)
@click.option("--fisher-quantifier", type=click.Choice(["limit", "ambient"]), default="limit")
@click.option("--wijsman-quantifier", type=click.Choice(["limit", "ambient"]), default="ambient")
@seed_option
@out_option
def converge(seq_path, limit_path, convex, tolerance, window, probes,
             fisher_quantifier, wijsman_quantifier, seed, out: Path) -> None:
    """Diagnose a serialized sequence against a candidate limit."""
    seq = cv.SetSequence.from_json(seq_path.read_text())
    limit = PointCloud.from_json(limit_path.read_text())
    if convex:
        limit = convex_hull(limit)
    probe_set = cv.make_probes(seq, limit, count=probes, seed=seed or 0)
    try:
        report = cv.diagnose(seq, limit, probe_set, tolerance=tolerance, window=window,
                             fisher_quantifier=fisher_quantifier,
                             wijsman_quantifier=wijsman_quantifier)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / "convergence.csv", out / "convergence.json")
    verdicts = ", ".join(f"{k}={'consistent' if v.consistent else 'inconsistent'}"
                         for k, v in report.verdicts.items())
    _finish(True, f"{verdicts} -> {out}")


DEMOS = ("averaging", "spike", "coin-flip", "balls")


@main.command()
@click.argument("name", type=click.Choice(DEMOS))
@seed_option
@out_option
@click.option("--svg", is_flag=True)
def demo(name: str, seed, out: Path, svg: bool) -> None:
    """Run a built-in scenario and check its expected behaviour."""
    out.mkdir(parents=True, exist_ok=True)
    seed = 0 if seed is None else seed
    if name == "coin-flip":
        cfg = harness.ExperimentConfig(scenarios.coin_flip(), 10_000, seed=seed, mode="convex")
        report = harness.run(cfg)
        harness.emit(report, out, cfg, svg=svg, stem="coin_flip")
        _finish(report.ok, f"h_convex(10^4) = {report.rows[-1].h_convex:.4g} -> {out}")
    if name == "averaging":
        sc = scenarios.averaging_scenario()
        report = cv.diagnose(sc.seq, sc.limit, sc.probes)
        against_pair = cv.diagnose(sc.seq, PointCloud([[0.0], [1.0]]))
        report.write(out / "averaging.csv", out / "averaging.json")
        ok = report.verdicts["fisher"].consistent and \
            not against_pair.verdicts["hausdorff"].consistent
        _finish(ok, f"D[n] -> [0,1]: fisher={report.verdicts['fisher'].consistent}; "
                    f"D[n] -> {{0,1}}: hausdorff={against_pair.verdicts['hausdorff'].consistent}")
    if name == "spike":
        sc = scenarios.spike_scenario(seed=seed)
        report = cv.diagnose(sc.seq, sc.limit, sc.probes, window=4)
        report.write(out / "spike.csv", out / "spike.json")
        checks = cv.wijsman_characterization(sc.seq, sc.limit, sc.probes, epsilon=0.02)
        worst = max(c.violations for c in checks)
        ok = not report.verdicts["fisher"].consistent and worst <= 1
        _finish(ok, f"fisher={report.verdicts['fisher'].consistent}, "
                    f"max terms disturbing one probe = {worst}")
    sc = scenarios.shrinking_balls()
    report = cv.diagnose(sc.seq, sc.limit, sc.probes)
    report.write(out / "balls.csv", out / "balls.json")
    ok = all(v.consistent for v in report.verdicts.values())
    _finish(ok, ", ".join(f"{k}={v.consistent}" for k, v in report.verdicts.items()))


@main.command()
@click.option("--count", type=int, default=1000, show_default=True)
@seed_option
@out_option
def oracle(count: int, seed, out: Path) -> None:
    """Shapley-Folkman bound on random small instances, by exact enumeration."""
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(0 if seed is None else seed)
    results, failures = [], 0
    for _ in range(count):
        try:
            results.append(shapley_folkman_gap(random_instance(rng)))
        except AssertionError as exc:
            failures += 1
            click.echo(str(exc), err=True)
    write_oracle_csv(results, out / "oracle.csv")
    _finish(failures == 0, f"{count - failures}/{count} instances within the bound -> {out}")


if __name__ == "__main__":
    main()
