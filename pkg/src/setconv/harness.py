"""Monte Carlo strong-law experiments for simple random sets.

A run draws ``n_max`` i.i.d. atoms and follows, at each checkpoint, the
convexified average (co X_1 + ... + co X_n)/n and the raw average
(X_1 + ... + X_n)/n against the expectation E(F).
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .convergence import make_probes, verdict
from .convexification import (
    build_family_net,
    enclosing_radius,
    gamma_limit,
    quantize,
)
from .geometry import (
    EXACT_CARDINALITY_CAP,
    CardinalityOverflow,
    PointCloud,
    convex_hull,
    directed_excess,
    distances_to,
    greedy_cover,
    hausdorff,
    minkowski_combination,
    minkowski_sum,
    scale,
)
from .random_sets import SimpleRandomSet, aumann_expectation, sample_iid, sample_labels

logger = logging.getLogger(__name__)

MODES = ("convex", "general", "both")
CSV_COLUMNS = ("n", "h_convex", "fisher_e", "fisher_probe_deficit", "wijsman_error",
               "h_raw", "prune_error_bound")
SLACK = 1e-12


class ConfigError(ValueError):
    pass


def default_checkpoints(n_max: int) -> list[int]:
    pts = [1 << k for k in range(n_max.bit_length()) if (1 << k) < n_max]
    return pts + [n_max]


@dataclass
class ExperimentConfig:
    random_set: SimpleRandomSet
    n_max: int
    checkpoints: list[int] | None = None
    seed: int = 0
    prune_delta: float = 0.0
    probe_count: int = 64
    direction_count: int = 720
    tolerance: float = 1e-2
    window: int = 1
    mode: str = "both"
    epsilon: float | None = None
    gamma_slack: float = 0.05
    pass_fraction: float = 0.9
    prune_threshold: int = 2048

    def __post_init__(self):
        if self.checkpoints is None:
            self.checkpoints = default_checkpoints(self.n_max) if self.n_max >= 1 else []
        self.checkpoints = [int(c) for c in self.checkpoints]
        self.validate()

    def validate(self) -> None:
        if self.n_max < 1:
            raise ConfigError("n_max must be positive")
        cps = self.checkpoints
        if not cps:
            raise ConfigError("checkpoints must be nonempty")
        if any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 1:
            raise ConfigError("checkpoints must be positive and strictly increasing")
        if cps[-1] != self.n_max:
            raise ConfigError(f"last checkpoint {cps[-1]} must equal n_max {self.n_max}")
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")
        if not 1 <= self.window <= len(cps):
            raise ConfigError(f"window must be between 1 and {len(cps)} checkpoints")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if self.prune_delta < 0:
            raise ConfigError("prune_delta must be nonnegative")
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if not 0 < self.pass_fraction <= 1:
            raise ConfigError("pass_fraction must lie in (0, 1]")

    def to_json(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["random_set"] = self.random_set.to_json()
        return out

    @classmethod
    def from_json(cls, obj) -> "ExperimentConfig":
        if isinstance(obj, str):
            obj = json.loads(obj)
        obj = dict(obj)
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            obj["random_set"] = SimpleRandomSet.from_json(obj["random_set"])
        except KeyError as exc:
            raise ConfigError("config needs a random_set") from exc
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(**{**{f.name: getattr(self, f.name) for f in fields(self)},
                                   "seed": seed})

    @property
    def includes_convex(self) -> bool:
        return self.mode in ("convex", "both")

    @property
    def includes_general(self) -> bool:
        return self.mode in ("general", "both")


@dataclass
class RunRow:
    n: int
    h_convex: float = math.nan
    fisher_e: float = math.nan
    fisher_probe_deficit: float = math.nan
    wijsman_error: float = math.nan
    h_raw: float = math.nan
    prune_error_bound: float = math.nan
    wall_time: float = 0.0


@dataclass
class RunReport:
    seed: int
    rows: list[RunRow]
    verdicts: dict = field(default_factory=dict)
    gamma_row: dict | None = None
    invariants: dict[str, bool] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.invariants.values())

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def check(self, name: str, holds: bool, message: str = "") -> None:
        holds = bool(holds)
        self.invariants[name] = self.invariants.get(name, True) and holds
        if not holds:
            self.failures.append(f"{name}: {message}" if message else name)
            logger.warning("invariant %s failed: %s", name, message)

    def passed(self) -> bool:
        """All invariants held and every recorded verdict is consistent."""
        return self.ok and all(v["consistent"] for v in self.verdicts.values())

    def row_at(self, n: int) -> RunRow:
        return next(r for r in self.rows if r.n == n)


# -- the two averaging paths -----------------------------------------------


def _counts_at(labels: np.ndarray, atoms: int, checkpoints: Sequence[int]) -> np.ndarray:
    onehot = np.zeros((len(labels), atoms), dtype=np.int64)
    onehot[np.arange(len(labels)), labels] = 1
    return np.cumsum(onehot, axis=0)[np.asarray(checkpoints) - 1]


def _verdict(values, cfg: ExperimentConfig) -> dict:
    return asdict(verdict(np.asarray(values), cfg.tolerance, cfg.window))


def run_convex_slln(cfg: ExperimentConfig, report: RunReport | None = None) -> RunReport:
    """Convexified averages against E(F).

    The average of co X_1, ..., co X_n only depends on how often each atom
    was drawn, so it is formed exactly as sum_j (count_j / n) co A_j.
    """
    if not cfg.includes_convex:
        raise ConfigError("mode does not include the convex path")
    rs = cfg.random_set
    expectation = aumann_expectation(rs).body
    hulls = [convex_hull(v) for v in rs.values]
    labels = sample_labels(rs, cfg.n_max, cfg.seed)
    counts = _counts_at(labels, len(rs), cfg.checkpoints)
    if report is None:
        report = RunReport(cfg.seed, [RunRow(n) for n in cfg.checkpoints])
    start = time.perf_counter()
    for row, cnt in zip(report.rows, counts):
        avg = minkowski_combination(hulls, cnt / row.n)
        row.h_convex = hausdorff(avg, expectation)
        row.wall_time = time.perf_counter() - start
    report.verdicts["convex_hausdorff"] = _verdict(report.column("h_convex"), cfg)
    return report


def _prune_sum(total: PointCloud, radius: float, threshold: int):
    if radius <= 0 or len(total) <= threshold:
        return total, 0.0
    idx, achieved = greedy_cover(total.points, radius)
    if len(idx) == len(total):
        return total, 0.0
    return PointCloud(total.points[idx], canonical=True), achieved


def run_general_slln(cfg: ExperimentConfig, report: RunReport | None = None) -> RunReport:
    """Raw Minkowski averages against E(F), with pruning.

    The unscaled sum S_n is kept as a point cloud.  When it grows past
    ``prune_threshold`` points it is thinned to a subset within
    n * prune_delta / n_max, so at checkpoint n the average has moved by at
    most (sum of achieved radii) / n <= prune_delta.
    """
    if not cfg.includes_general:
        raise ConfigError("mode does not include the general path")
    rs = cfg.random_set
    d = rs.dim
    expectation = aumann_expectation(rs).body
    labels = sample_labels(rs, cfg.n_max, cfg.seed)
    probes = make_probes(None, expectation, count=cfg.probe_count, seed=cfg.seed)
    ref = distances_to(probes.all, expectation)
    radius = max(enclosing_radius(v) for v in rs.values)
    step = cfg.prune_delta / cfg.n_max
    cap = EXACT_CARDINALITY_CAP
    fresh = report is None
    if fresh:
        report = RunReport(cfg.seed, [RunRow(n) for n in cfg.checkpoints])
    rows = iter(report.rows)
    row = next(rows)
    total = rs.values[labels[0]]
    spent = 0.0
    start = time.perf_counter()
    for n in range(1, cfg.n_max + 1):
        if n > 1:
            try:
                total = minkowski_sum(total, rs.values[labels[n - 1]], cap=cap)
            except CardinalityOverflow as exc:
                raise CardinalityOverflow(
                    f"raw sum exceeded {cap} points at n={n}; set prune_delta > 0") from exc
            total, achieved = _prune_sum(total, n * step, cfg.prune_threshold)
            spent += achieved
        if n != row.n:
            continue
        avg = scale(total, 1.0 / n)
        row.prune_error_bound = spent / n
        row.fisher_e = directed_excess(avg, expectation)
        row.h_raw = hausdorff(avg, expectation)
        dist = distances_to(probes.all, avg)
        row.fisher_probe_deficit = float(dist[:len(probes.limit)].max())
        row.wijsman_error = float(np.abs(dist - ref).max())
        if fresh:
            row.wall_time = time.perf_counter() - start
        _general_invariants(report, row, d, radius)
        row = next(rows, None)
    fisher = np.maximum(report.column("fisher_e"), report.column("fisher_probe_deficit"))
    report.verdicts["general_fisher"] = _verdict(fisher, cfg)
    report.verdicts["general_hausdorff"] = _verdict(report.column("h_raw"), cfg)
    report.verdicts["general_wijsman"] = _verdict(report.column("wijsman_error"), cfg)
    return report


def _general_invariants(report: RunReport, row: RunRow, d: int, radius: float) -> None:
    b = row.prune_error_bound
    sf = math.sqrt(d) / row.n * radius
    report.check("fisher_containment", row.fisher_e <= row.h_raw + SLACK,
                 f"n={row.n}: e(raw, E)={row.fisher_e} > h_raw={row.h_raw}")
    if math.isnan(row.h_convex):
        return
    report.check("raw_dominates_convex", row.h_raw >= row.h_convex - b - SLACK,
                 f"n={row.n}: h_raw={row.h_raw} < h_convex={row.h_convex} - {b}")
    report.check("convexification_squeeze", row.h_raw - row.h_convex <= sf + b + SLACK,
                 f"n={row.n}: h_raw - h_convex = {row.h_raw - row.h_convex} > {sf} + {b}")
    report.check("fisher_below_convex", row.fisher_e <= row.h_convex + b + SLACK,
                 f"n={row.n}: e(raw, E)={row.fisher_e} > h_convex + {b}")


def run_quantization_pipeline(cfg: ExperimentConfig, epsilon: float,
                              slack: float | None = None) -> dict:
    """Net the atoms at ``epsilon``, quantize the drawn sequence and compare
    the resulting Gamma body with E(F)."""
    if epsilon <= 0:
        raise ConfigError("epsilon must be positive")
    slack = cfg.gamma_slack if slack is None else slack
    rs = cfg.random_set
    seq = sample_iid(rs, cfg.n_max, cfg.seed)
    net = build_family_net(list(rs.values), epsilon)
    q = quantize(seq, net)
    fractions = q.fractions[-1]
    # Fractions are exact ratios of integers; renormalize against rounding.
    gamma = gamma_limit(net, fractions / fractions.sum())
    h = hausdorff(aumann_expectation(rs).body, gamma.body)
    return {"epsilon": float(epsilon),
            "h_gamma": float(h),
            "slack": float(slack),
            "fractions": [float(f) for f in fractions],
            "centers": list(net.provenance),
            "max_averaged_error": float(q.averaged_error.max()),
            "holds": bool(h <= epsilon + slack),
            "fidelity_holds": bool((q.averaged_error < epsilon).all())}


def run(cfg: ExperimentConfig) -> RunReport:
    """Everything the config asks for, with the cross-mode invariants."""
    report = RunReport(cfg.seed, [RunRow(n) for n in cfg.checkpoints])
    start = time.perf_counter()
    if cfg.includes_convex:
        run_convex_slln(cfg, report)
    if cfg.includes_general:
        run_general_slln(cfg, report)
    for row in report.rows:
        row.wall_time = time.perf_counter() - start
    if cfg.mode == "both":
        # A run that is h-consistent on the convex path must be Fisher-consistent
        # on the raw path, up to the convexification and pruning terms.
        radius = max(enclosing_radius(v) for v in cfg.random_set.values)
        if report.verdicts["convex_hausdorff"]["consistent"]:
            tail = report.rows[-cfg.window:]
            ok = all(max(r.fisher_e, r.fisher_probe_deficit)
                     <= cfg.tolerance + math.sqrt(cfg.random_set.dim) / r.n * radius
                     + r.prune_error_bound + SLACK for r in tail)
            report.check("mode_agreement", ok, "convex path consistent but raw path is not")
    if cfg.epsilon is not None:
        report.gamma_row = run_quantization_pipeline(cfg, cfg.epsilon)
        report.check("gamma_bound", report.gamma_row["holds"],
                     f"h(E, Gamma) = {report.gamma_row['h_gamma']}")
        report.check("quantization_fidelity", report.gamma_row["fidelity_holds"],
                     f"averaged error {report.gamma_row['max_averaged_error']}")
    return report


# -- sweeps ----------------------------------------------------------------


def parallel_map(fn: Callable, items: Iterable, workers: int = 1) -> list:
    """Order-preserving map; ``workers > 1`` uses separate processes."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


@dataclass
class SweepResult:
    reports: list[RunReport]
    pass_fraction: float

    @property
    def fraction_passed(self) -> float:
        return sum(r.passed() for r in self.reports) / len(self.reports)

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.reports) and self.fraction_passed >= self.pass_fraction


def sweep(cfg: ExperimentConfig, seeds: int, workers: int = 1) -> SweepResult:
    """Runs for seeds cfg.seed, cfg.seed + 1, ...; a.s. claims become pass fractions."""
    configs = [cfg.with_seed(cfg.seed + i) for i in range(seeds)]
    return SweepResult(parallel_map(run, configs, workers), cfg.pass_fraction)


# -- output ----------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if math.isnan(v) else repr(float(v))


def _open(path: Path, mode: str = "w"):
    try:
        return path.open(mode, newline="" if "b" not in mode else None)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def write_csv(report: RunReport, path) -> None:
    path = Path(path)
    with _open(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in report.rows:
            writer.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def trailer(report: RunReport, cfg: ExperimentConfig | None = None) -> dict:
    out = {"seed": report.seed,
           "verdicts": report.verdicts,
           "gamma_row": report.gamma_row,
           "invariants": report.invariants,
           "failures": report.failures,
           "passed": report.passed(),
           "wall_time": {str(r.n): r.wall_time for r in report.rows}}
    if cfg is not None:
        out["config"] = cfg.to_json()
    return out


def write_svg(report: RunReport, path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "setconv"
    n = report.column("n")
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, label in (("h_convex", "h convex"), ("h_raw", "h raw"),
                        ("fisher_probe_deficit", "Fisher deficit")):
        y = report.column(name)
        keep = np.isfinite(y) & (y > 0)
        if keep.any():
            ax.loglog(n[keep], y[keep], marker="o", label=label)
    ax.set_xlabel("n")
    ax.set_ylabel("distance to E(F)")
    ax.legend()
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    finally:
        plt.close(fig)


def emit(report: RunReport, out_dir, cfg: ExperimentConfig | None = None, svg: bool = False,
         stem: str = "run") -> dict[str, Path]:
    """Write ``<stem>.csv``, ``<stem>.json`` and optionally ``<stem>.svg``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    paths = {"csv": out / f"{stem}.csv", "json": out / f"{stem}.json"}
    write_csv(report, paths["csv"])
    with _open(paths["json"]) as fh:
        fh.write(json.dumps(trailer(report, cfg), indent=2, sort_keys=True) + "\n")
    if svg:
        paths["svg"] = out / f"{stem}.svg"
        write_svg(report, paths["svg"])
    return paths
