"""Benchmark matrix runner, CSV I/O and paired-comparison summaries.

Every case runs ``repetitions`` times serially; the reported time is the
median. Comparisons pair records of two conditions by ``(start, goal)`` and
report ``a / b`` ratios (ratio of means for lengths and times, median of
per-pair ratios for times) plus a Wilcoxon signed-rank test on the times.
"""

from __future__ import annotations

import csv
import gc
import io
import statistics
import time
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .grid import OccupancyGrid
from .planner import HEURISTICS, PLANNERS, GridIndex, PlanningError, plan, validate_route
from .stats import AllZeroDifferencesError, wilcoxon_signed_rank

__all__ = [
    "BenchCase",
    "BenchRecord",
    "Condition",
    "Comparison",
    "ComparisonSummary",
    "SummaryReport",
    "LoadedSystemWarning",
    "UnpairedRecordsError",
    "DEFAULT_COMPARISONS",
    "REFERENCE_GOALS",
    "CSV_COLUMNS",
    "run_matrix",
    "summarize",
    "default_endpoints",
    "default_matrix",
    "to_fine",
    "write_records_csv",
    "read_records_csv",
    "parse_records_csv",
    "load_reference_records",
    "reference_dir",
    "format_index",
    "parse_index",
]

CSV_COLUMNS = (
    "start", "goal", "planner", "heuristic", "variant",
    "length_m", "time_ms_median", "expanded_nodes", "repetitions",
)
VARIANTS = ("fine", "coarse")

# goal triplets of the reference 12-case matrix, all starting from (0, 0, 0)
REFERENCE_GOALS = (
    (0, 0, 10), (0, 0, 30), (0, 10, 30), (0, 20, 10), (0, 20, 20), (0, 20, 30),
    (0, 30, 10), (0, 30, 30), (0, 30, 39), (0, 39, 10), (0, 39, 30), (0, 39, 39),
)


class LoadedSystemWarning(UserWarning):
    """Repetition times spread too widely for the median to be trusted."""


class UnpairedRecordsError(ValueError):
    def __init__(self, comparison: str, orphans):
        self.comparison = comparison
        self.orphans = list(orphans)
        listing = ", ".join(f"{c}:{format_index(s)}->{format_index(g)}" for c, s, g in self.orphans)
        super().__init__(f"{comparison}: unpaired records {listing}")


@dataclass(frozen=True)
class BenchCase:
    start: GridIndex
    goal: GridIndex
    planner: str = "3d"
    heuristic: str = "euclidean"
    variant: str = "coarse"

    def __post_init__(self):
        object.__setattr__(self, "start", GridIndex(*self.start))
        object.__setattr__(self, "goal", GridIndex(*self.goal))
        if self.planner not in PLANNERS:
            raise ValueError(f"unknown planner {self.planner!r}")
        if self.heuristic not in HEURISTICS:
            raise ValueError(f"unknown heuristic {self.heuristic!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown grid variant {self.variant!r}")

    @property
    def condition(self) -> "Condition":
        return Condition(self.planner, self.heuristic, self.variant)


@dataclass
class BenchRecord:
    case: BenchCase
    length_m: float | None
    time_ms_median: float
    expanded_nodes: int | None
    repetitions: int
    error: str | None = None
    times_ms: tuple[float, ...] = field(default=(), repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None


def format_index(idx) -> str:
    return "(" + ",".join(str(int(v)) for v in idx) + ")"


def parse_index(text: str) -> GridIndex:
    parts = text.strip().strip("()").split(",")
    if len(parts) != 3:
        raise ValueError(f"expected '(x,y,z)', got {text!r}")
    return GridIndex(*(int(p) for p in parts))


def run_matrix(
    grid_fine: OccupancyGrid | None,
    grid_coarse: OccupancyGrid | None,
    cases,
    repetitions: int = 5,
) -> list[BenchRecord]:
    """Run every case ``repetitions`` times, serially, in input order."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    grids = {"fine": grid_fine, "coarse": grid_coarse}
    records = []
    for case in cases:
        grid = grids[case.variant]
        if grid is None:
            raise ValueError(f"case needs the {case.variant} grid, which was not given")
        records.append(_run_case(grid, case, repetitions))
    return records


def _run_case(grid: OccupancyGrid, case: BenchCase, repetitions: int) -> BenchRecord:
    times = []
    lengths = set()
    expansions = set()
    route = None
    gc.collect()
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(repetitions):
            t0 = time.perf_counter()
            try:
                route, stats = plan(grid, case.start, case.goal, case.planner, case.heuristic)
            except PlanningError as exc:
                elapsed = (time.perf_counter() - t0) * 1e3
                return BenchRecord(case, None, elapsed, None, 1, error=f"{type(exc).__name__}: {exc}",
                                   times_ms=(elapsed,))
            times.append((time.perf_counter() - t0) * 1e3)
            lengths.add(route.length_m)
            expansions.add(stats.expanded_nodes)
    finally:
        if gc_was_enabled:
            gc.enable()
    if len(lengths) != 1 or len(expansions) != 1:
        raise RuntimeError(f"non-deterministic planner output for {case}: lengths {lengths}")
    validate_route(route, grid, case.start, case.goal)

    median = statistics.median(times)
    if len(times) > 1 and max(times) - min(times) > 5 * median:
        warnings.warn(
            f"repetition spread {min(times):.3f}-{max(times):.3f} ms exceeds 5x median "
            f"{median:.3f} ms for {format_index(case.start)}->{format_index(case.goal)}; system may be loaded",
            LoadedSystemWarning,
            stacklevel=3,
        )
    return BenchRecord(case, lengths.pop(), median, expansions.pop(), repetitions, times_ms=tuple(times))


def to_fine(idx, factor: int) -> GridIndex:
    """Fine cell at the center of a coarse cell (exact for odd factors)."""
    x, y, z = idx
    return GridIndex(factor * x + factor // 2, factor * y + factor // 2, z)


def _lowest_free(grid: OccupancyGrid, x: int, y: int):
    col = grid.occupied[x, y, :]
    free = (~col).nonzero()[0]
    return int(free[0]) if free.size else None


def _snap(grid: OccupancyGrid, x: int, y: int) -> GridIndex:
    # lowest free level above (x, y); else the nearest column that has one
    best = None
    for r in range(max(grid.nx, grid.ny)):
        for cx in range(x - r, x + r + 1):
            for cy in range(y - r, y + r + 1):
                if max(abs(cx - x), abs(cy - y)) != r or not (0 <= cx < grid.nx and 0 <= cy < grid.ny):
                    continue
                z = _lowest_free(grid, cx, cy)
                if z is None:
                    continue
                key = ((cx - x) ** 2 + (cy - y) ** 2, z, cx, cy)
                if best is None or key < best[0]:
                    best = (key, GridIndex(cx, cy, z))
        if best is not None:
            return best[1]
    raise ValueError("grid has no free cell")


def default_endpoints(grid_coarse: OccupancyGrid) -> list[tuple[GridIndex, GridIndex]]:
    """The reference 12 start/goal pairs, scaled to ``grid_coarse``.

    A reference goal ``(a, b, c)`` becomes the ground position ``x = b``,
    ``y = c`` (rescaled from a 40-node span); start and goals sit on the
    lowest free level of their column.
    """
    sx = (grid_coarse.nx - 1) / 39
    sy = (grid_coarse.ny - 1) / 39
    start = _snap(grid_coarse, 0, 0)
    pairs = []
    for _, b, c in REFERENCE_GOALS:
        goal = _snap(grid_coarse, int(round(b * sx)), int(round(c * sy)))
        pairs.append((start, goal))
    return pairs


def default_matrix(
    grid_coarse: OccupancyGrid,
    factor: int,
    fine_conditions=(("layered2d", "euclidean"),),
) -> list[BenchCase]:
    """All planner/heuristic pairs on the coarse grid plus ``fine_conditions`` on the fine grid."""
    endpoints = default_endpoints(grid_coarse)
    cases = []
    for planner in PLANNERS:
        for heuristic in HEURISTICS:
            cases += [BenchCase(s, g, planner, heuristic, "coarse") for s, g in endpoints]
    for planner, heuristic in fine_conditions:
        cases += [
            BenchCase(to_fine(s, factor), to_fine(g, factor), planner, heuristic, "fine")
            for s, g in endpoints
        ]
    return cases


@dataclass(frozen=True)
class Condition:
    planner: str
    heuristic: str
    variant: str

    def __str__(self):
        return f"{self.planner}/{self.heuristic}/{self.variant}"


@dataclass(frozen=True)
class Comparison:
    name: str
    a: Condition
    b: Condition


DEFAULT_COMPARISONS = (
    Comparison("2d_euclidean_vs_manhattan",
               Condition("layered2d", "euclidean", "coarse"), Condition("layered2d", "manhattan", "coarse")),
    Comparison("3d_euclidean_vs_manhattan",
               Condition("3d", "euclidean", "coarse"), Condition("3d", "manhattan", "coarse")),
    Comparison("3d_vs_2d_euclidean",
               Condition("3d", "euclidean", "coarse"), Condition("layered2d", "euclidean", "coarse")),
    Comparison("3d_vs_2d_manhattan",
               Condition("3d", "manhattan", "coarse"), Condition("layered2d", "manhattan", "coarse")),
    Comparison("original_vs_reduced_2d",
               Condition("layered2d", "euclidean", "fine"), Condition("layered2d", "euclidean", "coarse")),
)


@dataclass(frozen=True)
class ComparisonSummary:
    name: str
    a: str
    b: str
    n_pairs: int
    mean_length_ratio: float
    mean_time_ratio: float
    median_time_ratio: float
    time_test: dict | str
    length_test: dict | str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SummaryReport:
    comparisons: tuple[ComparisonSummary, ...]
    failed: tuple[dict, ...] = ()

    def __getitem__(self, name: str) -> ComparisonSummary:
        for c in self.comparisons:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"comparisons": [c.to_dict() for c in self.comparisons], "failed": list(self.failed)}


def _test(pairs) -> dict | str:
    try:
        return wilcoxon_signed_rank(pairs).to_dict()
    except AllZeroDifferencesError:
        return "no difference"


def _pair_key(case: BenchCase, fine_factor: int) -> tuple:
    if case.variant == "fine" and fine_factor > 1:
        return tuple((p.x // fine_factor, p.y // fine_factor, p.z) for p in (case.start, case.goal))
    return (tuple(case.start), tuple(case.goal))


def summarize(records, comparisons=DEFAULT_COMPARISONS, fine_factor: int = 1) -> SummaryReport:
    """Pair records by (start, goal) per comparison; conditions absent from ``records`` are skipped.

    Fine-grid endpoints are divided by ``fine_factor`` horizontally before
    pairing, so a fine case lines up with the coarse case it was derived from.
    """
    if fine_factor < 1:
        raise ValueError("fine_factor must be >= 1")
    by_cond: dict[Condition, dict] = {}
    failed = []
    for rec in records:
        if not rec.ok:
            failed.append({
                "start": format_index(rec.case.start), "goal": format_index(rec.case.goal),
                "condition": str(rec.case.condition), "error": rec.error,
            })
            continue
        bucket = by_cond.setdefault(rec.case.condition, {})
        key = _pair_key(rec.case, fine_factor)
        if key in bucket:
            raise ValueError(f"duplicate record for {rec.case.condition} {key}")
        bucket[key] = rec

    out = []
    for comp in comparisons:
        if comp.a not in by_cond or comp.b not in by_cond:
            continue
        ra, rb = by_cond[comp.a], by_cond[comp.b]
        orphans = [(comp.a, *k) for k in ra if k not in rb] + [(comp.b, *k) for k in rb if k not in ra]
        if orphans:
            raise UnpairedRecordsError(comp.name, orphans)
        keys = list(ra)
        la = [ra[k].length_m for k in keys]
        lb = [rb[k].length_m for k in keys]
        ta = [ra[k].time_ms_median for k in keys]
        tb = [rb[k].time_ms_median for k in keys]
        per_pair = [x / y for x, y in zip(ta, tb) if y > 0]
        out.append(ComparisonSummary(
            name=comp.name,
            a=str(comp.a),
            b=str(comp.b),
            n_pairs=len(keys),
            mean_length_ratio=(sum(la) / sum(lb)) if sum(lb) > 0 else 1.0,
            mean_time_ratio=(sum(ta) / sum(tb)) if sum(tb) > 0 else float("nan"),
            median_time_ratio=statistics.median(per_pair) if per_pair else float("nan"),
            time_test=_test(list(zip(ta, tb))),
            length_test=_test(list(zip(la, lb))),
        ))
    return SummaryReport(tuple(out), tuple(failed))


def write_records_csv(records, path_or_buffer) -> None:
    own = not hasattr(path_or_buffer, "write")
    fh = open(path_or_buffer, "w", newline="") if own else path_or_buffer
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([
                format_index(r.case.start), format_index(r.case.goal),
                r.case.planner, r.case.heuristic, r.case.variant,
                "" if r.length_m is None else repr(r.length_m),
                f"{r.time_ms_median:.6f}",
                "" if r.expanded_nodes is None else r.expanded_nodes,
                r.repetitions,
            ])
    finally:
        if own:
            fh.close()


def read_records_csv(path) -> list[BenchRecord]:
    return parse_records_csv(Path(path).read_text())


def parse_records_csv(text: str) -> list[BenchRecord]:
    lines = [ln for ln in io.StringIO(text) if not ln.startswith("#")]
    records = []
    for row in csv.DictReader(lines):
        case = BenchCase(parse_index(row["start"]), parse_index(row["goal"]),
                         row["planner"], row["heuristic"], row["variant"])
        length = row["length_m"]
        records.append(BenchRecord(
            case,
            float(length) if length else None,
            float(row["time_ms_median"]),
            int(row["expanded_nodes"]) if row["expanded_nodes"] else None,
            int(row["repetitions"]),
            error=None if length else "failed",
        ))
    return records


def reference_dir() -> Path:
    return Path(str(resources.files("uasplan") / "data" / "reference"))


def _read_table(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def load_reference_records(directory=None) -> list[BenchRecord]:
    """Turn the published reference tables into records (times in ms, single repetition).

    The heuristic tables give the four coarse conditions; the map-reduction
    table adds the fine-grid 2D euclidean condition. Its reduced-map column
    must agree with the coarse 2D euclidean data.
    """
    directory = Path(directory) if directory is not None else reference_dir()
    lengths = _read_table(directory / "heuristic_lengths.csv")
    times = _read_table(directory / "heuristic_times.csv")
    records = []
    for lrow, trow in zip(lengths, times, strict=True):
        if (lrow["start"], lrow["goal"]) != (trow["start"], trow["goal"]):
            raise ValueError(f"reference tables disagree on row order: {lrow} vs {trow}")
        start, goal = parse_index(lrow["start"]), parse_index(lrow["goal"])
        for planner, tag in (("layered2d", "2d"), ("3d", "3d")):
            for heuristic in HEURISTICS:
                records.append(BenchRecord(
                    BenchCase(start, goal, planner, heuristic, "coarse"),
                    float(lrow[f"length_{tag}_{heuristic}_m"]),
                    float(trow[f"time_{tag}_{heuristic}_ms"]),
                    None, 1,
                ))
    coarse_2d = {
        (tuple(r.case.start), tuple(r.case.goal)): r
        for r in records if r.case.condition == Condition("layered2d", "euclidean", "coarse")
    }
    reduction = directory / "map_reduction.csv"
    if reduction.exists():
        for row in _read_table(reduction):
            start, goal = parse_index(row["start"]), parse_index(row["goal"])
            ref = coarse_2d.get((start, goal))
            if ref is not None and (
                ref.length_m != float(row["length_reduced_m"]) or ref.time_ms_median != float(row["time_reduced_ms"])
            ):
                raise ValueError(f"map-reduction table disagrees with heuristic tables at {row['goal']}")
            records.append(BenchRecord(
                BenchCase(start, goal, "layered2d", "euclidean", "fine"),
                float(row["length_original_m"]), float(row["time_original_ms"]), None, 1,
            ))
    return records
