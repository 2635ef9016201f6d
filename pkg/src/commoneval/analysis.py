"""Leaderboards, Kendall tau-b agreement between them, and per-category tables."""

from __future__ import annotations

import enum
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy import stats

from .commonality import METRIC as COMMONALITY
from .commonality import METRIC_GEOMETRIC as COMMONALITY_GEOM
from .errors import CommonevalError, DomainError
from .model import Aggregation, MetricReport, ReportRow

log = logging.getLogger(__name__)

SIGNIFICANCE = 0.05
EXACT_P_LIMIT = 10


class Direction(enum.Enum):
    HIGHER_BETTER = "higher"
    LOWER_BETTER = "lower"


DIRECTIONS = {
    "ndcg": Direction.HIGHER_BETTER,
    "rr": Direction.HIGHER_BETTER,
    "alpha_ndcg": Direction.HIGHER_BETTER,
    "err_ia": Direction.HIGHER_BETTER,
    COMMONALITY: Direction.HIGHER_BETTER,
    COMMONALITY_GEOM: Direction.HIGHER_BETTER,
    "rsp": Direction.LOWER_BETTER,
    "reo": Direction.LOWER_BETTER,
}


def direction_of(metric: str) -> Direction:
    return DIRECTIONS.get(metric, Direction.HIGHER_BETTER)


@dataclass(frozen=True)
class SystemScore:
    system_name: str
    metric_name: str
    value: float


@dataclass(frozen=True)
class Leaderboard:
    metric_name: str
    entries: tuple[tuple[str, float], ...]
    direction: Direction
    ties: tuple[tuple[str, ...], ...] = ()

    @property
    def systems(self) -> list[str]:
        return [s for s, _ in self.entries]

    @property
    def has_ties(self) -> bool:
        return bool(self.ties)

    def values(self) -> dict[str, float]:
        return dict(self.entries)


def rank_systems(
    scores: Union[Sequence[SystemScore], Mapping[str, float]],
    direction: Direction = Direction.HIGHER_BETTER,
    metric_name: Optional[str] = None,
) -> Leaderboard:
    """Order systems best-first. Ties break by system name and are recorded."""
    if isinstance(scores, Mapping):
        pairs = list(scores.items())
    else:
        pairs = [(s.system_name, s.value) for s in scores]
        names = {s.metric_name for s in scores}
        if metric_name is None and len(names) == 1:
            metric_name = names.pop()
    seen = set()
    for system, _ in pairs:
        if system in seen:
            raise DomainError(f"duplicate system {system!r}")
        seen.add(system)
    sign = -1.0 if direction is Direction.HIGHER_BETTER else 1.0
    pairs.sort(key=lambda p: (sign * p[1], p[0]))
    groups: dict[float, list[str]] = {}
    for system, value in pairs:
        groups.setdefault(value, []).append(system)
    ties = tuple(tuple(g) for g in groups.values() if len(g) > 1)
    return Leaderboard(metric_name or "", tuple(pairs), Direction(direction), ties)


class KendallResult(NamedTuple):
    tau: float
    p_value: float


def _oriented(board: Leaderboard, raw_direction: bool) -> dict[str, float]:
    values = board.values()
    if raw_direction or board.direction is Direction.HIGHER_BETTER:
        return values
    return {s: -v for s, v in values.items()}


def kendall_tau(a: Leaderboard, b: Leaderboard, raw_direction: bool = True) -> KendallResult:
    """Tie-adjusted tau-b between two leaderboards over the same systems.

    The p-value is two-sided from the normal approximation with tie-corrected
    variance. With ``raw_direction=False``, lower-is-better metrics are
    negated first so that tau compares best-to-worst orderings.
    """
    va, vb = _oriented(a, raw_direction), _oriented(b, raw_direction)
    if set(va) != set(vb):
        missing = sorted(set(va) ^ set(vb))
        raise DomainError(f"leaderboards cover different systems: {missing}")
    if len(va) < 2:
        raise DomainError("need >= 2 systems")
    systems = sorted(va)
    x = np.array([va[s] for s in systems], dtype=float)
    y = np.array([vb[s] for s in systems], dtype=float)
    if len(set(x)) == 1 or len(set(y)) == 1:
        log.warning("tau undefined for constant leaderboard (%s vs %s); reporting 0", a.metric_name, b.metric_name)
        return KendallResult(0.0, 1.0)
    # tau from integer pair counts, so tau(a, a) is exactly 1
    upper = np.triu_indices(len(x), 1)
    dx = np.sign(x[:, None] - x[None, :])[upper].astype(np.int64)
    dy = np.sign(y[:, None] - y[None, :])[upper].astype(np.int64)
    tau = int((dx * dy).sum()) / math.sqrt(int(np.count_nonzero(dx)) * int(np.count_nonzero(dy)))
    p_value = stats.kendalltau(x, y, variant="b", method="asymptotic").pvalue
    return KendallResult(tau, float(p_value))


# -- correlation matrix ------------------------------------------------------


def _board_value(row: ReportRow) -> float:
    # commonality ranks on the log scale: monotone in the linear mean and immune to underflow
    if row.metric in (COMMONALITY, COMMONALITY_GEOM) and row.log_value is not None:
        return row.log_value
    return row.value


def leaderboards(
    report: MetricReport,
    aggregation: Aggregation = Aggregation.ARITHMETIC,
    metrics: Optional[Iterable[str]] = None,
) -> dict[str, Leaderboard]:
    """One leaderboard per system-level metric.

    Commonality enters once, as ``commonality``, using the arithmetic or
    geometric mean per ``aggregation``.
    """
    source_for = {}
    for metric in report.metrics:
        if metric == COMMONALITY_GEOM:
            continue
        if not report.system_rows(metric):
            continue
        source_for[metric] = metric
    if COMMONALITY in source_for and Aggregation(aggregation) is Aggregation.GEOMETRIC:
        source_for[COMMONALITY] = COMMONALITY_GEOM
    if metrics is not None:
        wanted = list(metrics)
        unknown = [m for m in wanted if m not in source_for]
        if unknown:
            raise DomainError(f"metrics not in report: {unknown}")
        source_for = {m: source_for[m] for m in wanted}
    boards = {}
    for metric, source in source_for.items():
        values = {row.system: _board_value(row) for row in report.system_rows(source)}
        boards[metric] = rank_systems(values, direction_of(metric), metric)
    return boards


@dataclass
class CorrelationMatrix:
    metrics: list[str]
    systems: list[str]
    cells: dict[tuple[str, str], KendallResult] = field(default_factory=dict)
    raw_direction: bool = True
    aggregation: Aggregation = Aggregation.ARITHMETIC

    @property
    def approximate(self) -> bool:
        """p-values come from the normal approximation; flagged for small n."""
        return len(self.systems) < EXACT_P_LIMIT

    def __getitem__(self, pair: tuple[str, str]) -> KendallResult:
        return self.cells[pair]

    def metadata(self) -> dict:
        return {
            "tau_variant": "b",
            "p_value_method": "normal-approximation",
            "p_value_approximate_small_n": self.approximate,
            "n_systems": len(self.systems),
            "raw_direction": self.raw_direction,
            "commonality_aggregation": self.aggregation.value,
        }


def correlation_matrix(
    report: MetricReport,
    aggregation: Aggregation = Aggregation.ARITHMETIC,
    raw_direction: bool = True,
    metrics: Optional[Iterable[str]] = None,
) -> CorrelationMatrix:
    boards = leaderboards(report, aggregation, metrics)
    if len(boards) < 2:
        raise CommonevalError("need >= 2 metrics")
    names = sorted(boards)
    systems = sorted(boards[names[0]].systems)
    for name in names[1:]:
        if sorted(boards[name].systems) != systems:
            raise DomainError(f"metric {name!r} does not cover the same systems as {names[0]!r}")
    if len(systems) < 2:
        raise CommonevalError("need >= 2 systems")
    matrix = CorrelationMatrix(names, systems, raw_direction=raw_direction, aggregation=Aggregation(aggregation))
    for i, a in enumerate(names):
        matrix.cells[(a, a)] = KendallResult(1.0, 0.0)
        for b in names[i + 1 :]:
            result = kendall_tau(boards[a], boards[b], raw_direction)
            matrix.cells[(a, b)] = result
            matrix.cells[(b, a)] = result
    return matrix


def with_correlations(report: MetricReport, matrix: CorrelationMatrix) -> MetricReport:
    boards = leaderboards(report, matrix.aggregation, matrix.metrics)
    return MetricReport(
        rows=list(report.rows),
        orderings={m: boards[m].systems for m in matrix.metrics},
        correlations={pair: (r.tau, r.p_value) for pair, r in matrix.cells.items()},
        metadata={**report.metadata, "correlation": matrix.metadata()},
    )


def _cell(result: KendallResult, diagonal: bool) -> str:
    mark = "**" if not diagonal and result.p_value < SIGNIFICANCE else ""
    return f"{result.tau:.4f}{mark}"


def write_matrix(matrix: CorrelationMatrix, fmt: str = "csv") -> str:
    """Metric x metric tau grid; ``**`` marks p < 0.05."""
    if fmt == "csv":
        out = io.StringIO()
        for key, value in sorted(matrix.metadata().items()):
            out.write(f"# {key}={json.dumps(value)}\n")
        out.write(",".join(["metric", *matrix.metrics]) + "\n")
        for a in matrix.metrics:
            cells = [_cell(matrix.cells[(a, b)], a == b) for b in matrix.metrics]
            out.write(",".join([a, *cells]) + "\n")
        return out.getvalue()
    if fmt == "json":
        payload = {
            "metadata": matrix.metadata(),
            "metrics": matrix.metrics,
            "systems": matrix.systems,
            "tau": [[round(matrix.cells[(a, b)].tau, 6) for b in matrix.metrics] for a in matrix.metrics],
            "p_value": [[round(matrix.cells[(a, b)].p_value, 6) for b in matrix.metrics] for a in matrix.metrics],
            "significant": [
                [a != b and matrix.cells[(a, b)].p_value < SIGNIFICANCE for b in matrix.metrics]
                for a in matrix.metrics
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown format {fmt!r}")


# -- disaggregation and scatter ----------------------------------------------


class DisaggRow(NamedTuple):
    system: str
    category: Optional[str]  # None marks the per-system mean line
    log_value: float

    @property
    def value(self) -> float:
        return math.exp(self.log_value)


def disaggregate(
    report: MetricReport,
    systems: Sequence[str],
    aggregation: Aggregation = Aggregation.ARITHMETIC,
) -> list[DisaggRow]:
    """Per-category commonality for ``systems``, sorted by category then system,
    followed by one mean line per system."""
    present = {r.system for r in report.rows if r.metric == COMMONALITY}
    for system in systems:
        if system not in present:
            raise DomainError(f"no commonality rows for system {system!r}")
    wanted = set(systems)
    rows = [
        DisaggRow(r.system, r.category, r.log_value)
        for r in report.rows
        if r.metric == COMMONALITY and r.category is not None and r.system in wanted
    ]
    rows.sort(key=lambda r: (r.category, r.system))
    mean_metric = COMMONALITY if Aggregation(aggregation) is Aggregation.ARITHMETIC else COMMONALITY_GEOM
    means = {r.system: r.log_value for r in report.system_rows(mean_metric) if r.system in wanted}
    rows.extend(DisaggRow(s, None, means[s]) for s in sorted(means))
    return rows


class ScatterPoint(NamedTuple):
    system: str
    ndcg: float
    commonality_log: float


def scatter(
    report: MetricReport,
    systems: Optional[Sequence[str]] = None,
    aggregation: Aggregation = Aggregation.ARITHMETIC,
) -> list[ScatterPoint]:
    """Mean NDCG against mean log commonality, one point per system."""
    mean_metric = COMMONALITY if Aggregation(aggregation) is Aggregation.ARITHMETIC else COMMONALITY_GEOM
    ndcg = {r.system: r.value for r in report.system_rows("ndcg")}
    comm = {r.system: r.log_value for r in report.system_rows(mean_metric)}
    names = sorted(set(ndcg) & set(comm)) if systems is None else list(systems)
    for system in names:
        if system not in ndcg or system not in comm:
            raise DomainError(f"system {system!r} lacks ndcg or commonality rows")
    return [ScatterPoint(s, ndcg[s], comm[s]) for s in sorted(names)]
