"""Utility, diversity and fairness metrics used as points of comparison.

Per-user metrics take binary qrels. System values average over users that
have at least one relevant judgment; other users are skipped and counted.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .errors import UndefinedMetricError
from .model import CategoryIndex, EvalConfig, Qrels, Ranking, ReportRow, RunSet

log = logging.getLogger(__name__)

NDCG = "ndcg"
RR = "rr"
ALPHA_NDCG = "alpha_ndcg"
ERR_IA = "err_ia"
RSP = "rsp"
REO = "reo"

PER_USER_METRICS = (NDCG, RR, ALPHA_NDCG, ERR_IA)
FAIRNESS_METRICS = (RSP, REO)

FAIRNESS_NOTE = (
    "RSP/REO per-user denominators use the full group size; "
    "no training-set exclusion is applied"
)


def _discount(rank: int) -> float:
    return 1.0 / math.log2(rank + 1)


def ndcg(ranking: Ranking, qrels: Qrels, k: int) -> float:
    relevant = qrels.relevant(ranking.user)
    if not relevant:
        return 0.0
    dcg = sum(_discount(i) for i, item in enumerate(ranking.items[:k], start=1) if item in relevant)
    ideal = sum(_discount(i) for i in range(1, min(k, len(relevant)) + 1))
    return dcg / ideal


def reciprocal_rank(ranking: Ranking, qrels: Qrels) -> float:
    relevant = qrels.relevant(ranking.user)
    for rank, item in enumerate(ranking.items, start=1):
        if item in relevant:
            return 1.0 / rank
    return 0.0


def _alpha_dcg(items, relevant, index: CategoryIndex, alpha: float, k: int) -> float:
    seen: dict[str, int] = {}
    total = 0.0
    for rank, item in enumerate(items[:k], start=1):
        if item not in relevant:
            continue
        gain = 0.0
        for c in index.categories_of(item):
            n = seen.get(c, 0)
            gain += (1.0 - alpha) ** n
            seen[c] = n + 1
        total += gain * _discount(rank)
    return total


def _greedy_ideal(relevant, index: CategoryIndex, alpha: float, k: int) -> list[str]:
    """Greedy max-marginal-gain order over the relevant items; ties by item id."""
    pool = sorted(i for i in relevant if index.categories_of(i))
    seen: dict[str, int] = {}
    order = []
    while pool and len(order) < k:
        best, best_gain = 0, -1.0
        for n, item in enumerate(pool):
            gain = sum((1.0 - alpha) ** seen.get(c, 0) for c in index.categories_of(item))
            if gain > best_gain:
                best, best_gain = n, gain
        item = pool.pop(best)
        for c in index.categories_of(item):
            seen[c] = seen.get(c, 0) + 1
        order.append(item)
    return order


def alpha_ndcg(ranking: Ranking, qrels: Qrels, index: CategoryIndex, alpha: float, k: int) -> float:
    relevant = qrels.relevant(ranking.user)
    if not relevant:
        return 0.0
    ideal = _alpha_dcg(_greedy_ideal(relevant, index, alpha, k), relevant, index, alpha, k)
    if ideal == 0.0:
        return 0.0
    return _alpha_dcg(ranking.items, relevant, index, alpha, k) / ideal


def err_ia(ranking: Ranking, qrels: Qrels, index: CategoryIndex, k: int) -> float:
    """Intent-aware ERR with uniform intent weights and stop probability 1/2 per relevant item."""
    relevant = qrels.relevant(ranking.user)
    # per category: (probability the user is still browsing, accumulated ERR)
    state: dict[str, list[float]] = {}
    for rank, item in enumerate(ranking.items[:k], start=1):
        if item not in relevant:
            continue
        for c in index.categories_of(item):
            s = state.setdefault(c, [1.0, 0.0])
            s[1] += s[0] * 0.5 / rank
            s[0] *= 0.5
    return math.fsum(s[1] for s in state.values()) / len(index)


# -- fairness ----------------------------------------------------------------


def _relative_std(values: Sequence[float]) -> float:
    mean = math.fsum(values) / len(values)
    if mean == 0.0:
        raise UndefinedMetricError("mean group rate is zero")
    var = math.fsum((v - mean) ** 2 for v in values) / len(values)
    return math.sqrt(var) / mean


def exposure_rates(run: RunSet, index: CategoryIndex, k: int) -> dict[str, float]:
    """Per group: mean over users of the fraction of the group in the user's top-k."""
    n_users = len(run.rankings)
    counts = {label: 0 for label in index.labels}
    for user in run.users:
        for item in run.rankings[user].items[:k]:
            for c in index.categories_of(item):
                counts[c] += 1
    return {label: counts[label] / (n_users * len(index[label])) for label in index.labels}


def rsp(run: RunSet, index: CategoryIndex, k: int) -> float:
    """Relative standard deviation of top-k exposure rates across groups."""
    if not run.rankings:
        raise UndefinedMetricError("run has no users")
    return _relative_std(list(exposure_rates(run, index, k).values()))


def opportunity_rates(run: RunSet, qrels: Qrels, index: CategoryIndex, k: int) -> tuple[dict[str, float], list[str]]:
    """Per group: share of its relevant (user, item) pairs ranked in the top-k.

    Returns the rates and the sorted list of groups excluded for having no
    relevant items among the run's users.
    """
    hits = {label: 0 for label in index.labels}
    totals = {label: 0 for label in index.labels}
    for user in run.users:
        relevant = qrels.relevant(user)
        for item in relevant:
            for c in index.categories_of(item):
                totals[c] += 1
        for item in run.rankings[user].items[:k]:
            if item in relevant:
                for c in index.categories_of(item):
                    hits[c] += 1
    excluded = [label for label in index.labels if totals[label] == 0]
    rates = {label: hits[label] / totals[label] for label in index.labels if totals[label]}
    return rates, excluded


def reo(run: RunSet, qrels: Qrels, index: CategoryIndex, k: int) -> float:
    rates, excluded = opportunity_rates(run, qrels, index, k)
    if excluded:
        log.warning("REO: groups without relevant items excluded: %s", ", ".join(excluded))
    if not rates:
        raise UndefinedMetricError("every group lacks relevant items")
    return _relative_std(list(rates.values()))


# -- system level ------------------------------------------------------------


@dataclass
class BaselineResult:
    system_name: str
    values: dict[str, float] = field(default_factory=dict)
    scored_users: int = 0
    excluded_users: int = 0
    excluded_groups: list[str] = field(default_factory=list)
    undefined: dict[str, str] = field(default_factory=dict)


def evaluate_run(
    run: RunSet,
    qrels: Qrels,
    index: CategoryIndex,
    cfg: EvalConfig = EvalConfig(),
    fairness_index: Optional[CategoryIndex] = None,
) -> BaselineResult:
    """All six baselines for one run. ``qrels`` must already be binary."""
    k = cfg.cutoff_k
    groups = index if fairness_index is None else fairness_index
    result = BaselineResult(run.system_name)
    per_user: dict[str, list[float]] = {m: [] for m in PER_USER_METRICS}
    for user in run.users:
        ranking = run.rankings[user]
        if not qrels.relevant(user):
            result.excluded_users += 1
            continue
        per_user[NDCG].append(ndcg(ranking, qrels, k))
        per_user[RR].append(reciprocal_rank(ranking, qrels))
        per_user[ALPHA_NDCG].append(alpha_ndcg(ranking, qrels, index, cfg.alpha, k))
        per_user[ERR_IA].append(err_ia(ranking, qrels, index, k))
    result.scored_users = len(per_user[NDCG])
    for metric, values in per_user.items():
        if values:
            result.values[metric] = math.fsum(values) / len(values)
        else:
            result.undefined[metric] = "no user has a relevant item"
    try:
        result.values[RSP] = rsp(run, groups, k)
    except UndefinedMetricError as exc:
        result.undefined[RSP] = str(exc)
    rates, result.excluded_groups = opportunity_rates(run, qrels, groups, k)
    try:
        if not rates:
            raise UndefinedMetricError("every group lacks relevant items")
        result.values[REO] = _relative_std(list(rates.values()))
    except UndefinedMetricError as exc:
        result.undefined[REO] = str(exc)
    return result


def baseline_rows(results: Sequence[BaselineResult]) -> list[ReportRow]:
    rows = [ReportRow(r.system_name, metric, None, value) for r in results for metric, value in r.values.items()]
    rows.sort(key=ReportRow.sort_key)
    return rows


def baseline_metadata(results: Sequence[BaselineResult]) -> dict:
    meta: dict = {
        "excluded_users": {r.system_name: r.excluded_users for r in results},
        "fairness_definition": FAIRNESS_NOTE,
    }
    groups = {r.system_name: r.excluded_groups for r in results if r.excluded_groups}
    if groups:
        meta["reo_excluded_groups"] = groups
    undefined = {r.system_name: r.undefined for r in results if r.undefined}
    if undefined:
        meta["undefined_metrics"] = undefined
    return meta


def evaluate_runs(
    runs: Sequence[RunSet],
    qrels: Qrels,
    index: CategoryIndex,
    cfg: EvalConfig = EvalConfig(),
    fairness_index: Optional[CategoryIndex] = None,
) -> list[BaselineResult]:
    """Evaluate every run. ``fairness_index`` overrides the groups for RSP/REO."""
    return [evaluate_run(run, qrels, index, cfg, fairness_index) for run in runs]
