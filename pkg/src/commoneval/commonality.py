"""Population commonality: the probability that every user becomes familiar
with a category, kept on the natural-log scale.

Per-category values are sums of per-user log familiarities, with ``-inf`` as
an absorbing value for any user who never reaches the category. Categories
are combined by an arithmetic mean (computed through a max-shifted
log-sum-exp) and, as a diagnostic, a geometric mean.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import _kernels
from .browsing import StopModel
from .errors import DomainError
from .model import (
    Aggregation,
    CategoryId,
    CategoryIndex,
    EvalConfig,
    ReportRow,
    RunSet,
    TailPolicy,
)

NEG_INF = -math.inf

METRIC = "commonality"
METRIC_GEOMETRIC = "commonality_geom"


@dataclass(frozen=True)
class EncodedRun:
    """Integer encoding of a run restricted to what familiarity needs.

    Items outside every selected category share one code with no categories.
    """

    users: tuple[str, ...]
    labels: tuple[CategoryId, ...]
    items: np.ndarray
    offsets: np.ndarray
    item_cat_ptr: np.ndarray
    item_cat_idx: np.ndarray
    cat_sizes: np.ndarray


def encode_run(run: RunSet, index: CategoryIndex, labels: Optional[Sequence[CategoryId]] = None) -> EncodedRun:
    labels = tuple(index.labels if labels is None else labels)
    for label in labels:
        index[label]  # raises on unknown labels
    members: dict[str, list[int]] = {}
    for c, label in enumerate(labels):
        for item in index[label]:
            members.setdefault(item, []).append(c)
    codes = {item: n for n, item in enumerate(sorted(members))}
    other = len(codes)
    ptr = [0]
    flat = []
    for item in sorted(members):
        flat.extend(members[item])
        ptr.append(len(flat))
    ptr.append(len(flat))  # the "no category" code

    users = tuple(run.users)
    offsets = np.zeros(len(users) + 1, dtype=np.int64)
    chunks = []
    for n, user in enumerate(users):
        items = run.rankings[user].items
        if not items:
            raise DomainError(f"user {user!r} has an empty ranking")
        chunks.append([codes.get(item, other) for item in items])
        offsets[n + 1] = offsets[n] + len(items)
    flat_items = np.fromiter((c for chunk in chunks for c in chunk), dtype=np.int64, count=int(offsets[-1]))
    return EncodedRun(
        users=users,
        labels=labels,
        items=flat_items,
        offsets=offsets,
        item_cat_ptr=np.asarray(ptr, dtype=np.int64),
        item_cat_idx=np.asarray(flat, dtype=np.int64),
        cat_sizes=np.asarray([len(index[label]) for label in labels], dtype=np.int64),
    )


def familiarity_table(
    run: RunSet,
    index: CategoryIndex,
    model: StopModel,
    tail: TailPolicy = TailPolicy.LITERAL,
    labels: Optional[Sequence[CategoryId]] = None,
    backend: Optional[str] = None,
) -> tuple[tuple[str, ...], tuple[CategoryId, ...], np.ndarray]:
    """Familiarity of every user (rows, sorted) with every category (columns)."""
    enc = encode_run(run, index, labels)
    kernels = _kernels.get_backend(backend)
    table = kernels.familiarity_matrix(
        enc.items,
        enc.offsets,
        enc.item_cat_ptr,
        enc.item_cat_idx,
        enc.cat_sizes,
        float(model.gamma),
        TailPolicy(tail) is TailPolicy.PERSIST_BEYOND_END,
    )
    np.minimum(table, 1.0, out=table)
    return enc.users, enc.labels, table


def log_commonality_table(
    run: RunSet,
    index: CategoryIndex,
    model: StopModel,
    tail: TailPolicy = TailPolicy.LITERAL,
    labels: Optional[Sequence[CategoryId]] = None,
    backend: Optional[str] = None,
) -> dict[CategoryId, float]:
    if not run.rankings:
        raise DomainError(f"run {run.system_name!r} has no users")
    _, labels, table = familiarity_table(run, index, model, tail, labels, backend)
    sums = _kernels.get_backend(backend).log_column_sums(np.ascontiguousarray(table))
    return {label: float(v) for label, v in zip(labels, sums)}


def log_commonality_category(
    run: RunSet,
    category: CategoryId,
    index: CategoryIndex,
    model: StopModel,
    tail: TailPolicy = TailPolicy.LITERAL,
) -> float:
    """Sum over the run's users of log familiarity with ``category``."""
    if category not in index:
        raise DomainError(f"unknown category {category!r}")
    return log_commonality_table(run, index, model, tail, [category])[category]


def log_mean_exp(log_values: Iterable[float]) -> float:
    """``log(mean(exp(v)))`` without underflow."""
    values = list(log_values)
    if not values:
        raise DomainError("no values to average")
    top = max(values)
    if top == NEG_INF:
        return NEG_INF
    return top + math.log(math.fsum(math.exp(v - top) for v in values)) - math.log(len(values))


def mean_commonality(
    per_category: Mapping[CategoryId, float],
    aggregation: Aggregation = Aggregation.ARITHMETIC,
) -> tuple[float, float]:
    """Mean over categories of per-category log commonality.

    Returns ``(linear, log)`` for the requested aggregation. The linear value
    is ``exp(log)`` and may underflow to 0.
    """
    if not per_category:
        raise DomainError("empty category set")
    values = [per_category[c] for c in sorted(per_category)]
    if Aggregation(aggregation) is Aggregation.ARITHMETIC:
        log_mean = log_mean_exp(values)
    elif NEG_INF in values:
        log_mean = NEG_INF
    else:
        log_mean = math.fsum(values) / len(values)
    return math.exp(log_mean), log_mean


@dataclass(frozen=True)
class CommonalityResult:
    system_name: str
    per_category: Mapping[CategoryId, float]
    mean_linear: float  # arithmetic mean of exp(per-category)
    mean_log: float  # mean of per-category logs (log of geometric mean)
    arithmetic_log: float  # log(mean_linear), finite even when mean_linear underflows

    @property
    def geometric_linear(self) -> float:
        return math.exp(self.mean_log)


def commonality(run: RunSet, index: CategoryIndex, cfg: EvalConfig = EvalConfig(), backend=None) -> CommonalityResult:
    per_category = log_commonality_table(run, index, StopModel(cfg.gamma), cfg.tail_policy, backend=backend)
    linear, arith_log = mean_commonality(per_category, Aggregation.ARITHMETIC)
    _, geom_log = mean_commonality(per_category, Aggregation.GEOMETRIC)
    return CommonalityResult(run.system_name, per_category, linear, geom_log, arith_log)


def thread_count() -> int:
    raw = os.environ.get("COMMONEVAL_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def result_rows(result: CommonalityResult) -> list[ReportRow]:
    rows = [
        ReportRow(result.system_name, METRIC, label, math.exp(value), value)
        for label, value in sorted(result.per_category.items())
    ]
    rows.append(ReportRow(result.system_name, METRIC, None, result.mean_linear, result.arithmetic_log))
    rows.append(ReportRow(result.system_name, METRIC_GEOMETRIC, None, result.geometric_linear, result.mean_log))
    return rows


def commonality_results(
    runs: Sequence[RunSet],
    index: CategoryIndex,
    cfg: EvalConfig = EvalConfig(),
    threads: Optional[int] = None,
) -> list[CommonalityResult]:
    threads = thread_count() if threads is None else max(1, threads)
    if threads == 1 or len(runs) < 2:
        return [commonality(run, index, cfg) for run in runs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda run: commonality(run, index, cfg), runs))


def commonality_report(
    runs: Sequence[RunSet],
    index: CategoryIndex,
    cfg: EvalConfig = EvalConfig(),
    threads: Optional[int] = None,
) -> list[ReportRow]:
    """Per-(system, category) log commonality plus both per-system means.

    Rows for category ``None`` are the system-level means: ``commonality``
    carries the arithmetic mean and ``commonality_geom`` the geometric one.
    """
    rows = []
    for result in commonality_results(runs, index, cfg, threads):
        rows.extend(result_rows(result))
    rows.sort(key=ReportRow.sort_key)
    return rows
