"""Domain types: rankings, runs, judgments, categories, configuration, reports.

All types are frozen after construction. IDs are opaque strings; no integer
coercion is ever applied.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

from .errors import DomainError

ItemId = str
UserId = str
CategoryId = str


def _check_token(kind: str, token: str) -> None:
    if not isinstance(token, str) or not token:
        raise DomainError(f"{kind} must be a non-empty string, got {token!r}")
    if any(ch.isspace() for ch in token):
        raise DomainError(f"{kind} may not contain whitespace: {token!r}")


class TailPolicy(enum.Enum):
    """What happens to browsing stop mass beyond the last ranked position."""

    LITERAL = "literal"
    PERSIST_BEYOND_END = "persist"


class Aggregation(enum.Enum):
    ARITHMETIC = "arith"
    GEOMETRIC = "geom"


@dataclass(frozen=True)
class Ranking:
    """One user's ordered item list. Rank 1 is ``items[0]``.

    Duplicates are tolerated at construction so that a bad run can still be
    loaded and reported on by :func:`validate_runset`.
    """

    user: UserId
    items: tuple[ItemId, ...]

    def __post_init__(self):
        _check_token("UserId", self.user)
        if not isinstance(self.items, tuple):
            object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise DomainError(f"ranking for user {self.user!r} is empty")
        # whole-list check in C; the per-item loop only runs to name the culprit
        try:
            clean = " ".join(self.items).split() == list(self.items)
        except TypeError:
            clean = False
        if not clean:
            for item in self.items:
                _check_token("ItemId", item)

    def __len__(self):
        return len(self.items)

    def top(self, k: int) -> tuple[ItemId, ...]:
        return self.items[:k]


@dataclass(frozen=True)
class RunSet:
    """A named system's rankings, at most one per user."""

    system_name: str
    rankings: Mapping[UserId, Ranking]

    def __post_init__(self):
        if not self.system_name or any(ch.isspace() for ch in self.system_name):
            raise DomainError(f"invalid system name {self.system_name!r}")
        rankings = dict(self.rankings)
        for user, ranking in rankings.items():
            if ranking.user != user:
                raise DomainError(f"ranking keyed by {user!r} belongs to {ranking.user!r}")
        object.__setattr__(self, "rankings", MappingProxyType(rankings))

    @classmethod
    def from_lists(cls, system_name: str, lists: Mapping[UserId, Iterable[ItemId]]) -> "RunSet":
        return cls(system_name, {u: Ranking(u, tuple(items)) for u, items in lists.items()})

    @property
    def users(self) -> list[UserId]:
        return sorted(self.rankings)

    def __len__(self):
        return len(self.rankings)


@dataclass(frozen=True)
class Qrels:
    """Relevance grades keyed by ``(user, item)``."""

    judgments: Mapping[tuple[UserId, ItemId], int]

    def __post_init__(self):
        judgments = dict(self.judgments)
        for (user, item), grade in judgments.items():
            if not isinstance(grade, int) or grade < 0:
                raise DomainError(f"grade for ({user}, {item}) must be a non-negative int, got {grade!r}")
        object.__setattr__(self, "judgments", MappingProxyType(judgments))
        by_user: dict[UserId, dict[ItemId, int]] = {}
        for (user, item), grade in judgments.items():
            by_user.setdefault(user, {})[item] = grade
        object.__setattr__(self, "_by_user", by_user)
        relevant = {u: frozenset(i for i, g in items.items() if g > 0) for u, items in by_user.items()}
        object.__setattr__(self, "_relevant", relevant)

    def grades(self, user: UserId) -> Mapping[ItemId, int]:
        return self._by_user.get(user, {})

    def relevant(self, user: UserId) -> frozenset[ItemId]:
        """Items with a positive grade for ``user``."""
        return self._relevant.get(user, frozenset())

    @property
    def users(self) -> list[UserId]:
        return sorted(self._by_user)

    def __len__(self):
        return len(self.judgments)


@dataclass(frozen=True)
class CategoryIndex:
    """Category label -> non-empty item set, with an optional catalog."""

    categories: Mapping[CategoryId, frozenset[ItemId]]
    catalog: Optional[frozenset[ItemId]] = None

    def __post_init__(self):
        cats = {}
        for label, items in self.categories.items():
            if not isinstance(label, str) or not label:
                raise DomainError(f"category label must be a non-empty string, got {label!r}")
            items = frozenset(items)
            if not items:
                raise DomainError(f"category {label!r} is empty")
            cats[label] = items
        if not cats:
            raise DomainError("no categories")
        catalog = None if self.catalog is None else frozenset(self.catalog)
        if catalog is not None:
            for label, items in cats.items():
                missing = items - catalog
                if missing:
                    raise DomainError(f"category {label!r} has items outside the catalog: {sorted(missing)[:5]}")
        object.__setattr__(self, "categories", MappingProxyType(cats))
        object.__setattr__(self, "catalog", catalog)
        item_cats: dict[ItemId, list[CategoryId]] = {}
        for label in sorted(cats):
            for item in cats[label]:
                item_cats.setdefault(item, []).append(label)
        object.__setattr__(self, "_item_cats", {i: tuple(c) for i, c in item_cats.items()})

    @property
    def labels(self) -> list[CategoryId]:
        return sorted(self.categories)

    def __getitem__(self, label: CategoryId) -> frozenset[ItemId]:
        try:
            return self.categories[label]
        except KeyError:
            raise DomainError(f"unknown category {label!r}") from None

    def __contains__(self, label):
        return label in self.categories

    def __len__(self):
        return len(self.categories)

    def categories_of(self, item: ItemId) -> tuple[CategoryId, ...]:
        """Sorted labels of the categories containing ``item``."""
        return self._item_cats.get(item, ())


@dataclass(frozen=True)
class EvalConfig:
    gamma: float = 0.9
    cutoff_k: int = 100
    alpha: float = 0.5
    tail_policy: TailPolicy = TailPolicy.LITERAL
    relevance_threshold: int = 4
    aggregation: Aggregation = Aggregation.ARITHMETIC

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not (0.0 < self.alpha < 1.0):
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if int(self.cutoff_k) != self.cutoff_k or self.cutoff_k < 1:
            raise DomainError(f"cutoff_k must be a positive integer, got {self.cutoff_k}")
        if int(self.relevance_threshold) != self.relevance_threshold or self.relevance_threshold < 1:
            raise DomainError(f"relevance_threshold must be an integer >= 1, got {self.relevance_threshold}")
        object.__setattr__(self, "tail_policy", TailPolicy(self.tail_policy))
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))

    def as_metadata(self) -> dict:
        return {
            "gamma": self.gamma,
            "cutoff_k": self.cutoff_k,
            "alpha": self.alpha,
            "tail_policy": self.tail_policy.value,
            "relevance_threshold": self.relevance_threshold,
            "aggregation": self.aggregation.value,
        }

    @classmethod
    def from_metadata(cls, meta: Mapping) -> "EvalConfig":
        keys = ("gamma", "cutoff_k", "alpha", "tail_policy", "relevance_threshold", "aggregation")
        return cls(**{k: meta[k] for k in keys if k in meta})


@dataclass(frozen=True)
class ReportRow:
    system: str
    metric: str
    category: Optional[CategoryId]
    value: float
    log_value: Optional[float] = None

    @property
    def underflow(self) -> bool:
        """True when the linear value is 0 only because exp(log_value) underflowed."""
        return (
            self.log_value is not None
            and self.value == 0.0
            and self.log_value != -math.inf
        )

    def sort_key(self):
        return (self.metric, self.system, self.category or "")


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # "duplicate-item" | "unknown-item"
    user: UserId
    item: ItemId
    rank: int

    def __str__(self):
        return f"{self.kind}: user {self.user} item {self.item} at rank {self.rank}"


@dataclass
class MetricReport:
    """Rows of metric values plus leaderboards, correlations and run metadata."""

    rows: list[ReportRow] = field(default_factory=list)
    orderings: dict[str, list[str]] = field(default_factory=dict)
    correlations: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            key = (row.system, row.metric, row.category)
            if key in seen:
                raise DomainError(f"duplicate report row {key}")
            seen.add(key)

    @property
    def systems(self) -> list[str]:
        return sorted({r.system for r in self.rows})

    @property
    def metrics(self) -> list[str]:
        return sorted({r.metric for r in self.rows})

    def system_rows(self, metric: str) -> list[ReportRow]:
        """System-level rows (no category) for ``metric``."""
        return [r for r in self.rows if r.metric == metric and r.category is None]

    def merged(self, other: "MetricReport") -> "MetricReport":
        meta = dict(self.metadata)
        for key, value in other.metadata.items():
            if key in meta and isinstance(meta[key], dict) and isinstance(value, dict):
                meta[key] = {**meta[key], **value}
            else:
                meta.setdefault(key, value)
        return MetricReport(rows=self.rows + other.rows, metadata=meta)


def validate_runset(run: RunSet, catalog: Optional[Iterable[ItemId]] = None) -> list[Diagnostic]:
    """Report duplicate and (if ``catalog`` is given) out-of-catalog items.

    Returns an empty list for a clean run. Never raises on bad content.
    """
    catalog = None if catalog is None else frozenset(catalog)
    out = []
    for user in run.users:
        seen = set()
        for rank, item in enumerate(run.rankings[user].items, start=1):
            if item in seen:
                out.append(Diagnostic("duplicate-item", user, item, rank))
            seen.add(item)
            if catalog is not None and item not in catalog:
                out.append(Diagnostic("unknown-item", user, item, rank))
    return out
