"""Rank-biased browsing model and per-user category familiarity.

The user stops at rank ``i`` with probability ``(1 - gamma) * gamma**(i - 1)``.
Familiarity with a category is the expected recall of its items at the stop
rank. Summing by parts turns that into one term per category hit::

    sum_{hits at rank j} (gamma**(j - 1) - T) / |c|

where ``T = gamma**N`` for the literal reading (stop mass beyond the end of
the ranking sees no further items but still counts as unreached) and ``T = 0``
when the user is assumed to keep everything seen by depth ``N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import AbstractSet

from .errors import DomainError
from .model import Ranking, TailPolicy

NEG_INF = -math.inf


@dataclass(frozen=True)
class StopModel:
    gamma: float = 0.9

    def __post_init__(self):
        if not (0.0 < self.gamma < 1.0):
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma}")


def stop_probability(i: int, model: StopModel) -> float:
    if i < 1:
        raise DomainError(f"rank must be >= 1, got {i}")
    return (1.0 - model.gamma) * model.gamma ** (i - 1)


def _check_category(category: AbstractSet) -> None:
    if not category:
        raise DomainError("category is empty")


def recall_at(ranking: Ranking, k: int, category: AbstractSet) -> float:
    """Fraction of ``category`` found in the top ``k`` of ``ranking``."""
    _check_category(category)
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    hits = sum(1 for item in ranking.items[:k] if item in category)
    return hits / len(category)


def hit_ranks(ranking: Ranking, category: AbstractSet) -> list[int]:
    return [rank for rank, item in enumerate(ranking.items, start=1) if item in category]


def familiarity(
    ranking: Ranking,
    category: AbstractSet,
    model: StopModel,
    tail: TailPolicy = TailPolicy.LITERAL,
) -> float:
    _check_category(category)
    tail = TailPolicy(tail)
    gamma = model.gamma
    n = len(ranking.items)
    floor = gamma**n if tail is TailPolicy.LITERAL else 0.0
    size = len(category)
    total = 0.0
    for rank in hit_ranks(ranking, category):
        total += (gamma ** (rank - 1) - floor) / size
    # rounding can leave a sum of exact-ones a hair above 1
    return min(total, 1.0)


def log_familiarity(
    ranking: Ranking,
    category: AbstractSet,
    model: StopModel,
    tail: TailPolicy = TailPolicy.LITERAL,
) -> float:
    """Natural log of :func:`familiarity`; ``-inf`` when it is zero."""
    value = familiarity(ranking, category, model, tail)
    return math.log(value) if value > 0.0 else NEG_INF
