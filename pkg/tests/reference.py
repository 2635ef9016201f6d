"""Naive transcriptions of each metric's definition, used as test oracles.

Deliberately slow and literal: no step forms, no incremental state.
"""

import math
import statistics

import numpy as np


def recall(items, k, category):
    return len(set(items[:k]) & set(category)) / len(category)


def familiarity_direct(items, category, gamma, persist):
    n = len(items)
    total = sum((1 - gamma) * gamma ** (i - 1) * recall(items, i, category) for i in range(1, n + 1))
    if persist:
        total += gamma**n * recall(items, n, category)
    return total


def familiarity_monte_carlo(items, category, gamma, persist, samples, rng):
    """Sample stop ranks from the geometric browsing model.

    Returns (mean, standard error).
    """
    n = len(items)
    at = np.array([0.0] + [recall(items, i, category) for i in range(1, n + 1)])
    stops = rng.geometric(1 - gamma, size=samples)
    beyond = at[n] if persist else 0.0
    values = np.where(stops <= n, at[np.minimum(stops, n)], beyond)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(samples))


def ndcg(items, relevant, k):
    dcg = 0.0
    for i in range(1, min(k, len(items)) + 1):
        if items[i - 1] in relevant:
            dcg += 1 / math.log2(i + 1)
    ideal = 0.0
    for i in range(1, min(k, len(relevant)) + 1):
        ideal += 1 / math.log2(i + 1)
    return dcg / ideal if ideal else 0.0


def rr(items, relevant):
    for i in range(len(items)):
        if items[i] in relevant:
            return 1 / (i + 1)
    return 0.0


def _alpha_gain(prefix, item, relevant, cats_of, alpha):
    if item not in relevant:
        return 0.0
    gain = 0.0
    for c in cats_of(item):
        seen = sum(1 for j in prefix if j in relevant and c in cats_of(j))
        gain += (1 - alpha) ** seen
    return gain


def alpha_dcg(items, relevant, cats_of, alpha, k):
    total = 0.0
    for i in range(min(k, len(items))):
        total += _alpha_gain(items[:i], items[i], relevant, cats_of, alpha) / math.log2(i + 2)
    return total


def alpha_ndcg(items, relevant, cats_of, alpha, k):
    if not relevant:
        return 0.0
    order = []
    pool = sorted(relevant)
    for _ in range(k):
        gains = [(_alpha_gain(order, i, relevant, cats_of, alpha), i) for i in pool if i not in order]
        gains = [g for g in gains if g[0] > 0]
        if not gains:
            break
        best = max(g for g, _ in gains)
        order.append(min(i for g, i in gains if g == best))
    ideal = alpha_dcg(order, relevant, cats_of, alpha, k)
    return alpha_dcg(items, relevant, cats_of, alpha, k) / ideal if ideal else 0.0


def err_ia(items, relevant, categories, k):
    total = 0.0
    for members in categories.values():
        grades = [0.5 if (i in relevant and i in members) else 0.0 for i in items[:k]]
        err = 0.0
        for i, r in enumerate(grades, start=1):
            err += r / i * math.prod(1 - g for g in grades[: i - 1])
        total += err
    return total / len(categories)


def rsp(lists, categories, k):
    rates = []
    for members in categories.values():
        rates.append(sum(len(set(items[:k]) & members) for items in lists.values()) / (len(lists) * len(members)))
    return statistics.pstdev(rates) / statistics.mean(rates)


def reo(lists, relevant_of, categories, k):
    rates = []
    for members in categories.values():
        num = sum(len(set(items[:k]) & members & relevant_of(u)) for u, items in lists.items())
        den = sum(len(members & relevant_of(u)) for u in lists)
        if den:
            rates.append(num / den)
    return statistics.pstdev(rates) / statistics.mean(rates)


def kendall_tau_b(x, y):
    """Tau-b by explicit enumeration of pairs."""
    n = len(x)
    conc = disc = tx = ty = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = (x[i] > x[j]) - (x[i] < x[j])
            dy = (y[i] > y[j]) - (y[i] < y[j])
            if dx == 0 and dy == 0:
                continue
            if dx == 0:
                tx += 1
            elif dy == 0:
                ty += 1
            elif dx == dy:
                conc += 1
            else:
                disc += 1
    return (conc - disc) / math.sqrt((conc + disc + tx) * (conc + disc + ty))
