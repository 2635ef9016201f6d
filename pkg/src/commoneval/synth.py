"""Seeded synthetic worlds and run families for desk-scale experiments.

Every random draw comes from a substream keyed by (seed, purpose, user), so a
user's data does not depend on how many other users exist or on the order in
which they are generated.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DomainError
from .ingest import atomic_write, iter_run_file, write_categories, write_qrels
from .model import CategoryIndex, Qrels, RunSet

RELEVANT_GRADES = (4, 5)
DISLIKED_GRADES = (1, 2, 3)


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n_users: int = 1000
    n_items: int = 2000
    n_categories: int = 8
    category_size: int = 25
    popularity_exponent: float = 1.0
    relevance_density: float = 0.01
    disjoint: bool = True
    # the first ``popular_categories`` categories are filled from the most popular items
    popular_categories: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        for name in ("n_users", "n_items", "n_categories", "category_size"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")
        if self.popularity_exponent < 0:
            raise DomainError("popularity_exponent must be >= 0")
        if not 0.0 < self.relevance_density < 1.0:
            raise DomainError("relevance_density must lie in (0, 1)")
        if self.category_size > self.n_items:
            raise DomainError("category_size exceeds n_items")
        if self.disjoint and self.n_categories * self.category_size > self.n_items:
            raise DomainError("disjoint categories do not fit in the catalog")
        if not 0 <= self.popular_categories <= self.n_categories:
            raise DomainError("popular_categories must lie in [0, n_categories]")
        if 2 * self.relevant_per_user > self.n_items:
            raise DomainError("relevance_density too high for the catalog")

    @property
    def relevant_per_user(self) -> int:
        return max(1, round(self.relevance_density * self.n_items))


@dataclass(frozen=True)
class World:
    spec: SynthSpec
    catalog: tuple[str, ...]
    users: tuple[str, ...]
    index: CategoryIndex
    qrels: Qrels
    popularity: dict[str, int]

    def relevant(self, user: str) -> frozenset[str]:
        return frozenset(i for i, g in self.qrels.grades(user).items() if g >= RELEVANT_GRADES[0])


def substream(seed: int, *labels: str) -> np.random.Generator:
    digest = hashlib.sha256("\x1f".join(labels).encode()).digest()
    words = [seed & 0xFFFFFFFF, seed >> 32] + [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


def _ids(prefix: str, n: int) -> tuple[str, ...]:
    width = len(str(n - 1))
    return tuple(f"{prefix}{k:0{width}d}" for k in range(n))


def category_label(c: int, n: int) -> str:
    return f"cat{c:0{len(str(n - 1))}d}"


def synth_world(spec: SynthSpec) -> World:
    catalog = _ids("i", spec.n_items)
    users = _ids("u", spec.n_users)

    # Zipf weights over a seeded popularity order, independent of item ids
    order = substream(spec.seed, "popularity").permutation(spec.n_items)
    weights = np.empty(spec.n_items)
    weights[order] = (1.0 + np.arange(spec.n_items)) ** -spec.popularity_exponent
    probs = weights / weights.sum()

    rng = substream(spec.seed, "categories")
    taken: set[int] = set()
    categories = {}
    for c in range(spec.n_categories):
        if c < spec.popular_categories:
            pool = [int(i) for i in order if not (spec.disjoint and int(i) in taken)]
            members = pool[: spec.category_size]
        else:
            pool = np.array([i for i in range(spec.n_items) if not (spec.disjoint and i in taken)])
            members = [int(i) for i in rng.choice(pool, size=spec.category_size, replace=False)]
        taken.update(members)
        categories[category_label(c, spec.n_categories)] = frozenset(catalog[i] for i in members)

    m = spec.relevant_per_user
    judgments = {}
    rated = np.zeros(spec.n_items, dtype=np.int64)
    for user in users:
        r = substream(spec.seed, "qrels", user)
        picks = r.choice(spec.n_items, size=2 * m, replace=False, p=probs)
        liked = r.integers(RELEVANT_GRADES[0], RELEVANT_GRADES[-1] + 1, size=m)
        disliked = r.integers(DISLIKED_GRADES[0], DISLIKED_GRADES[-1] + 1, size=m)
        for i, grade in zip(picks, np.concatenate([liked, disliked])):
            judgments[(user, catalog[i])] = int(grade)
        rated[picks] += 1
    popularity = {catalog[i]: int(rated[i]) for i in range(spec.n_items)}
    return World(spec, catalog, users, CategoryIndex(categories, frozenset(catalog)), Qrels(judgments), popularity)


def _check_depth(world: World, depth: int) -> int:
    if depth < 1 or depth > len(world.catalog):
        raise DomainError(f"depth must lie in [1, {len(world.catalog)}], got {depth}")
    return depth


def random_run(world: World, seed: int, depth: int, name: str = "random") -> RunSet:
    """Independent uniform permutation prefix per user."""
    _check_depth(world, depth)
    catalog = world.catalog
    lists = {}
    for user in world.users:
        perm = substream(seed, "random", user).permutation(len(catalog))[:depth]
        lists[user] = [catalog[i] for i in perm]
    return RunSet.from_lists(name, lists)


def popularity_order(world: World) -> list[str]:
    return sorted(world.catalog, key=lambda i: (-world.popularity[i], i))


def popularity_run(world: World, depth: int, name: str = "popularity") -> RunSet:
    """Every user gets the catalog by descending popularity count."""
    _check_depth(world, depth)
    ranking = popularity_order(world)[:depth]
    return RunSet.from_lists(name, {user: ranking for user in world.users})


def _oracle_list(world: World, user: str) -> list[str]:
    relevant = world.relevant(user)
    return sorted(relevant) + [i for i in world.catalog if i not in relevant]


def utility_oracle_run(world: World, depth: int, name: str = "utility_oracle") -> RunSet:
    """Each user's relevant items first, then the rest; id order within each block."""
    _check_depth(world, depth)
    return RunSet.from_lists(name, {user: _oracle_list(world, user)[:depth] for user in world.users})


def category_oracle_run(world: World, depth: int, category: str, name: Optional[str] = None) -> RunSet:
    """Category items first, then the rest, identically for every user."""
    _check_depth(world, depth)
    members = world.index[category]
    ranking = (sorted(members) + [i for i in world.catalog if i not in members])[:depth]
    return RunSet.from_lists(name or f"oracle_{category}", {user: ranking for user in world.users})


def noisy_run(world: World, seed: int, depth: int, noise: float, name: Optional[str] = None) -> RunSet:
    """Interpolate between the utility oracle (noise 0) and random (noise 1).

    Each rank draws, with probability ``noise``, the next unused item of the
    user's random permutation, otherwise the next unused oracle item.
    """
    _check_depth(world, depth)
    if not 0.0 <= noise <= 1.0:
        raise DomainError("noise must lie in [0, 1]")
    catalog = world.catalog
    lists = {}
    for user in world.users:
        oracle = _oracle_list(world, user)
        perm = substream(seed, "random", user).permutation(len(catalog))
        coins = substream(seed, "noise", f"{noise:.6f}", user).random(depth) < noise
        used: set[str] = set()
        a = b = 0
        out = []
        for take_random in coins:
            if take_random:
                while catalog[perm[b]] in used:
                    b += 1
                item = catalog[perm[b]]
            else:
                while oracle[a] in used:
                    a += 1
                item = oracle[a]
            used.add(item)
            out.append(item)
        lists[user] = out
    return RunSet.from_lists(name or f"noisy{round(noise * 100):03d}", lists)


def system_family(world: World, seed: int, depth: int, n_noisy: int = 5) -> list[RunSet]:
    """random, popularity, utility_oracle and ``n_noisy`` graded interpolations."""
    runs = [
        random_run(world, seed, depth),
        popularity_run(world, depth),
        utility_oracle_run(world, depth),
    ]
    for k in range(1, n_noisy + 1):
        runs.append(noisy_run(world, seed, depth, k / (n_noisy + 1)))
    return runs


def write_world(world: World, runs: Sequence[RunSet], outdir: str, extra: Optional[dict] = None) -> dict[str, str]:
    """Write runs, qrels, categories and a manifest in the ingest formats."""
    os.makedirs(outdir, exist_ok=True)
    paths = {
        "runs": os.path.join(outdir, "runs.txt"),
        "qrels": os.path.join(outdir, "qrels.txt"),
        "categories": os.path.join(outdir, "categories.tsv"),
        "manifest": os.path.join(outdir, "manifest.json"),
    }
    atomic_write(paths["runs"], iter_run_file(runs))
    atomic_write(paths["qrels"], write_qrels(world.qrels))
    atomic_write(paths["categories"], write_categories(world.index))
    manifest = {
        "spec": asdict(world.spec),
        "seed": world.spec.seed,
        "systems": sorted(r.system_name for r in runs),
        "files": {k: os.path.basename(v) for k, v in paths.items() if k != "manifest"},
        **(extra or {}),
    }
    atomic_write(paths["manifest"], json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return paths
