import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commoneval.browsing import StopModel, familiarity, log_familiarity
from commoneval.commonality import (
    METRIC,
    METRIC_GEOMETRIC,
    commonality,
    commonality_report,
    familiarity_table,
    log_commonality_category,
    log_commonality_table,
    log_mean_exp,
    mean_commonality,
)
from commoneval.errors import DomainError
from commoneval.model import Aggregation, CategoryIndex, EvalConfig, RunSet, TailPolicy

LIT = TailPolicy.LITERAL
PERSIST = TailPolicy.PERSIST_BEYOND_END
M = StopModel(0.9)


def test_single_user_reduces_to_familiarity(backend):
    run = RunSet.from_lists("s", {"u": ["p", "a", "q", "b", "s"]})
    idx = CategoryIndex({"c": {"a", "b"}})
    got = log_commonality_table(run, idx, M, LIT, backend=backend)["c"]
    assert got == pytest.approx(math.log(0.22401), abs=1e-12)


def test_two_users_multiply():
    # familiarity 0.5 and 0.25 built from |c|=1 rankings under persist with gamma 0.5
    m = StopModel(0.5)
    run = RunSet.from_lists("s", {"u1": ["x", "a"], "u2": ["x", "y", "a"]})
    idx = CategoryIndex({"c": {"a"}})
    assert log_commonality_category(run, "c", idx, m, PERSIST) == pytest.approx(math.log(0.125), abs=1e-12)
    assert log_commonality_category(run, "c", idx, m, PERSIST) == pytest.approx(-2.0794, abs=1e-4)


def test_zero_absorption():
    run = RunSet.from_lists("s", {"u1": ["a", "b"], "u2": ["b", "x"]})
    idx = CategoryIndex({"c": {"a"}})
    assert log_commonality_category(run, "c", idx, M, PERSIST) == -math.inf


def test_unknown_category():
    run = RunSet.from_lists("s", {"u1": ["a"]})
    with pytest.raises(DomainError):
        log_commonality_category(run, "zz", CategoryIndex({"c": {"a"}}), M)


def test_empty_run():
    with pytest.raises(DomainError):
        log_commonality_table(RunSet("s", {}), CategoryIndex({"c": {"a"}}), M)


def test_population_scale_underflow():
    # one-item ranking, |c|=1, literal tail: familiarity 1 - 0.9 = 0.1 per user
    lists = {f"u{k:04d}": ["a"] for k in range(6040)}
    run = RunSet.from_lists("s", lists)
    idx = CategoryIndex({"c": {"a"}})
    value = log_commonality_category(run, "c", idx, M, LIT)
    assert value == pytest.approx(-13907.613961684034, rel=1e-6)
    assert math.prod([0.1] * 6040) == 0.0


# -- means -------------------------------------------------------------------


def test_mean_singleton():
    for agg in Aggregation:
        lin, lg = mean_commonality({"c": math.log(0.3)}, agg)
        assert lin == pytest.approx(0.3, abs=1e-15)
        assert lg == pytest.approx(math.log(0.3), abs=1e-15)


def test_mean_two_categories():
    per = {"a": math.log(0.4), "b": math.log(0.2)}
    assert mean_commonality(per, Aggregation.ARITHMETIC)[0] == pytest.approx(0.3, abs=1e-12)
    assert mean_commonality(per, Aggregation.GEOMETRIC)[0] == pytest.approx(0.28284, abs=1e-5)


def test_mean_with_absorbing_zero():
    per = {"a": math.log(0.5), "b": -math.inf}
    assert mean_commonality(per, Aggregation.ARITHMETIC)[0] == pytest.approx(0.25, abs=1e-15)
    assert mean_commonality(per, Aggregation.GEOMETRIC)[1] == -math.inf


def test_mean_empty():
    with pytest.raises(DomainError):
        mean_commonality({})


def test_log_mean_exp_far_below_underflow():
    got = log_mean_exp([-20000.0, -20000.0 + math.log(3)])
    assert got == pytest.approx(-20000.0 + math.log(2), rel=1e-12)
    assert log_mean_exp([-math.inf, -math.inf]) == -math.inf


# -- report rows -------------------------------------------------------------


def test_report_one_system_one_category_one_user():
    run = RunSet.from_lists("s", {"u": ["p", "a", "q", "b", "s"]})
    idx = CategoryIndex({"c": {"a", "b"}})
    rows = commonality_report([run], idx, EvalConfig())
    expected = math.log(0.22401)
    assert {(r.metric, r.category) for r in rows} == {(METRIC, "c"), (METRIC, None), (METRIC_GEOMETRIC, None)}
    for row in rows:
        assert row.log_value == pytest.approx(expected, abs=1e-12)


def test_identical_systems_identical_rows():
    lists = {"u1": ["a", "b", "c"], "u2": ["c", "a", "b"]}
    idx = CategoryIndex({"x": {"a"}, "y": {"b", "c"}})
    rows = commonality_report([RunSet.from_lists("A", lists), RunSet.from_lists("B", lists)], idx)
    a = [(r.metric, r.category, r.value, r.log_value) for r in rows if r.system == "A"]
    b = [(r.metric, r.category, r.value, r.log_value) for r in rows if r.system == "B"]
    assert a == b


def test_dominance_carries_to_means():
    idx = CategoryIndex({"x": {"a"}, "y": {"b"}})
    good = RunSet.from_lists("good", {"u1": ["a", "b", "z"], "u2": ["b", "a", "z"]})
    bad = RunSet.from_lists("bad", {"u1": ["z", "a", "b"], "u2": ["z", "b", "a"]})
    g, b = commonality(good, idx), commonality(bad, idx)
    assert all(g.per_category[c] >= b.per_category[c] for c in idx.labels)
    assert g.arithmetic_log >= b.arithmetic_log
    assert g.mean_log >= b.mean_log


def test_threads_do_not_change_rows():
    rng = np.random.default_rng(5)
    items = [f"i{k}" for k in range(40)]
    idx = CategoryIndex({"x": set(items[:5]), "y": set(items[10:14])})
    runs = [
        RunSet.from_lists(f"s{n}", {f"u{u}": list(rng.permutation(items)) for u in range(30)}) for n in range(6)
    ]
    assert commonality_report(runs, idx, threads=1) == commonality_report(runs, idx, threads=8)


# -- properties --------------------------------------------------------------


@st.composite
def worlds(draw):
    n_items = draw(st.integers(3, 15))
    items = [f"i{k}" for k in range(n_items)]
    n_users = draw(st.integers(1, 10))
    lists = {}
    for u in range(n_users):
        depth = draw(st.integers(1, n_items))
        lists[f"u{u}"] = draw(st.permutations(items))[:depth]
    n_cats = draw(st.integers(1, 3))
    cats = {
        f"c{c}": set(draw(st.lists(st.sampled_from(items), min_size=1, max_size=4, unique=True)))
        for c in range(n_cats)
    }
    gamma = draw(st.floats(0.3, 0.95))
    tail = draw(st.sampled_from([LIT, PERSIST]))
    return lists, cats, gamma, tail


@settings(max_examples=150, deadline=None)
@given(worlds())
def test_table_matches_per_user_familiarity(world):
    lists, cats, gamma, tail = world
    run = RunSet.from_lists("s", lists)
    idx = CategoryIndex(cats)
    users, labels, table = familiarity_table(run, idx, StopModel(gamma), tail)
    for i, user in enumerate(users):
        for j, label in enumerate(labels):
            expect = familiarity(run.rankings[user], cats[label], StopModel(gamma), tail)
            assert table[i, j] == pytest.approx(expect, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(worlds())
def test_factorization_over_disjoint_user_sets(world):
    lists, cats, gamma, tail = world
    if len(lists) < 2:
        return
    users = sorted(lists)
    half = len(users) // 2
    idx = CategoryIndex(cats)
    m = StopModel(gamma)
    whole = log_commonality_table(RunSet.from_lists("s", lists), idx, m, tail)
    left = log_commonality_table(RunSet.from_lists("s", {u: lists[u] for u in users[:half]}), idx, m, tail)
    right = log_commonality_table(RunSet.from_lists("s", {u: lists[u] for u in users[half:]}), idx, m, tail)
    for c in idx.labels:
        if whole[c] == -math.inf:
            assert -math.inf in (left[c], right[c])
        else:
            assert whole[c] == pytest.approx(left[c] + right[c], abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(worlds(), st.randoms(use_true_random=False))
def test_permutation_invariance(world, rnd):
    lists, cats, gamma, tail = world
    m = StopModel(gamma)
    base = log_commonality_table(RunSet.from_lists("s", lists), CategoryIndex(cats), m, tail)
    users = list(lists)
    rnd.shuffle(users)
    labels = list(cats)
    rnd.shuffle(labels)
    shuffled = log_commonality_table(
        RunSet.from_lists("s", {u: lists[u] for u in users}), CategoryIndex({c: cats[c] for c in labels}), m, tail
    )
    assert set(shuffled) == set(base)
    for c, v in base.items():
        if v == -math.inf:
            assert shuffled[c] == v
        else:
            assert shuffled[c] == pytest.approx(v, abs=1e-9)


@settings(max_examples=150, deadline=None)
@given(worlds())
def test_bounds_and_am_gm(world):
    lists, cats, gamma, tail = world
    run = RunSet.from_lists("s", lists)
    idx = CategoryIndex(cats)
    m = StopModel(gamma)
    per = log_commonality_table(run, idx, m, tail)
    for c in idx.labels:
        floor = min(familiarity(run.rankings[u], cats[c], m, tail) for u in lists)
        assert math.exp(per[c]) <= floor * (1 + 1e-12)
    res = commonality(run, idx, EvalConfig(gamma=gamma, tail_policy=tail))
    assert res.mean_linear >= res.geometric_linear * (1 - 1e-12)


@settings(max_examples=150, deadline=None)
@given(worlds())
def test_log_linear_agreement(world):
    lists, cats, gamma, tail = world
    run = RunSet.from_lists("s", lists)
    idx = CategoryIndex(cats)
    m = StopModel(gamma)
    per = log_commonality_table(run, idx, m, tail)
    for c in idx.labels:
        fams = [familiarity(run.rankings[u], cats[c], m, tail) for u in sorted(lists)]
        if min(fams) < 0.1:
            continue
        assert math.exp(per[c]) == pytest.approx(math.prod(fams), rel=1e-9)


def test_sum_of_log_familiarities():
    lists = {"u1": ["a", "x", "b"], "u2": ["x", "b", "a"], "u3": ["b", "a", "x"]}
    cat = {"a", "b"}
    expected = sum(log_familiarity(RunSet.from_lists("s", lists).rankings[u], cat, M, LIT) for u in lists)
    got = log_commonality_category(RunSet.from_lists("s", lists), "c", CategoryIndex({"c": cat}), M, LIT)
    assert got == pytest.approx(expected, abs=1e-12)
