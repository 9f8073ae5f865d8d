import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stalib.benchmarks import make_benchmark
from stalib.core import (
    BestArchive,
    BoxBounds,
    BudgetExhausted,
    DimensionMismatch,
    EvalBudget,
    InsufficientHistory,
    Problem,
    RandomSource,
    archive_push,
    archive_sample_pair,
    as_state,
    clamp_to_bounds,
    evaluate,
    evaluate_batch,
)


def test_as_state_rejects_bad_input():
    with pytest.raises(DimensionMismatch):
        as_state([[1.0, 2.0]])
    with pytest.raises(DimensionMismatch):
        as_state([1.0, 2.0], n=3)
    with pytest.raises(ValueError):
        as_state([1.0, np.nan])
    with pytest.raises(ValueError):
        as_state([np.inf])


def test_box_bounds_validation():
    with pytest.raises(ValueError):
        BoxBounds([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(DimensionMismatch):
        BoxBounds([0.0], [1.0, 2.0])
    b = BoxBounds.uniform(-1, 1, 3)
    assert b.dimension == 3
    assert b.contains([0, 1, -1]) and not b.contains([0, 1.1, 0])


def test_problem_dimension_must_match_bounds():
    with pytest.raises(DimensionMismatch):
        Problem(3, BoxBounds.uniform(0, 1, 2), lambda x: 0.0)


@pytest.mark.parametrize(
    "name,x,expected",
    [("sphere", np.zeros(20), 0.0), ("rosenbrock", np.ones(30), 0.0), ("sphere", np.array([3.0, 4.0]), 25.0)],
)
def test_evaluate_examples(name, x, expected):
    budget = EvalBudget()
    assert evaluate(make_benchmark(name, x.size), x, budget) == expected
    assert budget.used == 1


def test_evaluate_budget_and_dimension_errors():
    p = make_benchmark("sphere", 2)
    budget = EvalBudget(limit=1)
    evaluate(p, [1.0, 1.0], budget)
    with pytest.raises(BudgetExhausted):
        evaluate(p, [1.0, 1.0], budget)
    assert budget.used == 1
    with pytest.raises(DimensionMismatch):
        evaluate(p, [1.0, 1.0, 1.0], EvalBudget())


def test_evaluate_batch_partial_at_budget_edge():
    p = make_benchmark("sphere", 2)
    budget = EvalBudget(limit=5)
    vals = evaluate_batch(p, np.ones((3, 2)), budget)
    assert vals.shape == (3,) and budget.used == 3
    vals = evaluate_batch(p, np.ones((3, 2)), budget)
    assert vals.shape == (2,) and budget.used == 5
    with pytest.raises(BudgetExhausted):
        evaluate_batch(p, np.ones((3, 2)), budget)


def test_evaluate_batch_plain_callable():
    calls = []

    def f(x):
        calls.append(x.copy())
        return float(np.sum(x))

    p = Problem(2, BoxBounds.uniform(0, 1, 2), f)
    out = evaluate_batch(p, np.array([[1.0, 2.0], [3.0, 4.0]]), EvalBudget())
    assert out.tolist() == [3.0, 7.0] and len(calls) == 2


@pytest.mark.parametrize(
    "s,lo,hi,expected",
    [([-7, 3], -5.12, 5.12, [-5.12, 3]), ([0, 0], -100, 100, [0, 0]), ([600.5, -600.5], -600, 600, [600, -600])],
)
def test_clamp_examples(s, lo, hi, expected):
    out = clamp_to_bounds(np.array(s, dtype=float), BoxBounds.uniform(lo, hi, 2))
    assert out.tolist() == expected


@given(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3))
def test_clamp_idempotent_and_in_box(xs):
    b = BoxBounds(np.array([-1.0, 0.0, 10.0]), np.array([1.0, 5.0, 20.0]))
    once = clamp_to_bounds(np.array(xs), b)
    assert np.array_equal(clamp_to_bounds(once, b), once)
    assert b.contains(once)


def test_archive_push_examples():
    a = BestArchive(capacity=10)
    archive_push(a, [1, 2])
    assert [e.tolist() for e in a.entries] == [[1, 2]]
    archive_push(a, [1, 2])
    assert len(a) == 1
    for i in range(10):
        archive_push(a, [i + 10, 0])
    assert len(a) == 10
    assert [1, 2] not in a
    assert a.entries[0].tolist() == [10, 0] and a.entries[-1].tolist() == [19, 0]


def test_archive_push_shape_mismatch():
    a = BestArchive()
    archive_push(a, [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        archive_push(a, [1.0, 2.0, 3.0])


def test_archive_evicted_entry_can_return():
    a = BestArchive(capacity=2)
    for v in ([0.0], [1.0], [2.0], [0.0]):
        archive_push(a, v)
    assert [e[0] for e in a.entries] == [2.0, 0.0]


@settings(max_examples=50)
@given(st.lists(st.integers(0, 6), max_size=40), st.integers(1, 5))
def test_archive_distinct_and_bounded(values, cap):
    a = BestArchive(capacity=cap)
    for v in values:
        archive_push(a, [float(v), 1.0])
        keys = [e.tobytes() for e in a.entries]
        assert len(keys) == len(set(keys))
        assert len(a) <= cap


def test_archive_sample_pair():
    with pytest.raises(InsufficientHistory):
        archive_sample_pair(BestArchive(entries=[np.zeros(1)]), RandomSource(0))
    three = BestArchive(entries=[np.array([0.0]), np.array([1.0]), np.array([2.0])])
    rng = RandomSource(1)
    for _ in range(500):
        x, y = archive_sample_pair(three, rng)
        assert x[0] != y[0]


def test_archive_sample_pair_order_is_fair():
    two = BestArchive(entries=[np.array([0.0]), np.array([1.0])])
    firsts = [archive_sample_pair(two, RandomSource(seed))[0][0] for seed in range(10_000)]
    assert abs(np.mean(np.array(firsts) == 0.0) - 0.5) <= 0.02


def _draws(src):
    return np.concatenate([src.uniform01(5), src.uniform_pm1(5), src.gaussian(5), src.integers(0, 9, 5)])


def test_random_source_reproducible():
    assert np.array_equal(_draws(RandomSource(123)), _draws(RandomSource(123)))
    assert not np.array_equal(RandomSource(124).uniform01(5), RandomSource(123).uniform01(5))


def test_random_source_ranges():
    r = RandomSource(0)
    u = r.uniform01(10_000)
    v = r.uniform_pm1(10_000)
    k = r.integers(2, 5, 10_000)
    assert u.min() >= 0 and u.max() < 1
    assert v.min() >= -1 and v.max() <= 1 and v.min() < -0.99
    assert set(np.unique(k)) == {2, 3, 4}


def test_budget_grant_accounting():
    b = EvalBudget(limit=10)
    assert b.grant(4) == 4 and b.grant(10) == 6 and b.grant(1) == 0
    assert b.used == 10 and b.exhausted
    with pytest.raises(ValueError):
        EvalBudget(limit=0)
