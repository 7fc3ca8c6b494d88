"""Tests for the randomized property suites"""

import math
import random
import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from linsmr.checkers import SearchBudget, check_linearizable
from linsmr.errors import MalformedInput
from linsmr.history import dumps_trace, loads_trace
from linsmr.simulator import Behavior
from linsmr.specs import OK, get_bundle
from linsmr.suites import (
    as_composite,
    interval_orders,
    list_suites,
    local_cases,
    locality_holds,
    precedence_orders,
    precedence_relation,
    random_history,
    random_workload,
    run_suite,
    two_object_history,
)


def test_random_history_is_linearizable_without_corruption():
    rng = random.Random(3)
    for spec_name in ("register", "counter", "fifo-queue", "lock-object"):
        h = random_history(rng, spec_name, 6, corrupt=0.0)
        assert check_linearizable(h, get_bundle(spec_name).sequential).accepted


def test_random_workload_respects_client_clocks():
    workload = random_workload(random.Random(1), causal=True)
    by_client = {}
    for request in workload:
        by_client.setdefault(request.client, []).append(request.issue_time)
    assert all(times == sorted(times) for times in by_client.values())
    ids = [r.request_id for r in workload]
    for position, request in enumerate(workload):
        assert set(request.after) <= set(ids[:position])


def test_interval_orders_counts():
    assert len(list(interval_orders(1))) == 1
    assert len(list(interval_orders(2))) == 3
    assert len(list(interval_orders(3))) == 15


def test_locality_on_a_stale_pair():
    """Each object alone is fine, so the composite must be too."""
    h = two_object_history(
        ["x", "y"],
        [("write", (1,), OK), ("read", (), 0)],
        [(0, 1), (2, 3)],
    )
    assert locality_holds(h, SearchBudget())
    composite = as_composite(h)
    assert composite.objects() == ["composite"]
    assert [op.op_name for op in composite.operations()] == ["x.write", "y.read"]


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_precedence_orders_cover_every_event_order(n):
    relations = [precedence_relation(spans) for spans in precedence_orders(n)]
    assert len(relations) == len(set(relations)) == math.factorial(n)
    assert set(relations) == {precedence_relation(spans) for spans in interval_orders(n)}


def test_local_cases_with_one_op_per_object():
    cases = list(local_cases(1))
    # 3 single ops, then 2 relations x 9 call pairs
    assert len(cases) == 21
    assert all(set(h.objects()) <= {"x", "y"} for h in cases)
    assert all(locality_holds(h, SearchBudget()) for h in cases)


@pytest.mark.slow
def test_locality_over_two_ops_per_object():
    count = 0
    for h in local_cases(2):
        count += 1
        assert locality_holds(h, SearchBudget()), dumps_trace(h)
    assert count == 6357


@pytest.mark.parametrize(
    "name,trials",
    [
        ("lemmas", 30),
        ("hierarchy", 30),
        ("oracle", 30),
        ("sequential", 5),
        ("determinism", 5),
        ("voting", 4),
        ("schneider", 5),
        ("quorum", 20),
    ],
)
def test_suites_pass(name, trials):
    [result] = run_suite(name, trials, seed=1)
    assert result.passed, result.detail
    assert result.trials >= trials


def test_lemmas_count_accepted_pairs_per_level():
    [result] = run_suite("lemmas", 25, seed=2)
    assert result.passed, result.detail
    assert result.coverage == {"lin": 25, "mp": 25, "interval": 25}
    assert result.trials == 75


def test_voting_runs_every_behavior_in_full():
    [result] = run_suite("voting", 3, seed=0)
    assert result.passed, result.detail
    expected = {behavior.value: 3 for behavior in Behavior}
    expected["duplicate-ids"] = 3
    assert result.coverage == expected


@pytest.mark.slow
def test_scenarios_suite():
    [result] = run_suite("scenarios", 8)
    assert result.passed, result.detail


def test_mutant_register_is_caught():
    [result] = run_suite("sequential", 20, seed=0, mutant=True)
    assert not result.passed
    assert loads_trace(result.counterexample).operations()


def test_unknown_suite():
    assert "all" in list_suites()
    with pytest.raises(MalformedInput):
        run_suite("fuzz")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
