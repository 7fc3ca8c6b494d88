"""Tests for the hierarchy checkers and witness replay"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from linsmr.checkers import (
    ConsistencyChecker,
    Level,
    SearchBudget,
    check_hierarchy,
    check_interval_linearizable,
    check_linearizable,
    check_linearizable_naive,
    check_mp_linearizable,
    check_schneider_properties,
    check_set_linearizable,
    replay_interval,
    replay_linearization,
    replay_mp,
    replay_set,
)
from linsmr.errors import BudgetExhausted, MalformedInput
from linsmr.history import Operation, history_from_operations
from linsmr.simulator import SimOutput
from linsmr.specs import get_bundle, register_spec


def op(op_id, start, end, name="read", args=(), result=None, obj="register", client=None):
    return Operation(
        op_id=op_id,
        client=client or f"client-{op_id}",
        object=obj,
        op_name=name,
        args=args,
        result=result,
        invocation_time=start,
        response_time=end,
    )


def stale_read():
    return history_from_operations(
        [op("w", 0, 2, name="write", args=(1,), result="ok"), op("r", 3, 4, result=0)]
    )


def listing1_history():
    """E observes the intermediate value written by D's first critical section."""
    return history_from_operations(
        [op("D", 0, 7, name="D", result="ok", obj="lockObject"), op("E", 0, 6, name="E", result=2, obj="lockObject")]
    )


def test_concurrent_read_may_precede_write():
    h = history_from_operations(
        [op("w", 0, 2, name="write", args=(1,), result="ok"), op("r", 1, 3, result=0)]
    )
    verdict = check_linearizable(h, register_spec())
    assert verdict.accepted
    assert verdict.witness == (("r",), ("w",))
    assert replay_linearization(h, register_spec(), verdict.witness)


def test_stale_read_rejected():
    verdict = check_linearizable(stale_read(), register_spec())
    assert not verdict.accepted
    assert not verdict.unknown
    assert "r returned 0" in verdict.explanation


def test_naive_oracle_agrees():
    assert not check_linearizable_naive(stale_read(), register_spec()).accepted
    h = history_from_operations([op("w", 0, 5, name="write", args=(1,), result="ok"), op("r", 1, 2, result=1)])
    assert check_linearizable_naive(h, register_spec()).accepted
    assert check_linearizable(h, register_spec()).accepted


def test_empty_history_is_accepted():
    verdict = check_linearizable(history_from_operations([]), register_spec())
    assert verdict.accepted
    assert verdict.witness == ()


def test_pending_history_needs_completion():
    h = history_from_operations([op("w", 0, None, name="write", args=(1,))])
    with pytest.raises(MalformedInput):
        check_linearizable(h, register_spec())


def test_multi_object_history_rejected():
    h = history_from_operations([op("a", 0, 1, result=0, obj="x"), op("b", 2, 3, result=0, obj="y")])
    with pytest.raises(MalformedInput):
        check_linearizable(h, register_spec())


def test_budget_validation():
    with pytest.raises(MalformedInput):
        SearchBudget(max_ops=0)
    with pytest.raises(MalformedInput):
        SearchBudget(on_exhaustion="panic")


def test_budget_exhaustion_gives_unknown():
    verdict = check_linearizable(stale_read(), register_spec(), SearchBudget(max_ops=1))
    assert verdict.unknown
    assert not verdict.accepted
    assert "max_ops" in verdict.explanation


def test_budget_exhaustion_can_raise():
    with pytest.raises(BudgetExhausted):
        check_linearizable(stale_read(), register_spec(), SearchBudget(max_nodes=1, on_exhaustion="error"))


def test_listing1_rejected_by_linearizability():
    bundle = get_bundle("lock-object")
    assert not check_linearizable(listing1_history(), bundle.sequential).accepted
    assert not check_set_linearizable(listing1_history(), bundle.set_spec).accepted


def test_listing1_mp_witness():
    """E's read falls between D's two effect steps."""
    h = listing1_history()
    bundle = get_bundle("lock-object")
    verdict = check_mp_linearizable(h, bundle.effect)
    assert verdict.accepted
    assert verdict.witness == (("D.1",), ("E.1",), ("D.2",))
    assert replay_mp(h, bundle.effect, verdict.witness)
    assert not replay_mp(h, bundle.effect, (("D.1",), ("D.2",), ("E.1",)))


def test_listing1_interval_replay():
    h = listing1_history()
    bundle = get_bundle("lock-object")
    verdict = check_interval_linearizable(h, bundle.interval)
    assert verdict.accepted
    assert all(label[0] in "+-" for point in verdict.witness for label in point)
    assert replay_interval(h, bundle.interval, verdict.witness)


def test_exchanger_needs_simultaneity():
    bundle = get_bundle("exchanger")
    overlapping = history_from_operations(
        [
            op("x1", 0, 3, name="exchange", args=(1,), result=2, obj="exchanger"),
            op("x2", 1, 4, name="exchange", args=(2,), result=1, obj="exchanger"),
        ]
    )
    assert not check_linearizable(overlapping, bundle.sequential).accepted
    verdict = check_set_linearizable(overlapping, bundle.set_spec)
    assert verdict.accepted
    assert verdict.witness == (("x1", "x2"),)
    assert replay_set(overlapping, bundle.set_spec, verdict.witness)

    apart = history_from_operations(
        [
            op("x1", 0, 1, name="exchange", args=(1,), result=2, obj="exchanger"),
            op("x2", 2, 3, name="exchange", args=(2,), result=1, obj="exchanger"),
        ]
    )
    assert not check_set_linearizable(apart, bundle.set_spec).accepted


def test_write_snapshot_levels():
    bundle = get_bundle("write-snapshot")
    both = history_from_operations(
        [
            op("a", 0, 3, name="write_snapshot", args=(1,), result=(1, 2), obj="ws"),
            op("b", 1, 4, name="write_snapshot", args=(2,), result=(1, 2), obj="ws"),
        ]
    )
    report = check_hierarchy(both, bundle)
    assert not report.verdicts["lin"].accepted
    assert report.verdicts["set"].accepted
    assert report.verdicts["interval"].accepted
    assert report.consistent

    apart = history_from_operations(
        [
            op("a", 0, 1, name="write_snapshot", args=(1,), result=(1, 2), obj="ws"),
            op("b", 2, 3, name="write_snapshot", args=(2,), result=(1, 2), obj="ws"),
        ]
    )
    assert not check_set_linearizable(apart, bundle.set_spec).accepted


def test_hierarchy_on_listing1():
    report = check_hierarchy(listing1_history(), get_bundle("lock-object"))
    assert {level: v.accepted for level, v in report.verdicts.items()} == {
        "lin": False,
        "set": False,
        "mp": True,
        "interval": True,
    }
    assert report.violations == ()


def test_replay_rejects_foreign_witness():
    h = stale_read()
    assert not replay_linearization(h, register_spec(), (("w",), ("nope",)))
    assert not replay_linearization(h, register_spec(), (("r",), ("w",)))


def test_consistency_checker_closes_pending():
    """A pending write may still take effect before a read that saw it."""
    h = history_from_operations([op("w", 0, None, name="write", args=(1,)), op("r", 1, 2, result=1)])
    checker = ConsistencyChecker(get_bundle("register"), budget=SearchBudget())
    verdict = checker.check(h, Level.LINEARIZABILITY)
    assert verdict.accepted
    assert checker.replay(h, verdict)
    assert checker.check_all(h).consistent


def test_consistency_checker_level_by_name():
    checker = ConsistencyChecker(get_bundle("register"), budget=SearchBudget())
    assert not checker.check(stale_read(), "mp").accepted
    with pytest.raises(ValueError):
        checker.check(stale_read(), "sequential")


def test_schneider_properties():
    out = SimOutput(
        issue_order={"c1": ("a", "b"), "c2": ("c",)},
        delivery_order={0: ("a", "b", "c"), 1: ("a", "c", "b")},
        causal_edges=(("b", "c"),),
    )
    assert check_schneider_properties(out) == (True, False)
    reordered = SimOutput(
        issue_order={"c1": ("a", "b")},
        delivery_order={0: ("b", "a")},
    )
    assert check_schneider_properties(reordered) == (False, True)


def test_schneider_rejects_unknown_requests():
    out = SimOutput(issue_order={"c1": ("a",)}, delivery_order={0: ("a", "z")})
    with pytest.raises(MalformedInput):
        check_schneider_properties(out)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
