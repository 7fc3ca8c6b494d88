"""Tests for histories, precedence and timeline transforms"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from linsmr.errors import ClientOverlapViolation, MalformedHistory, MalformedInput, UnknownOp
from linsmr.history import (
    UNOBSERVED,
    CompletionPolicy,
    EventRecord,
    Operation,
    build_history,
    complete_history,
    dumps_trace,
    extend_timelines,
    history_from_operations,
    load_trace,
    loads_trace,
    project_object,
    real_time_precedes,
    write_trace,
)


def event(event_id, kind, op_id, time, client="c1", obj="register", op_name="read", payload=None):
    return EventRecord(
        event_id=event_id,
        kind=kind,
        op_id=op_id,
        client=client,
        object=obj,
        op_name=op_name,
        payload=payload,
        time=time,
    )


def op(op_id, start, end, client=None, obj="register", name="read", args=(), result=None):
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


def test_build_history_sorts_events():
    """Events come back ordered by (time, event_id)."""
    h = build_history(
        [
            event(2, "response", "a", 5, payload=0),
            event(0, "invocation", "a", 1),
            event(1, "invocation", "b", 1, client="c2"),
        ]
    )
    assert [(e.time, e.event_id) for e in h.events] == [(1, 0), (1, 1), (5, 2)]
    assert h.pending == frozenset({"b"})
    assert not h.is_complete


def test_duplicate_event_id_rejected():
    with pytest.raises(MalformedHistory) as info:
        build_history([event(0, "invocation", "a", 0), event(0, "response", "a", 1)])
    assert info.value.event_id == 0


def test_orphan_response_rejected():
    with pytest.raises(MalformedHistory):
        build_history([event(0, "response", "a", 1)])


def test_response_must_follow_invocation_tick():
    with pytest.raises(MalformedHistory):
        build_history([event(0, "invocation", "a", 2), event(1, "response", "a", 2)])


def test_client_overlap_rejected():
    """A client may not invoke while one of its ops is pending."""
    with pytest.raises(ClientOverlapViolation):
        build_history([event(0, "invocation", "a", 0), event(1, "invocation", "b", 1)])


def test_client_may_invoke_at_its_response_tick():
    h = history_from_operations([op("a", 0, 3, client="c"), op("b", 3, 5, client="c")])
    assert [e.kind for e in h.events] == ["invocation", "response", "invocation", "response"]


def test_operations_pair_events():
    h = history_from_operations([op("w", 0, 2, name="write", args=(1,), result="ok"), op("r", 1, 4, result=1)])
    ops = h.operations()
    assert [o.op_id for o in ops] == ["w", "r"]
    assert ops[0].args == (1,)
    assert ops[1].result == 1
    assert h.spans()["r"].response_time == 4
    assert h.max_time() == 4


def test_real_time_precedence_is_strict():
    """Equal ticks count as concurrent."""
    h = history_from_operations([op("a", 0, 3), op("b", 3, 5), op("c", 4, 6)])
    assert not real_time_precedes(h, "a", "b")
    assert not real_time_precedes(h, "b", "a")
    assert real_time_precedes(h, "a", "c")
    assert not real_time_precedes(h, "c", "a")


def test_real_time_precedes_unknown_op():
    h = history_from_operations([op("a", 0, 1)])
    with pytest.raises(UnknownOp):
        real_time_precedes(h, "a", "zz")


def test_pending_op_precedes_nothing():
    h = history_from_operations([op("a", 0, None), op("b", 5, 6)])
    assert not real_time_precedes(h, "a", "b")


def test_project_object():
    h = history_from_operations([op("a", 0, 2, obj="x"), op("b", 1, 3, obj="y"), op("c", 4, 5, obj="x")])
    x = project_object(h, "x")
    assert [o.op_id for o in x.operations()] == ["a", "c"]
    assert x.objects() == ["x"]
    assert project_object(x, "x") == x


def test_extend_timelines_widens_spans():
    h = history_from_operations([op("a", 2, 3), op("b", 4, 5)])
    wider = extend_timelines(h, {"a": (2, 1), "b": (0, 3)})
    spans = wider.spans()
    assert (spans["a"].invocation_time, spans["a"].response_time) == (0, 4)
    assert (spans["b"].invocation_time, spans["b"].response_time) == (4, 8)


def test_extend_timelines_rejects_bad_shifts():
    h = history_from_operations([op("a", 1, 3)])
    with pytest.raises(MalformedInput):
        extend_timelines(h, {"a": (-1, 0)})
    with pytest.raises(MalformedInput):
        extend_timelines(h, {"a": (2, 0)})


def test_extend_timelines_same_client_overlap():
    h = history_from_operations([op("a", 0, 2, client="c"), op("b", 3, 5, client="c")])
    with pytest.raises(ClientOverlapViolation):
        extend_timelines(h, {"b": (2, 0)})


def test_complete_history_drop_pending():
    h = history_from_operations([op("a", 0, 2, result=0), op("b", 1, None)])
    done = complete_history(h, CompletionPolicy.DROP_PENDING)
    assert done.is_complete
    assert [o.op_id for o in done.operations()] == ["a"]


def test_complete_history_close_pending():
    """Pending ops respond UNOBSERVED just after the last event."""
    h = history_from_operations([op("a", 0, 2, result=0), op("b", 1, None)])
    done = complete_history(h, CompletionPolicy.CLOSE_PENDING)
    closed = {o.op_id: o for o in done.operations()}["b"]
    assert closed.result == UNOBSERVED
    assert closed.response_time == 3


def test_complete_history_noop_when_complete():
    h = history_from_operations([op("a", 0, 2)])
    assert complete_history(h, CompletionPolicy.CLOSE_PENDING) is h


def test_trace_file(tmp_path):
    """Trace files hold one JSON event per line and load back to the same history."""
    h = history_from_operations([op("w", 0, 2, name="write", args=(1,), result="ok"), op("r", 1, 4, result=[1, 2])])
    path = tmp_path / "h.trace.jsonl"
    write_trace(h, path)
    assert len(path.read_text().splitlines()) == 4
    loaded = load_trace(path)
    assert loaded == h
    assert loaded.operations()[1].result == (1, 2)


def test_trace_rejects_truncated_line():
    h = history_from_operations([op("a", 0, 2)])
    lines = dumps_trace(h).splitlines()
    with pytest.raises(MalformedInput):
        loads_trace(lines[0] + "\n" + lines[1][:20])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
