"""Tests for response voting and the client-visible history"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from linsmr.errors import DuplicateReplicaResponse, MalformedInput
from linsmr.voting import (
    UNDECIDED,
    IssuedRequest,
    ResponseSet,
    VoteCompletion,
    assemble_outer_history,
    decision_time,
    response_key,
    vote,
)


def responses(*entries):
    rs = ResponseSet("r")
    for replica, value, arrival in entries:
        rs.add(replica, value, arrival)
    return rs


def test_first_response_decides_with_f_zero():
    rs = responses((0, 5, 3), (1, 7, 2))
    assert vote(rs, 0) == 7
    assert decision_time(rs, 0) == 2


def test_f_plus_one_matching():
    rs = responses((3, 9, 1), (0, 4, 2), (1, 4, 3), (2, 4, 4))
    assert vote(rs, 1) == 4
    assert decision_time(rs, 1) == 3


def test_undecided_without_enough_matches():
    rs = responses((0, 1, 1), (1, 2, 2))
    assert vote(rs, 1) is UNDECIDED
    assert decision_time(rs, 1) is None


def test_negative_f_rejected():
    with pytest.raises(MalformedInput):
        vote(responses((0, 1, 1)), -1)


def test_duplicate_replica_response():
    rs = responses((0, 1, 1))
    with pytest.raises(DuplicateReplicaResponse):
        rs.add(0, 1, 2)


def test_structured_values_compare_by_content():
    assert response_key({"b": 1, "a": [1, 2]}) == response_key({"a": [1, 2], "b": 1})
    rs = responses((0, {"x": 1, "y": 2}, 1), (1, {"y": 2, "x": 1}, 2))
    assert vote(rs, 1) == {"x": 1, "y": 2}


def issued(request_id, client, at):
    return IssuedRequest(
        request_id=request_id, client=client, object="register", op_name="read", issue_time=at
    )


def test_outer_history_spans_issue_to_decision():
    h = assemble_outer_history(
        [issued("a", "c1", 0), issued("b", "c2", 1)],
        {"a": VoteCompletion(request_id="a", value=3, decided_at=4)},
    )
    spans = h.spans()
    assert (spans["a"].invocation_time, spans["a"].response_time) == (0, 4)
    assert h.pending == frozenset({"b"})
    assert h.operations()[0].result == 3


def test_outer_history_rejects_instant_decision():
    with pytest.raises(MalformedInput):
        assemble_outer_history(
            [issued("a", "c1", 2)], {"a": VoteCompletion(request_id="a", value=0, decided_at=2)}
        )


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
