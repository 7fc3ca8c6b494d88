"""Client-side response voting and the client-visible history."""

import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional, Sequence

from pydantic import BaseModel, ConfigDict, field_validator

from .errors import DuplicateReplicaResponse, MalformedInput
from .history import History, Operation, freeze, history_from_operations


class _Undecided:
    def __repr__(self) -> str:
        return "UNDECIDED"


UNDECIDED = _Undecided()


@dataclass
class ResponseSet:
    """Responses collected for one request, at most one per replica."""

    request_id: str
    responses: list[tuple[int, Any, int]] = field(default_factory=list)

    def add(self, replica: int, value: Any, arrival: int) -> None:
        if any(r == replica for r, _, _ in self.responses):
            raise DuplicateReplicaResponse(
                f"replica {replica} answered request {self.request_id!r} twice"
            )
        self.responses.append((replica, value, arrival))

    def in_arrival_order(self) -> list[tuple[int, Any, int]]:
        return sorted(self.responses, key=lambda r: r[2])


def response_key(value: Any) -> str:
    """Serialized form used for equality of responses."""
    return json.dumps(value, sort_keys=True, default=repr)


def _decide(rs: ResponseSet, f: int) -> Optional[tuple[Any, int, tuple[int, ...]]]:
    if f < 0:
        raise MalformedInput("f must be non-negative")
    backers: dict[str, list[int]] = {}
    for replica, value, arrival in rs.in_arrival_order():
        agreeing = backers.setdefault(response_key(value), [])
        agreeing.append(replica)
        if len(agreeing) >= f + 1:
            return value, arrival, tuple(agreeing)
    return None


def vote(rs: ResponseSet, f: int) -> Any:
    """First value, by arrival, reported by f+1 replicas; UNDECIDED otherwise."""
    decision = _decide(rs, f)
    return UNDECIDED if decision is None else decision[0]


def decision_time(rs: ResponseSet, f: int) -> Optional[int]:
    decision = _decide(rs, f)
    return None if decision is None else decision[1]


def deciding_replicas(rs: ResponseSet, f: int) -> tuple[int, ...]:
    """The f+1 replicas whose matching responses decided the vote, by arrival."""
    decision = _decide(rs, f)
    return () if decision is None else decision[2]


class IssuedRequest(BaseModel):
    """A request as the client issued it."""

    model_config = ConfigDict(frozen=True)

    request_id: str
    client: str
    object: str
    op_name: str
    args: tuple = ()
    issue_time: int

    @field_validator("args", mode="before")
    @classmethod
    def _freeze(cls, value: Any) -> Any:
        return freeze(value)


class VoteCompletion(BaseModel):
    model_config = ConfigDict(frozen=True)

    request_id: str
    value: Any
    decided_at: int
    replicas: tuple[int, ...] = ()


def assemble_outer_history(
    issued: Sequence[IssuedRequest], completions: Mapping[str, VoteCompletion]
) -> History:
    """Spans run from issue to vote decision; undecided requests stay pending."""
    operations = []
    for request in issued:
        done = completions.get(request.request_id)
        if done is not None and not request.issue_time < done.decided_at:
            raise MalformedInput(
                f"request {request.request_id!r} decided at {done.decided_at}, "
                f"not after its issue at {request.issue_time}"
            )
        operations.append(
            Operation(
                op_id=request.request_id,
                client=request.client,
                object=request.object,
                op_name=request.op_name,
                args=request.args,
                result=done.value if done is not None else None,
                invocation_time=request.issue_time,
                response_time=done.decided_at if done is not None else None,
            )
        )
    return history_from_operations(operations)
