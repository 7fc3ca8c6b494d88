"""Events, histories, real-time precedence and timeline transforms.

A History is the value every checker consumes: invocation/response events on a
logical integer clock, sorted by ``(time, event_id)``. Histories are immutable
and always well-formed; every constructor path runs the same validation.
"""

import logging
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from .errors import ClientOverlapViolation, MalformedHistory, MalformedInput, UnknownOp

logger = logging.getLogger(__name__)

# Result of an operation whose response was never observed. Checkers accept it
# as matching any return value.
UNOBSERVED = "<unobserved>"

INVOCATION = "invocation"
RESPONSE = "response"


def freeze(value: Any) -> Any:
    """Turn lists into tuples, recursively, so payloads are hashable."""
    if isinstance(value, (list, tuple)):
        return tuple(freeze(v) for v in value)
    return value


class EventRecord(BaseModel):
    """One invocation or response event."""

    model_config = ConfigDict(frozen=True)

    event_id: int
    kind: Literal["invocation", "response"]
    op_id: str
    client: str
    object: str
    op_name: str
    payload: Any = None
    time: int

    @field_validator("payload")
    @classmethod
    def _freeze_payload(cls, value: Any) -> Any:
        return freeze(value)

    @property
    def sort_key(self) -> tuple[int, int]:
        return (self.time, self.event_id)


class OperationSpan(BaseModel):
    """Timeline segment of one operation; ``response_time`` is None while pending."""

    model_config = ConfigDict(frozen=True)

    op_id: str
    invocation_time: int
    response_time: Optional[int] = None


class Operation(BaseModel):
    """An invocation paired with its response (if any)."""

    model_config = ConfigDict(frozen=True)

    op_id: str
    client: str
    object: str
    op_name: str
    args: tuple = ()
    result: Any = None
    invocation_time: int
    response_time: Optional[int] = None

    @field_validator("args", "result", mode="before")
    @classmethod
    def _freeze(cls, value: Any) -> Any:
        return freeze(value)

    @property
    def complete(self) -> bool:
        return self.response_time is not None

    @property
    def span(self) -> OperationSpan:
        return OperationSpan(
            op_id=self.op_id,
            invocation_time=self.invocation_time,
            response_time=self.response_time,
        )


def _as_args(payload: Any) -> tuple:
    if payload is None:
        return ()
    return payload if isinstance(payload, tuple) else (payload,)


def _validate_events(events: tuple[EventRecord, ...]) -> None:
    seen_ids: set[int] = set()
    invoked: dict[str, EventRecord] = {}
    responded: set[str] = set()
    outstanding: dict[str, str] = {}
    previous: Optional[EventRecord] = None

    for event in events:
        if event.event_id in seen_ids:
            raise MalformedHistory("duplicate event_id", event.event_id)
        seen_ids.add(event.event_id)
        if previous is not None and previous.sort_key >= event.sort_key:
            raise MalformedHistory("events not sorted by (time, event_id)", event.event_id)
        previous = event

        if event.kind == INVOCATION:
            if event.op_id in invoked:
                raise MalformedHistory(f"duplicate invocation of op {event.op_id!r}", event.event_id)
            if event.client in outstanding:
                raise ClientOverlapViolation(
                    f"client {event.client!r} invokes {event.op_id!r} while "
                    f"{outstanding[event.client]!r} is pending",
                    event.event_id,
                )
            invoked[event.op_id] = event
            outstanding[event.client] = event.op_id
            continue

        call = invoked.get(event.op_id)
        if call is None:
            raise MalformedHistory(f"orphan response for op {event.op_id!r}", event.event_id)
        if event.op_id in responded:
            raise MalformedHistory(f"duplicate response for op {event.op_id!r}", event.event_id)
        if call.client != event.client or call.object != event.object:
            raise MalformedHistory(
                f"response for op {event.op_id!r} does not match its invocation", event.event_id
            )
        if call.op_name != event.op_name:
            raise MalformedHistory(f"response op_name differs for {event.op_id!r}", event.event_id)
        if not call.time < event.time:
            raise MalformedHistory(f"op {event.op_id!r} responds at its invocation tick", event.event_id)
        responded.add(event.op_id)
        del outstanding[event.client]


class History(BaseModel):
    """A validated, sorted sequence of events."""

    model_config = ConfigDict(frozen=True)

    events: tuple[EventRecord, ...] = ()

    @model_validator(mode="after")
    def _well_formed(self) -> "History":
        _validate_events(self.events)
        return self

    def __len__(self) -> int:
        return len(self.events)

    @property
    def pending(self) -> frozenset[str]:
        invoked = {e.op_id for e in self.events if e.kind == INVOCATION}
        answered = {e.op_id for e in self.events if e.kind == RESPONSE}
        return frozenset(invoked - answered)

    @property
    def is_complete(self) -> bool:
        return not self.pending

    def objects(self) -> list[str]:
        return sorted({e.object for e in self.events})

    def clients(self) -> list[str]:
        return sorted({e.client for e in self.events})

    def operations(self) -> list[Operation]:
        """Operations in invocation order."""
        responses = {e.op_id: e for e in self.events if e.kind == RESPONSE}
        ops = []
        for event in self.events:
            if event.kind != INVOCATION:
                continue
            answer = responses.get(event.op_id)
            ops.append(
                Operation(
                    op_id=event.op_id,
                    client=event.client,
                    object=event.object,
                    op_name=event.op_name,
                    args=_as_args(event.payload),
                    result=answer.payload if answer is not None else None,
                    invocation_time=event.time,
                    response_time=answer.time if answer is not None else None,
                )
            )
        return ops

    def spans(self) -> dict[str, OperationSpan]:
        return {op.op_id: op.span for op in self.operations()}

    def max_time(self) -> int:
        return self.events[-1].time if self.events else 0


def build_history(events: Iterable[EventRecord]) -> History:
    """Sort events by (time, event_id) and validate them into a History."""
    ordered = sorted(events, key=lambda e: e.sort_key)
    return History(events=tuple(ordered))


def history_from_operations(operations: Iterable[Operation]) -> History:
    """Emit the events of ``operations`` and number them.

    Event ids follow the tie discipline: at equal ticks responses come before
    invocations, then operations in the order given.
    """
    drafts: list[tuple[int, int, int, dict]] = []
    for index, op in enumerate(operations):
        base = dict(op_id=op.op_id, client=op.client, object=op.object, op_name=op.op_name)
        drafts.append((op.invocation_time, 1, index, dict(base, kind=INVOCATION, payload=op.args)))
        if op.response_time is not None:
            drafts.append((op.response_time, 0, index, dict(base, kind=RESPONSE, payload=op.result)))
    drafts.sort(key=lambda d: d[:3])
    events = [
        EventRecord(event_id=number, time=time, **fields)
        for number, (time, _, _, fields) in enumerate(drafts)
    ]
    return build_history(events)


def _find(h: History, op_id: str) -> OperationSpan:
    for op in h.operations():
        if op.op_id == op_id:
            return op.span
    raise UnknownOp(f"unknown op {op_id!r}")


def real_time_precedes(h: History, a: str, b: str) -> bool:
    """True iff op ``a`` responds strictly before op ``b`` is invoked."""
    span_a = _find(h, a)
    span_b = _find(h, b)
    if span_a.response_time is None:
        return False
    return span_a.response_time < span_b.invocation_time


def project_object(h: History, obj: str) -> History:
    """Sub-history of the events on one object."""
    return History(events=tuple(e for e in h.events if e.object == obj))


def extend_timelines(h: History, deltas: Mapping[str, tuple[int, int]]) -> History:
    """Move invocations earlier and responses later by per-op shifts.

    ``deltas`` maps op_id to ``(invocation_shift, response_shift)``; ops not
    listed keep their span.
    """
    shifted = []
    for event in h.events:
        before, after = deltas.get(event.op_id, (0, 0))
        if before < 0 or after < 0:
            raise MalformedInput(f"negative shift for op {event.op_id!r}")
        if event.kind == INVOCATION:
            time = event.time - before
            if time < 0:
                raise MalformedInput(f"shift moves op {event.op_id!r} before tick 0")
        else:
            time = event.time + after
        shifted.append(event.model_copy(update={"time": time}))
    try:
        return build_history(shifted)
    except ClientOverlapViolation:
        raise
    except MalformedHistory as exc:
        raise ClientOverlapViolation(str(exc), exc.event_id) from exc


class CompletionPolicy(str, Enum):
    """How ``complete_history`` treats pending operations."""

    DROP_PENDING = "drop-pending"
    CLOSE_PENDING = "close-pending-at-horizon"


def complete_history(h: History, policy: CompletionPolicy = CompletionPolicy.DROP_PENDING) -> History:
    pending = h.pending
    if not pending:
        return h
    policy = CompletionPolicy(policy)
    if policy is CompletionPolicy.DROP_PENDING:
        logger.debug("dropping %d pending ops", len(pending))
        return History(events=tuple(e for e in h.events if e.op_id not in pending))

    horizon = h.max_time() + 1
    next_id = max(e.event_id for e in h.events) + 1
    closing = []
    for event in h.events:
        if event.kind == INVOCATION and event.op_id in pending:
            closing.append(
                event.model_copy(
                    update={
                        "event_id": next_id,
                        "kind": RESPONSE,
                        "payload": UNOBSERVED,
                        "time": horizon,
                    }
                )
            )
            next_id += 1
    logger.debug("closing %d pending ops at tick %d", len(closing), horizon)
    return build_history(list(h.events) + closing)


# ---------------------------------------------------------------- trace files


def dumps_trace(h: History) -> str:
    """One compact JSON object per event, one event per line."""
    return "".join(event.model_dump_json() + "\n" for event in h.events)


def loads_trace(text: str) -> History:
    events = []
    for number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            events.append(EventRecord.model_validate_json(line))
        except ValidationError as exc:
            raise MalformedInput(f"trace line {number}: {exc.errors()[0]['msg']}") from exc
    return build_history(events)


def write_trace(h: History, path: Path | str) -> None:
    Path(path).write_text(dumps_trace(h), encoding="utf-8")


def load_trace(path: Path | str) -> History:
    return loads_trace(Path(path).read_text(encoding="utf-8"))
