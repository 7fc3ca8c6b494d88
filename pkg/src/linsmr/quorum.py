"""Quorum-replicated register with and without read repair.

Three replicas, read and write quorums of two. Each client message to a
replica takes the delay the plan assigns to ``(op_id, phase, replica)``
(default 1); replies take one tick. A write first queries a quorum for the
highest version and stores its value under the next one, tagged with the
writing client. A read returns the newest value among the first two replies;
with read repair it first writes that value back and waits for two
acknowledgements.
"""

import itertools
import logging
import random
from typing import Any, Iterator, Literal, Mapping, Optional, Sequence

import simpy
from pydantic import BaseModel, ConfigDict, Field

from .errors import ConfigInvalid
from .history import History, Operation, history_from_operations

logger = logging.getLogger(__name__)

REPLICAS = 3
QUORUM = 2
DEFAULT_DELAY = 1
REGISTER = "register"

DelayKey = tuple[str, str, int]
DelayPlan = Mapping[DelayKey, int]

# a write is "query" then "write"; a read is "read", then "repair" when enabled
PHASES = ("query", "write", "read", "repair")
DELAY_CHOICES = (1, 50)


class QuorumOp(BaseModel):
    model_config = ConfigDict(frozen=True)

    op_id: str
    client: str
    kind: Literal["write", "read"]
    value: Optional[int] = None
    issue_time: int = Field(default=0, ge=0)


def stale_read_workload() -> list[QuorumOp]:
    """One write and two later reads from three clients."""
    return [
        QuorumOp(op_id="w1", client="writer", kind="write", value=1, issue_time=0),
        QuorumOp(op_id="r1", client="reader1", kind="read", issue_time=3),
        QuorumOp(op_id="r2", client="reader2", kind="read", issue_time=8),
    ]


def stale_read_plan() -> dict[DelayKey, int]:
    """Delays under which the second read misses the write seen by the first.

    The write reaches replica 0 quickly and the others late; r1 asks
    replicas 0 and 1, r2 asks replicas 1 and 2.
    """
    return {
        ("w1", "write", 1): 50,
        ("w1", "write", 2): 50,
        ("r1", "read", 2): 50,
        ("r2", "read", 0): 50,
    }


class _Replica:
    def __init__(self, index: int):
        self.index = index
        self.value = 0
        self.version: tuple[int, str] = (0, "")

    def store(self, value: int, version: tuple[int, str]) -> None:
        if version > self.version:
            self.value, self.version = value, version


class _QuorumRun:
    def __init__(self, read_repair: bool, plan: DelayPlan, workload: Sequence[QuorumOp]):
        self.read_repair = read_repair
        self.plan = plan
        self.workload = list(workload)
        self.env = simpy.Environment()
        self.replicas = [_Replica(i) for i in range(REPLICAS)]
        self.results: dict[str, tuple[Any, int, int]] = {}

    def delay(self, op_id: str, phase: str, replica: int) -> int:
        return self.plan.get((op_id, phase, replica), DEFAULT_DELAY)

    def _message(self, op: QuorumOp, phase: str, replica: _Replica, inbox: simpy.Store, payload):
        yield self.env.timeout(self.delay(op.op_id, phase, replica.index))
        if phase in ("query", "read"):
            reply = (replica.value, replica.version)
        else:
            replica.store(*payload)
            reply = "ack"
        yield self.env.timeout(1)
        inbox.put((replica.index, reply))

    def _round_trip(self, op: QuorumOp, phase: str, payload=None):
        inbox = simpy.Store(self.env)
        for replica in self.replicas:
            self.env.process(self._message(op, phase, replica, inbox, payload))
        replies = []
        for _ in range(QUORUM):
            replies.append((yield inbox.get()))
        return replies

    def client(self, ops: list[QuorumOp]):
        env = self.env
        for op in ops:
            if op.issue_time > env.now:
                yield env.timeout(op.issue_time - env.now)
            start = env.now
            if op.kind == "write":
                replies = yield from self._round_trip(op, "query")
                highest = max(version for _, (_, version) in replies)
                yield from self._round_trip(op, "write", (op.value, (highest[0] + 1, op.client)))
                result: Any = "ok"
            else:
                replies = yield from self._round_trip(op, "read")
                value, version = max((reply for _, reply in replies), key=lambda r: r[1])
                if self.read_repair:
                    yield from self._round_trip(op, "repair", (value, version))
                result = value
            self.results[op.op_id] = (result, start, env.now)
            logger.debug("%s -> %r in [%d, %d]", op.op_id, result, start, env.now)

    def run(self) -> History:
        by_client: dict[str, list[QuorumOp]] = {}
        for op in self.workload:
            by_client.setdefault(op.client, []).append(op)
        for name in sorted(by_client):
            self.env.process(self.client(by_client[name]))
        self.env.run()
        operations = []
        for op in self.workload:
            result, start, end = self.results[op.op_id]
            operations.append(
                Operation(
                    op_id=op.op_id,
                    client=op.client,
                    object=REGISTER,
                    op_name=op.kind,
                    args=(op.value,) if op.kind == "write" else (),
                    result=result,
                    invocation_time=start,
                    response_time=end,
                )
            )
        return history_from_operations(operations)


def _validate(plan: DelayPlan, workload: Sequence[QuorumOp]) -> None:
    ids = [op.op_id for op in workload]
    if len(set(ids)) != len(ids):
        raise ConfigInvalid("duplicate op ids in the quorum workload")
    for op in workload:
        if op.kind == "write" and op.value is None:
            raise ConfigInvalid(f"write {op.op_id!r} has no value")
    for (op_id, phase, replica), delay in plan.items():
        if op_id not in ids or phase not in PHASES or not 0 <= replica < REPLICAS:
            raise ConfigInvalid(f"delay plan entry {(op_id, phase, replica)} matches no message")
        if delay < 1:
            raise ConfigInvalid(f"delay {delay} for {(op_id, phase, replica)} is below one tick")


def run_quorum_register(
    read_repair: bool,
    delay_plan: Optional[DelayPlan] = None,
    workload: Optional[Sequence[QuorumOp]] = None,
) -> History:
    """Simulate the quorum register and return the client-visible history."""
    plan = dict(delay_plan or {})
    workload = list(workload) if workload is not None else stale_read_workload()
    _validate(plan, workload)
    return _QuorumRun(read_repair, plan, workload).run()


def two_writer_workload() -> list[QuorumOp]:
    """Two clients write in turn, then two readers follow."""
    return [
        QuorumOp(op_id="w1", client="zed", kind="write", value=1, issue_time=0),
        QuorumOp(op_id="w2", client="amy", kind="write", value=2, issue_time=3),
        QuorumOp(op_id="r1", client="reader1", kind="read", issue_time=4),
        QuorumOp(op_id="r2", client="reader2", kind="read", issue_time=9),
    ]


def delay_keys(workload: Sequence[QuorumOp], read_repair: bool = True) -> list[DelayKey]:
    keys: list[DelayKey] = []
    for op in workload:
        if op.kind == "write":
            phases = ["query", "write"]
        else:
            phases = ["read"] + (["repair"] if read_repair else [])
        for phase in phases:
            keys.extend((op.op_id, phase, replica) for replica in range(REPLICAS))
    return keys


def enumerate_delay_plans(
    workload: Sequence[QuorumOp],
    choices: Sequence[int] = DELAY_CHOICES,
    limit: Optional[int] = 10_000,
    read_repair: bool = True,
    seed: int = 0,
) -> Iterator[dict[DelayKey, int]]:
    """Delay plans over every message of ``workload``.

    All of them in order when they fit in ``limit``; otherwise ``limit``
    distinct plans drawn with ``seed`` from the whole space.
    """
    keys = delay_keys(workload, read_repair)
    total = len(choices) ** len(keys)
    if limit is None or total <= limit:
        for delays in itertools.product(choices, repeat=len(keys)):
            yield dict(zip(keys, delays))
        return
    for index in sorted(random.Random(seed).sample(range(total), limit)):
        plan = {}
        for key in reversed(keys):
            index, digit = divmod(index, len(choices))
            plan[key] = choices[digit]
        yield {key: plan[key] for key in keys}
