"""Deterministic execution of request threads inside one replica.

Two policies:

  - sequential: one thread at a time, to completion, in delivery order
  - lock-level: round based; every unfinished thread gets one turn per round
    in delivery order rotated by ``(round + seed)``. A turn ends when the
    thread finishes, blocks or completes an unlock. Contended locks are
    handed over through a per-lock FIFO grant queue.

Grant order therefore depends only on what was admitted, the programs, the
seed and the round counter.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict

from .errors import DeadlockDetected, UnsupportedProgram
from .program import (
    Lock,
    NestedCall,
    ObjectDefinition,
    Program,
    Return,
    Signal,
    Unlock,
    Wait,
    apply_local,
    return_value,
)

logger = logging.getLogger(__name__)


class SchedulerKind(str, Enum):
    SEQUENTIAL = "sequential"
    LOCK_LEVEL = "lock-level"


class ThreadStatus(str, Enum):
    RUNNING = "running"
    BLOCKED_ON_LOCK = "blocked-on-lock"
    BLOCKED_ON_COND = "blocked-on-cond"
    FINISHED = "finished"


@dataclass
class RequestThread:
    """Execution state of one admitted request."""

    request_id: str
    program: Program
    args: tuple
    local_vars: dict[str, Any]
    pc: int = 0
    status: ThreadStatus = ThreadStatus.RUNNING
    waiting_on: Optional[tuple[str, str]] = None
    signalled: bool = False
    waited: bool = False
    result: Any = None

    @property
    def finished(self) -> bool:
        return self.status is ThreadStatus.FINISHED


class SchedulerState(BaseModel):
    """Snapshot of a scheduler, for inspection and tests."""

    model_config = ConfigDict(frozen=True)

    round: int
    holders: dict[str, str]
    grant_queues: dict[str, tuple[str, ...]]
    threads: dict[str, ThreadStatus]
    pending: tuple[str, ...] = ()


@dataclass
class Scheduler:
    obj: ObjectDefinition
    kind: SchedulerKind = SchedulerKind.LOCK_LEVEL
    seed: int = 0
    shared: dict[str, Any] = field(init=False)
    threads: list[RequestThread] = field(default_factory=list, init=False)
    round: int = field(default=0, init=False)
    holders: dict[str, RequestThread] = field(default_factory=dict, init=False)
    grant_queues: dict[str, deque] = field(default_factory=dict, init=False)
    cond_waiters: dict[str, deque] = field(default_factory=dict, init=False)

    def __post_init__(self):
        self.kind = SchedulerKind(self.kind)
        self.shared = self.obj.initial_valuation()

    # ------------------------------------------------------------ admission

    def admit(self, request_id: str, op_name: str, args: tuple) -> RequestThread:
        program = self.obj.program(op_name)
        if program.has_nested_calls:
            raise UnsupportedProgram(f"op {op_name!r} issues nested calls")
        thread = RequestThread(
            request_id=request_id,
            program=program,
            args=tuple(args),
            local_vars=program.initial_locals(tuple(args)),
        )
        self.threads.append(thread)
        logger.debug("admitted %s (%s) at round %d", request_id, op_name, self.round)
        return thread

    @property
    def runnable(self) -> list[RequestThread]:
        return [t for t in self.threads if t.status is ThreadStatus.RUNNING]

    @property
    def unfinished(self) -> list[RequestThread]:
        return [t for t in self.threads if not t.finished]

    @property
    def waiting(self) -> list[RequestThread]:
        return [t for t in self.threads if t.status is ThreadStatus.BLOCKED_ON_COND]

    def quiescent(self) -> bool:
        """True when no admitted thread can make progress on its own."""
        return not any(
            t.status in (ThreadStatus.RUNNING, ThreadStatus.BLOCKED_ON_LOCK) for t in self.threads
        )

    # ------------------------------------------------------------ rounds

    def run_round(self) -> list[RequestThread]:
        """Run one scheduling round and return the threads that finished in it."""
        if self.kind is SchedulerKind.SEQUENTIAL:
            order = self.unfinished[:1]
        else:
            order = self.unfinished
            if order:
                shift = (self.round + self.seed) % len(order)
                order = order[shift:] + order[:shift]
        finished = []
        for thread in order:
            if thread.status is ThreadStatus.RUNNING:
                self._turn(thread)
                if thread.finished:
                    finished.append(thread)
        self.round += 1
        stuck = [t for t in self.threads if t.status is ThreadStatus.BLOCKED_ON_LOCK]
        if stuck and not self.runnable:
            raise DeadlockDetected(
                f"threads {[t.request_id for t in stuck]} wait for locks nobody will release"
            )
        return finished

    def _turn(self, thread: RequestThread) -> None:
        to_completion = self.kind is SchedulerKind.SEQUENTIAL
        instructions = thread.program.instructions
        while thread.status is ThreadStatus.RUNNING:
            instr = instructions[thread.pc]
            if isinstance(instr, Lock):
                if not self._acquire(thread, instr.lock):
                    return
                thread.pc += 1
            elif isinstance(instr, Unlock):
                self._release(instr.lock)
                thread.pc += 1
                if not to_completion:
                    return
            elif isinstance(instr, Wait):
                if not self._may_pass(thread, instr):
                    if to_completion:
                        raise DeadlockDetected(
                            f"{thread.request_id} waits on {instr.cond!r}; the sequential "
                            "scheduler cannot run another request meanwhile"
                        )
                    self._block_on_cond(thread, instr)
                    return
                thread.pc += 1
            elif isinstance(instr, Signal):
                self._signal(instr.cond)
                thread.pc += 1
            elif isinstance(instr, Return):
                thread.result = return_value(instr, thread.local_vars)
                thread.status = ThreadStatus.FINISHED
                thread.pc += 1
            elif isinstance(instr, NestedCall):
                raise UnsupportedProgram(f"nested call in {thread.request_id}")
            else:
                apply_local(instr, self.shared, thread.local_vars)
                thread.pc += 1

    # ------------------------------------------------------------ locks and conditions

    def _acquire(self, thread: RequestThread, lock: str) -> bool:
        holder = self.holders.get(lock)
        if holder is thread:
            return True
        queue = self.grant_queues.setdefault(lock, deque())
        if holder is None and not queue:
            self.holders[lock] = thread
            return True
        if thread not in queue:
            queue.append(thread)
        thread.status = ThreadStatus.BLOCKED_ON_LOCK
        return False

    def _release(self, lock: str) -> None:
        del self.holders[lock]
        queue = self.grant_queues.get(lock)
        if queue:
            heir = queue.popleft()
            self.holders[lock] = heir
            heir.status = ThreadStatus.RUNNING
            logger.debug("lock %s handed to %s", lock, heir.request_id)

    def _may_pass(self, thread: RequestThread, instr: Wait) -> bool:
        predicate = self.obj.conditions.get(instr.cond)
        signalled, thread.signalled = thread.signalled, False
        if predicate is None:
            return signalled
        return self.obj.condition_holds(instr.cond, self.shared)

    def _block_on_cond(self, thread: RequestThread, instr: Wait) -> None:
        thread.status = ThreadStatus.BLOCKED_ON_COND
        thread.waiting_on = (instr.cond, instr.lock)
        thread.waited = True
        self.cond_waiters.setdefault(instr.cond, deque()).append(thread)
        self._release(instr.lock)
        logger.debug("%s waits on %s", thread.request_id, instr.cond)

    def _signal(self, cond: str) -> None:
        waiters = self.cond_waiters.get(cond)
        if not waiters:
            return
        waiter = waiters.popleft()
        _, lock = waiter.waiting_on
        waiter.waiting_on = None
        waiter.signalled = True
        waiter.status = ThreadStatus.RUNNING
        if not self._acquire(waiter, lock):
            logger.debug("%s signalled, queued for %s", waiter.request_id, lock)

    # ------------------------------------------------------------ inspection

    def snapshot(self, pending: tuple[str, ...] = ()) -> SchedulerState:
        return SchedulerState(
            round=self.round,
            holders={lock: t.request_id for lock, t in sorted(self.holders.items())},
            grant_queues={
                lock: tuple(t.request_id for t in queue)
                for lock, queue in sorted(self.grant_queues.items())
                if queue
            },
            threads={t.request_id: t.status for t in self.threads},
            pending=pending,
        )

    def valuation(self) -> dict[str, Any]:
        return dict(sorted(self.shared.items()))
