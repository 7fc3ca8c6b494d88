"""Discrete-event simulation of state-machine replication.

Clients send requests to a sequencer standing in for atomic broadcast. The
sequencer cuts batches and delivers them to every replica in the same order.
Each replica executes its batches with a deterministic scheduler and answers
the client, which votes on the answers. Everything runs in one simpy
environment on integer ticks.
"""

import logging
import random
from enum import Enum
from typing import Any, Optional, Sequence

import simpy
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigInvalid, DeadlockDetected, OutOfSpecRun
from .history import History, Operation, freeze, history_from_operations
from .program import ObjectDefinition
from .scheduler import Scheduler, SchedulerKind
from .voting import (
    UNDECIDED,
    IssuedRequest,
    ResponseSet,
    VoteCompletion,
    assemble_outer_history,
    deciding_replicas,
    vote,
)

logger = logging.getLogger(__name__)

WRONG_VALUE = -1


class FailureModel(str, Enum):
    CRASH = "crash"
    BYZANTINE = "byzantine"


class Ordering(str, Enum):
    TOTAL = "total-order"
    PARTIAL = "partial-order"


class Behavior(str, Enum):
    CRASH = "crash"
    FLIP = "flip"
    DROP = "drop"
    WRONG_VALUE = "wrong_value"


class Fault(BaseModel):
    """One faulty replica; the behavior starts at ``time``."""

    model_config = ConfigDict(frozen=True)

    replica: int
    behavior: Behavior = Behavior.CRASH
    time: int = Field(default=0, ge=0)


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int = 3
    f: int = 1
    failure_model: FailureModel = FailureModel.CRASH
    ordering: Ordering = Ordering.TOTAL
    conflicts: Optional[tuple[tuple[str, str], ...]] = None
    scheduler: SchedulerKind = SchedulerKind.LOCK_LEVEL
    seed: int = 0
    fault_plan: tuple[Fault, ...] = ()
    out_of_spec: bool = False
    order_latency: int = Field(default=1, ge=1)
    batch_window: int = Field(default=1, ge=1)
    delivery_delay: int = Field(default=1, ge=1)
    reply_delay: int = Field(default=1, ge=1)
    replica_slowdown: dict[int, int] = Field(default_factory=dict)
    malicious_clients: tuple[str, ...] = ()

    @model_validator(mode="after")
    def _consistent(self) -> "SimConfig":
        if self.n < 1 or self.f < 0:
            raise ConfigInvalid("need n >= 1 and f >= 0")
        if self.failure_model is FailureModel.CRASH and self.n < 2 * self.f + 1:
            raise ConfigInvalid(f"crash model needs n >= 2f+1, got n={self.n}, f={self.f}")
        if self.failure_model is FailureModel.BYZANTINE and self.n < 3 * self.f + 1:
            raise ConfigInvalid(f"byzantine model needs n >= 3f+1, got n={self.n}, f={self.f}")
        replicas = [fault.replica for fault in self.fault_plan]
        if len(set(replicas)) != len(replicas):
            raise ConfigInvalid("a replica appears twice in the fault plan")
        for fault in self.fault_plan:
            if not 0 <= fault.replica < self.n:
                raise ConfigInvalid(f"fault plan names replica {fault.replica} of {self.n}")
            if self.failure_model is FailureModel.CRASH and fault.behavior is not Behavior.CRASH:
                raise ConfigInvalid(f"{fault.behavior.value} needs the byzantine failure model")
        for replica, cost in self.replica_slowdown.items():
            if not 0 <= replica < self.n or cost < 1:
                raise ConfigInvalid(f"bad slowdown {cost} for replica {replica}")
        if self.ordering is Ordering.PARTIAL and self.scheduler is not SchedulerKind.SEQUENTIAL:
            raise ConfigInvalid("partial-order delivery needs the sequential scheduler")
        return self

    @classmethod
    def load(cls, data: dict) -> "SimConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as exc:
            raise ConfigInvalid(f"invalid simulation config: {exc.errors()[0]['msg']}") from exc

    def fault_of(self, replica: int) -> Optional[Fault]:
        for fault in self.fault_plan:
            if fault.replica == replica:
                return fault
        return None

    @property
    def correct_replicas(self) -> tuple[int, ...]:
        faulty = {fault.replica for fault in self.fault_plan}
        return tuple(r for r in range(self.n) if r not in faulty)

    def vote_threshold(self, client: str) -> int:
        """The f a client votes with: 0 under crash faults or for a malicious client."""
        if self.failure_model is FailureModel.CRASH or client in self.malicious_clients:
            return 0
        return self.f

    def conflicting(self, a: str, b: str) -> bool:
        if self.conflicts is None:
            return True
        return (a, b) in self.conflicts or (b, a) in self.conflicts


class ClientRequest(BaseModel):
    """One workload entry. ``after`` lists requests that must complete first."""

    model_config = ConfigDict(frozen=True)

    request_id: str
    client: str
    op_name: str
    args: tuple = ()
    issue_time: int = Field(default=0, ge=0)
    after: tuple[str, ...] = ()

    @field_validator("args", mode="before")
    @classmethod
    def _freeze(cls, value: Any) -> Any:
        return freeze(value)


class SimOutput(BaseModel):
    """Everything a run produced."""

    model_config = ConfigDict(frozen=True)

    client_history: History = History()
    inner_histories: dict[int, History] = Field(default_factory=dict)
    delivery_order: dict[int, tuple[str, ...]] = Field(default_factory=dict)
    replica_states: dict[int, dict[str, Any]] = Field(default_factory=dict)
    causal_edges: tuple[tuple[str, str], ...] = ()
    responses: dict[str, dict[int, Any]] = Field(default_factory=dict)
    decided: dict[str, Any] = Field(default_factory=dict)
    deciders: dict[str, tuple[int, ...]] = Field(default_factory=dict)
    issue_order: dict[str, tuple[str, ...]] = Field(default_factory=dict)
    sequence: tuple[str, ...] = ()
    correct_replicas: tuple[int, ...] = ()
    malicious_clients: tuple[str, ...] = ()
    dropped_duplicates: tuple[str, ...] = ()
    blocked_waits: dict[int, tuple[str, ...]] = Field(default_factory=dict)

    def correct_client_history(self) -> History:
        """Client history without the operations of malicious clients."""
        return History(
            events=tuple(e for e in self.client_history.events if e.client not in self.malicious_clients)
        )

    def replica_responses(self, request_id: str, replicas: Sequence[int]) -> list[Any]:
        table = self.responses.get(request_id, {})
        return [table[r] for r in replicas if r in table]

    def containment_violations(self) -> list[tuple[int, str]]:
        """(replica, request) pairs whose inner span leaves the client's span.

        Only the replicas that decided a request are held to its client span; a
        slow replica may still be executing after the client has moved on.
        """
        outer = {op.op_id: op for op in self.client_history.operations()}
        violations = []
        for request_id, replicas in self.deciders.items():
            op = outer.get(request_id)
            if op is None:
                continue
            for replica in replicas:
                inner = {o.op_id: o for o in self.inner_histories.get(replica, History()).operations()}
                span = inner.get(request_id)
                if span is None or span.response_time is None:
                    violations.append((replica, request_id))
                elif span.invocation_time < op.invocation_time or span.response_time > op.response_time:
                    violations.append((replica, request_id))
        return violations


def corrupt(behavior: Behavior, value: Any) -> Any:
    """Apply a Byzantine behavior to a response value."""
    if behavior is Behavior.WRONG_VALUE:
        return WRONG_VALUE
    if isinstance(value, bool):
        return not value
    if isinstance(value, int):
        return value ^ 1
    if isinstance(value, str):
        return value[::-1] + "~"
    return ["corrupt", value]


class _Submission:
    __slots__ = ("request", "seq", "arrival")

    def __init__(self, request: ClientRequest, seq: int, arrival: int):
        self.request = request
        self.seq = seq
        self.arrival = arrival

    @property
    def order_key(self) -> tuple:
        return (self.arrival, self.request.client, self.request.request_id, self.seq)


class _Sequencer:
    """Total-order oracle: batches arrivals, deduplicates request ids, broadcasts."""

    def __init__(self, sim: "_Simulation"):
        self.sim = sim
        self.pending: list[_Submission] = []
        self.cut: Optional[simpy.Process] = None
        self.ordered: set[str] = set()
        self.sequence: list[str] = []
        self.dropped: list[str] = []
        self.batches = 0

    def arrive(self, submission: _Submission) -> None:
        self.pending.append(submission)
        if self.cut is None:
            self.cut = self.sim.env.process(self._cut())

    def _cut(self):
        env = self.sim.env
        yield env.timeout(self.sim.cfg.batch_window)
        ready = sorted((s for s in self.pending if s.arrival < env.now), key=lambda s: s.order_key)
        self.pending = [s for s in self.pending if s.arrival >= env.now]
        self.cut = env.process(self._cut()) if self.pending else None

        batch = []
        for submission in ready:
            rid = submission.request.request_id
            if rid in self.ordered:
                self.dropped.append(rid)
                logger.info("sequencer drops duplicate request id %s", rid)
                continue
            self.ordered.add(rid)
            self.sequence.append(rid)
            batch.append(submission.request)
        if batch:
            number = self.batches
            self.batches += 1
            logger.debug("batch %d at t=%d: %s", number, env.now, [r.request_id for r in batch])
            for replica in self.sim.replicas:
                env.process(self._deliver(replica, number, tuple(batch)))

    def _deliver(self, replica: "_Replica", number: int, batch: tuple):
        yield self.sim.env.timeout(self.sim.cfg.delivery_delay)
        replica.inbox.put((number, batch))


class _Replica:
    def __init__(self, sim: "_Simulation", index: int):
        self.sim = sim
        self.index = index
        self.fault = sim.cfg.fault_of(index)
        self.scheduler = Scheduler(sim.obj, sim.cfg.scheduler, sim.cfg.seed)
        self.inbox = simpy.Store(sim.env)
        self.delivered: list[str] = []
        self.requests: dict[str, ClientRequest] = {}
        self.admitted_at: dict[str, int] = {}
        self.finished_at: dict[str, int] = {}
        self.results: dict[str, Any] = {}

    @property
    def crashed(self) -> bool:
        return (
            self.fault is not None
            and self.fault.behavior is Behavior.CRASH
            and self.sim.env.now >= self.fault.time
        )

    def run(self):
        env = self.sim.env
        cost = self.sim.cfg.replica_slowdown.get(self.index, 1)
        while not self.crashed:
            if self.scheduler.quiescent():
                number, batch = yield self.inbox.get()
                if self.crashed:
                    break
                for request in self._local_order(number, batch):
                    self.scheduler.admit(request.request_id, request.op_name, request.args)
                    self.requests[request.request_id] = request
                    self.admitted_at[request.request_id] = env.now
                    self.delivered.append(request.request_id)
                continue
            finished = self.scheduler.run_round()
            yield env.timeout(cost)
            for thread in finished:
                self.finished_at[thread.request_id] = env.now
                self.results[thread.request_id] = thread.result
                self._reply(thread.request_id, thread.result)
        logger.info("replica %d crashed at t=%d", self.index, env.now)

    def _local_order(self, number: int, batch: tuple) -> list[ClientRequest]:
        cfg = self.sim.cfg
        items = list(batch)
        if cfg.ordering is Ordering.TOTAL:
            return items
        rng = random.Random(f"{cfg.seed}:{self.index}:{number}")
        position = 0
        while position < len(items) - 1:
            a, b = items[position], items[position + 1]
            if not cfg.conflicting(a.op_name, b.op_name) and rng.random() < 0.5:
                items[position], items[position + 1] = b, a
                position += 2
            else:
                position += 1
        return items

    def _reply(self, request_id: str, value: Any) -> None:
        if self.crashed:
            return
        env = self.sim.env
        if self.fault is not None and env.now >= self.fault.time:
            if self.fault.behavior is Behavior.DROP:
                return
            if self.fault.behavior is not Behavior.CRASH:
                value = corrupt(self.fault.behavior, value)
        self.sim.responses.setdefault(request_id, {})[self.index] = value
        env.process(self.sim.deliver_reply(self.index, request_id, value))


class _Simulation:
    def __init__(self, cfg: SimConfig, workload: Sequence[ClientRequest], obj: ObjectDefinition):
        self.cfg = cfg
        self.workload = list(workload)
        self.obj = obj
        self.env = simpy.Environment()
        self.sequencer = _Sequencer(self)
        self.replicas = [_Replica(self, i) for i in range(cfg.n)]
        self.completion: dict[str, simpy.Event] = {}
        self.response_sets: dict[str, ResponseSet] = {}
        self.responses: dict[str, dict[int, Any]] = {}
        self.decisions: dict[str, VoteCompletion] = {}
        self.issued: list[IssuedRequest] = []
        self.clients: dict[str, str] = {}
        self.seq = 0
        for request in self.workload:
            if request.request_id not in self.completion:
                self.completion[request.request_id] = self.env.event()
                self.response_sets[request.request_id] = ResponseSet(request.request_id)
                self.clients[request.request_id] = request.client

    def client(self, name: str, requests: list[ClientRequest]):
        env = self.env
        groups: list[list[ClientRequest]] = []
        for request in requests:
            twin = next((g for g in groups if g[0].request_id == request.request_id), None)
            if twin is not None:
                twin.append(request)
            else:
                groups.append([request])
        for group in groups:
            first = group[0]
            if first.issue_time > env.now:
                yield env.timeout(first.issue_time - env.now)
            for dep in first.after:
                yield self.completion[dep]
            self.issued.append(
                IssuedRequest(
                    request_id=first.request_id,
                    client=name,
                    object=self.obj.name,
                    op_name=first.op_name,
                    args=first.args,
                    issue_time=env.now,
                )
            )
            for instance in group:
                env.process(self._submit(instance))
            yield self.completion[first.request_id]

    def _submit(self, request: ClientRequest):
        submission = _Submission(request, self.seq, self.env.now + self.cfg.order_latency)
        self.seq += 1
        yield self.env.timeout(self.cfg.order_latency)
        self.sequencer.arrive(submission)

    def deliver_reply(self, replica: int, request_id: str, value: Any):
        yield self.env.timeout(self.cfg.reply_delay)
        self.response_sets[request_id].add(replica, value, self.env.now)
        if request_id in self.decisions:
            return
        threshold = self.cfg.vote_threshold(self.clients[request_id])
        decided = vote(self.response_sets[request_id], threshold)
        if decided is UNDECIDED:
            return
        self.decisions[request_id] = VoteCompletion(
            request_id=request_id,
            value=decided,
            decided_at=self.env.now,
            replicas=deciding_replicas(self.response_sets[request_id], threshold),
        )
        self.completion[request_id].succeed()

    def run(self) -> SimOutput:
        by_client: dict[str, list[ClientRequest]] = {}
        for request in self.workload:
            by_client.setdefault(request.client, []).append(request)
        for name in sorted(by_client):
            self.env.process(self.client(name, by_client[name]))
        for replica in self.replicas:
            self.env.process(replica.run())
        self.env.run()

        for replica in self.replicas:
            stuck = replica.scheduler.waiting
            if stuck and not replica.crashed:
                raise DeadlockDetected(
                    f"replica {replica.index}: {[t.request_id for t in stuck]} still wait "
                    "for a signal at the end of the run"
                )
        return self._output()

    def _inner_history(self, replica: _Replica) -> History:
        operations = []
        for rid in replica.delivered:
            request = replica.requests[rid]
            operations.append(
                Operation(
                    op_id=rid,
                    client=request.client,
                    object=self.obj.name,
                    op_name=request.op_name,
                    args=request.args,
                    result=replica.results.get(rid),
                    invocation_time=replica.admitted_at[rid],
                    response_time=replica.finished_at.get(rid),
                )
            )
        return history_from_operations(operations)

    def _output(self) -> SimOutput:
        issue_order: dict[str, list[str]] = {}
        for request in self.issued:
            issue_order.setdefault(request.client, []).append(request.request_id)
        edges = []
        seen = set()
        for request in self.workload:
            for dep in request.after:
                if (dep, request.request_id) not in seen:
                    seen.add((dep, request.request_id))
                    edges.append((dep, request.request_id))
        return SimOutput(
            client_history=assemble_outer_history(self.issued, self.decisions),
            inner_histories={r.index: self._inner_history(r) for r in self.replicas},
            delivery_order={r.index: tuple(r.delivered) for r in self.replicas},
            replica_states={r.index: r.scheduler.valuation() for r in self.replicas},
            causal_edges=tuple(edges),
            responses={rid: dict(sorted(table.items())) for rid, table in sorted(self.responses.items())},
            decided={rid: done.value for rid, done in sorted(self.decisions.items())},
            deciders={rid: done.replicas for rid, done in sorted(self.decisions.items())},
            issue_order={client: tuple(rids) for client, rids in sorted(issue_order.items())},
            sequence=tuple(self.sequencer.sequence),
            correct_replicas=self.cfg.correct_replicas,
            malicious_clients=self.cfg.malicious_clients,
            dropped_duplicates=tuple(self.sequencer.dropped),
            blocked_waits={
                r.index: tuple(t.request_id for t in r.scheduler.threads if t.waited)
                for r in self.replicas
            },
        )


def _validate_run(cfg: SimConfig, workload: Sequence[ClientRequest], obj: ObjectDefinition) -> None:
    faulty = len(cfg.fault_plan)
    if faulty > cfg.f and not cfg.out_of_spec:
        raise OutOfSpecRun(
            f"{faulty} faulty replicas exceed f={cfg.f}; set out_of_spec to run anyway"
        )
    ids = {r.request_id for r in workload}
    for request in workload:
        program = obj.programs.get(request.op_name)
        if program is None:
            raise ConfigInvalid(f"object {obj.name!r} has no op {request.op_name!r}")
        if program.has_nested_calls:
            raise ConfigInvalid(f"op {request.op_name!r} issues nested calls; replicas cannot run it")
        if not program.variadic and len(request.args) != len(program.params):
            raise ConfigInvalid(
                f"{request.request_id}: {request.op_name} takes {len(program.params)} argument(s)"
            )
        missing = set(request.after) - ids
        if missing:
            raise ConfigInvalid(f"{request.request_id} depends on unknown {sorted(missing)}")


def run_smr(cfg: SimConfig, workload: Sequence[ClientRequest], obj: ObjectDefinition) -> SimOutput:
    """Simulate ordering plus per-replica execution of ``workload`` on ``obj``."""
    _validate_run(cfg, workload, obj)
    if len(cfg.fault_plan) > cfg.f:
        logger.warning("running out of spec: %d faults with f=%d", len(cfg.fault_plan), cfg.f)
    logger.info(
        "run_smr: n=%d f=%d %s %s seed=%d, %d requests",
        cfg.n,
        cfg.f,
        cfg.failure_model.value,
        cfg.scheduler.value,
        cfg.seed,
        len(workload),
    )
    return _Simulation(cfg, workload, obj).run()


def byzantine_client_duplicate_ids(
    cfg: SimConfig, workload: Sequence[ClientRequest], obj: ObjectDefinition
) -> SimOutput:
    """Run a workload in which a client reuses request ids for different payloads.

    The sequencer keeps the first ordered instance of every id.
    """
    if cfg.failure_model is not FailureModel.BYZANTINE:
        raise ConfigInvalid("the duplicate-id attack is defined for the byzantine model")
    out = run_smr(cfg, workload, obj)
    if out.dropped_duplicates:
        logger.info("dropped duplicate ids: %s", ", ".join(out.dropped_duplicates))
    return out
