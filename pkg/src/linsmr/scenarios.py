"""Scenario programs and the catalog of expected verdicts.

The catalog is the single table of what each scenario should produce at every
level of the hierarchy; the ``scenarios`` suite checks it.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import simpy
from pydantic import BaseModel, ConfigDict, ValidationError

from .errors import ConfigInvalid, UnknownScenario
from .history import History, Operation, history_from_operations
from .program import (
    NestedCall,
    ObjectDefinition,
    Program,
    Return,
    apply_local,
    compile_object,
    compile_program,
    return_value,
)
from .quorum import run_quorum_register, stale_read_plan, stale_read_workload
from .scheduler import Scheduler, SchedulerKind
from .simulator import (
    Behavior,
    ClientRequest,
    FailureModel,
    Fault,
    SimConfig,
    SimOutput,
    byzantine_client_duplicate_ids,
    run_smr,
)
from .specs import SpecBundle, aggregate_cell_spec, get_bundle, register_spec

logger = logging.getLogger(__name__)

LISTING1_SOURCE = """
object lockObject
var sharedVar = 1

op D() {
  lock(myLock)
  localVar = read(sharedVar)
  localVar = localVar + 1
  write(sharedVar, localVar)
  unlock(myLock)
  localVar = localVar * 2
  lock(myLock)
  write(sharedVar, localVar)
  unlock(myLock)
  return()
}

op E() {
  lock(myLock)
  localVar = read(sharedVar)
  unlock(myLock)
  return(localVar)
}
"""

PRODUCER_CONSUMER_SOURCE = """
object mailbox
var item = 0
var flag = 0
cond ready when flag

op consume() {
  lock(m)
  wait(ready, m)
  x = read(item)
  write(flag, 0)
  unlock(m)
  return(x)
}

op produce(v) {
  lock(m)
  write(item, v)
  write(flag, 1)
  signal(ready)
  unlock(m)
  return()
}
"""

COMPOSITE_F_SOURCE = """
op F() {
  a = call(cell, G)
  b = a * 2
  call(cell, H, b)
  return()
}
"""


def listing1_object() -> ObjectDefinition:
    return compile_object(LISTING1_SOURCE)


def producer_consumer_object() -> ObjectDefinition:
    return compile_object(PRODUCER_CONSUMER_SOURCE)


# ---------------------------------------------------------------- listing 1


def run_listing1(seed: int = 0, scheduler: SchedulerKind = SchedulerKind.LOCK_LEVEL) -> SimOutput:
    """D and E issued together by two clients on three crash-tolerant replicas."""
    cfg = SimConfig(n=3, f=1, scheduler=scheduler, seed=seed)
    workload = [
        ClientRequest(request_id="D", client="c1", op_name="D"),
        ClientRequest(request_id="E", client="c2", op_name="E"),
    ]
    return run_smr(cfg, workload, listing1_object())


# ---------------------------------------------------------------- nested invocations


NESTED_PERIOD = 8
NESTED_COMPOSITE = "composite"
NESTED_AGGREGATE = "cell"


class _AggregateServer:
    """Executes requests on the aggregated object one at a time.

    Messages arriving in the same tick run nested calls first, then client
    requests, each group in send order.
    """

    def __init__(self, env: simpy.Environment):
        self.env = env
        self.scheduler = Scheduler(
            ObjectDefinition.from_spec(aggregate_cell_spec(), NESTED_AGGREGATE),
            SchedulerKind.SEQUENTIAL,
        )
        self.arrivals: dict[int, list] = {}
        self.sent = 0
        self.operations: list[Operation] = []

    def send(self, client: str, op_name: str, args: tuple, nested: bool, request_id: str):
        """Process: deliver one request and return its result to the caller."""
        env = self.env
        sent_at = env.now
        done = env.event()
        order = (0 if nested else 1, self.sent)
        self.sent += 1
        yield env.timeout(1)
        batch = self.arrivals.setdefault(env.now, [])
        if not batch:
            env.process(self._flush(env.now))
        batch.append((order, request_id, op_name, args, done))
        result = yield done
        yield env.timeout(1)
        self.operations.append(
            Operation(
                op_id=request_id,
                client=client,
                object=NESTED_AGGREGATE,
                op_name=op_name,
                args=args,
                result=result,
                invocation_time=sent_at,
                response_time=env.now,
            )
        )
        return result

    def _flush(self, tick: int):
        yield self.env.timeout(0)
        for _, request_id, op_name, args, done in sorted(self.arrivals.pop(tick), key=lambda m: m[0]):
            thread = self.scheduler.admit(request_id, op_name, args)
            self.scheduler.run_round()
            logger.debug("t=%d %s%s -> %r", tick, op_name, args, thread.result)
            done.succeed(thread.result)


def _run_composite(env: simpy.Environment, server: _AggregateServer, program: Program, record: dict):
    """Interpret F on the composite server; nested calls go to the aggregated object."""
    invoked = env.now
    yield env.timeout(1)
    local_vars = program.initial_locals(())
    calls = 0
    result: Any = None
    for instr in program.instructions:
        if isinstance(instr, NestedCall):
            calls += 1
            args = tuple(arg.evaluate(local_vars) for arg in instr.args)
            value = yield from server.send(NESTED_COMPOSITE, instr.op, args, True, f"F.{instr.op}{calls}")
            if instr.target:
                local_vars[instr.target] = value
        elif isinstance(instr, Return):
            result = return_value(instr, local_vars)
        else:
            apply_local(instr, {}, local_vars)
    yield env.timeout(1)
    record["F"] = (result, invoked, env.now)


def _run_direct(env: simpy.Environment, server: _AggregateServer, issue: int, record: dict):
    yield env.timeout(issue)
    invoked = env.now
    value = yield from server.send("c-j", "J", (), False, "J")
    record["J"] = (value, invoked, env.now)


def run_nested_scenario(seed: int = 1) -> tuple[History, History]:
    """Return the aggregated object's history and the composite's history.

    F is issued at tick 0; J is issued at tick ``seed % 8``. Seeds 1 and 2 put
    J between F's nested calls G and H.
    """
    env = simpy.Environment()
    server = _AggregateServer(env)
    program = compile_program(COMPOSITE_F_SOURCE)
    record: dict[str, tuple] = {}
    env.process(_run_composite(env, server, program, record))
    env.process(_run_direct(env, server, seed % NESTED_PERIOD, record))
    env.run()

    aggregated = history_from_operations(
        sorted(server.operations, key=lambda op: (op.invocation_time, op.op_id))
    )
    composite = history_from_operations(
        Operation(
            op_id=name,
            client="c-f" if name == "F" else "c-j",
            object=NESTED_COMPOSITE,
            op_name=name,
            args=(),
            result=result,
            invocation_time=start,
            response_time=end,
        )
        for name, (result, start, end) in sorted(record.items())
    )
    return aggregated, composite


# ---------------------------------------------------------------- conditional waits


def run_conditional_wait_scenario(
    seed: int = 0,
    scheduler: SchedulerKind = SchedulerKind.LOCK_LEVEL,
    producer_first: bool = False,
) -> SimOutput:
    """Consumer waits for a flag that a later producer request sets and signals."""
    consume = ClientRequest(request_id="consume", client="consumer", op_name="consume")
    produce = ClientRequest(request_id="produce", client="producer", op_name="produce", args=(5,))
    first, second = (produce, consume) if producer_first else (consume, produce)
    workload = [first, second.model_copy(update={"issue_time": 2})]
    cfg = SimConfig(n=3, f=1, scheduler=scheduler, seed=seed)
    return run_smr(cfg, workload, producer_consumer_object())


# ---------------------------------------------------------------- byzantine runs


def register_workload() -> list[ClientRequest]:
    return [
        ClientRequest(request_id="w1", client="c1", op_name="write", args=(1,)),
        ClientRequest(request_id="r1", client="c2", op_name="read", issue_time=1),
        ClientRequest(request_id="w2", client="c1", op_name="write", args=(2,), issue_time=3),
        ClientRequest(request_id="r2", client="c2", op_name="read", issue_time=4, after=("w2",)),
    ]


def register_object() -> ObjectDefinition:
    return ObjectDefinition.from_spec(register_spec())


def run_byzantine(seed: int = 0, behavior: Behavior = Behavior.FLIP) -> SimOutput:
    cfg = SimConfig(
        n=4,
        f=1,
        failure_model=FailureModel.BYZANTINE,
        seed=seed,
        fault_plan=(Fault(replica=3, behavior=behavior),),
    )
    return run_smr(cfg, register_workload(), register_object())


def run_duplicate_ids(seed: int = 0) -> SimOutput:
    cfg = SimConfig(n=4, f=1, failure_model=FailureModel.BYZANTINE, seed=seed)
    workload = [
        ClientRequest(request_id="w1", client="mallory", op_name="write", args=(1,)),
        ClientRequest(request_id="w1", client="mallory", op_name="write", args=(2,)),
        ClientRequest(request_id="r1", client="c2", op_name="read", issue_time=6),
    ]
    return byzantine_client_duplicate_ids(cfg, workload, register_object())


# ---------------------------------------------------------------- catalog


@dataclass
class ScenarioRun:
    """What a scenario produced: the history to check and the spec to check it with.

    A spec derived from an object carries the object's ``source`` and is not
    looked up in the registry.
    """

    name: str
    history: History
    spec: str
    output: Optional[SimOutput] = None
    extra: dict[str, History] = field(default_factory=dict)
    source: Optional[str] = None

    @property
    def bundle(self) -> SpecBundle:
        if self.source is not None:
            return SpecBundle.from_object(compile_object(self.source))
        return get_bundle(self.spec)


@dataclass(frozen=True)
class ScenarioCatalogEntry:
    """A named run and the verdict per level it yields for every seed in ``seeds``."""

    name: str
    description: str
    build: Callable[[int], ScenarioRun]
    expected: dict[str, bool]
    default_seed: int = 0
    seeds: tuple[int, ...] = ()

    def checked_seeds(self) -> tuple[int, ...]:
        return self.seeds or (self.default_seed,)


ALL_ACCEPT = {"lin": True, "set": True, "mp": True, "interval": True}
ONLY_RELAXED = {"lin": False, "set": False, "mp": True, "interval": True}
ALL_REJECT = {"lin": False, "set": False, "mp": False, "interval": False}


def _from_output(name: str, spec: str, output: SimOutput, source: Optional[str] = None) -> ScenarioRun:
    return ScenarioRun(
        name=name, history=output.correct_client_history(), spec=spec, output=output, source=source
    )


def _nested(seed: int) -> ScenarioRun:
    aggregated, composite = run_nested_scenario(seed)
    return ScenarioRun(
        name="nested", history=composite, spec="nested-composite", extra={"aggregated": aggregated}
    )


SCENARIOS: dict[str, ScenarioCatalogEntry] = {
    entry.name: entry
    for entry in (
        ScenarioCatalogEntry(
            name="listing1",
            description="D and E under the lock-level scheduler; on even seeds E reads the intermediate 2",
            build=lambda seed: _from_output("listing1", "lock-object", run_listing1(seed)),
            expected=ONLY_RELAXED,
            seeds=(0, 2, 4, 6),
        ),
        ScenarioCatalogEntry(
            name="listing1-sequential",
            description="D and E executed one after the other; E reads 4",
            build=lambda seed: _from_output(
                "listing1-sequential",
                "lock-object",
                run_listing1(seed, SchedulerKind.SEQUENTIAL),
            ),
            expected=ALL_ACCEPT,
        ),
        ScenarioCatalogEntry(
            name="quorum",
            description="quorum register without read repair; the second read is stale",
            build=lambda seed: ScenarioRun(
                name="quorum",
                history=run_quorum_register(False, stale_read_plan(), stale_read_workload()),
                spec="register",
            ),
            expected=ALL_REJECT,
        ),
        ScenarioCatalogEntry(
            name="quorum-repair",
            description="the same delays with read repair",
            build=lambda seed: ScenarioRun(
                name="quorum-repair",
                history=run_quorum_register(True, stale_read_plan(), stale_read_workload()),
                spec="register",
            ),
            expected=ALL_ACCEPT,
        ),
        ScenarioCatalogEntry(
            name="nested",
            description="F calls G and H on an aggregated object; J runs in between",
            build=_nested,
            expected=ONLY_RELAXED,
            default_seed=1,
        ),
        ScenarioCatalogEntry(
            name="conditional-wait",
            description="a consumer waits inside its request until a later producer signals",
            build=lambda seed: _from_output(
                "conditional-wait",
                "producer-consumer",
                run_conditional_wait_scenario(seed),
                PRODUCER_CONSUMER_SOURCE,
            ),
            expected=ALL_ACCEPT,
        ),
        ScenarioCatalogEntry(
            name="byzantine",
            description="n=4, f=1, replica 3 flips every response; clients vote",
            build=lambda seed: _from_output("byzantine", "register", run_byzantine(seed)),
            expected=ALL_ACCEPT,
        ),
        ScenarioCatalogEntry(
            name="duplicate-ids",
            description="a client sends two payloads under one request id",
            build=lambda seed: _from_output("duplicate-ids", "register", run_duplicate_ids(seed)),
            expected=ALL_ACCEPT,
        ),
    )
}


def get_scenario(name: str) -> ScenarioCatalogEntry:
    if name not in SCENARIOS:
        raise UnknownScenario(f"unknown scenario {name!r}; available: {', '.join(SCENARIOS)}")
    return SCENARIOS[name]


def list_scenarios() -> list[str]:
    return list(SCENARIOS.keys())


# ---------------------------------------------------------------- scenario files


class ScenarioFile(BaseModel):
    """A user-defined simulation: config, object source, workload and the spec to check."""

    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    config: SimConfig = SimConfig()
    object_source: str
    spec: Optional[str] = None
    workload: tuple[ClientRequest, ...]

    @classmethod
    def load(cls, path: Path | str) -> "ScenarioFile":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls.model_validate(data)
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"{path}: not JSON ({exc.msg} at line {exc.lineno})") from exc
        except ValidationError as exc:
            first = exc.errors()[0]
            where = ".".join(str(part) for part in first["loc"])
            raise ConfigInvalid(f"{path}: {where}: {first['msg']}") from exc

    def run(self) -> ScenarioRun:
        output = run_smr(self.config, self.workload, compile_object(self.object_source))
        if self.spec is None:
            return _from_output(self.name, f"{self.name}-derived", output, self.object_source)
        get_bundle(self.spec)
        return _from_output(self.name, self.spec, output)
