"""Randomized property suites over the checkers and the simulator.

Each suite takes a trial count and a seed and returns a SuiteResult. A failed
suite carries its first counterexample as trace text, so it can be written to
a file and fed back to ``linsmr check``.
"""

import itertools
import logging
import random
from typing import Any, Callable, Iterator, Optional, Sequence

from pydantic import BaseModel, ConfigDict

from .checkers import (
    ConsistencyChecker,
    Level,
    SearchBudget,
    check_hierarchy,
    check_linearizable,
    check_linearizable_naive,
    check_schneider_properties,
    replay_linearization,
)
from .errors import DeadlockDetected, LinSmrError, MalformedInput
from .history import History, Operation, dumps_trace, extend_timelines, history_from_operations, project_object
from .program import ObjectDefinition
from .quorum import (
    enumerate_delay_plans,
    run_quorum_register,
    stale_read_plan,
    stale_read_workload,
    two_writer_workload,
)
from .scenarios import (
    SCENARIOS,
    listing1_object,
    run_conditional_wait_scenario,
    run_listing1,
    run_nested_scenario,
)
from .scheduler import SchedulerKind
from .simulator import (
    Behavior,
    ClientRequest,
    FailureModel,
    Fault,
    Ordering,
    SimConfig,
    SimOutput,
    byzantine_client_duplicate_ids,
    run_smr,
)
from .specs import (
    EMPTY,
    OK,
    SequentialSpec,
    composite_op,
    get_bundle,
    product_spec,
    register_spec,
)

logger = logging.getLogger(__name__)

ArgsFor = Callable[[random.Random], tuple]

ALPHABETS: dict[str, tuple[tuple[str, ArgsFor], ...]] = {
    "register": (("write", lambda rng: (rng.randint(1, 3),)), ("read", lambda rng: ())),
    "counter": (("inc", lambda rng: ()), ("get", lambda rng: ())),
    "fifo-queue": (("enq", lambda rng: (rng.randint(1, 3),)), ("deq", lambda rng: ())),
    "lock-object": (("D", lambda rng: ()), ("E", lambda rng: ())),
}

WRONG_RESULTS = (0, 1, 2, 3, 4, 6, EMPTY)


class SuiteResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    trials: int
    failures: int = 0
    unknown: int = 0
    counterexample: Optional[str] = None
    detail: Optional[str] = None
    coverage: dict[str, int] = {}

    @property
    def passed(self) -> bool:
        return self.failures == 0


class _Tally:
    """Counts failures and keeps the first counterexample."""

    def __init__(self, name: str):
        self.name = name
        self.trials = 0
        self.failures = 0
        self.unknown = 0
        self.counterexample: Optional[str] = None
        self.detail: Optional[str] = None
        self.coverage: dict[str, int] = {}

    def fail(self, detail: str, h: Optional[History] = None) -> None:
        self.failures += 1
        if self.failures == 1:
            self.detail = detail
            self.counterexample = dumps_trace(h) if h is not None else None
            logger.info("%s: first failure: %s", self.name, detail)

    def result(self) -> SuiteResult:
        return SuiteResult(
            name=self.name,
            trials=self.trials,
            failures=self.failures,
            unknown=self.unknown,
            counterexample=self.counterexample,
            detail=self.detail,
            coverage=dict(self.coverage),
        )


# ---------------------------------------------------------------- generators


def random_history(
    rng: random.Random,
    spec_name: str = "register",
    n_ops: int = 5,
    corrupt: float = 0.3,
    spec: Optional[SequentialSpec] = None,
) -> History:
    """A single-object history with one client per op.

    Returns come from a random linearization, so the history is linearizable
    unless ``corrupt`` replaces one of them.
    """
    spec = spec or get_bundle(spec_name).sequential
    alphabet = ALPHABETS[spec_name]
    drafts = []
    for index in range(n_ops):
        op_name, args_for = rng.choice(alphabet)
        start = rng.randint(0, 2 * n_ops)
        end = start + rng.randint(1, 4)
        drafts.append((rng.uniform(start, end), index, op_name, args_for(rng), start, end))

    state = spec.initial_state
    results: dict[int, Any] = {}
    for _, index, op_name, args, _, _ in sorted(drafts):
        state, results[index] = spec.apply(state, op_name, args)

    valued = [index for index, result in results.items() if result != OK]
    if valued and rng.random() < corrupt:
        victim = rng.choice(valued)
        results[victim] = rng.choice([r for r in WRONG_RESULTS if r != results[victim]])

    operations = [
        Operation(
            op_id=f"o{index}",
            client=f"c{index}",
            object=spec_name,
            op_name=op_name,
            args=args,
            result=results[index],
            invocation_time=start,
            response_time=end,
        )
        for _, index, op_name, args, start, end in sorted(drafts, key=lambda d: d[1])
    ]
    return history_from_operations(operations)


def random_deltas(rng: random.Random, h: History) -> dict[str, tuple[int, int]]:
    deltas = {}
    for op in h.operations():
        if rng.random() < 0.6:
            deltas[op.op_id] = (rng.randint(0, op.invocation_time), rng.randint(0, 3))
    return deltas


def random_workload(
    rng: random.Random,
    spec_name: str = "register",
    clients: int = 3,
    per_client: int = 3,
    causal: bool = False,
) -> list[ClientRequest]:
    """Requests for a few clients, issued in increasing time per client.

    With ``causal`` a request may wait for a request listed before it, which
    keeps the dependency graph acyclic.
    """
    alphabet = ALPHABETS[spec_name]
    workload: list[ClientRequest] = []
    clocks = {f"c{i}": 0 for i in range(clients)}
    for number in range(rng.randint(clients, clients * per_client)):
        client = rng.choice(sorted(clocks))
        clocks[client] += rng.randint(0, 3)
        op_name, args_for = rng.choice(alphabet)
        after: tuple[str, ...] = ()
        others = [r.request_id for r in workload if r.client != client]
        if causal and others and rng.random() < 0.4:
            after = (rng.choice(others),)
        workload.append(
            ClientRequest(
                request_id=f"q{number}",
                client=client,
                op_name=op_name,
                args=args_for(rng),
                issue_time=clocks[client],
                after=after,
            )
        )
    return workload


def _object_for(spec_name: str) -> ObjectDefinition:
    if spec_name == "lock-object":
        return listing1_object()
    return ObjectDefinition.from_spec(get_bundle(spec_name).sequential)


def mutant_register_spec() -> SequentialSpec:
    """A register whose reads return one more than the stored value."""
    good = register_spec()

    def apply(state: int, op_name: str, args: tuple) -> tuple[Any, Any]:
        after, result = good.apply(state, op_name, args)
        return after, result + 1 if op_name == "read" else result

    return SequentialSpec("register", good.initial_state, apply, good.op_names)


def _budget() -> SearchBudget:
    return SearchBudget(max_ops=10, max_nodes=200_000)


# ---------------------------------------------------------------- checker suites


LEMMA_LEVELS = (Level.LINEARIZABILITY, Level.MP, Level.INTERVAL)
LEMMA_ATTEMPTS = 20


def suite_lemmas(trials: int, seed: int, mutant: bool = False) -> SuiteResult:
    """Extending timelines never turns an accepted history into a rejected one.

    Each level gets ``trials`` accepted histories, each extended once;
    ``coverage`` records how many pairs every level saw.
    """
    rng = random.Random(f"lemmas:{seed}")
    tally = _Tally("lemmas")
    budget = _budget()
    for level in LEMMA_LEVELS:
        pairs = attempts = 0
        while pairs < trials and attempts < LEMMA_ATTEMPTS * trials:
            attempts += 1
            spec_name = rng.choice(sorted(ALPHABETS))
            checker = ConsistencyChecker(get_bundle(spec_name), budget)
            h = random_history(rng, spec_name, rng.randint(1, 6))
            before = checker.check(h, level)
            if before.unknown:
                tally.unknown += 1
                continue
            if not before.accepted:
                continue
            pairs += 1
            tally.trials += 1
            deltas = random_deltas(rng, h)
            after = checker.check(extend_timelines(h, deltas), level)
            if after.unknown:
                tally.unknown += 1
            elif not after.accepted:
                tally.fail(f"{level.value} rejects the extension {deltas} of an accepted {spec_name} history", h)
        tally.coverage[level.value] = pairs
        if pairs < trials:
            tally.fail(f"{level.value}: only {pairs} accepted histories in {attempts} attempts")
    return tally.result()


HIERARCHY_SPECS = ("register", "counter", "fifo-queue", "lock-object")


def suite_hierarchy(trials: int, seed: int, mutant: bool = False) -> SuiteResult:
    """Acceptance at a level implies acceptance at every level it is contained in."""
    rng = random.Random(f"hierarchy:{seed}")
    tally = _Tally("hierarchy")
    budget = _budget()
    for _ in range(trials):
        spec_name = rng.choice(HIERARCHY_SPECS)
        h = random_history(rng, spec_name, rng.randint(1, 7))
        tally.trials += 1
        report = check_hierarchy(h, get_bundle(spec_name), budget)
        if any(v.unknown for v in report.verdicts.values()):
            tally.unknown += 1
        if not report.consistent:
            tally.fail(f"{spec_name}: {'; '.join(report.violations)}", h)
    return tally.result()


def suite_oracle(trials: int, seed: int, mutant: bool = False) -> SuiteResult:
    """The memoized search agrees with trying every order, and its witnesses replay."""
    rng = random.Random(f"oracle:{seed}")
    tally = _Tally("oracle")
    budget = _budget()
    for _ in range(trials):
        spec_name = rng.choice(HIERARCHY_SPECS)
        spec = get_bundle(spec_name).sequential
        h = random_history(rng, spec_name, rng.randint(1, 7))
        tally.trials += 1
        fast = check_linearizable(h, spec, budget)
        if fast.unknown:
            tally.unknown += 1
            continue
        slow = check_linearizable_naive(h, spec)
        if fast.accepted != slow.accepted:
            tally.fail(f"{spec_name}: search says {fast.accepted}, oracle says {slow.accepted}", h)
        elif fast.accepted and not replay_linearization(h, spec, fast.witness):
            tally.fail(f"{spec_name}: witness {fast.witness} does not replay", h)
    return tally.result()


# ---------------------------------------------------------------- simulator suites


SEQUENTIAL_SPECS = ("register", "counter", "fifo-queue")


def suite_sequential(trials: int, seed: int, mutant: bool = False) -> SuiteResult:
    """Replicas running requests one at a time produce linearizable client histories.

    With ``mutant`` the replicas run a register whose reads are off by one,
    and the suite is expected to fail.
    """
    rng = random.Random(f"sequential:{seed}")
    tally = _Tally("sequential")
    budget = _budget()
    for trial in range(trials):
        spec_name = "register" if mutant else rng.choice(SEQUENTIAL_SPECS)
        obj = (
            ObjectDefinition.from_spec(mutant_register_spec())
            if mutant
            else _object_for(spec_name)
        )
        workload = random_workload(rng, spec_name, clients=3, per_client=2)
        cfg = SimConfig(n=3, f=1, scheduler=SchedulerKind.SEQUENTIAL, seed=trial)
        out = run_smr(cfg, workload, obj)
        tally.trials += 1
        verdict = ConsistencyChecker(get_bundle(spec_name), budget).check(
            out.correct_client_history(), Level.LINEARIZABILITY
        )
        if verdict.unknown:
            tally.unknown += 1
        elif not verdict.accepted:
            tally.fail(f"{spec_name} run with seed {trial}: {verdict.explanation}", out.client_history)
    return tally.result()


def random_config(rng: random.Random, spec_name: str) -> SimConfig:
    """Crash or Byzantine configuration with at most f faults."""
    byzantine = rng.random() < 0.5
    partial = spec_name == "register" and rng.random() < 0.25
    scheduler = SchedulerKind.SEQUENTIAL if partial else rng.choice(list(SchedulerKind))
    fault_plan: tuple[Fault, ...] = ()
    if rng.random() < 0.6:
        menu = list(Behavior) if byzantine else [Behavior.CRASH]
        n = 4 if byzantine else 3
        fault_plan = (Fault(replica=rng.randrange(n), behavior=rng.choice(menu), time=rng.randint(0, 6)),)
    return SimConfig(
        n=4 if byzantine else 3,
        f=1,
        failure_model=FailureModel.BYZANTINE if byzantine else FailureModel.CRASH,
        ordering=Ordering.PARTIAL if partial else Ordering.TOTAL,
        conflicts=(("write", "write"), ("write", "read")) if partial else None,
        scheduler=scheduler,
        seed=rng.randint(0, 1000),
        fault_plan=fault_plan,
        replica_slowdown={0: rng.randint(1, 3)} if rng.random() < 0.3 else {},
    )


def replica_disagreement(out: SimOutput, total_order: bool = True) -> Optional[str]:
    """Describe the first way correct replicas differ, or None."""
    correct = list(out.correct_replicas)
    if not correct:
        return None
    first = correct[0]
    for replica in correct[1:]:
        if out.replica_states[replica] != out.replica_states[first]:
            return f"replicas {first} and {replica} end in different states"
        if total_order and out.delivery_order[replica] != out.delivery_order[first]:
            return f"replicas {first} and {replica} process requests in different orders"
    for rid in out.responses:
        values = out.replica_responses(rid, correct)
        if any(v != values[0] for v in values[1:]):
            return f"correct replicas answer {rid} differently: {values}"
    return None


def _schneider_failure(out: SimOutput) -> Optional[str]:
    o1, o2 = check_schneider_properties(out)
    if not o1:
        return "a client's requests are processed out of issue order"
    if not o2:
        return "a request is processed before one it causally depends on"
    return None


def _containment_failure(out: SimOutput) -> Optional[str]:
    violations = out.containment_violations()
    if violations:
        replica, rid = violations[0]
        return f"replica {replica} decided {rid} outside the client span"
    return None


def suite_determinism(trials: int, seed: int, mutant: bool = False) -> SuiteResult:
    """Runs are reproducible and correct replicas agree."""
    rng = random.Random(f"determinism:{seed}")
    tally = _Tally("determinism")
    for _ in range(trials):
        spec_name = rng.choice(SEQUENTIAL_SPECS + ("lock-object",))
        cfg = random_config(rng, spec_name)
        workload = random_workload(rng, spec_name)
        obj = _object_for(spec_name)
        tally.trials += 1
        first = run_smr(cfg, workload, obj)
        second = run_smr(cfg, workload, obj)
        if first.model_dump_json() != second.model_dump_json():
            tally.fail(f"two runs of {spec_name} with seed {cfg.seed} differ", first.client_history)
            continue
        problem = (
            replica_disagreement(first, cfg.ordering is Ordering.TOTAL)
            or _containment_failure(first)
            or _schneider_failure(first)
        )
        if problem:
            tally.fail(f"{spec_name} with seed {cfg.seed}: {problem}", first.client_history)
    return tally.result()


def decision_mismatch(out: SimOutput) -> Optional[str]:
    for rid, value in out.decided.items():
        expected = out.replica_responses(rid, out.correct_replicas)
        if expected and value != expected[0]:
            return f"{rid} decided {value!r} but correct replicas answered {expected[0]!r}"
    return None


def suite_voting(trials: int, seed: int, mutant: bool = False) -> SuiteResult:
    """Votes over n=4, f=1 always pick the correct replicas' answer.

    Every fault behavior gets ``trials`` workloads, and so does the
    duplicate-id attack.
    """
    rng = random.Random(f"voting:{seed}")
    tally = _Tally("voting")
    for behavior in Behavior:
        for trial in range(trials):
            cfg = SimConfig(
                n=4,
                f=1,
                failure_model=FailureModel.BYZANTINE,
                seed=trial,
                fault_plan=(Fault(replica=rng.randrange(4), behavior=behavior, time=rng.randint(0, 4)),),
            )
            out = run_smr(cfg, random_workload(rng), _object_for("register"))
            tally.trials += 1
            tally.coverage[behavior.value] = tally.coverage.get(behavior.value, 0) + 1
            problem = decision_mismatch(out) or _containment_failure(out) or _schneider_failure(out)
            if problem:
                tally.fail(f"{behavior.value}: {problem}", out.client_history)

    for trial in range(trials):
        workload = random_workload(rng)
        twin = ClientRequest(request_id="dup", client="mallory", op_name="write", args=(7,))
        workload += [twin, twin.model_copy(update={"args": (8,)})]
        cfg = SimConfig(n=4, f=1, failure_model=FailureModel.BYZANTINE, seed=trial)
        out = byzantine_client_duplicate_ids(cfg, workload, _object_for("register"))
        tally.trials += 1
        tally.coverage["duplicate-ids"] = tally.coverage.get("duplicate-ids", 0) + 1
        executed = {r: out.delivery_order[r].count("dup") for r in out.correct_replicas}
        if set(executed.values()) != {1}:
            tally.fail(f"duplicate id executed {executed} times per replica", out.client_history)
            continue
        problem = replica_disagreement(out) or decision_mismatch(out) or _schneider_failure(out)
        if problem:
            tally.fail(f"duplicate ids: {problem}", out.client_history)
    return tally.result()


def suite_schneider(trials: int, seed: int, mutant: bool = False) -> SuiteResult:
    """Per-client issue order and causal dependencies survive ordering."""
    rng = random.Random(f"schneider:{seed}")
    tally = _Tally("schneider")
    for _ in range(trials):
        spec_name = rng.choice(SEQUENTIAL_SPECS)
        cfg = random_config(rng, spec_name)
        out = run_smr(cfg, random_workload(rng, spec_name, causal=True), _object_for(spec_name))
        tally.trials += 1
        problem = _schneider_failure(out)
        if problem:
            tally.fail(problem, out.client_history)
    return tally.result()


# ---------------------------------------------------------------- locality


LOCAL_OBJECTS = ("x", "y")
LOCAL_CALLS = (("write", (1,), OK), ("read", (), 0), ("read", (), 1))


def interval_orders(n: int) -> Iterator[list[tuple[int, int]]]:
    """Every event order of n ops with invocations in op order, as (start, end) per op."""

    def extend(time: int, invoked: int, spans: list, open_ops: tuple) -> Iterator[list]:
        if invoked == n and not open_ops:
            yield [tuple(span) for span in spans]
            return
        if invoked < n:
            spans.append([time, None])
            yield from extend(time + 1, invoked + 1, spans, open_ops + (invoked,))
            spans.pop()
        for op in open_ops:
            spans[op][1] = time
            yield from extend(time + 1, invoked, spans, tuple(o for o in open_ops if o != op))
            spans[op][1] = None

    yield from extend(0, 0, [], ())


def random_interval_order(rng: random.Random, n: int) -> list[tuple[int, int]]:
    spans: list[list] = []
    open_ops: list[int] = []
    time = 0
    while len(spans) < n or open_ops:
        if len(spans) < n and (not open_ops or rng.random() < 0.5):
            open_ops.append(len(spans))
            spans.append([time, None])
        else:
            op = open_ops.pop(rng.randrange(len(open_ops)))
            spans[op][1] = time
        time += 1
    return [tuple(span) for span in spans]


def two_object_history(
    objects: Sequence[str], calls: Sequence[tuple[str, tuple, Any]], spans: Sequence[tuple[int, int]]
) -> History:
    return history_from_operations(
        Operation(
            op_id=f"o{i}",
            client=f"c{i}",
            object=obj,
            op_name=name,
            args=args,
            result=result,
            invocation_time=start,
            response_time=end,
        )
        for i, (obj, (name, args, result), (start, end)) in enumerate(zip(objects, calls, spans))
    )


def as_composite(h: History, name: str = "composite") -> History:
    """One object whose operations are named ``<object>.<op>``."""
    return history_from_operations(
        op.model_copy(update={"object": name, "op_name": composite_op(op.object, op.op_name)})
        for op in h.operations()
    )


def locality_holds(h: History, budget: SearchBudget) -> bool:
    register = register_spec()
    composite = product_spec({obj: register for obj in LOCAL_OBJECTS})
    whole = check_linearizable(as_composite(h), composite, budget).accepted
    parts = all(
        check_linearizable(project_object(h, obj), register, budget).accepted
        for obj in LOCAL_OBJECTS
    )
    return whole == parts


def precedence_orders(n: int) -> Iterator[list[tuple[int, int]]]:
    """One span list per distinct real-time precedence relation over n ops.

    With invocations in op order, a relation is fixed by the number of
    invocations each op's response follows, so there are n! of them.
    """
    for reach in itertools.product(*(range(i + 1, n + 1) for i in range(n))):
        starts: list[int] = []
        ends = [0] * n
        time = 0
        for j in range(n):
            starts.append(time)
            time += 1
            for i in range(n):
                if reach[i] == j + 1:
                    ends[i] = time
                    time += 1
        yield list(zip(starts, ends))


def precedence_relation(spans: Sequence[tuple[int, int]]) -> frozenset[tuple[int, int]]:
    return frozenset(
        (i, j) for i, (_, end) in enumerate(spans) for j, (start, _) in enumerate(spans) if end < start
    )


LOCAL_MAX_PER_OBJECT = 3


def local_cases(max_per_object: int = LOCAL_MAX_PER_OBJECT) -> Iterator[History]:
    """Every two-object history with at most ``max_per_object`` ops per object.

    Event orders that give the same precedence relation are not repeated. The
    object names are symmetric, so the first op always goes to the first object.
    """
    for n in range(1, 2 * max_per_object + 1):
        placements = [
            p
            for p in itertools.product(LOCAL_OBJECTS, repeat=n)
            if p[0] == LOCAL_OBJECTS[0] and max(p.count(o) for o in LOCAL_OBJECTS) <= max_per_object
        ]
        logger.debug("local: %d ops, %d placements", n, len(placements))
        for spans in precedence_orders(n):
            for placement in placements:
                for calls in itertools.product(LOCAL_CALLS, repeat=n):
                    yield two_object_history(placement, calls, spans)


def suite_local(trials: int, seed: int, mutant: bool = False) -> SuiteResult:
    """Composite acceptance equals acceptance of both projections.

    Exhaustive up to three ops per object, then ``trials`` sampled histories
    of seven and eight ops.
    """
    rng = random.Random(f"local:{seed}")
    tally = _Tally("local")
    budget = _budget()
    for h in local_cases():
        tally.trials += 1
        tally.coverage["exhaustive"] = tally.coverage.get("exhaustive", 0) + 1
        if not locality_holds(h, budget):
            tally.fail("composite and projected verdicts differ", h)
    for _ in range(trials):
        n = rng.randint(2 * LOCAL_MAX_PER_OBJECT + 1, 2 * LOCAL_MAX_PER_OBJECT + 2)
        placement = [rng.choice(LOCAL_OBJECTS) for _ in range(n)]
        calls = [rng.choice(LOCAL_CALLS) for _ in range(n)]
        h = two_object_history(placement, calls, random_interval_order(rng, n))
        tally.trials += 1
        tally.coverage["sampled"] = tally.coverage.get("sampled", 0) + 1
        if not locality_holds(h, budget):
            tally.fail("composite and projected verdicts differ", h)
    return tally.result()


# ---------------------------------------------------------------- scenario suites


def suite_quorum(trials: int, seed: int, mutant: bool = False) -> SuiteResult:
    """The stale read shows up without repair and never with it.

    Without repair every plan over the stale-read workload is tried until one
    reads stale. With repair ``trials`` plans are drawn per workload, one of
    them with two writers.
    """
    tally = _Tally("quorum")
    register = get_bundle("register").sequential
    budget = _budget()
    stale = run_quorum_register(False, stale_read_plan(), stale_read_workload())
    tally.trials += 1
    if check_linearizable(stale, register, budget).accepted:
        tally.fail("the crafted delays did not produce a stale read", stale)

    workload = stale_read_workload()
    found = False
    for plan in enumerate_delay_plans(workload, limit=None, read_repair=False):
        tally.trials += 1
        if not check_linearizable(run_quorum_register(False, plan, workload), register, budget).accepted:
            found = True
            break
    if not found:
        tally.fail("no delay plan produced a stale read without repair")

    for workload in (stale_read_workload(), two_writer_workload()):
        for plan in enumerate_delay_plans(workload, limit=trials, seed=seed):
            h = run_quorum_register(True, plan, workload)
            tally.trials += 1
            if not check_linearizable(h, register, budget).accepted:
                tally.fail(f"read repair is not linearizable under {plan}", h)
    return tally.result()


def _check_expectations(name: str, seed: int, tally: _Tally, budget: SearchBudget) -> None:
    entry = SCENARIOS[name]
    run = entry.build(seed)
    report = ConsistencyChecker(run.bundle, budget).check_all(run.history)
    got = {level: verdict.accepted for level, verdict in report.verdicts.items()}
    tally.trials += 1
    if got != entry.expected:
        tally.fail(f"{name} (seed {seed}): expected {entry.expected}, got {got}", run.history)


def suite_scenarios(trials: int, seed: int, mutant: bool = False) -> SuiteResult:
    """The catalog's expected verdicts and the scenario-specific claims."""
    tally = _Tally("scenarios")
    budget = _budget()
    for name, entry in SCENARIOS.items():
        for scenario_seed in entry.checked_seeds():
            _check_expectations(name, scenario_seed, tally, budget)

    out = run_listing1(SCENARIOS["listing1"].default_seed)
    tally.trials += 1
    if out.decided.get("E") != 2:
        tally.fail(f"E returned {out.decided.get('E')!r} instead of the intermediate 2", out.client_history)

    cell = get_bundle("aggregate-cell").sequential
    for sweep in range(trials):
        aggregated, _ = run_nested_scenario(sweep)
        tally.trials += 1
        if not check_linearizable(aggregated, cell, budget).accepted:
            tally.fail(f"aggregated object not linearizable at seed {sweep}", aggregated)

    out = run_conditional_wait_scenario()
    tally.trials += 1
    if sorted(out.decided) != ["consume", "produce"]:
        tally.fail("the lock-level scheduler did not complete both requests", out.client_history)
    tally.trials += 1
    try:
        run_conditional_wait_scenario(scheduler=SchedulerKind.SEQUENTIAL)
        tally.fail("the sequential scheduler ran the waiting consumer without deadlock")
    except DeadlockDetected:
        pass
    return tally.result()


# ---------------------------------------------------------------- registry


Suite = Callable[[int, int, bool], SuiteResult]

SUITES: dict[str, tuple[Suite, int]] = {
    "lemmas": (suite_lemmas, 1000),
    "hierarchy": (suite_hierarchy, 500),
    "oracle": (suite_oracle, 1000),
    "sequential": (suite_sequential, 500),
    "determinism": (suite_determinism, 100),
    "voting": (suite_voting, 100),
    "schneider": (suite_schneider, 100),
    "local": (suite_local, 200),
    "quorum": (suite_quorum, 10_000),
    "scenarios": (suite_scenarios, 100),
}


def list_suites() -> list[str]:
    return list(SUITES.keys()) + ["all"]


def run_suite(name: str, trials: Optional[int] = None, seed: int = 0, mutant: bool = False) -> list[SuiteResult]:
    """Run one suite, or every suite for ``all``; ``trials`` overrides the defaults."""
    if name == "all":
        names = list(SUITES)
    elif name in SUITES:
        names = [name]
    else:
        raise MalformedInput(f"unknown suite {name!r}; available: {', '.join(list_suites())}")
    results = []
    for suite_name in names:
        suite, default_trials = SUITES[suite_name]
        logger.info("running suite %s", suite_name)
        try:
            results.append(suite(trials if trials is not None else default_trials, seed, mutant))
        except LinSmrError as exc:
            results.append(SuiteResult(name=suite_name, trials=0, failures=1, detail=f"{type(exc).__name__}: {exc}"))
    return results
