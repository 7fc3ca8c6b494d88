"""Decision procedures for the consistency hierarchy.

Every checker takes a complete single-object History and a spec of the
matching form and returns a Verdict whose witness can be replayed with the
``replay_*`` functions below. Search is depth-first over candidate next
points with memoization of failed configurations; candidates are explored in
ascending ``(invocation_time, op_id)`` so witnesses are reproducible.
"""

import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Any, Callable, Iterable, Literal, Optional, Sequence

from pydantic import BaseModel, ConfigDict

from .config import load_settings
from .errors import BudgetExhausted, MalformedInput
from .history import CompletionPolicy, History, Operation, complete_history
from .specs import (
    EffectSpec,
    IntervalSpec,
    SequentialSpec,
    SetSpec,
    SpecBundle,
    Verdict,
    results_match,
)

if TYPE_CHECKING:
    from .simulator import SimOutput

logger = logging.getLogger(__name__)


class Level(str, Enum):
    """Levels of the hierarchy, weakest last."""

    LINEARIZABILITY = "lin"
    SET = "set"
    MP = "mp"
    INTERVAL = "interval"


@dataclass(frozen=True)
class SearchBudget:
    """Caps for the exponential searches.

    ``on_exhaustion`` is ``"unknown"`` (return an unknown rejection) or
    ``"error"`` (raise BudgetExhausted).
    """

    max_ops: int = 10
    max_nodes: int = 200_000
    on_exhaustion: Literal["unknown", "error"] = "unknown"

    def __post_init__(self):
        if self.max_ops < 1:
            raise MalformedInput("max_ops must be at least 1")
        if self.max_nodes < 1:
            raise MalformedInput("max_nodes must be at least 1")
        if self.on_exhaustion not in ("unknown", "error"):
            raise MalformedInput(f"unknown on_exhaustion mode {self.on_exhaustion!r}")

    @classmethod
    def from_env(cls) -> "SearchBudget":
        settings = load_settings()
        return cls(
            max_ops=settings.max_ops,
            max_nodes=settings.max_nodes,
            on_exhaustion=settings.on_exhaustion,
        )


class _Exhausted(Exception):
    pass


@dataclass
class _Search:
    """Bookkeeping shared by all searches: node budget and the deepest failure."""

    level: Level
    budget: SearchBudget
    ops: list[Operation]
    preds: list[int]
    nodes: int = 0
    deepest: tuple = ()
    failure: Optional[str] = None
    failed: set = field(default_factory=set)

    def tick(self) -> None:
        self.nodes += 1
        if self.nodes > self.budget.max_nodes:
            raise _Exhausted()

    def note(self, prefix: tuple, reason: str) -> None:
        if self.failure is None or len(prefix) > len(self.deepest):
            self.deepest = prefix
            self.failure = reason

    def ready(self, index: int, finished: int) -> bool:
        return not self.preds[index] & ~finished

    def mismatch(self, op: Operation, produced: Any) -> str:
        return f"{op.op_id} returned {op.result!r} but the spec yields {produced!r}"

    def rejection(self) -> Verdict:
        if self.deepest:
            prefix = " ".join("{" + ",".join(point) + "}" for point in self.deepest)
            where = f"after {prefix}"
        else:
            where = "at the first point"
        reason = self.failure or "no operation can take the next point"
        return Verdict(
            level=self.level.value,
            accepted=False,
            explanation=f"no valid placement; {where}: {reason}",
            nodes=self.nodes,
        )

    def accept(self, witness: Sequence[tuple[str, ...]]) -> Verdict:
        return Verdict(level=self.level.value, accepted=True, witness=tuple(witness), nodes=self.nodes)


def _unknown(level: Level, budget: SearchBudget, reason: str, nodes: int = 0) -> Verdict:
    if budget.on_exhaustion == "error":
        raise BudgetExhausted(f"{level.value}: {reason}")
    logger.info("%s check gave up: %s", level.value, reason)
    return Verdict(
        level=level.value,
        accepted=False,
        unknown=True,
        explanation=f"search budget exhausted: {reason}",
        nodes=nodes,
    )


def ordered_operations(h: History) -> list[Operation]:
    """Operations sorted by ``(invocation_time, op_id)``."""
    return sorted(h.operations(), key=lambda op: (op.invocation_time, op.op_id))


def precedence_masks(ops: Sequence[Operation]) -> list[int]:
    """For each op, the bitmask of ops that respond strictly before it is invoked."""
    masks = []
    for op in ops:
        mask = 0
        for index, other in enumerate(ops):
            if other.response_time is not None and other.response_time < op.invocation_time:
                mask |= 1 << index
        masks.append(mask)
    return masks


def _start(h: History, level: Level, budget: SearchBudget) -> _Search | Verdict:
    if not h.is_complete:
        raise MalformedInput(
            f"history has {len(h.pending)} pending operations; apply complete_history first"
        )
    if len(h.objects()) > 1:
        raise MalformedInput(f"history spans objects {h.objects()}; project it first")
    ops = ordered_operations(h)
    if len(ops) > budget.max_ops:
        return _unknown(level, budget, f"{len(ops)} operations exceed max_ops={budget.max_ops}")
    return _Search(level=level, budget=budget, ops=ops, preds=precedence_masks(ops))


def _run(search: _Search, body: Callable[[], Optional[list]]) -> Verdict:
    try:
        witness = body()
    except _Exhausted:
        return _unknown(
            search.level,
            search.budget,
            f"explored more than max_nodes={search.budget.max_nodes} states",
            search.nodes,
        )
    verdict = search.accept(witness) if witness is not None else search.rejection()
    logger.debug(
        "%s: accepted=%s after %d nodes", search.level.value, verdict.accepted, search.nodes
    )
    return verdict


# ---------------------------------------------------------------- linearizability


def check_linearizable(h: History, spec: SequentialSpec, budget: Optional[SearchBudget] = None) -> Verdict:
    """Search a total order extending real-time precedence that replays every return."""
    budget = budget or SearchBudget()
    search = _start(h, Level.LINEARIZABILITY, budget)
    if isinstance(search, Verdict):
        return search
    ops = search.ops
    full = (1 << len(ops)) - 1

    def dfs(done: int, state: Any, order: tuple) -> Optional[list]:
        if done == full:
            return [(ops[i].op_id,) for i in order]
        key = (done, state)
        if key in search.failed:
            return None
        search.tick()
        prefix = tuple((ops[i].op_id,) for i in order)
        for index, op in enumerate(ops):
            if done >> index & 1 or not search.ready(index, done):
                continue
            after, result = spec.apply(state, op.op_name, op.args)
            if not results_match(op.result, result):
                search.note(prefix, search.mismatch(op, result))
                continue
            found = dfs(done | 1 << index, after, order + (index,))
            if found is not None:
                return found
        search.failed.add(key)
        return None

    return _run(search, lambda: dfs(0, spec.initial_state, ()))


def check_linearizable_naive(h: History, spec: SequentialSpec) -> Verdict:
    """All-permutations oracle; only for small histories."""
    if not h.is_complete or len(h.objects()) > 1:
        raise MalformedInput("the oracle needs a complete single-object history")
    ops = ordered_operations(h)
    preds = precedence_masks(ops)
    tried = 0
    for order in itertools.permutations(range(len(ops))):
        tried += 1
        if _replays_sequentially(ops, preds, order, spec):
            return Verdict(
                level=Level.LINEARIZABILITY.value,
                accepted=True,
                witness=tuple((ops[i].op_id,) for i in order),
                nodes=tried,
            )
    return Verdict(
        level=Level.LINEARIZABILITY.value,
        accepted=False,
        explanation=f"none of the {tried} orders is legal",
        nodes=tried,
    )


def _replays_sequentially(
    ops: Sequence[Operation], preds: Sequence[int], order: Sequence[int], spec: SequentialSpec
) -> bool:
    done = 0
    state = spec.initial_state
    for index in order:
        if preds[index] & ~done:
            return False
        op = ops[index]
        state, result = spec.apply(state, op.op_name, op.args)
        if not results_match(op.result, result):
            return False
        done |= 1 << index
    return True


# ---------------------------------------------------------------- set linearizability


def _subsets(items: Sequence[int], minimum: int = 1) -> Iterable[tuple[int, ...]]:
    for size in range(minimum, len(items) + 1):
        yield from itertools.combinations(items, size)


def check_set_linearizable(h: History, spec: SetSpec, budget: Optional[SearchBudget] = None) -> Verdict:
    """Partition ops into admissible simultaneous sets placed in real-time order."""
    budget = budget or SearchBudget()
    search = _start(h, Level.SET, budget)
    if isinstance(search, Verdict):
        return search
    ops = search.ops
    full = (1 << len(ops)) - 1

    def dfs(done: int, state: Any, points: tuple) -> Optional[list]:
        if done == full:
            return list(points)
        key = (done, state)
        if key in search.failed:
            return None
        search.tick()
        ready = [i for i in range(len(ops)) if not done >> i & 1 and search.ready(i, done)]
        for members in _subsets(ready):
            calls = tuple((ops[i].op_name, ops[i].args) for i in members)
            outcome = spec.transition(state, calls)
            if outcome is None:
                continue
            after, results = outcome
            point = tuple(ops[i].op_id for i in members)
            bad = [
                (ops[i], r) for i, r in zip(members, results) if not results_match(ops[i].result, r)
            ]
            if bad:
                search.note(points, search.mismatch(*bad[0]))
                continue
            mask = 0
            for i in members:
                mask |= 1 << i
            found = dfs(done | mask, after, points + (point,))
            if found is not None:
                return found
        search.failed.add(key)
        return None

    return _run(search, lambda: dfs(0, spec.initial_state, ()))


# ---------------------------------------------------------------- MP linearizability


def check_mp_linearizable(h: History, spec: EffectSpec, budget: Optional[SearchBudget] = None) -> Verdict:
    """Place every effect step at its own point inside the op's span.

    An op may take its first step only after every op preceding it in real
    time has taken its last one.
    """
    budget = budget or SearchBudget()
    search = _start(h, Level.MP, budget)
    if isinstance(search, Verdict):
        return search
    ops = search.ops
    steps = [spec.decompose(op.op_name, op.args) for op in ops]
    full = (1 << len(ops)) - 1

    def dfs(finished: int, state: Any, observed: tuple, points: tuple) -> Optional[list]:
        if finished == full:
            return list(points)
        key = (state, observed)
        if key in search.failed:
            return None
        search.tick()
        for index, op in enumerate(ops):
            taken = len(observed[index])
            if taken == len(steps[index]) or not search.ready(index, finished):
                continue
            after, seen = steps[index][taken](state, observed[index])
            mine = observed[index] + (seen,)
            done = finished
            if len(mine) == len(steps[index]):
                result = spec.return_of(op.op_name, op.args, mine)
                if not results_match(op.result, result):
                    search.note(points, search.mismatch(op, result))
                    continue
                done |= 1 << index
            updated = observed[:index] + (mine,) + observed[index + 1:]
            point = (f"{op.op_id}.{len(mine)}",)
            found = dfs(done, after, updated, points + (point,))
            if found is not None:
                return found
        search.failed.add(key)
        return None

    return _run(search, lambda: dfs(0, spec.initial_state, tuple(() for _ in ops), ()))


# ---------------------------------------------------------------- interval linearizability


def check_interval_linearizable(
    h: History, spec: IntervalSpec, budget: Optional[SearchBudget] = None
) -> Verdict:
    """Search a run of the automaton whose points respect the history's events.

    Each point consumes a set of invocations and emits a set of responses. An
    op can be invoked only at a point after every real-time predecessor has
    responded; it responds at or after the point that invoked it.
    """
    budget = budget or SearchBudget()
    search = _start(h, Level.INTERVAL, budget)
    if isinstance(search, Verdict):
        return search
    ops = search.ops
    full = (1 << len(ops)) - 1

    def dfs(invoked: int, responded: int, state: Any, points: tuple) -> Optional[list]:
        if responded == full:
            return list(points) if spec.accepting(state) else None
        key = (invoked, responded, state)
        if key in search.failed:
            return None
        search.tick()
        invokable = [
            i for i in range(len(ops)) if not invoked >> i & 1 and search.ready(i, responded)
        ]
        active = [i for i in range(len(ops)) if invoked >> i & 1 and not responded >> i & 1]
        for starting in _subsets(invokable, minimum=0):
            calls = tuple((i, ops[i].op_name, ops[i].args) for i in starting)
            now_invoked = invoked
            for i in starting:
                now_invoked |= 1 << i
            open_ops = sorted(active + list(starting))
            for ending in _subsets(open_ops, minimum=0):
                if not starting and not ending:
                    continue
                point = tuple(f"+{ops[i].op_id}" for i in starting) + tuple(
                    f"-{ops[i].op_id}" for i in ending
                )
                now_responded = responded
                for i in ending:
                    now_responded |= 1 << i
                for after, returns in spec.transitions(state, calls, ending):
                    bad = [i for i in ending if not results_match(ops[i].result, returns.get(i))]
                    if bad:
                        search.note(points, search.mismatch(ops[bad[0]], returns.get(bad[0])))
                        continue
                    found = dfs(now_invoked, now_responded, after, points + (point,))
                    if found is not None:
                        return found
        search.failed.add(key)
        return None

    return _run(search, lambda: dfs(0, 0, spec.initial_state, ()))


# ---------------------------------------------------------------- witness replay


def _index(ops: Sequence[Operation]) -> dict[str, int]:
    return {op.op_id: i for i, op in enumerate(ops)}


def _replay_ops(h: History) -> tuple[list[Operation], list[int], dict[str, int]]:
    ops = ordered_operations(h)
    return ops, precedence_masks(ops), _index(ops)


def replay_linearization(h: History, spec: SequentialSpec, witness: Sequence[Sequence[str]]) -> bool:
    """True iff the witness order is legal and reproduces every return."""
    ops, preds, where = _replay_ops(h)
    try:
        order = [where[point[0]] for point in witness if len(point) == 1]
    except KeyError:
        return False
    if len(order) != len(witness) or sorted(order) != list(range(len(ops))):
        return False
    return _replays_sequentially(ops, preds, order, spec)


def replay_set(h: History, spec: SetSpec, witness: Sequence[Sequence[str]]) -> bool:
    ops, preds, where = _replay_ops(h)
    done = 0
    state = spec.initial_state
    for point in witness:
        if not point or any(label not in where for label in point):
            return False
        members = [where[label] for label in point]
        if any(done >> i & 1 or preds[i] & ~done for i in members):
            return False
        outcome = spec.transition(state, tuple((ops[i].op_name, ops[i].args) for i in members))
        if outcome is None:
            return False
        state, results = outcome
        if not all(results_match(ops[i].result, r) for i, r in zip(members, results)):
            return False
        for i in members:
            done |= 1 << i
    return done == (1 << len(ops)) - 1


def replay_mp(h: History, spec: EffectSpec, witness: Sequence[Sequence[str]]) -> bool:
    ops, preds, where = _replay_ops(h)
    steps = [spec.decompose(op.op_name, op.args) for op in ops]
    observed: list[tuple] = [() for _ in ops]
    finished = 0
    state = spec.initial_state
    for point in witness:
        if len(point) != 1:
            return False
        op_id, _, number = point[0].rpartition(".")
        if op_id not in where or not number.isdigit():
            return False
        index = where[op_id]
        if int(number) != len(observed[index]) + 1 or int(number) > len(steps[index]):
            return False
        if preds[index] & ~finished:
            return False
        state, seen = steps[index][len(observed[index])](state, observed[index])
        observed[index] += (seen,)
        if len(observed[index]) == len(steps[index]):
            op = ops[index]
            if not results_match(op.result, spec.return_of(op.op_name, op.args, observed[index])):
                return False
            finished |= 1 << index
    return finished == (1 << len(ops)) - 1


def replay_interval(h: History, spec: IntervalSpec, witness: Sequence[Sequence[str]]) -> bool:
    """True iff some run of the automaton along the witness points reproduces every return."""
    ops, preds, where = _replay_ops(h)
    parsed = []
    invoked = responded = 0
    for point in witness:
        starting, ending = [], []
        for label in point:
            sign, op_id = label[:1], label[1:]
            if not sign or sign not in "+-" or op_id not in where:
                return False
            (starting if sign == "+" else ending).append(where[op_id])
        for i in starting:
            if invoked >> i & 1 or preds[i] & ~responded:
                return False
            invoked |= 1 << i
        for i in ending:
            if not invoked >> i & 1 or responded >> i & 1:
                return False
        for i in ending:
            responded |= 1 << i
        parsed.append((starting, ending))
    if responded != (1 << len(ops)) - 1:
        return False

    def follow(position: int, state: Any) -> bool:
        if position == len(parsed):
            return spec.accepting(state)
        starting, ending = parsed[position]
        calls = tuple((i, ops[i].op_name, ops[i].args) for i in starting)
        for after, returns in spec.transitions(state, calls, tuple(ending)):
            if all(results_match(ops[i].result, returns.get(i)) for i in ending):
                if follow(position + 1, after):
                    return True
        return False

    return follow(0, spec.initial_state)


# ---------------------------------------------------------------- system level


def check_schneider_properties(out: "SimOutput") -> tuple[bool, bool]:
    """O1: each client's requests are processed in issue order. O2: causal edges are respected.

    Every replica's delivery order is checked.
    """
    orders = list(out.delivery_order.values())
    known = {rid for issued in out.issue_order.values() for rid in issued}
    for order in orders:
        if len(set(order)) != len(order):
            raise MalformedInput("a processing order lists a request twice")
        stray = set(order) - known
        if stray:
            raise MalformedInput(f"processed requests were never issued: {sorted(stray)}")
    for before, after in out.causal_edges:
        if before not in known or after not in known:
            raise MalformedInput(f"causal edge {before}->{after} names an unknown request")

    o1 = o2 = True
    for order in orders:
        position = {rid: i for i, rid in enumerate(order)}
        for issued in out.issue_order.values():
            seen = [position[rid] for rid in issued if rid in position]
            if seen != sorted(seen):
                o1 = False
        for before, after in out.causal_edges:
            if after in position and (before not in position or position[before] > position[after]):
                o2 = False
    return o1, o2


CONTAINMENTS = (
    (Level.LINEARIZABILITY, Level.SET),
    (Level.LINEARIZABILITY, Level.MP),
    (Level.MP, Level.INTERVAL),
    (Level.LINEARIZABILITY, Level.INTERVAL),
)


class HierarchyReport(BaseModel):
    """Verdicts of all four levels and the containments they break."""

    model_config = ConfigDict(frozen=True)

    verdicts: dict[str, Verdict]
    violations: tuple[str, ...] = ()

    @property
    def consistent(self) -> bool:
        return not self.violations


def check_hierarchy(h: History, bundle: SpecBundle, budget: Optional[SearchBudget] = None) -> HierarchyReport:
    """Run every checker and flag a lower level accepting where a higher one rejects.

    Unknown verdicts never count as violations.
    """
    budget = budget or SearchBudget()
    verdicts = {
        Level.LINEARIZABILITY: check_linearizable(h, bundle.sequential, budget),
        Level.SET: check_set_linearizable(h, bundle.set_spec, budget),
        Level.MP: check_mp_linearizable(h, bundle.effect, budget),
        Level.INTERVAL: check_interval_linearizable(h, bundle.interval, budget),
    }
    violations = []
    for lower, higher in CONTAINMENTS:
        low, high = verdicts[lower], verdicts[higher]
        if low.accepted and not high.accepted and not high.unknown:
            violations.append(f"{lower.value} accepts but {higher.value} rejects")
    if violations:
        logger.warning("containment violated: %s", "; ".join(violations))
    return HierarchyReport(
        verdicts={level.value: v for level, v in verdicts.items()},
        violations=tuple(violations),
    )


# ---------------------------------------------------------------- facade


class ConsistencyChecker:
    """Checks histories of one object at any level of the hierarchy."""

    def __init__(
        self,
        bundle: SpecBundle,
        budget: Optional[SearchBudget] = None,
        pending: CompletionPolicy = CompletionPolicy.CLOSE_PENDING,
    ):
        """Initialize the checker.

        Args:
            bundle: Specs of the object at every level
            budget: Search caps, from the environment if omitted
            pending: How pending operations are completed before checking
        """
        self.bundle = bundle
        self.budget = budget or SearchBudget.from_env()
        self.pending = CompletionPolicy(pending)

    def prepare(self, h: History) -> History:
        return complete_history(h, self.pending)

    def check(self, h: History, level: Level | str) -> Verdict:
        """Check one level and return its verdict."""
        level = Level(level)
        h = self.prepare(h)
        if level is Level.LINEARIZABILITY:
            return check_linearizable(h, self.bundle.sequential, self.budget)
        if level is Level.SET:
            return check_set_linearizable(h, self.bundle.set_spec, self.budget)
        if level is Level.MP:
            return check_mp_linearizable(h, self.bundle.effect, self.budget)
        return check_interval_linearizable(h, self.bundle.interval, self.budget)

    def check_all(self, h: History) -> HierarchyReport:
        return check_hierarchy(self.prepare(h), self.bundle, self.budget)

    def replay(self, h: History, verdict: Verdict) -> bool:
        """Replay an accepting verdict's witness against this checker's specs."""
        h = self.prepare(h)
        level = Level(verdict.level)
        if level is Level.LINEARIZABILITY:
            return replay_linearization(h, self.bundle.sequential, verdict.witness)
        if level is Level.SET:
            return replay_set(h, self.bundle.set_spec, verdict.witness)
        if level is Level.MP:
            return replay_mp(h, self.bundle.effect, verdict.witness)
        return replay_interval(h, self.bundle.interval, verdict.witness)
