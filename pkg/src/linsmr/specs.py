"""Specification forms for every level of the consistency hierarchy.

  - SequentialSpec: atomic transitions (linearizability)
  - SetSpec:        sequential spec plus joint transitions of simultaneous sets
  - EffectSpec:     operations split into ordered effect steps (MP linearizability)
  - IntervalSpec:   explicit automaton over invocation/response sets

Built-in objects are registered by name, see ``get_bundle``.
"""

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Optional

from pydantic import BaseModel, ConfigDict, model_validator

from .errors import MalformedInput, UnknownSpec, UnsupportedProgram
from .history import UNOBSERVED
from .program import ObjectDefinition, Program, apply_local, return_value

OK = "ok"
EMPTY = "empty"
FAIL = "fail"

Call = tuple[str, tuple]
TokenCall = tuple[int, str, tuple]
EffectStep = Callable[[Any, tuple], tuple[Any, Any]]


def results_match(recorded: Any, produced: Any) -> bool:
    """Compare a recorded return value with one produced by a spec."""
    return recorded == UNOBSERVED or recorded == produced


@dataclass(frozen=True)
class SequentialSpec:
    """``apply(state, op_name, args) -> (state, return_value)``, pure."""

    name: str
    initial_state: Any
    apply: Callable[[Any, str, tuple], tuple[Any, Any]]
    op_names: tuple[str, ...]


@dataclass(frozen=True)
class EffectSpec:
    """Operations decomposed into effect steps.

    Each step maps ``(state, observations_so_far)`` to ``(state, observation)``;
    ``return_of(op_name, args, observations)`` assembles the return value.
    """

    name: str
    initial_state: Any
    decompose: Callable[[str, tuple], tuple[EffectStep, ...]]
    return_of: Callable[[str, tuple, tuple], Any]
    op_names: tuple[str, ...]

    def run_atomically(self, state: Any, op_name: str, args: tuple) -> tuple[Any, Any]:
        observations: tuple = ()
        for step in self.decompose(op_name, args):
            state, seen = step(state, observations)
            observations += (seen,)
        return state, self.return_of(op_name, args, observations)


@dataclass(frozen=True)
class SetSpec:
    """A sequential spec plus admissible simultaneous sets and their joint transition."""

    name: str
    sequential: SequentialSpec
    admissible: Callable[[tuple[Call, ...]], bool]
    joint: Callable[[Any, tuple[Call, ...]], tuple[Any, tuple]]

    @property
    def initial_state(self) -> Any:
        return self.sequential.initial_state

    def transition(self, state: Any, calls: tuple[Call, ...]) -> Optional[tuple[Any, tuple]]:
        if len(calls) == 1:
            op_name, args = calls[0]
            state, result = self.sequential.apply(state, op_name, args)
            return state, (result,)
        if not self.admissible(calls):
            return None
        return self.joint(state, calls)


@dataclass(frozen=True)
class IntervalSpec:
    """Automaton whose transitions consume invocations and emit responses.

    ``transitions(state, invoked, responding)`` receives the calls consumed at
    an interaction point as ``(token, op_name, args)`` and the tokens that
    respond there; it yields ``(next_state, {token: return_value})`` for every
    possible successor.
    """

    name: str
    initial_state: Any
    transitions: Callable[[Any, tuple[TokenCall, ...], tuple[int, ...]], Iterable[tuple[Any, Mapping[int, Any]]]]
    accepting: Callable[[Any], bool] = lambda state: True


class Verdict(BaseModel):
    """Outcome of one checker run."""

    model_config = ConfigDict(frozen=True)

    level: str
    accepted: bool
    unknown: bool = False
    witness: tuple[tuple[str, ...], ...] = ()
    explanation: Optional[str] = None
    nodes: int = 0

    @model_validator(mode="after")
    def _explained(self) -> "Verdict":
        if not self.accepted and not self.explanation:
            raise MalformedInput("a rejecting verdict needs an explanation")
        return self


def dumps_verdicts(verdicts: Iterable[Verdict]) -> str:
    return "".join(v.model_dump_json() + "\n" for v in verdicts)


def loads_verdicts(text: str) -> list[Verdict]:
    return [Verdict.model_validate_json(line) for line in text.splitlines() if line.strip()]


# ---------------------------------------------------------------- derivations


def _unknown_op(spec: str, op_name: str) -> MalformedInput:
    return MalformedInput(f"{spec}: unknown operation {op_name!r}")


def effect_spec_from_sequential(seq: SequentialSpec) -> EffectSpec:
    """One effect step per operation; MP checking then coincides with linearizability."""

    def decompose(op_name: str, args: tuple) -> tuple[EffectStep, ...]:
        def step(state: Any, observations: tuple) -> tuple[Any, Any]:
            return seq.apply(state, op_name, args)

        return (step,)

    return EffectSpec(
        name=seq.name,
        initial_state=seq.initial_state,
        decompose=decompose,
        return_of=lambda op_name, args, observations: observations[0],
        op_names=seq.op_names,
    )


def singleton_set_spec(seq: SequentialSpec) -> SetSpec:
    return SetSpec(
        name=seq.name,
        sequential=seq,
        admissible=lambda calls: False,
        joint=lambda state, calls: (state, ()),
    )


def interval_spec_from_effect(effect: EffectSpec) -> IntervalSpec:
    """Interval automaton running effect steps of active operations between points.

    State is ``(object_state, active)`` with ``active`` a sorted tuple of
    ``(token, op_name, args, observations)``.
    """

    def step_count(op_name: str, args: tuple) -> int:
        return len(effect.decompose(op_name, args))

    def transitions(state, invoked, responding):
        obj_state, active = state
        start = dict((tok, (name, args, obs)) for tok, name, args, obs in active)
        for token, op_name, args in invoked:
            start[token] = (op_name, args, ())
        if any(token not in start for token in responding):
            return

        def freeze(running: dict) -> tuple:
            return tuple(sorted((tok,) + entry for tok, entry in running.items()))

        seen = set()
        frontier = [(obj_state, freeze(start))]
        while frontier:
            config = frontier.pop()
            if config in seen:
                continue
            seen.add(config)
            current, running = config
            for index, (tok, op_name, args, obs) in enumerate(running):
                steps = effect.decompose(op_name, args)
                if len(obs) == len(steps):
                    continue
                after, seen_value = steps[len(obs)](current, obs)
                updated = list(running)
                updated[index] = (tok, op_name, args, obs + (seen_value,))
                frontier.append((after, tuple(updated)))

        for current, running in sorted(seen, key=repr):
            table = {tok: (op_name, args, obs) for tok, op_name, args, obs in running}
            returns = {}
            for token in responding:
                op_name, args, obs = table[token]
                if len(obs) != step_count(op_name, args):
                    break
                returns[token] = effect.return_of(op_name, args, obs)
            else:
                remaining = tuple(entry for entry in running if entry[0] not in returns)
                yield (current, remaining), returns

    return IntervalSpec(
        name=effect.name,
        initial_state=(effect.initial_state, ()),
        transitions=transitions,
        accepting=lambda state: not state[1],
    )


def interval_spec_from_sequential(seq: SequentialSpec) -> IntervalSpec:
    return interval_spec_from_effect(effect_spec_from_sequential(seq))


def _valuation(shared: Mapping[str, Any]) -> tuple:
    return tuple(sorted(shared.items()))


def _program_segments(program: Program) -> tuple[list[tuple], tuple]:
    if program.has_nested_calls:
        raise UnsupportedProgram(
            f"program {program.name!r} contains nested calls; they are simulated, not derived"
        )
    body = program.instructions[:-1]
    cuts = program.step_cuts()
    if not cuts:
        return [body], ()
    segments = []
    start = 0
    for cut in cuts:
        segments.append(body[start:cut + 1])
        start = cut + 1
    return segments, body[start:]


def _program_effects(program: Program) -> tuple[Callable, Callable]:
    segments, trailing = _program_segments(program)
    final = program.instructions[-1]

    def decompose(args: tuple) -> tuple[EffectStep, ...]:
        def make(segment: tuple) -> EffectStep:
            def step(state: Any, observations: tuple) -> tuple[Any, Any]:
                shared = dict(state)
                local_vars = dict(observations[-1]) if observations else program.initial_locals(args)
                for instr in segment:
                    apply_local(instr, shared, local_vars)
                return _valuation(shared), tuple(sorted(local_vars.items()))

            return step

        return tuple(make(segment) for segment in segments)

    def assemble(args: tuple, observations: tuple) -> Any:
        local_vars = dict(observations[-1])
        for instr in trailing:
            apply_local(instr, {}, local_vars)
        return return_value(final, local_vars)

    return decompose, assemble


def effect_spec_of_program(program: Program, initial: Optional[Mapping[str, Any]] = None) -> EffectSpec:
    """Effect steps are the program's critical sections, in program order.

    Code between sections folds into the following step; code after the last
    section folds into the return assembly.
    """
    decompose, assemble = _program_effects(program)
    if initial is None:
        initial = {var: 0 for var in sorted(program.vars)}

    def decompose_op(op_name: str, args: tuple) -> tuple[EffectStep, ...]:
        if op_name != program.name:
            raise _unknown_op(program.name, op_name)
        return decompose(args)

    return EffectSpec(
        name=program.name,
        initial_state=_valuation(initial),
        decompose=decompose_op,
        return_of=lambda op_name, args, observations: assemble(args, observations),
        op_names=(program.name,),
    )


def effect_spec_of_object(obj: ObjectDefinition) -> EffectSpec:
    effects = {name: _program_effects(program) for name, program in obj.programs.items()}

    def decompose(op_name: str, args: tuple) -> tuple[EffectStep, ...]:
        if op_name not in effects:
            raise _unknown_op(obj.name, op_name)
        return effects[op_name][0](args)

    return EffectSpec(
        name=obj.name,
        initial_state=_valuation(obj.initial_valuation()),
        decompose=decompose,
        return_of=lambda op_name, args, observations: effects[op_name][1](args, observations),
        op_names=tuple(sorted(obj.programs)),
    )


def sequential_spec_of_effect(effect: EffectSpec) -> SequentialSpec:
    """Run every operation's effect steps back to back."""
    return SequentialSpec(
        name=effect.name,
        initial_state=effect.initial_state,
        apply=effect.run_atomically,
        op_names=effect.op_names,
    )


def composite_op(obj: str, op_name: str) -> str:
    return f"{obj}.{op_name}"


def product_spec(components: Mapping[str, SequentialSpec], name: str = "composite") -> SequentialSpec:
    """Side-by-side composition; operations are named ``<object>.<op>``."""
    objects = sorted(components)

    def apply(state: tuple, op_name: str, args: tuple) -> tuple[Any, Any]:
        obj, _, inner = op_name.partition(".")
        if obj not in components:
            raise _unknown_op(name, op_name)
        position = objects.index(obj)
        after, result = components[obj].apply(state[position], inner, args)
        return state[:position] + (after,) + state[position + 1:], result

    return SequentialSpec(
        name=name,
        initial_state=tuple(components[obj].initial_state for obj in objects),
        apply=apply,
        op_names=tuple(
            composite_op(obj, op) for obj in objects for op in components[obj].op_names
        ),
    )


# ---------------------------------------------------------------- built-in objects


def register_spec() -> SequentialSpec:
    """Read/write register holding 0 initially."""

    def apply(state: int, op_name: str, args: tuple) -> tuple[Any, Any]:
        if op_name == "write":
            return args[0], OK
        if op_name == "read":
            return state, state
        raise _unknown_op("register", op_name)

    return SequentialSpec("register", 0, apply, ("read", "write"))


def counter_spec() -> SequentialSpec:
    def apply(state: int, op_name: str, args: tuple) -> tuple[Any, Any]:
        if op_name == "inc":
            return state + 1, OK
        if op_name == "get":
            return state, state
        raise _unknown_op("counter", op_name)

    return SequentialSpec("counter", 0, apply, ("get", "inc"))


def fifo_queue_spec() -> SequentialSpec:
    def apply(state: tuple, op_name: str, args: tuple) -> tuple[Any, Any]:
        if op_name == "enq":
            return state + (args[0],), OK
        if op_name == "deq":
            if not state:
                return state, EMPTY
            return state[1:], state[0]
        raise _unknown_op("fifo-queue", op_name)

    return SequentialSpec("fifo-queue", (), apply, ("deq", "enq"))


def lock_object_spec() -> tuple[SequentialSpec, EffectSpec]:
    """The two-critical-section object: D turns s into (s+1)*2, E reads s.

    The effect form splits D at its lock release: step 1 stores s+1 and
    captures it, step 2 stores twice the captured value.
    """

    def apply(state: int, op_name: str, args: tuple) -> tuple[Any, Any]:
        if op_name == "D":
            return (state + 1) * 2, OK
        if op_name == "E":
            return state, state
        raise _unknown_op("lock-object", op_name)

    def d_first(state: int, observations: tuple) -> tuple[Any, Any]:
        return state + 1, state + 1

    def d_second(state: int, observations: tuple) -> tuple[Any, Any]:
        return observations[0] * 2, None

    def e_read(state: int, observations: tuple) -> tuple[Any, Any]:
        return state, state

    def decompose(op_name: str, args: tuple) -> tuple[EffectStep, ...]:
        if op_name == "D":
            return (d_first, d_second)
        if op_name == "E":
            return (e_read,)
        raise _unknown_op("lock-object", op_name)

    def return_of(op_name: str, args: tuple, observations: tuple) -> Any:
        return OK if op_name == "D" else observations[0]

    seq = SequentialSpec("lock-object", 1, apply, ("D", "E"))
    effect = EffectSpec("lock-object", 1, decompose, return_of, ("D", "E"))
    return seq, effect


def aggregate_cell_spec() -> SequentialSpec:
    """Aggregated object of the nested-invocation scenario.

    G increments and returns the new value, H(x) stores x, J reads.
    """

    def apply(state: int, op_name: str, args: tuple) -> tuple[Any, Any]:
        if op_name == "G":
            return state + 1, state + 1
        if op_name == "H":
            return args[0], OK
        if op_name == "J":
            return state, state
        raise _unknown_op("aggregate-cell", op_name)

    return SequentialSpec("aggregate-cell", 1, apply, ("G", "H", "J"))


def nested_composite_spec() -> tuple[SequentialSpec, EffectSpec]:
    """Composite over an aggregate cell: F runs G then H(2 * G's result), J reads.

    Atomically F behaves like D of the lock object; its two nested calls are
    its two effect steps.
    """
    seq, effect = lock_object_spec()
    names = {"F": "D", "J": "E"}

    def rename(op_name: str) -> str:
        if op_name not in names:
            raise _unknown_op("nested-composite", op_name)
        return names[op_name]

    return (
        SequentialSpec(
            "nested-composite",
            seq.initial_state,
            lambda state, op_name, args: seq.apply(state, rename(op_name), args),
            ("F", "J"),
        ),
        EffectSpec(
            "nested-composite",
            effect.initial_state,
            lambda op_name, args: effect.decompose(rename(op_name), args),
            lambda op_name, args, observations: effect.return_of(rename(op_name), args, observations),
            ("F", "J"),
        ),
    )


def exchanger_spec() -> SetSpec:
    """Two simultaneous exchanges swap arguments; a lone exchange fails."""

    def apply(state: int, op_name: str, args: tuple) -> tuple[Any, Any]:
        if op_name == "exchange":
            return state, FAIL
        raise _unknown_op("exchanger", op_name)

    def admissible(calls: tuple[Call, ...]) -> bool:
        return len(calls) == 2 and all(name == "exchange" for name, _ in calls)

    def joint(state: int, calls: tuple[Call, ...]) -> tuple[Any, tuple]:
        (_, first), (_, second) = calls
        return state, (second[0], first[0])

    seq = SequentialSpec("exchanger", 0, apply, ("exchange",))
    return SetSpec("exchanger", seq, admissible, joint)


def write_snapshot_specs() -> tuple[SequentialSpec, SetSpec, EffectSpec, IntervalSpec]:
    """Write-snapshot: each op writes its value and returns the values seen.

    Atomically an op sees only earlier writes; overlapping ops may see each
    other at the set, MP and interval levels.
    """

    def apply(state: frozenset, op_name: str, args: tuple) -> tuple[Any, Any]:
        if op_name != "write_snapshot":
            raise _unknown_op("write-snapshot", op_name)
        state = state | {args[0]}
        return state, tuple(sorted(state))

    def joint(state: frozenset, calls: tuple[Call, ...]) -> tuple[Any, tuple]:
        state = state | {args[0] for _, args in calls}
        snapshot = tuple(sorted(state))
        return state, tuple(snapshot for _ in calls)

    def decompose(op_name: str, args: tuple) -> tuple[EffectStep, ...]:
        if op_name != "write_snapshot":
            raise _unknown_op("write-snapshot", op_name)

        def write(state: frozenset, observations: tuple) -> tuple[Any, Any]:
            return state | {args[0]}, None

        def snapshot(state: frozenset, observations: tuple) -> tuple[Any, Any]:
            return state, tuple(sorted(state))

        return (write, snapshot)

    def transitions(state, invoked, responding):
        memory, active = state
        memory = memory | {args[0] for _, _, args in invoked}
        running = set(active) | {token for token, _, _ in invoked}
        if not set(responding) <= running:
            return
        snapshot = tuple(sorted(memory))
        yield (memory, tuple(sorted(running - set(responding)))), {t: snapshot for t in responding}

    seq = SequentialSpec("write-snapshot", frozenset(), apply, ("write_snapshot",))
    set_spec = SetSpec("write-snapshot", seq, lambda calls: len(calls) > 1, joint)
    effect = EffectSpec(
        "write-snapshot",
        frozenset(),
        decompose,
        lambda op_name, args, observations: observations[-1],
        ("write_snapshot",),
    )
    interval = IntervalSpec(
        "write-snapshot", (frozenset(), ()), transitions, accepting=lambda state: not state[1]
    )
    return seq, set_spec, effect, interval


# ---------------------------------------------------------------- registry


@dataclass(frozen=True)
class SpecBundle:
    """Compatible specifications of one object across the hierarchy levels."""

    name: str
    sequential: SequentialSpec
    set_spec: SetSpec
    effect: EffectSpec
    interval: IntervalSpec

    @classmethod
    def from_sequential(cls, seq: SequentialSpec, effect: Optional[EffectSpec] = None) -> "SpecBundle":
        effect = effect or effect_spec_from_sequential(seq)
        return cls(
            name=seq.name,
            sequential=seq,
            set_spec=singleton_set_spec(seq),
            effect=effect,
            interval=interval_spec_from_effect(effect),
        )

    @classmethod
    def from_object(cls, obj: ObjectDefinition) -> "SpecBundle":
        """Bundle derived from a compiled object's critical sections."""
        effect = effect_spec_of_object(obj)
        return cls.from_sequential(sequential_spec_of_effect(effect), effect)


def _lock_object_bundle() -> SpecBundle:
    seq, effect = lock_object_spec()
    return SpecBundle.from_sequential(seq, effect)


def _exchanger_bundle() -> SpecBundle:
    set_spec = exchanger_spec()
    bundle = SpecBundle.from_sequential(set_spec.sequential)
    return SpecBundle(
        name=bundle.name,
        sequential=bundle.sequential,
        set_spec=set_spec,
        effect=bundle.effect,
        interval=bundle.interval,
    )


def _write_snapshot_bundle() -> SpecBundle:
    seq, set_spec, effect, interval = write_snapshot_specs()
    return SpecBundle("write-snapshot", seq, set_spec, effect, interval)


SPEC_BUNDLES: dict[str, Callable[[], SpecBundle]] = {
    "register": lambda: SpecBundle.from_sequential(register_spec()),
    "lock-object": _lock_object_bundle,
    "counter": lambda: SpecBundle.from_sequential(counter_spec()),
    "fifo-queue": lambda: SpecBundle.from_sequential(fifo_queue_spec()),
    "aggregate-cell": lambda: SpecBundle.from_sequential(aggregate_cell_spec()),
    "exchanger": _exchanger_bundle,
    "write-snapshot": _write_snapshot_bundle,
    "nested-composite": lambda: SpecBundle.from_sequential(*nested_composite_spec()),
}


def register_bundle(name: str, factory: Callable[[], SpecBundle]) -> None:
    """Make a bundle addressable by name, e.g. one derived from a compiled object."""
    SPEC_BUNDLES[name] = factory


def get_bundle(name: str) -> SpecBundle:
    """Get the spec bundle registered under ``name``."""
    if name not in SPEC_BUNDLES:
        raise UnknownSpec(f"unknown spec {name!r}; available: {', '.join(list_available_specs())}")
    return SPEC_BUNDLES[name]()


def get_spec(name: str) -> SequentialSpec:
    return get_bundle(name).sequential


def list_available_specs() -> list[str]:
    """List all registered spec names."""
    return list(SPEC_BUNDLES.keys())


def write_snapshot_interval_spec() -> IntervalSpec:
    """The write-snapshot automaton on its own."""
    return write_snapshot_specs()[3]
