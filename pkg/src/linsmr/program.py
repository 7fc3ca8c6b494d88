"""Lock-structured application programs and their DSL compiler.

Programs are straight-line request handlers over shared integer variables,
locks and condition variables, in the style of::

    var sharedVar = 1

    op D() {
      lock(myLock)
      localVar = read(sharedVar)
      localVar = localVar + 1
      write(sharedVar, localVar)
      unlock(myLock)
      localVar = localVar * 2
      lock(myLock); write(sharedVar, localVar); unlock(myLock)
      return()
    }
"""

import ast
import re
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional, Union

from .errors import ParseError, UnbalancedLocks, UnprotectedAccess, WaitWithoutLock

OK = "ok"
ARGS_LOCAL = "__args__"
RESULT_LOCAL = "__result__"
STATE_VAR = "__state__"
OBJECT_LOCK = "__object__"

_ALLOWED_NODES = (
    ast.Expression,
    ast.BinOp,
    ast.UnaryOp,
    ast.Name,
    ast.Constant,
    ast.Load,
    ast.Add,
    ast.Sub,
    ast.Mult,
    ast.USub,
    ast.UAdd,
)


@dataclass(frozen=True)
class Expr:
    """Integer expression over locals and constants."""

    source: str
    node: ast.Expression = field(compare=False, repr=False)

    @property
    def names(self) -> frozenset[str]:
        return frozenset(n.id for n in ast.walk(self.node) if isinstance(n, ast.Name))

    def evaluate(self, env: Mapping[str, Any]) -> Any:
        return _eval(self.node.body, env)


def _eval(node: ast.AST, env: Mapping[str, Any]) -> Any:
    if isinstance(node, ast.Constant):
        return node.value
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.UnaryOp):
        value = _eval(node.operand, env)
        return -value if isinstance(node.op, ast.USub) else value
    left = _eval(node.left, env)
    right = _eval(node.right, env)
    if isinstance(node.op, ast.Add):
        return left + right
    if isinstance(node.op, ast.Sub):
        return left - right
    return left * right


def parse_expr(text: str, line: Optional[int] = None) -> Expr:
    text = text.strip()
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"invalid expression {text!r}", line) from exc
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ParseError(f"unsupported construct in {text!r}", line)
        if isinstance(node, ast.Constant) and (
            isinstance(node.value, bool) or not isinstance(node.value, int)
        ):
            raise ParseError(f"only integer literals are allowed in {text!r}", line)
    return Expr(source=text, node=tree)


# ---------------------------------------------------------------- instructions


@dataclass(frozen=True)
class Lock:
    lock: str
    line: int = 0


@dataclass(frozen=True)
class Unlock:
    lock: str
    line: int = 0


@dataclass(frozen=True)
class Read:
    target: str
    var: str
    line: int = 0


@dataclass(frozen=True)
class Write:
    var: str
    expr: Expr
    line: int = 0


@dataclass(frozen=True)
class Compute:
    target: str
    expr: Expr
    line: int = 0


@dataclass(frozen=True)
class Wait:
    cond: str
    lock: str
    line: int = 0


@dataclass(frozen=True)
class Signal:
    cond: str
    line: int = 0


@dataclass(frozen=True)
class NestedCall:
    target: Optional[str]
    object: str
    op: str
    args: tuple[Expr, ...] = ()
    line: int = 0


@dataclass(frozen=True)
class Return:
    expr: Optional[Expr] = None
    line: int = 0


@dataclass(frozen=True)
class Apply:
    """Atomic transition of a spec-backed object (not available in the DSL)."""

    op_name: str
    transition: Callable = field(compare=False, repr=False)
    line: int = 0


Instruction = Union[Lock, Unlock, Read, Write, Compute, Wait, Signal, NestedCall, Return, Apply]


@dataclass(frozen=True)
class Program:
    """A validated request handler."""

    name: str
    params: tuple[str, ...]
    instructions: tuple[Instruction, ...]
    variadic: bool = False

    @property
    def locks(self) -> frozenset[str]:
        return frozenset(
            i.lock for i in self.instructions if isinstance(i, (Lock, Unlock, Wait))
        )

    @property
    def vars(self) -> frozenset[str]:
        return frozenset(i.var for i in self.instructions if isinstance(i, (Read, Write)))

    @property
    def conds(self) -> frozenset[str]:
        return frozenset(i.cond for i in self.instructions if isinstance(i, (Wait, Signal)))

    @property
    def has_nested_calls(self) -> bool:
        return any(isinstance(i, NestedCall) for i in self.instructions)

    def step_cuts(self) -> list[int]:
        """Indices after which a critical section ends.

        A section ends when the held-lock set becomes empty, either by an
        unlock or by a wait that releases the only held lock.
        """
        cuts = []
        held: list[str] = []
        for index, instr in enumerate(self.instructions):
            if isinstance(instr, Lock):
                held.append(instr.lock)
            elif isinstance(instr, Unlock):
                held.remove(instr.lock)
                if not held:
                    cuts.append(index)
            elif isinstance(instr, Wait) and held == [instr.lock]:
                cuts.append(index)
        return cuts

    def critical_sections(self) -> int:
        return len(self.step_cuts())

    def initial_locals(self, args: tuple) -> dict[str, Any]:
        local_vars: dict[str, Any] = dict(zip(self.params, args))
        local_vars[ARGS_LOCAL] = tuple(args)
        return local_vars


@dataclass(frozen=True)
class ObjectDefinition:
    """Shared variables, conditions and the programs of one object."""

    name: str
    variables: Mapping[str, Any]
    programs: Mapping[str, Program]
    conditions: Mapping[str, Optional[Expr]] = field(default_factory=dict)

    def initial_valuation(self) -> dict[str, Any]:
        return dict(self.variables)

    def program(self, op_name: str) -> Program:
        return self.programs[op_name]

    def condition_holds(self, cond: str, shared: Mapping[str, Any]) -> bool:
        predicate = self.conditions.get(cond)
        if predicate is None:
            return False
        return bool(predicate.evaluate(shared))

    @classmethod
    def from_spec(cls, spec: Any, name: Optional[str] = None) -> "ObjectDefinition":
        """Object whose operations apply a sequential spec atomically."""
        programs = {}
        for op_name in spec.op_names:
            programs[op_name] = Program(
                name=op_name,
                params=(),
                instructions=(
                    Lock(OBJECT_LOCK),
                    Apply(op_name, spec.apply),
                    Unlock(OBJECT_LOCK),
                    Return(parse_expr(RESULT_LOCAL)),
                ),
                variadic=True,
            )
        return cls(
            name=name or spec.name,
            variables={STATE_VAR: spec.initial_state},
            programs=programs,
        )


def apply_local(instr: Instruction, shared: dict[str, Any], local_vars: dict[str, Any]) -> None:
    """Execute a data instruction; synchronization instructions are ignored."""
    if isinstance(instr, Read):
        local_vars[instr.target] = shared[instr.var]
    elif isinstance(instr, Write):
        shared[instr.var] = instr.expr.evaluate(local_vars)
    elif isinstance(instr, Compute):
        local_vars[instr.target] = instr.expr.evaluate(local_vars)
    elif isinstance(instr, Apply):
        state, result = instr.transition(shared[STATE_VAR], instr.op_name, local_vars[ARGS_LOCAL])
        shared[STATE_VAR] = state
        local_vars[RESULT_LOCAL] = result


def return_value(instr: Return, local_vars: Mapping[str, Any]) -> Any:
    if instr.expr is None:
        return OK
    return instr.expr.evaluate(local_vars)


# ---------------------------------------------------------------- validation


def validate_program(program: Program) -> Program:
    instructions = program.instructions
    if not instructions or not isinstance(instructions[-1], Return):
        raise ParseError(f"program {program.name!r} is missing a final return")
    held: list[str] = []
    assigned = set(program.params) | {ARGS_LOCAL}

    def check_names(expr: Expr, line: int) -> None:
        missing = expr.names - assigned
        if missing:
            raise ParseError(f"undefined local(s) {', '.join(sorted(missing))}", line)

    for index, instr in enumerate(instructions):
        if isinstance(instr, Return) and index != len(instructions) - 1:
            raise ParseError("unreachable statements after return", instr.line)
        if isinstance(instr, Lock):
            if instr.lock in held:
                raise UnbalancedLocks(f"line {instr.line}: lock {instr.lock!r} is already held")
            held.append(instr.lock)
        elif isinstance(instr, Unlock):
            if not held or held[-1] != instr.lock:
                raise UnbalancedLocks(f"line {instr.line}: unlock of {instr.lock!r} is not nested")
            held.pop()
        elif isinstance(instr, Wait):
            if instr.lock not in held:
                raise WaitWithoutLock(f"line {instr.line}: wait on {instr.cond!r} without {instr.lock!r}")
            if held != [instr.lock]:
                raise WaitWithoutLock(
                    f"line {instr.line}: wait on {instr.cond!r} while also holding {held}"
                )
        elif isinstance(instr, Read):
            if not held:
                raise UnprotectedAccess(f"line {instr.line}: read of {instr.var!r} outside a lock")
            assigned.add(instr.target)
        elif isinstance(instr, Write):
            if not held:
                raise UnprotectedAccess(f"line {instr.line}: write of {instr.var!r} outside a lock")
            check_names(instr.expr, instr.line)
        elif isinstance(instr, Compute):
            check_names(instr.expr, instr.line)
            assigned.add(instr.target)
        elif isinstance(instr, NestedCall):
            for arg in instr.args:
                check_names(arg, instr.line)
            if instr.target:
                assigned.add(instr.target)
        elif isinstance(instr, Apply):
            assigned.add(RESULT_LOCAL)
        elif isinstance(instr, Return):
            if held:
                raise UnbalancedLocks(f"line {instr.line}: return while holding {held}")
            if instr.expr is not None:
                check_names(instr.expr, instr.line)
    return program


# ---------------------------------------------------------------- parser

_IDENT = r"[A-Za-z_]\w*"
_STATEMENTS = [
    ("lock", re.compile(rf"lock\(\s*({_IDENT})\s*\)")),
    ("unlock", re.compile(rf"unlock\(\s*({_IDENT})\s*\)")),
    ("wait", re.compile(rf"wait\(\s*({_IDENT})\s*,\s*({_IDENT})\s*\)")),
    ("signal", re.compile(rf"signal\(\s*({_IDENT})\s*\)")),
    ("write", re.compile(rf"write\(\s*({_IDENT})\s*,(.+)\)")),
    ("return", re.compile(r"return\s*\((.*)\)")),
    ("read", re.compile(rf"({_IDENT})\s*=\s*read\(\s*({_IDENT})\s*\)")),
    ("call", re.compile(rf"(?:({_IDENT})\s*=\s*)?call\((.*)\)")),
    ("compute", re.compile(rf"({_IDENT})\s*=\s*compute\((.+)\)")),
    ("assign", re.compile(rf"({_IDENT})\s*=\s*(.+)")),
]
_OP_HEADER = re.compile(rf"\bop\s+({_IDENT})\s*\(([^)]*)\)\s*\{{")
_VAR_DECL = re.compile(rf"var\s+({_IDENT})\s*=\s*(-?\d+)")
_COND_DECL = re.compile(rf"cond\s+({_IDENT})(?:\s+when\s+(.+))?")
_OBJECT_DECL = re.compile(rf"object\s+({_IDENT})")


def _strip_comments(source: str) -> str:
    return "\n".join(re.split(r"#|//", line, maxsplit=1)[0] for line in source.splitlines())


def _statements(body: str, first_line: int) -> list[tuple[int, str]]:
    out = []
    for offset, line in enumerate(body.split("\n")):
        for part in line.split(";"):
            part = part.strip()
            if part:
                out.append((first_line + offset, part))
    return out


def _parse_statement(text: str, line: int) -> Instruction:
    for kind, pattern in _STATEMENTS:
        match = pattern.fullmatch(text)
        if not match:
            continue
        if kind == "lock":
            return Lock(match.group(1), line)
        if kind == "unlock":
            return Unlock(match.group(1), line)
        if kind == "wait":
            return Wait(match.group(1), match.group(2), line)
        if kind == "signal":
            return Signal(match.group(1), line)
        if kind == "write":
            return Write(match.group(1), parse_expr(match.group(2), line), line)
        if kind == "return":
            inner = match.group(1).strip()
            return Return(parse_expr(inner, line) if inner else None, line)
        if kind == "read":
            return Read(match.group(1), match.group(2), line)
        if kind == "call":
            parts = [p.strip() for p in match.group(2).split(",") if p.strip()]
            if len(parts) < 2 or not all(re.fullmatch(_IDENT, p) for p in parts[:2]):
                raise ParseError(f"call needs an object and an operation: {text!r}", line)
            args = tuple(parse_expr(p, line) for p in parts[2:])
            return NestedCall(match.group(1), parts[0], parts[1], args, line)
        return Compute(match.group(1), parse_expr(match.group(2), line), line)
    raise ParseError(f"unrecognised statement {text!r}", line)


def _parse_body(name: str, params: tuple[str, ...], body: str, first_line: int) -> Program:
    instructions = tuple(_parse_statement(text, line) for line, text in _statements(body, first_line))
    return validate_program(Program(name=name, params=params, instructions=instructions))


def _parse_params(text: str, line: int) -> tuple[str, ...]:
    params = tuple(p.strip() for p in text.split(",") if p.strip())
    for param in params:
        if not re.fullmatch(_IDENT, param):
            raise ParseError(f"invalid parameter {param!r}", line)
    return params


def _op_blocks(text: str) -> tuple[list[tuple[str, tuple[str, ...], str, int]], str]:
    """Split ``op`` blocks from the top-level declarations."""
    blocks = []
    rest = []
    cursor = 0
    for match in _OP_HEADER.finditer(text):
        if match.start() < cursor:
            raise ParseError("nested op blocks are not supported", text.count("\n", 0, match.start()) + 1)
        rest.append(text[cursor:match.start()])
        close = text.find("}", match.end())
        line = text.count("\n", 0, match.start()) + 1
        if close < 0:
            raise ParseError(f"op {match.group(1)!r} is not closed", line)
        params = _parse_params(match.group(2), line)
        body_line = text.count("\n", 0, match.end()) + 1
        blocks.append((match.group(1), params, text[match.end():close], body_line))
        cursor = close + 1
    rest.append(text[cursor:])
    return blocks, "\n".join(rest)


def compile_program(source: str, name: str = "main") -> Program:
    """Compile a single program: one ``op`` block or a bare statement body."""
    text = _strip_comments(source)
    blocks, rest = _op_blocks(text)
    if not blocks:
        return _parse_body(name, (), text, 1)
    if len(blocks) > 1 or rest.strip():
        raise ParseError("expected a single op block; use compile_object for objects")
    op_name, params, body, line = blocks[0]
    return _parse_body(op_name, params, body, line)


def compile_object(source: str, name: str = "object") -> ObjectDefinition:
    """Compile an object: ``var``/``cond``/``object`` declarations and ``op`` blocks."""
    text = _strip_comments(source)
    blocks, rest = _op_blocks(text)
    variables: dict[str, Any] = {}
    conditions: dict[str, Optional[Expr]] = {}
    for line, statement in _statements(rest, 1):
        if match := _VAR_DECL.fullmatch(statement):
            variables[match.group(1)] = int(match.group(2))
        elif match := _COND_DECL.fullmatch(statement):
            predicate = match.group(2)
            conditions[match.group(1)] = parse_expr(predicate, line) if predicate else None
        elif match := _OBJECT_DECL.fullmatch(statement):
            name = match.group(1)
        else:
            raise ParseError(f"unexpected declaration {statement!r}", line)
    if not blocks:
        raise ParseError("object defines no op blocks")

    programs = {}
    for op_name, params, body, line in blocks:
        if op_name in programs:
            raise ParseError(f"op {op_name!r} defined twice", line)
        programs[op_name] = _parse_body(op_name, params, body, line)
    for cond, predicate in conditions.items():
        if predicate is not None and predicate.names - variables.keys():
            raise ParseError(f"condition {cond!r} refers to undeclared variables")
    for program in programs.values():
        if program.conds - conditions.keys():
            raise ParseError(f"op {program.name!r} uses undeclared condition(s)")
        undeclared = program.vars - variables.keys()
        if undeclared:
            raise ParseError(
                f"op {program.name!r} uses undeclared variable(s) {', '.join(sorted(undeclared))}"
            )
    return ObjectDefinition(name=name, variables=variables, programs=programs, conditions=conditions)
