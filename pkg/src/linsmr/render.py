"""Timeline diagrams of histories: ASCII for terminals, SVG for documents.

One row per operation, time on the x axis. ``show`` selects the overlay:

  spans      the operation spans only
  points     linearization or effect points from a witness
  intervals  ticks where operations overlap, plus interval-run points
"""

from typing import Optional, Sequence
from xml.sax.saxutils import escape

from .errors import MalformedInput
from .history import History, Operation

SHOW_MODES = ("spans", "points", "intervals")
STYLES = ("ascii", "svg")


def _label(op: Operation) -> str:
    args = ",".join(str(a) for a in op.args)
    text = f"{op.op_id} {op.op_name}({args})"
    if op.complete:
        text += f" -> {op.result}"
    return text


def _end(op: Operation, horizon: int) -> int:
    return op.response_time if op.response_time is not None else horizon


def _owner(label: str) -> tuple[str, str]:
    """Split a witness label into (op_id, marker)."""
    if label[:1] in "+-" and len(label) > 1:
        return label[1:], ">" if label[0] == "+" else "<"
    op_id, _, step = label.rpartition(".")
    if op_id and step.isdigit():
        return op_id, step[-1]
    return label, "*"


def place_points(h: History, witness: Sequence[Sequence[str]]) -> list[tuple[float, list[tuple[str, str]]]]:
    """Give each witness point a time inside the spans it touches, in witness order."""
    ops = {op.op_id: op for op in h.operations()}
    horizon = h.max_time() + 1
    gap = 1.0 / (len(witness) + 1)
    placed = []
    previous = -1.0
    for point in witness:
        owners = [_owner(label) for label in point]
        unknown = [op_id for op_id, _ in owners if op_id not in ops]
        if unknown:
            raise MalformedInput(f"witness names unknown ops {unknown}")
        low = max(ops[op_id].invocation_time for op_id, _ in owners)
        high = min(_end(ops[op_id], horizon) for op_id, _ in owners)
        at = min(max(float(low), previous) + gap, float(high))
        placed.append((at, owners))
        previous = at
    return placed


def _overlap_ticks(ops: Sequence[Operation], horizon: int) -> list[int]:
    ticks = []
    for tick in range(horizon + 1):
        active = sum(1 for op in ops if op.invocation_time <= tick <= _end(op, horizon))
        if active >= 2:
            ticks.append(tick)
    return ticks


def _check(show: str, style: str = "ascii") -> None:
    if show not in SHOW_MODES:
        raise MalformedInput(f"unknown overlay {show!r}; use one of {', '.join(SHOW_MODES)}")
    if style not in STYLES:
        raise MalformedInput(f"unknown style {style!r}; use one of {', '.join(STYLES)}")


def render_ascii(h: History, witness: Optional[Sequence[Sequence[str]]] = None, show: str = "spans") -> str:
    """Two columns per tick; ``[`` and ``]`` mark invocation and response."""
    _check(show)
    ops = h.operations()
    if not ops:
        return ""
    horizon = h.max_time() + 1
    width = 2 * horizon + 1
    labels = [_label(op) for op in ops]
    pad = max(len(text) for text in labels + ["overlap"])
    rows: dict[str, list[str]] = {}
    for op in ops:
        cells = [" "] * width
        start, end = 2 * op.invocation_time, 2 * _end(op, horizon)
        for column in range(start, end + 1):
            cells[column] = "-"
        cells[start] = "["
        cells[end] = "]" if op.complete else ">"
        rows[op.op_id] = cells

    if witness and show in ("points", "intervals"):
        spans = {op.op_id: (2 * op.invocation_time, 2 * _end(op, horizon)) for op in ops}
        for at, owners in place_points(h, witness):
            for op_id, marker in owners:
                start, end = spans[op_id]
                rows[op_id][min(max(round(2 * at), start + 1), end - 1)] = marker

    lines = [f"{text:<{pad}} |{''.join(rows[op.op_id]).rstrip()}" for op, text in zip(ops, labels)]
    if show == "intervals":
        cells = [" "] * width
        busy = set(_overlap_ticks(ops, horizon))
        for tick in busy:
            cells[2 * tick] = "="
            if tick + 1 in busy:
                cells[2 * tick + 1] = "="
        lines.append(f"{'overlap':<{pad}} |{''.join(cells).rstrip()}")

    axis = [" "] * width
    for tick in range(0, horizon + 1, 5):
        for offset, char in enumerate(str(tick)):
            if 2 * tick + offset < width:
                axis[2 * tick + offset] = char
    lines.append(f"{'t':<{pad}} |{''.join(axis).rstrip()}")
    return "\n".join(lines) + "\n"


ROW_HEIGHT = 28
TICK_WIDTH = 24
LABEL_WIDTH = 200
MARGIN = 16


def render_svg(h: History, witness: Optional[Sequence[Sequence[str]]] = None, show: str = "spans") -> str:
    """Schematic SVG: fixed row height, x proportional to ticks."""
    _check(show)
    ops = h.operations()
    horizon = h.max_time() + 1
    width = LABEL_WIDTH + TICK_WIDTH * horizon + 2 * MARGIN
    height = ROW_HEIGHT * (len(ops) + 1) + 2 * MARGIN

    def x(time: float) -> str:
        return f"{LABEL_WIDTH + MARGIN + TICK_WIDTH * time:.1f}"

    def y(row: int) -> int:
        return MARGIN + ROW_HEIGHT * row + ROW_HEIGHT // 2

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"'
        ' font-family="monospace" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if show == "intervals" and ops:
        for tick in _overlap_ticks(ops, horizon):
            parts.append(
                f'<rect x="{x(tick - 0.5)}" y="{MARGIN}" width="{TICK_WIDTH}"'
                f' height="{ROW_HEIGHT * len(ops)}" fill="#fdd835" opacity="0.25"/>'
            )
    rows = {}
    for row, op in enumerate(ops):
        rows[op.op_id] = row
        end = _end(op, horizon)
        parts.append(f'<text x="{MARGIN}" y="{y(row) + 4}" fill="#24292f">{escape(_label(op))}</text>')
        dash = "" if op.complete else ' stroke-dasharray="4 3"'
        parts.append(
            f'<line x1="{x(op.invocation_time)}" y1="{y(row)}" x2="{x(end)}" y2="{y(row)}"'
            f' stroke="#0969da" stroke-width="3"{dash}/>'
        )
        for tick in (op.invocation_time, end):
            parts.append(
                f'<line x1="{x(tick)}" y1="{y(row) - 6}" x2="{x(tick)}" y2="{y(row) + 6}"'
                ' stroke="#0969da" stroke-width="2"/>'
            )
    if witness and show in ("points", "intervals"):
        for at, owners in place_points(h, witness):
            for op_id, marker in owners:
                parts.append(
                    f'<circle cx="{x(at)}" cy="{y(rows[op_id])}" r="5" fill="#cf222e"/>'
                )
                if marker != "*":
                    parts.append(
                        f'<text x="{x(at)}" y="{y(rows[op_id]) - 8}" text-anchor="middle"'
                        f' fill="#cf222e">{escape(marker)}</text>'
                    )
    axis_row = y(len(ops))
    for tick in range(0, horizon + 1, 5):
        parts.append(
            f'<text x="{x(tick)}" y="{axis_row}" text-anchor="middle" fill="#57606a">{tick}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render(
    h: History,
    style: str = "ascii",
    show: str = "spans",
    witness: Optional[Sequence[Sequence[str]]] = None,
) -> str:
    _check(show, style)
    if style == "svg":
        return render_svg(h, witness, show)
    return render_ascii(h, witness, show)
