"""Tests for timeline diagrams"""

import sys
from pathlib import Path

import pytest

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from linsmr.errors import MalformedInput
from linsmr.history import Operation, history_from_operations
from linsmr.render import place_points, render, render_ascii, render_svg


def op(op_id, start, end, name="read", result=0):
    return Operation(
        op_id=op_id,
        client=f"client-{op_id}",
        object="register",
        op_name=name,
        args=(),
        result=result if end is not None else None,
        invocation_time=start,
        response_time=end,
    )


def rows(text):
    return {line.split(" ", 1)[0]: line.split("|", 1)[1] for line in text.splitlines()}


def test_empty_history():
    assert render_ascii(history_from_operations([])) == ""


def test_spans():
    text = render(history_from_operations([op("a", 0, 2), op("b", 3, 5)]))
    lines = text.splitlines()
    assert lines[0].startswith("a read() -> 0")
    assert lines[0].endswith("|[---]")
    assert rows(text)["b"] == "      [---]"
    assert lines[-1].startswith("t")


def test_pending_span_is_open():
    text = render(history_from_operations([op("a", 0, 2), op("b", 1, None)]))
    assert rows(text)["b"].rstrip().endswith(">")


def test_linearization_points():
    h = history_from_operations([op("a", 0, 4), op("b", 1, 5), op("c", 2, 6)])
    text = render(h, show="points", witness=(("a",), ("b",), ("c",)))
    assert text.count("*") == 3


def test_effect_points_are_numbered():
    h = history_from_operations([op("D", 0, 7, name="D", result="ok"), op("E", 0, 6, name="E", result=2)])
    text = render(h, show="points", witness=(("D.1",), ("E.1",), ("D.2",)))
    d_row = rows(text)["D"]
    assert "1" in d_row and "2" in d_row
    assert d_row.index("1") < d_row.index("2")
    assert "1" in rows(text)["E"]


def test_points_follow_witness_order():
    h = history_from_operations([op("a", 0, 4), op("b", 0, 4)])
    placed = place_points(h, (("b",), ("a",)))
    assert [owners[0][0] for _, owners in placed] == ["b", "a"]
    assert placed[0][0] < placed[1][0]


def test_overlap_row():
    text = render(history_from_operations([op("a", 0, 2), op("b", 1, 3)]), show="intervals")
    assert "=" in rows(text)["overlap"]


def test_spans_mode_ignores_witness():
    h = history_from_operations([op("a", 0, 2)])
    assert render(h, witness=(("a",),)) == render(h)


def test_svg():
    h = history_from_operations([op("a", 0, 2), op("b<", 1, 3)])
    svg = render_svg(h, witness=(("a",), ("b<",)), show="points")
    assert svg.startswith("<svg")
    assert svg.rstrip().endswith("</svg>")
    assert svg.count("<circle") == 2
    assert "b&lt;" in svg


def test_bad_arguments():
    h = history_from_operations([op("a", 0, 2)])
    with pytest.raises(MalformedInput):
        render(h, style="png")
    with pytest.raises(MalformedInput):
        render(h, show="bogus")
    with pytest.raises(MalformedInput):
        render(h, show="points", witness=(("zz",),))


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
