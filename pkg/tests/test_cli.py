"""Tests for the linsmr command line"""

import json
import sys
from pathlib import Path

import pytest
from typer.testing import CliRunner

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from linsmr.cli import EXIT_INPUT, EXIT_OK, EXIT_REJECT, EXIT_UNKNOWN, app
from linsmr.specs import loads_verdicts

runner = CliRunner()


def invoke(*args):
    return runner.invoke(app, [str(a) for a in args], env={"LINSMR_BUDGET_NODES": "", "LINSMR_BUDGET_OPS": ""})


@pytest.fixture
def listing1_trace(tmp_path):
    path = tmp_path / "listing1.trace.jsonl"
    result = invoke("run", "listing1", "-o", path)
    assert result.exit_code == EXIT_OK, result.output
    return path


def test_run_writes_trace_and_output(listing1_trace):
    assert listing1_trace.exists()
    assert len(listing1_trace.read_text().splitlines()) == 4
    assert listing1_trace.with_suffix(".sim.json").exists()


def test_run_nested_writes_extra_trace(tmp_path):
    result = invoke("run", "nested", "-o", tmp_path / "nested.trace.jsonl")
    assert result.exit_code == EXIT_OK
    assert (tmp_path / "nested.aggregated.trace.jsonl").exists()


def test_check_all_levels_rejects(listing1_trace):
    result = invoke("check", listing1_trace, "--spec", "lock-object")
    assert result.exit_code == EXIT_REJECT
    assert "REJECT" in result.output
    assert "ACCEPT" in result.output


def test_check_one_level_and_verdict_file(listing1_trace, tmp_path):
    verdicts = tmp_path / "verdicts.jsonl"
    result = invoke("check", listing1_trace, "--spec", "lock-object", "--level", "mp", "--verdicts", verdicts)
    assert result.exit_code == EXIT_OK
    [verdict] = loads_verdicts(verdicts.read_text())
    assert verdict.level == "mp" and verdict.accepted


def test_check_unknown_verdict(listing1_trace):
    result = invoke("check", listing1_trace, "--spec", "lock-object", "--level", "mp", "--max-ops", "1")
    assert result.exit_code == EXIT_UNKNOWN
    assert "UNKNOWN" in result.output


def test_check_with_object_source(listing1_trace, tmp_path):
    from linsmr.scenarios import LISTING1_SOURCE

    source = tmp_path / "lock.obj"
    source.write_text(LISTING1_SOURCE)
    result = invoke("check", listing1_trace, "--object", source, "--level", "interval")
    assert result.exit_code == EXIT_OK


def test_check_input_errors(listing1_trace, tmp_path):
    assert invoke("check", tmp_path / "missing.jsonl").exit_code == EXIT_INPUT
    assert invoke("check", listing1_trace, "--spec", "nope").exit_code == EXIT_INPUT
    assert invoke("check", listing1_trace, "--level", "sequential").exit_code == EXIT_INPUT
    assert invoke("check", listing1_trace, "--project", "elsewhere").exit_code == EXIT_INPUT


def test_run_input_errors():
    assert invoke("run", "listing2").exit_code == EXIT_INPUT
    assert invoke("run").exit_code == EXIT_INPUT


def test_run_scenario_file_writes_its_object(tmp_path):
    scenario = tmp_path / "mailslot.json"
    scenario.write_text(
        json.dumps(
            {
                "name": "mailslot",
                "object_source": (
                    "var slot = 0\n"
                    "op put(x) { lock(m); write(slot, x); unlock(m); return() }\n"
                    "op get() { lock(m); v = read(slot); unlock(m); return(v) }\n"
                ),
                "workload": [
                    {"request_id": "p", "client": "c1", "op_name": "put", "args": [9]},
                    {"request_id": "g", "client": "c2", "op_name": "get", "issue_time": 1, "after": ["p"]},
                ],
            }
        )
    )
    trace = tmp_path / "mailslot.trace.jsonl"
    result = invoke("run", "--scenario-file", scenario, "-o", trace)
    assert result.exit_code == EXIT_OK, result.output
    obj = tmp_path / "mailslot.obj"
    assert obj.exists()
    assert "--object" in result.output
    assert invoke("check", trace, "--object", obj, "--level", "lin").exit_code == EXIT_OK


def test_quorum_read_repair_toggle(tmp_path):
    trace = tmp_path / "q.trace.jsonl"
    assert invoke("run", "quorum", "--read-repair", "-o", trace).exit_code == EXIT_OK
    assert invoke("check", trace, "--level", "lin").exit_code == EXIT_OK
    assert invoke("run", "quorum", "--no-read-repair", "-o", trace).exit_code == EXIT_OK
    assert invoke("check", trace, "--level", "lin").exit_code == EXIT_REJECT


def test_render(listing1_trace, tmp_path):
    verdicts = tmp_path / "v.jsonl"
    invoke("check", listing1_trace, "--spec", "lock-object", "--level", "mp", "--verdicts", verdicts)
    result = invoke("render", listing1_trace, "--show", "points", "--verdicts", verdicts)
    assert result.exit_code == EXIT_OK
    assert "[" in result.output
    svg = tmp_path / "l1.svg"
    assert invoke("render", listing1_trace, "--style", "svg", "-o", svg).exit_code == EXIT_OK
    assert svg.read_text().startswith("<svg")
    assert invoke("render", listing1_trace, "--style", "png").exit_code == EXIT_INPUT


def test_listings():
    specs = invoke("list-specs")
    assert specs.exit_code == EXIT_OK
    assert "lock-object" in specs.output
    scenarios = invoke("list-scenarios")
    assert "duplicate-ids" in scenarios.output


def test_suite_pass_and_mutant(tmp_path):
    assert invoke("suite", "oracle", "--trials", "5").exit_code == EXIT_OK
    counterexample = tmp_path / "cx.trace.jsonl"
    result = invoke("suite", "sequential", "--trials", "20", "--mutant", "--counterexample", counterexample)
    assert result.exit_code == EXIT_REJECT
    assert counterexample.read_text().strip()
    assert invoke("suite", "nope").exit_code == EXIT_INPUT


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
