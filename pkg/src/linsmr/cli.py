"""CLI interface for the linearizability hierarchy toolkit"""

import logging
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.panel import Panel

from .checkers import ConsistencyChecker, Level, SearchBudget
from .config import ENV_BUDGET_NODES, ENV_BUDGET_OPS, load_settings
from .errors import LinSmrError, MalformedInput
from .history import CompletionPolicy, History, load_trace, project_object, write_trace
from .program import compile_object
from .quorum import run_quorum_register, stale_read_plan, stale_read_workload
from .render import SHOW_MODES, STYLES, render
from .scenarios import ScenarioFile, ScenarioRun, get_scenario, list_scenarios
from .specs import SpecBundle, Verdict, dumps_verdicts, get_bundle, list_available_specs, loads_verdicts
from .suites import list_suites, run_suite
from .tracing import TracedChecker, setup_tracing

app = typer.Typer(help="Check histories against the linearizability hierarchy and simulate SMR runs")
console = Console()
err_console = Console(stderr=True)

EXIT_OK = 0
EXIT_REJECT = 1
EXIT_INPUT = 2
EXIT_UNKNOWN = 3

LEVEL_CHOICES = [level.value for level in Level] + ["all"]


def _fail(message: str) -> typer.Exit:
    err_console.print(f"[red]Error: {escape(message)}[/red]")
    return typer.Exit(EXIT_INPUT)


@app.callback()
def main_callback(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log debug output to stderr"),
):
    """Linearizability hierarchy checkers and state machine replication simulator."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=err_console, show_path=False)],
        force=True,
    )


def _format_witness(verdict: Verdict) -> str:
    return " ".join("{" + ",".join(point) + "}" for point in verdict.witness)


def _print_verdict(verdict: Verdict) -> None:
    if verdict.unknown:
        console.print(f"{verdict.level:<9} [yellow]UNKNOWN[/yellow] {escape(verdict.explanation or '')}")
    elif verdict.accepted:
        console.print(f"{verdict.level:<9} [green]ACCEPT[/green]  witness {escape(_format_witness(verdict))}")
    else:
        console.print(f"{verdict.level:<9} [red]REJECT[/red]  {escape(verdict.explanation or '')}")


def _exit_code(verdicts: list[Verdict]) -> int:
    if any(not v.accepted and not v.unknown for v in verdicts):
        return EXIT_REJECT
    if any(v.unknown for v in verdicts):
        return EXIT_UNKNOWN
    return EXIT_OK


def _history_to_check(h: History, project: Optional[str]) -> History:
    if project is not None:
        if project not in h.objects():
            raise MalformedInput(f"trace has no object {project!r}; objects: {h.objects()}")
        return project_object(h, project)
    if len(h.objects()) > 1:
        raise MalformedInput(f"trace spans objects {h.objects()}; pick one with --project")
    return h


def _bundle(spec: str, object_file: Optional[Path]) -> SpecBundle:
    if object_file is not None:
        return SpecBundle.from_object(compile_object(object_file.read_text(encoding="utf-8")))
    return get_bundle(spec)


@app.command()
def run(
    scenario: Optional[str] = typer.Argument(None, help="Scenario name from list-scenarios"),
    seed: Optional[int] = typer.Option(None, help="Scheduling seed (scenario default if omitted)"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Trace file to write"),
    scenario_file: Optional[Path] = typer.Option(None, help="JSON scenario definition to run"),
    read_repair: Optional[bool] = typer.Option(
        None, "--read-repair/--no-read-repair", help="Quorum scenarios: toggle read repair"
    ),
):
    """Run a scenario and write its client history as a trace file."""
    try:
        if scenario_file is not None:
            result = ScenarioFile.load(scenario_file).run()
        elif scenario is None:
            raise MalformedInput("name a scenario or pass --scenario-file")
        elif read_repair is not None and scenario.startswith("quorum"):
            get_scenario(scenario)
            name = "quorum-repair" if read_repair else "quorum"
            history = run_quorum_register(read_repair, stale_read_plan(), stale_read_workload())
            result = ScenarioRun(name=name, history=history, spec="register")
        else:
            entry = get_scenario(scenario)
            result = entry.build(entry.default_seed if seed is None else seed)

        output = output or Path(f"{result.name}.trace.jsonl")
        write_trace(result.history, output)
        written = [str(output)]
        for key, extra in result.extra.items():
            path = output.with_name(f"{output.name.split('.')[0]}.{key}.trace.jsonl")
            write_trace(extra, path)
            written.append(str(path))
        if result.output is not None:
            sim_path = output.with_suffix(".sim.json")
            sim_path.write_text(result.output.model_dump_json(indent=2) + "\n", encoding="utf-8")
            written.append(str(sim_path))
        check_with = f"--spec {result.spec}"
        if result.source is not None:
            object_path = output.with_name(f"{output.name.split('.')[0]}.obj")
            object_path.write_text(result.source, encoding="utf-8")
            written.append(str(object_path))
            check_with = f"--object {object_path}"
    except (LinSmrError, OSError) as e:
        raise _fail(str(e))

    console.print(
        Panel(
            f"Scenario: {result.name}\n"
            f"Operations: {len(result.history.operations())}\n"
            f"Check with: {escape(check_with)}\n"
            + "\n".join(f"  • {escape(path)}" for path in written),
            title="Run",
        )
    )


@app.command()
def check(
    trace: Path = typer.Argument(..., help="Trace file (one JSON event per line)"),
    level: str = typer.Option("all", help=f"One of {', '.join(LEVEL_CHOICES)}"),
    spec: str = typer.Option("register", help="Spec name from list-specs"),
    object_file: Optional[Path] = typer.Option(
        None, "--object", help="Derive the spec from an object source file instead"
    ),
    project: Optional[str] = typer.Option(None, help="Check only the events of this object"),
    pending: CompletionPolicy = typer.Option(
        CompletionPolicy.CLOSE_PENDING, help="How pending operations are completed"
    ),
    max_nodes: Optional[int] = typer.Option(None, envvar=ENV_BUDGET_NODES, help="Search node budget"),
    max_ops: Optional[int] = typer.Option(None, envvar=ENV_BUDGET_OPS, help="Largest history searched"),
    verdicts_out: Optional[Path] = typer.Option(None, "--verdicts", help="Write verdicts as JSON lines"),
    enable_tracing: bool = typer.Option(False, help="Enable OpenTelemetry tracing"),
    otlp_endpoint: str = typer.Option("http://localhost:4317", help="OTLP collector endpoint"),
):
    """Check a trace at one level of the hierarchy, or all of them."""
    if level not in LEVEL_CHOICES:
        raise _fail(f"unknown level {level!r}; use one of {', '.join(LEVEL_CHOICES)}")
    try:
        settings = load_settings()
        budget = SearchBudget(
            max_ops=max_ops if max_ops is not None else settings.max_ops,
            max_nodes=max_nodes if max_nodes is not None else settings.max_nodes,
            on_exhaustion=settings.on_exhaustion,
        )
        checker = ConsistencyChecker(_bundle(spec, object_file), budget, pending)
        if enable_tracing:
            tracer, meter = setup_tracing(otlp_endpoint=otlp_endpoint, enabled=True)
            if tracer:
                checker = TracedChecker(checker, tracer, meter)
        h = _history_to_check(load_trace(trace), project)
        if level == "all":
            report = checker.check_all(h)
            verdicts = list(report.verdicts.values())
            violations = report.violations
        else:
            verdicts = [checker.check(h, level)]
            violations = ()
        if verdicts_out is not None:
            verdicts_out.write_text(dumps_verdicts(verdicts), encoding="utf-8")
    except (LinSmrError, OSError) as e:
        raise _fail(str(e))

    for verdict in verdicts:
        _print_verdict(verdict)
    for violation in violations:
        console.print(f"[red]containment violated: {escape(violation)}[/red]")
    raise typer.Exit(_exit_code(verdicts))


def _pick_witness(verdicts: list[Verdict], level: Optional[str]):
    for verdict in verdicts:
        if level is not None and verdict.level != level:
            continue
        if verdict.accepted and verdict.witness:
            return verdict.witness
    return None


@app.command(name="render")
def render_cmd(
    trace: Path = typer.Argument(..., help="Trace file to draw"),
    style: str = typer.Option("ascii", help=f"One of {', '.join(STYLES)}"),
    show: str = typer.Option("spans", help=f"One of {', '.join(SHOW_MODES)}"),
    verdicts_file: Optional[Path] = typer.Option(
        None, "--verdicts", help="Verdict file from check; its witness marks the points"
    ),
    level: Optional[str] = typer.Option(None, help="Which verdict's witness to draw"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Diagram file (stdout if omitted)"),
):
    """Draw a trace as a timeline diagram."""
    try:
        h = load_trace(trace)
        witness = None
        if verdicts_file is not None:
            witness = _pick_witness(loads_verdicts(verdicts_file.read_text(encoding="utf-8")), level)
        diagram = render(h, style=style, show=show, witness=witness)
        if output is not None:
            output.write_text(diagram, encoding="utf-8")
    except (LinSmrError, OSError) as e:
        raise _fail(str(e))
    if output is None:
        typer.echo(diagram, nl=False)


@app.command()
def suite(
    name: str = typer.Argument("all", help=f"One of {', '.join(list_suites())}"),
    trials: Optional[int] = typer.Option(None, help="Trials per suite (suite default if omitted)"),
    seed: int = typer.Option(0, help="Random seed"),
    mutant: bool = typer.Option(False, help="Run the sequential suite on an off-by-one register"),
    counterexample: Optional[Path] = typer.Option(
        None, help="Write the first counterexample trace here"
    ),
    enable_tracing: bool = typer.Option(False, help="Enable OpenTelemetry tracing"),
    otlp_endpoint: str = typer.Option("http://localhost:4317", help="OTLP collector endpoint"),
):
    """Run randomized property suites; exit 0 iff every suite passes."""
    tracer = None
    if enable_tracing:
        tracer, _ = setup_tracing(otlp_endpoint=otlp_endpoint, enabled=True)
    try:
        if tracer:
            with tracer.start_as_current_span("linsmr.suite") as span:
                span.set_attribute("linsmr.suite", name)
                results = run_suite(name, trials, seed, mutant)
                span.set_attribute("linsmr.failures", sum(r.failures for r in results))
        else:
            results = run_suite(name, trials, seed, mutant)
    except LinSmrError as e:
        raise _fail(str(e))

    for result in results:
        status = "[green]PASS[/green]" if result.passed else "[red]FAIL[/red]"
        console.print(
            f"{result.name:<12} {status}  trials={result.trials} failures={result.failures}"
            f" unknown={result.unknown}"
        )
        if result.detail:
            console.print(f"  {escape(result.detail)}")

    failed = next((r for r in results if not r.passed), None)
    if failed is None:
        raise typer.Exit(EXIT_OK)
    if failed.counterexample:
        if counterexample is not None:
            counterexample.write_text(failed.counterexample, encoding="utf-8")
            console.print(f"counterexample written to {escape(str(counterexample))}")
        else:
            console.print(f"[bold]counterexample ({failed.name}):[/bold]")
            typer.echo(failed.counterexample, nl=False)
    raise typer.Exit(EXIT_REJECT)


@app.command()
def list_specs():
    """List all registered specs."""
    console.print("[bold cyan]Available Specs:[/bold cyan]\n")
    for name in list_available_specs():
        console.print(f"  • {name}")


@app.command(name="list-scenarios")
def list_scenarios_cmd():
    """List the scenario catalog with expected verdicts."""
    console.print("[bold cyan]Available Scenarios:[/bold cyan]\n")
    for name in list_scenarios():
        entry = get_scenario(name)
        accepted = ", ".join(level for level, ok in entry.expected.items() if ok) or "none"
        console.print(f"  • {name}: {escape(entry.description)} [dim](accepts: {accepted})[/dim]")


def main():
    """Main entry point."""
    app()


if __name__ == "__main__":
    main()
