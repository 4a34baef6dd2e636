"""Command-line front end.

Exit codes: 0 success / no violations, 1 invariant or assertion violation,
2 configuration, bound, range, or parse error.
"""

from __future__ import annotations

import pathlib
import sys

import click

from . import dot, scenarios, tracefile
from .explore import BoundExceeded, DEFAULT_BOUND, basic_catalog, basic_setup, explore_catalog
from .harness import (
    ConfigInvalid,
    ReplayMismatch,
    Trace,
    TraceConfig,
    check_invariants,
    replay,
    run_campaign,
)
from .model import ATOMIC, PURE_CAUSAL, SimulatorError

MODES = [PURE_CAUSAL, ATOMIC]


@click.group()
def main():
    """Reference CRDT simulator: run randomized campaigns, check traces,
    explore small programs exhaustively, run scenario presets."""


@main.command("run")
@click.option("--seed", default=0, show_default=True, help="64-bit campaign seed.")
@click.option("--executions", default=1000, show_default=True, help="Number of random executions.")
@click.option("--events", default=20, show_default=True, help="Events per execution.")
@click.option("--replicas", default=3, show_default=True, help="Replicas per world.")
@click.option("--mode", type=click.Choice(MODES), default=PURE_CAUSAL, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Directory receiving shrunk failing traces.")
def cmd_run(seed, executions, events, replicas, mode, out):
    """Run a randomized campaign and check every invariant."""
    try:
        config = TraceConfig(replicas=replicas, events=events, mode=mode)
        summary = run_campaign(seed, executions, config)
    except ConfigInvalid as e:
        click.echo(f"config error: {e}", err=True)
        sys.exit(2)
    click.echo(f"executions: {summary['executions']}")
    click.echo(f"multivalued fraction: {summary['multivalued_fraction']:.4f}")
    for inv in sorted(summary["violations"]):
        click.echo(f"violations[{inv}]: {summary['violations'][inv]}")
    click.echo(f"total violating traces: {summary['total_violating']}")
    if out and summary["failures"]:
        outdir = pathlib.Path(out)
        outdir.mkdir(parents=True, exist_ok=True)
        for index, shrunk, _report in summary["failures"]:
            path = outdir / f"fail-{index}.trace"
            path.write_text(tracefile.dumps(shrunk))
            click.echo(f"wrote {path}")
    sys.exit(1 if summary["total_violating"] else 0)


def _load_trace(path) -> Trace:
    try:
        return tracefile.loads(pathlib.Path(path).read_text())
    except (OSError, tracefile.TraceFormatError) as e:
        click.echo(f"cannot read trace: {e}", err=True)
        sys.exit(2)


@main.command("check")
@click.argument("trace_file", type=click.Path(exists=True, dir_okay=False))
def cmd_check(trace_file):
    """Replay a stored trace and print its invariant report."""
    trace = _load_trace(trace_file)
    try:
        report = check_invariants(trace)
    except (ReplayMismatch, ConfigInvalid, SimulatorError) as e:
        click.echo(f"trace does not replay: {e}", err=True)
        sys.exit(2)
    click.echo(f"events: {report.stats['events']} (failed: {report.stats['failed_events']})")
    click.echo(f"multivalued: {report.stats['multivalued']}")
    if report.ok:
        click.echo("all invariants hold")
        sys.exit(0)
    for v in report.violations:
        click.echo(f"violation[{v.invariant}] step {v.step} replica {v.replica}: {v.detail}")
    sys.exit(1)


@main.command("explore")
@click.option("--events", default=3, show_default=True,
              help=f"Program length bound (max {DEFAULT_BOUND}).")
@click.option("--catalog", type=click.Choice(["basic"]), default="basic", show_default=True)
@click.option("--replicas", default=2, show_default=True)
@click.option("--mode", type=click.Choice(MODES), default=PURE_CAUSAL, show_default=True)
def cmd_explore(events, catalog, replicas, mode):
    """Exhaustively explore every catalog program up to the length bound."""
    try:
        report = explore_catalog(basic_catalog(), events, replicas=replicas,
                                 mode=mode, setup=basic_setup)
    except BoundExceeded as e:
        click.echo(f"bound exceeded: {e}", err=True)
        sys.exit(2)
    click.echo(f"states explored: {report.states}")
    click.echo(f"terminal states: {report.terminals}")
    if report.ok:
        click.echo("all invariants hold in every reachable state")
        sys.exit(0)
    for v in report.violations[:20]:
        click.echo(f"violation: {v}")
    click.echo(f"total violations: {len(report.violations)}")
    sys.exit(1)


def _write_dots(world, outdir) -> None:
    outdir = pathlib.Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for st in world.states:
        path = outdir / f"replica-{st.rid}.dot"
        path.write_text(dot.snapshot_dot(st, name=f"replica-{st.rid}"))
        click.echo(f"wrote {path}")


@main.command("scenario")
@click.argument("name", type=click.Choice(["fig1", "fig2"]))
@click.option("--mode", type=click.Choice(MODES), default=PURE_CAUSAL, show_default=True)
@click.option("--dot", "dot_dir", type=click.Path(file_okay=False), default=None,
              help="Directory receiving one graph document per replica.")
def cmd_scenario(name, mode, dot_dir):
    """Run a scenario preset and assert its expected outcome."""
    if name == "fig2":
        world, problems = scenarios.run_fig2(mode)
        if dot_dir:
            _write_dots(world, dot_dir)
        if problems:
            for p in problems:
                click.echo(f"assertion failed: {p}")
            sys.exit(1)
        click.echo("fig2: reconciled state matches on every replica")
        sys.exit(0)
    report = scenarios.run_fig1(mode)
    click.echo(f"fig1: explored {report.states} states, {report.terminals} terminal")
    if dot_dir:
        # Snapshot of one quiesced run of the same program for rendering.
        from .model import World
        world = World(2, mode)
        scenarios.fig1_setup(world)
        world.quiesce()
        for replica, op in scenarios.fig1_program():
            try:
                world.execute(replica, op)
            except Exception:
                pass
            world.quiesce()
        _write_dots(world, dot_dir)
    if not report.ok:
        for v in report.violations[:20]:
            click.echo(f"assertion failed: {v}")
        sys.exit(1)
    click.echo("fig1: delete refused in every interleaving; no dangling reference reachable")
    sys.exit(0)


@main.command("export-dot")
@click.argument("trace_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--step", required=True, type=int, help="Schedule step index (0-based).")
@click.option("--replica", required=True, type=int, help="Replica to snapshot.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Output file (default: stdout).")
def cmd_export_dot(trace_file, step, replica, out):
    """Snapshot one replica's object graph after a given schedule step."""
    trace = _load_trace(trace_file)
    if not 0 <= step < len(trace.steps):
        click.echo(f"step {step} out of range 0..{len(trace.steps) - 1}", err=True)
        sys.exit(2)
    if not 0 <= replica < trace.config.replicas:
        click.echo(f"replica {replica} out of range 0..{trace.config.replicas - 1}", err=True)
        sys.exit(2)
    prefix = Trace(trace.seed, trace.config, trace.steps[:step + 1])
    try:
        world, _ = replay(prefix)
    except (ReplayMismatch, SimulatorError) as e:
        click.echo(f"trace does not replay: {e}", err=True)
        sys.exit(2)
    doc = dot.snapshot_dot(world.states[replica], name=f"step-{step}-replica-{replica}")
    if out:
        pathlib.Path(out).write_text(doc)
        click.echo(f"wrote {out}")
    else:
        click.echo(doc, nl=False)
    sys.exit(0)


if __name__ == "__main__":
    main()
