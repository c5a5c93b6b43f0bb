"""Command-line front end: assemble, validate, run, timeline and wcet."""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import __version__
from .assembler import AsmError, assemble, read_image, write_outputs
from .core import SimulationHalt, Simulator
from .memsys import DataImage, ImageError, MemoryFault, parse_samples
from .programs import source as builtin_source
from .swcu import (PartitionSchedule, ScheduleConflict, ScheduleError, grant_timeline, parse_time, read_config,
                   schedule_from_config, validate_schedule)
from .wcet import WcetError, WcetQuery, cycles_to_ms, effective_wcet, format_ms

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _err(msg: str) -> None:
    print(f"partsim: {msg}", file=sys.stderr)


@dataclass
class RunConfig:
    schedule: PartitionSchedule
    code: dict[int, list[int]] = field(default_factory=dict)
    data: dict[int, DataImage] = field(default_factory=dict)
    horizon: int = 0
    trace_path: str | None = None
    verbosity: int = 0
    samples: list[tuple[int, int, int]] = field(default_factory=list)


def load_run_config(path: str | Path) -> RunConfig:
    """Read a schedule plus its ``[run]`` section; paths are relative to the file."""
    path = Path(path)
    cp = read_config(path.read_text())
    sched = schedule_from_config(cp)
    cfg = RunConfig(sched)
    if not cp.has_section("run"):
        return cfg
    run = cp["run"]
    here = path.parent
    cfg.horizon = parse_time(run.get("horizon", "0"), sched.clock_hz)
    cfg.trace_path = run.get("trace")
    cfg.verbosity = int(run.get("verbosity", "0"))
    if run.get("samples"):
        cfg.samples = parse_samples((here / run["samples"]).read_text())
    for key, value in run.items():
        for prefix in ("image", "source"):
            if key.startswith(prefix) and key[len(prefix):].isdigit():
                part = int(key[len(prefix):])
                if prefix == "image":
                    cfg.code[part], cfg.data[part] = read_image(here / value)
                else:
                    if value.startswith("builtin:"):
                        text = builtin_source(value[len("builtin:"):])
                    else:
                        text = (here / value).read_text()
                    result = assemble(text)
                    cfg.code[part], cfg.data[part] = result.code, result.data
    return cfg


def format_timeline(rows) -> str:
    lines = [f"{'partition':>9}  {'E_start':>10}  {'E_end':>10}"]
    for g in rows:
        lines.append(f"{g.label:>9}  {g.start:>10}  {g.end:>10}")
    return "\n".join(lines)


# --- commands ----------------------------------------------------------------------


def cmd_asm(args) -> int:
    try:
        text = Path(args.input).read_text()
        result = assemble(text, hazard_distance=args.hazard_distance)
    except (AsmError, ImageError) as exc:
        _err(f"{args.input}: {exc}")
        return EXIT_FAIL
    except OSError as exc:
        _err(str(exc))
        return EXIT_USAGE
    base = args.output or str(Path(args.input).with_suffix(""))
    for p in write_outputs(result, base):
        print(p)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        sched = schedule_from_config(read_config(Path(args.schedule).read_text()))
        conflicts = validate_schedule(sched)
    except (ScheduleError, ValueError, OSError) as exc:
        _err(f"invalid schedule: {exc}")
        return EXIT_USAGE
    if conflicts:
        for c in conflicts:
            print(str(c))
        return EXIT_FAIL
    print(f"ok: {len(sched.enabled)} entries, switch window {sched.switch_window} cycles")
    return EXIT_OK


def cmd_timeline(args) -> int:
    try:
        sched = schedule_from_config(read_config(Path(args.config).read_text()))
        rows = grant_timeline(sched, parse_time(args.horizon, sched.clock_hz))
    except ScheduleConflict as exc:
        _err(str(exc))
        return EXIT_FAIL
    except (ScheduleError, ValueError, OSError) as exc:
        _err(str(exc))
        return EXIT_USAGE
    print(format_timeline(rows))
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        cfg = load_run_config(args.config)
        if args.horizon is not None:
            cfg.horizon = parse_time(args.horizon, cfg.schedule.clock_hz)
        if args.trace is not None:
            cfg.trace_path = args.trace
        if args.verbosity is not None:
            cfg.verbosity = args.verbosity
        if args.samples is not None:
            cfg.samples = parse_samples(Path(args.samples).read_text())
        if cfg.horizon < 0:
            raise ValueError("horizon must be non-negative")
    except (AsmError, ImageError, ScheduleError, ValueError, OSError, KeyError) as exc:
        _err(f"bad run configuration: {exc}")
        return EXIT_USAGE
    conflicts = validate_schedule(cfg.schedule)
    if conflicts:
        _err("schedule rejected:")
        for c in conflicts:
            print(f"  {c}", file=sys.stderr)
        return EXIT_FAIL
    sim = Simulator(cfg.schedule, cfg.code, cfg.data, cfg.samples, cfg.verbosity, validate=False)
    status = EXIT_OK
    try:
        sim.run_until(cfg.horizon)
    except (SimulationHalt, MemoryFault, ScheduleConflict) as exc:
        _err(f"simulation stopped: {exc}")
        status = EXIT_FAIL
    if cfg.trace_path:
        if cfg.trace_path == "-":
            sys.stdout.write(sim.trace.to_csv())
            return status
        Path(cfg.trace_path).write_text(sim.trace.to_csv())
    print(f"simulated {sim.cycle} cycles")
    print(format_timeline(sim.timeline()))
    print("retired: " + ", ".join(f"p{i}={n}" for i, n in enumerate(sim.retired)))
    uart = sim.trace.uart()
    print(f"uart: {len(uart)} words")
    shown = uart if args.uart else uart[:8]
    for c, p, v in shown:
        print(f"  {c:>10}  p{p}  0x{v:08X}  {v}")
    if len(shown) < len(uart):
        print(f"  ... {len(uart) - len(shown)} more (use --uart)")
    return status


def _wcet_value(text: str, as_ms: bool, clock_hz: int) -> tuple[Fraction, bool]:
    s = text.strip()
    if s.endswith("ms"):
        return Fraction(s[:-2].strip()), True
    if as_ms:
        return Fraction(s), True
    return Fraction(int(s, 0)), False


def cmd_wcet(args) -> int:
    try:
        vals = [_wcet_value(v, args.ms, args.clock_hz) for v in (args.tau_a0, args.tau_p, args.ep)]
        in_ms = any(m for _, m in vals)
        if in_ms:
            nums = [v if m else cycles_to_ms(v, args.clock_hz) for v, m in vals]
        else:
            nums = [int(v) for v, _ in vals]
        result = effective_wcet(WcetQuery(*nums))
    except (WcetError, ValueError, ZeroDivisionError) as exc:
        _err(f"invalid query: {exc}")
        return EXIT_USAGE
    if in_ms:
        cycles = Fraction(result) * args.clock_hz / 1000
        extra = f" ({cycles} cycles)" if cycles.denominator == 1 else ""
        print(f"tau_An = {format_ms(result, args.places)} ms{extra}")
    else:
        print(f"tau_An = {result} cycles ({format_ms(cycles_to_ms(result, args.clock_hz), args.places)} ms)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="partsim", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("asm", help="assemble x86-subset source into .bin/.dat/.lst")
    p.add_argument("input")
    p.add_argument("-o", "--output", help="output base name (default: input without extension)")
    p.add_argument("--hazard-distance", type=int, default=2)
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("run", help="simulate a configured system")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--horizon", help="cycles, or milliseconds with an ms suffix")
    p.add_argument("--trace", help="trace CSV path ('-' for stdout)")
    p.add_argument("-v", "--verbosity", type=int, choices=(0, 1, 2))
    p.add_argument("--samples", help="sampling-port injection CSV")
    p.add_argument("--uart", action="store_true", help="print the full UART log")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("wcet", help="effective WCET of a task in a partition")
    p.add_argument("--tau-a0", required=True, help="task WCET on a dedicated core")
    p.add_argument("--tau-p", required=True, help="partition execution time per grant")
    p.add_argument("--ep", required=True, help="grant-to-grant period of the partition")
    p.add_argument("--ms", action="store_true", help="bare values are milliseconds")
    p.add_argument("--clock-hz", type=int, default=50_000_000)
    p.add_argument("--places", type=int, default=5)
    p.set_defaults(func=cmd_wcet)

    p = sub.add_parser("validate", help="check a schedule for conflicts")
    p.add_argument("schedule")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("timeline", help="print the grant timeline of a schedule")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("--horizon", required=True)
    p.set_defaults(func=cmd_timeline)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
