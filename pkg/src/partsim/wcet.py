"""Timing analysis for partitioned execution.

A task needing ``tau_a0`` cycles on a dedicated core, run in a partition
that gets ``tau_p`` cycles every ``e_p`` cycles, finishes after

    (ceil(tau_a0 / tau_p) - 1) * e_p + (tau_a0 - (ceil(tau_a0 / tau_p) - 1) * tau_p)

cycles when its first slice starts at a grant.  ``e_p`` is the observed
grant-to-grant spacing, switch overhead included.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Sequence, Union

from .memsys import UART_TX
from .swcu import DEFAULT_CLOCK_HZ, Grant

Number = Union[int, Fraction]


class WcetError(ValueError):
    pass


class InsufficientData(WcetError):
    pass


@dataclass(frozen=True)
class WcetQuery:
    tau_a0: Number
    tau_p: Number
    e_p: Number

    def __post_init__(self) -> None:
        for name in ("tau_a0", "tau_p", "e_p"):
            v = getattr(self, name)
            if not isinstance(v, Rational):
                raise WcetError(f"{name} must be an int or Fraction, got {type(v).__name__}")
            if v <= 0:
                raise WcetError(f"{name} must be positive, got {v}")
        if self.tau_p > self.e_p:
            raise WcetError(f"partition slice {self.tau_p} exceeds its period {self.e_p}")


def _ceil_div(a: Number, b: Number) -> int:
    return -(-a // b)


def effective_wcet(q: WcetQuery) -> Number:
    """Completion time of the task under partitioned execution (exact)."""
    full = _ceil_div(q.tau_a0, q.tau_p) - 1
    return full * q.e_p + (q.tau_a0 - full * q.tau_p)


def simulate_completion(tau_a0: int, grants: Iterable[tuple[int, int]], start: int | None = None) -> int:
    """Cycle at which ``tau_a0`` cycles of work complete across grant windows.

    ``grants`` are [start, end) windows of the task's partition in time
    order.  Work begins at ``start`` (default: the first window).
    """
    remaining = tau_a0
    for g0, g1 in grants:
        if start is not None and g1 <= start:
            continue
        lo = g0 if start is None else max(g0, start)
        if start is None:
            start = lo
        avail = g1 - lo
        if remaining <= avail:
            return lo + remaining
        remaining -= avail
    raise InsufficientData(f"grant windows end with {remaining} cycles of work left")


def periodic_grants(tau_p: int, e_p: int, count: int, first: int = 0) -> list[tuple[int, int]]:
    return [(first + k * e_p, first + k * e_p + tau_p) for k in range(count)]


def oracle_wcet(q: WcetQuery) -> int:
    """Discrete-event evaluation of ``effective_wcet`` for integer cycles."""
    if not all(isinstance(v, int) for v in (q.tau_a0, q.tau_p, q.e_p)):
        raise WcetError("the discrete-event oracle works in whole cycles")
    n = _ceil_div(q.tau_a0, q.tau_p)
    return simulate_completion(q.tau_a0, periodic_grants(q.tau_p, q.e_p, n))


def grant_spacing(timeline: Sequence[Grant], partition: int) -> int:
    """Largest start-to-start distance between consecutive grants of ``partition``."""
    starts = [g.start for g in timeline if g.partition == partition]
    if len(starts) < 2:
        raise InsufficientData(f"partition {partition} is granted fewer than twice")
    return max(b - a for a, b in zip(starts, starts[1:]))


def uart_markers(trace, partition: int, marker_addr: int = UART_TX, every: int = 1, offset: int = 0) -> list[int]:
    """Cycles of writes to ``marker_addr`` by ``partition``; keeps every ``every``-th from ``offset``."""
    cycles = [e[0] for e in trace if e[1] == "uart" and e[2] == partition and e[3] == marker_addr]
    return cycles[offset::every]


def measure_wcet(trace, partition: int, marker_addr: int = UART_TX, every: int = 1, offset: int = 0) -> int:
    """Longest start-to-end span over consecutive (start, end) marker pairs."""
    marks = uart_markers(trace, partition, marker_addr, every, offset)
    if len(marks) < 2:
        raise InsufficientData(f"partition {partition} wrote {len(marks)} marker(s); need at least 2")
    return max(marks[i + 1] - marks[i] for i in range(0, len(marks) - 1, 2))


# --- units ---------------------------------------------------------------------


def ms_to_cycles(ms: Number | str, clock_hz: int = DEFAULT_CLOCK_HZ) -> Fraction:
    return Fraction(ms) * clock_hz / 1000


def cycles_to_ms(cycles: Number, clock_hz: int = DEFAULT_CLOCK_HZ) -> Fraction:
    return Fraction(cycles) * 1000 / clock_hz


def effective_wcet_ms(tau_a0: str | Number, tau_p: str | Number, e_p: str | Number) -> Fraction:
    """Same formula on millisecond values given as decimal strings or Fractions."""
    return effective_wcet(WcetQuery(Fraction(tau_a0), Fraction(tau_p), Fraction(e_p)))


def format_ms(value: Number, places: int = 5) -> str:
    q = Fraction(value)
    scaled = round(q * 10 ** places)
    s = f"{abs(scaled) // 10 ** places}.{abs(scaled) % 10 ** places:0{places}d}".rstrip("0").rstrip(".")
    return ("-" if scaled < 0 else "") + s


# --- architecture comparison -----------------------------------------------------


class Architecture(Enum):
    PROPOSED = "proposed"
    SINGLE_CORE_EQUIVALENT = "single-core-equivalent"
    FINE_GRAINED = "fine-grained"


class Dependency(Enum):
    INDEPENDENT = "independent"
    CHAINED = "chained"


@dataclass(frozen=True)
class ArchComparisonInput:
    taus: tuple[Number, ...]
    delta_p: Number = 0
    delta_c: Number = 0
    mode: Dependency = Dependency.INDEPENDENT

    def __post_init__(self) -> None:
        if not self.taus:
            raise WcetError("need at least one task")
        if any(v < 0 for v in (*self.taus, self.delta_p, self.delta_c)):
            raise WcetError("task times and delays must be non-negative")


def total_wcet(arch: Architecture | str, inp: ArchComparisonInput) -> Number:
    """Total WCET of a task set on one of the compared platforms.

    Partitioned single core: tasks run back to back with a switch between
    each pair.  One core per task: independent tasks overlap, chained ones
    pay a communication delay per hand-off.  Fine-grained multithreading
    stretches every task threefold.
    """
    arch = Architecture(arch)
    taus = [Fraction(t) for t in inp.taus]
    hops = len(taus) - 1
    if arch is Architecture.PROPOSED:
        out = sum(taus) + hops * Fraction(inp.delta_p)
    elif arch is Architecture.SINGLE_CORE_EQUIVALENT:
        out = max(taus) if inp.mode is Dependency.INDEPENDENT else sum(taus) + hops * Fraction(inp.delta_c)
    else:
        out = 3 * (max(taus) if inp.mode is Dependency.INDEPENDENT else sum(taus))
    return int(out) if out.denominator == 1 else out


def per_task_wcet(arch: Architecture | str, tau: Number) -> Number:
    """WCET of one task ``tau`` as seen on each platform."""
    arch = Architecture(arch)
    return 3 * tau if arch is Architecture.FINE_GRAINED else tau


def comparison_table(taus: Sequence[Number], delta_p: Number, delta_c: Number) -> list[tuple[str, str, Number]]:
    rows = []
    for mode in Dependency:
        inp = ArchComparisonInput(tuple(taus), delta_p, delta_c, mode)
        for arch in Architecture:
            rows.append((mode.value, arch.value, total_wcet(arch, inp)))
    return rows
