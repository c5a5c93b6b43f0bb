"""Switching-Control-Unit: time-triggered partition arbitration.

Each schedule entry owns a period clock that counts down by one per cycle.
When the clock of the incoming entry reaches ``switch_window`` the fetch
stage starts injecting no-ops (ptr_c_flag1) so the pipeline drains; when
it reaches zero the entry is granted: ptr_c_flag2 selects its partition,
ptr_c_flag1 drops, the clock reloads with the period and the shared
execution clock restarts at zero.  An entry whose execution time expires
with nobody due puts the core into idle.

A partition may own several entries (several windows per major frame);
every entry has its own period clock.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .memsys import MAX_PARTITIONS

PIPELINE_DEPTH = 4
DEFAULT_SWITCH_WINDOW = 10
DEFAULT_CLOCK_HZ = 50_000_000


class ScheduleError(ValueError):
    pass


class InvalidParameter(ScheduleError):
    pass


class ScheduleConflict(ScheduleError):
    def __init__(self, cycle: int, message: str):
        super().__init__(f"cycle {cycle}: {message}")
        self.cycle = cycle


@dataclass
class ScheduleEntry:
    name: str
    partition: int
    period: int
    exec_time: int
    offset: int = 0
    enabled: bool = True


@dataclass
class PartitionSchedule:
    entries: list[ScheduleEntry] = field(default_factory=list)
    switch_window: int = DEFAULT_SWITCH_WINDOW
    clock_hz: int = DEFAULT_CLOCK_HZ

    @property
    def enabled(self) -> list[int]:
        return [i for i, e in enumerate(self.entries) if e.enabled]

    def partitions(self) -> list[int]:
        return sorted({e.partition for e in self.entries if e.enabled})


@dataclass(frozen=True)
class Conflict:
    cycle: int
    message: str

    def __str__(self) -> str:
        return f"cycle {self.cycle}: {self.message}"


@dataclass(frozen=True)
class Grant:
    """One row of the grant timeline; ``partition`` is None for idle."""

    partition: int | None
    start: int
    end: int
    entry: int | None = field(default=None, compare=False)

    @property
    def label(self) -> str:
        return "idle" if self.partition is None else f"p{self.partition}"


# --- parameters -------------------------------------------------------------


def check_parameters(sched: PartitionSchedule) -> None:
    """Raise InvalidParameter for values no schedule can be built from."""
    if sched.switch_window < PIPELINE_DEPTH:
        raise InvalidParameter(
            f"switch_window={sched.switch_window} is shorter than the {PIPELINE_DEPTH}-stage pipeline drain")
    if sched.clock_hz <= 0:
        raise InvalidParameter("clock_hz must be positive")
    for e in sched.entries:
        if not 0 <= e.partition < MAX_PARTITIONS:
            raise InvalidParameter(f"{e.name}: partition {e.partition} outside 0..{MAX_PARTITIONS - 1}")
        if e.period <= 0:
            raise InvalidParameter(f"{e.name}: period must be positive, got {e.period}")
        if e.exec_time <= 0:
            raise InvalidParameter(f"{e.name}: exec_time must be positive, got {e.exec_time}")
        if e.offset < 0:
            raise InvalidParameter(f"{e.name}: offset must be non-negative, got {e.offset}")


# --- closed-form timeline -----------------------------------------------------


def _dues(sched: PartitionSchedule, horizon: int) -> list[tuple[int, int]]:
    """All (grant cycle, entry) pairs strictly before ``horizon``, in time order."""
    out = []
    for i in sched.enabled:
        e = sched.entries[i]
        out.extend((g, i) for g in range(e.offset, horizon, e.period))
    out.sort()
    return out


def _walk(sched: PartitionSchedule, horizon: int, conflicts: list[Conflict] | None):
    """Enumerate grant and idle rows with start < horizon.

    Conflicts are appended to ``conflicts`` when given; otherwise the first
    one raises ScheduleConflict.
    """
    W = sched.switch_window
    rows: list[Grant] = []

    def fault(cycle: int, msg: str) -> None:
        if conflicts is None:
            raise ScheduleConflict(cycle, msg)
        conflicts.append(Conflict(cycle, msg))

    # Look one window past the horizon so a drain starting inside it is seen.
    dues = _dues(sched, horizon + W + 1)
    busy_until = 0  # cycle at which the current grant releases the core
    idle_from = 0
    prev: tuple[int, int] | None = None
    for g, i in dues:
        e = sched.entries[i]
        drain = g - W
        if drain >= horizon:
            break
        if prev is not None and prev[0] == g:
            fault(g, f"{sched.entries[prev[1]].name} and {e.name} are both due")
            continue
        if prev is not None and drain < busy_until:
            pe = sched.entries[prev[1]]
            fault(max(drain, 0), f"{e.name} starts draining before {pe.name} releases at {busy_until}")
            continue
        if prev is None and g > 0:
            rows.append(Grant(None, 0, min(g, horizon)))
        elif prev is not None and drain > busy_until and idle_from < horizon:
            rows.append(Grant(None, idle_from, min(g, horizon)))
        if g >= horizon:
            return rows
        busy_until = g + e.exec_time
        idle_from = busy_until + W
        rows.append(Grant(e.partition, g, min(busy_until, horizon), i))
        prev = (g, i)
    if prev is None:
        if not rows:
            rows.append(Grant(None, 0, horizon))
    elif idle_from < horizon:
        rows.append(Grant(None, idle_from, horizon))
    return rows


def grant_timeline(sched: PartitionSchedule, horizon: int) -> list[Grant]:
    """Grant windows and idle slots that start before ``horizon``.

    Ends are clipped to ``horizon``.  Computed arithmetically from offsets,
    periods and execution times without running the core.
    """
    check_parameters(sched)
    if horizon <= 0:
        return []
    return _walk(sched, horizon, None)


def hyperperiod(sched: PartitionSchedule) -> int:
    periods = [sched.entries[i].period for i in sched.enabled]
    return math.lcm(*periods) if periods else 0


def validate_schedule(sched: PartitionSchedule, max_grants: int = 1_000_000) -> list[Conflict]:
    """Check a schedule over one hyperperiod after the last initial offset.

    Raises InvalidParameter for unusable values; returns the list of
    conflicts (empty when the schedule is sound).
    """
    check_parameters(sched)
    conflicts: list[Conflict] = []
    W = sched.switch_window
    for i in sched.enabled:
        e = sched.entries[i]
        if e.exec_time + W > e.period:
            conflicts.append(Conflict(
                e.offset, f"{e.name}: exec_time {e.exec_time} + switch window {W} exceeds period {e.period}"))
    if not sched.enabled:
        return conflicts
    hp = hyperperiod(sched)
    start = max(sched.entries[i].offset for i in sched.enabled)
    horizon = start + hp + 1
    # Bound the enumeration; a pathological lcm would otherwise never finish.
    rate = sum(Fraction(1, sched.entries[i].period) for i in sched.enabled)
    if rate * horizon > max_grants:
        horizon = int(max_grants / rate)
    _walk(sched, horizon, conflicts)
    return conflicts


# --- cycle-level state machine --------------------------------------------------


@dataclass(frozen=True)
class Signals:
    """Control lines and events for one cycle."""

    cycle: int
    ptr_c_flag1: bool
    ptr_c_flag2: int
    grant: int | None = None  # entry index granted this cycle
    drain_start: int | None = None  # partition released this cycle
    idle_start: bool = False
    expiry: bool = False
    load_pc_for: int | None = None  # partition whose pc is selected next cycle


RUNNING, DRAINING, IDLE = "running", "draining", "idle"


class Swcu:
    """Cycle-exact SwCU.  ``tick`` processes one cycle and advances the clocks."""

    def __init__(self, sched: PartitionSchedule):
        check_parameters(sched)
        self.sched = sched
        self.cycle = 0
        self.clocks = [e.offset for e in sched.entries]
        self.execution_clock = 0
        self.expiry_flag = False
        self.active: int | None = None  # entry index
        self.incoming: int | None = None
        self.phase = IDLE
        self.idle_at: int | None = 0
        self.ptr_c_flag2 = 0

    @property
    def ptr_c_flag1(self) -> bool:
        return self.phase != RUNNING

    @property
    def active_partition(self) -> int | None:
        if self.phase == RUNNING:
            return self.sched.entries[self.active].partition
        return None

    def tick(self) -> Signals:
        sched, W, c = self.sched, self.sched.switch_window, self.cycle
        enabled = sched.enabled
        drains = [i for i in enabled if self.clocks[i] == W]
        dues = [i for i in enabled if self.clocks[i] == 0]
        if len(drains) > 1 or len(dues) > 1:
            names = ", ".join(sched.entries[i].name for i in drains + dues)
            raise ScheduleConflict(c, f"period clocks of {names} expire together")

        drain_start = None
        idle_start = False
        expiry = False
        if self.phase == RUNNING and self.execution_clock == sched.entries[self.active].exec_time:
            self.expiry_flag = expiry = True
        if drains:
            k = drains[0]
            if self.phase == RUNNING and not expiry:
                raise ScheduleConflict(
                    c, f"{sched.entries[k].name} preempts {sched.entries[self.active].name}")
            if self.incoming is not None:
                raise ScheduleConflict(c, f"{sched.entries[k].name} due during another switch")
            if self.phase == RUNNING:
                drain_start = sched.entries[self.active].partition
            self.phase = DRAINING
            self.incoming = k
        elif expiry:
            drain_start = sched.entries[self.active].partition
            self.phase = IDLE
            self.idle_at = c + W
        if self.idle_at == c:
            self.idle_at = None
            idle_start = not dues
        granted = None
        if dues:
            k = dues[0]
            if self.phase == RUNNING:
                raise ScheduleConflict(c, f"{sched.entries[k].name} due while {sched.entries[self.active].name} runs")
            if self.incoming not in (None, k):
                raise ScheduleConflict(c, f"{sched.entries[k].name} due while switching to another entry")
            granted = k
            self.active, self.incoming = k, None
            self.phase = RUNNING
            self.ptr_c_flag2 = sched.entries[k].partition
            self.execution_clock = 0
            self.expiry_flag = False
            self.clocks[k] = sched.entries[k].period
            self.idle_at = None

        load_pc_for = None
        if self.incoming is not None and self.clocks[self.incoming] == 1:
            load_pc_for = sched.entries[self.incoming].partition
        sig = Signals(c, self.ptr_c_flag1, self.ptr_c_flag2, granted, drain_start, idle_start, expiry, load_pc_for)
        self._advance(1)
        return sig

    def _advance(self, n: int) -> None:
        for i in self.sched.enabled:
            self.clocks[i] -= n
        if self.phase == RUNNING:
            self.execution_clock += n
        self.cycle += n

    def next_event(self) -> int | None:
        """First cycle >= now at which ``tick`` would do anything but count."""
        W, c = self.sched.switch_window, self.cycle
        cands = []
        for i in self.sched.enabled:
            v = self.clocks[i]
            if v >= W:
                cands.append(c + v - W)
            if v >= 1 and self.incoming == i:
                cands.append(c + v - 1)
            if v >= 0:
                cands.append(c + v)
        if self.phase == RUNNING:
            cands.append(c + self.sched.entries[self.active].exec_time - self.execution_clock)
        if self.idle_at is not None:
            cands.append(self.idle_at)
        cands = [x for x in cands if x >= c]
        return min(cands) if cands else None

    def skip(self, n: int) -> None:
        """Advance ``n`` cycles that contain no events."""
        if n <= 0:
            return
        nxt = self.next_event()
        if nxt is not None and nxt < self.cycle + n:
            raise RuntimeError(f"cannot skip past SwCU event at cycle {nxt}")
        self._advance(n)


def simulate_timeline(sched: PartitionSchedule, horizon: int) -> list[Grant]:
    """Timeline obtained by ticking the SwCU (events only, no core)."""
    sw = Swcu(sched)
    return timeline_from_events(_swcu_events(sw, horizon), horizon)


def _swcu_events(sw: Swcu, horizon: int):
    events = []
    while sw.cycle < horizon:
        nxt = sw.next_event()
        if nxt is None or nxt >= horizon:
            sw.skip(horizon - sw.cycle)
            break
        sw.skip(nxt - sw.cycle)
        s = sw.tick()
        if s.drain_start is not None:
            events.append((s.cycle, "drain_start", s.drain_start))
        if s.idle_start:
            events.append((s.cycle, "idle", None))
        if s.grant is not None:
            events.append((s.cycle, "grant", sw.sched.entries[s.grant].partition))
    return events


def timeline_from_events(events, horizon: int) -> list[Grant]:
    """Rebuild grant rows from (cycle, event, partition) triples."""
    rows: list[Grant] = []
    open_row: tuple[int | None, int] | None = None
    for cycle, kind, part in events:
        if kind not in ("grant", "drain_start", "idle"):
            continue
        if kind == "drain_start":
            if open_row is not None and open_row[0] is not None:
                rows.append(Grant(open_row[0], open_row[1], cycle))
                open_row = None
        else:
            if open_row is not None and open_row[0] is None:
                rows.append(Grant(None, open_row[1], cycle))
            open_row = (part if kind == "grant" else None, cycle)
    if open_row is not None and open_row[1] < horizon:
        rows.append(Grant(open_row[0], open_row[1], horizon))
    return rows


# --- config files ---------------------------------------------------------------


def parse_time(text: str, clock_hz: int) -> int:
    """Cycles from ``"1234"`` or ``"4ms"``; ms must land on a whole cycle."""
    s = str(text).strip().replace("_", "")
    if s.endswith("ms"):
        cycles = Fraction(s[:-2].strip()) * clock_hz / 1000
        if cycles.denominator != 1:
            raise ValueError(f"{text!r} is not a whole number of cycles at {clock_hz} Hz")
        return int(cycles)
    return int(s, 0)


_BOOL = {"1": True, "yes": True, "true": True, "on": True, "0": False, "no": False, "false": False, "off": False}
RESERVED_SECTIONS = ("global", "run")


def schedule_from_config(cp: configparser.ConfigParser) -> PartitionSchedule:
    g = cp["global"] if cp.has_section("global") else {}
    clock_hz = int(g.get("clock_hz", DEFAULT_CLOCK_HZ))
    sched = PartitionSchedule(switch_window=parse_time(g.get("switch_window", DEFAULT_SWITCH_WINDOW), clock_hz),
                              clock_hz=clock_hz)
    index = 0
    for name in cp.sections():
        if name in RESERVED_SECTIONS:
            continue
        sec = cp[name]
        try:
            enabled = _BOOL[sec.get("enabled", "yes").strip().lower()]
            sched.entries.append(ScheduleEntry(
                name=name,
                partition=int(sec.get("partition", index)),
                period=parse_time(sec["period_cycles"], clock_hz),
                exec_time=parse_time(sec["exec_cycles"], clock_hz),
                offset=parse_time(sec.get("offset_cycles", "0"), clock_hz),
                enabled=enabled,
            ))
        except KeyError as exc:
            raise InvalidParameter(f"[{name}]: missing or bad key {exc}") from None
        index += 1
    return sched


def read_config(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(text)
    return cp


def load_schedule(text: str) -> PartitionSchedule:
    return schedule_from_config(read_config(text))


def dump_schedule(sched: PartitionSchedule) -> str:
    lines = ["[global]", f"switch_window = {sched.switch_window}", f"clock_hz = {sched.clock_hz}", ""]
    for e in sched.entries:
        lines += [
            f"[{e.name}]",
            f"partition = {e.partition}",
            f"period_cycles = {e.period}",
            f"exec_cycles = {e.exec_time}",
            f"offset_cycles = {e.offset}",
            f"enabled = {'yes' if e.enabled else 'no'}",
            "",
        ]
    return "\n".join(lines)


# --- frame construction -----------------------------------------------------------


def frame_schedule(slots: list[tuple[int | None, int]], switch_window: int = DEFAULT_SWITCH_WINDOW,
                   clock_hz: int = DEFAULT_CLOCK_HZ, names: list[str] | None = None) -> PartitionSchedule:
    """Build a cyclic schedule from an ordered major frame.

    ``slots`` is a list of (partition, cycles); partition None is an idle
    slot whose length includes the drain of the window before it.  Grants
    follow each other with one switch window in between; the first slot is
    granted at cycle 0.  Every slot becomes its own entry with the frame
    length as period and its grant cycle as offset.
    """
    W = switch_window
    t = 0
    grants = []
    prev_idle = True
    for part, length in slots:
        if part is None:
            t += length
            prev_idle = True
            continue
        if not prev_idle:
            t += W
        grants.append((part, t, length))
        t += length
        prev_idle = False
    frame = t if prev_idle else t + W
    entries = []
    for n, (part, start, length) in enumerate(grants):
        name = names[n] if names else f"slot{n}_p{part}"
        entries.append(ScheduleEntry(name, part, frame, length, start))
    return PartitionSchedule(entries, switch_window, clock_hz)


def three_partition_frame() -> PartitionSchedule:
    """Three-partition frame: p1 4 ms, p2 12 ms, p1 4 ms, p3 8 ms, idle 4 ms.

    Partitions p1, p2, p3 map to indices 0, 1, 2.
    """
    ms = DEFAULT_CLOCK_HZ // 1000
    return frame_schedule(
        [(0, 4 * ms), (1, 12 * ms), (0, 4 * ms), (2, 8 * ms), (None, 4 * ms)],
        names=["p1a", "p2", "p1b", "p3"],
    )
