"""Cycle-accurate four-stage pipeline with replicated partition state.

Stages run fetch (F), decode (D), execute (E), write-back/memory (W).
Within one simulated cycle the stages are evaluated back to front so each
one consumes the pipeline register its predecessor filled in the previous
cycle.  The register file is write-first: a value written back in cycle t
is seen by a decode in cycle t.

Branch timing: ``jad`` loads jump_reg in decode; the paired condition is
evaluated in execute.  A taken branch, call or return squashes fetch_reg
and decode_reg, loads pc_reg, and the fetch of the following cycle is
squashed as well (the instruction cache answers one cycle after its
address changes), so a taken transfer costs three cycles.

``reference_execute`` is an independent, untimed interpreter of the same
ISA used as a correctness oracle.
"""

from __future__ import annotations

import csv
import io
from collections import deque
from dataclasses import dataclass, field

from .isa import ALU_FUNCS, CALL, CONDITIONS, JUC, MASK32, NOOP, RET, MemAccess, MemAddress, decode
from .memsys import (CODE_SEGMENT_WORDS, DATA_ADDR_BITS, DEFAULT_REGIONS, MAX_PARTITIONS, SHARED_SEGMENT, UART_TX,
                     DataImage, DataMemory, DeviceAccessError, RegionMap, load_images)
from .swcu import (Grant, PartitionSchedule, ScheduleConflict, ScheduleEntry, Swcu, timeline_from_events,
                   validate_schedule)

STACK_DEPTH = 256
PC_MASK = CODE_SEGMENT_WORDS - 1

# Pre-decoded instruction kinds.
K_NOP, K_ALU, K_JCC, K_JUC, K_CALL, K_RET, K_LOAD, K_STORE, K_JAD, K_UNK = range(10)
# Write-back actions.
W_NONE, W_REG, W_LOAD, W_STORE, W_UNK = range(5)


class SimulationHalt(Exception):
    """The simulated core reached a state the hardware does not define."""

    def __init__(self, cycle: int, partition: int, message: str):
        super().__init__(f"cycle {cycle}, partition {partition}: {message}")
        self.cycle = cycle
        self.partition = partition


class StackUnderflow(SimulationHalt):
    pass


class StackOverflow(SimulationHalt):
    pass


class StepBudgetExceeded(RuntimeError):
    pass


_PREDECODED: dict[int, tuple] = {}


def predecode(word: int) -> tuple:
    """(kind, x, y, z, word) tuple consumed by both engines."""
    t = _PREDECODED.get(word)
    if t is not None:
        return t
    ins = decode(word, strict=False)
    if isinstance(ins, MemAccess):
        t = (K_STORE if ins.store else K_LOAD, ins.reg, ins.addr, 0, word)
    elif isinstance(ins, MemAddress):
        t = (K_JAD, ins.addr, 0, 0, word)
    else:
        op = ins.opcode
        if op == NOOP:
            t = (K_NOP, 0, 0, 0, word)
        elif op in ALU_FUNCS:
            t = (K_ALU, ALU_FUNCS[op], ins.op_a, ins.op_b, word)
        elif op in CONDITIONS:
            t = (K_JCC, CONDITIONS[op], ins.op_a, ins.op_b, word)
        elif op == JUC:
            t = (K_JUC, 0, 0, 0, word)
        elif op == CALL:
            t = (K_CALL, 0, 0, 0, word)
        elif op == RET:
            t = (K_RET, 0, 0, 0, word)
        else:
            t = (K_UNK, op, 0, 0, word)
    _PREDECODED[word] = t
    return t


@dataclass
class PartitionContext:
    """Architectural state replicated per partition."""

    regs: list[int] = field(default_factory=lambda: [0] * 16)
    pc_reg: int = 0
    jump_reg: int = 0
    stack: list[int] = field(default_factory=lambda: [0] * STACK_DEPTH)
    stack_write_pointer: int = 0
    jump_fresh: bool = False  # simulator bookkeeping for stale-jump diagnostics

    @property
    def stack_read_pointer(self) -> int:
        return self.stack_write_pointer - 1

    def snapshot(self) -> tuple:
        return (tuple(self.regs), self.pc_reg, self.jump_reg,
                tuple(self.stack[: self.stack_write_pointer]), self.stack_write_pointer)


@dataclass
class CoreState:
    fetch_reg: tuple | None = None
    decode_reg: tuple | None = None
    alu_reg: tuple | None = None
    alu_ctrl_flags: int = 0
    j_en: bool = False
    call_en: bool = False
    ptr_c_flag1: bool = True
    ptr_c_flag2: int = 0
    cycle: int = 0
    squash_fetch: bool = False

    @property
    def empty(self) -> bool:
        return self.fetch_reg is None and self.decode_reg is None and self.alu_reg is None and not self.squash_fetch


TRACE_COLUMNS = ("cycle", "event", "partition", "addr", "value")


class Trace:
    """Time-ordered (cycle, event, partition, addr, value) records."""

    def __init__(self) -> None:
        self.events: list[tuple] = []

    def append(self, cycle: int, event: str, partition: int | None = None, addr=None, value=None) -> None:
        self.events.append((cycle, event, partition, addr, value))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def select(self, event: str, partition: int | None = None) -> list[tuple]:
        return [e for e in self.events if e[1] == event and (partition is None or e[2] == partition)]

    def uart(self, partition: int | None = None) -> list[tuple[int, int, int]]:
        """(cycle, partition, value) of every UART transmit."""
        return [(e[0], e[2], e[4]) for e in self.select("uart", partition)]

    def grants(self, horizon: int) -> list[Grant]:
        return timeline_from_events([(e[0], e[1], e[2]) for e in self.events], horizon)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in self.events:
            w.writerow(["" if x is None else x for x in row])
        return buf.getvalue()


@dataclass(frozen=True)
class ArchState:
    """Final architectural state used when comparing engines."""

    regs: tuple[int, ...]
    data: tuple[int, ...]
    stack: tuple[int, ...]
    jump_reg: int


class Simulator:
    """One core, its SwCU, memories and up to three partition contexts."""

    def __init__(self, schedule: PartitionSchedule, code: dict[int, list[int]],
                 data: dict[int, DataImage] | None = None, samples: list[tuple[int, int, int]] | None = None,
                 verbosity: int = 0, regions: RegionMap = DEFAULT_REGIONS, validate: bool = True):
        if validate:
            conflicts = validate_schedule(schedule)
            if conflicts:
                raise ScheduleConflict(conflicts[0].cycle, "; ".join(c.message for c in conflicts))
        self.schedule = schedule
        self.swcu = Swcu(schedule)
        self.imem, self.dmem = load_images(code, data, regions)
        self.regions = regions
        self.contexts = [PartitionContext() for _ in range(MAX_PARTITIONS)]
        self.core = CoreState()
        self.trace = Trace()
        self.verbosity = verbosity
        self.retired = [0] * MAX_PARTITIONS
        self.samples = deque(sorted(samples or [], key=lambda r: r[0]))
        self._code = [[predecode(w) for w in self.imem.segment(p)] for p in range(MAX_PARTITIONS)]
        self.dmem.uart_sink = lambda c, p, v: self.trace.append(c, "uart", p, UART_TX, v)

    @property
    def cycle(self) -> int:
        return self.core.cycle

    # --- driver --------------------------------------------------------------

    def run(self, cycles: int) -> Trace:
        """Advance ``cycles`` clock cycles."""
        return self.run_until(self.core.cycle + cycles)

    def step(self) -> Trace:
        return self.run(1)

    def run_until(self, end: int) -> Trace:
        core, sw, trace = self.core, self.swcu, self.trace
        while core.cycle < end:
            c = core.cycle
            while self.samples and self.samples[0][0] <= c:
                _, port, value = self.samples.popleft()
                self.dmem.devices.inject_sample(port, value)
                trace.append(c, "sample", None, 0x010 + port, value & MASK32)
            nxt = sw.next_event()
            if nxt == c:
                sig = sw.tick()
                if sig.drain_start is not None:
                    trace.append(c, "drain_start", sig.drain_start)
                if sig.idle_start:
                    trace.append(c, "idle")
                if sig.grant is not None:
                    p = sw.ptr_c_flag2
                    trace.append(c, "grant", p, self.contexts[p].pc_reg, sig.grant)
                stop = c + 1
            else:
                stop = end if nxt is None else min(nxt, end)
                if self.samples:
                    stop = min(stop, self.samples[0][0])
                sw.skip(stop - c)
            core.ptr_c_flag1 = sw.ptr_c_flag1
            core.ptr_c_flag2 = sw.ptr_c_flag2
            if core.ptr_c_flag1 and core.empty and self.verbosity < 2:
                core.cycle = stop
            else:
                self._pipeline(c, stop)
        return trace

    # --- pipeline ------------------------------------------------------------

    def _pipeline(self, c0: int, c1: int) -> None:
        core = self.core
        flag1 = core.ptr_c_flag1
        part = core.ptr_c_flag2
        ctx = self.contexts[part]
        code = self._code[part]
        regs = ctx.regs
        stack = ctx.stack
        pc, jreg, fresh, wp = ctx.pc_reg, ctx.jump_reg, ctx.jump_fresh, ctx.stack_write_pointer
        fr, dr, er, squash = core.fetch_reg, core.decode_reg, core.alu_reg, core.squash_fetch
        ctrl = core.alu_ctrl_flags
        j_en = call_en = False
        dmem = self.dmem
        words = dmem.words
        fast = dmem.access_log is None
        rg = self.regions
        dev_lo, dev_hi, sh_lo, sh_hi = rg.device_lo, rg.device_hi, rg.shared_lo, rg.shared_hi
        seg_base = part << DATA_ADDR_BITS
        sh_base = SHARED_SEGMENT << DATA_ADDR_BITS
        trace = self.trace
        verbose = self.verbosity
        retired = 0
        cycle = c0
        try:
            while cycle < c1:
                if flag1 and fr is None and dr is None and er is None and not squash and verbose < 2:
                    cycle = c1
                    break
                if verbose > 1:
                    trace.append(cycle, "pipe", part, None, _pipe_str(fr, dr, er))
                # W: write-back / memory access
                if er is not None:
                    k = er[0]
                    if k == W_REG:
                        regs[er[1]] = er[2]
                    elif k == W_LOAD:
                        a = er[2]
                        if fast and not dev_lo <= a < dev_hi:
                            regs[er[1]] = words[(sh_base if sh_lo <= a < sh_hi else seg_base) | a]
                        else:
                            regs[er[1]] = dmem.read(a, part, cycle)
                    elif k == W_STORE:
                        a = er[2]
                        if fast and not dev_lo <= a < dev_hi:
                            words[(sh_base if sh_lo <= a < sh_hi else seg_base) | a] = er[1]
                        else:
                            try:
                                dmem.write(a, er[1], part, cycle)
                            except DeviceAccessError as exc:
                                trace.append(cycle, "fault", part, a, str(exc))
                    elif k == W_UNK:
                        src = er[-1]
                        trace.append(cycle, "unknown_opcode", part, src[1], src[0][4])
                    retired += 1
                    if verbose:
                        src = er[-1]
                        trace.append(cycle, "retire", part, src[1], src[0][4])
                # E: execute
                taken = False
                j_en = call_en = False
                if dr is None:
                    er = None
                else:
                    k = dr[0]
                    if k == K_ALU:
                        er = (W_REG, dr[2], dr[1](dr[3], dr[4]), dr[5])
                    elif k == K_LOAD:
                        er = (W_LOAD, dr[1], dr[2], dr[3])
                    elif k == K_STORE:
                        er = (W_STORE, dr[1], dr[2], dr[3])
                    elif k == K_JCC:
                        ctrl = 1 if dr[1](dr[2], dr[3]) else 0
                        if not fresh:
                            trace.append(cycle, "stale_jump", part, dr[4][1], jreg)
                        fresh = False
                        if ctrl:
                            pc, taken, j_en = jreg, True, True
                        er = (W_NONE, dr[4])
                    elif k == K_JUC:
                        if not fresh:
                            trace.append(cycle, "stale_jump", part, dr[1][1], jreg)
                        fresh = False
                        pc, taken, j_en = jreg, True, True
                        er = (W_NONE, dr[1])
                    elif k == K_CALL:
                        src = dr[1]
                        if not fresh:
                            trace.append(cycle, "stale_jump", part, src[1], jreg)
                        fresh = False
                        if wp >= STACK_DEPTH:
                            raise StackOverflow(cycle, part, f"call at 0x{src[1]:04X} overflows the address stack")
                        stack[wp] = (src[1] + 1) & PC_MASK
                        wp += 1
                        pc, taken, call_en = jreg, True, True
                        er = (W_NONE, src)
                    elif k == K_RET:
                        src = dr[1]
                        if wp == 0:
                            raise StackUnderflow(cycle, part, f"ret at 0x{src[1]:04X} with an empty address stack")
                        wp -= 1
                        pc, taken = stack[wp], True
                        er = (W_NONE, src)
                    elif k == K_UNK:
                        er = (W_UNK, dr[1])
                    else:
                        er = (W_NONE, dr[1])
                if taken:
                    fr = dr = None
                    squash = True
                else:
                    # D: decode and register read
                    if fr is None:
                        dr = None
                    else:
                        ins = fr[0]
                        k = ins[0]
                        if k == K_ALU:
                            dr = (K_ALU, ins[1], ins[2], regs[ins[2]], regs[ins[3]], fr)
                        elif k == K_LOAD:
                            dr = (K_LOAD, ins[1], ins[2], fr)
                        elif k == K_STORE:
                            dr = (K_STORE, regs[ins[1]], ins[2], fr)
                        elif k == K_JCC:
                            dr = (K_JCC, ins[1], regs[ins[2]], regs[ins[3]], fr)
                        elif k == K_NOP:
                            dr = None
                        else:
                            if k == K_JAD:
                                jreg = ins[1]
                                fresh = True
                            dr = (k, fr)
                    # F: fetch
                    if flag1 or squash:
                        fr = None
                        squash = False
                    else:
                        fr = (code[pc], pc)
                        pc = (pc + 1) & PC_MASK
                cycle += 1
        finally:
            ctx.pc_reg, ctx.jump_reg, ctx.jump_fresh, ctx.stack_write_pointer = pc, jreg, fresh, wp
            core.fetch_reg, core.decode_reg, core.alu_reg, core.squash_fetch = fr, dr, er, squash
            core.alu_ctrl_flags, core.j_en, core.call_en = ctrl, j_en, call_en
            core.cycle = cycle
            self.retired[part] += retired

    # --- inspection ----------------------------------------------------------

    def arch_state(self, partition: int) -> ArchState:
        ctx = self.contexts[partition]
        return ArchState(tuple(ctx.regs), tuple(self.dmem.segment(partition)),
                         tuple(ctx.stack[: ctx.stack_write_pointer]), ctx.jump_reg)

    def timeline(self) -> list[Grant]:
        return self.trace.grants(self.core.cycle)


def _pipe_str(fr, dr, er) -> str:
    def addr(x):
        return "--" if x is None else f"{x[-1][1]:04X}"
    return f"F:{'--' if fr is None else f'{fr[1]:04X}'} D:{addr(dr)} E:{addr(er)}"


@dataclass
class RunResult:
    simulator: Simulator
    trace: Trace

    @property
    def contexts(self) -> list[PartitionContext]:
        return self.simulator.contexts

    @property
    def core(self) -> CoreState:
        return self.simulator.core


def run(code: dict[int, list[int]], schedule: PartitionSchedule, horizon: int,
        data: dict[int, DataImage] | None = None, **kwargs) -> RunResult:
    sim = Simulator(schedule, code, data, **kwargs)
    sim.run_until(horizon)
    return RunResult(sim, sim.trace)


def solo_schedule(partition: int = 0, budget: int = 1 << 40, switch_window: int = 10) -> PartitionSchedule:
    """A single partition granted at cycle 0 for ``budget`` cycles."""
    return PartitionSchedule([ScheduleEntry(f"p{partition}", partition, budget + switch_window, budget, 0)],
                             switch_window)


def run_solo(code: list[int], cycles: int, data: DataImage | None = None, partition: int = 0,
             **kwargs) -> Simulator:
    sim = Simulator(solo_schedule(partition), {partition: code},
                    {partition: data} if data is not None else None, **kwargs)
    sim.run_until(cycles)
    return sim


# --- reference interpreter ---------------------------------------------------------


@dataclass
class ReferenceResult:
    state: ArchState
    steps: int
    halted: bool
    memory: DataMemory
    pc: int


def reference_execute(code: list[int], data: DataImage | None = None, partition: int = 0,
                      max_steps: int = 1_000_000, regions: RegionMap = DEFAULT_REGIONS) -> ReferenceResult:
    """Run a single-partition image one instruction at a time.

    Stops when an unconditional jump lands on its own ``jad`` (a spin);
    raises StepBudgetExceeded when ``max_steps`` run out first.  The
    timer reads as the number of instructions executed so far.
    """
    _, mem = load_images({}, {partition: data} if data is not None else None, regions)
    words = list(code) + [0] * (CODE_SEGMENT_WORDS - len(code))
    prog = [predecode(w) for w in words]
    regs = [0] * 16
    stack: list[int] = []
    pc = jreg = 0
    steps = 0
    while True:
        if steps >= max_steps:
            raise StepBudgetExceeded(f"no halt within {max_steps} steps (pc=0x{pc:04X})")
        k, x, y, _, _ = prog[pc]
        here = pc
        pc = (pc + 1) & PC_MASK
        steps += 1
        if k == K_ALU:
            regs[y] = x(regs[y], regs[prog[here][3]])
        elif k == K_LOAD:
            regs[x] = mem.read(y, partition, steps)
        elif k == K_STORE:
            try:
                mem.write(y, regs[x], partition, steps)
            except DeviceAccessError:
                pass
        elif k == K_JAD:
            jreg = x
        elif k == K_JCC:
            if x(regs[y], regs[prog[here][3]]):
                pc = jreg
        elif k == K_JUC:
            if jreg == here - 1 and prog[jreg][0] == K_JAD and prog[jreg][1] == jreg:
                pc = jreg
                break
            pc = jreg
        elif k == K_CALL:
            if len(stack) >= STACK_DEPTH:
                raise StackOverflow(steps, partition, f"call at 0x{here:04X} overflows the address stack")
            stack.append((here + 1) & PC_MASK)
            pc = jreg
        elif k == K_RET:
            if not stack:
                raise StackUnderflow(steps, partition, f"ret at 0x{here:04X} with an empty address stack")
            pc = stack.pop()
    state = ArchState(tuple(regs), tuple(mem.segment(partition)), tuple(stack), jreg)
    return ReferenceResult(state, steps, True, mem, pc)
