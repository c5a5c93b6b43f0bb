"""Random x86-subset programs and a source-level interpreter for them.

Programs always terminate: loops are counted with a reserved register,
branches only jump forward, and functions are leaf routines placed after
the final spin.  The interpreter works on parsed source, before any
lowering, and so checks the assembler passes independently.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from partsim.assembler import ALU_OPS, JCC_OPS, AsmProgram, Imm, Label, Mem, Reg, layout_data, parse_assembly
from partsim.isa import MASK32, to_signed

REGS = ["eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp", "r8d", "r9d", "r10d", "r11d", "r12d"]
LOOP_REG = "r13d"
ALU = ["add", "sub", "imul", "xor", "and", "or", "shr", "shl"]
JCC = ["jle", "jge", "jl", "jg", "je", "jne"]
NUM_VARS = 8


@dataclass
class GenConfig:
    blocks: int = 6
    block_len: int = 5
    functions: int = 2
    loop_max: int = 4
    imm_range: int = 1 << 31
    regs: int = len(REGS)


class ProgramGenerator:
    def __init__(self, rng: random.Random, cfg: GenConfig | None = None):
        self.rng = rng
        self.cfg = cfg or GenConfig()
        self.labels = 0
        self.lines: list[str] = []

    def _label(self) -> str:
        self.labels += 1
        return f".L{self.labels}"

    def _reg(self) -> str:
        return self.rng.choice(REGS[: self.cfg.regs])

    def _var(self) -> str:
        return f"dword ptr [v{self.rng.randrange(NUM_VARS)}]"

    def _imm(self, op: str = "") -> str:
        r = self.rng
        if op in ("shr", "shl"):
            return str(r.randrange(32))
        v = r.choice([0, 1, 2, 3, -1, r.randrange(-self.cfg.imm_range, self.cfg.imm_range)])
        return str(v) if v >= 0 or r.random() < 0.5 else hex(v & MASK32)

    def _src(self, op: str) -> str:
        k = self.rng.random()
        if k < 0.4:
            return self._reg()
        if k < 0.7:
            return self._var()
        return self._imm(op)

    def statement(self) -> str:
        r = self.rng
        k = r.random()
        op = r.choice(["mov"] + ALU)
        if k < 0.7:
            return f"{op} {self._reg()}, {self._src(op)}"
        if k < 0.85:
            src = self._reg() if r.random() < 0.7 else self._imm(op)
            return f"{op} {self._var()}, {src}"
        return f"mov {self._reg()}, {self._var()}"

    def straight(self, n: int) -> list[str]:
        return [self.statement() for _ in range(n)]

    def _cmp_operands(self) -> str:
        r = self.rng
        if r.random() < 0.7:
            a = self._reg()
            b = r.choice([self._reg(), self._var(), self._imm()])
        else:
            a = self._var()
            b = r.choice([self._reg(), self._imm()])
        return f"{a}, {b}"

    def block(self, functions: list[str], allow_loop: bool = True) -> list[str]:
        r = self.rng
        n = r.randint(1, self.cfg.block_len)
        kind = r.random()
        out: list[str] = []
        if kind < 0.35:
            skip = self._label()
            out += self.straight(r.randint(0, 2))
            out += [f"cmp {self._cmp_operands()}", f"{r.choice(JCC)} {skip}"]
            out += self.straight(n)
            out += [f"{skip}:"]
        elif kind < 0.55 and allow_loop:
            top = self._label()
            out += [f"mov {LOOP_REG}, {r.randint(1, self.cfg.loop_max)}", f"{top}:"]
            out += self.straight(n)
            if functions and r.random() < 0.3:
                out.append(f"call {r.choice(functions)}")
            out += [f"sub {LOOP_REG}, 1", f"cmp {LOOP_REG}, 0", f"jg {top}"]
        elif kind < 0.7 and functions:
            out += self.straight(r.randint(0, 2))
            out.append(f"call {r.choice(functions)}")
        elif kind < 0.8:
            over = self._label()
            out += self.straight(r.randint(0, 2))
            out.append(f"jmp {over}")
            out += self.straight(r.randint(1, 3))
            out.append(f"{over}:")
        else:
            out += self.straight(n)
        return out

    def program(self) -> str:
        r = self.rng
        funcs = [f"fn{i}" for i in range(r.randint(0, self.cfg.functions))]
        lines = ["\t.text", "main:"]
        for _ in range(r.randint(1, self.cfg.blocks)):
            lines += self.block(funcs)
        lines += [".Lhalt:", "jmp .Lhalt"]
        for i, f in enumerate(funcs):
            lines.append(f"{f}:")
            callees = funcs[i + 1 :]
            for _ in range(r.randint(1, 2)):
                lines += self.block(callees, allow_loop=False)
            lines.append("ret")
        lines.append("\t.data")
        for v in range(NUM_VARS):
            lines += [f"v{v}:", f"\t.long {r.randrange(1 << 32)}"]
        return "\n".join(lines) + "\n"


def random_program(seed: int, cfg: GenConfig | None = None) -> str:
    return ProgramGenerator(random.Random(seed), cfg).program()


# --- source interpreter ---------------------------------------------------------------

_SOURCE_ALU = {
    "mov": lambda a, b: b,
    "add": lambda a, b: (a + b) & MASK32,
    "sub": lambda a, b: (a - b) & MASK32,
    "mul": lambda a, b: (a * b) & MASK32,
    "xor": lambda a, b: a ^ b,
    "and": lambda a, b: a & b,
    "or": lambda a, b: a | b,
    "shr": lambda a, b: a >> (b & 31),
    "shl": lambda a, b: (a << (b & 31)) & MASK32,
}
_SOURCE_JCC = {
    "jle": lambda a, b: a <= b,
    "jge": lambda a, b: a >= b,
    "jl": lambda a, b: a < b,
    "jg": lambda a, b: a > b,
    "je": lambda a, b: a == b,
    "jne": lambda a, b: a != b,
}


@dataclass
class SourceResult:
    regs: list[int]
    memory: dict[int, int]
    steps: int


class Spin(Exception):
    pass


def interpret_source(prog: AsmProgram, max_steps: int = 200_000) -> SourceResult:
    """Execute parsed (unlowered) source with x86 flag semantics.

    Stops at a ``jmp`` to a label that directly precedes it.
    """
    image, syms = layout_data(prog)
    syms.update(prog.equates)
    mem = {image.base + i: w for i, w in enumerate(image.words)}
    code: list = []
    labels: dict[str, int] = {}
    for it in prog.items:
        if isinstance(it, Label):
            labels[it.name] = len(code)
        else:
            code.append(it)
    regs = [0] * 16
    stack: list[int] = []
    flags = (0, 0)
    pc = 0
    steps = 0

    def addr(m: Mem) -> int:
        return (syms[m.symbol] + m.offset // 4) if m.symbol else m.offset

    def value(o) -> int:
        if isinstance(o, Reg):
            return regs[o.num]
        if isinstance(o, Imm):
            return o.value & MASK32
        return mem.get(addr(o), 0)

    while steps < max_steps:
        st = code[pc]
        steps += 1
        op = st.op
        nxt = pc + 1
        if op == "mov" or op in ALU_OPS:
            fn = _SOURCE_ALU[ALU_OPS.get(op, op)]
            d, s = st.operands
            res = fn(value(d), value(s))
            if isinstance(d, Reg):
                regs[d.num] = res
            else:
                mem[addr(d)] = res
        elif op == "cmp":
            a, b = st.operands
            flags = (to_signed(value(a)), to_signed(value(b)))
        elif op in JCC_OPS:
            if _SOURCE_JCC[JCC_OPS[op]](*flags):
                nxt = labels[st.operands[0].name]
        elif op == "jmp":
            target = labels[st.operands[0].name]
            if target == pc:
                return SourceResult(regs, mem, steps)
            nxt = target
        elif op == "call":
            stack.append(pc + 1)
            nxt = labels[st.operands[0].name]
        elif op == "ret":
            nxt = stack.pop()
        elif op == "noop":
            pass
        else:
            raise ValueError(f"interpreter does not handle {st}")
        pc = nxt
    raise Spin(f"no halt within {max_steps} steps")


def parse_program(text: str) -> AsmProgram:
    return parse_assembly(text)


def random_slots(rng: random.Random, max_slots: int = 5, min_len: int = 20, max_len: int = 400,
                 window: int = 10) -> list[tuple[int | None, int]]:
    """A random major frame for ``frame_schedule``: every partition appears at least once."""
    parts = [0, 1, 2]
    rng.shuffle(parts)
    seq = parts + [rng.randrange(3) for _ in range(rng.randint(0, max(0, max_slots - 3)))]
    rng.shuffle(seq)
    slots: list[tuple[int | None, int]] = []
    for p in seq:
        if rng.random() < 0.25:
            slots.append((None, rng.randint(2 * window, 2 * window + max_len)))
        slots.append((p, rng.randint(min_len, max_len)))
    return slots
