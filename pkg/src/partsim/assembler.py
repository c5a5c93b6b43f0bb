"""Assembler from an Intel-syntax x86 subset to the 16-bit ISA.

Pipeline of passes, each a pure function over ``AsmProgram``:

    parse_assembly -> lower_branches -> pool_immediates
        -> lower_mem_operands -> insert_hazard_noops -> emit_binary

The core has no ALU-with-memory forms, no immediates and no flags, so the
passes rewrite compiler output into loads/stores through the reserved
``emt`` register (r15), two-instruction jumps and calls (``jad`` sets the
target, the next instruction decides), and pad data hazards with no-ops.
r14 is a second scratch register for statements that need two temporaries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Union

from .isa import CODE_ADDR_BITS, DATA_ADDR_BITS, MNEMONICS, MemAccess, MemAddress, Operational, encode
from .memsys import DEFAULT_REGIONS, DataImage, RegionMap

EMT = 15
SCRATCH = 14
DEFAULT_HAZARD_DISTANCE = 2

REGISTER_MAP: dict[str, int] = {
    "eax": 0, "ebx": 1, "ecx": 2, "edx": 3, "esi": 4, "edi": 5, "ebp": 6, "esp": 7,
    **{f"r{i}d": i for i in range(8, 14)},
    **{f"r{i}": i for i in range(14)},
}
RESERVED_REGISTERS = {"emt": EMT, "r15": EMT, "r14": SCRATCH}

ALU_OPS = {"add": "add", "sub": "sub", "imul": "mul", "mul": "mul", "xor": "xor", "and": "and", "or": "or",
           "shr": "shr", "shl": "shl", "sal": "shl"}
JCC_OPS = {"jle": "jle", "jge": "jge", "jl": "jl", "jg": "jg", "je": "je", "jne": "jne",
           "jz": "je", "jnz": "jne", "jng": "jle", "jnl": "jge", "jnge": "jl", "jnle": "jg"}
CONTROL_OPS = {"jad", "juc", "call", "ret", "noop"}
SOURCE_OPS = set(ALU_OPS) | set(JCC_OPS) | {"mov", "cmp", "jmp", "call", "ret", "nop", "jad", "juc", "noop"}

IGNORED_DIRECTIVES = {
    ".globl", ".global", ".type", ".size", ".p2align", ".align", ".balign", ".file", ".ident",
    ".intel_syntax", ".att_syntax", ".cfi_startproc", ".cfi_endproc", ".cfi_def_cfa_offset", ".cfi_offset",
    ".cfi_def_cfa_register", ".cfi_def_cfa", ".addrsig", ".addrsig_sym", ".local", ".weak", ".hidden",
    ".build_version", ".section_end", ".loc", ".text_end",
}


class AsmError(Exception):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


# --- program representation -------------------------------------------------------


@dataclass(frozen=True)
class Reg:
    num: int
    text: str


@dataclass(frozen=True)
class Mem:
    symbol: str | None  # None: ``offset`` is an absolute word address
    offset: int  # byte offset from ``symbol``
    text: str

    @property
    def key(self) -> tuple:
        return (self.symbol, self.offset)


@dataclass(frozen=True)
class Imm:
    value: int
    text: str


@dataclass(frozen=True)
class LabelRef:
    name: str
    text: str


Operand = Union[Reg, Mem, Imm, LabelRef]


@dataclass(frozen=True)
class Statement:
    op: str
    operands: tuple = ()
    line: int = 0
    inserted: bool = False

    def __str__(self) -> str:
        if not self.operands:
            return self.op
        return f"{self.op} {', '.join(o.text for o in self.operands)}"


@dataclass(frozen=True)
class Label:
    name: str
    line: int = 0

    def __str__(self) -> str:
        return f"{self.name}:"


@dataclass(frozen=True)
class DataDef:
    """Static words, each optionally introduced by labels."""

    labels: tuple[str, ...]
    words: tuple[int, ...]
    line: int = 0


@dataclass
class AsmProgram:
    items: list = field(default_factory=list)  # Label | Statement, text section order
    data: list[DataDef] = field(default_factory=list)
    equates: dict[str, int] = field(default_factory=dict)
    pool: list[tuple[str, int]] = field(default_factory=list)  # (symbol, value)

    @property
    def statements(self) -> list[Statement]:
        return [it for it in self.items if isinstance(it, Statement)]

    def with_items(self, items: list) -> "AsmProgram":
        return AsmProgram(list(items), list(self.data), dict(self.equates), list(self.pool))

    def text(self) -> str:
        out = []
        for it in self.items:
            out.append(str(it) if isinstance(it, Label) else f"\t{it}")
        return "\n".join(out) + ("\n" if out else "")


@dataclass
class SymbolTable:
    code: dict[str, int] = field(default_factory=dict)
    data: dict[str, int] = field(default_factory=dict)

    def data_address(self, m: Mem, line: int) -> int:
        if m.symbol is None:
            addr = m.offset
        else:
            if m.symbol not in self.data:
                where = "a code label" if m.symbol in self.code else "undefined"
                raise AsmError(f"data symbol {m.symbol!r} is {where}", line)
            if m.offset % 4:
                raise AsmError(f"byte offset {m.offset} in {m.text!r} is not word aligned", line)
            addr = self.data[m.symbol] + m.offset // 4
        if not 0 <= addr < (1 << DATA_ADDR_BITS):
            raise AsmError(f"data address 0x{addr:X} of {m.text!r} exceeds {DATA_ADDR_BITS} bits", line)
        return addr


# --- parsing -----------------------------------------------------------------------

_LABEL_RE = re.compile(r"^\s*([A-Za-z_.$][\w.$@]*)\s*:(.*)$")
_IDENT_RE = re.compile(r"^[A-Za-z_.$][\w.$@]*$")
_PTR_RE = re.compile(r"^(?:(?:dword|qword|word|byte)\s+ptr\s+)?\[(.*)\]$", re.IGNORECASE)


def _int(text: str) -> int:
    return int(text.strip(), 0)


def _is_int(text: str) -> bool:
    try:
        _int(text)
        return True
    except ValueError:
        return False


def _strip_comment(line: str) -> str:
    for mark in ("#", ";", "//"):
        i = line.find(mark)
        if i >= 0:
            line = line[:i]
    return line.strip()


def _parse_register(name: str, allow_reserved: bool, line: int) -> Reg | None:
    low = name.lower()
    if low in REGISTER_MAP:
        return Reg(REGISTER_MAP[low], name)
    if low in RESERVED_REGISTERS:
        if not allow_reserved:
            raise AsmError(f"register {name!r} is reserved for the assembler", line)
        return Reg(RESERVED_REGISTERS[low], name)
    return None


def _parse_mem(inner: str, text: str, line: int) -> Mem:
    terms = re.findall(r"([+-]?)\s*([^+\-\s]+)", inner.strip())
    if not terms or "".join(s + t for s, t in terms).replace(" ", "") != inner.replace(" ", ""):
        raise AsmError(f"malformed memory operand {text!r}", line)
    symbol = None
    offset = 0
    for sign, term in terms:
        low = term.lower()
        if low == "rip":
            continue
        if _is_int(term):
            offset += -_int(term) if sign == "-" else _int(term)
        elif low in REGISTER_MAP or low in RESERVED_REGISTERS:
            raise AsmError(f"register-indirect addressing is not supported: {text!r}", line)
        elif _IDENT_RE.match(term) and sign != "-" and symbol is None:
            symbol = term
        else:
            raise AsmError(f"malformed memory operand {text!r}", line)
    return Mem(symbol, offset, text)


def _parse_operand(text: str, allow_reserved: bool, line: int) -> Operand:
    text = text.strip()
    if not text:
        raise AsmError("empty operand", line)
    m = _PTR_RE.match(text)
    if m:
        return _parse_mem(m.group(1), text, line)
    if "[" in text or "]" in text:
        raise AsmError(f"malformed memory operand {text!r}", line)
    reg = _parse_register(text, allow_reserved, line)
    if reg is not None:
        return reg
    if _is_int(text):
        return Imm(_int(text) & 0xFFFFFFFF, text)
    if _IDENT_RE.match(text):
        return LabelRef(text, text)
    raise AsmError(f"malformed operand {text!r}", line)


def _split_operands(rest: str) -> list[str]:
    return [p for p in (x.strip() for x in rest.split(","))] if rest.strip() else []


def _expect(stmt: Statement, *shapes: tuple) -> None:
    kinds = tuple(type(o) for o in stmt.operands)
    for shape in shapes:
        if len(shape) == len(kinds) and all(issubclass(k, s) for k, s in zip(kinds, shape)):
            return
    raise AsmError(f"unsupported operands for {stmt.op}: {stmt}", stmt.line)


_RM = (Reg, Mem)
_ANY = (Reg, Mem, Imm)


def _check_shape(stmt: Statement) -> None:
    op = stmt.op
    if op == "mov" or op in ALU_OPS:
        _expect(stmt, ((Reg,), _ANY), ((Mem,), (Reg, Imm)))
    elif op == "cmp":
        _expect(stmt, (_RM, _ANY))
    elif op in JCC_OPS:
        # bare target before lowering, operand pair after it
        _expect(stmt, ((LabelRef,),), (_ANY, _ANY))
    elif op in ("jmp", "call"):
        _expect(stmt, ((LabelRef,),))
    elif op == "jad":
        _expect(stmt, ((LabelRef, Imm),))
    elif op in ("juc", "ret", "noop", "nop"):
        _expect(stmt, (), ((Reg,), (Reg,)))


def parse_assembly(text: str, allow_reserved: bool = False) -> AsmProgram:
    """Parse source text into an ``AsmProgram``.

    ``allow_reserved`` admits emt/r14, which only passes should introduce.
    """
    prog = AsmProgram()
    section = "text"
    pending: list[tuple[str, int]] = []  # data labels awaiting words
    seen: dict[str, int] = {}

    def define(name: str, lineno: int) -> None:
        if name in seen:
            raise AsmError(f"duplicate label {name!r} (first defined on line {seen[name]})", lineno)
        seen[name] = lineno

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        while line:
            m = _LABEL_RE.match(line)
            if not m or m.group(1).lower() in ("dword", "qword"):
                break
            name = m.group(1)
            define(name, lineno)
            if section == "text":
                prog.items.append(Label(name, lineno))
            else:
                pending.append((name, lineno))
            line = m.group(2).strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        if "\t" in head:
            head, _, more = head.partition("\t")
            rest = more + " " + rest
        head_l = head.lower()
        rest = rest.strip()
        if head_l.startswith("."):
            section = _directive(prog, head_l, rest, section, pending, define, lineno)
            continue
        if section != "text":
            raise AsmError(f"instruction {head!r} outside the text section", lineno)
        if head_l not in SOURCE_OPS:
            raise AsmError(f"unknown or unsupported mnemonic {head!r}", lineno)
        ops = tuple(_parse_operand(o, allow_reserved, lineno) for o in _split_operands(rest))
        stmt = Statement("noop" if head_l == "nop" else head_l, ops, lineno)
        _check_shape(stmt)
        prog.items.append(stmt)
    if pending:
        prog.data.append(DataDef(tuple(n for n, _ in pending), (), pending[0][1]))
    return prog


def _directive(prog: AsmProgram, name: str, rest: str, section: str, pending: list, define, lineno: int) -> str:
    if name == ".text":
        return "text"
    if name in (".data", ".bss", ".rodata"):
        return "data"
    if name == ".section":
        sec = rest.split(",")[0].strip().lower()
        if sec.startswith(".text"):
            return "text"
        if sec.startswith((".data", ".bss", ".rodata")):
            return "data"
        if sec.startswith(".note") or sec.startswith(".debug") or sec.startswith(".llvm"):
            return "ignored"
        raise AsmError(f"unsupported section {sec!r}", lineno)
    if name in (".set", ".equ"):
        parts = _split_operands(rest)
        if len(parts) != 2 or not _IDENT_RE.match(parts[0]) or not _is_int(parts[1]):
            raise AsmError(f"{name} expects 'symbol, address'", lineno)
        define(parts[0], lineno)
        prog.equates[parts[0]] = _int(parts[1])
        return section
    if name in (".long", ".int", ".word4", ".zero", ".space", ".skip"):
        if section == "ignored":
            return section
        if section != "data":
            raise AsmError(f"{name} in the text section", lineno)
        args = _split_operands(rest)
        if name in (".zero", ".space", ".skip"):
            if not args or not _is_int(args[0]) or _int(args[0]) < 0:
                raise AsmError(f"{name} expects a byte count", lineno)
            fill = _int(args[1]) if len(args) > 1 else 0
            if fill:
                raise AsmError(f"{name} with a nonzero fill byte is not supported", lineno)
            words = (0,) * ((_int(args[0]) + 3) // 4)
        else:
            if not args or not all(_is_int(a) for a in args):
                raise AsmError(f"{name} expects integer values", lineno)
            words = tuple(_int(a) & 0xFFFFFFFF for a in args)
        prog.data.append(DataDef(tuple(n for n, _ in pending), words, pending[0][1] if pending else lineno))
        pending.clear()
        return section
    if name in IGNORED_DIRECTIVES or name.startswith(".cfi_"):
        return section
    raise AsmError(f"unsupported directive {name!r}", lineno)


def _check_references(prog: AsmProgram, table: "SymbolTable") -> None:
    for st in prog.statements:
        for o in st.operands:
            if isinstance(o, LabelRef) and o.name not in table.code:
                raise AsmError(f"undefined label {o.name!r}", st.line)
            if isinstance(o, Mem) and o.symbol is not None and o.symbol not in table.data:
                where = "a code label" if o.symbol in table.code else "undefined"
                raise AsmError(f"data symbol {o.symbol!r} is {where}", st.line)


# --- lowering passes ----------------------------------------------------------------


def _dest(stmt: Statement) -> Operand | None:
    if (stmt.op == "mov" or stmt.op in ALU_OPS) and stmt.operands:
        return stmt.operands[0]
    return None


def _same_location(a: Operand, b: Operand) -> bool:
    if isinstance(a, Reg) and isinstance(b, Reg):
        return a.num == b.num
    if isinstance(a, Mem) and isinstance(b, Mem):
        return a.key == b.key
    return False


def lower_branches(p: AsmProgram) -> AsmProgram:
    """Fold each cmp into its conditional jump and split jumps and calls in two.

    ``cmp a, b ... jcc L`` becomes ``jad L; jcc a, b`` at the jump's
    position.  The pair must share a basic block and neither cmp operand
    may be written in between.
    """
    out: list = []
    cmp: Statement | None = None

    def boundary(where: int) -> None:
        if cmp is not None:
            raise AsmError(f"cmp on line {cmp.line} has no conditional jump in its block", where)

    for it in p.items:
        if isinstance(it, Label):
            boundary(it.line)
            out.append(it)
            continue
        op = it.op
        if op == "cmp":
            boundary(it.line)
            cmp = it
            continue
        if op in JCC_OPS and len(it.operands) == 1:
            if cmp is None:
                raise AsmError(f"{op} has no preceding cmp in its basic block", it.line)
            target = it.operands[0]
            out.append(Statement("jad", (target,), it.line, True))
            out.append(Statement(JCC_OPS[op], cmp.operands, it.line))
            cmp = None
            continue
        if op == "jmp":
            boundary(it.line)
            out.append(Statement("jad", it.operands, it.line, True))
            out.append(Statement("juc", (), it.line))
            continue
        if op == "call" and it.operands:
            boundary(it.line)
            out.append(Statement("jad", it.operands, it.line, True))
            out.append(Statement("call", (), it.line))
            continue
        if op in ("ret", "juc", "call"):
            boundary(it.line)
        if cmp is not None:
            d = _dest(it)
            if d is not None and any(_same_location(d, o) for o in cmp.operands):
                raise AsmError(f"{it} overwrites an operand of the cmp on line {cmp.line}", it.line)
        out.append(it)
    if cmp is not None:
        raise AsmError(f"cmp on line {cmp.line} has no conditional jump", cmp.line)
    return p.with_items(out)


def _emt(text: str = "emt") -> Reg:
    return Reg(EMT, text)


def _pool_mem(name: str) -> Mem:
    return Mem(name, 0, f"dword ptr [{name}]")


def pool_immediates(p: AsmProgram, regions: RegionMap = DEFAULT_REGIONS) -> tuple[AsmProgram, DataImage]:
    """Move immediate operands into pooled data words loaded through emt.

    A conditional jump's constant is loaded ahead of its ``jad``.
    Identical constants share one pool slot.
    """
    pool = list(p.pool)
    slots = {v: name for name, v in pool}

    def slot(value: int) -> str:
        if value not in slots:
            name = f"__imm_{len(pool)}"
            slots[value] = name
            pool.append((name, value))
        return slots[value]

    out: list = []
    for it in p.items:
        if isinstance(it, Statement) and (it.op == "mov" or it.op in ALU_OPS or it.op in JCC_OPS):
            imms = [o for o in it.operands if isinstance(o, Imm)]
            if len(imms) > 1:
                raise AsmError(f"more than one immediate in {it}", it.line)
            if imms:
                imm = imms[0]
                load = Statement("mov", (_emt(), _pool_mem(slot(imm.value))), it.line, True)
                ops = tuple(_emt() if o is imm else o for o in it.operands)
                if it.op in JCC_OPS and out and isinstance(out[-1], Statement) and out[-1].op == "jad":
                    out.insert(len(out) - 1, load)
                else:
                    out.append(load)
                out.append(replace(it, operands=ops))
                continue
        out.append(it)
    q = p.with_items(out)
    q.pool = pool
    image, _ = layout_data(q, regions)
    return q, image


def lower_mem_operands(p: AsmProgram) -> AsmProgram:
    """Rewrite ALU and jump-condition memory operands into explicit loads.

    The load goes to emt, or to r14 when emt is already an operand.  A
    memory destination is loaded, operated on and stored back.  Loads for
    a conditional jump are placed ahead of its ``jad``.
    """
    out: list = []
    for it in p.items:
        if not isinstance(it, Statement) or not (it.op in ALU_OPS or it.op in JCC_OPS):
            out.append(it)
            continue
        mems = [o for o in it.operands if isinstance(o, Mem)]
        if not mems:
            out.append(it)
            continue
        if len(mems) > 1:
            raise AsmError(f"two memory operands in {it}", it.line)
        mem = mems[0]
        uses_emt = any(isinstance(o, Reg) and o.num == EMT for o in it.operands)
        tmp = Reg(SCRATCH, "r14") if uses_emt else _emt()
        ops = tuple(tmp if o is mem else o for o in it.operands)
        load = Statement("mov", (tmp, mem), it.line, True)
        if it.op in JCC_OPS:
            at = len(out) - 1 if out and isinstance(out[-1], Statement) and out[-1].op == "jad" else len(out)
            out.insert(at, load)
            out.append(replace(it, operands=ops))
        elif it.operands[0] is mem:
            scratch = Reg(SCRATCH, "r14")
            ops = (scratch,) + it.operands[1:]
            out.append(Statement("mov", (scratch, mem), it.line, True))
            out.append(replace(it, operands=ops))
            out.append(Statement("mov", (mem, scratch), it.line, True))
        else:
            out.append(load)
            out.append(replace(it, operands=ops))
    return p.with_items(out)


def defs_uses(stmt: Statement) -> tuple[set[int], set[int]]:
    """Registers written and read by a lowered statement."""
    regs = [o.num if isinstance(o, Reg) else None for o in stmt.operands]
    op = stmt.op
    if op == "mov" and len(regs) == 2:
        d, s = regs
        return ({d} if d is not None else set()), ({s} if s is not None else set())
    if op in ALU_OPS and len(regs) == 2:
        d, s = regs
        defs = {d} if d is not None else set()
        return defs, {r for r in regs if r is not None}
    if op in JCC_OPS and len(regs) == 2:
        return set(), {r for r in regs if r is not None}
    return set(), set()


def insert_hazard_noops(p: AsmProgram, distance: int = DEFAULT_HAZARD_DISTANCE) -> AsmProgram:
    """Pad so every register read is at least ``distance`` slots after its write.

    Distance is measured in straight-line order.  Control transfers cost
    extra cycles, so the straight-line path is the tightest one.
    """
    if distance < 1:
        raise ValueError("hazard distance must be at least 1")
    out: list = []
    last_def: dict[int, int] = {}
    slot = 0
    for it in p.items:
        if isinstance(it, Label):
            out.append(it)
            continue
        defs, uses = defs_uses(it)
        need = max((distance - (slot - last_def[r]) for r in uses if r in last_def), default=0)
        for _ in range(need):
            out.append(Statement("noop", (), it.line, True))
            slot += 1
        out.append(it)
        for r in defs:
            last_def[r] = slot
        slot += 1
    return p.with_items(out)


# --- layout and emission ----------------------------------------------------------------


def layout_data(p: AsmProgram, regions: RegionMap = DEFAULT_REGIONS) -> tuple[DataImage, dict[str, int]]:
    """Place static data then the immediate pool from the static base."""
    words: list[int] = []
    syms: dict[str, int] = {}
    base = regions.static_base
    for d in p.data:
        for name in d.labels:
            syms[name] = base + len(words)
        words.extend(d.words)
    for name, value in p.pool:
        syms[name] = base + len(words)
        words.append(value)
    end = base + len(words)
    if end > regions.shared_lo:
        raise AsmError(f"static data and constant pool need {len(words)} words, "
                       f"only {regions.shared_lo - base} fit below the shared window")
    return DataImage(base, words), syms


def build_symbols(p: AsmProgram, regions: RegionMap = DEFAULT_REGIONS) -> SymbolTable:
    table = SymbolTable()
    addr = 0
    for it in p.items:
        if isinstance(it, Label):
            table.code[it.name] = addr
        else:
            addr += 1
    if addr > (1 << CODE_ADDR_BITS):
        raise AsmError(f"program of {addr} words exceeds the {1 << CODE_ADDR_BITS}-word instruction space")
    _, table.data = layout_data(p, regions)
    for name, value in p.equates.items():
        table.data[name] = value
    _check_references(p, table)
    return table


def _reg(o: Operand, stmt: Statement) -> int:
    if not isinstance(o, Reg):
        raise AsmError(f"statement not lowered: {stmt}", stmt.line)
    return o.num


def encode_statement(stmt: Statement, syms: SymbolTable) -> int:
    op, ops = stmt.op, stmt.operands
    if op == "jad":
        t = ops[0]
        if isinstance(t, LabelRef):
            if t.name not in syms.code:
                raise AsmError(f"jump target {t.name!r} is not a code label", stmt.line)
            addr = syms.code[t.name]
        else:
            addr = t.value
        if not 0 <= addr < (1 << CODE_ADDR_BITS):
            raise AsmError(f"jump target 0x{addr:X} exceeds {CODE_ADDR_BITS} bits", stmt.line)
        return encode(MemAddress(addr))
    if op == "mov":
        a, b = ops
        if isinstance(a, Reg) and isinstance(b, Mem):
            return encode(MemAccess(False, a.num, syms.data_address(b, stmt.line)))
        if isinstance(a, Mem) and isinstance(b, Reg):
            return encode(MemAccess(True, b.num, syms.data_address(a, stmt.line)))
        return encode(Operational(MNEMONICS["mov"], _reg(a, stmt), _reg(b, stmt)))
    if op in ALU_OPS or op in JCC_OPS:
        name = ALU_OPS.get(op) or JCC_OPS[op]
        return encode(Operational(MNEMONICS[name], _reg(ops[0], stmt), _reg(ops[1], stmt)))
    if op in CONTROL_OPS:
        a = _reg(ops[0], stmt) if ops else 0
        b = _reg(ops[1], stmt) if ops else 0
        return encode(Operational(MNEMONICS[op], a, b))
    raise AsmError(f"statement not lowered: {stmt}", stmt.line)


def emit_binary(p: AsmProgram, syms: SymbolTable | None = None,
                regions: RegionMap = DEFAULT_REGIONS) -> tuple[list[int], DataImage, str]:
    """Encode a fully lowered program; returns (code, data image, listing)."""
    syms = syms or build_symbols(p, regions)
    image, _ = layout_data(p, regions)
    image.check(regions)
    code: list[int] = []
    lines: list[str] = []
    for it in p.items:
        if isinstance(it, Label):
            lines.append(f"{'':12}{it.name}:")
            continue
        word = encode_statement(it, syms)
        lines.append(f"{len(code):04X}  {word:04X}    {it}")
        code.append(word)
    names = {}
    for name, addr in syms.data.items():
        names.setdefault(addr, []).append(name)
    if image.words:
        lines.append("")
        lines.append("; static data")
        for i, w in enumerate(image.words):
            a = image.base + i
            lines.append(f"{a:03X}   {w:08X}  {' '.join(names.get(a, []))}".rstrip())
    return code, image, "\n".join(lines) + "\n"


# --- driver ------------------------------------------------------------------------


@dataclass
class Assembly:
    code: list[int]
    data: DataImage
    listing: str
    symbols: SymbolTable
    program: AsmProgram


def lower(p: AsmProgram, hazard_distance: int = DEFAULT_HAZARD_DISTANCE,
          regions: RegionMap = DEFAULT_REGIONS) -> AsmProgram:
    p = lower_branches(p)
    p, _ = pool_immediates(p, regions)
    p = lower_mem_operands(p)
    return insert_hazard_noops(p, hazard_distance)


def assemble(text: str, hazard_distance: int = DEFAULT_HAZARD_DISTANCE,
             regions: RegionMap = DEFAULT_REGIONS) -> Assembly:
    p = lower(parse_assembly(text), hazard_distance, regions)
    syms = build_symbols(p, regions)
    code, data, listing = emit_binary(p, syms, regions)
    return Assembly(code, data, listing, syms, p)


def _with_ext(base: str | Path, ext: str) -> Path:
    base = Path(base)
    return base.parent / (base.name + ext)


def write_outputs(result: Assembly, base: str | Path) -> list[Path]:
    """Write ``<base>.bin``, ``<base>.dat`` and ``<base>.lst``."""
    from .isa import code_to_bytes

    paths = [_with_ext(base, ext) for ext in (".bin", ".dat", ".lst")]
    paths[0].write_bytes(code_to_bytes(result.code))
    paths[1].write_bytes(result.data.to_bytes())
    paths[2].write_text(result.listing)
    return paths


def read_image(base: str | Path) -> tuple[list[int], DataImage]:
    from .isa import code_from_bytes

    code = code_from_bytes(_with_ext(base, ".bin").read_bytes())
    dat = _with_ext(base, ".dat")
    data = DataImage.from_bytes(dat.read_bytes()) if dat.exists() else DataImage()
    return code, data
