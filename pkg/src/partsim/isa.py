"""16-bit instruction formats, opcode table and bit-exact encode/decode.

Three instruction forms share one 16-bit word:

    memory-access    11 d rrrr aaaaaaaaa    d=1 store, r register, a data address
    memory-address   10 aaaaaaaaaaaaaa      a instruction address
    operational      0 ooooooo aaaa bbbb    o opcode, a/b registers (a is destination)
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

WORD_MASK = 0xFFFF
NUM_REGISTERS = 16
DATA_ADDR_BITS = 9
CODE_ADDR_BITS = 14


class Category(Enum):
    NOOP = "no-op"
    ARITH = "alu-arithmetic"
    LOGIC = "alu-logic"
    MOVE = "register-move"
    JUMP_COND = "jump-condition"
    JUMP = "unconditional-jump"
    CALL = "call-trigger"
    RETURN = "return"


@dataclass(frozen=True)
class OpcodeInfo:
    code: int
    mnemonic: str
    category: Category


# Documented encodings plus no-op, mov, call and ret, which have none.
OPCODES: dict[int, OpcodeInfo] = {
    info.code: info
    for info in (
        OpcodeInfo(0x00, "noop", Category.NOOP),
        OpcodeInfo(0x10, "mov", Category.MOVE),
        OpcodeInfo(0x11, "add", Category.ARITH),
        OpcodeInfo(0x12, "sub", Category.ARITH),
        OpcodeInfo(0x13, "mul", Category.ARITH),
        OpcodeInfo(0x21, "jle", Category.JUMP_COND),
        OpcodeInfo(0x22, "jge", Category.JUMP_COND),
        OpcodeInfo(0x23, "jl", Category.JUMP_COND),
        OpcodeInfo(0x24, "jg", Category.JUMP_COND),
        OpcodeInfo(0x25, "je", Category.JUMP_COND),
        OpcodeInfo(0x26, "jne", Category.JUMP_COND),
        OpcodeInfo(0x27, "juc", Category.JUMP),
        OpcodeInfo(0x28, "call", Category.CALL),
        OpcodeInfo(0x29, "ret", Category.RETURN),
        OpcodeInfo(0x31, "xor", Category.LOGIC),
        OpcodeInfo(0x32, "and", Category.LOGIC),
        OpcodeInfo(0x33, "or", Category.LOGIC),
        OpcodeInfo(0x34, "shr", Category.LOGIC),
        OpcodeInfo(0x35, "shl", Category.LOGIC),
    )
}
MNEMONICS: dict[str, int] = {info.mnemonic: code for code, info in OPCODES.items()}

NOOP, MOV, ADD, SUB, MUL = 0x00, 0x10, 0x11, 0x12, 0x13
JLE, JGE, JL, JG, JE, JNE, JUC, CALL, RET = 0x21, 0x22, 0x23, 0x24, 0x25, 0x26, 0x27, 0x28, 0x29
XOR, AND, OR, SHR, SHL = 0x31, 0x32, 0x33, 0x34, 0x35

CONDITIONAL_JUMPS = frozenset({JLE, JGE, JL, JG, JE, JNE})


class EncodingError(ValueError):
    """A field does not fit its slot in the instruction word."""

    def __init__(self, field: str, value: int, bits: int):
        super().__init__(f"field {field!r}={value!r} does not fit in {bits} bits")
        self.field = field
        self.value = value


class UnknownOpcodeError(ValueError):
    def __init__(self, instruction: "Operational"):
        super().__init__(f"unknown opcode 0x{instruction.opcode:02X}")
        self.instruction = instruction


@dataclass(frozen=True)
class MemAccess:
    store: bool
    reg: int
    addr: int

    def __str__(self) -> str:
        op = "st" if self.store else "ld"
        return f"{op} r{self.reg}, [0x{self.addr:03X}]"


@dataclass(frozen=True)
class MemAddress:
    addr: int

    def __str__(self) -> str:
        return f"jad 0x{self.addr:04X}"


@dataclass(frozen=True)
class Operational:
    opcode: int
    op_a: int = 0
    op_b: int = 0

    @property
    def mnemonic(self) -> str:
        info = OPCODES.get(self.opcode)
        return info.mnemonic if info else f"op{self.opcode:02X}"

    def __str__(self) -> str:
        return f"{self.mnemonic} r{self.op_a}, r{self.op_b}"


Instruction = Union[MemAccess, MemAddress, Operational]


def _check(field: str, value: int, bits: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < (1 << bits):
        raise EncodingError(field, value, bits)


def encode(instr: Instruction) -> int:
    if isinstance(instr, MemAccess):
        if not isinstance(instr.store, bool):
            raise EncodingError("store", instr.store, 1)
        _check("reg", instr.reg, 4)
        _check("addr", instr.addr, DATA_ADDR_BITS)
        return 0xC000 | (int(instr.store) << 13) | (instr.reg << 9) | instr.addr
    if isinstance(instr, MemAddress):
        _check("addr", instr.addr, CODE_ADDR_BITS)
        return 0x8000 | instr.addr
    if isinstance(instr, Operational):
        _check("opcode", instr.opcode, 7)
        _check("op_a", instr.op_a, 4)
        _check("op_b", instr.op_b, 4)
        return (instr.opcode << 8) | (instr.op_a << 4) | instr.op_b
    raise TypeError(f"not an instruction: {instr!r}")


def decode(word: int, strict: bool = True) -> Instruction:
    """Split a 16-bit word into its instruction form.

    With ``strict`` an operational word whose opcode is not in ``OPCODES``
    raises ``UnknownOpcodeError``; the error carries the decoded fields.
    """
    if not 0 <= word <= WORD_MASK:
        raise EncodingError("word", word, 16)
    if word & 0x8000:
        if word & 0x4000:
            return MemAccess(bool(word & 0x2000), (word >> 9) & 0xF, word & 0x1FF)
        return MemAddress(word & 0x3FFF)
    instr = Operational((word >> 8) & 0x7F, (word >> 4) & 0xF, word & 0xF)
    if strict and instr.opcode not in OPCODES:
        raise UnknownOpcodeError(instr)
    return instr


def disassemble(word: int) -> str:
    return str(decode(word, strict=False))


# ALU semantics shared by the pipeline and the reference interpreter.
MASK32 = 0xFFFFFFFF


def to_signed(v: int) -> int:
    return v - 0x100000000 if v & 0x80000000 else v


def _mul(a: int, b: int) -> int:
    # Low word of the signed product equals the low word of the unsigned one.
    return (a * b) & MASK32


ALU_FUNCS = {
    MOV: lambda a, b: b,
    ADD: lambda a, b: (a + b) & MASK32,
    SUB: lambda a, b: (a - b) & MASK32,
    MUL: _mul,
    XOR: lambda a, b: a ^ b,
    AND: lambda a, b: a & b,
    OR: lambda a, b: a | b,
    SHR: lambda a, b: a >> (b & 31),
    SHL: lambda a, b: (a << (b & 31)) & MASK32,
}

CONDITIONS = {
    JLE: lambda a, b: to_signed(a) <= to_signed(b),
    JGE: lambda a, b: to_signed(a) >= to_signed(b),
    JL: lambda a, b: to_signed(a) < to_signed(b),
    JG: lambda a, b: to_signed(a) > to_signed(b),
    JE: lambda a, b: a == b,
    JNE: lambda a, b: a != b,
}


def code_to_bytes(words: list[int]) -> bytes:
    """Little-endian 16-bit program image, lowest address first."""
    out = bytearray()
    for w in words:
        if not 0 <= w <= WORD_MASK:
            raise EncodingError("word", w, 16)
        out += w.to_bytes(2, "little")
    return bytes(out)


def code_from_bytes(blob: bytes) -> list[int]:
    if len(blob) % 2:
        raise ValueError("program image length is not a multiple of 2 bytes")
    return [int.from_bytes(blob[i : i + 2], "little") for i in range(0, len(blob), 2)]
