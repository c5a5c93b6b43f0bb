import pytest
from hypothesis import given, settings, strategies as st

from partsim.assembler import (AsmError, LabelRef, Mem, Reg, assemble, emit_binary, insert_hazard_noops,
                               lower, lower_branches, lower_mem_operands, parse_assembly, pool_immediates, read_image,
                               write_outputs)
from partsim.core import reference_execute
from partsim.programs import benchmark_source, busy_loop_source
from progen import interpret_source, random_program


def lines(p):
    return [str(s) for s in p.items]


def parse(text):
    return parse_assembly(text, allow_reserved=True)


def test_parse_worked_statements():
    p = parse_assembly("add eax, dword ptr [c]\njle .LBB3_2\n")
    add, jle = p.statements
    assert add.op == "add" and add.operands == (Reg(0, "eax"), Mem("c", 0, "dword ptr [c]"))
    assert jle.operands == (LabelRef(".LBB3_2", ".LBB3_2"),)


def test_parse_empty():
    p = parse_assembly("")
    assert p.items == [] and p.data == []


def test_parse_errors_carry_line():
    with pytest.raises(AsmError) as info:
        parse_assembly("mov eax, 1\n  push eax\n")
    assert info.value.line == 2
    for bad in ("mov eax, [", "mov eax, dword ptr [eax]", "x:\nx:\n", "mov emt, 1", "mov eax, r14", "add eax"):
        with pytest.raises(AsmError):
            parse_assembly(bad)


def test_undefined_symbols():
    for bad in ("jmp nowhere", "mov eax, [nothing]", "L:\nmov eax, [L]"):
        with pytest.raises(AsmError):
            assemble(bad)


def test_memory_operand_forms():
    p = parse_assembly("mov eax, dword ptr [rip + arr + 8]\nmov eax, [0x019]\n.data\narr: .zero 12\n")
    a, b = p.statements
    assert a.operands[1].key == ("arr", 8)
    assert b.operands[1].key == (None, 0x19)


def test_mem_operand_lowering_worked_example():
    p = lower_mem_operands(parse("add eax, dword ptr [c]"))
    assert lines(p) == ["mov emt, dword ptr [c]", "add eax, emt"]


def test_mem_operand_lowering_cases():
    assert lines(lower_mem_operands(parse("add eax, ebx"))) == ["add eax, ebx"]
    p = lower_mem_operands(parse("sub ecx, [d]\nxor ecx, [d]"))
    assert lines(p) == ["mov emt, [d]", "sub ecx, emt", "mov emt, [d]", "xor ecx, emt"]
    p = lower_mem_operands(parse("add dword ptr [m], eax"))
    assert lines(p) == ["mov r14, dword ptr [m]", "add r14, eax", "mov dword ptr [m], r14"]
    p = lower_mem_operands(parse("add emt, [m]"))
    assert lines(p) == ["mov r14, [m]", "add emt, r14"]


def test_branch_lowering_worked_example():
    p = lower_branches(parse_assembly("cmp eax, dword ptr [b]\njle .LBB3_2\n.LBB3_2:\n"))
    assert lines(p)[:2] == ["jad .LBB3_2", "jle eax, dword ptr [b]"]


def test_branch_lowering_cases():
    p = lower_branches(parse_assembly("L:\njmp L\n"))
    assert lines(p) == ["L:", "jad L", "juc"]
    p = lower_branches(parse_assembly("call F\nF:\nret\n"))
    assert lines(p) == ["jad F", "call", "F:", "ret"]
    p = lower_branches(parse_assembly("cmp eax, ebx\nmov ecx, 1\njne L\nL:\n"))
    assert lines(p) == ["mov ecx, 1", "jad L", "jne eax, ebx", "L:"]


@pytest.mark.parametrize("src", [
    "jle L\nL:",
    "cmp eax, ebx\nL:\njle L",
    "cmp eax, ebx\nmov eax, 1\njle L\nL:",
    "cmp eax, ebx\n",
    "cmp eax, ebx\njmp L\nL:",
])
def test_branch_lowering_errors(src):
    with pytest.raises(AsmError):
        lower_branches(parse_assembly(src))


def test_immediate_pool():
    p, image = pool_immediates(parse_assembly("mov eax, 5"))
    assert lines(p) == ["mov emt, dword ptr [__imm_0]", "mov eax, emt"]
    assert image.words == [5]
    p, image = pool_immediates(parse_assembly("add eax, 10000\nsub ebx, 10000\nmov ecx, edx"))
    assert len(image.words) == 1 and sum("__imm_0" in s for s in lines(p)) == 2
    p, image = pool_immediates(parse_assembly("mov eax, ebx"))
    assert lines(p) == ["mov eax, ebx"] and image.words == []


def test_jcc_immediate_load_goes_before_jad():
    p = lower(parse_assembly("cmp dword ptr [m], 7\njg L\nL:\n.data\nm: .long 1\n"))
    assert lines(p) == ["mov emt, dword ptr [__imm_0]", "mov r14, dword ptr [m]", "jad L", "jg r14, emt", "L:"]


def test_pool_overflow():
    src = "\n".join(f"mov eax, {i}" for i in range(500))
    with pytest.raises(AsmError):
        assemble(src)


def test_hazard_noops():
    p = insert_hazard_noops(parse("add r1, r2\nsub r3, r1"))
    assert lines(p) == ["add r1, r2", "noop", "sub r3, r1"]
    p = insert_hazard_noops(parse("add r1, r2\nsub r3, r4"))
    assert lines(p) == ["add r1, r2", "sub r3, r4"]
    p = insert_hazard_noops(parse("mov emt, [c]\nadd r1, emt"))
    assert lines(p) == ["mov emt, [c]", "noop", "add r1, emt"]
    p = insert_hazard_noops(parse("mov eax, [c]\njad L\njle eax, ebx\nL:"))
    assert "noop" not in lines(p)
    p = insert_hazard_noops(parse("add r1, r2\nsub r3, r1"), distance=3)
    assert lines(p).count("noop") == 2


def test_emit_worked_words():
    code, image, listing = emit_binary(parse("noop"))
    assert code == [0x0000] and image.words == []
    code, _, listing = emit_binary(parse("jad 0x00FF\njuc r0, r0"))
    assert code == [0x80FF, 0x2700]
    assert listing.splitlines()[0].split()[:2] == ["0000", "80FF"]


def test_emit_rejects_unlowered():
    with pytest.raises(AsmError):
        emit_binary(parse("add eax, [c]\n.data\nc: .long 0"))
    with pytest.raises(AsmError):
        emit_binary(parse("mov eax, 1"))


def test_benchmark_assembles():
    res = assemble(benchmark_source())
    assert res.data.words[:4] == [1, 1, 0, 10000]
    assert res.symbols.data["uart"] == 0x018
    assert res.code[-2:] == [0x8000, 0x2700]
    assert "mov emt, dword ptr [i]" in res.listing


def test_file_outputs(tmp_path):
    res = assemble(busy_loop_source(3))
    paths = write_outputs(res, tmp_path / "busy")
    assert [p.suffix for p in paths] == [".bin", ".dat", ".lst"]
    code, data = read_image(tmp_path / "busy")
    assert code == res.code and data == res.data


def test_no_source_register_maps_to_scratch():
    res = assemble(random_program(7))
    for stmt in parse_assembly(random_program(7)).statements:
        assert all(not isinstance(o, Reg) or o.num < 14 for o in stmt.operands)
    assert any(isinstance(o, Reg) and o.num == 15 for s in res.program.statements for o in s.operands)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_passes_are_idempotent(seed):
    p = parse_assembly(random_program(seed))
    p, _ = pool_immediates(lower_branches(p))
    once = lower_mem_operands(p)
    assert lines(lower_mem_operands(once)) == lines(once)
    padded = insert_hazard_noops(once)
    assert lines(insert_hazard_noops(padded)) == lines(padded)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32))
def test_lowering_preserves_semantics(seed):
    src = random_program(seed)
    want = interpret_source(parse_assembly(src))
    res = assemble(src)
    got = reference_execute(res.code, res.data).state
    assert list(got.regs[:14]) == want.regs[:14]
    for addr, value in want.memory.items():
        assert got.data[addr] == value
