import pytest
from hypothesis import given, strategies as st

from partsim.memsys import (DATA_WORDS, DEFAULT_REGIONS, DataImage, DataMemory, Device, DeviceAccessError, ImageError,
                            InstructionMemory, MemoryFault, format_samples, parse_samples, translate)


def test_segment_prefix():
    assert translate(0x020, 0) == 0x020
    assert translate(0x020, 1) == 0x220
    assert translate(0x1BF, 2) == 0x5BF


def test_shared_window_ignores_partition():
    for p in range(3):
        assert translate(0x1C0, p) == 0x7C0
        assert translate(0x1FF, p) == 0x7FF


def test_device_window_decoded_first():
    assert translate(0x018, 2) is Device.UART_TX
    assert translate(0x019, None) is Device.TIMER_LO


def test_out_of_range_and_idle():
    with pytest.raises(MemoryFault):
        translate(0x200, 0)
    with pytest.raises(MemoryFault):
        translate(0x020, None)
    with pytest.raises(MemoryFault):
        translate(0x020, 3)


def test_instruction_translation():
    assert translate(5, 1, "instruction") == (1 << 14) | 5
    with pytest.raises(MemoryFault):
        translate(1 << 14, 0, "instruction")


@given(st.integers(0, 511), st.integers(0, 2))
def test_private_addresses_stay_in_segment(addr, part):
    where = translate(addr, part)
    if isinstance(where, Device):
        assert DEFAULT_REGIONS.is_device(addr)
    elif DEFAULT_REGIONS.is_shared(addr):
        assert where >> 9 == 3
    else:
        assert where >> 9 == part
    assert isinstance(where, Device) or 0 <= where < DATA_WORDS


def test_timer_latches_high_word():
    mem = DataMemory()
    cycle = (7 << 32) | 123
    assert mem.read(0x019, 0, cycle) == 123
    assert mem.read(0x01B, 0, cycle + 5) == 7


def test_partition_id_and_samples():
    mem = DataMemory()
    assert mem.read(0x01A, 2) == 2
    mem.devices.inject_sample(3, 99)
    assert mem.read(0x013, 0) == 99
    assert mem.read(0x013, 1) == 99  # readable by everyone, value persists


def test_device_writes():
    mem = DataMemory()
    seen = []
    mem.uart_sink = lambda c, p, v: seen.append((c, p, v))
    mem.write(0x018, -1, 1, 42)
    assert seen == [(42, 1, 0xFFFFFFFF)]
    assert mem.devices.tx_log == seen
    for addr in (0x010, 0x019, 0x01C):
        with pytest.raises(DeviceAccessError):
            mem.write(addr, 1, 0)
    assert mem.read(0x01D, 0) == 0


def test_partitions_do_not_alias():
    mem = DataMemory()
    mem.write(0x030, 1, 0)
    mem.write(0x030, 2, 1)
    assert mem.read(0x030, 0) == 1
    assert mem.read(0x030, 1) == 2
    mem.write(0x1C5, 9, 2)
    assert mem.read(0x1C5, 0) == 9


def test_access_log():
    mem = DataMemory()
    mem.access_log = []
    mem.read(0x040, 1)
    mem.write(0x018, 0, 1)
    assert mem.access_log == [(1, 0x240, "r"), (1, Device.UART_TX, "w")]


def test_data_image_bytes_and_checks():
    img = DataImage(0x020, [1, 0xFFFFFFFF, 3])
    blob = img.to_bytes()
    assert blob[:8] == (3).to_bytes(4, "little") + (0x20).to_bytes(4, "little")
    assert DataImage.from_bytes(blob) == img
    with pytest.raises(ImageError):
        DataImage.from_bytes(blob[:-1])
    with pytest.raises(ImageError):
        DataImage(0x010, [1]).check()
    with pytest.raises(ImageError):
        DataImage(0x1BF, [1, 2]).check()
    DataImage(0x1BF, [1]).check()


def test_instruction_memory_is_per_partition():
    imem = InstructionMemory()
    imem.load(0, [1, 2])
    imem.load(2, [3])
    assert imem.fetch(0, 0) == 1
    assert imem.fetch(0, 1) == 0
    assert imem.fetch(0, 2) == 3


def test_sample_script_round_trip():
    rows = [(0, 1, 5), (3, 0, 7)]
    assert parse_samples(format_samples(rows)) == rows
    assert parse_samples("# comment\n10,2,0x10\n5,1,1\n") == [(5, 1, 1), (10, 2, 16)]
    with pytest.raises(ValueError):
        parse_samples("1,9,0\n")
