"""Memory hierarchy: MCU segmentation, caches, and memory-mapped devices.

CPU-visible data addresses are 9 bits wide.  The MCU prepends the two
segment bits of the active partition, giving an 11-bit physical address
into a 2048-word data cache.  Two windows bypass that rule: the device
window is decoded before translation, and the shared window always lands
in segment 3.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterable

from .isa import CODE_ADDR_BITS, DATA_ADDR_BITS, MASK32

SEGMENT_BITS = 2
MAX_PARTITIONS = 3
SHARED_SEGMENT = 3

DATA_SEGMENT_WORDS = 1 << DATA_ADDR_BITS  # 512
DATA_WORDS = DATA_SEGMENT_WORDS << SEGMENT_BITS  # 2048
CODE_SEGMENT_WORDS = 1 << CODE_ADDR_BITS  # 16384
CODE_WORDS = CODE_SEGMENT_WORDS << SEGMENT_BITS

NUM_SAMPLE_PORTS = 8


class Device(IntEnum):
    SAMPLE0 = 0x010
    SAMPLE1 = 0x011
    SAMPLE2 = 0x012
    SAMPLE3 = 0x013
    SAMPLE4 = 0x014
    SAMPLE5 = 0x015
    SAMPLE6 = 0x016
    SAMPLE7 = 0x017
    UART_TX = 0x018
    TIMER_LO = 0x019
    PARTITION_ID = 0x01A
    TIMER_HI = 0x01B
    RESERVED_C = 0x01C
    RESERVED_D = 0x01D
    RESERVED_E = 0x01E
    RESERVED_F = 0x01F


UART_TX = int(Device.UART_TX)
TIMER_LO = int(Device.TIMER_LO)
PARTITION_ID = int(Device.PARTITION_ID)
TIMER_HI = int(Device.TIMER_HI)


class MemoryFault(Exception):
    """Access that the hardware would never let through."""


class DeviceAccessError(MemoryFault):
    pass


class ImageError(ValueError):
    pass


@dataclass(frozen=True)
class RegionMap:
    device_lo: int = 0x010
    device_hi: int = 0x020  # exclusive
    shared_lo: int = 0x1C0
    shared_hi: int = 0x200  # exclusive
    static_base: int = 0x020

    def is_device(self, addr: int) -> bool:
        return self.device_lo <= addr < self.device_hi

    def is_shared(self, addr: int) -> bool:
        return self.shared_lo <= addr < self.shared_hi

    def reserved(self, lo: int, hi: int) -> str | None:
        """Name of the window overlapping [lo, hi), or None."""
        if lo < self.device_hi and hi > self.device_lo:
            return "device window"
        if lo < self.shared_hi and hi > self.shared_lo:
            return "shared window"
        return None


DEFAULT_REGIONS = RegionMap()


def segment_of(partition: int) -> int:
    if not 0 <= partition < MAX_PARTITIONS:
        raise MemoryFault(f"partition {partition} has no memory segment")
    return partition


def translate(addr: int, active: int | None, kind: str = "data",
              regions: RegionMap = DEFAULT_REGIONS) -> int | Device:
    """Map a CPU-visible address to a physical address or a device."""
    if kind == "instruction":
        if not 0 <= addr < CODE_SEGMENT_WORDS:
            raise MemoryFault(f"instruction address 0x{addr:X} exceeds {CODE_ADDR_BITS} bits")
        if active is None:
            raise MemoryFault("instruction fetch while idle")
        return (segment_of(active) << CODE_ADDR_BITS) | addr
    if kind != "data":
        raise ValueError(f"unknown access kind {kind!r}")
    if not 0 <= addr < DATA_SEGMENT_WORDS:
        raise MemoryFault(f"data address 0x{addr:X} exceeds {DATA_ADDR_BITS} bits")
    if regions.is_device(addr):
        return Device(addr)
    if active is None:
        raise MemoryFault("data access while idle")
    if regions.is_shared(addr):
        return (SHARED_SEGMENT << DATA_ADDR_BITS) | addr
    return (segment_of(active) << DATA_ADDR_BITS) | addr


@dataclass
class DataImage:
    """Initial data-cache contents of one partition: contiguous words from ``base``."""

    base: int = 0
    words: list[int] = field(default_factory=list)

    def check(self, regions: RegionMap = DEFAULT_REGIONS) -> None:
        end = self.base + len(self.words)
        if self.base < 0 or end > DATA_SEGMENT_WORDS:
            raise ImageError(f"data image [0x{self.base:03X}, 0x{end:03X}) exceeds the segment")
        if self.words:
            hit = regions.reserved(self.base, end)
            if hit:
                raise ImageError(f"data image [0x{self.base:03X}, 0x{end:03X}) overlaps the {hit}")

    def to_bytes(self) -> bytes:
        out = bytearray(len(self.words).to_bytes(4, "little"))
        out += self.base.to_bytes(4, "little")
        for w in self.words:
            out += (w & MASK32).to_bytes(4, "little")
        return bytes(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "DataImage":
        if len(blob) < 8:
            raise ImageError("data file shorter than its 8-byte header")
        count = int.from_bytes(blob[0:4], "little")
        base = int.from_bytes(blob[4:8], "little")
        if len(blob) != 8 + 4 * count:
            raise ImageError(f"data file holds {(len(blob) - 8) // 4} words, header says {count}")
        words = [int.from_bytes(blob[8 + 4 * i : 12 + 4 * i], "little") for i in range(count)]
        return cls(base, words)


class DeviceFile:
    """Timer, partition-id register, UART transmit port and sampling ports."""

    def __init__(self) -> None:
        self.ports = [0] * NUM_SAMPLE_PORTS
        self.timer_hi_latch = 0
        self.tx_log: list[tuple[int, int, int]] = []

    def inject_sample(self, port: int, value: int) -> None:
        if not 0 <= port < NUM_SAMPLE_PORTS:
            raise IndexError(f"sampling port {port} out of range 0..{NUM_SAMPLE_PORTS - 1}")
        self.ports[port] = value & MASK32

    def read(self, dev: int, partition: int, cycle: int) -> int:
        if dev == TIMER_LO:
            self.timer_hi_latch = (cycle >> 32) & MASK32
            return cycle & MASK32
        if dev == TIMER_HI:
            return self.timer_hi_latch
        if dev == PARTITION_ID:
            return partition
        if Device.SAMPLE0 <= dev <= Device.SAMPLE7:
            return self.ports[dev - Device.SAMPLE0]
        return 0

    def write(self, dev: int, value: int, partition: int, cycle: int) -> None:
        if dev != UART_TX:
            raise DeviceAccessError(f"write to read-only device {Device(dev).name} at 0x{dev:03X}")
        self.tx_log.append((cycle, partition, value & MASK32))


class InstructionMemory:
    """16-bit instruction cache; the core only has a read port."""

    def __init__(self) -> None:
        self._words = [0] * CODE_WORDS

    def load(self, partition: int, words: list[int]) -> None:
        if len(words) > CODE_SEGMENT_WORDS:
            raise ImageError(f"code image of {len(words)} words exceeds {CODE_SEGMENT_WORDS}")
        base = segment_of(partition) << CODE_ADDR_BITS
        self._words[base : base + CODE_SEGMENT_WORDS] = list(words) + [0] * (CODE_SEGMENT_WORDS - len(words))

    def fetch(self, addr: int, partition: int) -> int:
        return self._words[translate(addr, partition, "instruction")]

    def segment(self, partition: int) -> list[int]:
        base = segment_of(partition) << CODE_ADDR_BITS
        return self._words[base : base + CODE_SEGMENT_WORDS]


class DataMemory:
    """Dual-region data cache plus the device window."""

    def __init__(self, regions: RegionMap = DEFAULT_REGIONS) -> None:
        self.regions = regions
        self.words = [0] * DATA_WORDS
        self.devices = DeviceFile()
        self.uart_sink: Callable[[int, int, int], None] | None = None
        self.access_log: list[tuple[int, int | Device, str]] | None = None

    def load(self, partition: int, image: DataImage) -> None:
        image.check(self.regions)
        base = segment_of(partition) << DATA_ADDR_BITS
        self.words[base : base + DATA_SEGMENT_WORDS] = [0] * DATA_SEGMENT_WORDS
        for i, w in enumerate(image.words):
            self.words[base + image.base + i] = w & MASK32

    def read(self, addr: int, partition: int | None, cycle: int = 0) -> int:
        where = translate(addr, partition, "data", self.regions)
        if self.access_log is not None:
            self.access_log.append((partition, where, "r"))
        if isinstance(where, Device):
            return self.devices.read(where, partition, cycle)
        return self.words[where]

    def write(self, addr: int, value: int, partition: int | None, cycle: int = 0) -> None:
        where = translate(addr, partition, "data", self.regions)
        if self.access_log is not None:
            self.access_log.append((partition, where, "w"))
        if isinstance(where, Device):
            self.devices.write(where, value, partition, cycle)
            if self.uart_sink is not None:
                self.uart_sink(cycle, partition, value & MASK32)
            return
        self.words[where] = value & MASK32

    def segment(self, index: int) -> list[int]:
        base = index << DATA_ADDR_BITS
        return self.words[base : base + DATA_SEGMENT_WORDS]


def load_images(code: dict[int, list[int]], data: dict[int, DataImage] | None = None,
                regions: RegionMap = DEFAULT_REGIONS) -> tuple[InstructionMemory, DataMemory]:
    imem = InstructionMemory()
    dmem = DataMemory(regions)
    for part, words in code.items():
        imem.load(part, words)
    for part, image in (data or {}).items():
        dmem.load(part, image)
    return imem, dmem


def parse_samples(text: str) -> list[tuple[int, int, int]]:
    """Parse a ``cycle,port,value`` injection script, sorted by cycle (stable)."""
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), 1):
        if not row or not "".join(row).strip() or row[0].strip().startswith("#"):
            continue
        if row[0].strip() == "cycle":
            continue
        if len(row) != 3:
            raise ValueError(f"line {lineno}: expected cycle,port,value")
        cycle, port, value = (int(x.strip(), 0) for x in row)
        if not 0 <= port < NUM_SAMPLE_PORTS:
            raise ValueError(f"line {lineno}: sampling port {port} out of range")
        if cycle < 0:
            raise ValueError(f"line {lineno}: negative cycle")
        rows.append((cycle, port, value))
    rows.sort(key=lambda r: r[0])
    return rows


def format_samples(rows: Iterable[tuple[int, int, int]]) -> str:
    return "cycle,port,value\n" + "".join(f"{c},{p},{v}\n" for c, p, v in rows)
