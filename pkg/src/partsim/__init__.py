"""Cycle-accurate simulator and toolchain for a time-partitioned single-core processor."""

__version__ = "0.1.0"
