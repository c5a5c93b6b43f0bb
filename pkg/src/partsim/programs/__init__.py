"""Bundled assembly programs."""

from __future__ import annotations

import re
from importlib import resources


def source(name: str) -> str:
    return resources.files(__name__).joinpath(f"{name}.s").read_text()


def _set_word(text: str, symbol: str, value: int) -> str:
    pat = re.compile(rf"^({re.escape(symbol)}:\s*\n\s*\.long\s+)\S+", re.MULTILINE)
    out, n = pat.subn(rf"\g<1>{int(value)}", text)
    if n != 1:
        raise ValueError(f"no .long initializer for {symbol!r}")
    return out


def benchmark_source(threshold: int = 10000) -> str:
    """The uniform-execution benchmark with its reporting threshold."""
    if threshold < 2:
        raise ValueError("threshold must be at least 2")
    return _set_word(source("benchmark"), "threshold", threshold)


def busy_loop_source(count: int) -> str:
    """Start marker, ``count`` loop iterations, end marker, then a spin."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return _set_word(source("busy_loop"), "count", count)
