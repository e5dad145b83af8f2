"""Seed derivation: a master seed fans out to per-run seeds with splitmix64."""
from __future__ import annotations

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _key(k) -> int:
    if isinstance(k, str):
        raw = k.encode("utf-8")
        h = len(raw)
        for i in range(0, len(raw), 8):
            h = splitmix64(h ^ int.from_bytes(raw[i : i + 8], "little"))
        return h
    if isinstance(k, float):
        return int(round(k * 1000)) & MASK64
    return int(k) & MASK64


def derive(master: int, *keys) -> int:
    """Deterministic 63-bit seed for the tuple ``keys`` under ``master``.

    ``state = splitmix64(state ^ splitmix64(key))`` is folded over the keys;
    strings are hashed 8 UTF-8 bytes at a time and floats are
    rounded to thousandths.
    """
    state = splitmix64(int(master) & MASK64)
    for k in keys:
        state = splitmix64(state ^ splitmix64(_key(k)))
    return state >> 1
