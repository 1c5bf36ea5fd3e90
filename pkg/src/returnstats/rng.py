"""Deterministic random streams.

Streams are counter-based (Philox) and derived from (seed, stage name,
stream index) only, so the worker count and execution order can never change
what a stream produces.
"""

import hashlib

import numpy as np


def stream(seed, stage, index=0):
    """Independent generator for one (seed, stage, stream-index) identity."""
    ident = f"{int(seed)}:{stage}:{int(index)}".encode()
    key = np.frombuffer(hashlib.sha256(ident).digest()[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def draw_start(gen, low=1e-6, high=1.0):
    """Uniform orbit seed in [low, high); low keeps clear of the neutral
    fixed point at 0, where escape times are floating-point sensitive."""
    return float(gen.uniform(low, high))
