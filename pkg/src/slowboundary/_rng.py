"""Seed plumbing shared by the Monte Carlo routines."""

import numpy as np


def stream(seed, *key):
    """Generator keyed by ``(seed, *key)``; distinct keys give independent streams."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def streams(seed, n, *prefix):
    return [stream(seed, *prefix, i) for i in range(n)]


def as_generator(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
