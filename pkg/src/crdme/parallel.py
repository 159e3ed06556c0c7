"""Replicate fan-out with results independent of the worker count."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .streams import stream

__all__ = ["map_replicates"]

BLOCK = 250


def _run_block(sampler, payload, master_seed, start, stop):
    times = np.empty(stop - start)
    cens = np.zeros(stop - start, dtype=bool)
    for r in range(start, stop):
        t, c = sampler(payload, stream(master_seed, r))
        times[r - start] = t
        cens[r - start] = c
    return times, cens


def map_replicates(sampler, payload, R: int, master_seed: int, workers: int = 1,
                   block: int = BLOCK):
    """Evaluate ``sampler(payload, rng)`` for replicates ``0..R-1``.

    ``sampler`` must be a module-level function returning ``(time, censored)``.
    Replicates are cut into fixed blocks and reassembled in replicate
    order, so the output is the same for any ``workers``.
    """
    R = int(R)
    if R < 0:
        raise ValueError("replicate count must be nonnegative")
    spans = [(s, min(s + block, R)) for s in range(0, R, block)]
    if workers <= 1 or len(spans) <= 1:
        parts = [_run_block(sampler, payload, master_seed, s, e) for s, e in spans]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futs = [ex.submit(_run_block, sampler, payload, master_seed, s, e) for s, e in spans]
            parts = [f.result() for f in futs]
    if not parts:
        return np.empty(0), np.zeros(0, dtype=bool)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
