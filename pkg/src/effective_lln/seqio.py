"""Seeded sequence generation, sequence files, and trial-parallel helpers.

Generator: Philox4x64-10 (numpy's ``Philox``), a counter-based generator.
Every trial gets its own key, derived as
``SeedSequence(seed, spawn_key=(stream, trial)).generate_state(2, uint64)``,
so trial i is reproducible on its own and results do not depend on how
trials are split across workers.

A position takes symbol i when T_{i-1} <= w < T_i for its raw 64-bit word w,
where T_i = ceil(C_i * 2^64) and C_i is the exact cumulative probability of
symbols 0..i.  Each position is off from the exact law by at most
|alphabet| * 2^-64 in total variation.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .core import FiniteProbabilitySpace, SequencePrefix, SymbolError

TWO64 = 1 << 64


def trial_key(seed: int, trial: int = 0, stream: int = 0) -> np.ndarray:
    return np.random.SeedSequence(seed, spawn_key=(stream, trial)).generate_state(2, np.uint64)


def raw_words(seed: int, count: int, trial: int = 0, stream: int = 0) -> np.ndarray:
    """The first ``count`` 64-bit outputs of the trial's Philox stream."""
    return np.random.Philox(key=trial_key(seed, trial, stream)).random_raw(count).astype(np.uint64)


def inversion_thresholds(cumulative: Sequence[Fraction]) -> np.ndarray:
    """ceil(C_i * 2^64) for every cumulative value below 1, as uint64."""
    out = []
    for c in cumulative:
        t = math.ceil(Fraction(c) * TWO64)
        if t < TWO64:
            out.append(t)
    return np.array(out, dtype=np.uint64)


@lru_cache(maxsize=64)
def _thresholds(probs: tuple) -> np.ndarray:
    cum, acc = [], Fraction(0)
    for p in probs:
        acc += Fraction(p)
        cum.append(acc)
    if acc != 1:
        raise ValueError("probabilities must sum to 1")
    return inversion_thresholds(cum)


def sample_indices(probs: Sequence[Fraction], length: int, seed: int, trial: int = 0, stream: int = 0) -> np.ndarray:
    """Symbol indices 0..len(probs)-1 drawn by exact-threshold inversion."""
    if length < 0:
        raise ValueError("length must be nonnegative")
    thresholds = _thresholds(tuple(Fraction(p) for p in probs))
    words = raw_words(seed, length, trial, stream)
    idx = np.searchsorted(thresholds, words, side="right")
    return idx.astype(np.uint8 if len(probs) <= 256 else np.uint16)


def sample_sequence(P: FiniteProbabilitySpace, length: int, seed: int, trial: int = 0, stream: int = 0) -> SequencePrefix:
    """A prefix of length ``length`` drawn from the Bernoulli measure of P."""
    if P.mode != "exact":
        raise ValueError("sampling needs exact probabilities")
    return SequencePrefix.from_array(P.names, sample_indices(P.probs, length, seed, trial, stream))


# --------------------------------------------------------------------------
# files


def write_sequence(path, s: SequencePrefix, mode: str = "tokens"):
    """Token mode: one symbol name per line (UTF-8).  Byte mode: one byte per symbol index."""
    if mode == "tokens":
        with open(path, "w", encoding="utf-8") as fh:
            names = s.names
            fh.write("".join(names[i] + "\n" for i in s.array.tolist()))
    elif mode == "bytes":
        if len(s.names) > 256:
            raise ValueError("byte mode needs an alphabet of at most 256 symbols")
        with open(path, "wb") as fh:
            fh.write(s.array.astype(np.uint8).tobytes())
    else:
        raise ValueError(f"unknown sequence file mode {mode!r}")


def read_sequence(path, manifest, mode: str = "tokens") -> SequencePrefix:
    """Inverse of write_sequence; unknown tokens raise SymbolError naming the line."""
    P = manifest if isinstance(manifest, FiniteProbabilitySpace) else FiniteProbabilitySpace.load(manifest)
    if mode == "bytes":
        if len(P) > 256:
            raise ValueError("byte mode needs an alphabet of at most 256 symbols")
        data = np.fromfile(path, dtype=np.uint8)
        bad = np.flatnonzero(data >= len(P))
        if bad.size:
            raise SymbolError(f"byte {int(data[bad[0]])} at offset {int(bad[0])} is not a symbol index")
        return SequencePrefix.from_array(P.names, data)
    if mode != "tokens":
        raise ValueError(f"unknown sequence file mode {mode!r}")
    index = {name: i for i, name in enumerate(P.names)}
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            token = line.rstrip("\n").rstrip("\r")
            try:
                out.append(index[token])
            except KeyError:
                raise SymbolError(f"line {lineno}: token {token!r} not in manifest") from None
    return SequencePrefix.from_array(P.names, np.array(out, dtype=np.int64))


# --------------------------------------------------------------------------
# trial-parallel map


def _run_chunk(args):
    fn, lo, hi = args
    return [fn(i) for i in range(lo, hi)]


def map_trials(fn: Callable[[int], object], trials: int, workers: int = 1, chunk: int | None = None) -> list:
    """[fn(0), ..., fn(trials-1)] in order, optionally across worker processes.

    ``fn`` must be picklable (a module-level function or functools.partial).
    Output is identical for every worker count.
    """
    if trials <= 0:
        return []
    workers = max(1, min(workers or 1, trials))
    if workers == 1:
        return [fn(i) for i in range(trials)]
    chunk = chunk or max(1, math.ceil(trials / (4 * workers)))
    jobs = [(fn, lo, min(lo + chunk, trials)) for lo in range(0, trials, chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, jobs))
    return [x for part in parts for x in part]
