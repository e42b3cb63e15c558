"""Uniform sampling from M(r, c): exact sequential, geometric rejection, swap-chain MCMC.

Randomness comes from numpy's counter-based Philox generator.  Independent
streams are derived from ``(seed, stream id)`` through ``SeedSequence``, so a
trial's stream does not depend on how work is split between workers.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterator

import numba
import numpy as np

from margin_phase.core import MarginError, Margins
from margin_phase.counting import TableCounter

METHODS = ("exact", "rejection", "mcmc")


class SamplerExhausted(RuntimeError):
    def __init__(self, tries: int):
        super().__init__(f"no table accepted in {tries} geometric draws")
        self.tries = tries


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox generator for substream ``stream`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SamplerConfig:
    method: str = "mcmc"
    seed: int = 0
    mcmc_burnin: int | None = None  # None: 10 * m * n * max margin
    mcmc_thin: int | None = None  # None: m * n
    rejection_max_tries: int = 10**8
    rejection_batch: int = 4096
    chains: int = 1  # independent streams a sample budget is split across

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown sampler {self.method!r}; expected one of {METHODS}")
        if self.mcmc_burnin is not None and self.mcmc_burnin < 1:
            raise ValueError("burnin must be >= 1")
        if self.mcmc_thin is not None and self.mcmc_thin < 1:
            raise ValueError("thin must be >= 1")
        if self.rejection_max_tries < 1 or self.rejection_batch < 1 or self.chains < 1:
            raise ValueError("max_tries, batch and chains must be >= 1")

    def burnin_for(self, margins: Margins) -> int:
        if self.mcmc_burnin is not None:
            return self.mcmc_burnin
        return 10 * margins.m * margins.n * max(max(margins.rows), 1)

    def thin_for(self, margins: Margins) -> int:
        return self.mcmc_thin if self.mcmc_thin is not None else margins.m * margins.n

    def to_dict(self) -> dict:
        return asdict(self)


# --- geometric matrices and rejection -------------------------------------


def sample_geom_matrix(z, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Independent Geom(z_ij) entries by inverse CDF: floor(ln U / ln(z/(1+z)))."""
    z = np.asarray(z, dtype=float)
    shape = z.shape if size is None else (size,) + z.shape
    u = 1.0 - rng.random(shape)  # in (0, 1]
    log_ratio = -np.log1p(1.0 / z)
    return np.floor(np.log(u) / log_ratio).astype(np.int64)


def sample_uniform_rejection(
    margins: Margins, z, cfg: SamplerConfig, rng: np.random.Generator
) -> tuple[np.ndarray, int]:
    """One uniform table by conditioning a geometric matrix on its margins.

    Returns the accepted table and the number of matrices drawn.
    """
    table, tries = next(_rejection_stream(margins, z, cfg, rng))
    return table, tries


def _rejection_stream(margins: Margins, z, cfg: SamplerConfig, rng: np.random.Generator):
    z = np.asarray(z, dtype=float)
    if z.shape != margins.shape or np.any(z <= 0):
        raise ValueError("z must be a positive matrix shaped like the margins")
    rows = np.asarray(margins.rows, dtype=np.int64)
    cols = np.asarray(margins.cols, dtype=np.int64)
    tries = 0
    while True:
        batch = sample_geom_matrix(z, rng, cfg.rejection_batch)
        ok = (batch.sum(axis=2) == rows).all(axis=1) & (batch.sum(axis=1) == cols).all(axis=1)
        last = 0
        for idx in np.flatnonzero(ok):
            tries += int(idx) + 1 - last
            last = int(idx) + 1
            yield batch[idx].copy(), tries
            tries = 0
        tries += cfg.rejection_batch - last
        if tries >= cfg.rejection_max_tries:
            raise SamplerExhausted(tries)


def rejection_samples(margins: Margins, z, cfg: SamplerConfig, rng, count: int) -> Iterator[np.ndarray]:
    stream = _rejection_stream(margins, z, cfg, rng)
    for _ in range(count):
        yield next(stream)[0]


# --- exact sequential sampler ----------------------------------------------


def _randbelow(rng: np.random.Generator, bound: int) -> int:
    """Uniform integer in [0, bound) for arbitrarily large ``bound``."""
    if bound < 2**62:
        return int(rng.integers(0, bound))
    nbits = bound.bit_length()
    nbytes = (nbits + 7) // 8
    while True:
        x = int.from_bytes(rng.bytes(nbytes), "little") >> (8 * nbytes - nbits)
        if x < bound:
            return x


def _column_vectors(resid, c):
    """All vectors x with 0 <= x_i <= resid_i and sum x = c."""
    m = len(resid)
    suffix = [0] * (m + 1)
    for i in range(m - 1, -1, -1):
        suffix[i] = suffix[i + 1] + resid[i]
    x = [0] * m

    def rec(i, left):
        if i == m:
            if left == 0:
                yield tuple(x)
            return
        for t in range(max(0, left - suffix[i + 1]), min(resid[i], left) + 1):
            x[i] = t
            yield from rec(i + 1, left - t)
        x[i] = 0

    yield from rec(0, c)


class ExactSampler:
    """Column-by-column sampler weighted by completion counts.

    Each column's entry vector is drawn with probability proportional to
    the number of ways to complete the remaining columns, which makes the
    output exactly uniform.  Transition tables are cached per state.
    """

    def __init__(self, margins: Margins, budget: int | None = None):
        self.margins = margins
        self.counter = TableCounter(margins, budget)
        self.total = self.counter.total()
        self._cache: dict = {}

    def _transitions(self, j, resid):
        key = (j, resid)
        got = self._cache.get(key)
        if got is None:
            moves, cum, acc = [], [], 0
            for x in _column_vectors(resid, self.counter.cols[j]):
                new = tuple(r - t for r, t in zip(resid, x))
                w = self.counter.count(j + 1, new) if j + 1 < len(self.counter.cols) else int(not any(new))
                if w:
                    acc += w
                    moves.append((x, new))
                    cum.append(acc)
            got = (moves, cum, acc)
            self._cache[key] = got
        return got

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        m, n = self.margins.shape
        table = np.zeros((m, n), dtype=np.int64)
        resid = tuple(self.margins.rows)
        if self.total == 0:
            raise MarginError("no table has these margins")
        for j, col in enumerate(self.counter.col_order):
            moves, cum, acc = self._transitions(j, resid)
            u = _randbelow(rng, acc)
            lo, hi = 0, len(cum) - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if cum[mid] > u:
                    hi = mid
                else:
                    lo = mid + 1
            x, resid = moves[lo]
            table[:, col] = x
        return table


def sample_uniform_exact(margins: Margins, rng: np.random.Generator, budget: int | None = None) -> np.ndarray:
    return ExactSampler(margins, budget).sample(rng)


def exact_samples(margins: Margins, rng, count: int, budget: int | None = None) -> Iterator[np.ndarray]:
    sampler = ExactSampler(margins, budget)
    for _ in range(count):
        yield sampler.sample(rng)


# --- swap-chain MCMC -------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _swap_steps(table, codes, out, thin):
    """Apply swap moves; after every ``thin`` moves copy the state into ``out``.

    A code packs an ordered pair of distinct rows, an ordered pair of
    distinct columns and a sign.  Illegal moves hold.
    """
    m, n = table.shape
    snap = 0
    for step in range(codes.shape[0]):
        code = codes[step]
        sign = code % 2
        code //= 2
        b = code % (n - 1)
        code //= n - 1
        j1 = code % n
        code //= n
        a = code % (m - 1)
        i1 = code // (m - 1)
        i2 = a + 1 if a >= i1 else a
        j2 = b + 1 if b >= j1 else b
        if i1 > i2:
            i1, i2 = i2, i1
        if j1 > j2:
            j1, j2 = j2, j1
        if sign == 1:
            # +1 on the diagonal (i1,j1),(i2,j2)
            if table[i1, j2] > 0 and table[i2, j1] > 0:
                table[i1, j1] += 1
                table[i2, j2] += 1
                table[i1, j2] -= 1
                table[i2, j1] -= 1
        else:
            if table[i1, j1] > 0 and table[i2, j2] > 0:
                table[i1, j1] -= 1
                table[i2, j2] -= 1
                table[i1, j2] += 1
                table[i2, j1] += 1
        if thin > 0 and (step + 1) % thin == 0:
            out[snap] = table
            snap += 1
    return snap


def _n_codes(m: int, n: int) -> int:
    return m * (m - 1) * n * (n - 1) * 2


def northwest_corner(margins: Margins) -> np.ndarray:
    rows = list(margins.rows)
    cols = list(margins.cols)
    table = np.zeros(margins.shape, dtype=np.int64)
    i = j = 0
    while i < margins.m and j < margins.n:
        x = min(rows[i], cols[j])
        table[i, j] = x
        rows[i] -= x
        cols[j] -= x
        if rows[i] == 0:
            i += 1
        else:
            j += 1
    return table


def mcmc_swap_step(table: np.ndarray, rng: np.random.Generator, steps: int = 1) -> np.ndarray:
    """Return a copy of ``table`` after ``steps`` swap moves."""
    table = np.array(table, dtype=np.int64, copy=True)
    m, n = table.shape
    if m < 2 or n < 2:
        return table
    codes = rng.integers(0, _n_codes(m, n), size=steps, dtype=np.int64)
    _swap_steps(table, codes, np.empty((0, m, n), dtype=np.int64), 0)
    return table


def apply_swap_code(table: np.ndarray, code: int) -> np.ndarray:
    """Deterministic single move, mainly for tests."""
    table = np.array(table, dtype=np.int64, copy=True)
    _swap_steps(table, np.array([code], dtype=np.int64), np.empty((0,) + table.shape, dtype=np.int64), 0)
    return table


def encode_swap(shape, i1: int, i2: int, j1: int, j2: int, sign: int) -> int:
    """Inverse of the code layout used by ``_swap_steps``; ``sign`` is +1 or -1."""
    m, n = shape
    a = i2 - 1 if i2 > i1 else i2
    b = j2 - 1 if j2 > j1 else j2
    return (((i1 * (m - 1) + a) * n + j1) * (n - 1) + b) * 2 + (1 if sign > 0 else 0)


class SwapChain:
    """Swap-move chain started from the north-west corner table."""

    def __init__(self, margins: Margins, rng: np.random.Generator, start: np.ndarray | None = None):
        self.margins = margins
        self.rng = rng
        self.table = northwest_corner(margins) if start is None else np.array(start, dtype=np.int64)
        m, n = margins.shape
        self.movable = m >= 2 and n >= 2
        self.ncodes = _n_codes(m, n) if self.movable else 0
        self.steps = 0

    def run(self, steps: int, chunk: int = 1 << 20) -> None:
        if not self.movable:
            return
        empty = np.empty((0,) + self.table.shape, dtype=np.int64)
        left = steps
        while left > 0:
            size = min(chunk, left)
            codes = self.rng.integers(0, self.ncodes, size=size, dtype=np.int64)
            _swap_steps(self.table, codes, empty, 0)
            left -= size
        self.steps += steps

    def samples(self, count: int, thin: int, block: int = 256) -> Iterator[np.ndarray]:
        """Yield ``count`` states, ``thin`` moves apart."""
        if not self.movable:
            for _ in range(count):
                yield self.table.copy()
            return
        done = 0
        while done < count:
            size = min(block, count - done)
            out = np.empty((size,) + self.table.shape, dtype=np.int64)
            codes = self.rng.integers(0, self.ncodes, size=size * thin, dtype=np.int64)
            _swap_steps(self.table, codes, out, thin)
            self.steps += size * thin
            done += size
            yield from out


def sample_uniform_mcmc(
    margins: Margins, cfg: SamplerConfig, rng: np.random.Generator, count: int
) -> Iterator[np.ndarray]:
    """``count`` thinned states after burn-in, from a single chain."""
    chain = SwapChain(margins, rng)
    chain.run(cfg.burnin_for(margins))
    yield from chain.samples(count, cfg.thin_for(margins))


# --- common entry point ----------------------------------------------------


def chain_shares(count: int, chains: int) -> list[int]:
    """Split ``count`` draws over ``chains`` streams, earlier streams first."""
    base, extra = divmod(count, chains)
    return [base + (1 if c < extra else 0) for c in range(chains)]


def chain_samples(
    margins: Margins, cfg: SamplerConfig, count: int, stream: int = 0, chain: int = 0, z=None
) -> Iterator[np.ndarray]:
    """``count`` tables from one independent stream ``(cfg.seed, stream, chain)``."""
    rng = make_rng(cfg.seed, stream, chain)
    if cfg.method == "exact":
        yield from exact_samples(margins, rng, count)
    elif cfg.method == "rejection":
        if z is None:
            from margin_phase.typical import solve_typical

            z = solve_typical(margins).z
        yield from rejection_samples(margins, z, cfg, rng, count)
    else:
        yield from sample_uniform_mcmc(margins, cfg, rng, count)


def uniform_samples(
    margins: Margins, cfg: SamplerConfig, count: int, stream: int = 0, z=None
) -> Iterator[np.ndarray]:
    """``count`` tables from the method in ``cfg``, seeded by (cfg.seed, stream).

    The count is split across ``cfg.chains`` independent streams; for MCMC
    each chain pays its own burn-in.
    """
    for c, share in enumerate(chain_shares(count, cfg.chains)):
        if share:
            yield from chain_samples(margins, cfg, share, stream, c, z)
