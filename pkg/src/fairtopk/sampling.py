"""Seeded generation of rankings under the null models.

Random numbers come from a counter-based construction on the SplitMix64
mixing function. Ranking ``i`` of a batch with master seed ``s`` reads
uniforms from its own substream::

    key_i   = mix64(mix64(s + G) + (i + 1) * C)
    u_{i,t} = (mix64(key_i + (t + 1) * G) >> 11) * 2**-53

with ``G = 0x9E3779B97F4A7C15`` and ``C = 0xD1B54A32D192ED03``. Every ranking
is therefore a pure function of ``(model, pop, seed, i)``: batches can be cut
into blocks and generated by any number of workers, in any order, with
identical output. The construction is fixed for the 0.x series.

Per-model draws:

* hypergeometric -- forward Fisher-Yates shuffle of ``n_p`` ones and
  ``n - n_p`` zeros; step ``i`` swaps position ``i`` with
  ``i + floor(u_{i} * (n - i))``.
* finite binomial -- position ``i`` is protected iff ``u_i < f`` while both
  groups are non-empty, then deterministic fill.
* weighted -- position ``i`` is protected iff ``u_i`` falls below the
  current weighted transition probability.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend
from .models import DomainError, NullModel, PopulationSpec, _check_model

__all__ = [
    "Ranking",
    "SeedSpec",
    "BLOCK",
    "sample_ranking",
    "sample_batch",
    "sample_matrix",
    "prefix_histogram",
    "min_table_lookup",
]

#: Rankings per work unit handed to a worker.
BLOCK = 1 << 16

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Ranking:
    """Group labels from the top position down, with optional candidate ids."""

    groups: tuple[int, ...]
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        groups = tuple(int(g) for g in self.groups)
        if any(g not in (0, 1) for g in groups):
            raise DomainError("ranking groups must be 0 or 1")
        object.__setattr__(self, "groups", groups)
        if self.ids is not None:
            ids = tuple(self.ids)
            if len(ids) != len(groups):
                raise DomainError(f"got {len(ids)} ids for {len(groups)} positions")
            if len(set(ids)) != len(ids):
                raise DomainError("candidate ids must be unique")
            object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return len(self.groups)

    @property
    def n_protected(self) -> int:
        return sum(self.groups)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.groups, dtype=np.int64)


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    substream_index: int = 0

    def __post_init__(self):
        if self.substream_index < 0:
            raise DomainError(f"substream index must be nonnegative, got {self.substream_index}")


def _seed64(seed: int) -> int:
    return int(seed) & _MASK64


def _blocks(start: int, count: int):
    for s in range(start, start + count, BLOCK):
        yield s, min(BLOCK, start + count - s)


def _run(fn, start, count, workers):
    jobs = list(_blocks(start, count))
    if workers <= 1 or len(jobs) <= 1:
        return [fn(s, c) for s, c in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def sample_matrix(
    model: NullModel,
    pop: PopulationSpec,
    count: int,
    master_seed: int,
    *,
    start: int = 0,
    workers: int = 1,
) -> np.ndarray:
    """Rankings ``start .. start+count`` as a ``(count, n)`` uint8 matrix."""
    _check_model(model)
    if count < 0 or start < 0:
        raise DomainError("count and start must be nonnegative")
    kern = _backend.kernels()
    seed = _seed64(master_seed)

    def block(s, c):
        return kern.sample_block(model.code, pop.n, pop.n_p, model.param, seed, s, c)

    parts = _run(block, start, count, workers)
    if not parts:
        return np.zeros((0, pop.n), dtype=np.uint8)
    return np.concatenate(parts)


def sample_ranking(model: NullModel, pop: PopulationSpec, seed: SeedSpec) -> Ranking:
    """One ranking drawn from substream ``seed.substream_index``."""
    row = sample_matrix(model, pop, 1, seed.master_seed, start=seed.substream_index)[0]
    return Ranking(tuple(row.tolist()))


def sample_batch(
    model: NullModel,
    pop: PopulationSpec,
    count: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> list[Ranking]:
    """``count`` rankings; ranking ``i`` comes from substream ``i``."""
    if count < 1:
        raise DomainError(f"batch size must be at least 1, got {count}")
    mat = sample_matrix(model, pop, count, master_seed, workers=workers)
    return [Ranking(tuple(r)) for r in mat.tolist()]


def prefix_histogram(
    model: NullModel,
    pop: PopulationSpec,
    k: int,
    count: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> np.ndarray:
    """``hist[j-1, y]`` = number of rankings in the batch with ``y_j == y``."""
    kern = _backend.kernels()
    seed = _seed64(master_seed)

    def block(s, c):
        return kern.prefix_histogram(model.code, pop.n, pop.n_p, model.param, seed, s, c, k)

    return sum(_run(block, 0, count, workers), np.zeros((k, pop.n_p + 1), dtype=np.int64))


def min_table_lookup(
    model: NullModel,
    pop: PopulationSpec,
    table: np.ndarray,
    count: int,
    master_seed: int,
    *,
    workers: int = 1,
) -> np.ndarray:
    """``min_j table[j-1, y_j]`` over the first ``table.shape[0]`` prefixes of every ranking."""
    kern = _backend.kernels()
    seed = _seed64(master_seed)
    table = np.ascontiguousarray(table, dtype=np.float64)
    if table.shape[1] != pop.n_p + 1:
        raise DomainError(f"table needs n_p+1={pop.n_p + 1} columns, got {table.shape[1]}")

    def block(s, c):
        return kern.min_lookup(model.code, pop.n, pop.n_p, model.param, seed, s, c, table)

    parts = _run(block, 0, count, workers)
    return np.concatenate(parts) if parts else np.zeros(0)

