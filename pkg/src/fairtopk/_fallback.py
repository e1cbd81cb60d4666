"""Pure numpy implementation of the Monte Carlo kernels.

Must stay bit-identical to ``_kernels.pyx``; both consume the same
counter-based uniform stream (see ``fairtopk.sampling``).
"""

import numpy as np

GAMMA = np.uint64(0x9E3779B97F4A7C15)
STREAM = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_INV53 = 1.0 / 9007199254740992.0

# rows per vectorised pass; bounds peak memory at roughly CHUNK * n * 9 bytes
CHUNK = 16384


def mix64(z):
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def stream_keys(seed, start, count):
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        base = mix64(np.uint64(seed) + GAMMA)
        return mix64(base + idx * STREAM)


def uniforms(keys, t):
    """Draw number ``t`` of each stream, as doubles in [0, 1)."""
    with np.errstate(over="ignore"):
        z = mix64(keys + np.uint64(t + 1) * GAMMA)
    return (z >> _S11).astype(np.float64) * _INV53


def _sample_rows(model, n, n_p, param, seed, start, count, depth):
    """Group labels for rows ``start .. start+count``; only the first ``depth`` are final."""
    keys = stream_keys(seed, start, count)
    if model == 0:
        out = np.zeros((count, n), dtype=np.uint8)
        out[:, :n_p] = 1
        rows = np.arange(count)
        for i in range(min(depth, n - 1)):
            u = uniforms(keys, i)
            r = i + (u * (n - i)).astype(np.int64)
            tmp = out[rows, r]
            out[rows, r] = out[:, i]
            out[:, i] = tmp
        return out
    out = np.zeros((count, n), dtype=np.uint8)
    rp = np.full(count, n_p, dtype=np.int64)
    rn = np.full(count, n - n_p, dtype=np.int64)
    for i in range(depth):
        u = uniforms(keys, i)
        if model == 1:
            hit = u < param
        else:
            w = param * rp.astype(np.float64)
            with np.errstate(invalid="ignore", divide="ignore"):
                hit = u < w / (w + rn.astype(np.float64))
        hit = np.where(rn == 0, True, hit)
        hit = np.where(rp == 0, False, hit)
        out[:, i] = hit
        rp -= hit
        rn -= ~hit
    return out


def sample_block(model, n, n_p, param, seed, start, count):
    parts = []
    for s in range(0, count, CHUNK):
        c = min(CHUNK, count - s)
        parts.append(_sample_rows(model, n, n_p, param, seed, start + s, c, n))
    if not parts:
        return np.zeros((0, n), dtype=np.uint8)
    return np.concatenate(parts)


def prefix_histogram(model, n, n_p, param, seed, start, count, k):
    hist = np.zeros((k, n_p + 1), dtype=np.int64)
    for s in range(0, count, CHUNK):
        c = min(CHUNK, count - s)
        x = _sample_rows(model, n, n_p, param, seed, start + s, c, k)[:, :k]
        y = np.cumsum(x, axis=1, dtype=np.int64)
        for j in range(k):
            hist[j] += np.bincount(y[:, j], minlength=n_p + 1)
    return hist


def min_lookup(model, n, n_p, param, seed, start, count, table):
    k = table.shape[0]
    out = np.empty(count, dtype=np.float64)
    cols = np.arange(k)
    for s in range(0, count, CHUNK):
        c = min(CHUNK, count - s)
        x = _sample_rows(model, n, n_p, param, seed, start + s, c, k)[:, :k]
        y = np.cumsum(x, axis=1, dtype=np.int64)
        out[s : s + c] = table[cols, y].min(axis=1)
    return out
