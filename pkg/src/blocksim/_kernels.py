"""numba kernels for gate application and in-memory bit permutation.

Every kernel works on a half-open range of work items so that a parallel
driver can hand one contiguous range to each thread.  Each amplitude is
written by exactly one work item, which keeps results bitwise identical for
any thread count.
"""

from __future__ import annotations

import os

import numba

# omp is the layer that is safe to call from several Python threads; fall back
# to the others when it is unavailable.
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

import numpy as np  # noqa: E402
from numba import njit, prange  # noqa: E402

_CACHE = os.environ.get("BLOCKSIM_NO_JIT_CACHE") is None


@njit(nogil=True, cache=_CACHE)
def _spread(j, pos):
    """Insert a zero bit at every (ascending) position in ``pos``."""
    idx = j
    for i in range(pos.shape[0]):
        p = pos[i]
        low = idx & ((np.int64(1) << p) - 1)
        idx = ((idx >> p) << (p + 1)) | low
    return idx


@njit(nogil=True, cache=_CACHE)
def _dense_generic(state, base, j_lo, j_hi, pos, offs, ctrl, data, buf):
    dim = offs.shape[0]
    for j in range(j_lo, j_hi):
        idx = base | _spread(j, pos) | ctrl
        for k in range(dim):
            buf[k] = state[idx + offs[k]]
        for r in range(dim):
            acc = 0j
            row = r * dim
            for k in range(dim):
                acc += data[row + k] * buf[k]
            state[idx + offs[r]] = acc


@njit(nogil=True, cache=_CACHE)
def gate_span(state, base, j_lo, j_hi, pos, offs, ctrl, data, is_diag, buf):
    """Apply one gate to the groups ``j_lo..j_hi`` above ``base``.

    ``pos`` holds the gate's sorted qubit positions (targets and controls),
    ``offs`` the index offset of every local basis state of the targets and
    ``data`` either the diagonal or the row-major target matrix.  One- and
    two-target gates get unrolled loops; the arithmetic is the same as the
    generic path, term for term.
    """
    dim = offs.shape[0]
    if is_diag:
        if dim == 2:
            o1 = offs[1]
            d0, d1 = data[0], data[1]
            for j in range(j_lo, j_hi):
                idx = base | _spread(j, pos) | ctrl
                state[idx] *= d0
                state[idx + o1] *= d1
        else:
            for j in range(j_lo, j_hi):
                idx = base | _spread(j, pos) | ctrl
                for k in range(dim):
                    state[idx + offs[k]] *= data[k]
    elif dim == 2:
        o1 = offs[1]
        m00, m01, m10, m11 = data[0], data[1], data[2], data[3]
        for j in range(j_lo, j_hi):
            i0 = base | _spread(j, pos) | ctrl
            i1 = i0 + o1
            a = state[i0]
            b = state[i1]
            acc = 0j
            acc += m00 * a
            acc += m01 * b
            state[i0] = acc
            acc = 0j
            acc += m10 * a
            acc += m11 * b
            state[i1] = acc
    elif dim == 4:
        o1, o2, o3 = offs[1], offs[2], offs[3]
        for j in range(j_lo, j_hi):
            i0 = base | _spread(j, pos) | ctrl
            a0 = state[i0]
            a1 = state[i0 + o1]
            a2 = state[i0 + o2]
            a3 = state[i0 + o3]
            for r in range(4):
                acc = 0j
                acc += data[4 * r] * a0
                acc += data[4 * r + 1] * a1
                acc += data[4 * r + 2] * a2
                acc += data[4 * r + 3] * a3
                if r == 0:
                    state[i0] = acc
                elif r == 1:
                    state[i0 + o1] = acc
                elif r == 2:
                    state[i0 + o2] = acc
                else:
                    state[i0 + o3] = acc
    else:
        _dense_generic(state, base, j_lo, j_hi, pos, offs, ctrl, data, buf)


@njit(nogil=True, cache=_CACHE)
def block_chunks(state, chunk_bits, ch_lo, ch_hi, kinds, pos_ptr, pos, off_ptr, offs, ctrl,
                 data_ptr, data, buf):
    """Run every gate of a packed block on chunks ``ch_lo..ch_hi`` in turn."""
    for ch in range(ch_lo, ch_hi):
        base = np.int64(ch) << chunk_bits
        for g in range(kinds.shape[0]):
            gp = pos[pos_ptr[g]:pos_ptr[g + 1]]
            count = np.int64(1) << (chunk_bits - gp.shape[0])
            gate_span(state, base, 0, count, gp, offs[off_ptr[g]:off_ptr[g + 1]], ctrl[g],
                      data[data_ptr[g]:data_ptr[g + 1]], kinds[g] == 1, buf)


@njit(parallel=True, cache=_CACHE)
def block_parallel(state, chunk_bits, kinds, pos_ptr, pos, off_ptr, offs, ctrl, data_ptr, data,
                   n_threads, buf_len):
    n_chunks = state.shape[0] >> chunk_bits
    per = (n_chunks + n_threads - 1) // n_threads
    for t in prange(n_threads):
        buf = np.empty(buf_len, dtype=np.complex128)
        lo = min(t * per, n_chunks)
        hi = min(lo + per, n_chunks)
        block_chunks(state, chunk_bits, lo, hi, kinds, pos_ptr, pos, off_ptr, offs, ctrl,
                     data_ptr, data, buf)


@njit(parallel=True, cache=_CACHE)
def gates_parallel(state, n_bits, kinds, pos_ptr, pos, off_ptr, offs, ctrl, data_ptr, data,
                   n_threads, buf_len):
    """Gate-by-gate sweep: every gate passes over the whole vector."""
    for g in range(kinds.shape[0]):
        gp = pos[pos_ptr[g]:pos_ptr[g + 1]]
        go = offs[off_ptr[g]:off_ptr[g + 1]]
        gd = data[data_ptr[g]:data_ptr[g + 1]]
        count = np.int64(1) << (n_bits - gp.shape[0])
        per = (count + n_threads - 1) // n_threads
        for t in prange(n_threads):
            buf = np.empty(buf_len, dtype=np.complex128)
            lo = min(t * per, count)
            hi = min(lo + per, count)
            gate_span(state, np.int64(0), lo, hi, gp, go, ctrl[g], gd, kinds[g] == 1, buf)


@njit(nogil=True, cache=_CACHE)
def permute_bits(t, dest):
    """Move bit k of ``t`` to bit ``dest[k]``."""
    m = np.int64(0)
    for k in range(dest.shape[0]):
        m |= ((t >> k) & 1) << dest[k]
    return m


@njit(nogil=True, cache=_CACHE)
def swap_bits(m, lows, highs):
    out = m
    for i in range(lows.shape[0]):
        a = lows[i]
        b = highs[i]
        if ((m >> a) ^ (m >> b)) & 1:
            out ^= (np.int64(1) << a) | (np.int64(1) << b)
    return out


LOW_BITS = 10


@njit(nogil=True, cache=_CACHE)
def ims_range(state, t_lo, t_hi, dest, lows, highs):
    """Exchange every amplitude pair (m, bitswap(m)) once, visiting m in shifted order.

    Both maps are bit permutations, so the image of ``t`` is the OR of the
    images of its low and high parts; the low part comes from a table.
    """
    n_bits = dest.shape[0]
    low = min(LOW_BITS, n_bits)
    size = np.int64(1) << low
    mask = size - 1
    lo_m = np.empty(size, dtype=np.int64)
    lo_n = np.empty(size, dtype=np.int64)
    for k in range(size):
        lo_m[k] = permute_bits(np.int64(k), dest)
        lo_n[k] = swap_bits(lo_m[k], lows, highs)
    t = t_lo
    while t < t_hi:
        hi_m = permute_bits(t & ~mask, dest)
        hi_n = swap_bits(hi_m, lows, highs)
        stop = min(t_hi, (t | mask) + 1)
        for k in range(t & mask, (stop - 1 & mask) + 1):
            m = hi_m | lo_m[k]
            n = hi_n | lo_n[k]
            if m > n:
                tmp = state[m]
                state[m] = state[n]
                state[n] = tmp
        t = stop


@njit(parallel=True, cache=_CACHE)
def ims_parallel(state, dest, lows, highs, n_threads):
    size = state.shape[0]
    per = (size + n_threads - 1) // n_threads
    for t in prange(n_threads):
        lo = min(t * per, size)
        hi = min(lo + per, size)
        ims_range(state, lo, hi, dest, lows, highs)
