"""Single-rank state-vector engine.

The blockwise engine walks the state one ``2**C``-amplitude chunk at a time
and runs a whole gate block on each chunk before moving on, so the chunk stays
in cache for the entire block.  The gate-by-gate engine is the baseline: one
full pass over memory per gate.

Threads split the chunk range (or, for the baseline, the index range of a
gate) into contiguous slices; the worker count is capped by ``QUOKKA_THREADS``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numba
import numpy as np

from . import _kernels as K
from .circuit import Circuit, Config, GateBlock, Program, QubitLayout, SwapKind, SwapOp
from .errors import ConfigError, ContractError
from .gates import Gate, gate_diagonal, target_matrix

__all__ = [
    "PackedGates",
    "pack_gates",
    "thread_count",
    "init_state",
    "apply_block",
    "apply_gates",
    "bitswap",
    "bitshift",
    "shift_map",
    "ims_swap",
    "simulate_program",
    "simulate_gate_by_gate",
]

MAX_QUBITS = 34


def thread_count(requested: int | None = None) -> int:
    """Worker count: ``requested`` (or all available), capped by ``QUOKKA_THREADS``."""
    limit = numba.config.NUMBA_NUM_THREADS
    env = os.environ.get("QUOKKA_THREADS")
    if env:
        try:
            limit = min(limit, max(1, int(env)))
        except ValueError:
            raise ConfigError(f"QUOKKA_THREADS must be an integer, got {env!r}") from None
    if requested is None:
        return limit
    if requested < 1:
        raise ConfigError("thread count must be >= 1")
    return min(requested, limit)


@dataclass(frozen=True)
class PackedGates:
    """Flat arrays describing a gate list for the kernels."""

    kinds: np.ndarray  # 0 dense, 1 diagonal
    pos_ptr: np.ndarray
    pos: np.ndarray
    off_ptr: np.ndarray
    offs: np.ndarray
    ctrl: np.ndarray
    data_ptr: np.ndarray
    data: np.ndarray
    buf_len: int
    span: int  # one past the highest touched position

    def args(self):
        return (self.kinds, self.pos_ptr, self.pos, self.off_ptr, self.offs, self.ctrl,
                self.data_ptr, self.data)


def _offsets(qubits: Sequence[int]) -> np.ndarray:
    local = np.arange(1 << len(qubits), dtype=np.int64)
    out = np.zeros_like(local)
    for b, q in enumerate(qubits):
        out |= ((local >> b) & 1) << q
    return out


def pack_gates(gates: Iterable[Gate]) -> PackedGates:
    kinds, pos, offs, ctrl, data = [], [], [], [], []
    span = 0
    for g in gates:
        diag = gate_diagonal(g)
        if diag is not None:
            kinds.append(1)
            offs.append(_offsets(g.qubits))
            data.append(np.asarray(diag, dtype=np.complex128))
            ctrl.append(0)
        else:
            kinds.append(0)
            offs.append(_offsets(g.targets))
            data.append(np.ascontiguousarray(target_matrix(g), dtype=np.complex128).ravel())
            ctrl.append(sum(1 << c for c in g.controls))
        pos.append(np.array(sorted(g.qubits), dtype=np.int64))
        span = max(span, 1 + max(g.qubits))

    def flat(parts, dtype):
        ptr = np.zeros(len(parts) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(p) for p in parts])
        body = np.concatenate(parts).astype(dtype) if parts else np.zeros(0, dtype=dtype)
        return ptr, body

    pos_ptr, pos_flat = flat(pos, np.int64)
    off_ptr, offs_flat = flat(offs, np.int64)
    data_ptr, data_flat = flat(data, np.complex128)
    buf_len = max((len(o) for o in offs), default=1)
    return PackedGates(
        np.array(kinds, dtype=np.int8), pos_ptr, pos_flat, off_ptr, offs_flat,
        np.array(ctrl, dtype=np.int64), data_ptr, data_flat, buf_len, span,
    )


def _n_bits(state: np.ndarray) -> int:
    size = state.shape[0]
    if state.ndim != 1 or size < 1 or size & (size - 1):
        raise ContractError("state length must be a power of two")
    if state.dtype != np.complex128 or not state.flags.c_contiguous:
        raise ContractError("state must be a contiguous complex128 array")
    return size.bit_length() - 1


def init_state(n: int, initial: int = 0) -> np.ndarray:
    """Basis state ``|initial>`` on ``n`` qubits."""
    if not 1 <= n <= MAX_QUBITS:
        raise ValueError(f"qubit count must be in [1, {MAX_QUBITS}], got {n}")
    if not 0 <= initial < (1 << n):
        raise ValueError(f"initial basis index {initial} out of range")
    state = np.zeros(1 << n, dtype=np.complex128)
    state[initial] = 1.0
    return state


def apply_packed(state: np.ndarray, packed: PackedGates, chunk_bits: int,
                 threads: int | None = 1) -> np.ndarray:
    """Run a packed block chunk by chunk.  ``threads=1`` stays in the calling thread."""
    n = _n_bits(state)
    chunk_bits = min(chunk_bits, n)
    if packed.span > chunk_bits:
        raise ContractError(
            f"block touches position {packed.span - 1}, chunk has {chunk_bits} bits"
        )
    if not len(packed.kinds):
        return state
    if threads == 1:
        buf = np.empty(packed.buf_len, dtype=np.complex128)
        K.block_chunks(state, chunk_bits, 0, state.shape[0] >> chunk_bits, *packed.args(), buf)
        return state
    n_threads = thread_count(threads)
    numba.set_num_threads(n_threads)
    K.block_parallel(state, chunk_bits, *packed.args(), n_threads, packed.buf_len)
    return state


def apply_block(state: np.ndarray, block: GateBlock, chunk_bits: int,
                threads: int | None = None) -> np.ndarray:
    """Apply every gate of ``block`` to each ``2**chunk_bits`` chunk in place."""
    return apply_packed(state, pack_gates(block.gates), chunk_bits, threads)


def apply_gates(state: np.ndarray, gates: Sequence[Gate], threads: int | None = None) -> np.ndarray:
    """Baseline engine: one full pass over ``state`` per gate, in place."""
    n = _n_bits(state)
    packed = pack_gates(gates)
    if packed.span > n:
        raise ContractError("gate touches a qubit outside the state")
    if not len(packed.kinds):
        return state
    n_threads = thread_count(threads)
    numba.set_num_threads(n_threads)
    K.gates_parallel(state, n, *packed.args(), n_threads, packed.buf_len)
    return state


# ------------------------------------------------------------------ swaps


def _pair_arrays(pairs) -> tuple[np.ndarray, np.ndarray]:
    lows = np.array([a for a, _ in pairs], dtype=np.int64)
    highs = np.array([b for _, b in pairs], dtype=np.int64)
    return lows, highs


def bitswap(i, pairs):
    """Exchange bit ``a`` with bit ``b`` of ``i`` for every pair; works on ints and arrays."""
    out = i
    for a, b in pairs:
        differ = ((i >> a) ^ (i >> b)) & 1
        out = out ^ (differ * ((1 << a) | (1 << b)))
    return out


def shift_map(n: int, pairs, cache_line: int) -> np.ndarray:
    """Destination bit of every thread-index bit for the cache-aware visit order.

    The low ``cache_line`` bits stay put.  The next ``c`` bits, where ``c``
    counts swapped-out bits inside the cache line, go to the swap partners of
    those bits (ascending), so a group of ``2**(cache_line + c)`` consecutive
    thread indices covers whole cache lines on both sides of every swap.
    Remaining bits fill the free positions in ascending order.
    """
    cache_line = min(cache_line, n)
    pairs = [(min(a, b), max(a, b)) for a, b in pairs]
    partners = sorted(b for a, b in pairs if a < cache_line <= b)
    order = list(range(cache_line)) + partners
    taken = set(order)
    order += [p for p in range(n) if p not in taken]
    return np.array(order, dtype=np.int64)


def bitshift(t, pairs, cache_line: int, n: int):
    """Thread index ``t`` to state index; a bijection on ``[0, 2**n)``."""
    dest = shift_map(n, pairs, cache_line)
    out = t & 0
    for k, d in enumerate(dest):
        out = out | (((t >> k) & 1) << int(d))
    return out


def ims_swap(state: np.ndarray, op: SwapOp | Sequence[tuple[int, int]], cache_line: int = 2,
             threads: int | None = None) -> np.ndarray:
    """Permute ``state`` in place so amplitude ``i`` lands at ``bitswap(i, pairs)``."""
    n = _n_bits(state)
    pairs = op.pairs if isinstance(op, SwapOp) else SwapOp(SwapKind.IN_MEMORY, tuple(op)).pairs
    if any(b >= n for _, b in pairs):
        raise ContractError(f"swap position outside the {n}-qubit state")
    if not pairs:
        return state
    dest = shift_map(n, pairs, cache_line)
    lows, highs = _pair_arrays(pairs)
    if threads == 1:
        K.ims_range(state, 0, state.shape[0], dest, lows, highs)
        return state
    n_threads = thread_count(threads)
    numba.set_num_threads(n_threads)
    K.ims_parallel(state, dest, lows, highs, n_threads)
    return state


# ------------------------------------------------------------- programs


def simulate_program(program: Program, config: Config, initial: int = 0,
                     threads: int | None = None,
                     state: np.ndarray | None = None) -> tuple[np.ndarray, QubitLayout]:
    """Run ``program`` on one rank holding the whole vector.

    Returns the state in physical bit order and the program's final layout.
    Cross-rank swaps are carried out as in-memory bit swaps, which is only
    meaningful when the program was built for rank bits.
    """
    n = program.n_qubits
    if config.total_qbit != n:
        raise ConfigError(f"config has {config.total_qbit} qubits, program {n}")
    if state is None:
        state = init_state(n, initial)
    elif _n_bits(state) != n:
        raise ContractError("state size does not match the program")
    chunk_bits = min(program.chunk_qubits, n)
    for item in program.items:
        if isinstance(item, GateBlock):
            apply_block(state, item, chunk_bits, threads)
        elif item.kind is SwapKind.CROSS_RANK and program.rank_qubits == 0:
            raise ConfigError("cross-rank swap in a program without rank bits")
        else:
            ims_swap(state, item, config.cache_line_qbit, threads)
    return state, program.final_layout.copy()


def simulate_gate_by_gate(circuit: Circuit, initial: int = 0,
                          threads: int | None = None) -> np.ndarray:
    state = init_state(circuit.n_qubits, initial)
    return apply_gates(state, circuit.gates, threads)
