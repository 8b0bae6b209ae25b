"""Multi-rank execution with worker threads standing in for devices.

The state is split into ``2**R`` rank slices of ``2**(N-R)`` amplitudes; rank
``r`` owns global indices ``(r << (N-R)) | i``.  A cross-rank swap exchanges
in-rank bits with rank bits through an all-to-all among groups of ``2**S``
ranks, moving at most ``2**B`` amplitudes through each rank's receive buffer
per round.

Addressing: the in-rank halves of the swap pairs must be the top ``S``
in-rank positions ``[L-S, L)`` (``L = N-R``), so a local index splits into a
slab number (its top ``S`` bits) and an offset.  Rank ``x`` sends slab ``s``
to the group member whose swapped rank bits spell ``s``, which stores it as
its slab ``g(x)``, where ``g(x)`` is ``x``'s own swapped rank bits.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuit import Config, GateBlock, Program, QubitLayout, SwapKind, SwapOp
from .engine import apply_packed, ims_swap, pack_gates
from .errors import ContractError, InfeasibleError

__all__ = [
    "RankSlice",
    "Exchanger",
    "partition",
    "gather_state",
    "check_cross_rank",
    "xrs_swap",
    "spawn_ranks",
    "simulate_distributed",
]


@dataclass
class RankSlice:
    rank: int
    amplitudes: np.ndarray


def partition(state: np.ndarray, rank_bits: int) -> list[RankSlice]:
    """Split a full vector into ``2**rank_bits`` slices (copies)."""
    size = state.shape[0]
    n_ranks = 1 << rank_bits
    if size % n_ranks or size < n_ranks:
        raise ValueError("state too small for the rank count")
    local = size // n_ranks
    return [RankSlice(r, state[r * local:(r + 1) * local].copy()) for r in range(n_ranks)]


def gather_state(slices: Sequence[RankSlice]) -> np.ndarray:
    """Concatenate slices in rank order."""
    ordered = sorted(slices, key=lambda s: s.rank)
    ranks = [s.rank for s in ordered]
    if ranks != list(range(len(ordered))) or len(ordered) & (len(ordered) - 1):
        raise ValueError(f"incomplete rank set: {ranks}")
    sizes = {s.amplitudes.shape[0] for s in ordered}
    if len(sizes) != 1:
        raise ValueError("rank slices differ in length")
    return np.concatenate([s.amplitudes for s in ordered])


def check_cross_rank(op: SwapOp, local_bits: int, rank_bits: int, buffer_bits: int):
    """Raise unless ``op`` can be carried out by ``Exchanger.exchange``."""
    s = op.size
    if s > rank_bits:
        raise ContractError(f"cross-rank swap of {s} pairs with only {rank_bits} rank bits")
    if buffer_bits < s:
        raise InfeasibleError(f"buffer of 2^{buffer_bits} cannot hold 2^{s} slabs")
    if buffer_bits > local_bits:
        raise InfeasibleError("buffer larger than a rank slice")
    lows = sorted(a for a, _ in op.pairs)
    if lows != list(range(local_bits - s, local_bits)):
        raise ContractError(
            f"cross-rank swap must use the top in-rank positions, got {lows}"
        )
    if any(not local_bits <= b < local_bits + rank_bits for _, b in op.pairs):
        raise ContractError("cross-rank swap partner is not a rank bit")


@dataclass
class _Round:
    sent: list[int]
    received: list[int]


@dataclass
class Exchanger:
    """Receive buffers, barrier and traffic counters shared by all ranks."""

    n_ranks: int
    local_bits: int
    buffer_bits: int
    buffers: list[np.ndarray] = field(init=False)
    barrier: threading.Barrier = field(init=False)
    peak: list[int] = field(init=False)
    rounds: list[_Round] = field(init=False, default_factory=list)

    def __post_init__(self):
        size = 1 << self.buffer_bits
        self.buffers = [np.zeros(size, dtype=np.complex128) for _ in range(self.n_ranks)]
        self.barrier = threading.Barrier(self.n_ranks)
        self.peak = [0] * self.n_ranks
        self._lock = threading.Lock()

    def _record(self, round_no: int, rank: int, sent: int, received: int):
        with self._lock:
            while len(self.rounds) <= round_no:
                self.rounds.append(_Round([0] * self.n_ranks, [0] * self.n_ranks))
            self.rounds[round_no].sent[rank] += sent
            self.rounds[round_no].received[rank] += received
            self.peak[rank] = max(self.peak[rank], received)

    def exchange(self, rank: int, local: np.ndarray, op: SwapOp):
        """Collective: every rank calls this with its own slice; returns when done."""
        s = op.size
        if s == 0:
            return
        L = self.local_bits
        rank_pos = [b - L for _, b in sorted(op.pairs)]
        me = sum(((rank >> r) & 1) << i for i, r in enumerate(rank_pos))
        base = rank
        for r in rank_pos:
            base &= ~(1 << r)
        peers = [base | sum(((g >> i) & 1) << r for i, r in enumerate(rank_pos))
                 for g in range(1 << s)]
        slab = 1 << (L - s)
        step = 1 << (self.buffer_bits - s)
        start = len(self.rounds)
        for k, off in enumerate(range(0, slab, step)):
            # phase 1: deposit one piece of every foreign slab in its owner's buffer
            sent = 0
            for g, peer in enumerate(peers):
                if g == me:
                    continue
                src = g * slab + off
                self.buffers[peer][me * step:(me + 1) * step] = local[src:src + step]
                sent += step
            self.barrier.wait()
            # phase 2: copy what peers deposited back into our slabs
            received = 0
            for g in range(1 << s):
                if g == me:
                    continue
                dst = g * slab + off
                local[dst:dst + step] = self.buffers[rank][g * step:(g + 1) * step]
                received += step
            self._record(start + k, rank, sent, received)
            self.barrier.wait()


def _run_ranks(n_ranks: int, work, barrier: threading.Barrier | None):
    errors: list[BaseException] = []

    def target(r):
        try:
            work(r)
        except BaseException as exc:  # surfaced in the caller below
            errors.append(exc)
            if barrier is not None:
                barrier.abort()

    threads = [threading.Thread(target=target, args=(r,), name=f"rank-{r}") for r in range(n_ranks)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    real = [e for e in errors if not isinstance(e, threading.BrokenBarrierError)]
    if real or errors:
        raise (real or errors)[0]


def xrs_swap(slices: Sequence[RankSlice], op: SwapOp, buffer_bits: int,
             exchanger: Exchanger | None = None) -> list[RankSlice]:
    """Cross-rank swap over all slices in place; the global effect is ``bitswap``."""
    slices = sorted(slices, key=lambda s: s.rank)
    n_ranks = len(slices)
    rank_bits = n_ranks.bit_length() - 1
    local_bits = slices[0].amplitudes.shape[0].bit_length() - 1
    check_cross_rank(op, local_bits, rank_bits, buffer_bits)
    if exchanger is None:
        exchanger = Exchanger(n_ranks, local_bits, buffer_bits)
    _run_ranks(n_ranks, lambda r: exchanger.exchange(r, slices[r].amplitudes, op),
               exchanger.barrier)
    return list(slices)


def spawn_ranks(config: Config, program: Program, initial: int = 0,
                exchanger: Exchanger | None = None) -> list[RankSlice]:
    """Run ``program`` on ``2**R`` worker threads and return their final slices."""
    n, r = config.total_qbit, config.rank_qbit
    if r < 1:
        raise ContractError("multi-rank execution needs rank_qbit >= 1")
    if program.n_qubits != n or program.rank_qubits != r:
        raise ContractError("program was built for a different qubit or rank count")
    local_bits = n - r
    if not 0 <= initial < 1 << n:
        raise ValueError("initial basis index out of range")
    chunk_bits = min(program.chunk_qubits, local_bits)
    steps: list = []
    for item in program.items:
        if isinstance(item, GateBlock):
            if any(q >= local_bits for q in item.positions):
                raise ContractError("gate block touches a rank bit")
            steps.append(("block", pack_gates(item.gates)))
        elif item.kind is SwapKind.IN_MEMORY:
            if any(b >= local_bits for _, b in item.pairs):
                raise ContractError("in-memory swap touches a rank bit")
            steps.append(("ims", item))
        else:
            check_cross_rank(item, local_bits, r, config.buffer_qbit)
            steps.append(("xrs", item))
    n_ranks = 1 << r
    if exchanger is None:
        exchanger = Exchanger(n_ranks, local_bits, config.buffer_qbit)
    slices = [RankSlice(k, np.zeros(1 << local_bits, dtype=np.complex128)) for k in range(n_ranks)]
    owner, offset = divmod(initial, 1 << local_bits)
    slices[owner].amplitudes[offset] = 1.0

    def work(rank):
        local = slices[rank].amplitudes
        for kind, payload in steps:
            if kind == "block":
                apply_packed(local, payload, chunk_bits, threads=1)
            elif kind == "ims":
                ims_swap(local, payload, config.cache_line_qbit, threads=1)
            else:
                exchanger.exchange(rank, local, payload)

    _run_ranks(n_ranks, work, exchanger.barrier)
    return slices


def simulate_distributed(program: Program, config: Config,
                         initial: int = 0) -> tuple[np.ndarray, QubitLayout]:
    """Multi-rank run followed by a gather; same return shape as ``simulate_program``."""
    slices = spawn_ranks(config, program, initial)
    return gather_state(slices), program.final_layout.copy()
