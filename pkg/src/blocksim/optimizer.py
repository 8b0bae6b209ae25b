"""All-in-one circuit optimizer.

Pipeline (``aio_optimize``):

1. optional diagonal fusion pre-pass over the whole circuit;
2. device level: gate blocks whose qubits fit in the ``N - R`` in-rank bits,
   separated by cross-rank swaps;
3. cache level: inside every device block, gate blocks that fit in the
   ``C`` chunk bits, separated by in-memory swaps;
4. optional general fusion inside every cache block.

Block finding is a greedy cover over a dependency frontier: starting from an
empty qubit set, repeatedly add the qubits of the ready gate whose addition
unlocks the most gates (cascading through the dependency chains), until no
ready gate fits; the block is then every gate executable inside that set.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .circuit import Circuit, Config, GateBlock, Program, QubitLayout, SwapKind, SwapOp
from .errors import InfeasibleError
from .gates import (
    Gate,
    GateKind,
    embed_diagonal,
    embed_matrix,
    gate_diagonal,
    gate_matrix,
    is_diagonal,
)

__all__ = [
    "Frontier",
    "find_max_gate",
    "find_gbs",
    "insert_qubit_swaps",
    "fuse_diagonal",
    "fuse_general",
    "fuse_gates",
    "aio_optimize",
]


class Frontier:
    """Per-qubit queues of pending gates.

    A gate is ready when it heads the queue of every qubit it touches.
    """

    def __init__(self, gates: Sequence[Gate], n_qubits: int):
        self.gates = list(gates)
        self.deps = [g.qubits for g in self.gates]
        self.queues: list[deque[int]] = [deque() for _ in range(n_qubits)]
        for i, qs in enumerate(self.deps):
            for q in qs:
                self.queues[q].append(i)
        self.remaining = len(self.gates)

    def head(self, q: int) -> int | None:
        queue = self.queues[q]
        return queue[0] if queue else None

    def is_ready(self, i: int) -> bool:
        queues = self.queues
        return all(queues[q] and queues[q][0] == i for q in self.deps[i])

    def ready(self) -> list[int]:
        out = set()
        for queue in self.queues:
            if queue and queue[0] not in out and self.is_ready(queue[0]):
                out.add(queue[0])
        return sorted(out)

    def take(self, i: int):
        for q in self.deps[i]:
            self.queues[q].popleft()
        self.remaining -= 1

    def untake(self, i: int):
        for q in self.deps[i]:
            self.queues[q].appendleft(i)
        self.remaining += 1

    def cascade(self, qset: set[int], seeds: Iterable[int]) -> list[int]:
        """Take every gate executable inside ``qset`` reachable from ``seeds``.

        Gates are taken smallest-index first, so the result is a valid
        execution order that stays close to the input order.
        """
        heap = []
        for q in seeds:
            h = self.head(q)
            if h is not None:
                heap.append(h)
        heapq.heapify(heap)
        taken = []
        while heap:
            i = heapq.heappop(heap)
            if heap and heap[0] == i:
                continue
            if not self.is_ready(i) or not all(q in qset for q in self.deps[i]):
                continue
            self.take(i)
            taken.append(i)
            for q in self.deps[i]:
                h = self.head(q)
                if h is not None:
                    heapq.heappush(heap, h)
        return taken

    def rollback(self, taken: list[int]):
        for i in reversed(taken):
            self.untake(i)

    def next_use(self, q: int) -> float:
        h = self.head(q)
        return float("inf") if h is None else h


def find_max_gate(frontier: Frontier, chunk_size: int) -> set[int]:
    """Greedy choice of at most ``chunk_size`` qubits for the next block.

    Each step adds the qubits of one ready gate, picking the gate whose
    addition lets the most pending gates run (ties: smallest maximum qubit
    index, then lexicographically smallest set).  The frontier is left
    unchanged.
    """
    chosen: set[int] = set()
    trail: list[int] = []
    deps = frontier.deps
    try:
        while True:
            best = None
            for i in frontier.ready():
                new = [q for q in deps[i] if q not in chosen]
                if not new or len(chosen) + len(new) > chunk_size:
                    continue
                trial = chosen.union(new)
                taken = frontier.cascade(trial, new)
                gain = len(taken)
                frontier.rollback(taken)
                key = (-gain, max(trial), tuple(sorted(trial)))
                if best is None or key < best[0]:
                    best = (key, trial, new)
            if best is None:
                break
            _, chosen, new = best
            trail.extend(frontier.cascade(chosen, new))
    finally:
        frontier.rollback(trail)
    return chosen


def _pad(chosen: set[int], residents: Sequence[int], frontier: Frontier, size: int) -> set[int]:
    """Fill ``chosen`` up to ``size`` with current residents, soonest-needed first."""
    out = set(chosen)
    spare = [q for q in residents if q not in out]
    spare.sort(key=lambda q: (frontier.next_use(q), q))
    for q in spare[: max(0, size - len(out))]:
        out.add(q)
    return out


@dataclass
class _Part:
    gates: list[Gate]
    qubits: set[int]


def _partition(
    gates: Sequence[Gate],
    n_qubits: int,
    chunk_size: int,
    residents: Sequence[int] | None,
    start_with_residents: bool,
    pass_wide: bool = False,
) -> list[_Part]:
    """Split ``gates`` into blocks of at most ``chunk_size`` qubits (logical).

    With ``pass_wide``, gates wider than the chunk become blocks of their own
    instead of an error.
    """
    if not pass_wide:
        for g in gates:
            if len(g.qubits) > chunk_size:
                raise InfeasibleError(
                    f"gate {g.id} touches {len(g.qubits)} qubits, chunk holds {chunk_size}"
                )
    frontier = Frontier(gates, n_qubits)
    parts: list[_Part] = []
    current = list(residents) if residents is not None else []
    if start_with_residents and current:
        qset = set(current)
        taken = frontier.cascade(qset, qset)
        if taken:
            parts.append(_Part([frontier.gates[i] for i in taken], qset))
    while frontier.remaining:
        chosen = find_max_gate(frontier, chunk_size)
        if not chosen and pass_wide:
            i = frontier.ready()[0]
            frontier.take(i)
            parts.append(_Part([frontier.gates[i]], set(frontier.deps[i])))
            continue
        if not chosen:
            raise InfeasibleError("no pending gate fits in the chunk")
        if residents is not None:
            chosen = _pad(chosen, current, frontier, chunk_size)
        taken = frontier.cascade(chosen, chosen)
        parts.append(_Part([frontier.gates[i] for i in taken], chosen))
        if residents is not None:
            current = sorted(chosen)
    return parts


# ------------------------------------------------------------------- swaps


def _sqs(pairs, config: Config | None) -> list[SwapOp]:
    if not pairs:
        return []
    if config is not None and not config.ims:
        return [SwapOp(SwapKind.IN_MEMORY, (p,)) for p in pairs]
    return [SwapOp(SwapKind.IN_MEMORY, tuple(pairs))]


def _cross_rank(pairs, local: int, config: Config | None) -> list[SwapOp]:
    """Stage in-rank halves onto the top in-rank bits, exchange, stage back."""
    groups = [pairs] if config is None or config.xrs else [[p] for p in pairs]
    ops: list[SwapOp] = []
    for grp in groups:
        s = len(grp)
        top = list(range(local - s, local))
        lows = sorted(a for a, _ in grp)
        highs = sorted(b for _, b in grp)
        movers = [a for a in lows if a not in top]
        free = [t for t in top if t not in lows]
        stage = _sqs(list(zip(movers, free)), config)
        ops += stage
        ops.append(SwapOp(SwapKind.CROSS_RANK, tuple(zip(top, highs))))
        ops += stage
    return ops


def insert_qubit_swaps(
    prev_set: Iterable[int] | None,
    chunk_set: Iterable[int],
    layout: QubitLayout,
    config: Config,
    region: int | None = None,
) -> list[SwapOp]:
    """Swaps that bring ``chunk_set`` (logical) into positions ``[0, region)``.

    ``layout`` is updated in place.  Pairs whose incoming position is a rank
    bit become one staged cross-rank swap, the rest one in-memory swap.
    """
    region = config.chunk_qbit if region is None else region
    chunk_set = set(chunk_set)
    if len(chunk_set) > region:
        raise InfeasibleError(f"{len(chunk_set)} qubits do not fit in {region} positions")
    if prev_set is not None:
        residents = {layout.phys_to_log[p] for p in range(region)}
        if set(prev_set) - residents:
            raise ValueError("prev_set is not resident in the chunk")
    local = config.local_qubits
    evict = sorted(p for p in range(region) if layout.phys_to_log[p] not in chunk_set)
    incoming = sorted(layout.log_to_phys[q] for q in chunk_set if layout.log_to_phys[q] >= region)
    pairs = list(zip(evict, incoming))
    mem = [(a, b) for a, b in pairs if b < local]
    ranked = [(a, b) for a, b in pairs if b >= local]
    ops = _sqs(mem, config) + (_cross_rank(ranked, local, config) if ranked else [])
    for op in ops:
        layout.apply(op)
    return ops


# ------------------------------------------------------------------ fusion


def fuse_gates(gates: Sequence[Gate]) -> Gate:
    """Fuse an ordered gate list into one D_k (all diagonal) or U_k gate."""
    if len(gates) == 1:
        return gates[0]
    onto = tuple(sorted({q for g in gates for q in g.qubits}))
    members = tuple(i for g in gates for i in g.constituent_ids)
    if all(is_diagonal(g) for g in gates):
        diag = np.ones(1 << len(onto), dtype=np.complex128)
        for g in gates:
            diag *= embed_diagonal(gate_diagonal(g), g.qubits, onto)
        return Gate(GateKind.DIAG, onto, payload=diag, id=min(members), members=members)
    mat = np.eye(1 << len(onto), dtype=np.complex128)
    for g in gates:
        mat = embed_matrix(gate_matrix(g), g.qubits, onto) @ mat
    return Gate(GateKind.UNITARY, onto, payload=mat, id=min(members), members=members)


def fuse_general(block: GateBlock, fusion_size: int) -> GateBlock:
    """Merge the block's gates into fused gates of at most ``fusion_size`` qubits.

    Gates already wider than ``fusion_size`` are kept as they are.
    """
    if len(block.gates) < 2:
        return GateBlock(list(block.gates))
    n = 1 + max(q for g in block.gates for q in g.qubits)
    parts = _partition(block.gates, n, fusion_size, None, False, pass_wide=True)
    return GateBlock([fuse_gates(p.gates) for p in parts])


def _crosses(qubits: Iterable[int], local: int) -> bool:
    qubits = list(qubits)
    return any(q < local for q in qubits) and any(q >= local for q in qubits)


def fuse_diagonal(circuit: Circuit, config: Config) -> Circuit:
    """Merge diagonal gates that can be brought together into D_k gates.

    A diagonal gate joins the earliest open group when it can commute back to
    that group's position: every gate emitted since then that shares one of
    its qubits is diagonal.  Groups are capped at ``chunk_qbit`` qubits and
    never straddle the in-rank / rank-bit boundary.
    """
    local, cap = config.local_qubits, config.chunk_qbit
    out: list[object] = []
    groups: list[dict] = []
    n = circuit.n_qubits
    for g in circuit.gates:
        qs = set(g.qubits)
        if is_diagonal(g) and not _crosses(qs, local):
            for grp in groups:
                union = grp["qubits"] | qs
                if qs & grp["blocked"] or len(union) > cap or _crosses(union, local):
                    continue
                grp["qubits"] = union
                grp["gates"].append(g)
                break
            else:
                grp = {"qubits": set(qs), "gates": [g], "blocked": set()}
                groups.append(grp)
                out.append(grp)
            continue
        out.append(g)
        if not is_diagonal(g):
            for grp in groups:
                grp["blocked"] |= qs
            groups = [grp for grp in groups if len(grp["blocked"]) < n]
    fused = [fuse_gates(e["gates"]) if isinstance(e, dict) else e for e in out]
    return Circuit(n, fused)


# -------------------------------------------------------------- top level


def _place(g: Gate, mapping) -> Gate:
    """Remap ``g`` to physical positions, keeping fused-gate targets ascending."""
    moved = g.remap(mapping)
    if not moved.kind.fused or list(moved.targets) == sorted(moved.targets):
        return moved
    onto = tuple(sorted(moved.targets))
    if moved.kind is GateKind.DIAG:
        payload = embed_diagonal(moved.payload, moved.targets, onto)
    else:
        payload = embed_matrix(moved.payload, moved.targets, onto)
    return Gate(moved.kind, onto, payload=payload, id=moved.id, members=moved.members)


def find_gbs(
    circuit: Circuit,
    n: int,
    chunk_size: int,
    is_fusion: bool = False,
    config: Config | None = None,
    layout: QubitLayout | None = None,
) -> list:
    """One level of block finding.

    Without fusion, returns blocks (physical indices) interleaved with the
    swaps that reorder qubits between them; ``layout`` is advanced in place.
    With fusion, returns the list of fused gates (no swaps, logical indices).
    """
    if is_fusion:
        return fuse_general(GateBlock(list(circuit.gates)), chunk_size).gates
    config = config or Config(n, chunk_qbit=chunk_size)
    layout = layout if layout is not None else QubitLayout.identity(n)
    residents = [layout.phys_to_log[p] for p in range(chunk_size)]
    items: list = []
    parts = _partition(circuit.gates, n, chunk_size, residents, True)
    for part in parts:
        items += insert_qubit_swaps(None, part.qubits, layout, config, region=chunk_size)
        items.append(GateBlock([_place(g, layout.log_to_phys) for g in part.gates]))
    return items


def aio_optimize(circuit: Circuit, config: Config) -> Program:
    """Optimize ``circuit`` into a program of cache-sized blocks and swaps."""
    n, r, c = config.total_qbit, config.rank_qbit, config.chunk_qbit
    if circuit.n_qubits > n:
        raise InfeasibleError(f"circuit has {circuit.n_qubits} qubits, config {n}")
    local = config.local_qubits
    work = Circuit(n, list(circuit.gates))
    if config.diagonal_fusion:
        work = fuse_diagonal(work, config)
    layout = QubitLayout.identity(n)
    items: list = []
    if r == 0:
        device = [_Part(work.gates, set(range(n)))]
    else:
        device = _partition(work.gates, n, local, list(range(local)), True)
    for k, dev in enumerate(device):
        if k:
            items += insert_qubit_swaps(None, dev.qubits, layout, config, region=local)
        residents = [layout.phys_to_log[p] for p in range(c)]
        for part in _partition(dev.gates, n, c, residents, k == 0):
            items += insert_qubit_swaps(None, part.qubits, layout, config, region=c)
            block = GateBlock([_place(g, layout.log_to_phys) for g in part.gates])
            if config.fusion:
                block = fuse_general(block, config.fusion_qbit)
            items.append(block)
    return Program(n, r, c, items, layout.copy())
