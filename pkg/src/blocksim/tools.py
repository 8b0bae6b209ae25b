"""Reference simulator, order validator and benchmark circuit generators.

The reference simulator is deliberately independent of the engine: it
reshapes the state into an ``n``-axis tensor and contracts every gate's full
matrix with ``numpy.tensordot``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import Circuit, GateBlock, Program, QubitLayout
from .errors import ContractError
from .gates import BASIC_KINDS, Gate, GateKind, embed_matrix, gate_matrix, is_diagonal
from .optimizer import fuse_gates

__all__ = [
    "ORACLE_MAX_QUBITS",
    "oracle_apply",
    "oracle_simulate",
    "layout_apply",
    "fidelity",
    "ValidationReport",
    "validate_order",
    "gen_qft",
    "gen_qaoa",
    "gen_bv",
    "gen_gate_bench",
    "gen_random",
    "TWO_QUBIT_KINDS",
]

ORACLE_MAX_QUBITS = 20
TWO_QUBIT_KINDS = (GateKind.CX, GateKind.CP, GateKind.SWAP, GateKind.RZZ)


# ----------------------------------------------------------------- oracle


def oracle_apply(state: np.ndarray, gates: Sequence[Gate]) -> np.ndarray:
    """Apply ``gates`` in order to a copy of ``state`` by dense tensor contraction."""
    size = state.shape[0]
    n = size.bit_length() - 1
    if size != 1 << n:
        raise ValueError("state length must be a power of two")
    if n > ORACLE_MAX_QUBITS:
        raise ContractError(f"reference simulator is limited to {ORACLE_MAX_QUBITS} qubits")
    psi = np.array(state, dtype=np.complex128).reshape((2,) * n)
    for g in gates:
        qs = g.qubits
        a = len(qs)
        # tensor axis j holds bit n-1-j; matrix axis i holds local bit a-1-i
        axes = [n - 1 - qs[a - 1 - i] for i in range(a)]
        mat = gate_matrix(g).reshape((2,) * (2 * a))
        psi = np.tensordot(mat, psi, axes=(list(range(a, 2 * a)), axes))
        psi = np.moveaxis(psi, list(range(a)), axes)
    return np.ascontiguousarray(psi.reshape(size))


def oracle_simulate(circuit: Circuit, initial: int = 0) -> np.ndarray:
    n = circuit.n_qubits
    if n > ORACLE_MAX_QUBITS:
        raise ContractError(f"reference simulator is limited to {ORACLE_MAX_QUBITS} qubits")
    state = np.zeros(1 << n, dtype=np.complex128)
    state[initial] = 1.0
    return oracle_apply(state, circuit.gates)


def layout_apply(state: np.ndarray, layout: QubitLayout) -> np.ndarray:
    """Move physical bit ``p`` of every index to logical bit ``phys_to_log[p]``."""
    n = len(layout.phys_to_log)
    if state.shape[0] != 1 << n:
        raise ValueError("layout size does not match the state")
    if n == 0:
        return state.copy()
    l2p = layout.log_to_phys
    perm = [n - 1 - l2p[n - 1 - j] for j in range(n)]
    return np.ascontiguousarray(np.transpose(state.reshape((2,) * n), perm).reshape(-1))


def fidelity(u: np.ndarray, v: np.ndarray) -> float:
    """Squared overlap ``|<u|v>|**2``."""
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {v.shape}")
    return float(abs(np.vdot(u, v)) ** 2)


# -------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    passed: bool
    first_divergence: tuple[int, int] | None = None
    message: str = ""

    def __bool__(self):
        return self.passed


def _fail(message: str, gate_id: int | None = None, qubit: int | None = None) -> ValidationReport:
    div = None if gate_id is None else (gate_id, -1 if qubit is None else qubit)
    return ValidationReport(False, div, message)


_SYMMETRIC = frozenset({GateKind.RZZ, GateKind.SWAP})


def _same_basic(a: Gate, b: Gate) -> bool:
    ta, tb = a.targets, b.targets
    if a.kind in _SYMMETRIC:
        ta, tb = tuple(sorted(ta)), tuple(sorted(tb))
    return (a.kind, ta, a.controls) == (b.kind, tb, b.controls) and np.allclose(
        a.params, b.params, rtol=0, atol=1e-12
    )


def _canonical_runs(ids: list[int], diagonal: dict[int, bool]) -> list[int]:
    """Sort each maximal run of diagonal gates, which commute among themselves."""
    out: list[int] = []
    run: list[int] = []
    for i in ids:
        if diagonal[i]:
            run.append(i)
            continue
        out += sorted(run)
        run = []
        out.append(i)
    return out + sorted(run)


def validate_order(raw: Circuit, program: Program, fused_atol: float = 1e-9) -> ValidationReport:
    """Check that ``program`` runs exactly the gates of ``raw`` in an equivalent order.

    Swaps are replayed to bring every block gate back to logical qubits.
    Fused gates are expanded into their member gates; each member must lie
    inside the fused gate's qubits and the fused payload must equal the
    product of its members.  Per-qubit gate sequences must match the raw
    circuit after sorting runs of mutually commuting diagonal gates.
    """
    by_id = {g.id: g for g in raw.gates}
    if len(by_id) != len(raw.gates):
        return _fail("raw circuit has duplicate ids")
    if program.n_qubits < raw.n_qubits:
        return _fail("program has fewer qubits than the raw circuit")
    layout = QubitLayout.identity(program.n_qubits)
    order: list[int] = []
    seen: set[int] = set()
    for item in program.items:
        if not isinstance(item, GateBlock):
            layout.apply(item)
            continue
        for g in item.gates:
            logical = g.remap(layout.phys_to_log)
            for m in g.constituent_ids:
                if m not in by_id:
                    return _fail(f"gate id {m} is not in the raw circuit", m)
                if m in seen:
                    return _fail(f"gate id {m} appears twice", m)
                seen.add(m)
            if g.kind.fused:
                members = [by_id[m] for m in g.members]
                span = set(logical.qubits)
                for mg in members:
                    if not set(mg.qubits) <= span:
                        q = min(set(mg.qubits) - span)
                        return _fail(f"member {mg.id} acts outside fused gate {g.id}", mg.id, q)
                ref = fuse_gates(members) if len(members) > 1 else members[0]
                want = _embedded(ref, logical.qubits)
                have = _embedded(logical, logical.qubits)
                if not np.allclose(want, have, rtol=0, atol=fused_atol):
                    return _fail(f"fused gate {g.id} payload disagrees with its members", g.id)
            elif not _same_basic(logical, by_id[g.id]):
                q = logical.qubits[0]
                return _fail(f"gate {g.id} differs from the raw gate after undoing swaps", g.id, q)
            order.extend(g.constituent_ids)
    missing = set(by_id) - seen
    if missing:
        m = min(missing)
        return _fail(f"gate id {m} never executed", m)

    diagonal = {g.id: is_diagonal(g) for g in raw.gates}
    want_q: dict[int, list[int]] = defaultdict(list)
    have_q: dict[int, list[int]] = defaultdict(list)
    for g in raw.gates:
        for q in g.qubits:
            want_q[q].append(g.id)
    for i in order:
        for q in by_id[i].qubits:
            have_q[q].append(i)
    for q in sorted(want_q):
        want = _canonical_runs(want_q[q], diagonal)
        have = _canonical_runs(have_q[q], diagonal)
        for pos, (w, h) in enumerate(zip(want, have)):
            if w != h:
                return _fail(
                    f"qubit {q}: gate {h} runs where gate {w} is expected (position {pos})", h, q
                )
    return ValidationReport(True, None, "Passed all circuit order validations")


def _embedded(g: Gate, onto) -> np.ndarray:
    return embed_matrix(gate_matrix(g), g.qubits, onto)


# -------------------------------------------------------------- generators


def gen_qft(n: int) -> Circuit:
    """Quantum Fourier transform without the final qubit reversal."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gates: list[Gate] = []
    for j in range(n):
        gates.append(Gate(GateKind.H, (j,), id=len(gates)))
        for k in range(j + 1, n):
            gates.append(Gate(GateKind.CP, (j,), (k,), (math.pi / 2 ** (k - j),), id=len(gates)))
    return Circuit(n, gates)


def gen_qaoa(n: int, p: int, seed: int = 0) -> Circuit:
    """Fully connected QAOA ansatz: H layer, then ``p`` rounds of RZZ on every pair plus RX."""
    if n < 2 or p < 1:
        raise ValueError("need n >= 2 and p >= 1")
    rng = np.random.default_rng(seed)
    gates = [Gate(GateKind.H, (q,), id=q) for q in range(n)]
    for _ in range(p):
        for i in range(n):
            for j in range(i + 1, n):
                gates.append(Gate(GateKind.RZZ, (i, j), params=(rng.uniform(0, 2 * math.pi),),
                                  id=len(gates)))
        for q in range(n):
            gates.append(Gate(GateKind.RX, (q,), params=(rng.uniform(0, 2 * math.pi),),
                              id=len(gates)))
    return Circuit(n, gates)


def gen_bv(n: int, secret: str | None = None) -> Circuit:
    """Bernstein-Vazirani with the ancilla on qubit ``n - 1``; ``secret[i]`` is data qubit ``i``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    secret = "1" * (n - 1) if secret is None else secret
    if len(secret) != n - 1 or set(secret) - {"0", "1"}:
        raise ValueError(f"secret must be {n - 1} binary digits")
    anc = n - 1
    gates: list[Gate] = []

    def add(kind, targets, controls=()):
        gates.append(Gate(kind, targets, controls, id=len(gates)))

    add(GateKind.X, (anc,))
    for q in range(n):
        add(GateKind.H, (q,))
    for q, bit in enumerate(secret):
        if bit == "1":
            add(GateKind.CX, (anc,), (q,))
    for q in range(n - 1):
        add(GateKind.H, (q,))
    return Circuit(n, gates)


def _bench_params(kind: GateKind, i: int) -> tuple[float, ...]:
    return tuple(0.1 * (i + 1) + 0.3 * k for k in range(kind.n_params))


def gen_gate_bench(kind: GateKind, n: int) -> Circuit:
    """One ``kind`` gate per qubit; two-qubit kinds pair up neighbours (0,1), (2,3), ..."""
    if kind.fused:
        raise ValueError("fused kinds have no benchmark circuit")
    gates: list[Gate] = []
    if kind.n_targets + kind.n_controls == 1:
        for q in range(n):
            gates.append(Gate(kind, (q,), params=_bench_params(kind, q), id=q))
    else:
        for i in range(n // 2):
            a, b = 2 * i, 2 * i + 1
            if kind.n_controls:
                g = Gate(kind, (b,), (a,), _bench_params(kind, i), id=i)
            else:
                g = Gate(kind, (a, b), params=_bench_params(kind, i), id=i)
            gates.append(g)
    return Circuit(n, gates)


def gen_random(n: int, n_gates: int, seed: int = 0,
               kinds: Sequence[GateKind] = BASIC_KINDS) -> Circuit:
    """Seeded random circuit over ``kinds`` with uniform angles in ``[0, 2*pi)``."""
    rng = np.random.default_rng(seed)
    usable = [k for k in kinds if k.n_targets + k.n_controls <= n]
    gates: list[Gate] = []
    for i in range(n_gates):
        kind = usable[rng.integers(len(usable))]
        width = kind.n_targets + kind.n_controls
        qs = [int(q) for q in rng.choice(n, size=width, replace=False)]
        params = tuple(float(x) for x in rng.uniform(0, 2 * math.pi, kind.n_params))
        gates.append(Gate(kind, tuple(qs[: kind.n_targets]), tuple(qs[kind.n_targets:]),
                          params, id=i))
    return Circuit(n, gates)
