"""Gate definitions: kinds, matrices and diagonals.

Operator convention: a gate acts on ``gate.qubits == targets + controls`` and
the k-th entry of that tuple is bit k of the local (matrix) index, so the
first target is the least significant bit.  Qubit 0 is the least significant
bit of a state-vector index.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import UnsupportedGateError

__all__ = [
    "GateKind",
    "Gate",
    "gate_matrix",
    "gate_diagonal",
    "is_diagonal",
    "target_matrix",
    "embed_matrix",
    "embed_diagonal",
    "kind_from_token",
]


class GateKind(Enum):
    H = "H"
    U = "U"
    X = "X"
    CX = "CX"
    CP = "CP"
    SWAP = "SWAP"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    RZZ = "RZZ"
    DIAG = "D"  # fused diagonal on k qubits, token "D<k>"
    UNITARY = "UK"  # fused dense unitary on k qubits, token "U<k>"

    @property
    def fused(self) -> bool:
        return self in (GateKind.DIAG, GateKind.UNITARY)

    @property
    def n_targets(self) -> int | None:
        """Number of target qubits, ``None`` for the variable-width fused kinds."""
        return _SHAPE[self][0]

    @property
    def n_controls(self) -> int:
        return _SHAPE[self][1]

    @property
    def n_params(self) -> int:
        return _SHAPE[self][2]


# kind -> (targets, controls, params)
_SHAPE: dict[GateKind, tuple[int | None, int, int]] = {
    GateKind.H: (1, 0, 0),
    GateKind.U: (1, 0, 3),
    GateKind.X: (1, 0, 0),
    GateKind.CX: (1, 1, 0),
    GateKind.CP: (1, 1, 1),
    GateKind.SWAP: (2, 0, 0),
    GateKind.RX: (1, 0, 1),
    GateKind.RY: (1, 0, 1),
    GateKind.RZ: (1, 0, 1),
    GateKind.RZZ: (2, 0, 1),
    GateKind.DIAG: (None, 0, 0),
    GateKind.UNITARY: (None, 0, 0),
}

BASIC_KINDS = tuple(k for k in GateKind if not k.fused)
_DIAGONAL_KINDS = frozenset({GateKind.RZ, GateKind.RZZ, GateKind.CP, GateKind.DIAG})


def kind_from_token(token: str) -> tuple[GateKind, int | None]:
    """Map a file token (``"RZZ"``, ``"D4"``, ``"U3"``) to a kind and fused width."""
    if token == "U":
        return GateKind.U, None
    if len(token) > 1 and token[0] in "DU" and token[1:].isdigit():
        width = int(token[1:])
        if width < 1:
            raise UnsupportedGateError(f"fused gate width must be positive: {token!r}")
        return (GateKind.DIAG if token[0] == "D" else GateKind.UNITARY), width
    try:
        kind = GateKind(token)
    except ValueError:
        raise UnsupportedGateError(f"unknown gate kind {token!r}") from None
    if kind.fused:
        raise UnsupportedGateError(f"unknown gate kind {token!r}")
    return kind, None


@dataclass(frozen=True, eq=False)
class Gate:
    kind: GateKind
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    params: tuple[float, ...] = ()
    id: int = 0
    payload: np.ndarray | None = field(default=None, repr=False)
    # ids of the original gates folded into a fused gate, in product order
    members: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(q) for q in self.targets))
        object.__setattr__(self, "controls", tuple(int(q) for q in self.controls))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))
        kind = self.kind
        if not isinstance(kind, GateKind):
            raise UnsupportedGateError(f"unknown gate kind {kind!r}")
        qubits = self.targets + self.controls
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"gate {self.id}: repeated qubit in {qubits}")
        if any(q < 0 for q in qubits):
            raise ValueError(f"gate {self.id}: negative qubit index")
        if self.id < 0:
            raise ValueError("gate id must be nonnegative")
        n_t, n_c, n_p = _SHAPE[kind]
        if kind.fused:
            if not self.targets:
                raise ValueError("fused gate needs at least one target")
            if self.controls or self.params:
                raise ValueError("fused gates carry no controls or params")
            if self.payload is None:
                raise ValueError("fused gate requires a payload")
            dim = 1 << len(self.targets)
            payload = np.asarray(self.payload, dtype=np.complex128)
            want = (dim,) if kind is GateKind.DIAG else (dim, dim)
            if payload.shape != want:
                raise ValueError(f"payload shape {payload.shape} != {want}")
            payload.setflags(write=False)
            object.__setattr__(self, "payload", payload)
        else:
            if self.payload is not None:
                raise ValueError(f"{kind.value} gates carry no payload")
            if len(self.targets) != n_t or len(self.controls) != n_c:
                raise ValueError(
                    f"{kind.value} expects {n_t} target(s) and {n_c} control(s)"
                )
            if len(self.params) != n_p:
                raise ValueError(f"{kind.value} expects {n_p} parameter(s)")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + self.controls

    @property
    def token(self) -> str:
        if self.kind is GateKind.DIAG:
            return f"D{len(self.targets)}"
        if self.kind is GateKind.UNITARY:
            return f"U{len(self.targets)}"
        return self.kind.value

    @property
    def constituent_ids(self) -> tuple[int, ...]:
        return self.members if self.kind.fused else (self.id,)

    def remap(self, mapping) -> "Gate":
        """Return a copy with every qubit ``q`` replaced by ``mapping[q]``."""
        return Gate(
            self.kind,
            tuple(mapping[q] for q in self.targets),
            tuple(mapping[q] for q in self.controls),
            self.params,
            self.id,
            self.payload,
            self.members,
        )

    def __eq__(self, other):
        if not isinstance(other, Gate):
            return NotImplemented
        if (self.kind, self.targets, self.controls, self.params, self.id, self.members) != (
            other.kind, other.targets, other.controls, other.params, other.id, other.members
        ):
            return False
        if self.payload is None or other.payload is None:
            return self.payload is other.payload
        return bool(np.array_equal(self.payload, other.payload))

    def __hash__(self):
        return hash((self.kind, self.targets, self.controls, self.params, self.id))


_SQ2 = 1.0 / math.sqrt(2.0)
_H = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128
)


def _u(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array(
        [
            [c, -cmath.exp(1j * lam) * s],
            [cmath.exp(1j * phi) * s, cmath.exp(1j * (phi + lam)) * c],
        ],
        dtype=np.complex128,
    )


def _rx(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def _ry(t: float) -> np.ndarray:
    c, s = math.cos(t / 2), math.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def gate_diagonal(gate: Gate) -> np.ndarray | None:
    """Diagonal of the gate's operator over ``gate.qubits``; ``None`` if not diagonal."""
    kind = gate.kind
    if kind is GateKind.RZ:
        (t,) = gate.params
        return np.array([cmath.exp(-0.5j * t), cmath.exp(0.5j * t)])
    if kind is GateKind.RZZ:
        (t,) = gate.params
        a, b = cmath.exp(-0.5j * t), cmath.exp(0.5j * t)
        return np.array([a, b, b, a])
    if kind is GateKind.CP:
        (t,) = gate.params
        return np.array([1, 1, 1, cmath.exp(1j * t)], dtype=np.complex128)
    if kind is GateKind.DIAG:
        return np.array(gate.payload)
    return None


def is_diagonal(gate: Gate) -> bool:
    return gate.kind in _DIAGONAL_KINDS


def target_matrix(gate: Gate) -> np.ndarray:
    """Operator on the targets alone, applied where every control bit is 1."""
    kind = gate.kind
    if kind is GateKind.H:
        return _H.copy()
    if kind in (GateKind.X, GateKind.CX):
        return _X.copy()
    if kind is GateKind.U:
        return _u(*gate.params)
    if kind is GateKind.RX:
        return _rx(gate.params[0])
    if kind is GateKind.RY:
        return _ry(gate.params[0])
    if kind is GateKind.SWAP:
        return _SWAP.copy()
    if kind is GateKind.CP:
        return np.diag([1, cmath.exp(1j * gate.params[0])]).astype(np.complex128)
    if kind is GateKind.UNITARY:
        return np.array(gate.payload)
    diag = gate_diagonal(gate)
    if diag is None:
        raise UnsupportedGateError(f"no matrix for {kind!r}")
    return np.diag(diag)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Full unitary over ``gate.qubits`` including control semantics."""
    diag = gate_diagonal(gate)
    if diag is not None:
        return np.diag(diag)
    m = target_matrix(gate)
    n_c = len(gate.controls)
    if not n_c:
        return m
    dt = m.shape[0]
    full = np.eye(dt << n_c, dtype=np.complex128)
    # controls occupy the high local bits, so the all-ones block is the last one
    full[-dt:, -dt:] = m
    return full


def _sub_index(onto: tuple[int, ...], qubits: tuple[int, ...]) -> np.ndarray:
    """For every local index over ``onto``, the local index over ``qubits``."""
    pos = [onto.index(q) for q in qubits]
    idx = np.arange(1 << len(onto))
    sub = np.zeros_like(idx)
    for b, p in enumerate(pos):
        sub |= ((idx >> p) & 1) << b
    return sub


def embed_diagonal(diag: np.ndarray, qubits, onto) -> np.ndarray:
    """Expand a diagonal on ``qubits`` to the (super)set ``onto``."""
    return np.asarray(diag)[_sub_index(tuple(onto), tuple(qubits))]


def embed_matrix(matrix: np.ndarray, qubits, onto) -> np.ndarray:
    """Expand an operator on ``qubits`` to ``onto`` (identity on the extra qubits)."""
    onto, qubits = tuple(onto), tuple(qubits)
    sub = _sub_index(onto, qubits)
    rest_mask = 0
    for p, q in enumerate(onto):
        if q not in qubits:
            rest_mask |= 1 << p
    idx = np.arange(1 << len(onto))
    rest = idx & rest_mask
    same = rest[:, None] == rest[None, :]
    return np.where(same, np.asarray(matrix)[sub[:, None], sub[None, :]], 0).astype(
        np.complex128
    )
