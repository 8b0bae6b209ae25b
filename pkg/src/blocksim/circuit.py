"""Circuit and program data model plus the text formats they travel in.

Raw circuit line::

    <kind> <qubits...> <id> [params...]        # CX/CP list the control first

Optimized program: records of an integer header ``k`` followed by ``k`` gate
lines (a gate block), or ``1`` followed by ``SQS``/``CSQS`` (a swap)::

    SQS <S> a_1 .. a_S b_1 .. b_S             # a_i <-> b_i

Fused gates carry no id field; their payload follows the qubits (interleaved
real/imag pairs, row-major for dense payloads) and their constituent ids ride
in a trailing ``# members ...`` comment.
"""

from __future__ import annotations

import configparser
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Union

import numpy as np

from .errors import ConfigError, ParseError, UnsupportedGateError
from .gates import Gate, GateKind, kind_from_token

log = logging.getLogger(__name__)

__all__ = [
    "Circuit",
    "SwapKind",
    "SwapOp",
    "GateBlock",
    "QubitLayout",
    "Config",
    "Program",
    "parse_gate_line",
    "format_gate",
    "parse_raw_circuit",
    "serialize_circuit",
    "parse_program",
    "serialize_program",
    "parse_config",
    "serialize_config",
]

MEMBERS_TAG = "members"


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError("a circuit needs at least one qubit")
        seen: set[int] = set()
        for g in self.gates:
            if any(q >= self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g.id} touches a qubit >= {self.n_qubits}")
            for i in g.constituent_ids:
                if i in seen:
                    raise ValueError(f"duplicate gate id {i}")
                seen.add(i)

    def __len__(self):
        return len(self.gates)


class SwapKind(Enum):
    IN_MEMORY = "SQS"
    CROSS_RANK = "CSQS"


@dataclass(frozen=True)
class SwapOp:
    kind: SwapKind
    # (low, high) physical positions, sorted by the low end
    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self):
        pairs = tuple(sorted((min(a, b), max(a, b)) for a, b in self.pairs))
        flat = [p for pair in pairs for p in pair]
        if len(set(flat)) != len(flat):
            raise ValueError(f"swap positions overlap: {flat}")
        object.__setattr__(self, "pairs", pairs)

    @property
    def size(self) -> int:
        return len(self.pairs)


@dataclass
class GateBlock:
    gates: list[Gate]

    @property
    def positions(self) -> set[int]:
        return {q for g in self.gates for q in g.qubits}

    def __len__(self):
        return len(self.gates)


Item = Union[GateBlock, SwapOp]


@dataclass
class QubitLayout:
    log_to_phys: list[int]
    phys_to_log: list[int]

    @classmethod
    def identity(cls, n: int) -> "QubitLayout":
        return cls(list(range(n)), list(range(n)))

    @classmethod
    def from_phys_to_log(cls, phys_to_log: Iterable[int]) -> "QubitLayout":
        p2l = list(phys_to_log)
        l2p = [0] * len(p2l)
        for p, q in enumerate(p2l):
            l2p[q] = p
        layout = cls(l2p, p2l)
        layout.check()
        return layout

    def check(self):
        n = len(self.phys_to_log)
        if sorted(self.phys_to_log) != list(range(n)) or len(self.log_to_phys) != n:
            raise ValueError("layout is not a permutation")
        if any(self.log_to_phys[q] != p for p, q in enumerate(self.phys_to_log)):
            raise ValueError("layout arrays are not mutually inverse")

    def copy(self) -> "QubitLayout":
        return QubitLayout(list(self.log_to_phys), list(self.phys_to_log))

    def inverse(self) -> "QubitLayout":
        return QubitLayout(list(self.phys_to_log), list(self.log_to_phys))

    def swap_positions(self, a: int, b: int):
        qa, qb = self.phys_to_log[a], self.phys_to_log[b]
        self.phys_to_log[a], self.phys_to_log[b] = qb, qa
        self.log_to_phys[qa], self.log_to_phys[qb] = b, a

    def apply(self, op: SwapOp):
        for a, b in op.pairs:
            self.swap_positions(a, b)


@dataclass
class Config:
    total_qbit: int
    rank_qbit: int = 0
    buffer_qbit: int | None = None
    chunk_qbit: int | None = None
    fusion_qbit: int | None = None
    cache_line_qbit: int | None = None
    ims: bool = True
    xrs: bool = True
    fusion: bool = True
    diagonal_fusion: bool = True

    def __post_init__(self):
        n, r = self.total_qbit, self.rank_qbit
        if n < 1:
            raise ConfigError("total_qbit must be >= 1")
        if r < 0 or r >= n:
            raise ConfigError("rank_qbit must satisfy 0 <= rank_qbit < total_qbit")
        local = n - r
        if self.chunk_qbit is None:
            self.chunk_qbit = min(10, local)
        if self.fusion_qbit is None:
            self.fusion_qbit = min(5, self.chunk_qbit)
        if self.cache_line_qbit is None:
            self.cache_line_qbit = min(2, self.chunk_qbit)
        if self.buffer_qbit is None:
            self.buffer_qbit = min(local, 28)
        if not 0 <= self.cache_line_qbit <= self.chunk_qbit <= local:
            raise ConfigError(
                "need 0 <= cache_line_qbit <= chunk_qbit <= total_qbit - rank_qbit"
            )
        if self.chunk_qbit < 1:
            raise ConfigError("chunk_qbit must be >= 1")
        if not 1 <= self.fusion_qbit <= self.chunk_qbit:
            raise ConfigError("need 1 <= fusion_qbit <= chunk_qbit")
        if not 0 <= self.buffer_qbit <= local:
            raise ConfigError("need 0 <= buffer_qbit <= total_qbit - rank_qbit")

    @property
    def n_qubits(self) -> int:
        return self.total_qbit

    @property
    def local_qubits(self) -> int:
        return self.total_qbit - self.rank_qbit


@dataclass
class Program:
    n_qubits: int
    rank_qubits: int
    chunk_qubits: int
    items: list[Item] = field(default_factory=list)
    final_layout: QubitLayout | None = None

    def __post_init__(self):
        if self.final_layout is None:
            self.final_layout = self.replay_layout()

    @property
    def blocks(self) -> list[GateBlock]:
        return [it for it in self.items if isinstance(it, GateBlock)]

    @property
    def swaps(self) -> list[SwapOp]:
        return [it for it in self.items if isinstance(it, SwapOp)]

    def count(self, kind: SwapKind) -> int:
        return sum(1 for s in self.swaps if s.kind is kind)

    @property
    def n_gates(self) -> int:
        return sum(len(b) for b in self.blocks)

    def replay_layout(self) -> QubitLayout:
        layout = QubitLayout.identity(self.n_qubits)
        for op in self.swaps:
            layout.apply(op)
        return layout

    def check(self):
        """Raise ``ValueError`` unless every structural invariant holds."""
        n, local, c = self.n_qubits, self.n_qubits - self.rank_qubits, self.chunk_qubits
        seen: set[int] = set()
        for item in self.items:
            if isinstance(item, GateBlock):
                for g in item.gates:
                    if any(q >= c for q in g.qubits):
                        raise ValueError(
                            f"gate {g.id} uses position >= chunk size {c}"
                        )
                    for i in g.constituent_ids:
                        if i in seen:
                            raise ValueError(f"gate id {i} appears in two blocks")
                        seen.add(i)
            else:
                for a, b in item.pairs:
                    if b >= n:
                        raise ValueError(f"swap position {b} >= {n}")
                    if item.kind is SwapKind.IN_MEMORY and b >= local:
                        raise ValueError("in-memory swap touches a rank bit")
                    if item.kind is SwapKind.CROSS_RANK and not (a < local <= b):
                        raise ValueError("cross-rank pair must join an in-rank and a rank bit")
        replayed = self.replay_layout()
        replayed.check()
        if self.final_layout is not None and replayed != self.final_layout:
            raise ValueError("final_layout disagrees with the swap sequence")


# ---------------------------------------------------------------- gate lines


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def format_gate(g: Gate) -> str:
    fields = [g.token]
    if g.kind.fused:
        fields += [str(q) for q in g.targets]
        flat = np.asarray(g.payload).reshape(-1)
        inter = np.empty(2 * flat.size)
        inter[0::2], inter[1::2] = flat.real, flat.imag
        fields += [_fmt(x) for x in inter]
        fields += ["#", MEMBERS_TAG] + [str(m) for m in g.members]
        return " ".join(fields)
    fields += [str(q) for q in g.controls + g.targets]
    fields.append(str(g.id))
    fields += [_fmt(p) for p in g.params]
    return " ".join(fields)


def _split_comment(line: str) -> tuple[str, str]:
    body, _, comment = line.partition("#")
    return body.strip(), comment.strip()


def _ints(tokens, lineno, what) -> list[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected integer {what}, got {tokens}", lineno) from None


def _floats(tokens, lineno) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise ParseError(f"expected numbers, got {tokens}", lineno) from None


def parse_gate_line(line: str, lineno: int | None = None, *, strict_params: bool = False) -> Gate:
    """Parse one gate line (comments allowed)."""
    body, comment = _split_comment(line)
    tokens = body.split()
    if not tokens:
        raise ParseError("empty gate line", lineno)
    try:
        kind, width = kind_from_token(tokens[0])
    except UnsupportedGateError as exc:
        raise ParseError(str(exc), lineno) from None
    rest = tokens[1:]
    if kind.fused:
        dim = 1 << width
        n_vals = 2 * (dim if kind is GateKind.DIAG else dim * dim)
        if len(rest) != width + n_vals:
            raise ParseError(
                f"{tokens[0]} expects {width} qubits and {n_vals} numbers, got {len(rest)} fields",
                lineno,
            )
        qubits = _ints(rest[:width], lineno, "qubit")
        vals = np.array(_floats(rest[width:], lineno))
        payload = vals[0::2] + 1j * vals[1::2]
        if kind is GateKind.UNITARY:
            payload = payload.reshape(dim, dim)
        ctoks = comment.split()
        if not ctoks or ctoks[0] != MEMBERS_TAG or len(ctoks) < 2:
            raise ParseError("fused gate needs a '# members <ids>' trailer", lineno)
        members = _ints(ctoks[1:], lineno, "member id")
        try:
            return Gate(kind, tuple(qubits), payload=payload, id=min(members), members=tuple(members))
        except ValueError as exc:
            raise ParseError(str(exc), lineno) from None
    n_q = kind.n_targets + kind.n_controls
    if len(rest) < n_q + 1:
        raise ParseError(f"{kind.value} needs {n_q} qubit(s) and an id", lineno)
    qubits = _ints(rest[:n_q], lineno, "qubit")
    (gid,) = _ints(rest[n_q:n_q + 1], lineno, "id")
    params = _floats(rest[n_q + 1:], lineno)
    if len(params) != kind.n_params:
        if params or strict_params:
            raise ParseError(
                f"{kind.value} expects {kind.n_params} parameter(s), got {len(params)}", lineno
            )
        log.warning("line %s: %s without angles, defaulting to 0", lineno, kind.value)
        params = [0.0] * kind.n_params
    controls = qubits[: kind.n_controls]
    targets = qubits[kind.n_controls:]
    try:
        return Gate(kind, tuple(targets), tuple(controls), tuple(params), gid)
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def _lines(text: str | bytes):
    if isinstance(text, bytes):
        text = text.decode("ascii")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body, _ = _split_comment(raw)
        if body:
            yield lineno, raw


# --------------------------------------------------------------- raw circuits


def parse_raw_circuit(text: str | bytes, n_qubits: int) -> Circuit:
    gates: list[Gate] = []
    seen: set[int] = set()
    for lineno, line in _lines(text):
        g = parse_gate_line(line, lineno)
        if any(q >= n_qubits for q in g.qubits):
            raise ParseError(f"qubit index >= {n_qubits}", lineno)
        for i in g.constituent_ids:
            if i in seen:
                raise ParseError(f"duplicate gate id {i}", lineno)
            seen.add(i)
        gates.append(g)
    return Circuit(n_qubits, gates)


def serialize_circuit(circuit: Circuit) -> str:
    return "".join(format_gate(g) + "\n" for g in circuit.gates)


# ------------------------------------------------------------------ programs


def _parse_swap(line: str, lineno: int) -> SwapOp:
    body, _ = _split_comment(line)
    tokens = body.split()
    kind = SwapKind(tokens[0])
    nums = _ints(tokens[1:], lineno, "swap field")
    if not nums:
        raise ParseError(f"{kind.value} needs a pair count", lineno)
    s = nums[0]
    if s < 0 or len(nums) != 1 + 2 * s:
        raise ParseError(f"{kind.value} {s} expects {2 * s} positions, got {len(nums) - 1}", lineno)
    try:
        return SwapOp(kind, tuple(zip(nums[1:1 + s], nums[1 + s:])))
    except ValueError as exc:
        raise ParseError(str(exc), lineno) from None


def _is_swap_line(line: str) -> bool:
    head = line.split(None, 1)[0]
    return head in ("SQS", "CSQS")


def parse_program(text: str | bytes, config: Config) -> Program:
    """Parse an optimized program and check it against ``config``."""
    items: list[Item] = []
    lines = list(_lines(text))
    i = 0
    while i < len(lines):
        lineno, line = lines[i]
        body, _ = _split_comment(line)
        if _is_swap_line(body):
            items.append(_parse_swap(body, lineno))
            i += 1
            continue
        try:
            k = int(body)
        except ValueError:
            raise ParseError("expected a block header (integer) or swap record", lineno) from None
        if k < 1:
            raise ParseError("block header must be positive", lineno)
        chunk = lines[i + 1:i + 1 + k]
        if len(chunk) != k:
            raise ParseError(f"block header says {k} lines, only {len(chunk)} follow", lineno)
        if any(_is_swap_line(_split_comment(l)[0]) for _, l in chunk):
            if k != 1:
                raise ParseError("swap records must stand alone under header 1", lineno)
            items.append(_parse_swap(chunk[0][1], chunk[0][0]))
        else:
            items.append(GateBlock([parse_gate_line(l, n, strict_params=False) for n, l in chunk]))
        i += 1 + k
    program = Program(
        config.total_qbit, config.rank_qbit, config.chunk_qbit, items,
        final_layout=None,
    )
    try:
        program.check()
    except ValueError as exc:
        raise ParseError(str(exc)) from None
    return program


def serialize_program(program: Program) -> str:
    out: list[str] = []
    for item in program.items:
        if isinstance(item, GateBlock):
            out.append(str(len(item.gates)))
            out.extend(format_gate(g) for g in item.gates)
        else:
            lows = [str(a) for a, _ in item.pairs]
            highs = [str(b) for _, b in item.pairs]
            out.append("1")
            out.append(" ".join([item.kind.value, str(item.size)] + lows + highs))
    return "".join(line + "\n" for line in out)


# ------------------------------------------------------------------- config

_INT_KEYS = ("rank_qbit", "buffer_qbit", "chunk_qbit", "fusion_qbit", "cache_line_qbit")
_BOOL_KEYS = ("ims", "xrs", "fusion", "diagonal_fusion")


def parse_config(text: str | bytes) -> Config:
    if isinstance(text, bytes):
        text = text.decode("ascii")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ParseError(f"bad config: {exc}") from None
    if not parser.has_section("system"):
        raise ConfigError("config needs a [system] section")
    sec = parser["system"]
    if "total_qbit" not in sec:
        raise ConfigError("config is missing total_qbit")
    kwargs = {}
    try:
        kwargs["total_qbit"] = sec.getint("total_qbit")
        for key in _INT_KEYS:
            if key in sec:
                kwargs[key] = sec.getint(key)
        for key in _BOOL_KEYS:
            if key in sec:
                kwargs[key] = sec.getboolean(key)
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from None
    for key in sec:
        if key not in kwargs:
            log.debug("ignoring config key %s", key)
    return Config(**kwargs)


def serialize_config(config: Config) -> str:
    lines = ["[system]", f"total_qbit={config.total_qbit}"]
    lines += [f"{k}={getattr(config, k)}" for k in _INT_KEYS]
    lines += [f"{k}={int(getattr(config, k))}" for k in _BOOL_KEYS]
    return "\n".join(lines) + "\n"
