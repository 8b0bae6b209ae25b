"""Cache-blocked, multi-rank state-vector simulator with a gate-block optimizer."""

from .circuit import (
    Circuit,
    Config,
    GateBlock,
    Program,
    QubitLayout,
    SwapKind,
    SwapOp,
    parse_config,
    parse_program,
    parse_raw_circuit,
    serialize_circuit,
    serialize_config,
    serialize_program,
)
from .errors import (
    BlocksimError,
    ConfigError,
    ContractError,
    InfeasibleError,
    ParseError,
    UnsupportedGateError,
)
from .gates import Gate, GateKind, gate_diagonal, gate_matrix, is_diagonal
from .optimizer import aio_optimize

__all__ = [
    "Circuit",
    "Config",
    "GateBlock",
    "Program",
    "QubitLayout",
    "SwapKind",
    "SwapOp",
    "Gate",
    "GateKind",
    "gate_matrix",
    "gate_diagonal",
    "is_diagonal",
    "aio_optimize",
    "parse_config",
    "parse_program",
    "parse_raw_circuit",
    "serialize_circuit",
    "serialize_config",
    "serialize_program",
    "BlocksimError",
    "ConfigError",
    "ContractError",
    "InfeasibleError",
    "ParseError",
    "UnsupportedGateError",
]
