"""``blocksim`` command line: optimize, simulate, validate, gen, bench.

Exit codes: 0 success, 1 parse error or unreadable input, 2 configuration
error, 3 simulation contract error, 4 validation failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .circuit import (
    Circuit,
    Config,
    parse_config,
    parse_program,
    parse_raw_circuit,
    serialize_circuit,
    serialize_program,
)
from .errors import BlocksimError, ConfigError, ContractError, InfeasibleError, ParseError
from .gates import BASIC_KINDS, GateKind

log = logging.getLogger("blocksim")

EXIT_OK, EXIT_PARSE, EXIT_CONFIG, EXIT_CONTRACT, EXIT_INVALID = 0, 1, 2, 3, 4
FAMILIES = ("qft", "qaoa", "bv", "gate", "random")
CSV_FIELDS = ("name", "n_qubits", "ranks", "gates", "engine", "wall_time_s", "time_per_gate_s")


class _UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from None
    except UnicodeDecodeError:
        raise ParseError(f"{path} is not ASCII text") from None


def _write(text: str, path: str | None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="ascii")


def _infer_qubits(text: str) -> int:
    """Smallest register holding every qubit index mentioned in a raw circuit."""
    from .circuit import parse_gate_line

    top = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.partition("#")[0].strip()
        if body:
            g = parse_gate_line(line, lineno)
            top = max(top, 1 + max(g.qubits))
    return max(top, 1)


def _flag(value: int, name: str) -> bool:
    if value not in (0, 1):
        raise ConfigError(f"{name} must be 0 or 1, got {value}")
    return bool(value)


# ------------------------------------------------------------------ optimize


def cmd_optimize(args) -> int:
    text = _read(args.raw)
    if args.positional:
        if len(args.positional) != 7:
            raise _UsageError(
                "positional form: RAW CHUNK RANK_REGION QUBITS IMS XRS FUSION_SIZE FUSION"
            )
        chunk, region, n, ims, xrs, fsize, fusion = args.positional
        config = Config(
            n, rank_qbit=n - region, chunk_qbit=chunk,
            fusion_qbit=fsize if fsize > 0 else None,
            ims=_flag(ims, "ims"), xrs=_flag(xrs, "xrs"),
            fusion=False, diagonal_fusion=_flag(fusion, "fusion"),
        )
    elif args.config:
        config = parse_config(_read(args.config))
    else:
        n = args.qubits if args.qubits is not None else _infer_qubits(text)
        region = args.rank_region if args.rank_region is not None else n
        config = Config(
            n, rank_qbit=n - region, chunk_qbit=args.chunk, fusion_qbit=args.fusion_size,
            ims=_flag(args.ims, "--ims"), xrs=_flag(args.xrs, "--xrs"),
            fusion=_flag(args.fusion, "--fusion"),
            diagonal_fusion=_flag(args.diag_fusion, "--diag-fusion"),
        )
    from .optimizer import aio_optimize

    circuit = parse_raw_circuit(text, config.total_qbit)
    program = aio_optimize(circuit, config)
    _write(serialize_program(program), args.output)
    return EXIT_OK


# ------------------------------------------------------------------ simulate


def cmd_simulate(args) -> int:
    config = parse_config(_read(args.config))
    text = _read(args.circuit)
    if args.raw:
        from .optimizer import aio_optimize

        program = aio_optimize(parse_raw_circuit(text, config.total_qbit), config)
    else:
        program = parse_program(text, config)
    if args.dump_state and config.total_qbit > 20:
        raise ContractError("--dump-state is limited to 20 qubits")
    from .engine import simulate_program
    from .tools import layout_apply

    start = time.perf_counter()
    if config.rank_qbit:
        from .distributed import simulate_distributed

        state, layout = simulate_distributed(program, config, args.initial)
    else:
        state, layout = simulate_program(program, config, args.initial, threads=args.threads)
    wall = time.perf_counter() - start
    print(f"wall_time_s {wall:.6f}", file=sys.stderr if args.dump_state else sys.stdout)
    if args.dump_state:
        # round first so sub-print noise never shows up as "-0.000000000000"
        out = np.round(layout_apply(state, layout), 12) + 0.0
        sys.stdout.write("".join(f"{a.real:.12f} {a.imag:.12f}\n" for a in out))
    return EXIT_OK


# ------------------------------------------------------------------ validate


def cmd_validate(args) -> int:
    raw_text = _read(args.raw)
    if args.config:
        config = parse_config(_read(args.config))
    else:
        n = args.qubits if args.qubits is not None else _infer_qubits(raw_text)
        region = args.rank_region if args.rank_region is not None else n
        config = Config(n, rank_qbit=n - region, chunk_qbit=args.chunk)
    raw = parse_raw_circuit(raw_text, config.total_qbit)
    program = parse_program(_read(args.program), config)
    from .tools import validate_order

    report = validate_order(raw, program)
    if report.passed:
        print(report.message)
        return EXIT_OK
    gate_id, qubit = report.first_divergence or (None, None)
    print(f"Validation failed: {report.message} (gate {gate_id}, qubit {qubit})")
    return EXIT_INVALID


# ------------------------------------------------------------------ gen


def _kind(token: str) -> GateKind:
    try:
        kind = GateKind(token.upper())
    except ValueError:
        raise _UsageError(f"unknown gate kind {token!r}") from None
    if kind not in BASIC_KINDS:
        raise _UsageError(f"no benchmark for fused kind {token!r}")
    return kind


def build_family(name: str, qubits: int, layers: int = 5, seed: int = 0,
                 kind: str = "H", secret: str | None = None, gates: int = 200) -> Circuit:
    from . import tools

    if name == "qft":
        return tools.gen_qft(qubits)
    if name == "qaoa":
        return tools.gen_qaoa(qubits, layers, seed)
    if name == "bv":
        return tools.gen_bv(qubits, secret)
    if name == "gate":
        return tools.gen_gate_bench(_kind(kind), qubits)
    if name == "random":
        return tools.gen_random(qubits, gates, seed)
    raise _UsageError(f"unknown circuit family {name!r}; choose from {', '.join(FAMILIES)}")


def cmd_gen(args) -> int:
    try:
        circuit = build_family(args.family, args.qubits, args.layers, args.seed, args.kind,
                               args.secret, args.gates)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    _write(serialize_circuit(circuit), args.output)
    return EXIT_OK


# ------------------------------------------------------------------ bench


@dataclass
class BenchRecord:
    name: str
    n_qubits: int
    ranks: int
    gates: int
    engine: str
    wall_time_s: float
    time_per_gate_s: float


def _timed(run, repeats: int) -> float:
    run()  # compile and warm caches outside the measurement
    total = 0.0
    for _ in range(repeats):
        start = time.perf_counter()
        run()
        total += time.perf_counter() - start
    return total / repeats


def run_bench(name: str, circuit: Circuit, config: Config, repeats: int = 10,
              compare: bool = False, threads: int | None = None) -> list[BenchRecord]:
    from .distributed import simulate_distributed
    from .engine import simulate_gate_by_gate, simulate_program
    from .optimizer import aio_optimize

    if repeats < 1:
        raise ConfigError("--repeats must be >= 1")
    program = aio_optimize(circuit, config)
    n, gates = circuit.n_qubits, len(circuit.gates)
    ranks = 1 << config.rank_qbit
    if config.rank_qbit:
        def blockwise():
            simulate_distributed(program, config)
    else:
        def blockwise():
            simulate_program(program, config, threads=threads)
    records = []
    wall = _timed(blockwise, repeats)
    records.append(BenchRecord(name, n, ranks, gates, "blockwise", wall, wall / max(gates, 1)))
    if compare:
        wall = _timed(lambda: simulate_gate_by_gate(circuit, threads=threads), repeats)
        records.append(BenchRecord(name, n, 1, gates, "gate_by_gate", wall, wall / max(gates, 1)))
    return records


def write_csv(records, stream):
    writer = csv.DictWriter(stream, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(asdict(rec))


def cmd_bench(args) -> int:
    circuit = build_family(args.family, args.qubits, args.layers, args.seed, args.kind,
                           args.secret, args.gates)
    config = Config(args.qubits, rank_qbit=args.rank_qbit, chunk_qbit=args.chunk,
                    fusion_qbit=args.fusion_size)
    records = run_bench(args.family, circuit, config, args.repeats, args.compare, args.threads)
    if args.output and args.output != "-":
        with open(args.output, "w", newline="") as fh:
            write_csv(records, fh)
    else:
        write_csv(records, sys.stdout)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="blocksim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    sub = p.add_subparsers(dest="command", required=True)

    o = sub.add_parser("optimize", help="partition a raw circuit into gate blocks and swaps")
    o.add_argument("raw")
    o.add_argument("positional", nargs="*", type=int,
                   help="CHUNK RANK_REGION QUBITS IMS XRS FUSION_SIZE FUSION")
    o.add_argument("-i", "--config")
    o.add_argument("--chunk", type=int)
    o.add_argument("--rank-region", type=int, help="in-rank qubits (total minus rank bits)")
    o.add_argument("--qubits", type=int)
    o.add_argument("--ims", type=int, default=1)
    o.add_argument("--xrs", type=int, default=1)
    o.add_argument("--fusion-size", type=int)
    o.add_argument("--fusion", type=int, default=1, help="general gate fusion")
    o.add_argument("--diag-fusion", type=int, default=1, help="diagonal gate fusion")
    o.add_argument("-o", "--output")
    o.set_defaults(func=cmd_optimize)

    s = sub.add_parser("simulate", help="run an optimized program")
    s.add_argument("-i", "--config", required=True)
    s.add_argument("-c", "--circuit", required=True)
    s.add_argument("--raw", action="store_true", help="input is a raw circuit; optimize first")
    s.add_argument("--dump-state", action="store_true")
    s.add_argument("--threads", type=int)
    s.add_argument("--initial", type=int, default=0, help="initial basis state index")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="check a program against its raw circuit")
    v.add_argument("raw")
    v.add_argument("program")
    v.add_argument("-i", "--config")
    v.add_argument("--qubits", type=int)
    v.add_argument("--chunk", type=int)
    v.add_argument("--rank-region", type=int)
    v.set_defaults(func=cmd_validate)

    for name, func, helptext in (("gen", cmd_gen, "write a benchmark circuit"),
                                 ("bench", cmd_bench, "time the engines, CSV output")):
        g = sub.add_parser(name, help=helptext)
        g.add_argument("family", help="|".join(FAMILIES))
        g.add_argument("--qubits", type=int, required=name == "gen", default=20)
        g.add_argument("--layers", type=int, default=5)
        g.add_argument("--seed", type=int, default=0)
        g.add_argument("--kind", default="H")
        g.add_argument("--secret")
        g.add_argument("--gates", type=int, default=200, help="gate count for random circuits")
        g.add_argument("-o", "--output")
        g.set_defaults(func=func)
        if name == "bench":
            g.add_argument("--repeats", type=int, default=10)
            g.add_argument("--compare", action="store_true", help="also run the gate-by-gate engine")
            g.add_argument("--threads", type=int)
            g.add_argument("--chunk", type=int)
            g.add_argument("--rank-qbit", type=int, default=0)
            g.add_argument("--fusion-size", type=int, help="largest fused gate (default 5)")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, _UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ContractError, InfeasibleError) as exc:
        print(f"simulation error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except BlocksimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
