import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _data import EXAMPLE_PROGRAM, EXAMPLE_RAW, example_config
from blocksim.circuit import (
    Config,
    GateBlock,
    Program,
    QubitLayout,
    SwapKind,
    SwapOp,
    format_gate,
    parse_config,
    parse_gate_line,
    parse_program,
    parse_raw_circuit,
    serialize_circuit,
    serialize_config,
    serialize_program,
)
from blocksim.errors import ConfigError, ParseError
from blocksim.gates import Gate, GateKind
from blocksim.tools import gen_random


class TestRawCircuit:
    def test_single_line(self):
        c = parse_raw_circuit("H 0 0", 1)
        assert c.gates == [Gate(GateKind.H, (0,), id=0)]

    def test_angle_field(self):
        (g,) = parse_raw_circuit("RZZ 2 4 2 0.5", 5).gates
        assert (g.targets, g.id, g.params) == ((2, 4), 2, (0.5,))

    def test_control_first(self):
        (g,) = parse_raw_circuit("CX 3 1 7", 4).gates
        assert g.controls == (3,) and g.targets == (1,)

    def test_comments_and_blanks(self):
        c = parse_raw_circuit("# header\n\nH 0 0  # trailing\n", 1)
        assert len(c) == 1

    def test_missing_angle_defaults_to_zero(self):
        (g,) = parse_raw_circuit("RZZ 2 4 2", 5).gates
        assert g.params == (0.0,)

    @pytest.mark.parametrize(
        "text, line",
        [
            ("H", 1),
            ("H 0 0\nFOO 1 1", 2),
            ("H 0 0\nH 9 1", 2),
            ("H 0 0\nX 1 0", 2),
            ("RZ 0 0 0.1 0.2", 1),
            ("CX 1 1 0", 1),
        ],
    )
    def test_errors_carry_line(self, text, line):
        with pytest.raises(ParseError) as err:
            parse_raw_circuit(text, 4)
        assert err.value.line == line

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 10_000), n=st.integers(2, 8))
    def test_roundtrip(self, seed, n):
        c = gen_random(n, 25, seed)
        again = parse_raw_circuit(serialize_circuit(c), n)
        assert again.gates == c.gates


class TestFusedLines:
    def test_d4_line_layout(self):
        d = np.exp(1j * np.linspace(0, 1, 16))
        line = format_gate(Gate(GateKind.DIAG, (0, 1, 2, 3), payload=d, id=2, members=(2, 3, 9)))
        fields = line.split("#")[0].split()
        assert fields[:5] == ["D4", "0", "1", "2", "3"]
        assert len(fields) == 5 + 32
        assert float(fields[5]) == d[0].real and float(fields[6]) == d[0].imag

    def test_unitary_roundtrip_exact(self):
        rng = np.random.default_rng(1)
        m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        g = Gate(GateKind.UNITARY, (3, 5), payload=m, id=4, members=(4, 7))
        assert parse_gate_line(format_gate(g)) == g

    def test_members_required(self):
        with pytest.raises(ParseError):
            parse_gate_line("D1 0 1 0 1 0")


class TestProgram:
    def test_reference_listing(self):
        p = parse_program(EXAMPLE_PROGRAM, example_config())
        assert [len(b) for b in p.blocks] == [3, 4, 3, 4]
        # the listing holds five in-memory swaps and one cross-rank swap
        assert p.count(SwapKind.IN_MEMORY) == 5
        assert p.count(SwapKind.CROSS_RANK) == 1
        assert p.swaps[0].pairs == ((0, 4), (1, 5), (3, 7))

    def test_reference_roundtrip_fixpoint(self):
        cfg = example_config()
        p = parse_program(EXAMPLE_PROGRAM, cfg)
        text = serialize_program(p)
        assert serialize_program(parse_program(text, cfg)) == text
        # gate lines gain an explicit zero angle; everything else is unchanged
        norm = [ln.split("#")[0].split() for ln in EXAMPLE_PROGRAM.splitlines()]
        out = [ln.split() for ln in text.splitlines()]
        assert len(out) == len(norm)
        for ref, got in zip(norm, out):
            assert got[: len(ref)] == ref
            assert got[len(ref):] in ([], ["0"])

    def test_single_gate_program(self):
        p = parse_program("1\nH 0 0", Config(1))
        assert len(p.blocks) == 1 and not p.swaps
        assert serialize_program(p) == "1\nH 0 0\n"

    def test_overlapping_swap(self):
        with pytest.raises(ParseError):
            parse_program("SQS 2 0 1 1 2", Config(4))

    @pytest.mark.parametrize(
        "text",
        [
            "2\nH 0 0",  # header longer than the body
            "1\nH 5 0",  # outside the chunk
            "1\nH 0 0\n1\nH 1 0",  # id used twice
            "1\nSQS 1 0 9",  # in-memory swap into a rank bit
            "1\nCSQS 1 0 2",  # cross-rank pair without a rank bit
            "x",
        ],
    )
    def test_rejects(self, text):
        with pytest.raises(ParseError):
            parse_program(text, Config(10, rank_qbit=2, chunk_qbit=4))

    def test_final_layout_replay(self):
        items = [SwapOp(SwapKind.IN_MEMORY, ((0, 2),)), SwapOp(SwapKind.IN_MEMORY, ((1, 2),))]
        p = Program(3, 0, 3, items)
        assert p.final_layout.phys_to_log == [2, 0, 1]
        p.final_layout.check()


class TestSwapOpAndLayout:
    def test_pairs_normalised(self):
        op = SwapOp(SwapKind.IN_MEMORY, ((5, 1), (0, 3)))
        assert op.pairs == ((0, 3), (1, 5)) and op.size == 2

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=20))
    def test_replay_is_permutation(self, swaps):
        layout = QubitLayout.identity(8)
        for a, b in swaps:
            if a != b:
                layout.apply(SwapOp(SwapKind.IN_MEMORY, ((a, b),)))
        layout.check()
        assert layout.inverse().inverse() == layout


class TestConfig:
    def test_reference_keys(self):
        c = parse_config("[system]\ntotal_qbit=31\nrank_qbit=0\nbuffer_qbit=28")
        assert (c.total_qbit, c.rank_qbit, c.buffer_qbit, c.chunk_qbit) == (31, 0, 28, 10)
        assert (c.fusion_qbit, c.cache_line_qbit) == (5, 2)
        assert c.ims and c.xrs and c.fusion and c.diagonal_fusion

    def test_default_clamping(self):
        c = parse_config("[system]\ntotal_qbit=4")
        assert (c.chunk_qbit, c.fusion_qbit, c.buffer_qbit) == (4, 4, 4)

    def test_missing_total(self):
        with pytest.raises(ConfigError):
            parse_config("[system]\nrank_qbit=2")

    @pytest.mark.parametrize(
        "body", ["total_qbit=4\nchunk_qbit=5", "total_qbit=4\nrank_qbit=4", "total_qbit=6\nfusion_qbit=0"]
    )
    def test_invariants(self, body):
        with pytest.raises(ConfigError):
            parse_config("[system]\n" + body)

    def test_roundtrip(self):
        c = Config(12, rank_qbit=2, chunk_qbit=6, ims=False)
        assert parse_config(serialize_config(c)) == c

    def test_raw_example_parses(self):
        assert len(parse_raw_circuit(EXAMPLE_RAW, 10)) == 14

    def test_block_positions(self):
        b = GateBlock([Gate(GateKind.CX, (0,), (3,))])
        assert b.positions == {0, 3}
