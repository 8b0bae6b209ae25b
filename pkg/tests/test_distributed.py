import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _data import example_circuit, example_config
from blocksim.circuit import Config, GateBlock, Program, SwapKind, SwapOp
from blocksim.distributed import (
    Exchanger,
    RankSlice,
    gather_state,
    partition,
    simulate_distributed,
    spawn_ranks,
    xrs_swap,
)
from blocksim.engine import bitswap, init_state, simulate_program
from blocksim.errors import ContractError, InfeasibleError
from blocksim.gates import Gate, GateKind
from blocksim.optimizer import aio_optimize
from blocksim.tools import fidelity, gen_random, layout_apply, oracle_simulate


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)


def cross_op(n, r, s, rng):
    local = n - r
    highs = rng.permutation(np.arange(local, n))[:s]
    return SwapOp(SwapKind.CROSS_RANK, tuple(zip(range(local - s, local), highs.tolist())))


class TestPartitionGather:
    def test_gather_small(self):
        slices = [RankSlice(0, np.array([1, 0], dtype=complex)), RankSlice(1, np.zeros(2, complex))]
        np.testing.assert_array_equal(gather_state(slices), [1, 0, 0, 0])

    @settings(max_examples=30, deadline=None)
    @given(n=st.integers(1, 16), r=st.integers(0, 3), seed=st.integers(0, 1000))
    def test_inverse(self, n, r, seed):
        r = min(r, n)
        v = random_state(n, seed)
        assert np.array_equal(gather_state(partition(v, r)), v)

    def test_missing_rank(self):
        with pytest.raises(ValueError):
            gather_state([RankSlice(0, np.zeros(2, complex)), RankSlice(2, np.zeros(2, complex))])


class TestXrsSwap:
    def test_three_qubit_example(self):
        v = random_state(3, 1)
        slices = partition(v, 1)
        op = SwapOp(SwapKind.CROSS_RANK, ((1, 2),))
        out = gather_state(xrs_swap(slices, op, buffer_bits=1))
        # 0b010 <-> 0b100 and 0b011 <-> 0b101
        expect = v[[0, 1, 4, 5, 2, 3, 6, 7]]
        assert np.array_equal(out, expect)

    def test_empty_op(self):
        v = random_state(4, 2)
        out = gather_state(xrs_swap(partition(v, 2), SwapOp(SwapKind.CROSS_RANK, ()), 0))
        assert np.array_equal(out, v)

    @pytest.mark.parametrize("buffer_bits", range(2, 15))
    def test_buffer_size_does_not_change_result(self, buffer_bits):
        n, r = 16, 2
        v = random_state(n, 7)
        op = SwapOp(SwapKind.CROSS_RANK, ((12, 15), (13, 14)))
        ex = Exchanger(1 << r, n - r, buffer_bits)
        out = gather_state(xrs_swap(partition(v, r), op, buffer_bits, ex))
        assert np.array_equal(out, v[bitswap(np.arange(1 << n), op.pairs)])
        assert max(ex.peak) <= 1 << buffer_bits
        assert all(rd.sent == rd.received for rd in ex.rounds)

    def test_buffer_too_small(self):
        op = SwapOp(SwapKind.CROSS_RANK, ((4, 6), (5, 7)))
        with pytest.raises(InfeasibleError):
            xrs_swap(partition(random_state(8, 0), 2), op, buffer_bits=1)

    def test_requires_top_positions(self):
        op = SwapOp(SwapKind.CROSS_RANK, ((0, 6),))
        with pytest.raises(ContractError):
            xrs_swap(partition(random_state(8, 0), 2), op, buffer_bits=3)

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(2, 12), r=st.integers(1, 3), seed=st.integers(0, 10_000))
    def test_matches_bitswap(self, n, r, seed):
        r = min(r, n - 1)
        rng = np.random.default_rng(seed)
        s = int(rng.integers(0, min(r, n - r) + 1))
        b = int(rng.integers(s, n - r + 1))
        op = cross_op(n, r, s, rng)
        v = random_state(n, seed)
        ex = Exchanger(1 << r, n - r, b)
        out = gather_state(xrs_swap(partition(v, r), op, b, ex))
        assert np.array_equal(out, v[bitswap(np.arange(1 << n), op.pairs)])
        assert max(ex.peak) <= 1 << b


class TestSpawnRanks:
    def test_single_hadamard(self):
        cfg = Config(4, rank_qbit=1, chunk_qbit=2)
        prog = Program(4, 1, 2, [GateBlock([Gate(GateKind.H, (0,))])])
        slices = spawn_ranks(cfg, prog)
        r = 1 / math.sqrt(2)
        np.testing.assert_allclose(slices[0].amplitudes, [r, r] + [0] * 6)
        assert not slices[1].amplitudes.any()

    def test_empty_program(self):
        cfg = Config(5, rank_qbit=2, chunk_qbit=2)
        slices = spawn_ranks(cfg, Program(5, 2, 2, []), initial=9)
        assert np.array_equal(gather_state(slices), init_state(5, 9))

    def test_block_on_rank_bit(self):
        cfg = Config(4, rank_qbit=1, chunk_qbit=3)
        prog = Program(4, 1, 4, [GateBlock([Gate(GateKind.H, (3,))])])
        with pytest.raises(ContractError):
            spawn_ranks(cfg, prog)

    def test_needs_rank_bits(self):
        with pytest.raises(ContractError):
            spawn_ranks(Config(3), Program(3, 0, 3, []))

    def test_worked_example(self):
        c = example_circuit(seed=3)
        cfg = example_config()
        prog = aio_optimize(c, cfg)
        state, layout = simulate_distributed(prog, cfg)
        assert fidelity(layout_apply(state, layout), oracle_simulate(c)) >= 1 - 1e-10

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(4, 12), r=st.integers(1, 3), seed=st.integers(0, 10_000),
           xrs=st.booleans(), b=st.integers(0, 12))
    def test_equals_single_rank(self, n, r, seed, xrs, b):
        r = min(r, n - 2)
        c = gen_random(n, 40, seed)
        cfg = Config(n, rank_qbit=r, chunk_qbit=min(3, n - r), xrs=xrs,
                     buffer_qbit=min(max(b, r), n - r))
        prog = aio_optimize(c, cfg)
        multi, _ = simulate_distributed(prog, cfg)
        single, _ = simulate_program(prog, cfg, threads=1)
        assert np.array_equal(multi, single)
