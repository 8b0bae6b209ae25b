import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blocksim.errors import UnsupportedGateError
from blocksim.gates import (
    BASIC_KINDS,
    Gate,
    GateKind,
    embed_diagonal,
    embed_matrix,
    gate_diagonal,
    gate_matrix,
    is_diagonal,
    kind_from_token,
    target_matrix,
)

angles = st.floats(min_value=-20, max_value=20, allow_nan=False)


def make(kind, params=None):
    width = kind.n_targets + kind.n_controls
    qs = tuple(range(width))
    if params is None:
        params = (0.3,) * kind.n_params
    return Gate(kind, qs[: kind.n_targets], qs[kind.n_targets:], params)


class TestMatrices:
    def test_hadamard(self):
        s = 1 / math.sqrt(2)
        np.testing.assert_allclose(gate_matrix(make(GateKind.H)), [[s, s], [s, -s]])

    def test_cx_swaps_control_one_rows(self):
        # control on local bit 1, target on bit 0: |10> <-> |11>
        m = gate_matrix(Gate(GateKind.CX, (0,), (1,)))
        expect = np.eye(4)[[0, 1, 3, 2]]
        np.testing.assert_array_equal(m, expect)

    def test_rzz_zero_is_identity(self):
        np.testing.assert_allclose(gate_matrix(make(GateKind.RZZ, (0.0,))), np.eye(4))

    def test_rz_diagonal(self):
        t = 0.7
        np.testing.assert_allclose(
            gate_diagonal(make(GateKind.RZ, (t,))), [np.exp(-0.5j * t), np.exp(0.5j * t)]
        )

    def test_cp_off_diagonal_zero(self):
        m = gate_matrix(make(GateKind.CP, (1.1,)))
        assert np.count_nonzero(m - np.diag(np.diag(m))) == 0
        assert is_diagonal(make(GateKind.CP))

    def test_classification(self):
        assert is_diagonal(make(GateKind.RZZ))
        assert not is_diagonal(make(GateKind.X))
        assert gate_diagonal(make(GateKind.H)) is None

    def test_fused_diagonal_returns_payload(self):
        d = np.exp(1j * np.arange(16))
        g = Gate(GateKind.DIAG, (0, 1, 2, 3), payload=d, members=(1, 2))
        np.testing.assert_array_equal(gate_diagonal(g), d)
        assert g.token == "D4"

    @settings(max_examples=1000, deadline=None)
    @given(kind=st.sampled_from(BASIC_KINDS), a=angles, b=angles, c=angles)
    def test_unitary(self, kind, a, b, c):
        m = gate_matrix(make(kind, (a, b, c)[: kind.n_params]))
        err = np.abs(m @ m.conj().T - np.eye(m.shape[0])).max()
        assert err <= 1e-12

    @given(kind=st.sampled_from(BASIC_KINDS), a=angles)
    def test_diagonal_consistency(self, kind, a):
        g = make(kind, (a, a, a)[: kind.n_params])
        d = gate_diagonal(g)
        if d is not None:
            np.testing.assert_array_equal(np.diag(d), gate_matrix(g))

    @given(kind=st.sampled_from([GateKind.CX, GateKind.CP]), a=angles)
    def test_control_block_is_target_matrix(self, kind, a):
        g = make(kind, (a,)[: kind.n_params])
        m = gate_matrix(g)
        np.testing.assert_allclose(m[2:, 2:], target_matrix(g), atol=1e-15)
        np.testing.assert_array_equal(m[:2, :2], np.eye(2))
        assert not m[:2, 2:].any() and not m[2:, :2].any()


class TestGateValidation:
    def test_repeated_qubit(self):
        with pytest.raises(ValueError):
            Gate(GateKind.CX, (1,), (1,))

    def test_arity(self):
        with pytest.raises(ValueError):
            Gate(GateKind.RZZ, (0,), params=(0.1,))

    def test_payload_only_on_fused(self):
        with pytest.raises(ValueError):
            Gate(GateKind.H, (0,), payload=np.ones(2))
        with pytest.raises(ValueError):
            Gate(GateKind.DIAG, (0,))

    def test_payload_frozen(self):
        g = Gate(GateKind.DIAG, (0,), payload=np.ones(2))
        with pytest.raises(ValueError):
            g.payload[0] = 2

    def test_tokens(self):
        assert kind_from_token("U") == (GateKind.U, None)
        assert kind_from_token("U3") == (GateKind.UNITARY, 3)
        assert kind_from_token("D4") == (GateKind.DIAG, 4)
        with pytest.raises(UnsupportedGateError):
            kind_from_token("TOFFOLI")

    def test_remap(self):
        g = Gate(GateKind.CP, (0,), (2,), (0.5,), id=3)
        assert g.remap({0: 5, 2: 1}) == Gate(GateKind.CP, (5,), (1,), (0.5,), id=3)


class TestEmbedding:
    def test_embed_matches_kron(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(2, 2))
        # operator on qubit 1 of a two-qubit register is kron(a, I)
        np.testing.assert_array_equal(embed_matrix(a, (1,), (0, 1)), np.kron(a, np.eye(2)))

    def test_embed_diagonal_reorders(self):
        d = np.array([1, 2, 3, 4])  # on (q1, q0): local bit0 = q1
        out = embed_diagonal(d, (1, 0), (0, 1))
        np.testing.assert_array_equal(out, [1, 3, 2, 4])
