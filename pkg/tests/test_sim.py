"""Statevector simulator checks: conventions, gate algebra, measurement."""

import numpy as np
import pytest

from gamecompiler.rngutil import labeled_rng
from gamecompiler.sim import (
    DensityMatrix,
    GateOp,
    Statevector,
    bits_to_int,
    int_to_bits,
    phase_aligned_deviation,
    ry_matrix,
    trace_distance,
)


def random_state(n, rng):
    state = Statevector(n)
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    state.amps = amps / np.linalg.norm(amps)
    return state


class TestConventions:
    def test_qubit_zero_is_most_significant(self):
        state = Statevector(3)
        state.apply(GateOp("X", (0,)))
        # |100> sits at index 4
        assert abs(state.amps[4] - 1.0) < 1e-12

    def test_bits_int_round_trip(self):
        for value in range(16):
            assert bits_to_int(int_to_bits(value, 4)) == value

    def test_allocate_appends_at_tail(self):
        state = Statevector(1)
        state.apply(GateOp("X", (0,)))
        new = state.allocate(2, "anc")
        assert new == (1, 2)
        assert state.registers["anc"] == (1, 2)
        # old |1> becomes |100>
        assert abs(state.amps[4] - 1.0) < 1e-12

    def test_remove_tail_requires_fixed_outcome(self):
        state = Statevector(2)
        state.apply(GateOp("X", (1,)))
        state.remove_tail(1, 1)
        assert state.num_qubits == 1
        assert abs(state.amps[0] - 1.0) < 1e-12

    def test_qubit_cap(self):
        state = Statevector(2, max_qubits=3)
        with pytest.raises(ValueError):
            state.allocate(2)


class TestGates:
    def test_gate_matrices_are_unitary(self):
        rng = labeled_rng(7, "unitary")
        for kind in ("X", "Z", "H", "S"):
            m = GateOp(kind, (0,)).matrix()
            np.testing.assert_allclose(m @ m.conj().T, np.eye(2), atol=1e-12)
        theta = float(rng.uniform(0, 2 * np.pi))
        m = ry_matrix(theta)
        np.testing.assert_allclose(m @ m.conj().T, np.eye(2), atol=1e-12)

    def test_fast_paths_match_generic_matrix_application(self):
        """X/Z/S/CNOT/TOFFOLI use in-place slicing; the dense matrix path is
        the reference."""
        rng = labeled_rng(11, "fastpath")
        ops = [
            GateOp("X", (2,)),
            GateOp("Z", (0,)),
            GateOp("S", (3,)),
            GateOp("H", (1,)),
            GateOp("CNOT", (3, 1)),
            GateOp("CNOT", (0, 2)),
            GateOp("TOFFOLI", (2, 0, 3)),
            GateOp("RY", (1,), theta=0.7),
        ]
        for op in ops:
            state = random_state(4, rng)
            ref = state.copy()
            state.apply(op)
            ref.apply_matrix(op.matrix(), op.targets)
            assert np.abs(state.amps - ref.amps).max() < 1e-12

    def test_cnot_truth_table(self):
        for c, t in ((0, 1), (1, 0)):
            for basis in range(4):
                state = Statevector(2)
                state.amps[:] = 0
                state.amps[basis] = 1.0
                state.apply(GateOp("CNOT", (c, t)))
                bits = list(int_to_bits(basis, 2))
                bits[t] ^= bits[c]
                assert abs(state.amps[bits_to_int(bits)] - 1.0) < 1e-12

    def test_gate_target_validation(self):
        with pytest.raises(ValueError):
            GateOp("CNOT", (1, 1))
        with pytest.raises(ValueError):
            GateOp("TOFFOLI", (0, 1, 1))
        with pytest.raises(ValueError):
            GateOp("H", (0, 1))
        with pytest.raises(ValueError):
            GateOp("RY", (0,))


class TestMeasurement:
    def test_probabilities_match_amplitudes(self):
        rng = labeled_rng(3, "probs")
        state = random_state(3, rng)
        probs = state.probabilities((0, 1, 2))
        np.testing.assert_allclose(probs, np.abs(state.amps) ** 2, atol=1e-12)

    def test_measure_collapses_consistently(self):
        rng = labeled_rng(4, "collapse")
        for _ in range(25):
            state = random_state(3, rng)
            marginal = state.probabilities((1,))
            outcome = state.measure((1,), rng)
            assert marginal[outcome[0]] > 1e-12
            # post-measurement state has no weight on the other branch
            after = state.probabilities((1,))
            assert after[1 - outcome[0]] < 1e-12

    def test_measurement_statistics(self):
        rng = labeled_rng(5, "stats")
        counts = np.zeros(2)
        for _ in range(4000):
            state = Statevector(1)
            state.apply(GateOp("H", (0,)))
            counts[state.measure((0,), rng)[0]] += 1
        freq = counts / counts.sum()
        assert abs(freq[0] - 0.5) < 0.03

    def test_measure_and_remove_tail(self):
        rng = labeled_rng(6, "tail")
        state = Statevector(1)
        state.apply(GateOp("H", (0,)))
        anc = state.allocate(1)
        state.apply(GateOp("CNOT", (0, anc[0])))
        outcome = state.measure_and_remove_tail(1, rng)
        assert state.num_qubits == 1
        # entangled copy: surviving qubit agrees with the removed outcome
        assert abs(abs(state.amps[outcome[0]]) - 1.0) < 1e-12


class TestXorOracle:
    def test_oracle_matches_direct_permutation(self):
        rng = labeled_rng(8, "oracle")
        w = 2
        f0 = rng.permutation(1 << w)
        f1 = rng.permutation(1 << w)
        n = 1 + 2 * w
        state = random_state(n, rng)
        ref = state.copy()
        state.apply_xor_oracle(0, tuple(range(1, 1 + w)), tuple(range(1 + w, n)), f0, f1)
        # reference: explicit basis-state bookkeeping
        out = np.zeros_like(ref.amps)
        for idx in range(1 << n):
            bits = int_to_bits(idx, n)
            c = bits[0]
            x = bits_to_int(bits[1 : 1 + w])
            y = bits_to_int(bits[1 + w :])
            table = f1 if c else f0
            new_y = y ^ int(table[x])
            out[bits_to_int(bits[: 1 + w] + int_to_bits(new_y, w))] += ref.amps[idx]
        assert np.abs(state.amps - out).max() < 1e-12


class TestDensity:
    def test_density_of_subsystem(self):
        state = Statevector(2)
        state.apply(GateOp("H", (0,)))
        state.apply(GateOp("CNOT", (0, 1)))
        rho = state.density_of((0,)).matrix
        np.testing.assert_allclose(rho, np.eye(2) / 2, atol=1e-12)

    def test_trace_distance(self):
        a = DensityMatrix(np.diag([1.0, 0.0]).astype(complex))
        b = DensityMatrix(np.diag([0.0, 1.0]).astype(complex))
        assert abs(trace_distance(a, b) - 1.0) < 1e-12
        assert trace_distance(a, a) < 1e-12


def test_phase_aligned_deviation():
    rng = labeled_rng(9, "phase")
    state = random_state(3, rng)
    rotated = state.amps * np.exp(1j * 0.437)
    assert phase_aligned_deviation(state.amps, rotated) < 1e-12
    other = random_state(3, rng)
    assert phase_aligned_deviation(state.amps, other.amps) > 1e-3
