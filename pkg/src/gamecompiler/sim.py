"""Dense statevector simulator.

Conventions:

- Qubit 0 is the most significant bit of a basis-state index, so the basis
  state |b0 b1 ... b_{n-1}> lives at amplitude index sum(b_i << (n-1-i)).
- Gates act in place; ``Statevector`` instances are not thread safe and must
  be used by one owner at a time.
- Measurement is Born-rule sampling from a caller-supplied generator, so a
  fixed seed makes any run replayable.
- Global phase is never compared; state equality checks in tests go through
  density matrices or probability vectors.

The gate set is X, Z, H, S, CNOT, TOFFOLI and RY(theta).  A basis-state
measurement of an observable at angle theta in the X-Z plane is expressed as
RY(-2 * theta) followed by a standard-basis measurement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_QUBITS = 20

ATOL_STATE = 1e-9
ATOL_ALGEBRA = 1e-12

_SQ2 = 1.0 / np.sqrt(2.0)

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_H = np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex)
_S = np.array([[1, 0], [0, 1j]], dtype=complex)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
_TOFFOLI = np.eye(8, dtype=complex)
_TOFFOLI[6, 6] = _TOFFOLI[7, 7] = 0
_TOFFOLI[6, 7] = _TOFFOLI[7, 6] = 1

_GATE_ARITY = {"X": 1, "Z": 1, "H": 1, "S": 1, "RY": 1, "CNOT": 2, "TOFFOLI": 3}
_FIXED_MATRIX = {"X": _X, "Z": _Z, "H": _H, "S": _S, "CNOT": _CNOT, "TOFFOLI": _TOFFOLI}


_AXIS_ORDERS: dict[tuple, tuple[tuple[int, ...], tuple[int, ...]]] = {}


def _axis_orders(n: int, targets: tuple[int, ...]) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Transpose orders bringing ``targets`` to the front and back again."""
    key = (n, targets)
    cached = _AXIS_ORDERS.get(key)
    if cached is None:
        tset = set(targets)
        perm = targets + tuple(a for a in range(n) if a not in tset)
        inv = [0] * n
        for pos, axis in enumerate(perm):
            inv[axis] = pos
        cached = _AXIS_ORDERS[key] = (perm, tuple(inv))
    return cached


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


@dataclass(frozen=True)
class GateOp:
    """One gate application: a kind, target qubits, and for RY an angle.

    For CNOT the targets are (control, target); for TOFFOLI they are
    (control, control, target).
    """

    kind: str
    targets: tuple[int, ...]
    theta: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in _GATE_ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if len(self.targets) != _GATE_ARITY[self.kind]:
            raise ValueError(f"{self.kind} takes {_GATE_ARITY[self.kind]} targets")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("gate targets must be distinct")
        if (self.kind == "RY") != (self.theta is not None):
            raise ValueError("theta is required for RY and only for RY")

    def matrix(self) -> np.ndarray:
        if self.kind == "RY":
            return ry_matrix(float(self.theta))
        return _FIXED_MATRIX[self.kind]

    def shifted(self, offset: int) -> "GateOp":
        return GateOp(self.kind, tuple(t + offset for t in self.targets), self.theta)

    def remapped(self, index_map: dict[int, int] | list[int]) -> "GateOp":
        return GateOp(self.kind, tuple(index_map[t] for t in self.targets), self.theta)


class DensityMatrix:
    """A validated density matrix (hermitian, unit trace, PSD within 1e-9)."""

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError("density matrix must be square")
        if not np.allclose(matrix, matrix.conj().T, atol=ATOL_STATE):
            raise ValueError("density matrix must be hermitian")
        if abs(np.trace(matrix).real - 1.0) > ATOL_STATE:
            raise ValueError("density matrix must have unit trace")
        if np.linalg.eigvalsh(matrix).min() < -ATOL_STATE:
            raise ValueError("density matrix must be positive semidefinite")
        self.matrix = matrix

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def trace_distance(a: DensityMatrix | np.ndarray, b: DensityMatrix | np.ndarray) -> float:
    """Half the sum of absolute eigenvalues of the difference."""
    ma = a.matrix if isinstance(a, DensityMatrix) else np.asarray(a, dtype=complex)
    mb = b.matrix if isinstance(b, DensityMatrix) else np.asarray(b, dtype=complex)
    if ma.shape != mb.shape:
        raise ValueError("dimension mismatch")
    return 0.5 * float(np.abs(np.linalg.eigvalsh(ma - mb)).sum())


class Statevector:
    """A pure state on a dynamically sized qubit array with named registers.

    Registers are contiguous index ranges recorded at allocation time.
    Ancilla qubits are always allocated at the tail and must be removed from
    the tail, which keeps every earlier index stable.
    """

    __slots__ = ("amps", "num_qubits", "registers", "max_qubits", "meta")

    def __init__(self, num_qubits: int, max_qubits: int = DEFAULT_MAX_QUBITS):
        if num_qubits < 1:
            raise ValueError("need at least one qubit")
        if num_qubits > max_qubits:
            raise ValueError(f"{num_qubits} qubits exceeds cap {max_qubits}")
        self.num_qubits = int(num_qubits)
        self.max_qubits = int(max_qubits)
        self.amps = np.zeros(1 << num_qubits, dtype=complex)
        self.amps[0] = 1.0
        self.registers: dict[str, tuple[int, ...]] = {}
        self.meta: dict = {}

    # -- structure ---------------------------------------------------------

    def copy(self) -> "Statevector":
        out = object.__new__(Statevector)
        out.amps = self.amps.copy()
        out.num_qubits = self.num_qubits
        out.max_qubits = self.max_qubits
        out.registers = dict(self.registers)
        out.meta = {k: (set(v) if isinstance(v, set) else v) for k, v in self.meta.items()}
        return out

    def name_register(self, name: str, qubits: tuple[int, ...] | list[int]) -> tuple[int, ...]:
        qubits = tuple(int(q) for q in qubits)
        for q in qubits:
            if not 0 <= q < self.num_qubits:
                raise ValueError(f"qubit {q} out of range")
        if name in self.registers:
            raise ValueError(f"register {name!r} already exists")
        self.registers[name] = qubits
        return qubits

    def allocate(self, count: int, name: str | None = None) -> tuple[int, ...]:
        """Append ``count`` fresh |0> qubits at the tail."""
        if count < 1:
            raise ValueError("count must be positive")
        if self.num_qubits + count > self.max_qubits:
            raise ValueError("qubit cap exceeded")
        # Appended qubits become the least significant axes: old index i
        # maps to i << count with the new tail in |0>.
        new = np.zeros(len(self.amps) << count, dtype=complex)
        new.reshape(-1, 1 << count)[:, 0] = self.amps
        self.amps = new
        start = self.num_qubits
        self.num_qubits += count
        qubits = tuple(range(start, start + count))
        if name is not None:
            self.name_register(name, qubits)
        return qubits

    def remove_tail(self, count: int, outcome: int) -> None:
        """Drop the last ``count`` qubits, which must be in basis state ``outcome``.

        Used after measuring ancilla blocks; any amplitude outside the given
        basis state of the tail block is an internal error.
        """
        if count < 1 or count >= self.num_qubits:
            raise ValueError("invalid tail size")
        block = self.amps.reshape(-1, 1 << count)
        residual = np.abs(block).sum() - np.abs(block[:, outcome]).sum()
        if residual > 1e-7:
            raise ValueError("tail qubits are not in the expected basis state")
        self.amps = np.ascontiguousarray(block[:, outcome])
        self.num_qubits -= count
        for name, qs in list(self.registers.items()):
            if any(q >= self.num_qubits for q in qs):
                del self.registers[name]

    # -- dynamics ----------------------------------------------------------

    def apply_matrix(self, mat: np.ndarray, targets: tuple[int, ...]) -> None:
        n, k = self.num_qubits, len(targets)
        for t in targets:
            if not 0 <= t < n:
                raise ValueError(f"qubit {t} out of range")
        perm, inv = _axis_orders(n, tuple(targets))
        psi = self.amps.reshape((2,) * n).transpose(perm)
        flat = psi.reshape(1 << k, -1)
        flat = mat @ flat
        self.amps = flat.reshape((2,) * n).transpose(inv).copy().reshape(-1)

    def _select(self, assignments) -> tuple:
        sel = [slice(None)] * self.num_qubits
        for q, b in assignments:
            if not 0 <= q < self.num_qubits:
                raise ValueError(f"qubit {q} out of range")
            sel[q] = b
        return tuple(sel)

    def _view(self) -> np.ndarray:
        # Trailing singleton keeps selections array-valued even when every
        # qubit axis is pinned.
        return self.amps.reshape((2,) * self.num_qubits + (1,))

    def _swap_halves(self, fixed, target: int) -> None:
        view = self._view()
        lo = view[self._select(fixed + [(target, 0)])]
        hi = view[self._select(fixed + [(target, 1)])]
        tmp = lo.copy()
        lo[...] = hi
        hi[...] = tmp

    def apply(self, op: GateOp) -> "Statevector":
        # Pauli/phase/controlled-flip gates act by slicing; only genuinely
        # mixing gates (H, RY) pay for a matrix product.
        kind = op.kind
        if kind == "X":
            self._swap_halves([], op.targets[0])
        elif kind == "Z":
            self._view()[self._select([(op.targets[0], 1)])] *= -1.0
        elif kind == "S":
            self._view()[self._select([(op.targets[0], 1)])] *= 1.0j
        elif kind == "CNOT":
            c, t = op.targets
            if c == t:
                raise ValueError("control and target must differ")
            self._swap_halves([(c, 1)], t)
        elif kind == "TOFFOLI":
            a, b, t = op.targets
            if len({a, b, t}) != 3:
                raise ValueError("toffoli qubits must be distinct")
            self._swap_halves([(a, 1), (b, 1)], t)
        else:
            self.apply_matrix(op.matrix(), op.targets)
        return self

    def apply_all(self, ops) -> "Statevector":
        for op in ops:
            self.apply(op)
        return self

    def apply_xor_oracle(
        self,
        control: int,
        inputs: tuple[int, ...],
        outputs: tuple[int, ...],
        f0: np.ndarray,
        f1: np.ndarray,
    ) -> None:
        """Map |c>|w>|t> to |c>|w>|t XOR f_c(w)> for table pair (f0, f1).

        ``inputs`` and ``outputs`` must have equal width; the tables give
        f_c as integer arrays indexed by w.  This is the reversible-oracle
        primitive used to evaluate a claw-free function pair in
        superposition.
        """
        if len(inputs) != len(outputs):
            raise ValueError("input and output blocks must have equal width")
        w = len(inputs)
        order = (control,) + tuple(inputs) + tuple(outputs)
        if len(set(order)) != len(order):
            raise ValueError("oracle qubits must be distinct")
        n = self.num_qubits
        size = 1 << w
        t = np.arange(size)
        f0 = np.asarray(f0, dtype=np.int64)
        f1 = np.asarray(f1, dtype=np.int64)
        if inputs == tuple(range(n - 2 * w, n - w)) and outputs == tuple(range(n - w, n)):
            # Tail layout: one gather over (prefix, w, t) with the table
            # selected per prefix row by its control bit.
            cube = self.amps.reshape(-1, size, size)
            pre = cube.shape[0]
            cbit = (np.arange(pre) >> (n - 2 * w - 1 - control)) & 1
            tbl = np.where(cbit[:, None], f1[None, :], f0[None, :])
            idx = t[None, None, :] ^ tbl[:, :, None]
            self.amps = cube[np.arange(pre)[:, None, None], t[None, :, None], idx].reshape(-1)
            return
        psi = self.amps.reshape((2,) * n)
        psi = np.moveaxis(psi, order, range(1 + 2 * w))
        shape = psi.shape
        cube = np.ascontiguousarray(psi).reshape(2, size, size, -1)
        out = np.empty_like(cube)
        for c, table in ((0, f0), (1, f1)):
            idx = t[None, :] ^ table[:, None]
            out[c] = cube[c][np.arange(size)[:, None], idx]
        psi = np.moveaxis(out.reshape(shape), range(1 + 2 * w), order)
        self.amps = np.ascontiguousarray(psi).reshape(-1)

    # -- readout -----------------------------------------------------------

    def norm_error(self) -> float:
        return abs(float(np.vdot(self.amps, self.amps).real) - 1.0)

    def probabilities(self, qubits: tuple[int, ...]) -> np.ndarray:
        """Exact Born probabilities of the listed qubits, first qubit = MSB."""
        n, k = self.num_qubits, len(qubits)
        psi = self.amps.reshape((2,) * n)
        psi = np.moveaxis(psi, qubits, range(k))
        block = np.ascontiguousarray(psi).reshape(1 << k, -1)
        return np.einsum("ij,ij->i", block, block.conj()).real

    def measure(self, qubits: tuple[int, ...], rng: np.random.Generator) -> tuple[int, ...]:
        """Measure the listed qubits in the standard basis, collapsing in place."""
        n, k = self.num_qubits, len(qubits)
        psi = self.amps.reshape((2,) * n)
        moved = np.moveaxis(psi, qubits, range(k))
        block = np.ascontiguousarray(moved).reshape(1 << k, -1)
        probs = np.einsum("ij,ij->i", block, block.conj()).real
        outcome = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum()))
        outcome = min(outcome, (1 << k) - 1)
        collapsed = np.zeros_like(block)
        collapsed[outcome] = block[outcome] / np.sqrt(probs[outcome])
        psi = np.moveaxis(collapsed.reshape(moved.shape), range(k), qubits)
        self.amps = np.ascontiguousarray(psi).reshape(-1)
        return tuple((outcome >> (k - 1 - i)) & 1 for i in range(k))

    def measure_and_remove_tail(self, count: int, rng: np.random.Generator) -> tuple[int, ...]:
        """Measure the last ``count`` qubits and drop them from the state."""
        if count < 1 or count >= self.num_qubits:
            raise ValueError("invalid tail size")
        block = self.amps.reshape(-1, 1 << count)
        probs = np.einsum("ij,ij->j", block.real, block.real) + np.einsum(
            "ij,ij->j", block.imag, block.imag
        )
        outcome = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum()))
        outcome = min(outcome, (1 << count) - 1)
        self.amps = np.ascontiguousarray(block[:, outcome]) / np.sqrt(probs[outcome])
        self.num_qubits -= count
        for name, qs in list(self.registers.items()):
            if any(q >= self.num_qubits for q in qs):
                del self.registers[name]
        return tuple((outcome >> (count - 1 - i)) & 1 for i in range(count))

    def density_of(self, which: str | tuple[int, ...]) -> DensityMatrix:
        """Reduced density matrix of a register name or explicit qubit list."""
        qubits = self.registers[which] if isinstance(which, str) else tuple(which)
        n, k = self.num_qubits, len(qubits)
        psi = self.amps.reshape((2,) * n)
        psi = np.moveaxis(psi, qubits, range(k))
        block = np.ascontiguousarray(psi).reshape(1 << k, -1)
        return DensityMatrix(block @ block.conj().T)


def bits_to_int(bits) -> int:
    value = 0
    for b in bits:
        value = (value << 1) | (int(b) & 1)
    return value


def int_to_bits(value: int, width: int) -> tuple[int, ...]:
    return tuple((int(value) >> (width - 1 - i)) & 1 for i in range(width))


def phase_aligned_deviation(reference: np.ndarray, candidate: np.ndarray) -> float:
    """Largest amplitude difference after removing the global phase.

    Pad-frame tracking is projective: conjugating a Pauli pad through H or S
    reorders X against Z, which is a classical-bit-dependent global phase.
    Equality of the physical states is therefore phase-aligned equality.
    """
    overlap = complex(np.vdot(reference, candidate))
    if abs(overlap) < 1e-12:
        return 2.0
    return float(np.abs(candidate - (overlap / abs(overlap)) * reference).max())
