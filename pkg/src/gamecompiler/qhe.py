"""Toy quantum homomorphic encryption over a key-escrow classical backend.

Quantum data is encrypted with a Pauli one-time pad: Enc applies Z^z X^x to
each qubit for fresh uniform bits (x, z) and keeps those bits as classical
ciphertexts.  Classical bits are encrypted with the X pad alone, giving a
classical ciphertext.  The classical backend is an idealized key-value
escrow: a ciphertext is a fresh random 128-bit handle whose plaintext lives
in a table held by the key, so handles carry no information about plaintexts
(a deliberately leaky mode, where the handle spells out its bit, exists to
demonstrate what breaks without that property).  Homomorphic evaluation over
handles (XOR, AND, constants) needs no secret key, only the public
evaluation context of the key.

Clifford gates are evaluated by applying the gate to the padded qubits and
rewriting the pad bits homomorphically.  Toffoli additionally produces
non-Pauli byproduct operators, which are removed with an encrypted CNOT: a
claw-free function pair derived from an encrypted pad bit s is evaluated in
superposition, and measuring the image and the Hadamard-transformed claw
register applies CNOT^s up to Pauli corrections computable under encryption
from the trapdoor.  The toy claw-free pair is a seeded random permutation pi
on (1+rho)-bit strings with f0(m, r) = pi(m || r) and f1(m, r) =
pi((m XOR s) || r), so claw preimages differ exactly by s in the first bit.

Pad-rule and byproduct algebra in this module is locked by exhaustive tests
against plain evaluation over every pad assignment and basis input.
"""

from __future__ import annotations

import hashlib
import weakref
from dataclasses import dataclass

import numpy as np

from gamecompiler.sim import GateOp, Statevector, bits_to_int, int_to_bits, phase_aligned_deviation
from gamecompiler.rngutil import spawn

DEFAULT_RHO = 2

_REGISTRY: "weakref.WeakValueDictionary[str, _KeyMaterial]" = weakref.WeakValueDictionary()


class QheError(ValueError):
    pass


class _KeyMaterial:
    __slots__ = (
        "key_id",
        "lam",
        "mode",
        "rho",
        "escrow",
        "rng",
        "tcf_cache",
        "encrypted_cnot_count",
        "toffoli_count",
        "_pool",
        "_pool_at",
        "__weakref__",
    )

    def __init__(self, key_id: str, lam: int, mode: str, rho: int, rng: np.random.Generator):
        self.key_id = key_id
        self.lam = lam
        self.mode = mode
        self.rho = rho
        self.escrow: dict[str, int] = {}
        self.rng = rng
        self.tcf_cache: dict[str, ToyTcf] = {}
        self.encrypted_cnot_count = 0
        self.toffoli_count = 0
        self._pool = b""
        self._pool_at = 0

    def new_handle(self, bit: int) -> str:
        # Handles are draws from a per-key pool of rng bytes; the pool is a
        # batching detail, each handle is still 16 fresh random bytes.
        at = self._pool_at
        if at >= len(self._pool):
            self._pool = self.rng.bytes(1024)
            at = 0
        self._pool_at = at + 16
        hexpart = self._pool[at : at + 16].hex()
        if self.mode == "leaky":
            handle = f"leak{bit}:" + hexpart[:24]
        else:
            handle = hexpart
        self.escrow[handle] = bit
        return handle


@dataclass(frozen=True)
class SecretKey:
    """Decryption capability: holds the escrow of every handle it issued."""

    key_id: str
    lam: int
    mode: str
    rho: int
    material: _KeyMaterial

    def peek(self, handle: str) -> int:
        """Escrow lookup; this is the decryption path, it requires the key."""
        try:
            return self.material.escrow[handle]
        except KeyError:
            raise QheError("unknown or tampered handle") from None


@dataclass(frozen=True)
class ClassicalCt:
    """One encrypted bit: an opaque handle under a named key."""

    handle: str
    key_id: str


@dataclass(frozen=True)
class PaddedBits:
    """Encryption of a classical bit string: padded bits plus pad handles."""

    bits: tuple[int, ...]
    pads: tuple[ClassicalCt, ...]
    key_id: str

    def __post_init__(self) -> None:
        if len(self.bits) != len(self.pads):
            raise QheError("padded bits and pad handles must align")

    @property
    def width(self) -> int:
        return len(self.bits)


class QheCiphertext:
    """Pad-encrypted qubits inside a host statevector.

    ``qubits`` are host indices and ``pads[i]`` is the (x, z) handle pair of
    ``qubits[i]``.  The plaintext is recovered by applying X^x Z^z and the
    invariant maintained by every eval operation is that un-padding yields
    exactly the plain-circuit state.
    """

    __slots__ = ("state", "qubits", "pads", "key_id")

    def __init__(
        self,
        state: Statevector,
        qubits: tuple[int, ...],
        pads: list[tuple[ClassicalCt, ClassicalCt]],
        key_id: str,
    ):
        if len(qubits) != len(pads):
            raise QheError("pad list must align with qubits")
        self.state = state
        self.qubits = tuple(qubits)
        self.pads = list(pads)
        self.key_id = key_id


def gen(lam: int, rng: np.random.Generator, mode: str = "ideal", rho: int = DEFAULT_RHO) -> SecretKey:
    """Sample a fresh key.  ``mode`` is "ideal" or "leaky"; ``rho`` sizes the
    claw-free domain used by encrypted CNOT."""
    if lam < 1:
        raise QheError("security parameter must be positive")
    if mode not in ("ideal", "leaky"):
        raise QheError(f"unknown mode {mode!r}")
    if rho < 1:
        raise QheError("rho must be at least 1")
    key_rng = spawn(rng)
    key_id = key_rng.bytes(16).hex()
    material = _KeyMaterial(key_id, int(lam), mode, int(rho), key_rng)
    _REGISTRY[key_id] = material
    return SecretKey(key_id, int(lam), mode, int(rho), material)


def _material(key_id: str) -> _KeyMaterial:
    try:
        return _REGISTRY[key_id]
    except KeyError:
        raise QheError("unknown key (expired or never issued)") from None


# -- classical layer ---------------------------------------------------------


def enc_classical(sk: SecretKey, bit: int) -> ClassicalCt:
    if bit not in (0, 1):
        raise QheError("plaintext must be a bit")
    return ClassicalCt(sk.material.new_handle(bit), sk.key_id)


def dec_classical(sk: SecretKey, ct: ClassicalCt) -> int:
    if ct.key_id != sk.key_id:
        raise QheError("ciphertext under a different key")
    return sk.peek(ct.handle)


def _eval_material(*cts: ClassicalCt) -> _KeyMaterial:
    key_ids = {ct.key_id for ct in cts}
    if len(key_ids) != 1:
        raise QheError("handles under different keys cannot be combined")
    material = _material(cts[0].key_id)
    for ct in cts:
        if ct.handle not in material.escrow:
            raise QheError("unknown or tampered handle")
    return material


def eval_xor(a: ClassicalCt, b: ClassicalCt) -> ClassicalCt:
    m = _eval_material(a, b)
    return ClassicalCt(m.new_handle(m.escrow[a.handle] ^ m.escrow[b.handle]), a.key_id)


def eval_and(a: ClassicalCt, b: ClassicalCt) -> ClassicalCt:
    m = _eval_material(a, b)
    return ClassicalCt(m.new_handle(m.escrow[a.handle] & m.escrow[b.handle]), a.key_id)


def eval_const(context: ClassicalCt, bit: int) -> ClassicalCt:
    """Evaluate a constant circuit under the key of ``context``."""
    if bit not in (0, 1):
        raise QheError("constant must be a bit")
    m = _eval_material(context)
    return ClassicalCt(m.new_handle(bit), context.key_id)


# -- quantum layer -----------------------------------------------------------


def enc_bits(sk: SecretKey, value: int, width: int, rng: np.random.Generator) -> PaddedBits:
    """Encrypt a classical string: X pad only, classical ciphertext out."""
    if not 0 <= value < (1 << width):
        raise QheError("value out of range for width")
    plain = int_to_bits(value, width)
    pads = [int(rng.integers(0, 2)) for _ in range(width)]
    return PaddedBits(
        bits=tuple(p ^ b for p, b in zip(pads, plain)),
        pads=tuple(ClassicalCt(sk.material.new_handle(p), sk.key_id) for p in pads),
        key_id=sk.key_id,
    )


def dec_bits(sk: SecretKey, ct: PaddedBits) -> int:
    if ct.key_id != sk.key_id:
        raise QheError("ciphertext under a different key")
    return bits_to_int(b ^ sk.peek(p.handle) for b, p in zip(ct.bits, ct.pads))


def enc_register(
    sk: SecretKey,
    state: Statevector,
    qubits: tuple[int, ...],
    rng: np.random.Generator,
    pads: list[tuple[int, int]] | None = None,
) -> QheCiphertext:
    """Pad-encrypt host qubits in place.  ``pads`` forces (x, z) values for
    exhaustive tests; by default they are fresh uniform bits."""
    taken: set = state.meta.setdefault("encrypted", set())
    for q in qubits:
        if q in taken:
            raise QheError(f"qubit {q} is already encrypted")
    if pads is None:
        pads = [(int(rng.integers(0, 2)), int(rng.integers(0, 2))) for _ in qubits]
    if len(pads) != len(qubits):
        raise QheError("pad list must align with qubits")
    pad_cts: list[tuple[ClassicalCt, ClassicalCt]] = []
    for q, (x, z) in zip(qubits, pads):
        if x:
            state.apply(GateOp("X", (q,)))
        if z:
            state.apply(GateOp("Z", (q,)))
        pad_cts.append(
            (
                ClassicalCt(sk.material.new_handle(x), sk.key_id),
                ClassicalCt(sk.material.new_handle(z), sk.key_id),
            )
        )
        taken.add(q)
    return QheCiphertext(state, qubits, pad_cts, sk.key_id)


def dec_register(sk: SecretKey, ct: QheCiphertext) -> None:
    """Remove the pads in place, returning the qubits to plaintext."""
    if ct.key_id != sk.key_id:
        raise QheError("ciphertext under a different key")
    taken: set = ct.state.meta.setdefault("encrypted", set())
    for q, (x_ct, z_ct) in zip(ct.qubits, ct.pads):
        if sk.peek(z_ct.handle):
            ct.state.apply(GateOp("Z", (q,)))
        if sk.peek(x_ct.handle):
            ct.state.apply(GateOp("X", (q,)))
        taken.discard(q)


# -- trapdoor claw-free pair -------------------------------------------------


class ToyTcf:
    """Claw-free pair planted on a secret bit: a keyed random permutation pi
    over (1+rho)-bit strings, with f_a(w) = pi(w XOR (a*s << rho)).

    ``forward`` is the public direction.  Inversion uses the stored inverse
    table and models trapdoor access: evaluators only reach it through the
    escrow-backed pad-correction step.
    """

    __slots__ = ("rho", "s", "perm", "inv")

    def __init__(self, rho: int, s: int, seed: bytes):
        self.rho = rho
        self.s = s & 1
        size = 1 << (1 + rho)
        self.perm = _keyed_permutation(seed, size)
        self.inv = np.empty_like(self.perm)
        self.inv[self.perm] = np.arange(size)

    def forward(self, a: int, w: int) -> int:
        return int(self.perm[w ^ ((a & self.s) << self.rho)])

    def tables(self) -> tuple[np.ndarray, np.ndarray]:
        f0 = self.perm
        f1 = self.perm[np.arange(len(self.perm)) ^ (self.s << self.rho)]
        return f0, f1

    def invert(self, a: int, y: int) -> int:
        return int(self.inv[y]) ^ ((a & self.s) << self.rho)


def _keyed_permutation(seed: bytes, size: int) -> np.ndarray:
    """Deterministic permutation of range(size): argsort of a keyed hash
    stream, one 64-bit value per element."""
    blocks = []
    need = 8 * size
    counter = 0
    while need > 0:
        take = min(64, need)
        blocks.append(hashlib.blake2b(seed + counter.to_bytes(4, "big"), digest_size=take).digest())
        need -= take
        counter += 1
    vals = np.frombuffer(b"".join(blocks), dtype="<u8")
    return np.argsort(vals, kind="stable").astype(np.int64)


def derive_tcf(s_ct: ClassicalCt) -> ToyTcf:
    """Publicly derive the claw-free pair attached to an encrypted bit.

    Derivation is deterministic per (key, handle), modeling a published
    function description; the planted bit comes from the escrow and never
    leaves the returned object except through ``invert``.
    """
    m = _eval_material(s_ct)
    tcf = m.tcf_cache.get(s_ct.handle)
    if tcf is None:
        seed = (m.key_id + "/" + s_ct.handle).encode()
        tcf = ToyTcf(m.rho, m.escrow[s_ct.handle], seed)
        m.tcf_cache[s_ct.handle] = tcf
    return tcf


# -- gate evaluation ---------------------------------------------------------

_CLIFFORD_KINDS = ("X", "Z", "H", "S", "CNOT")


def _encrypted_cnot_raw(
    state: Statevector,
    qi: int,
    qj: int,
    s_ct: ClassicalCt,
    rng: np.random.Generator,
) -> tuple[ClassicalCt, ClassicalCt]:
    """Apply CNOT^s physically from ``qi`` to ``qj`` up to Pauli byproducts.

    Returns encrypted byproduct bits (gamma, mu0): the physical action is
    (Z^gamma on qi) (X^mu0 on qj) CNOT^s.  Callers account for the
    byproducts and for commuting CNOT^s past any recorded pads.

    Steps: derive the claw-free pair from s; superpose the claw register and
    evaluate f in superposition controlled on qi; measure the image (the
    claw register now holds the two preimages of y, entangled with qi); XOR
    the claw's first qubit into qj; Hadamard and measure the claw register;
    fold the measured mask into pad corrections using the trapdoor under
    encryption.
    """
    m = _eval_material(s_ct)
    tcf = derive_tcf(s_ct)
    width = 1 + m.rho
    claw = state.allocate(width)
    image = state.allocate(width)
    h_block = _h_block(width)
    state.apply_matrix(h_block, claw)
    f0, f1 = tcf.tables()
    state.apply_xor_oracle(qi, claw, image, f0, f1)
    y = bits_to_int(state.measure_and_remove_tail(width, rng))
    state.apply(GateOp("CNOT", (claw[0], qj)))
    state.apply_matrix(h_block, claw)
    d = bits_to_int(state.measure_and_remove_tail(width, rng))
    # Trapdoor path, under escrow: both preimages of y differ by s in the
    # top bit, so the Z correction is the d-mask dotted with that difference.
    w0 = tcf.invert(0, y)
    w1 = tcf.invert(1, y)
    gamma = (d & (w0 ^ w1)).bit_count() & 1
    mu0 = w0 >> m.rho
    m.encrypted_cnot_count += 1
    return (
        ClassicalCt(m.new_handle(gamma), s_ct.key_id),
        ClassicalCt(m.new_handle(mu0), s_ct.key_id),
    )


_H_BLOCKS: dict[int, np.ndarray] = {}


def _h_block(width: int) -> np.ndarray:
    mat = _H_BLOCKS.get(width)
    if mat is None:
        mat = np.array([[1.0]], dtype=complex)
        h = GateOp("H", (0,)).matrix()
        for _ in range(width):
            mat = np.kron(mat, h)
        _H_BLOCKS[width] = mat
    return mat


def encrypted_cnot(
    ct: QheCiphertext,
    i: int,
    j: int,
    s_ct: ClassicalCt,
    rng: np.random.Generator,
) -> None:
    """Apply CNOT^s to the plaintext of positions (i, j) of the ciphertext.

    Pads update by the usual CNOT conjugation gated on s, plus the Pauli
    byproducts of the claw procedure.
    """
    if s_ct.key_id != ct.key_id:
        raise QheError("s under a different key")
    qi, qj = ct.qubits[i], ct.qubits[j]
    x_i, z_i = ct.pads[i]
    x_j, z_j = ct.pads[j]
    gamma, mu0 = _encrypted_cnot_raw(ct.state, qi, qj, s_ct, rng)
    ct.pads[i] = (x_i, eval_xor(z_i, eval_xor(gamma, eval_and(s_ct, z_j))))
    ct.pads[j] = (eval_xor(x_j, eval_xor(mu0, eval_and(s_ct, x_i))), z_j)


def eval_gate(ct: QheCiphertext, op: GateOp, rng: np.random.Generator) -> None:
    """Evaluate one gate homomorphically; targets index into ``ct.qubits``."""
    kind = op.kind
    if kind == "RY":
        raise QheError("circuit not evaluable: RY is outside the scheme's gate set")
    host = tuple(ct.qubits[t] for t in op.targets)
    if kind in _CLIFFORD_KINDS:
        ct.state.apply(GateOp(kind, host))
        if kind == "H":
            x, z = ct.pads[op.targets[0]]
            ct.pads[op.targets[0]] = (z, x)
        elif kind == "S":
            x, z = ct.pads[op.targets[0]]
            ct.pads[op.targets[0]] = (x, eval_xor(x, z))
        elif kind == "CNOT":
            c, t = op.targets
            x_c, z_c = ct.pads[c]
            x_t, z_t = ct.pads[t]
            ct.pads[c] = (x_c, eval_xor(z_c, z_t))
            ct.pads[t] = (eval_xor(x_t, x_c), z_t)
        return
    if kind != "TOFFOLI":
        raise QheError(f"circuit not evaluable: unsupported gate {kind}")
    _eval_toffoli(ct, op.targets, rng)


def _eval_toffoli(ct: QheCiphertext, targets: tuple[int, int, int], rng: np.random.Generator) -> None:
    """Toffoli evaluation: apply the gate, rewrite pads, and strip the
    conjugation byproducts with three encrypted CNOTs.

    Conjugating the pad through Toffoli leaves, besides a rewritten Pauli
    pad, the extra factor CNOT^{x2}(1,3) CNOT^{x1}(2,3) H2 CNOT^{z3}(1,2) H2
    to its left.  That factor is removed by applying the same sequence
    physically (each CNOT power via the claw procedure, the Hadamards
    plainly, with no pad rewrite since the factor sits outside the recorded
    pad).  The claw byproducts commute to the front as: gammas on their
    control line, mu masks on line 3, and the (1,2) CNOT's X-mask turning
    into a Z on line 2 through the outer Hadamard.
    """
    p1, p2, p3 = targets
    m = _eval_material(ct.pads[p1][0])
    x1, z1 = ct.pads[p1]
    x2, z2 = ct.pads[p2]
    x3, z3 = ct.pads[p3]
    host = tuple(ct.qubits[t] for t in targets)
    ct.state.apply(GateOp("TOFFOLI", host))
    new_z1 = eval_xor(z1, eval_and(x2, z3))
    new_z2 = eval_xor(z2, eval_and(x1, z3))
    new_x3 = eval_xor(x3, eval_and(x1, x2))
    g_a, mu_a = _encrypted_cnot_raw(ct.state, host[0], host[2], x2, rng)
    g_b, mu_b = _encrypted_cnot_raw(ct.state, host[1], host[2], x1, rng)
    ct.state.apply(GateOp("H", (host[1],)))
    g_d, mu_d = _encrypted_cnot_raw(ct.state, host[0], host[1], z3, rng)
    ct.state.apply(GateOp("H", (host[1],)))
    ct.pads[p1] = (x1, eval_xor(new_z1, eval_xor(g_a, g_d)))
    ct.pads[p2] = (x2, eval_xor(new_z2, eval_xor(g_b, mu_d)))
    ct.pads[p3] = (eval_xor(new_x3, eval_xor(mu_a, mu_b)), z3)
    m.toffoli_count += 1


# -- circuit evaluation ------------------------------------------------------


def eval_circuit(
    circuit_gates,
    measure,
    query_ct: PaddedBits,
    state: Statevector,
    data_qubits: tuple[int, ...],
    anc_qubits: tuple[int, ...],
    rng: np.random.Generator,
) -> PaddedBits:
    """Evaluate a player circuit on an encrypted query without the key.

    Circuit indices address query bits first, then ``data_qubits``, then
    ``anc_qubits``.  The prover-held data and ancilla qubits enter with the
    trivial pad (encryptions of zero produced homomorphically).  The listed
    ``measure`` qubits are measured and returned as a classical ciphertext
    whose pads are their X-pad handles at measurement time.
    """
    if not query_ct.pads:
        raise QheError("query ciphertext is empty")
    query_qubits = state.allocate(query_ct.width)
    for q, bit in zip(query_qubits, query_ct.bits):
        if bit:
            state.apply(GateOp("X", (q,)))
    zero = eval_const(query_ct.pads[0], 0)
    qubits = query_qubits + tuple(data_qubits) + tuple(anc_qubits)
    pads: list[tuple[ClassicalCt, ClassicalCt]] = [
        (pad, zero) for pad in query_ct.pads
    ] + [(zero, zero)] * (len(data_qubits) + len(anc_qubits))
    ct = QheCiphertext(state, qubits, pads, query_ct.key_id)
    for op in circuit_gates:
        eval_gate(ct, op, rng)
    positions = tuple(int(p) for p in measure)
    outcome = state.measure(tuple(qubits[p] for p in positions), rng)
    return PaddedBits(
        bits=tuple(outcome),
        pads=tuple(ct.pads[p][0] for p in positions),
        key_id=query_ct.key_id,
    )


# -- correctness checkers ----------------------------------------------------


def _cq_blocks(
    state: Statevector, answer_qubits: tuple[int, ...], keep_qubits: tuple[int, ...]
) -> dict[int, np.ndarray]:
    """Exact classical-quantum decomposition: for each answer outcome, the
    subnormalized reduced matrix on ``keep_qubits``."""
    n = state.num_qubits
    k, b = len(answer_qubits), len(keep_qubits)
    psi = state.amps.reshape((2,) * n)
    psi = np.moveaxis(psi, answer_qubits + keep_qubits, range(k + b))
    flat = np.ascontiguousarray(psi).reshape(1 << k, 1 << b, -1)
    return {
        a: flat[a] @ flat[a].conj().T
        for a in range(1 << k)
    }


def check_aux_correctness(
    circuit_gates,
    measure,
    prep: Statevector,
    query_value: int,
    query_width: int,
    data_qubits: tuple[int, ...],
    anc_qubits: tuple[int, ...],
    keep_register: str,
    sk: SecretKey,
    rng: np.random.Generator,
) -> float:
    """Trace distance between plain and homomorphic execution outputs.

    Both games produce the joint of (answer string, reduced state of
    ``keep_register``): plain evaluation of the circuit on the query and the
    prover-side registers versus encrypted evaluation followed by
    decryption.  The final answer measurement is averaged exactly; the claw
    procedure's internal measurements follow one sampled path, which is
    enough because the decrypted output is the same on every path.
    """
    keep = prep.registers[keep_register]

    plain = prep.copy()
    qqs = plain.allocate(query_width)
    for q, bit in zip(qqs, int_to_bits(query_value, query_width)):
        if bit:
            plain.apply(GateOp("X", (q,)))
    local = qqs + tuple(data_qubits) + tuple(anc_qubits)
    for op in circuit_gates:
        plain.apply(op.remapped(list(local)))
    blocks_plain = _cq_blocks(plain, tuple(local[p] for p in measure), keep)

    enc = prep.copy()
    query_ct = enc_bits(sk, query_value, query_width, rng)
    qqs2 = enc.allocate(query_ct.width)
    for q, bit in zip(qqs2, query_ct.bits):
        if bit:
            enc.apply(GateOp("X", (q,)))
    zero = eval_const(query_ct.pads[0], 0)
    qubits = qqs2 + tuple(data_qubits) + tuple(anc_qubits)
    pads = [(pad, zero) for pad in query_ct.pads] + [(zero, zero)] * (
        len(data_qubits) + len(anc_qubits)
    )
    ct = QheCiphertext(enc, qubits, pads, sk.key_id)
    for op in circuit_gates:
        eval_gate(ct, op, rng)
    answer_qubits = tuple(qubits[p] for p in measure)
    raw_blocks = _cq_blocks(enc, answer_qubits, keep)
    x_pads = [sk.peek(ct.pads[p][0].handle) for p in measure]
    mask = bits_to_int(x_pads)
    dim = 1 << len(keep)
    blocks_enc = {a: np.zeros((dim, dim), dtype=complex) for a in raw_blocks}
    for a, block in raw_blocks.items():
        blocks_enc[a ^ mask] += block

    distance = 0.0
    for a in blocks_plain:
        diff = blocks_plain[a] - blocks_enc[a]
        distance += 0.5 * float(np.abs(np.linalg.eigvalsh(diff)).sum())
    return distance


def check_locality(
    sk: SecretKey,
    state: Statevector,
    a_positions: tuple[int, ...],
    circuit_gates,
    rng: np.random.Generator,
    ct: QheCiphertext,
) -> bool:
    """Evaluate a circuit declared on the first ``a_positions`` of ``ct`` and
    verify the remaining positions keep their pad handles and reduced state.

    A gate touching a position outside the declared block is a precondition
    error, not a False return.
    """
    a_set = set(a_positions)
    for op in circuit_gates:
        if not set(op.targets) <= a_set:
            raise QheError("circuit declared local to the first block touches other qubits")
    b_positions = [p for p in range(len(ct.qubits)) if p not in a_set]
    b_qubits = tuple(ct.qubits[p] for p in b_positions)
    pads_before = [ct.pads[p] for p in b_positions]
    rho_before = state.density_of(b_qubits).matrix
    for op in circuit_gates:
        eval_gate(ct, op, rng)
    pads_after = [ct.pads[p] for p in b_positions]
    if pads_before != pads_after:
        return False
    rho_after = state.density_of(b_qubits).matrix
    return 0.5 * float(np.abs(np.linalg.eigvalsh(rho_after - rho_before)).sum()) <= 1e-9


# -- self test ----------------------------------------------------------------


def _random_state(n: int, rng: np.random.Generator) -> Statevector:
    state = Statevector(n)
    amps = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    state.amps = amps / np.linalg.norm(amps)
    return state


def _gate_pad_sweep(sk: SecretKey, rng: np.random.Generator) -> float:
    """Every scheme gate against every pad assignment of its wires, on
    random host states; returns the worst amplitude deviation after
    decryption."""
    worst = 0.0
    cases = [("X", 1), ("Z", 1), ("H", 1), ("S", 1), ("CNOT", 2), ("TOFFOLI", 3)]
    for kind, arity in cases:
        n = max(2, arity)
        op = GateOp(kind, tuple(range(arity)))
        for assignment in range(1 << (2 * n)):
            pads = [
                ((assignment >> (2 * q)) & 1, (assignment >> (2 * q + 1)) & 1)
                for q in range(n)
            ]
            state = _random_state(n, rng)
            plain = state.copy()
            plain.apply(op)
            ct = enc_register(sk, state, tuple(range(n)), rng, pads=pads)
            eval_gate(ct, op, rng)
            dec_register(sk, ct)
            worst = max(worst, phase_aligned_deviation(plain.amps, state.amps))
    return worst


def _random_circuit_sweep(sk: SecretKey, rng: np.random.Generator, circuits: int) -> float:
    worst = 0.0
    for _ in range(circuits):
        n = int(rng.integers(1, 5))
        depth = int(rng.integers(1, 11))
        kinds = [("X", 1), ("Z", 1), ("H", 1), ("S", 1)]
        if n >= 2:
            kinds.append(("CNOT", 2))
        if n >= 3:
            kinds.append(("TOFFOLI", 3))
        ops = []
        for _ in range(depth):
            kind, arity = kinds[int(rng.integers(len(kinds)))]
            targets = tuple(int(t) for t in rng.choice(n, size=arity, replace=False))
            ops.append(GateOp(kind, targets))
        state = _random_state(n, rng)
        plain = state.copy()
        for op in ops:
            plain.apply(op)
        ct = enc_register(sk, state, tuple(range(n)), rng)
        for op in ops:
            eval_gate(ct, op, rng)
        dec_register(sk, ct)
        worst = max(worst, phase_aligned_deviation(plain.amps, state.amps))
    return worst


def _claw_sweep(lam: int, rng: np.random.Generator, mode: str, rho: int, draws: int) -> int:
    """Random images inverted on both branches: preimages must map back and
    their top bits must differ by exactly the planted bit."""
    failures = 0
    size = 1 << (1 + rho)
    for _ in range(draws):
        sk = gen(lam, rng, mode, rho)
        s = int(rng.integers(0, 2))
        s_ct = enc_classical(sk, s)
        tcf = derive_tcf(s_ct)
        y = int(rng.integers(size))
        w0 = tcf.invert(0, y)
        w1 = tcf.invert(1, y)
        ok = (
            tcf.forward(0, w0) == y
            and tcf.forward(1, w1) == y
            and ((w0 >> rho) ^ (w1 >> rho)) == s
            and (w0 & ((1 << rho) - 1)) == (w1 & ((1 << rho) - 1))
        )
        failures += not ok
    return failures


def _aux_example_distance(sk: SecretKey, rng: np.random.Generator) -> float:
    """Joint answer/side-register comparison on a circuit that exercises the
    claw procedure while entangled with a spectator register."""
    prep = Statevector(3)
    prep.registers["data"] = (0, 1)
    prep.registers["keep"] = (2,)
    prep.apply(GateOp("H", (0,)))
    prep.apply(GateOp("CNOT", (0, 2)))
    gates = (
        GateOp("TOFFOLI", (0, 1, 2)),
        GateOp("H", (2,)),
        GateOp("CNOT", (1, 2)),
        GateOp("S", (1,)),
    )
    return check_aux_correctness(
        gates, (1, 2), prep, query_value=1, query_width=1,
        data_qubits=(0, 1), anc_qubits=(), keep_register="keep", sk=sk, rng=rng,
    )


def _locality_example(sk: SecretKey, rng: np.random.Generator) -> bool:
    state = _random_state(4, rng)
    ct = enc_register(sk, state, (0, 1, 2, 3), rng)
    gates = (
        GateOp("H", (0,)),
        GateOp("CNOT", (0, 1)),
        GateOp("S", (1,)),
    )
    return check_locality(sk, state, (0, 1), gates, rng, ct)


def self_test(
    lam: int,
    rng: np.random.Generator,
    mode: str = "ideal",
    rho: int = DEFAULT_RHO,
    circuits: int = 200,
    claw_draws: int = 1000,
) -> dict:
    """Scheme-wide correctness sweep; every entry is a computed quantity,
    thresholds are the caller's business."""
    sk = gen(lam, rng, mode, rho)
    report = {
        "gate_pad_max_dev": _gate_pad_sweep(sk, rng),
        "random_circuit_max_dev": _random_circuit_sweep(sk, rng, circuits),
        "circuits": circuits,
        "claw_failures": _claw_sweep(lam, rng, mode, rho, claw_draws),
        "claw_draws": claw_draws,
        "aux_distance": _aux_example_distance(sk, rng),
        "locality_ok": _locality_example(gen(lam, rng, mode, rho), rng),
    }
    return report
