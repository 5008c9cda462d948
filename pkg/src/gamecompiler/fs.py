"""Fiat-Shamir collapse of two-player compiled protocols to one message.

The interactive protocol's second query is replaced by a hash of the first
round: q2 = H(ct1, a1_ct).  That only preserves the verifier's query
distribution when q2 was uniform over its full range and independent of q1,
so compilation checks that precondition exactly and refuses otherwise.
The prover side is unchanged: the non-interactive runner feeds the same
message objects a two-round interaction would.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from gamecompiler import qhe
from gamecompiler.protocol import CompiledProtocol, PlainQuery, ProverInterface
from gamecompiler.qhe import PaddedBits, QheError
from gamecompiler.rngutil import spawn, wilson_interval


class RandomOracle:
    """Deterministic keyed hash with memoized query table.

    Inputs are framed as length-prefixed byte parts, so distinct part lists
    never collide.  Outputs are integers of out_bits bits.
    """

    def __init__(self, seed: int, out_bits: int):
        if out_bits < 1 or out_bits > 64:
            raise ValueError("out_bits must be in 1..64")
        self.out_bits = int(out_bits)
        self.key = hashlib.blake2b(
            str(int(seed)).encode(), digest_size=16, person=b"fs-oracle"
        ).digest()
        self.table: dict[bytes, int] = {}

    def query(self, parts: tuple[bytes, ...]) -> int:
        framed = b"".join(len(p).to_bytes(4, "big") + p for p in parts)
        got = self.table.get(framed)
        if got is None:
            digest = hashlib.blake2b(framed, key=self.key, digest_size=8).digest()
            got = int.from_bytes(digest, "big") >> (64 - self.out_bits)
            self.table[framed] = got
        return got


def _encode_padded(pb: PaddedBits) -> tuple[bytes, ...]:
    parts = [bytes(int(b) for b in pb.bits)]
    parts.extend(ct.handle.encode() for ct in pb.pads)
    return tuple(parts)


def _first_message_parts(ct1: PaddedBits, a1: PaddedBits) -> tuple[bytes, ...]:
    return _encode_padded(ct1) + (b"|",) + _encode_padded(a1)


def check_hashable_query(game) -> None:
    """Require q2 uniform over its full bit range and independent of q1."""
    size = 1 << game.query_bits[1]
    marginal1: dict[int, Fraction] = {}
    joint: dict[tuple[int, int], Fraction] = {}
    for q, w in game.query_table:
        marginal1[q[0]] = marginal1.get(q[0], Fraction(0)) + w
        joint[q] = joint.get(q, Fraction(0)) + w
    for q1, w1 in marginal1.items():
        for q2 in range(size):
            if joint.get((q1, q2), Fraction(0)) != w1 * Fraction(1, size):
                raise ValueError(
                    "hash substitution needs the second query uniform over its "
                    "full range and independent of the first"
                )


@dataclass(frozen=True)
class FsProtocol:
    """Non-interactive form of a compiled two-player protocol."""

    base: CompiledProtocol
    oracle: RandomOracle


@dataclass(frozen=True)
class FsTranscript:
    q1: int
    key_id: str
    ct1: PaddedBits
    a1_ct: PaddedBits
    q2_echo: int
    a2: int
    accept: bool
    error: str | None = None


def fiat_shamir_compile(protocol: CompiledProtocol, oracle_seed: int) -> FsProtocol:
    if protocol.k != 2:
        raise ValueError("hash substitution handles exactly two players")
    check_hashable_query(protocol.game)
    return FsProtocol(protocol, RandomOracle(oracle_seed, protocol.game.query_bits[1]))


def run_fs(fsp: FsProtocol, prover: ProverInterface, rng: np.random.Generator) -> FsTranscript:
    """One non-interactive execution.

    The runner mediates the oracle: it collects (ct1, a1), derives q2 by a
    hash query, and feeds q2 back to the prover, so the prover object is the
    same one the interactive protocol uses.  The verifier recomputes the
    hash from the message and rejects on a wrong echo before decrypting.
    """
    game = fsp.base.game
    q1 = game.sample_queries(rng)[0]
    sk = qhe.gen(fsp.base.lam, rng, fsp.base.mode, fsp.base.rho)
    ct1 = qhe.enc_bits(sk, q1, game.query_bits[0], rng)
    prover.reset(rng)

    def reject(cause: str) -> FsTranscript:
        return FsTranscript(q1, sk.key_id, ct1, None, 0, 0, False, cause)

    try:
        a1 = prover.respond(ct1)
        if not isinstance(a1, PaddedBits) or a1.width != game.answer_bits[0]:
            raise QheError("malformed first answer")
        q2 = fsp.oracle.query(_first_message_parts(ct1, a1))
        a2 = prover.respond(PlainQuery(1, q2, game.query_bits[1]))
        a2 = int(a2)
        if not 0 <= a2 < (1 << game.answer_bits[1]):
            raise QheError("plain answer out of range")
    except QheError as exc:
        return reject(str(exc))
    return verify_fs(fsp, sk, q1, ct1, a1, q2, a2)


def verify_fs(
    fsp: FsProtocol,
    sk: qhe.SecretKey,
    q1: int,
    ct1: PaddedBits,
    a1_ct: PaddedBits,
    q2_echo: int,
    a2: int,
) -> FsTranscript:
    """Check one message (a1_ct, q2_echo, a2) against the oracle and game."""
    game = fsp.base.game
    expected = fsp.oracle.query(_first_message_parts(ct1, a1_ct))
    if q2_echo != expected:
        return FsTranscript(q1, sk.key_id, ct1, a1_ct, q2_echo, a2, False, "echoed query mismatch")
    try:
        a1 = qhe.dec_bits(sk, a1_ct)
    except QheError as exc:
        return FsTranscript(q1, sk.key_id, ct1, a1_ct, q2_echo, a2, False, str(exc))
    accept = bool(game.predicate((q1, q2_echo), (a1, a2)))
    return FsTranscript(q1, sk.key_id, ct1, a1_ct, q2_echo, a2, accept)


def estimate_fs_value(
    fsp: FsProtocol, prover: ProverInterface, trials: int, rng: np.random.Generator
) -> tuple[float, tuple[float, float]]:
    if trials < 1:
        raise ValueError("need at least one trial")
    wins = 0
    for _ in range(trials):
        wins += run_fs(fsp, prover, spawn(rng)).accept
    return wins / trials, wilson_interval(wins, trials)
