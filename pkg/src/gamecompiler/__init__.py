"""Compile multi-player non-local games into single-prover interactive
protocols under a toy quantum homomorphic encryption scheme, and check the
completeness and soundness claims of that transformation by exact simulation.

The package is organized bottom-up:

- ``sim``: dense statevector simulator (the only quantum substrate used).
- ``games``: non-local games, query distributions, strategies, brute-force
  and exact game values, built-in games (CHSH, GHZ3, magic square).
- ``qhe``: the toy quantum homomorphic encryption scheme with a key-escrow
  classical backend, Pauli one-time-pad ciphertexts, Clifford evaluation,
  and the claw-based encrypted-CNOT procedure used to evaluate Toffoli.
- ``protocol`` / ``provers``: the game-to-single-prover compiler, transcript
  machinery, the honest quantum prover and classical test provers.
- ``soundness``: extraction of local strategies from a single prover, the
  estimator used for it, the distinguishing adversary, and hybrid values.
- ``repetition`` / ``fs``: threshold repetition (sequential and parallel)
  and the Fiat-Shamir collapse to a non-interactive protocol.
- ``cli``: seeded, JSON-reporting command line harness.
"""

from gamecompiler.sim import Statevector, GateOp, DensityMatrix, trace_distance
from gamecompiler.games import NonLocalGame, QuantumStrategy, builtin_game

__all__ = [
    "Statevector",
    "GateOp",
    "DensityMatrix",
    "trace_distance",
    "NonLocalGame",
    "QuantumStrategy",
    "builtin_game",
]

__version__ = "0.1.0"
