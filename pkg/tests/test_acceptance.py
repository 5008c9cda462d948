"""End-to-end acceptance suite: nine criteria, one printed verdict line each.

Every tolerance is fixed here.  Exact claims come from brute-force or
enumeration oracles computed in-line; statistical claims carry 3-sigma
bands at the pinned trial counts.  Each criterion also enforces a
wall-clock budget.  Run with -s to see the verdict lines as they land.
"""

import math
import time
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from gamecompiler import qhe
from gamecompiler.fs import estimate_fs_value, fiat_shamir_compile
from gamecompiler.games import (
    NonLocalGame,
    builtin_game,
    classical_value_bruteforce,
    quantum_strategy_value,
)
from gamecompiler.protocol import HonestQuantumProver, compile, estimate_value
from gamecompiler.provers import (
    DecryptingProver,
    TapeProver,
    best_local_prover,
    biased_random_prover,
    constant_prover,
    random_tape,
)
from gamecompiler.repetition import (
    VectorProver,
    parallel_repeat_protocol,
    run_parallel,
    sequential_repeat_run,
    threshold_repeat,
)
from gamecompiler.rngutil import labeled_rng, spawn
from gamecompiler.soundness import (
    adversary_distinguish,
    build_estimator_f,
    build_p2,
    extract_k_provers,
    extract_local_provers,
    fix_prefix,
    hybrid_values,
)


def _verdict(num: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {num} ({name}): {'PASS' if ok else 'FAIL'} [{detail}]"
    print(line)
    assert ok, line


def test_criterion_1_exact_game_values():
    start = time.perf_counter()
    game, strategy = builtin_game("chsh")
    classical = classical_value_bruteforce(game)
    quantum = quantum_strategy_value(game, strategy)
    target = math.cos(math.pi / 8) ** 2
    elapsed = time.perf_counter() - start
    ok = (
        classical == Fraction(3, 4)
        and abs(quantum - target) <= 1e-9
        and elapsed < 1.0
    )
    _verdict(
        1,
        "exact game values",
        ok,
        f"classical={classical} quantum={quantum:.12f} target={target:.12f} t={elapsed:.2f}s",
    )


def test_criterion_2_qhe_self_test():
    start = time.perf_counter()
    rng = labeled_rng(2, "acceptance-qhe")
    report = qhe.self_test(8, rng, mode="ideal", rho=2, circuits=200, claw_draws=1000)
    elapsed = time.perf_counter() - start
    ok = (
        report["gate_pad_max_dev"] <= 1e-9
        and report["random_circuit_max_dev"] <= 1e-9
        and report["circuits"] == 200
        and report["aux_distance"] <= 1e-9
        and report["locality_ok"] is True
        and report["claw_failures"] == 0
        and report["claw_draws"] == 1000
        and elapsed < 120.0
    )
    _verdict(
        2,
        "scheme self-test",
        ok,
        f"gate_pad={report['gate_pad_max_dev']:.2e} "
        f"circuits={report['random_circuit_max_dev']:.2e}/{report['circuits']} "
        f"aux={report['aux_distance']:.2e} locality={report['locality_ok']} "
        f"claws={report['claw_failures']}/{report['claw_draws']} t={elapsed:.1f}s",
    )


def test_criterion_3_completeness():
    start = time.perf_counter()
    game, strategy = builtin_game("chsh")
    protocol = compile(game, 8)
    rate, _ = estimate_value(
        protocol, HonestQuantumProver(strategy), 20000, labeled_rng(3, "acceptance-completeness")
    )
    elapsed = time.perf_counter() - start
    ok = abs(rate - 0.85355) <= 0.01 and elapsed < 300.0
    _verdict(
        3,
        "completeness",
        ok,
        f"rate={rate:.4f} target=0.85355 tol=0.01 trials=20000 t={elapsed:.1f}s",
    )


def test_criterion_4_soundness_extraction():
    start = time.perf_counter()
    game, _ = builtin_game("chsh")
    protocol = compile(game, 8)
    rng = labeled_rng(4, "acceptance-extraction")
    eps, trials = 0.05, 2000
    provers = (
        ("best-local", best_local_prover(game)),
        ("constant", constant_prover(game, (0, 0))),
        (
            "biased-random",
            biased_random_prover(game, spawn(rng), candidates=16, trials=500, protocol=protocol),
        ),
    )
    details = []
    ok = True
    for name, prover in provers:
        rate, _ = estimate_value(protocol, prover, trials, spawn(rng))
        pair = extract_local_provers(prover, game, 8, eps, spawn(rng))
        sigma = math.sqrt(rate * (1.0 - rate) / trials)
        bound = rate - eps - 3.0 * sigma
        ok = ok and float(pair.value) >= bound
        details.append(f"{name}: extracted={float(pair.value):.4f} >= {bound:.4f}")
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 300.0
    _verdict(4, "soundness extraction", ok, "; ".join(details) + f" t={elapsed:.1f}s")


def test_criterion_5_reduction():
    start = time.perf_counter()
    game, _ = builtin_game("chsh")
    rng = labeled_rng(5, "acceptance-reduction")
    trials = 10000
    leaky = adversary_distinguish(
        DecryptingProver(game), game, 8, trials, spawn(rng), mode="leaky"
    )
    control = TapeProver(game, random_tape(game, spawn(rng)))
    ideal = adversary_distinguish(control, game, 8, trials, spawn(rng), mode="ideal")
    guess_rate = ideal["advantage"] + 0.5
    sigma = math.sqrt(guess_rate * (1.0 - guess_rate) / trials)
    elapsed = time.perf_counter() - start
    ok = (
        leaky["advantage"] >= 0.05
        and abs(ideal["advantage"]) <= 3.0 * sigma
        and elapsed < 300.0
    )
    _verdict(
        5,
        "reduction demonstration",
        ok,
        f"leaky_adv={leaky['advantage']:.4f} (>=0.05) "
        f"ideal_adv={ideal['advantage']:.4f} (|.|<={3.0 * sigma:.4f}) t={elapsed:.1f}s",
    )


def test_criterion_6_estimator_concentration():
    start = time.perf_counter()
    game, _ = builtin_game("chsh")
    eps = 0.3
    builds, bad, sample_ok = 500, 0, True
    for seed in range(builds):
        rng = labeled_rng(seed, "acceptance-estimator")
        prover = TapeProver(game, random_tape(game, rng))
        prefix = fix_prefix(prover, game, 8, rng)
        p2 = build_p2(prefix, prover, game)
        est = build_estimator_f(game, p2, 8, eps, rng)
        sample_ok = sample_ok and est.n_samples == 900
        bad += est.max_deviation() > eps / 3.0
    elapsed = time.perf_counter() - start
    ok = sample_ok and bad <= builds // 100 and elapsed < 120.0
    _verdict(
        6,
        "estimator concentration",
        ok,
        f"N=900 builds={builds} exceedances={bad} (<= {builds // 100}) t={elapsed:.1f}s",
    )


def test_criterion_7_k_player():
    start = time.perf_counter()
    game, strategy = builtin_game("ghz3")
    rng = labeled_rng(7, "acceptance-kplayer")
    protocol = compile(game, 8)
    rate, _ = estimate_value(protocol, HonestQuantumProver(strategy), 2000, spawn(rng))

    eps = 0.05
    prover = best_local_prover(game)
    extraction = extract_k_provers(prover, game, 8, eps, spawn(rng))
    hyb = hybrid_values(prover, game, extraction, 8, 2000, spawn(rng))
    allowances = [eps / (4.0 * game.k) + 3.0 * s for s in hyb["drop_sigmas"]]
    steps_ok = all(d <= a for d, a in zip(hyb["drops"], allowances))
    chain_ok = hyb["hybrids"][0] >= hyb["hybrids"][-1] - sum(allowances)
    elapsed = time.perf_counter() - start
    ok = (
        rate >= 0.99
        and float(extraction.value) >= 0.75 - eps
        and steps_ok
        and chain_ok
        and elapsed < 600.0
    )
    _verdict(
        7,
        "k-player",
        ok,
        f"honest={rate:.4f} (>=0.99) extracted={float(extraction.value):.4f} (>=0.70) "
        f"hybrids={[round(v, 4) for v in hyb['hybrids']]} "
        f"drops={[round(d, 4) for d in hyb['drops']]} "
        f"allow={[round(a, 4) for a in allowances]} t={elapsed:.1f}s",
    )


def _two_copy_win_both_oracle() -> Fraction:
    """Exact classical value of two CHSH copies that must both win.

    Independent of the repetition machinery: strategies are enumerated as
    base-4 digit tables over the 4 joint query values of each player, and
    the win count is accumulated per query combination with integer
    arithmetic throughout.
    """
    tables = np.arange(256)
    entry = [(tables // 4**x) % 4 for x in range(4)]
    counts = np.zeros((256, 256), dtype=np.int64)
    for q1a, q1b, q2a, q2b in product(range(2), repeat=4):
        a1 = entry[2 * q1a + q1b][:, None]
        a2 = entry[2 * q2a + q2b][None, :]
        win_a = ((a1 >> 1) ^ (a2 >> 1)) == (q1a & q2a)
        win_b = ((a1 & 1) ^ (a2 & 1)) == (q1b & q2b)
        counts += (win_a & win_b).astype(np.int64)
    return Fraction(int(counts.max()), 16)


def test_criterion_8_polarization():
    start = time.perf_counter()
    game, strategy = builtin_game("chsh")

    # exact brute force first: the materialized two-copy threshold game
    # must agree with an independent enumeration oracle
    oracle = _two_copy_win_both_oracle()
    library = classical_value_bruteforce(threshold_repeat(game, 2, 1))
    values_ok = oracle == library == Fraction(5, 8)

    t, theta, half = 300, 0.8, 1000
    protocol = compile(game, 8)
    par = parallel_repeat_protocol(game, t, theta, 8)
    rng = labeled_rng(8, "acceptance-polarization")

    honest_wins = sum(
        sequential_repeat_run(protocol, HonestQuantumProver(strategy), t, theta, spawn(rng))
        for _ in range(half)
    )
    honest_wins += sum(
        run_parallel(par, VectorProver(lambda: HonestQuantumProver(strategy), t), spawn(rng))[0]
        for _ in range(half)
    )
    honest_rate = honest_wins / (2 * half)

    classical_wins = sum(
        sequential_repeat_run(protocol, best_local_prover(game), t, theta, spawn(rng))
        for _ in range(half)
    )
    classical_wins += sum(
        run_parallel(par, VectorProver(lambda: best_local_prover(game), t), spawn(rng))[0]
        for _ in range(half)
    )
    classical_rate = classical_wins / (2 * half)

    elapsed = time.perf_counter() - start
    ok = values_ok and honest_rate >= 0.99 and classical_rate <= 0.05 and elapsed < 900.0
    _verdict(
        8,
        "threshold repetition",
        ok,
        f"two-copy oracle={oracle} library={library} honest={honest_rate:.4f} (>=0.99) "
        f"classical={classical_rate:.4f} (<=0.05) trials=2x{2 * half} t={elapsed:.1f}s",
    )


def test_criterion_9_fiat_shamir():
    start = time.perf_counter()
    game, strategy = builtin_game("chsh")
    protocol = compile(game, 8)
    rng = labeled_rng(9, "acceptance-fs")
    trials = 20000
    baseline, _ = estimate_value(protocol, HonestQuantumProver(strategy), trials, spawn(rng))
    fsp = fiat_shamir_compile(protocol, oracle_seed=9)
    fs_rate, _ = estimate_fs_value(fsp, HonestQuantumProver(strategy), trials, spawn(rng))

    correlated = NonLocalGame(
        k=2,
        query_bits=(1, 1),
        answer_bits=(1, 1),
        query_table=(((0, 0), Fraction(1, 2)), ((1, 1), Fraction(1, 2))),
        predicate=lambda q, a: 1,
        name="correlated",
    )
    with pytest.raises(ValueError):
        fiat_shamir_compile(compile(correlated, 8), 0)

    elapsed = time.perf_counter() - start
    ok = abs(fs_rate - baseline) <= 0.015 and elapsed < 300.0
    _verdict(
        9,
        "fiat-shamir",
        ok,
        f"fs={fs_rate:.4f} interactive={baseline:.4f} |diff|={abs(fs_rate - baseline):.4f} "
        f"(<=0.015) refusal=raised trials={trials} t={elapsed:.1f}s",
    )
