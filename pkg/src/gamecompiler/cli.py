"""Command line harness: seeded experiments with JSON reports.

Every subcommand prints one JSON document {config, results, version,
wall_clock_s}.  Given the same seed the results block is bit-identical
across runs; wall_clock_s is the only field allowed to vary.  Exit codes:
0 success, 1 invalid arguments or preconditions, 2 a requested check
computed a failing result.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction

import gamecompiler
from gamecompiler import qhe
from gamecompiler.fs import estimate_fs_value, fiat_shamir_compile
from gamecompiler.games import (
    builtin_game,
    classical_value_bruteforce,
    quantum_strategy_value,
)
from gamecompiler.protocol import HonestQuantumProver, compile, estimate_value
from gamecompiler.provers import (
    DecryptingProver,
    TapeProver,
    best_local_prover,
    constant_prover,
    random_tape,
)
from gamecompiler.repetition import (
    VectorProver,
    chernoff_bound_check,
    parallel_repeat_protocol,
    run_parallel,
    sequential_repeat_run,
)
from gamecompiler.rngutil import labeled_rng, spawn
from gamecompiler.soundness import (
    adversary_distinguish,
    extract_k_provers,
    extract_local_provers,
)

GAMES = ("chsh", "ghz3", "magic-square")
PROVERS = ("honest", "best-local", "constant", "random-tape", "decrypting")
SELFTEST_ATOL = 1e-9


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; route through CliError for exit 1
    def error(self, message):
        raise CliError(message)


def make_prover(name: str, game, strategy, rng):
    if name == "honest":
        return HonestQuantumProver(strategy)
    if name == "best-local":
        return best_local_prover(game)
    if name == "constant":
        return constant_prover(game, (0,) * game.k)
    if name == "random-tape":
        return TapeProver(game, random_tape(game, rng))
    if name == "decrypting":
        return DecryptingProver(game)
    raise CliError(f"unknown prover {name!r}")


def _require_leaky_for_decrypting(args) -> None:
    if getattr(args, "prover", None) == "decrypting" and args.mode != "leaky":
        raise CliError("the decrypting prover reads leaky handles; use --mode leaky")


def cmd_value(args) -> tuple[dict, int]:
    game, strategy = builtin_game(args.game.replace("-", "_"))
    classical = classical_value_bruteforce(game)
    quantum = quantum_strategy_value(game, strategy)
    results = {
        "players": game.k,
        "classical_value": str(classical),
        "classical_value_float": float(classical),
        "quantum_value": quantum,
    }
    return results, 0


def cmd_run(args) -> tuple[dict, int]:
    _require_leaky_for_decrypting(args)
    game, strategy = builtin_game(args.game.replace("-", "_"))
    protocol = compile(game, args.lam, args.mode, args.rho)
    rng = labeled_rng(args.seed, "cli-run")
    prover = make_prover(args.prover, game, strategy, rng)
    rate, interval = estimate_value(protocol, prover, args.trials, rng)
    results = {
        "accept_rate": rate,
        "wilson_interval": list(interval),
        "trials": args.trials,
    }
    return results, 0


def cmd_extract(args) -> tuple[dict, int]:
    _require_leaky_for_decrypting(args)
    game, strategy = builtin_game(args.game.replace("-", "_"))
    rng = labeled_rng(args.seed, "cli-extract")
    prover = make_prover(args.prover, game, strategy, rng)
    if not prover.deterministic:
        raise CliError("extraction requires a deterministic prover")
    if game.k == 2:
        pair = extract_local_provers(prover, game, args.lam, args.epsilon, rng, args.mode)
        results = {
            "extracted_value": str(pair.value),
            "extracted_value_float": float(pair.value),
            "estimator_samples": pair.estimator.n_samples,
            "estimator_max_deviation": pair.estimator.max_deviation(),
        }
    else:
        extraction = extract_k_provers(prover, game, args.lam, args.epsilon, rng, args.mode)
        results = {
            "extracted_value": str(extraction.value),
            "extracted_value_float": float(extraction.value),
            "estimator_samples": extraction.sample_count,
        }
    if args.trials:
        protocol = compile(game, args.lam, args.mode, args.rho)
        rate, interval = estimate_value(protocol, prover, args.trials, rng)
        results["interactive_rate"] = rate
        results["interactive_interval"] = list(interval)
    return results, 0


def cmd_distinguish(args) -> tuple[dict, int]:
    _require_leaky_for_decrypting(args)
    game, strategy = builtin_game(args.game.replace("-", "_"))
    rng = labeled_rng(args.seed, "cli-distinguish")
    prover = make_prover(args.prover, game, strategy, rng)
    report = adversary_distinguish(prover, game, args.lam, args.trials, rng, args.mode)
    results = dict(report)
    results["interval"] = list(results["interval"])
    return results, 0


def cmd_repeat(args) -> tuple[dict, int]:
    _require_leaky_for_decrypting(args)
    game, strategy = builtin_game(args.game.replace("-", "_"))
    rng = labeled_rng(args.seed, "cli-repeat")
    theta = Fraction(str(args.theta))
    results: dict = {"t": args.t, "theta": str(theta)}

    accepts = 0
    if args.parallel:
        protocol = parallel_repeat_protocol(game, args.t, args.theta, args.lam, args.mode, args.rho)
        for _ in range(args.trials):
            vec = VectorProver(lambda: make_prover(args.prover, game, strategy, rng), args.t)
            accepts += run_parallel(protocol, vec, spawn(rng))[0]
    else:
        protocol = compile(game, args.lam, args.mode, args.rho)
        prover = make_prover(args.prover, game, strategy, rng)
        for _ in range(args.trials):
            accepts += sequential_repeat_run(protocol, prover, args.t, args.theta, spawn(rng))
    results["accept_rate"] = accepts / args.trials
    results["trials"] = args.trials
    results["scheme"] = "parallel" if args.parallel else "sequential"

    if args.prover == "honest":
        v_star = quantum_strategy_value(game, strategy)
        if v_star > float(theta):
            results["chernoff_lower_bound"] = chernoff_bound_check(v_star, float(theta), args.t)
    return results, 0


def cmd_fs(args) -> tuple[dict, int]:
    _require_leaky_for_decrypting(args)
    game, strategy = builtin_game(args.game.replace("-", "_"))
    protocol = compile(game, args.lam, args.mode, args.rho)
    fsp = fiat_shamir_compile(protocol, oracle_seed=args.seed)
    rng = labeled_rng(args.seed, "cli-fs")
    prover = make_prover(args.prover, game, strategy, rng)
    rate, interval = estimate_fs_value(fsp, prover, args.trials, rng)
    results = {
        "accept_rate": rate,
        "wilson_interval": list(interval),
        "trials": args.trials,
        "oracle_queries": len(fsp.oracle.table),
    }
    return results, 0


def cmd_qhe_selftest(args) -> tuple[dict, int]:
    rng = labeled_rng(args.seed, "cli-selftest")
    report = qhe.self_test(
        args.lam, rng, args.mode, args.rho, circuits=args.circuits, claw_draws=args.claws
    )
    passed = (
        report["gate_pad_max_dev"] <= SELFTEST_ATOL
        and report["random_circuit_max_dev"] <= SELFTEST_ATOL
        and report["claw_failures"] == 0
        and report["aux_distance"] <= SELFTEST_ATOL
        and report["locality_ok"]
    )
    results = dict(report)
    results["passed"] = passed
    return results, 0 if passed else 2


def _add_common(sub, *, trials_default=2000, needs_prover=False, prover_default="honest"):
    sub.add_argument("--game", choices=GAMES, default="chsh")
    sub.add_argument("--lambda", dest="lam", type=int, default=8)
    sub.add_argument("--epsilon", type=float, default=0.05)
    sub.add_argument("--trials", type=int, default=trials_default)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--mode", choices=("ideal", "leaky"), default="ideal")
    sub.add_argument("--rho", type=int, default=qhe.DEFAULT_RHO)
    sub.add_argument("--out", type=str, default=None)
    if needs_prover:
        sub.add_argument("--prover", choices=PROVERS, default=prover_default)


def build_parser() -> _Parser:
    parser = _Parser(prog="gamecompiler", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("value", help="exact classical and quantum game values")
    _add_common(sub)
    sub.set_defaults(func=cmd_value)

    sub = subs.add_parser("run", help="estimate a prover's accept rate")
    _add_common(sub, needs_prover=True)
    sub.set_defaults(func=cmd_run)

    sub = subs.add_parser("extract", help="extract local strategies from a prover")
    _add_common(sub, trials_default=0, needs_prover=True, prover_default="best-local")
    sub.set_defaults(func=cmd_extract)

    sub = subs.add_parser("distinguish", help="run the distinguishing experiment")
    _add_common(sub, needs_prover=True, prover_default="random-tape")
    sub.set_defaults(func=cmd_distinguish)

    sub = subs.add_parser("repeat", help="threshold repetition accept rates")
    _add_common(sub, trials_default=200, needs_prover=True)
    sub.add_argument("--t", type=int, default=300)
    sub.add_argument("--theta", type=float, default=0.8)
    sub.add_argument("--parallel", action="store_true")
    sub.set_defaults(func=cmd_repeat)

    sub = subs.add_parser("fs", help="non-interactive accept rate")
    _add_common(sub, needs_prover=True)
    sub.set_defaults(func=cmd_fs)

    sub = subs.add_parser("qhe-selftest", help="encryption scheme correctness sweep")
    _add_common(sub)
    sub.add_argument("--circuits", type=int, default=200)
    sub.add_argument("--claws", type=int, default=1000)
    sub.set_defaults(func=cmd_qhe_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        started = time.perf_counter()
        results, code = args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, qhe.QheError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    config = {
        k: v for k, v in vars(args).items() if k not in ("func", "out") and v is not None
    }
    report = {
        "config": config,
        "results": results,
        "version": gamecompiler.__version__,
        "wall_clock_s": round(time.perf_counter() - started, 3),
    }
    text = json.dumps(report, sort_keys=True, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
