"""``stoptime`` command line: norms, factorisation, verification suites, games and Ramsey searches.

Every command prints one JSON report (sorted keys) on stdout and optionally writes it to
``--output``.  Exit codes: 0 success, 2 input error, 3 precondition error, 4 failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

from . import __version__
from .base_norm import BaseNorm
from .errors import (
    DiagonalBelowDelta,
    EnumerationTooLarge,
    InvalidInput,
    StoptimeError,
    UnsupportedDepth,
    UnsupportedSpace,
    UnverifiedEmbedding,
)

EXIT_OK, EXIT_INPUT, EXIT_PRECONDITION, EXIT_FAILURE = 0, 2, 3, 4
DEFAULT_RESIDUAL_TOL = 0.05


class InputError(Exception):
    pass


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from None


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for part in parts:
        h.update(json.dumps(part, sort_keys=True, default=str).encode())
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _jsonable(obj.item())
    return obj


def _report(command: str, inputs, outputs: dict, seconds: float, seed=None) -> dict:
    return {
        "command": command,
        "inputs_digest": _digest(inputs),
        "outputs": _jsonable(outputs),
        "timings": {"seconds": round(seconds, 6)},
        "seed": seed,
        "version": __version__,
    }


# ---------------------------------------------------------------- commands


def cmd_norm(args) -> tuple[dict, int]:
    from .spaces import CoeffVector, SpaceTag, dual_norm_D, norm_B_witness, norm_S_witness
    from .tree import Node

    data = _load_json(args.file)
    x = CoeffVector.from_json(data)
    base = BaseNorm.parse(args.base)
    out: dict = {"space": args.space, "base": str(base), "depth": x.depth}
    if args.space == "S":
        value, wit = norm_S_witness(x.values, base)
        kind = "antichain"
    elif args.space == "B":
        value, wit = norm_B_witness(x.values, base)
        kind = "branch"
    else:
        res = dual_norm_D(x.values, base)
        value, kind = res.value, "primal"
        wit = res.witness
        out["exact"] = res.exact
        out["method"] = res.method
    out["value"] = float(value)
    if args.witness:
        if kind == "primal":
            out["witness"] = CoeffVector(x.depth, wit).to_json()
        else:
            out["witness"] = {kind: [str(Node.from_index(int(i))) for i in wit]}
    return _report("norm", [data, args.space, str(base)], out, 0.0), EXIT_OK


def cmd_factorize(args) -> tuple[dict, int]:
    from .factorization import diagonalize_D
    from .operators import OperatorMatrix

    data = _load_json(args.file)
    T = OperatorMatrix.from_json(data)
    cert = diagonalize_D(T, args.delta, args.eta, args.out_depth)
    out = cert.to_json()
    out["tolerance"] = args.tolerance
    if args.certificate:
        Path(args.certificate).write_text(json.dumps(_jsonable(out), sort_keys=True, indent=1))
    code = EXIT_OK if cert.residual <= args.tolerance and cert.complete else EXIT_FAILURE
    return _report("factorize", [data, args.delta, args.eta, args.out_depth], out, 0.0), code


def cmd_verify(args) -> tuple[dict, int]:
    from .verify import run_suite

    rep = run_suite(args.suite, args.seed)
    for c in rep.checks:
        print(c.line(), file=sys.stderr)
    out = rep.to_json(timings=False)
    out["check_seconds"] = {str(c.criterion): round(c.seconds, 3) for c in rep.checks}
    return _report("verify", [args.suite], out, 0.0, args.seed), EXIT_OK if rep.passed else EXIT_FAILURE


def _adversary(args):
    from .game import EmptyAdversary, RandomAdversary, ReplayAdversary, UsedFunctionalsAdversary

    if args.adversary == "empty":
        return EmptyAdversary(args.eta)
    if args.adversary == "used":
        return UsedFunctionalsAdversary(args.eta)
    if args.adversary == "random":
        return RandomAdversary(args.seed, eta=args.eta)
    if not args.replay:
        raise InputError("--replay FILE is required with --adversary replay")
    return ReplayAdversary(_load_json(args.replay))


def cmd_game(args) -> tuple[dict, int]:
    from .game import run_rep_game, verify_transcript
    from .spaces import SpaceTag

    space = SpaceTag(args.space, BaseNorm.parse(args.base))
    tr = run_rep_game(_adversary(args), args.play_depth, args.host_depth, space)
    rep = verify_transcript(tr, C_target=1.0, seed=args.seed)
    out = {"transcript": tr.to_json(), "verification": rep.to_json(), "all_turns_ok": tr.all_ok}
    code = EXIT_OK if tr.all_ok and rep.passed else EXIT_FAILURE
    inputs = [args.adversary, args.eta, args.play_depth, args.host_depth, args.space, args.base]
    return _report("game", inputs, out, 0.0, args.seed), code


def cmd_ramsey(args) -> tuple[dict, int]:
    from .ramsey import Coloring, check_result, find_monochromatic_subtree

    if args.coloring:
        data = _load_json(args.coloring)
        c = Coloring.from_json(data)
    else:
        if args.depth is None:
            raise InputError("give --depth for a random colouring or --coloring FILE")
        c = Coloring.random(args.depth, args.seed, args.p)
        data = {"random": [args.depth, args.p]}
    target = c.depth if args.target is None else args.target
    r = find_monochromatic_subtree(c, target, budget=args.budget)
    out = r.to_json()
    out["verified"] = check_result(c, r)
    code = EXIT_OK if out["verified"] else EXIT_FAILURE
    return _report("ramsey", [data, target, args.budget], out, 0.0, args.seed), code


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stoptime", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--output", help="also write the JSON report to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norm", help="S, B or D norm of a coefficient vector")
    p.add_argument("file")
    p.add_argument("--space", choices=["S", "B", "D"], required=True)
    p.add_argument("--base", default="lp:1", help="base norm, e.g. lp:1, lp:2, lp:inf")
    p.add_argument("--witness", action="store_true", help="report an optimal antichain, branch or primal vector")
    p.set_defaults(func=cmd_norm)

    p = sub.add_parser("factorize", help="factor the identity through an operator with large diagonal")
    p.add_argument("file")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--out-depth", type=int, required=True)
    p.add_argument("--tolerance", type=float, default=DEFAULT_RESIDUAL_TOL)
    p.add_argument("--certificate", help="write the certificate JSON here")
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--suite", choices=["norms", "operators", "ramsey", "game", "factorization", "all"], default="all")
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("game", help="play the reproducibility game against an adversary")
    p.add_argument("--adversary", choices=["empty", "used", "random", "replay"], default="random")
    p.add_argument("--replay", help="adversary moves JSON for --adversary replay")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--eta", type=float, default=0.1)
    p.add_argument("--play-depth", type=int, default=2)
    p.add_argument("--host-depth", type=int, default=10)
    p.add_argument("--space", choices=["S", "B"], default="S")
    p.add_argument("--base", default="lp:1")
    p.set_defaults(func=cmd_game)

    p = sub.add_parser("ramsey", help="search a monochromatic subtree of a 2-colouring")
    p.add_argument("--coloring", help="colouring JSON; otherwise a seeded random colouring")
    p.add_argument("--depth", type=int)
    p.add_argument("--p", type=float, default=0.5, help="probability of colour 1 for random colourings")
    p.add_argument("--target", type=int)
    p.add_argument("--budget", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, required=True)
    p.set_defaults(func=cmd_ramsey)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        report, code = args.func(args)
    except (InputError, InvalidInput, UnsupportedDepth, UnsupportedSpace, EnumerationTooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (DiagonalBelowDelta, UnverifiedEmbedding) as exc:
        print(f"precondition failed: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except StoptimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report["timings"]["seconds"] = round(time.perf_counter() - start, 6)
    text = json.dumps(report, sort_keys=True, indent=1)
    print(text)
    if args.output:
        Path(args.output).write_text(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
