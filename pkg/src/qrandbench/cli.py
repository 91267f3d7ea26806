"""Command-line interface: rates, figure sweeps, measurement construction, extraction, verification.

Exit codes: 0 success, 1 verification failure, 2 usage or input error (with a
JSON error object on stderr).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import secrets
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import extraction, intrinsic, oracle
from .entropy import EntropyFamily
from .errors import QRandError
from .quantum_core import load_density, load_measurement, measurement_to_json

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x) -> str:
    """12 significant digits, locale independent."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".12g")


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_text(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, newline="\n")


def _write_csv(path, header, rows) -> None:
    lines = [",".join(header)] + [",".join(fmt(v) for v in row) for row in rows]
    _write_text(path, "\n".join(lines) + "\n")


@contextmanager
def _pool():
    """Ordered parallel map capped by ``QRAND_THREADS``."""
    raw = os.environ.get("QRAND_THREADS")
    try:
        workers = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise UsageError(f"QRAND_THREADS must be an integer, got {raw!r}") from None
    if workers <= 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=workers) as executor:
        yield executor.map


def _parse_order(text: str) -> float:
    value = float(text)
    if math.isnan(value):
        raise argparse.ArgumentTypeError("order must be a number or 'inf'")
    return value


def _parse_hex(text: str) -> int:
    try:
        value = int(text, 16)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a hexadecimal integer: {text!r}") from None
    if not (0 <= value < 2**64):
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def _parse_epsilons(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad epsilon list {text!r}") from None


# --------------------------------------------------------------------------
# commands


def cmd_rate(args) -> int:
    rho = load_density(args.state)
    report = extraction.optimize_alpha(extraction.RateQuery(rho, args.epsilon, args.n, args.measurement_class, args.bound))
    if args.json:
        out = report.to_json()
        out.update({"class": args.measurement_class, "bound": args.bound})
        sys.stdout.write(_dump_json(out))
    else:
        for key in ("rate_bits_per_copy", "alpha_star", "total_bits", "asymptotic_rate", "at_boundary"):
            sys.stdout.write(f"{key}: {fmt(getattr(report, key))}\n")
    return EXIT_OK


def cmd_sweep_alpha(args) -> int:
    if not (0.5 <= args.alpha_min < args.alpha_max) or math.isinf(args.alpha_max) or args.points < 2:
        raise UsageError("need 0.5 <= alpha-min < alpha-max < inf and points >= 2")
    rho = load_density(args.state)
    family = EntropyFamily.parse(args.family)
    grid = [float(a) for a in np.linspace(args.alpha_min, args.alpha_max, args.points)]
    if args.with_limit:
        grid.append(math.inf)
    if family is EntropyFamily.UP:
        dropped = [a for a in grid if a <= 1 + 1e-9]
        if dropped:
            sys.stderr.write(f"warning: omitting {len(dropped)} up-family point(s) with alpha <= 1\n")
        grid = [a for a in grid if a > 1 + 1e-9]
    # orders within 1e-6 of 1 are evaluated at the exact von Neumann limit
    grid = [1.0 if abs(a - 1) < 1e-6 else a for a in grid]

    def value(alpha):
        return intrinsic.max_intrinsic_value(rho, family, alpha, args.measurement_class)

    with _pool() as pmap:
        values = list(pmap(value, grid))
    _write_csv(args.out, ["alpha", "value_bits"], zip(grid, values))
    return EXIT_OK


def _n_grid(n_min: int, n_max: int, points: int) -> list[int]:
    if n_min < 1 or n_max < n_min or points < 1:
        raise UsageError("need 1 <= n-min <= n-max and points >= 1")
    return sorted({int(round(x)) for x in np.geomspace(n_min, n_max, points)})


def cmd_sweep_n(args) -> int:
    rho = load_density(args.state)
    grid = _n_grid(args.n_min, args.n_max, args.points)
    jobs = [(eps, n) for eps in args.epsilon for n in grid]
    for eps in args.epsilon:
        if not (0 < eps <= 1):
            raise UsageError(f"epsilon must lie in (0, 1], got {eps!r}")

    def run(job):
        eps, n = job
        return extraction.optimize_alpha(extraction.RateQuery(rho, eps, n, args.measurement_class, args.bound))

    with _pool() as pmap:
        reports = list(pmap(run, jobs))
    rows = [(n, eps, r.rate_bits_per_copy, r.alpha_star, r.at_boundary) for (eps, n), r in zip(jobs, reports)]
    _write_csv(args.out, ["n", "epsilon", "rate", "alpha_star", "at_boundary"], rows)
    return EXIT_OK


def cmd_construct(args) -> int:
    rho = load_density(args.state)
    family = EntropyFamily.parse(args.family)
    gamma = intrinsic.family_gamma(family, args.alpha)
    if args.kind == "mub":
        meas = intrinsic.mub_pvm(rho)
    elif args.kind == "qubit-opt":
        if rho.dim != 2:
            raise UsageError(f"qubit-opt needs a qubit state, got dimension {rho.dim}")
        meas = intrinsic.qubit_optimal_for(rho, gamma)
    elif args.kind == "uniform":
        meas = intrinsic.uniform_povm(rho)
    else:
        meas = intrinsic.extremal_perturbation(intrinsic.uniform_povm(rho), args.delta)
    out = measurement_to_json(meas)
    out["certificate"] = intrinsic.extremality_margin(meas).to_json()
    out["gamma"] = gamma
    out["optimality_residual"] = intrinsic.optimality_residual(rho, meas, gamma)
    _write_text(args.out, _dump_json(out))
    return EXIT_OK


def cmd_extract(args) -> int:
    rho = load_density(args.state)
    meas = load_measurement(args.measurement)
    if args.hash_seed == "random":
        hash_seed = secrets.randbits(64)
    else:
        try:
            hash_seed = _parse_hex(args.hash_seed)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"--hash-seed: {exc}") from None
    result = extraction.end_to_end_extract(rho, meas, args.n, args.epsilon, args.rng_seed, hash_seed)
    extraction.write_extraction(result, args.out, args.meta)
    return EXIT_OK


def cmd_verify(args) -> int:
    names = "all" if args.suites == "all" else [s.strip() for s in args.suites.split(",") if s.strip()]
    if names != "all":
        unknown = [n for n in names if n not in oracle.SUITES]
        if unknown:
            raise UsageError(f"unknown suite(s): {', '.join(unknown)}")
    with _pool() as pmap:
        reports = oracle.run_suites(names, args.seed, pmap)
    text = _dump_json([r.to_json() for r in reports])
    if args.out:
        _write_text(args.out, text)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        sys.stderr.write(f"{status} {r.suite}: max deviation {fmt(r.max_deviation)} (tol {fmt(r.tolerance)})\n")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qrandbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("rate", help="finite-size extractable rate")
    p.add_argument("--state", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--class", dest="measurement_class", choices=["pvm", "povm"], default="povm")
    p.add_argument("--bound", choices=["up", "down"], default="up")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_rate)

    p = sub.add_parser("sweep-alpha", help="maximal intrinsic randomness over a grid of orders")
    p.add_argument("--state", required=True)
    p.add_argument("--alpha-min", type=_parse_order, default=0.5)
    p.add_argument("--alpha-max", type=_parse_order, default=4.0)
    p.add_argument("--points", type=int, default=36)
    p.add_argument("--family", choices=["up", "down"], default="down")
    p.add_argument("--class", dest="measurement_class", choices=["pvm", "povm"], default="pvm")
    p.add_argument("--with-limit", action="store_true", help="append the alpha = inf limit row")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sweep_alpha)

    p = sub.add_parser("sweep-n", help="finite-size rate over a log-spaced grid of copies")
    p.add_argument("--state", required=True)
    p.add_argument("--epsilon", type=_parse_epsilons, default=[1e-4, 1e-12, 1e-20])
    p.add_argument("--n-min", type=int, default=100)
    p.add_argument("--n-max", type=int, default=10**6)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--bound", choices=["up", "down"], default="up")
    p.add_argument("--class", dest="measurement_class", choices=["pvm", "povm"], default="povm")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sweep_n)

    p = sub.add_parser("construct", help="build an (approximately) optimal measurement")
    p.add_argument("--state", required=True)
    p.add_argument("--kind", choices=["mub", "qubit-opt", "uniform", "uniform-extremal"], required=True)
    p.add_argument("--alpha", type=_parse_order, default=2.0)
    p.add_argument("--family", choices=["up", "down"], default="up")
    p.add_argument("--delta", type=float, default=1e-2)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("extract", help="sample, hash and write extracted bits")
    p.add_argument("--state", required=True)
    p.add_argument("--measurement", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--rng-seed", type=_parse_hex, required=True)
    p.add_argument("--hash-seed", default="random", help="64-bit hex PRNG seed for the Toeplitz seed, or 'random'")
    p.add_argument("--out", required=True)
    p.add_argument("--meta", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("verify", help="run the brute-force oracle suites")
    p.add_argument("--suites", default="all", help=f"'all' or a comma list of: {', '.join(oracle.SUITES)}")
    p.add_argument("--seed", type=_parse_hex, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)
    return parser


def _fail(kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}, sort_keys=True) + "\n")
    return EXIT_USAGE


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        return _fail("UsageError", str(exc))
    except QRandError as exc:
        return _fail(type(exc).__name__, str(exc))
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
