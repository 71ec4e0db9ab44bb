"""Command-line entry point: ``gwilab {mech,kernel,tree,verify} ...``.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 runtime error (size/population caps, integrator failure, leaky enumeration).
Reports go to stdout (or --out), diagnostics to stderr.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from .csbp_kernel import CumulantSolver, IntegrationError, UnsupportedMechanism
from .mechanisms import LiteralError, check_conditions, parse_bivariate, parse_immigration, parse_mechanism
from .limits.config import ConfigError, read_config, resolve
from .limits.experiments import EXPERIMENTS, InconclusiveEnumeration
from .limits.scaling import DegenerateConfig
from .trees.formats import TreeFormatError, dumps_luk, dumps_paren, dumps_sin, loads_any
from .trees.laws import PopulationCapExceeded, parse_dispatch, parse_offspring
from .trees.ordered import (
    OrderedTree,
    PathFormatError,
    check_contour_bounds,
    contour_from_height,
    dfs_heights,
    mirror,
)
from .trees.sampling import SizeCapExceeded, sample_gw, sample_gwi
from .trees.sintree import SinTree, left_height, occupation_check, right_height, spinal_decomposition

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (u64)")
    common.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--workers", type=int, default=1, help="worker processes (affects wall time only)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="gwilab", description=__doc__.splitlines()[0])
    verbs = parser.add_subparsers(dest="verb", required=True)

    mech = verbs.add_parser("mech", help="evaluate mechanisms and check their conditions").add_subparsers(dest="op", required=True)
    p = mech.add_parser("psi", parents=[common], help="evaluate psi(lambda)")
    p.add_argument("--psi", required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p = mech.add_parser("phi", parents=[common], help="evaluate Phi(p, q) of a bivariate exponent")
    p.add_argument("--phi", required=True)
    p.add_argument("--psi", default=None, help="branching mechanism for 'sizebiased'")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--q", type=float, required=True)
    p = mech.add_parser("check", parents=[common], help="subcritical/conservative/Grey/UV-continuity report")
    p.add_argument("--psi", required=True)
    p.add_argument("--phi", default="sizebiased")

    kernel = verbs.add_parser("kernel", help="cumulant and Laplace kernels").add_subparsers(dest="op", required=True)
    p = kernel.add_parser("u", parents=[common], help="u(a, lambda)")
    p.add_argument("--psi", required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--method", choices=("auto", "closed", "ode"), default="auto")
    p = kernel.add_parser("v", parents=[common], help="v(a) = lim u(a, lambda)")
    p.add_argument("--psi", required=True)
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--method", choices=("auto", "closed", "ode"), default="auto")
    p = kernel.add_parser("laplace", parents=[common], help="CSBPI Laplace transform")
    p.add_argument("--psi", required=True)
    p.add_argument("--phi", default="zero", help="immigration literal (zero, linear:m=.., jump:.., sizebiased, grid:..)")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--method", choices=("auto", "closed", "ode"), default="auto")

    tree = verbs.add_parser("tree", help="sample, encode and check trees").add_subparsers(dest="op", required=True)
    p = tree.add_parser("sample-gw", parents=[common], help="sample a GW tree (LUK or PAREN text)")
    p.add_argument("--offspring", required=True)
    p.add_argument("--size-cap", type=int, default=10**6)
    p.add_argument("--to", choices=("luk", "paren"), default="luk")
    p = tree.add_parser("sample-gwi", parents=[common], help="sample a GWI sin-tree (SIN text)")
    p.add_argument("--offspring", required=True)
    p.add_argument("--dispatch", required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--size-cap", type=int, default=10**6)
    p = tree.add_parser("encode", parents=[common], help="re-encode a tree file")
    p.add_argument("input", nargs="?", default="-", help="LUK/PAREN/SIN file, bare child counts, or - for stdin")
    p.add_argument("--to", choices=("luk", "paren", "height", "contour"), required=True)
    p = tree.add_parser("check", parents=[common], help="run the exact coding invariants on a tree file")
    p.add_argument("input", nargs="?", default="-")

    verify = verbs.add_parser("verify", help="verification experiments").add_subparsers(dest="op", required=True)
    for name in EXPERIMENTS:
        p = verify.add_parser(name, parents=[common], help=f"run the [{name}] experiment")
        p.add_argument("--config", type=Path, default=None, help="INI file with a [%s] section" % name)
    return parser


# -- output ------------------------------------------------------------------------


def _emit(text: str, args) -> None:
    if args.out is not None:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def _emit_record(record: dict, args) -> None:
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(record))
        w.writerow([repr(v) if isinstance(v, float) else v for v in record.values()])
        _emit(buf.getvalue(), args)
    else:
        _emit(json.dumps(record) + "\n", args)


def _read_input(name: str) -> str:
    if name == "-":
        return sys.stdin.read()
    path = Path(name)
    if not path.is_file():
        raise UsageError(f"input file {name!r} not found")
    return path.read_text()


def _parse_tree_text(text: str):
    if text.split("\n", 1)[0] in ("LUK v1", "PAREN v1", "SIN v1"):
        return loads_any(text)
    try:
        counts = tuple(int(x) for x in text.split())
    except ValueError:
        raise UsageError("input is neither a tree file nor a list of child counts") from None
    return OrderedTree(counts)


# -- verbs -------------------------------------------------------------------------


def _mech(args) -> int:
    if args.op == "psi":
        m = parse_mechanism(args.psi)
        _emit_record({"value": m.psi(args.lam)}, args)
    elif args.op == "phi":
        m = parse_mechanism(args.psi) if args.psi else None
        b = parse_bivariate(args.phi, m)
        _emit_record({"value": b(args.p, args.q)}, args)
    else:
        m = parse_mechanism(args.psi)
        _emit_record(check_conditions(m, parse_bivariate(args.phi, m)).as_dict(), args)
    return EXIT_OK


def _kernel(args) -> int:
    m = parse_mechanism(args.psi)
    solver = CumulantSolver(m)
    if args.op == "u":
        res = solver.u_result(args.a, args.lam, args.method)
    elif args.op == "v":
        res = solver.v_result(args.a, args.method)
    else:
        imm = parse_immigration(args.phi, m)
        res = solver.csbpi_laplace_result(imm, args.a, args.lam, args.x0, args.method)
    _emit_record(res.as_dict(), args)
    return EXIT_OK


def _tree_checks(obj) -> dict:
    checks = {}
    if isinstance(obj, OrderedTree):
        h = obj.heights()
        checks["height_vs_dfs"] = bool(np.array_equal(h, dfs_heights(obj)))
        checks["mirror_involution"] = mirror(mirror(obj)) == obj
        checks["contour_bounds"] = check_contour_bounds(h).ok
        checks["luk_roundtrip"] = loads_any(dumps_luk(obj)) == obj
        checks["paren_roundtrip"] = loads_any(dumps_paren(obj)) == obj
    else:
        h = left_height(obj)
        sd = spinal_decomposition(obj, len(h))
        checks["spinal_reconstruction"] = bool(np.array_equal(sd.heights(), h))
        checks["spinal_sandwich"] = sd.sandwich_holds()
        checks["occupation_identity"] = occupation_check(obj) == 0
        checks["contour_bounds_left"] = check_contour_bounds(h).ok
        checks["contour_bounds_right"] = check_contour_bounds(right_height(obj)).ok
        checks["mirror_involution"] = obj.mirror().mirror() == obj
        checks["sin_roundtrip"] = loads_any(dumps_sin(obj)) == obj
    return checks


def _tree(args) -> int:
    seed = 1 if args.seed is None else args.seed
    if args.op == "sample-gw":
        t = sample_gw(parse_offspring(args.offspring), seed, args.size_cap)
        _emit(dumps_luk(t) if args.to == "luk" else dumps_paren(t), args)
        return EXIT_OK
    if args.op == "sample-gwi":
        mu = parse_offspring(args.offspring)
        st = sample_gwi(mu, parse_dispatch(args.dispatch, mu), args.depth, seed, args.size_cap)
        _emit(dumps_sin(st), args)
        return EXIT_OK
    obj = _parse_tree_text(_read_input(args.input))
    if args.op == "encode":
        if args.to in ("luk", "paren"):
            if not isinstance(obj, OrderedTree):
                raise UsageError("sin-trees only encode to height or contour")
            _emit(dumps_luk(obj) if args.to == "luk" else dumps_paren(obj), args)
            return EXIT_OK
        if isinstance(obj, SinTree):
            h = left_height(obj)
            values = h if args.to == "height" else contour_from_height(h)
        else:
            h = obj.heights()
            values = h if args.to == "height" else contour_from_height(h, closed=True)
        _emit(" ".join(map(str, values.tolist())) + "\n", args)
        return EXIT_OK
    checks = _tree_checks(obj)
    _emit_record(checks, args)
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


def _verify(args) -> int:
    cfg = read_config(args.config, args.op) if args.config is not None else resolve(args.op)
    report = EXPERIMENTS[args.op](cfg, seed=args.seed, workers=args.workers)
    _emit(report.to_csv() if args.format == "csv" else report.to_json(), args)
    return EXIT_OK if report.passed else EXIT_FAIL


_USAGE_ERRORS = (
    UsageError,
    LiteralError,
    ConfigError,
    TreeFormatError,
    PathFormatError,
    DegenerateConfig,
    UnsupportedMechanism,
)
_RUNTIME_ERRORS = (IntegrationError, SizeCapExceeded, PopulationCapExceeded, InconclusiveEnumeration)


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return int(exc.code or 0)
    if getattr(args, "workers", 1) < 1:
        print("gwilab: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    start = time.perf_counter()
    handler = {"mech": _mech, "kernel": _kernel, "tree": _tree, "verify": _verify}[args.verb]
    try:
        code = handler(args)
    except _USAGE_ERRORS as exc:
        print(f"gwilab: error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except _RUNTIME_ERRORS as exc:
        print(f"gwilab: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"gwilab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"gwilab: {args.verb} {args.op} finished in {time.perf_counter() - start:.3f}s", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
