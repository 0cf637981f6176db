"""Command line entry point: ``spread validate|rate|simulate|reproduce``.

Exit codes: 0 ok, 1 reproduction mismatch, 2 invalid model, 3 unreadable
model file, 4 spectral/regime/coverage failure, 5 resource cap exceeded,
64 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import branching, topo
from .errors import (
    ConvergenceError,
    CoverageError,
    EstimationError,
    ModelFormatError,
    ModelValidationError,
    RegimeError,
    ResourceLimitError,
    SpectralStructureError,
)
from .io import ModelSpec, fmt, load_model
from .reproduce import EXAMPLE_IDS, format_report, reproduce
from .tables import model_rates, simulate_tables
from .trees import WindowSequence, serialize

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INVALID = 2
EXIT_FORMAT = 3
EXIT_SPECTRAL = 4
EXIT_RESOURCE = 5
EXIT_USAGE = 64

_SPECTRAL_ERRORS = (SpectralStructureError, ConvergenceError, RegimeError, CoverageError, EstimationError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _err(msg: str):
    print(f"error: {msg}", file=sys.stderr)


def _load(path) -> ModelSpec:
    return load_model(path)


def _random_violations(spec: ModelSpec) -> list[str]:
    """Symbols of the induced alphabet that the block code leaves unmapped."""
    pots = branching.enumerate_potential_patterns(spec.dist, spec.code.k)
    return [f"block code undefined on {serialize(p)}" for p in pots.patterns if p not in spec.code.mapping]


def _topo_coverage(spec: ModelSpec) -> list[str]:
    try:
        topo.induce(spec.model, spec.code)
    except CoverageError as e:
        return [str(e)]
    return []


def cmd_validate(args) -> int:
    try:
        spec = _load(args.model)
    except ModelFormatError as e:
        _err(str(e))
        return EXIT_FORMAT
    except ModelValidationError as e:
        print(f"invalid: {e}")
        return EXIT_INVALID
    except OSError as e:
        _err(str(e))
        return EXIT_FORMAT
    if spec.kind == "topological":
        problems = [str(v) for v in topo.validate(spec.model)]
        if not problems:
            problems = _topo_coverage(spec)
    else:
        problems = _random_violations(spec)
    if problems:
        print("invalid:")
        for p in problems:
            print(f"  {p}")
        return EXIT_INVALID
    print(f"ok: {spec.kind} model, {len(spec.types)} hidden types, "
          f"{len(spec.explicit)} explicit types, block depth {spec.code.k}")
    return EXIT_OK


def cmd_rate(args) -> int:
    try:
        spec = _load(args.model)
    except ModelFormatError as e:
        _err(str(e))
        return EXIT_FORMAT
    except ModelValidationError as e:
        print(f"invalid: {e}")
        return EXIT_INVALID
    if args.target is not None and args.target not in spec.explicit:
        _err(f"unknown explicit type {args.target!r}; choose from {list(spec.explicit)}")
        return EXIT_USAGE
    try:
        rates, pair = model_rates(spec)
    except ModelValidationError as e:
        print(f"invalid: {e}")
        return EXIT_INVALID
    except _SPECTRAL_ERRORS as e:
        _err(str(e))
        return EXIT_SPECTRAL
    except ResourceLimitError as e:
        _err(str(e))
        return EXIT_RESOURCE
    shown = [args.target] if args.target is not None else list(spec.explicit)
    if args.json:
        out = {"rho": pair.rho, "w": {k: v for k, v in pair.as_dict().items()},
               "rates": {a: rates[a] for a in shown}, "residual": pair.residual,
               "iterations": pair.iterations}
        print(json.dumps(out, indent=2))
        return EXIT_OK
    print(f"rho {fmt(pair.rho)}")
    for lab, x in pair.as_dict().items():
        print(f"w {lab} {fmt(x)}")
    for a in shown:
        print(f"rate {a} {fmt(rates[a])}")
    return EXIT_OK


def _out_paths(out: str | None):
    if out is None:
        return None, None, None
    p = Path(out)
    if p.suffix != ".csv":
        p.mkdir(parents=True, exist_ok=True)
        p = p / "ratios.csv"
    else:
        p.parent.mkdir(parents=True, exist_ok=True)
    stem = p.with_suffix("")
    return p, Path(f"{stem}_counts.csv"), Path(f"{stem}_w.csv")


def cmd_simulate(args) -> int:
    try:
        spec = _load(args.model)
    except ModelFormatError as e:
        _err(str(e))
        return EXIT_FORMAT
    except ModelValidationError as e:
        print(f"invalid: {e}")
        return EXIT_INVALID
    try:
        ws = WindowSequence.parse(args.window)
    except ValueError as e:
        _err(f"bad --window {args.window!r}: {e}")
        return EXIT_USAGE
    if args.trials < 1 or args.gens < 0 or args.workers < 1:
        _err("--trials and --workers must be >= 1, --gens >= 0")
        return EXIT_USAGE
    if args.start is not None and args.start not in spec.types:
        _err(f"unknown start type {args.start!r}")
        return EXIT_USAGE
    try:
        ratios, counts, wtext = simulate_tables(spec, ws, args.gens, args.trials, args.seed,
                                                workers=args.workers, start=args.start)
    except ModelValidationError as e:
        print(f"invalid: {e}")
        return EXIT_INVALID
    except ResourceLimitError as e:
        _err(str(e))
        return EXIT_RESOURCE
    except _SPECTRAL_ERRORS as e:
        _err(str(e))
        return EXIT_SPECTRAL
    except ValueError as e:
        _err(str(e))
        return EXIT_USAGE
    rpath, cpath, wpath = _out_paths(args.out)
    if rpath is None:
        sys.stdout.write(ratios)
        return EXIT_OK
    rpath.write_text(ratios)
    written = [rpath]
    if args.full:
        cpath.write_text(counts)
        written.append(cpath)
        if wtext is not None:
            wpath.write_text(wtext)
            written.append(wpath)
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def cmd_reproduce(args) -> int:
    if args.example not in EXAMPLE_IDS:
        _err(f"unknown example {args.example!r}; choose from {', '.join(EXAMPLE_IDS)}")
        return EXIT_USAGE
    checks = reproduce(args.example, trials=args.trials, seed=args.seed, workers=args.workers) \
        if args.example in ("4.2.1", "4.2.2") else reproduce(args.example)
    print(format_report(checks))
    failed = [c for c in checks if not c.ok]
    if failed:
        print(f"{len(failed)} of {len(checks)} checks failed")
        return EXIT_MISMATCH
    print(f"all {len(checks)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spread", description="Spread rates of projected spread models.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("--model", required=True)
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("rate", help="closed-form / theoretical spread rates")
    r.add_argument("--model", required=True)
    g = r.add_mutually_exclusive_group()
    g.add_argument("--target", help="one explicit type")
    g.add_argument("--all", action="store_true", help="every explicit type (default)")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_rate)

    s = sub.add_parser("simulate", help="windowed ratio series as CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trials", type=int, default=300)
    s.add_argument("--gens", type=int, default=8)
    s.add_argument("--window", default="const:1", help="'const:k' or a comma list of lengths")
    s.add_argument("--start", help="hidden start type (default: the file's 'start' or the first type)")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", help="CSV file or directory (default: ratios to stdout)")
    s.add_argument("--full", action="store_true", help="also write per-trial counts and the W diagnostic")
    s.set_defaults(func=cmd_simulate)

    x = sub.add_parser("reproduce", help="check a built-in example against its expected values")
    x.add_argument("example", help=", ".join(EXAMPLE_IDS))
    x.add_argument("--seed", type=int, default=42)
    x.add_argument("--trials", type=int, default=300)
    x.add_argument("--workers", type=int, default=1)
    x.set_defaults(func=cmd_reproduce)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
