"""``interp-lab`` command line: run, compare, validate."""
from __future__ import annotations

import argparse
import json
import sys

from ..errors import ConfigError, InterpLabError
from . import config as cfgmod
from . import runner

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="interp-lab", description="Deterministic quantum-interpretation experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--out", default=None)
    c = sub.add_parser("compare", help="compare two completed runs")
    c.add_argument("run_a")
    c.add_argument("run_b")
    v = sub.add_parser("validate", help="validate a config against the schema")
    v.add_argument("config")
    sub.add_parser("schema", help="print the config JSON schema")
    g = sub.add_parser("gallery", help="list bundled configs, or print one")
    g.add_argument("name", nargs="?")
    return p


def _resolve(path: str) -> str:
    gal = cfgmod.gallery()
    return str(gal[path]) if path in gal else path


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "schema":
            print(cfgmod.schema_json())
            return EXIT_OK
        if args.command == "gallery":
            gal = cfgmod.gallery()
            if args.name is None:
                print("\n".join(sorted(gal)))
            else:
                print(gal[args.name].read_text(), end="")
            return EXIT_OK
        if args.command == "validate":
            cfgmod.load(_resolve(args.config))
            print("ok")
            return EXIT_OK
        if args.command == "run":
            try:
                conf = cfgmod.with_overrides(cfgmod.load(_resolve(args.config)), args.seed, args.out)
            except FileNotFoundError as exc:
                raise ConfigError(f"cannot read {exc.filename}") from exc
            try:
                out = runner.execute(conf)
            except (InterpLabError, ValueError, ArithmeticError, OSError) as exc:
                print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
                return EXIT_RUNTIME
            print(out)
            return EXIT_OK
        if args.command == "compare":
            try:
                report = runner.compare(args.run_a, args.run_b)
            except (InterpLabError, OSError, ValueError) as exc:
                print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
                return EXIT_RUNTIME
            print(json.dumps(runner._jsonable(report), indent=2, sort_keys=True))
            return EXIT_OK
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"validation error: cannot read {exc.filename}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
