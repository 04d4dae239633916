"""Command-line surface: run, validate, verify-spaces, list-experiments.

Exit codes: 0 success (recorded blow-ups included), 1 validation error,
2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .io import jsonable
from .runner import EXPERIMENT_KINDS, OUTPUT_ROOT_ENV, ValidationError, load_config, run, validate
from .verify import verify_spaces

_KIND_HELP = {
    "hj": "one Hamilton-Jacobi solve (manufactured or singular right-hand side)",
    "fp": "one backward Fokker-Planck solve with conservation diagnostics",
    "maxreg": "maximal-regularity sigma-ladder sweep",
    "holder": "Hoelder-exponent measurement over a sigma-ladder",
    "stability": "truncation-stability ladder at the critical exponent",
    "mfg": "one coupled forward-backward fixed-point solve with monitors",
    "sweep": "coupling-growth threshold sweep of the coupled system",
    "verify-spaces": "function-space property battery",
}


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="hjlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output-root", default=None,
                       help=f"artifact root (default: ${OUTPUT_ROOT_ENV} or cwd)")

    p_val = sub.add_parser("validate", help="classify a config against every threshold")
    p_val.add_argument("config")

    p_ver = sub.add_parser("verify-spaces", help="run the norm-layer property battery")
    p_ver.add_argument("--seed", type=int, default=0)
    p_ver.add_argument("--n", type=int, default=64)

    sub.add_parser("list-experiments", help="list experiment kinds and their keys")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            outdir = run(cfg, output_root=args.output_root)
            print(f"artifacts written to {outdir}")
            return 0
        if args.command == "validate":
            cfg = load_config(args.config)
            book, warnings, errors = validate(cfg)
            print(json.dumps(jsonable({
                "book": book.to_dict(), "warnings": warnings, "errors": errors,
            }), indent=2, sort_keys=True))
            return 1 if errors else 0
        if args.command == "verify-spaces":
            results = verify_spaces(seed=args.seed, n=args.n)
            ok = True
            for r in results:
                status = "PASS" if r["passed"] else "FAIL"
                ok = ok and r["passed"]
                print(f"{status}  {r['check']}: {r['detail']}")
            return 0 if ok else 1
        if args.command == "list-experiments":
            for kind in EXPERIMENT_KINDS:
                print(f"{kind:15s} {_KIND_HELP[kind]}")
            return 0
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
