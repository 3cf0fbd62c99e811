"""Command-line entry points.

Exit codes: 0 success, 2 configuration/validation failure, 3 numerical
failure (quadrature, solver, or scan breakdown).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .exceptions import ConfigError, HardyLabError
from .harness import run_experiment, verify_reproduction
from .kernel import KernelSpec, export_table, synthesize_kernel

_CHECK_KINDS = ["necessary", "necessary-critical", "necessary-offorigin",
                "sufficient", "supersolution", "moment-ratio"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hardylab",
        description="Numerical laboratory for the Hardy-weighted fractional "
                    "heat equation: kernels, solves, solvability checks, "
                    "threshold scans.")
    sub = parser.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", help="tabulate a kernel profile to CSV")
    k.add_argument("--dim", type=int, required=True, choices=[1, 2])
    k.add_argument("--theta", type=float, required=True)
    k.add_argument("--rmax", type=float, default=None)
    k.add_argument("--points", type=int, default=4096)
    k.add_argument("--out", required=True, help="output CSV path")

    for name, text in [("solve", "run the monotone iteration on a config"),
                       ("scan", "bisect the existence threshold"),
                       ("report", "replay a manifest and verify reproduction")]:
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True, help="output directory")

    c = sub.add_parser("check", help="evaluate a solvability criterion")
    c.add_argument("kind", choices=_CHECK_KINDS)
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("recursion", help="run the coefficient recursion lab")
    r.add_argument("--config", default=None,
                   help="config mode: full run directory with manifest")
    r.add_argument("--c1", type=float, default=1.0)
    r.add_argument("--c2", type=float, default=1.0)
    r.add_argument("--p", type=float, default=None)
    r.add_argument("--k", type=int, default=60)
    r.add_argument("--out", required=True,
                   help="output directory (config mode) or CSV path (flag mode)")
    return parser


def _load_config(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "kernel":
            table = synthesize_kernel(KernelSpec(args.dim, args.theta),
                                      r_max=args.rmax, n_points=args.points)
            export_table(table, args.out)
            print(f"kernel table ({len(table.radii)} radii) -> {args.out}")
        elif args.command == "recursion" and args.config is None:
            from .lowerbound import a_sequence, write_run_csv
            if args.p is None:
                raise ConfigError("recursion flag mode needs --p (or use --config)")
            write_run_csv(a_sequence(args.c1, args.c2, args.p, args.k), args.out)
            print(f"recursion run (K={args.k}) -> {args.out}")
        elif args.command == "report":
            ok, bad = verify_reproduction(args.config, args.out)
            doc = {"reproduced": ok, "mismatches": bad}
            outp = Path(args.out) / "reproduction.json"
            outp.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
            print(f"reproduced: {ok}" + (f" ({len(bad)} mismatches)" if bad else ""))
            if not ok:
                return 3
        elif args.command == "check":
            cfg = _load_config(args.config)
            cfg.setdefault("task", {})["check"] = args.kind
            manifest = run_experiment("check", cfg, args.out)
            print(f"{len(manifest['outputs'])} outputs -> {args.out}")
        else:
            cfg = _load_config(args.config)
            manifest = run_experiment(args.command, cfg, args.out)
            print(f"{len(manifest['outputs'])} outputs -> {args.out}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except HardyLabError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
