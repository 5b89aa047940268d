"""Command-line interface.

Subcommands::

    robinopt run <config.json> [--out DIR] [--jobs N]
    robinopt mesh gen {square|disk} ...
    robinopt verify {gradient|steklov|explicit-min|serrin|alpha} ...

Exit codes: 0 success, 2 config error, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import RobinoptError
from .experiments import EXIT_CONFIG, EXIT_NUMERICAL, run_batch, run_scenario
from .mesh import generate_disk, generate_square


def _add_domain_args(p: argparse.ArgumentParser):
    p.add_argument("--domain", choices=["square", "disk", "mesh-file"], default="square")
    p.add_argument("--n", type=int, default=16, help="square cells per side")
    p.add_argument("--n-boundary", type=int, default=64)
    p.add_argument("--n-rings", type=int, default=16)
    p.add_argument("--mesh-path", type=str, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None)


def _domain_config(args) -> dict:
    if args.domain == "square":
        return {"kind": "square", "n": args.n}
    if args.domain == "disk":
        return {"kind": "disk", "n_boundary": args.n_boundary, "n_rings": args.n_rings}
    if not args.mesh_path:
        print("config error: --mesh-path is required for --domain mesh-file")
        raise SystemExit(EXIT_CONFIG)
    return {"kind": "mesh_file", "path": args.mesh_path}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robinopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario config (or a batch)")
    run_p.add_argument("config", type=str)
    run_p.add_argument("--out", type=str, default="robinopt-out")
    run_p.add_argument("--jobs", type=int, default=1)

    mesh_p = sub.add_parser("mesh", help="mesh utilities")
    mesh_sub = mesh_p.add_subparsers(dest="mesh_command", required=True)
    gen_p = mesh_sub.add_parser("gen", help="generate a mesh file")
    gen_p.add_argument("shape", choices=["square", "disk"])
    gen_p.add_argument("--n", type=int, default=16)
    gen_p.add_argument("--n-boundary", type=int, default=64)
    gen_p.add_argument("--n-rings", type=int, default=16)
    gen_p.add_argument("--out", type=str, default=None, help="output path (default stdout)")

    verify_p = sub.add_parser("verify", help="run one built-in verification")
    verify_sub = verify_p.add_subparsers(dest="verify_command", required=True)

    g = verify_sub.add_parser("gradient", help="finite-difference gradient check")
    _add_domain_args(g)
    g.add_argument("--pairs", type=int, default=5)
    g.add_argument("--tolerance", type=float, default=1e-4)

    s = verify_sub.add_parser("steklov", help="Steklov spectrum table")
    _add_domain_args(s)
    s.add_argument("--modes", type=int, default=8)
    s.add_argument("--v0-fraction", type=float, default=0.5)

    e = verify_sub.add_parser("explicit-min", help="closed-form compliance minimizer")
    _add_domain_args(e)
    e.add_argument("--v0-fraction", type=float, default=0.5,
                   help="fraction of V0_Omega")
    e.add_argument("--starts", type=int, default=3)

    r = verify_sub.add_parser("serrin", help="ball vs non-ball discrimination")
    _add_domain_args(r)
    r.add_argument("--v0-fraction", type=float, default=0.25,
                   help="fraction of the perimeter")

    a = verify_sub.add_parser("alpha", help="penalization limit sweep")
    _add_domain_args(a)
    a.add_argument("--alphas", type=float, nargs="+",
                   default=[1.0, 4.0, 16.0, 64.0, 256.0, 1024.0])
    a.add_argument("--gamma-edges", type=int, default=None,
                   help="number of leading boundary edges forming Gamma")
    return parser


def _cmd_run(args) -> int:
    path = Path(args.config)
    if not path.exists():
        print(f"config error: no such file {path}")
        return EXIT_CONFIG
    try:
        config = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON: {exc}")
        return EXIT_CONFIG
    if isinstance(config, dict) and "scenarios" in config:
        return run_batch(config["scenarios"], args.out, jobs=args.jobs)
    return run_scenario(config, args.out)


def _cmd_mesh_gen(args) -> int:
    try:
        if args.shape == "square":
            mesh = generate_square(args.n)
        else:
            mesh = generate_disk(args.n_boundary, args.n_rings)
    except (ValueError, RobinoptError) as exc:
        print(f"config error: {exc}")
        return EXIT_CONFIG
    text = mesh.serialize()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_verify(args) -> int:
    domain = _domain_config(args)
    out = args.out or f"robinopt-out/{args.verify_command}"
    if args.verify_command == "gradient":
        cfg = {
            "scenario": "gradient_check",
            "domain": domain,
            "seed": args.seed,
            "options": {"n_pairs": args.pairs, "tolerance": args.tolerance},
        }
    elif args.verify_command == "steklov":
        cfg = {
            "scenario": "steklov_table",
            "domain": domain,
            "seed": args.seed,
            "problem": {"V0": {"fraction_of_perimeter": args.v0_fraction}},
            "options": {"modes": args.modes},
        }
    elif args.verify_command == "explicit-min":
        cfg = {
            "scenario": "verify_explicit_minimizer",
            "domain": domain,
            "seed": args.seed,
            "problem": {"V0": {"fraction_of_v0_omega": args.v0_fraction}},
            "options": {"n_starts": args.starts},
        }
    elif args.verify_command == "serrin":
        cfg = {
            "scenario": "serrin_check",
            "domain": domain,
            "seed": args.seed,
            "problem": {"V0": {"fraction_of_perimeter": args.v0_fraction}},
        }
    else:
        options = {"alphas": args.alphas}
        if args.gamma_edges is not None:
            options["gamma_edges"] = args.gamma_edges
        cfg = {
            "scenario": "alpha_sweep",
            "domain": domain,
            "seed": args.seed,
            "options": options,
        }
    return run_scenario(cfg, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "mesh":
            return _cmd_mesh_gen(args)
        return _cmd_verify(args)
    except RobinoptError as exc:
        print(f"numerical failure: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
