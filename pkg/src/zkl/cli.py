"""Command-line entry point: ``zkl <subcommand> [--config PATH] [--out DIR] ...``."""
from __future__ import annotations

import argparse
import json
import sys

from . import experiments
from .errors import FormatError, NumericError, RejectedInputError


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise experiments.ConfigError(f"config: invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise experiments.ConfigError("config: top level must be a JSON object")
    return doc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zkl", description="ZO/FO kernel and dynamics experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config document; flags override its fields")
        p.add_argument("--out", default=None, help="output directory (default: ./out/<command>)")
        p.add_argument("--seed", type=int, default=None, help="run a single seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads for independent cells")
        return p

    kc = common(sub.add_parser("kernel-compare", help="FO vs projected kernel metrics over a P sweep"))
    kc.add_argument("--p", type=_int_list, default=None, help="P sweep, e.g. 1,4,16")
    kc.add_argument("--distributions", default=None, help="gaussian,rademacher")
    kc.add_argument("--dump-kernels", action="store_true", default=None)

    tr = common(sub.add_parser("trajectory", help="FO and ZO belief trajectories"))
    tr.add_argument("--p", type=_int_list, default=None)
    tr.add_argument("--distributions", default=None)
    tr.add_argument("--eta", type=float, default=None)
    tr.add_argument("--steps", type=int, default=None)
    tr.add_argument("--no-zo", action="store_true", help="FO-vs-FO control only")

    vs = common(sub.add_parser("v-scaling", help="relative kernel error against output size"))
    vs.add_argument("--v", type=_int_list, default=None, help="V sweep, e.g. 2,10,100")
    vs.add_argument("--p", type=_int_list, default=None)

    mc = common(sub.add_parser("moment-check", help="Monte-Carlo and enumeration moment identities"))
    mc.add_argument("--c", type=float, default=None, help="concentration constant for the tail checks")
    mc.add_argument("--W", choices=("random", "zero", "identity"), default=None)

    jl = common(sub.add_parser("jl-budget", help="required perturbation count"))
    jl.add_argument("--n", type=int, default=None)
    jl.add_argument("--epsilon", type=float, default=None)
    jl.add_argument("--delta", type=float, default=None)
    jl.add_argument("--c", type=float, default=None)
    return parser


def _overrides(args) -> dict:
    ov: dict = {"threads": args.threads}
    if args.seed is not None:
        ov["seeds"] = [args.seed]
    if getattr(args, "p", None) is not None:
        ov["p_sweep"] = args.p
    if getattr(args, "distributions", None) is not None:
        ov["distributions"] = [d.strip() for d in args.distributions.split(",") if d.strip()]
    if getattr(args, "dump_kernels", None):
        ov["dump_kernels"] = True
    optim = {k: getattr(args, k) for k in ("eta", "steps") if getattr(args, k, None) is not None}
    if optim:
        ov["optim"] = optim
    if getattr(args, "no_zo", False):
        ov["include_zo"] = False
    if getattr(args, "v", None) is not None:
        ov["v_sweep"] = args.v
    if args.command == "moment-check" and args.W is not None:
        ov["W"] = args.W
    for key in ("c", "n", "epsilon", "delta"):
        if getattr(args, key, None) is not None:
            ov[key] = getattr(args, key)
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = experiments.resolve_config(args.command, _load_config(args.config), **_overrides(args))
        out = args.out or cfg.out or f"out/{args.command}"
        result = experiments.run(cfg)
        files = experiments.write_outputs(cfg, result, out)
    except (RejectedInputError, FormatError, NumericError, OSError) as e:
        print(f"zkl: error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {', '.join(files)} to {out}")
    if args.command == "moment-check" and not result["all_pass"]:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
