"""Command line surface: one subcommand per experiment kind.

Exit codes: 0 success, 1 usage/config error, 2 experiment failure.
"""

import argparse
import json
import sys

from .harness import ConfigError, RunConfig, run


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--b", type=int, default=2, help="branching factor")
    p.add_argument("--n", type=int, default=4, help="tree depth")
    p.add_argument("--t", type=float, default=None, help="stop parameter (overrides the schedule)")
    p.add_argument("--t-factor", type=float, default=8.0, help="C in the schedule t = C n log n")
    p.add_argument("--m", type=int, default=0, help="subtree depth for point patterns")
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--config", type=str, default=None, help="JSON config file; overrides flags")
    p.add_argument(
        "--option",
        action="append",
        default=[],
        metavar="KEY=JSON",
        help="experiment-specific knob, value parsed as JSON (repeatable)",
    )


def _parse_options(pairs) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--option expects KEY=JSON, got {pair!r}")
        key, _, raw = pair.partition("=")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treelocal",
        description="Seeded Monte Carlo experiments on local times of tree walks",
    )
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, blurb in [
        ("field-sample", "sample stopped local-time fields, record centered maxima"),
        ("walk", "direct walk simulation of small fields (oracle)"),
        ("isomorphism", "coupling check against the squared Gaussian field"),
        ("tail", "survival curve and exponent fit of the centered maximum"),
        ("gumbel", "randomly-shifted Gumbel mixture fit"),
        ("point-process", "Laplace-functional comparison against the Cox prediction"),
        ("geometry", "common-ancestor depths of near-maximal leaf pairs"),
        ("bessel-check", "exactness checks of the squared-Bessel step sampler"),
        ("gamma-star", "weighted integral of the BRW max tail"),
        ("cascade", "derivative/additive martingale trends and cascade identities"),
    ]:
        _add_common(sub.add_parser(kind, help=blurb))
    return parser


def config_from_args(args) -> RunConfig:
    cfg = RunConfig(
        kind=args.kind,
        b=args.b,
        n=args.n,
        t=args.t,
        t_factor=args.t_factor,
        m=args.m,
        replicates=args.replicates,
        seed=args.seed,
        workers=args.workers,
        out=args.out,
        options=_parse_options(args.option),
    )
    if args.config:
        with open(args.config) as fh:
            data = json.load(fh)
        merged = cfg.to_dict()
        opts = dict(merged["options"])
        opts.update(data.pop("options", {}))
        merged.update(data)
        merged["options"] = opts
        cfg = RunConfig.from_dict(merged)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors, 0 on --help
        return 0 if exc.code == 0 else 1
    try:
        cfg = config_from_args(args)
        result = run(cfg)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result.summary, sort_keys=True, default=str))
    if not result.ok:
        print("experiment checks failed", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
