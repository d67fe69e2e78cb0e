"""Command-line entry point ``ris-ep``.

Subcommands::

    ris-ep simulate --config exp.toml --out results.csv [--seed S] [--format csv|json]
    ris-ep overhead --m 16 --n 256 --k 8 --c 4 --e 32 --alpha 16 --beta 4
    ris-ep sweep --param n --values 64,128,256 --config exp.toml

The environment variable ``RIS_EP_SEED`` overrides the configured seed;
``--seed`` overrides both.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

from .baselines import OverheadParams, overhead_table
from .config import ExperimentConfig, default_config, dump_config, load_config
from .errors import RisEpError
from .harness import _fmt, export_records, run_experiment

SEED_ENV = "RIS_EP_SEED"
LABELS = {"ls": "LS", "three_phase": "three-phase", "two_timescale": "two-timescale",
          "proposed": "proposed"}

log = logging.getLogger("ris_ep")


def format_overhead(value: Fraction) -> str:
    """Integers print bare, anything else as the shortest float repr."""
    if value.denominator == 1:
        return str(value.numerator)
    return repr(float(value))


def _resolve_seed(cfg: ExperimentConfig, cli_seed: int | None) -> ExperimentConfig:
    seed = cli_seed
    if seed is None and os.environ.get(SEED_ENV, "").strip():
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise RisEpError(f"{SEED_ENV} must be an integer, got {os.environ[SEED_ENV]!r}")
    return cfg if seed is None else dataclasses.replace(cfg, seed=seed)


def _load(path) -> ExperimentConfig:
    return default_config() if path is None else load_config(path)


def _parse_values(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise RisEpError(f"--values must be a list of integers, got {text!r}")
    if not values:
        raise RisEpError("--values is empty")
    return values


def cmd_simulate(args) -> int:
    if args.print_default_config:
        sys.stdout.write(dump_config(default_config()))
        return 0
    if args.config is None:
        raise RisEpError("simulate needs --config (or --print-default-config)")
    cfg = _resolve_seed(load_config(args.config), args.seed)
    out = Path(args.out or cfg.output)
    records = run_experiment(cfg, workers=args.workers)
    export_records(records, out, args.format)
    log.info("wrote %d records to %s", len(records), out)
    return 0


def cmd_overhead(args) -> int:
    params = OverheadParams(args.m, args.n, args.k, args.c, args.e, Fraction(args.alpha),
                            args.beta)
    for key, value in overhead_table(params).items():
        print(f"{LABELS[key]} = {format_overhead(value)}")
    return 0


def _swept(cfg: ExperimentConfig, param: str, value: int) -> ExperimentConfig:
    if param == "m":
        return dataclasses.replace(cfg, m_antennas=value)
    if param == "n":
        if value < 1:
            raise RisEpError("N must be positive")
        # most nearly square panel with n_v <= n_h
        n_v = next(d for d in range(math.isqrt(value), 0, -1) if value % d == 0)
        return dataclasses.replace(cfg, n_h=value // n_v, n_v=n_v)
    # k: spread users over clusters as evenly as possible
    c = cfg.c_clusters
    if value < c:
        raise RisEpError(f"K = {value} is smaller than the {c} clusters")
    sizes = [value // c + (i < value % c) for i in range(c)]
    clusters = [dataclasses.replace(p, num_users=n) for p, n in zip(cfg.clusters, sizes)]
    return dataclasses.replace(cfg, clusters=clusters)


def cmd_sweep(args) -> int:
    base = _resolve_seed(_load(args.config), args.seed)
    values = _parse_values(args.values)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow([args.param] + list(LABELS.values()))
    for value in values:
        cfg = _swept(base, args.param, value)
        table = overhead_table(OverheadParams(
            cfg.m_antennas, cfg.n_elements, cfg.k_users, cfg.c_clusters, cfg.eigenspace_dim,
            Fraction(cfg.alpha), cfg.beta))
        writer.writerow([value] + [_fmt(float(v)) for v in table.values()])
        if args.simulate:
            out_dir = Path(args.simulate)
            out_dir.mkdir(parents=True, exist_ok=True)
            records = run_experiment(cfg, workers=args.workers)
            export_records(records, out_dir / f"{args.param}_{value}.csv")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ris-ep", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a Monte-Carlo NMSE experiment")
    p.add_argument("--config", help="TOML experiment file")
    p.add_argument("--out", help="output path (default: the config's output key)")
    p.add_argument("--seed", type=int, help=f"master seed (overrides {SEED_ENV} and config)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=1, help="worker threads")
    p.add_argument("--print-default-config", action="store_true",
                   help="print the default configuration and exit")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("overhead", help="pilot overhead per frame for each scheme")
    p.add_argument("--m", type=int, required=True, help="BS antennas")
    p.add_argument("--n", type=int, required=True, help="RIS elements")
    p.add_argument("--k", type=int, required=True, help="users")
    p.add_argument("--c", type=int, required=True, help="clusters")
    p.add_argument("--e", type=int, required=True, help="eigenspace dimension")
    p.add_argument("--alpha", type=str, default="16", help="large/small timescale ratio")
    p.add_argument("--beta", type=int, default=4)
    p.set_defaults(func=cmd_overhead)

    p = sub.add_parser("sweep", help="overhead (and optionally NMSE) over one parameter")
    p.add_argument("--param", choices=("n", "k", "m"), required=True)
    p.add_argument("--values", required=True, help="comma-separated integers")
    p.add_argument("--config", help="TOML experiment file (default configuration if omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--simulate", metavar="DIR",
                   help="also run the experiment per value, writing DIR/<param>_<value>.csv")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (RisEpError, ValueError) as exc:
        print(f"ris-ep: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
