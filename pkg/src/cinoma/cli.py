"""Command-line experiment runner.

Exit codes: 0 success, 1 invalid configuration, 2 I/O error, 3 when some
sweep point exceeded the tolerated optimizer failure rate.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments as ex

SUBCOMMANDS = {
    "power-vs-antennas": "PowerVsAntennas",
    "power-vs-targets": "PowerVsTargets",
    "ser-vs-power": "SerVsPower",
    "complexity-vs-antennas": "ComplexityVsAntennas",
    "complexity-vs-mod-order": "ComplexityVsModOrder",
}

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_FAILURES = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cinoma", description="Run precoding experiments and write result rows.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, experiment in list(SUBCOMMANDS.items()) + [("run", None)]:
        helptext = f"run a {experiment} sweep" if experiment else "run the experiment named in the config"
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--preset", help="named preset config (see list-presets)")
        p.add_argument("--seed", type=_u64)
        p.add_argument("--out", default="-", help="output path, '-' for stdout")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        p.add_argument("--draws", type=int, help="channel draws per sweep point")
        p.add_argument("--symbols", type=int, help="symbols per sweep point (SER sweeps)")
        p.add_argument("--schemes", help="comma-separated subset of OMA,NOMA,CoMA")
        p.add_argument("--workers", type=int, help="worker processes")
        p.set_defaults(experiment=experiment)
    p = sub.add_parser("list-presets", help="print the preset names")
    p.set_defaults(experiment=None)
    p = sub.add_parser("show-preset", help="print a preset config")
    p.add_argument("name")
    p.set_defaults(experiment=None)
    return parser


def _config(args) -> ex.ExperimentConfig:
    schemes = None
    if args.schemes is not None:
        schemes = tuple(s.strip() for s in args.schemes.split(",") if s.strip())
    overrides = dict(seed=args.seed, n_draws=args.draws, n_symbols=args.symbols,
                     schemes=schemes, workers=args.workers)
    if args.config is None and args.preset is None:
        if args.experiment is None:
            raise ValueError("run needs --config or --preset")
        return ex.load_config(experiment=args.experiment, **overrides)
    cfg = ex.load_config(args.config, args.preset, **overrides)
    if args.experiment is not None and cfg.experiment != args.experiment:
        raise ValueError(f"config describes {cfg.experiment}, not {args.experiment}")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-presets":
        print("\n".join(ex.preset_names()))
        return EXIT_OK
    try:
        if args.command == "show-preset":
            sys.stdout.write(ex.preset_text(args.name))
            return EXIT_OK
        cfg = _config(args)
    except OSError as exc:
        print(f"cinoma: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TypeError, ValueError) as exc:
        print(f"cinoma: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = ex.run(cfg)
    try:
        ex.emit(rows, args.format, args.out)
    except OSError as exc:
        print(f"cinoma: {exc}", file=sys.stderr)
        return EXIT_IO
    flagged = sorted({(r.scheme, r.x) for r in rows if r.flagged})
    if flagged:
        pts = ", ".join(f"{s}@{x:g}" for s, x in flagged)
        print(f"cinoma: optimizer failure rate above {ex.FAILURE_LIMIT:.0%} at {pts}", file=sys.stderr)
        return EXIT_FAILURES
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
