"""Command-line entry point.

Exit status: 0 on success, 1 on a configuration error, 2 when ``compare``
finds a point whose oracle deviates from the closed form beyond tolerance.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import sweep
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_TOLERANCE = 0, 1, 2

log = logging.getLogger("lossyphase")

HELP = {
    "fig4": "enhancement against photons lost for several squeezing fractions",
    "fig5": "optimized squeezing fraction against mu = 1/2",
    "fig6": "improvement ratio of the optimized squeezing fraction",
    "compare": "Fock-space oracle against the closed-form Fisher information",
    "measure": "simulate the local-oscillator measurement",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lossyphase",
        description="Phase sensitivity of coherent light plus squeezed vacuum under photon loss.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in sweep.COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--out", help="output table path (default: stdout)")
        p.add_argument("--format", choices=("csv", "tsv"))
        p.add_argument("--tolerance", type=float, help="relative tolerance for oracle checks")
        p.add_argument("--cutoff-cap", type=int, help="largest per-mode Fock cutoff")
        p.add_argument("--ideal-squeezing", action="store_true",
                       help="drop the exp(-2r) term when evaluating Fisher information from a photon budget")
        p.add_argument("--plot", help="also render a figure to this path")
        p.add_argument("--jobs", type=int, help="worker processes for oracle sweeps")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry, e.g. --set n_loss=0:4:81")
    return parser


def _overrides(args) -> dict[str, str]:
    raw = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    flags = {
        "out": args.out, "format": args.format, "tolerance": args.tolerance,
        "cutoff_cap": args.cutoff_cap, "plot": args.plot, "jobs": args.jobs,
    }
    raw.update({k: str(v) for k, v in flags.items() if v is not None})
    if args.ideal_squeezing:
        raw["ideal_squeezing"] = "true"
    return raw


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        config = sweep.load_config(args.command, args.config, _overrides(args))
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    table, failed = sweep.execute(config)
    sweep.validate_table(table)
    text = sweep.write_table(table, config.out, config.delimiter)
    if config.out is None:
        sys.stdout.write(text)
    if config.plot:
        from . import plotting

        plotting.render(config.command, table, config.plot)
        log.info("figure written to %s", config.plot)
    if failed:
        print("tolerance exceeded; see rows with status 'tolerance'", file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
