"""Command-line experiment runner.

Subcommands:
    run <config>        run one experiment config, emit CSV
    sweep <config...>   run several configs, emit one merged CSV
    gen <config>        sample the first (m, seed) cell to an observation file

Exit codes: 0 on success, 2 on configuration errors, 3 on runtime failure.
The default thread count comes from the SOFTDEFLATE_THREADS environment
variable (1 when unset); --threads overrides it.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .experiments import (
    ConfigError,
    default_thread_count,
    generate_observation_file,
    load_config,
    run_experiment,
    rows_to_csv,
    sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="softdeflate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--out", help="output path (defaults to the config's `out`, else stdout)")
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads for (m, seed) cells (default SOFTDEFLATE_THREADS or 1)",
        )
        p.add_argument(
            "--no-smoothing",
            action="store_true",
            help="replace the noise-regularized QR with plain QR inside the solver",
        )
        p.add_argument("--s-max", type=int, default=None, help="median trials per iteration")
        p.add_argument(
            "--gap-ratio", type=float, default=None, help="spectrum-cut ratio threshold"
        )
        p.add_argument(
            "--fro-abs",
            action="store_true",
            help="append an absolute-Frobenius-error column to the CSV",
        )

    run_p = sub.add_parser("run", help="run one experiment config")
    run_p.add_argument("config")
    add_common(run_p)

    sweep_p = sub.add_parser("sweep", help="run several configs into one CSV")
    sweep_p.add_argument("configs", nargs="+")
    add_common(sweep_p)

    gen_p = sub.add_parser("gen", help="write an observation file for a config's first cell")
    gen_p.add_argument("config")
    gen_p.add_argument("--out", help="observation file path (defaults to the config's `out`)")

    return parser


def _apply_flags(config, args):
    updates = {}
    if getattr(args, "no_smoothing", False):
        updates["smoothing"] = False
    if getattr(args, "s_max", None) is not None:
        updates["s_max"] = args.s_max
    if getattr(args, "gap_ratio", None) is not None:
        updates["gap_ratio"] = args.gap_ratio
    if getattr(args, "fro_abs", False):
        updates["fro_abs"] = True
    return dataclasses.replace(config, **updates) if updates else config


def _emit(csv_text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _apply_flags(load_config(args.config), args)
        elif args.command == "sweep":
            configs = [_apply_flags(load_config(path), args) for path in args.configs]
        else:
            config = load_config(args.config)
    except (ConfigError, OSError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "gen":
            out = args.out or config.out
            if not out:
                print("config error: gen needs --out or an `out` key", file=sys.stderr)
                return EXIT_CONFIG
            generate_observation_file(config, out)
            return EXIT_OK

        threads = args.threads if args.threads is not None else default_thread_count()
        if args.command == "run":
            rows = run_experiment(config, threads)
            fro_abs = config.fro_abs
            out = args.out or config.out
        else:
            rows = sweep(configs, threads)
            fro_abs = configs[0].fro_abs
            out = args.out or configs[0].out
        _emit(rows_to_csv(rows, fro_abs), out)
        return EXIT_OK
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
