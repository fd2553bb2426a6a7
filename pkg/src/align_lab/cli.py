"""Command line entry point.

    align-lab run CONFIG [--dry-run] [--jobs N] [--seed-override S]
    align-lab sweep CONFIG [--dry-run] [--jobs N] [--seed-override S]
    align-lab export-plots DIR [--out OUT] [--no-figures]

Exit status: 0 success, 2 configuration error, 3 runtime failure.
"""

import argparse
import json
import logging
import sys

from .config import ConfigFile, load_config
from .errors import AlignLabError, ConfigError, MissingRecords
from .runner import output_root, run_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _resolve(args) -> ConfigFile:
    cfg_file = load_config(args.config)
    if args.seed_override is not None:
        base = cfg_file.base.with_overrides(seeds=[args.seed_override])
        cfg_file = ConfigFile(base, cfg_file.axes)
    if args.command == "sweep" and not cfg_file.axes:
        raise ConfigError("sweep needs at least one 'key in [...]' axis")
    return cfg_file


def _dry_run(cfg_file: ConfigFile) -> None:
    for label, cfg in cfg_file.points():
        print(f"# point: {label or '(single)'} -> {output_root(cfg) / label}")
        print(cfg.to_text(), end="")


def _cmd_run(args) -> int:
    try:
        cfg_file = _resolve(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dry_run:
        _dry_run(cfg_file)
        return EXIT_OK
    try:
        summaries = run_config(cfg_file, jobs=args.jobs)
    except (AlignLabError, OSError) as exc:
        print(f"runtime failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for label, s in summaries.items():
        print(json.dumps({"point": label, "test_auc_mean": s["test_auc_mean"],
                          "test_mca_mean": s["test_mca_mean"]}))
    return EXIT_OK


def _cmd_export(args) -> int:
    from .plotting import render_figures
    from .reporting import collect_runs, export_plot_data

    try:
        paths = export_plot_data(args.dir, args.out)
        if not args.no_figures:
            out = args.out or args.dir
            paths.update({p.stem + "_png": p for p in render_figures(collect_runs(args.dir), out)})
    except MissingRecords as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in paths.values():
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="align-lab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep"):
        p = sub.add_parser(name, help=f"{name} an experiment config")
        p.add_argument("config")
        p.add_argument("--dry-run", action="store_true", help="print the resolved config and exit")
        p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
        p.add_argument("--seed-override", type=int, default=None, help="run only this seed")
        p.set_defaults(func=_cmd_run)
    p = sub.add_parser("export-plots", help="write tidy plot CSVs and figures for a run directory")
    p.add_argument("dir")
    p.add_argument("--out", default=None, help="output directory (default: DIR)")
    p.add_argument("--no-figures", action="store_true", help="only write the CSVs")
    p.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
