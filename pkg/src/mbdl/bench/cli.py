"""Command-line entry point.

    mbdl run <config> [--out ROOT]     sweep a config, write metric CSVs
    mbdl plots <dir>                   emit a plotting script for a tree
    mbdl report <dir> [--out FILE]     write and print a comparison report

Output location for ``run``: ``--out`` wins, then the ``MBDL_OUTPUT_ROOT``
environment variable, then ``./bench_out``; the experiment writes into
``<root>/<output>`` where ``output`` comes from the config's [experiment]
section.  Exit codes: 0 on full success, 2 for usage errors (bad config,
unknown kind, missing files or columns), 1 for failures mid-run; rows
finished before a mid-run failure are already flushed to disk.
"""

import argparse
import os
import sys
from pathlib import Path

from ..errors import UsageError
from .config import parse_config
from .experiments import run_experiment
from .plots import emit_plots
from .report import write_report

ENV_OUTPUT_ROOT = "MBDL_OUTPUT_ROOT"


def _output_root(flag_value):
    if flag_value:
        return Path(flag_value)
    env = os.environ.get(ENV_OUTPUT_ROOT)
    if env:
        return Path(env)
    return Path("bench_out")


def _find_metric_files(root):
    root = Path(root)
    if not root.exists():
        raise UsageError(f"no such directory: {root}")
    files = sorted(root.rglob("metrics.csv"))
    if not files:
        raise UsageError(f"no metrics.csv files under {root}")
    return files


def _cmd_run(args):
    config = parse_config(args.config)
    out_dir = _output_root(args.out) / config.output
    path = run_experiment(config, out_dir)
    print(f"wrote {path}")
    return 0


def _cmd_plots(args):
    files = _find_metric_files(args.directory)
    script = emit_plots(files, args.directory)
    print(f"wrote {script}")
    return 0


def _cmd_report(args):
    files = _find_metric_files(args.directory)
    out_path = Path(args.out) if args.out else Path(args.directory) / "report.txt"
    path = write_report(files, out_path)
    with open(path) as fh:
        sys.stdout.write(fh.read())
    print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mbdl",
        description="Reproducible benchmark harness for the inference "
                    "toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to the experiment config file")
    p_run.add_argument("--out", default=None,
                       help=f"output root (default: ${ENV_OUTPUT_ROOT} "
                            f"or ./bench_out)")
    p_run.set_defaults(func=_cmd_run)

    p_plots = sub.add_parser("plots", help="emit a plot script for a "
                                           "results tree")
    p_plots.add_argument("directory", help="directory to scan for "
                                           "metrics.csv files")
    p_plots.set_defaults(func=_cmd_plots)

    p_report = sub.add_parser("report", help="write a comparison report")
    p_report.add_argument("directory", help="directory to scan for "
                                            "metrics.csv files")
    p_report.add_argument("--out", default=None,
                          help="report path (default: <dir>/report.txt)")
    p_report.set_defaults(func=_cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
