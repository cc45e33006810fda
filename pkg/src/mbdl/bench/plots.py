"""Plot-script emission.

``emit_plots`` validates the metric CSVs, works out which curves they
contain, and writes ``plot_metrics.py`` next to them.  The emitted script
is plain text depending only on the standard library and matplotlib; it
reads the CSVs relative to its own location, so the whole directory can
be moved or shared and still render.  SER curves are drawn against SNR
with a log y axis, MSE curves against the training-set size.
"""

import os
from pathlib import Path

from ..errors import UsageError
from .metrics import read_metrics

_SCRIPT_TEMPLATE = '''\
#!/usr/bin/env python3
"""Render benchmark curves from the metric CSVs in this directory tree.

Generated file; it depends only on the standard library and matplotlib.
Run it from anywhere: paths below are relative to this script.
"""

import csv
import os
from collections import defaultdict

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

BASE = os.path.dirname(os.path.abspath(__file__))

# one entry per curve: which file, which rows, which axes
CURVES = [
{curves}
]

X_LABELS = {{"snr_db": "SNR [dB]", "n_train": "training samples"}}
Y_SCALES = {{"SER": "log", "MSE": "linear"}}


def load_rows(relpath):
    with open(os.path.join(BASE, relpath), newline="") as fh:
        return list(csv.DictReader(fh))


def main():
    figures = defaultdict(list)
    for curve in CURVES:
        figures[(curve["experiment"], curve["metric"], curve["x"])].append(curve)
    for (experiment, metric, x_col), curves in sorted(figures.items()):
        fig, ax = plt.subplots(figsize=(6.4, 4.8))
        for curve in curves:
            rows = load_rows(curve["file"])
            points = {{}}
            for row in rows:
                if (row["experiment"] != curve["experiment"]
                        or row["method"] != curve["method"]
                        or row["metric"] != metric or row[x_col] == ""):
                    continue
                points.setdefault(float(row[x_col]), []).append(
                    float(row["value"]))
            if not points:
                continue
            xs = sorted(points)
            ys = [sum(points[x]) / len(points[x]) for x in xs]
            ax.plot(xs, ys, marker="o", label=curve["method"])
        ax.set_xlabel(X_LABELS.get(x_col, x_col))
        ax.set_ylabel(metric)
        ax.set_yscale(Y_SCALES.get(metric, "linear"))
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        ax.set_title(f"{{experiment}}: {{metric}} vs {{x_col}}")
        out = os.path.join(BASE, f"{{experiment}}_{{metric}}_{{x_col}}.png")
        fig.tight_layout()
        fig.savefig(out, dpi=150)
        plt.close(fig)
        print(f"wrote {{out}}")


if __name__ == "__main__":
    main()
'''

_METRIC_AXES = {"SER": "snr_db", "MSE": "n_train"}


def _curve_specs(path, relpath):
    records = read_metrics(path)
    seen = []
    for rec in records:
        x_col = _METRIC_AXES.get(rec.metric)
        if x_col is None or getattr(rec, x_col) is None:
            continue
        spec = {"file": relpath, "experiment": rec.experiment,
                "method": rec.method, "metric": rec.metric, "x": x_col}
        if spec not in seen:
            seen.append(spec)
    return seen


def emit_plots(metric_files, out_dir):
    """Write a self-contained plotting script; returns its path."""
    metric_files = [Path(p) for p in metric_files]
    if not metric_files:
        raise UsageError("no metric files to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    curves = []
    for path in sorted(metric_files):
        try:
            rel = os.path.relpath(path, out_dir)
        except ValueError as exc:
            raise UsageError(
                f"{path}: cannot reference metric file relative to "
                f"{out_dir}: {exc}") from None
        curves.extend(_curve_specs(path, rel.replace(os.sep, "/")))
    lines = ",\n".join(f"    {spec!r}" for spec in curves)
    script = _SCRIPT_TEMPLATE.format(curves=lines)
    script_path = out_dir / "plot_metrics.py"
    with open(script_path, "w") as fh:
        fh.write(script)
    return script_path
