"""Text comparison report over collected metric files.

The report has three parts: method-vs-baseline ratios per grid cell,
parameter counts, and a threshold table that marks each relational claim
the suite is built around as PASS, FAIL, or "no data" depending on what
the loaded metrics contain.  Output is deterministic for given inputs.
"""

import math
from pathlib import Path

from ..errors import UsageError
from .metrics import read_metrics

# preferred baseline methods, first present candidate wins
DEFAULT_BASELINES = {
    "deepsic": ("sic", "sic-mismatched"),
    "sic": ("map",),
    "pgd": ("map",),
    "detnet": ("pgd",),
    "learned-fg": ("analytic-fg", "analytic-mismatched"),
    "csgm": ("lasso",),
    "pnp": ("admm-l1",),
    "hybrid": ("plain",),
    "blackbox": ("plain",),
    "dcea": ("dcea-alt",),
}

_COMPARED_METRICS = ("SER", "MSE")


def _normalize_baselines(baselines):
    table = {}
    for method, candidates in baselines.items():
        if isinstance(candidates, str):
            candidates = (candidates,)
        table[method] = tuple(candidates)
    return table


def _cell_key(rec):
    return (rec.experiment, rec.metric, rec.snr_db, rec.n_train, rec.q,
            rec.seed)


def _sort_key(key):
    experiment, metric, snr_db, n_train, q, seed = key
    return (experiment, metric,
            -math.inf if snr_db is None else snr_db,
            -1 if n_train is None else n_train,
            -1 if q is None else q, seed)


def _load_all(metric_files):
    metric_files = list(metric_files)
    if not metric_files:
        raise UsageError("no metric files to report on")
    records = []
    for path in sorted(Path(p) for p in metric_files):
        records.extend(read_metrics(path))
    return records


def _group_cells(records):
    cells = {}
    for rec in records:
        if rec.metric in _COMPARED_METRICS:
            cells.setdefault(_cell_key(rec), {})[rec.method] = rec.value
    return cells


def _fmt(value):
    if value is None:
        return "-"
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return f"{value:.6g}"


def _table(header, rows):
    widths = [max(len(str(r[i])) for r in [header] + rows)
              for i in range(len(header))]
    lines = ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip()
             for row in [header] + rows]
    return "\n".join(lines)


def _ratio_rows(cells, baselines):
    rows = []
    for key in sorted(cells, key=_sort_key):
        experiment, metric, snr_db, n_train, q, seed = key
        values = cells[key]
        for method in sorted(values):
            candidates = baselines.get(method)
            if not candidates:
                continue
            base = next((b for b in candidates if b in values), None)
            if base is None:
                raise UsageError(
                    f"no baseline for method {method!r} in experiment "
                    f"{experiment!r} at snr_db={snr_db} n_train={n_train} "
                    f"q={q} seed={seed}; expected one of "
                    f"{', '.join(candidates)}")
            value, base_value = values[method], values[base]
            if base_value > 0:
                ratio = value / base_value
            else:
                ratio = math.inf if value > 0 else 1.0
            rows.append([experiment, metric, _fmt(snr_db), _fmt(n_train),
                         _fmt(q), seed, method, base, _fmt(value),
                         _fmt(base_value), _fmt(ratio)])
    return rows


def _collect_pairs(cells, metric, method, baseline, snr_db=None,
                   n_train=None):
    pairs = []
    for key in sorted(cells, key=_sort_key):
        experiment, key_metric, key_snr, key_n, q, seed = key
        if key_metric != metric:
            continue
        if snr_db is not None and key_snr != snr_db:
            continue
        if n_train is not None and key_n != n_train:
            continue
        values = cells[key]
        if method in values and baseline in values:
            pairs.append((values[method], values[baseline]))
    return pairs


def _majority(checks):
    return sum(checks) * 2 > len(checks)


def _threshold_rows(cells, records):
    def ratio_check(name, method, baseline, limit, metric="SER",
                    snr_db=None, strict=False):
        pairs = _collect_pairs(cells, metric, method, baseline,
                               snr_db=snr_db)
        if not pairs:
            return [name, "no data", "-"]
        if strict:
            flags = [a < b for a, b in pairs]
        else:
            flags = [a <= limit * b for a, b in pairs]
        status = "PASS" if _majority(flags) else "FAIL"
        return [name, status, f"{sum(flags)}/{len(flags)} cells"]

    rows = [
        ratio_check("learned canceller SER within 1.5x of analytic at 10 dB",
                    "deepsic", "sic", 1.5, snr_db=10.0),
        ratio_check("analytic canceller SER within 2x of exhaustive at 10 dB",
                    "sic", "map", 2.0, snr_db=10.0),
        ratio_check("learned canceller beats mismatched analytic on counts "
                    "at 8 dB", "deepsic", "sic-mismatched", None,
                    snr_db=8.0, strict=True),
        ratio_check("learned factors beat mismatched analytic factors "
                    "at 8 dB", "learned-fg", "analytic-mismatched", None,
                    snr_db=8.0, strict=True),
        ratio_check("unfolded detector matches 100-step projected gradient "
                    "at 10 dB", "detnet", "pgd", 1.0, snr_db=10.0),
        ratio_check("generative prior beats l1 recovery when undersampled",
                    "csgm", "lasso", None, metric="MSE", strict=True),
        ratio_check("hybrid smoother beats plain smoother", "hybrid",
                    "plain", None, metric="MSE", strict=True),
    ]

    param_values = {}
    for rec in records:
        if rec.metric == "params":
            param_values.setdefault(rec.method, []).append(rec.value)
    if "dcea" in param_values and "dense-baseline" in param_values:
        flags = [d <= 0.10 * b
                 for d in param_values["dcea"]
                 for b in param_values["dense-baseline"]]
        rows.append(["convolutional coder uses <=10% of dense baseline "
                     "parameters", "PASS" if all(flags) else "FAIL",
                     f"{sum(flags)}/{len(flags)} pairs"])
    else:
        rows.append(["convolutional coder uses <=10% of dense baseline "
                     "parameters", "no data", "-"])

    small = _collect_pairs(cells, "MSE", "hybrid", "blackbox", n_train=500)
    if small:
        flags = [a < b for a, b in small]
        rows.append(["hybrid smoother beats size-matched regressor at "
                     "n_train=500", "PASS" if _majority(flags) else "FAIL",
                     f"{sum(flags)}/{len(flags)} cells"])
    else:
        rows.append(["hybrid smoother beats size-matched regressor at "
                     "n_train=500", "no data", "-"])
    return rows


def compare_report(metric_files, baselines=None):
    """Build the report text from one or more metrics.csv paths."""
    baselines = _normalize_baselines(
        DEFAULT_BASELINES if baselines is None else baselines)
    records = _load_all(metric_files)
    cells = _group_cells(records)
    parts = ["benchmark comparison report", "=" * 27, ""]

    parts.append("method-vs-baseline ratios")
    parts.append("-" * 25)
    ratio_rows = _ratio_rows(cells, baselines)
    if ratio_rows:
        parts.append(_table(
            ["experiment", "metric", "snr_db", "n_train", "q", "seed",
             "method", "baseline", "value", "base", "ratio"], ratio_rows))
    else:
        parts.append("(no comparable rows)")
    parts.append("")

    parts.append("parameter counts")
    parts.append("-" * 16)
    param_rows = sorted(
        [[r.experiment, r.method, str(int(r.value))]
         for r in records if r.metric == "params"])
    deduped = []
    for row in param_rows:
        if row not in deduped:
            deduped.append(row)
    if deduped:
        parts.append(_table(["experiment", "method", "params"], deduped))
    else:
        parts.append("(no parameter rows)")
    parts.append("")

    parts.append("relational claims")
    parts.append("-" * 17)
    parts.append(_table(["claim", "status", "evidence"],
                        _threshold_rows(cells, records)))
    parts.append("")
    return "\n".join(parts)


def write_report(metric_files, out_path, baselines=None):
    text = compare_report(metric_files, baselines)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w") as fh:
        fh.write(text)
    return out_path
