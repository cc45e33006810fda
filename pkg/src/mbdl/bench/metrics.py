"""Metric rows and their on-disk CSV form.

Column order is fixed and documented here; readers validate it:

    experiment,method,snr_db,n_train,q,seed,metric,value,trials,wilson_lo,wilson_hi

``metric`` is one of SER, MSE, objective, params, wall-ms.  SER rows carry
a 95% Wilson interval in the last two columns; other rows leave them
empty.  Unset grid axes are written as empty fields.  Floats use repr
(shortest round-trip), so a rerun with the same config and seeds emits a
byte-identical file.  Wall-clock rows are nondeterministic by nature and
therefore go to a separate ``timings.csv`` sidecar, never into
``metrics.csv``.
"""

import csv
import math
from dataclasses import dataclass

from ..errors import UsageError

METRIC_COLUMNS = ("experiment", "method", "snr_db", "n_train", "q", "seed",
                  "metric", "value", "trials", "wilson_lo", "wilson_hi")

METRIC_NAMES = ("SER", "MSE", "objective", "params", "wall-ms")

# two-sided 95% normal quantile used for the Wilson score interval
WILSON_Z = 1.959963984540054


def wilson_interval(errors, trials, z=WILSON_Z):
    """Wilson score interval for a binomial proportion errors/trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= errors <= trials:
        raise ValueError("errors must lie in [0, trials]")
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials
                         + z * z / (4.0 * trials * trials)) / denom
    # center - half equals p exactly at the extremes; keep the endpoints
    # free of subtraction residue so the bounds always bracket p
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class MetricRecord:
    """One measured value at one grid cell."""

    experiment: str
    method: str
    snr_db: object
    n_train: object
    q: object
    seed: int
    metric: str
    value: float
    trials: int = 1
    wilson_lo: object = None
    wilson_hi: object = None

    def __post_init__(self):
        if self.metric not in METRIC_NAMES:
            raise ValueError(
                f"unknown metric {self.metric!r}; expected one of "
                f"{', '.join(METRIC_NAMES)}")
        if self.trials < 1:
            raise ValueError("trial count must be >= 1")
        if self.metric == "SER" and not 0.0 <= self.value <= 1.0:
            raise ValueError(f"SER must lie in [0, 1], got {self.value}")


def ser_record(experiment, method, point, n_errors, n_trials):
    """SER row with its Wilson interval from raw Monte-Carlo counts."""
    lo, hi = wilson_interval(n_errors, n_trials)
    return MetricRecord(experiment, method, point.snr_db, point.n_train,
                        point.q, point.seed, "SER", n_errors / n_trials,
                        trials=n_trials, wilson_lo=lo, wilson_hi=hi)


def _format_cell(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean metric cells are not allowed")
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


class MetricWriter:
    """Serialized writer; every append hits the disk before returning, so a
    crash mid-run leaves all completed rows behind."""

    def __init__(self, path):
        self.path = path
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(METRIC_COLUMNS)
        self._fh.flush()

    def write(self, record):
        self._writer.writerow([
            record.experiment, record.method, _format_cell(record.snr_db),
            _format_cell(record.n_train), _format_cell(record.q),
            str(int(record.seed)), record.metric, _format_cell(record.value),
            str(int(record.trials)), _format_cell(record.wilson_lo),
            _format_cell(record.wilson_hi)])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
        return False


def _parse_cell(text, caster):
    return None if text == "" else caster(text)


def read_metrics(path):
    """Load one metrics CSV back into MetricRecord rows, validating layout."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise UsageError(f"cannot read metrics: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError(f"{path}: empty metrics file") from None
        missing = [c for c in METRIC_COLUMNS if c not in header]
        if missing:
            raise UsageError(
                f"{path}: missing metric column(s) {', '.join(missing)}")
        if tuple(header) != METRIC_COLUMNS:
            raise UsageError(
                f"{path}: metric columns must appear in the documented "
                f"order {','.join(METRIC_COLUMNS)}")
        records = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(METRIC_COLUMNS):
                raise UsageError(
                    f"{path}: row with {len(row)} fields, "
                    f"expected {len(METRIC_COLUMNS)}")
            records.append(MetricRecord(
                experiment=row[0], method=row[1],
                snr_db=_parse_cell(row[2], float),
                n_train=_parse_cell(row[3], int),
                q=_parse_cell(row[4], int),
                seed=int(row[5]), metric=row[6], value=float(row[7]),
                trials=int(row[8]),
                wilson_lo=_parse_cell(row[9], float),
                wilson_hi=_parse_cell(row[10], float)))
    return records
