"""Experiment configuration files.

The format is a deliberately small INI dialect, parsed line by line with
the standard library:

* ``[section]`` headers group ``key = value`` lines.
* ``#`` or ``;`` start a comment (full line or inline); blanks are ignored.
* A value is one or more tokens separated by commas or whitespace.  Each
  token is read as an int if it looks like one, else a float, else kept
  as a string.  One token gives a scalar, several give a list.
* Keys are case-insensitive and stored lowercase.

Sections and keys:

* ``[experiment]`` -- ``kind`` (required; one of the names in ``KINDS``),
  ``id`` (default: the kind), ``output`` (output subdirectory, default:
  the id), ``seeds`` (list, default ``0``), ``workers`` (default 1).
* ``[grid]`` -- at least one of ``snr_db``, ``n_train``, ``q``.  The run
  covers the cartesian product of the listed axes and the seeds; axes
  that are absent stay unset for every point.
* ``[model]``, ``[train]``, ``[eval]`` -- free-form key/value sections
  interpreted by the experiment kind; unknown keys are rejected by the
  runner, not the parser.
"""

import configparser
import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

from ..errors import UsageError

KINDS = ("detnet", "deepsic", "dcea", "csgm", "pnp", "learned-fg", "kalman")

GRID_AXES = ("snr_db", "n_train", "q")


class GridPoint(NamedTuple):
    """One cell of the sweep; unset axes are None."""

    snr_db: object
    n_train: object
    q: object
    seed: int

    def token(self):
        """Stable string naming this cell, used to derive substream seeds."""
        return f"{self.snr_db}|{self.n_train}|{self.q}|{self.seed}"


def _parse_token(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_value(text):
    tokens = [t for t in text.replace(",", " ").split() if t]
    if not tokens:
        raise UsageError("empty value in config")
    values = [_parse_token(t) for t in tokens]
    return values[0] if len(values) == 1 else values


def _as_list(value):
    return value if isinstance(value, list) else [value]


@dataclass
class ExperimentConfig:
    kind: str
    exp_id: str
    output: str
    seeds: tuple
    workers: int
    grid: dict
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(
                f"unknown experiment kind {self.kind!r}; "
                f"choose one of {', '.join(KINDS)}")
        if not self.seeds:
            raise UsageError("at least one seed is required")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        axes = {k: _as_list(v) for k, v in self.grid.items()}
        unknown = set(axes) - set(GRID_AXES)
        if unknown:
            raise UsageError(
                f"unknown grid axes {sorted(unknown)}; "
                f"valid axes are {', '.join(GRID_AXES)}")
        if not axes or not any(axes.values()):
            raise UsageError(
                "the [grid] section must list at least one non-empty axis "
                f"({', '.join(GRID_AXES)})")
        self.grid = axes

    def points(self):
        """Grid cells in deterministic sweep order, seeds innermost."""
        axes = [self.grid.get(name, [None]) for name in GRID_AXES]
        return [GridPoint(snr, n_train, q, int(seed))
                for snr, n_train, q in itertools.product(*axes)
                for seed in self.seeds]


def parse_config(path):
    """Read an ExperimentConfig from a file in the format above."""
    parser = configparser.ConfigParser(
        inline_comment_prefixes=("#", ";"), interpolation=None, strict=True)
    try:
        with open(path) as fh:
            parser.read_file(fh, source=str(path))
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    except configparser.Error as exc:
        raise UsageError(f"malformed config {path}: {exc}") from None
    sections = {name: {key: _parse_value(raw)
                       for key, raw in parser.items(name)}
                for name in parser.sections()}
    exp = sections.get("experiment")
    if exp is None or "kind" not in exp:
        raise UsageError(
            f"{path}: missing [experiment] section with a 'kind' key")
    kind = str(exp["kind"])
    exp_id = str(exp.get("id", kind))
    output = str(exp.get("output", exp_id))
    seeds = tuple(int(s) for s in _as_list(exp.get("seeds", 0)))
    workers = int(exp.get("workers", 1))
    extra = set(exp) - {"kind", "id", "output", "seeds", "workers"}
    if extra:
        raise UsageError(
            f"{path}: unknown [experiment] keys {sorted(extra)}")
    if "grid" not in sections:
        raise UsageError(f"{path}: missing [grid] section")
    return ExperimentConfig(
        kind=kind, exp_id=exp_id, output=output, seeds=seeds,
        workers=workers, grid=sections["grid"],
        model=sections.get("model", {}),
        train=sections.get("train", {}),
        eval=sections.get("eval", {}))
