"""CSV tables, compositional transforms and run configuration."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .estimator import Dataset
from .exceptions import (
    DataError,
    NegativeInputError,
    NonFiniteError,
    NonNumericCellError,
    NonPositiveError,
    ParseError,
    RaggedRowsError,
    UsageError,
)

__all__ = [
    "RawAbundanceTable",
    "RunConfig",
    "StudyData",
    "Table",
    "apply_overrides",
    "build_dataset",
    "clr_transform",
    "load_config",
    "load_csv",
    "load_study_data",
    "log_transform",
    "save_csv",
]

log = logging.getLogger(__name__)

MISSING = frozenset({"", "NA", "NaN", "nan", "N/A"})
ORIENTATIONS = ("samples-as-rows", "samples-as-columns")


@dataclass(frozen=True)
class Table:
    """Numeric table with named rows (samples) and columns; NaN marks a missing cell."""

    values: np.ndarray
    sample_ids: tuple
    columns: tuple
    index_name: str = "sample_id"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape != (len(self.sample_ids), len(self.columns)):
            raise DataError(
                f"values shape {v.shape} does not match {len(self.sample_ids)} samples "
                f"x {len(self.columns)} columns"
            )
        if np.any(np.isinf(v)):
            raise NonFiniteError("table contains an infinite value")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def shape(self):
        return self.values.shape

    def column_index(self, names):
        """Positions of ``names``; matching is exact and case-sensitive."""
        lookup = {c: i for i, c in enumerate(self.columns)}
        missing = [n for n in names if n not in lookup]
        if missing:
            raise DataError(f"unknown column name(s) {missing}")
        return [lookup[n] for n in names]

    def column(self, name):
        return self.values[:, self.column_index([name])[0]]

    def take_rows(self, ids):
        lookup = {s: i for i, s in enumerate(self.sample_ids)}
        idx = [lookup[s] for s in ids]
        return type(self)(self.values[idx], tuple(ids), self.columns, self.index_name)


@dataclass(frozen=True)
class RawAbundanceTable(Table):
    """Nonnegative abundances (counts or proportions), samples as rows."""

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0):
            i, k = np.argwhere(self.values < 0)[0]
            raise NegativeInputError(
                f"negative abundance at sample {self.sample_ids[i]!r}, feature {self.columns[k]!r}"
            )

    @property
    def feature_names(self):
        return self.columns


# ----------------------------------------------------------------- CSV


def _parse_cell(text, line, column):
    s = text.strip()
    if s in MISSING:
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise NonNumericCellError(f"non-numeric cell {text!r}", line, column) from None


def _looks_numeric(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, orientation="samples-as-rows", kind="outcomes"):
    """Read a comma-separated table with a header row and an id column.

    Parameters
    ----------
    path : str or Path
    orientation : {"samples-as-rows", "samples-as-columns"}
        With ``samples-as-columns`` the header holds sample ids and the first
        column holds feature names; the result is transposed.
    kind : {"outcomes", "abundance"}
        ``abundance`` returns a :class:`RawAbundanceTable` (nonnegative).

    Raises
    ------
    ParseError
        Missing or malformed header, duplicated names; carries ``line`` and
        ``column`` (1-based).
    RaggedRowsError, NonNumericCellError
    """
    if orientation not in ORIENTATIONS:
        raise UsageError(f"orientation must be one of {ORIENTATIONS}, got {orientation!r}")
    if kind not in ("outcomes", "abundance"):
        raise UsageError(f"kind must be 'outcomes' or 'abundance', got {kind!r}")
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or all(not c.strip() for c in header):
            raise ParseError("missing header row", line=1)
        header = [c.strip() for c in header]
        if len(header) < 2:
            raise ParseError("header needs an id column and at least one data column", line=1)
        if all(_looks_numeric(c) for c in header[1:]):
            raise ParseError("missing header row: first line is numeric", line=1)
        seen = {}
        for col, name in enumerate(header[1:], start=2):
            if not name:
                raise ParseError("empty column name", line=1, column=col)
            if name in seen:
                raise ParseError(f"duplicate column name {name!r}", line=1, column=col)
            seen[name] = col
        ids, rows = [], []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            line = reader.line_num
            if len(row) != len(header):
                raise RaggedRowsError(f"expected {len(header)} fields, found {len(row)}", line=line)
            rid = row[0].strip()
            if rid in ids:
                raise ParseError(f"duplicate row id {rid!r}", line=line, column=1)
            ids.append(rid)
            rows.append([_parse_cell(c, line, col) for col, c in enumerate(row[1:], start=2)])
    if not rows:
        raise ParseError("no data rows", line=2)
    values = np.array(rows, dtype=float)
    index_name, names = header[0] or "sample_id", header[1:]
    if orientation == "samples-as-columns":
        values, ids, names = values.T, names, ids
        index_name = "sample_id"
    cls = RawAbundanceTable if kind == "abundance" else Table
    return cls(values, tuple(ids), tuple(names), index_name)


def save_csv(table, path, orientation="samples-as-rows"):
    """Write ``table`` so that :func:`load_csv` reproduces it exactly.

    Floats use their shortest round-trip representation; missing cells are
    written as ``NA``.
    """
    values, ids, cols = table.values, table.sample_ids, table.columns
    corner = table.index_name
    if orientation == "samples-as-columns":
        values, ids, cols, corner = values.T, cols, ids, "feature"
    elif orientation != "samples-as-rows":
        raise UsageError(f"orientation must be one of {ORIENTATIONS}")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([corner, *cols])
        for rid, row in zip(ids, values):
            w.writerow([rid, *("NA" if math.isnan(v) else repr(float(v)) for v in row)])


# ---------------------------------------------------------- transforms


def clr_transform(table, pseudocount=0.5):
    """Centered log-ratio: ``log(v + c)`` minus its row mean.

    Rows containing a missing value come back as all-NaN.
    """
    v = np.asarray(getattr(table, "values", table), dtype=float)
    if v.ndim != 2:
        raise DataError("clr_transform expects a 2-d table")
    if pseudocount < 0:
        raise ValueError(f"pseudocount must be >= 0, got {pseudocount}")
    if np.any(v < 0):
        raise NegativeInputError("CLR needs nonnegative abundances")
    shifted = v + pseudocount
    if np.any(shifted == 0):
        raise NonPositiveError("zero abundance with pseudocount 0; use a positive pseudocount")
    logs = np.log(shifted)
    return logs - logs.mean(axis=1, keepdims=True)


def log_transform(outcomes, offset=0.0):
    """Natural log of ``outcomes + offset``; missing values stay missing."""
    v = np.asarray(getattr(outcomes, "values", outcomes), dtype=float)
    shifted = v + offset
    bad = np.isfinite(shifted) & (shifted <= 0)
    if np.any(bad):
        raise NonPositiveError(f"{int(bad.sum())} value(s) are <= 0 after adding offset {offset}")
    return np.log(shifted)


# -------------------------------------------------------------- config


@dataclass
class RunConfig:
    """Everything a CLI run needs. Relative paths resolve against the config file."""

    microbes: str | None = None
    metabolites: str | None = None
    orientation: str = "samples-as-rows"
    target: str | None = None
    candidates: object = "all"
    auxiliaries: object = "select"
    clr: bool = True
    pseudocount: float = 0.5
    log_outcomes: bool = False
    log_offset: float = 0.0
    r0: float = 0.5
    p0: float = 0.05
    k_folds: object = 5
    correlation: str = "pearson"
    seed: int = 0
    alpha: float = 0.05
    df: str = "n"
    variance_method: str = "natural"
    zeta: object = "cv"
    lambda_aux: object = "cv"
    lambda_w: object = "cv"
    cv_folds: int = 5
    fit_intercept: bool = True
    simulation: dict = field(default_factory=dict)
    n_jobs: int = 1

    @classmethod
    def from_dict(cls, d, base_dir=None):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise UsageError(f"unknown config key(s) {unknown}")
        cfg = cls(**d)
        if base_dir is not None:
            for key in ("microbes", "metabolites"):
                val = getattr(cfg, key)
                if val is not None and not Path(val).is_absolute():
                    setattr(cfg, key, str(Path(base_dir) / val))
        return cfg

    def to_dict(self):
        return asdict(self)


def apply_overrides(d, overrides):
    """Apply ``key=value`` strings; dotted keys reach nested dicts, values parse as JSON when possible."""
    out = json.loads(json.dumps(d))
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise UsageError(f"cannot set {key!r}: {part!r} is not a section")
        node[parts[-1]] = value
    return out


def load_config(path=None, overrides=()):
    d, base = {}, None
    if path is not None:
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise UsageError("config must be a JSON object")
        base = path.parent
    return RunConfig.from_dict(apply_overrides(d, overrides), base)


# ------------------------------------------------------------ datasets


@dataclass(frozen=True)
class StudyData:
    X: np.ndarray
    feature_names: tuple
    outcomes: Table


def load_study_data(cfg):
    """Read both tables, align samples by id and apply the configured transforms."""
    if not cfg.microbes or not cfg.metabolites:
        raise UsageError("config needs 'microbes' and 'metabolites' paths")
    mic = load_csv(cfg.microbes, cfg.orientation, kind="abundance")
    met = load_csv(cfg.metabolites, cfg.orientation)
    shared = [s for s in mic.sample_ids if s in set(met.sample_ids)]
    if not shared:
        raise DataError("the two tables share no sample ids")
    lost = len(mic.sample_ids) + len(met.sample_ids) - 2 * len(shared)
    if lost:
        log.info("%d sample(s) appear in only one table and are dropped", lost)
    mic, met = mic.take_rows(shared), met.take_rows(shared)
    X = clr_transform(mic, cfg.pseudocount) if cfg.clr else mic.values
    if cfg.log_outcomes:
        met = Table(log_transform(met, cfg.log_offset), met.sample_ids, met.columns, met.index_name)
    return StudyData(X, mic.feature_names, met)


def build_dataset(study, target, auxiliaries):
    """Dataset on the complete cases of ``X``, the target and the named auxiliaries."""
    names = [target, *auxiliaries]
    Y = study.outcomes.values[:, study.outcomes.column_index(names)]
    keep = np.all(np.isfinite(study.X), axis=1) & np.all(np.isfinite(Y), axis=1)
    dropped = int((~keep).sum())
    if dropped:
        log.info("complete-case filtering dropped %d of %d samples", dropped, keep.size)
    if keep.sum() < 3:
        raise DataError(f"only {int(keep.sum())} complete samples")
    return Dataset(
        study.X[keep],
        Y[keep, 0],
        Y[keep, 1:] if auxiliaries else None,
        feature_names=study.feature_names,
        outcome_names=tuple(names),
    )
