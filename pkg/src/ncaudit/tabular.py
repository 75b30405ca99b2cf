"""Tabular datasets: schema, CSV ingestion, binning, one-hot encoding and
the three preprocessing recipes (COMPAS, Adult Census Income, German credit).

A :class:`PreparedDataset` wraps a pandas DataFrame together with the schema
that says which columns are protected and which one is the outcome. One-hot
encoded columns remember their source column so that rule files can still be
written against the original categorical values.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

KINDS = ("categorical", "numeric", "binary")


class SchemaError(ValueError):
    """Schema is malformed or a data file does not match it."""


class ParseError(ValueError):
    """A cell could not be parsed; carries the zero-based data row index."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class BinningError(ValueError):
    """A value falls outside every bin."""

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


class ColumnTypeError(TypeError):
    pass


@dataclass(frozen=True)
class Schema:
    columns: tuple[tuple[str, str], ...]
    protected: tuple[tuple[str, object], ...] = ()
    outcome: tuple[str, object] | None = None
    # source columns that were replaced by one-hot dummies
    encoded: tuple[str, ...] = ()

    def __post_init__(self):
        names = [c for c, _ in self.columns] + list(self.encoded)
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"duplicate column names: {dupes}")
        for name, kind in self.columns:
            if kind not in KINDS:
                raise SchemaError(f"column {name!r}: unknown kind {kind!r}")
        for col, _ in self.protected:
            if col not in names:
                raise SchemaError(f"protected column {col!r} is not declared")
        if self.outcome is not None and self.outcome[0] not in names:
            raise SchemaError(f"outcome column {self.outcome[0]!r} is not declared")

    @property
    def names(self) -> list[str]:
        return [c for c, _ in self.columns]

    def kind(self, column: str) -> str:
        for name, kind in self.columns:
            if name == column:
                return kind
        if column in self.encoded:
            return "categorical"
        raise KeyError(column)

    def privileged(self, column: str):
        for col, value in self.protected:
            if col == column:
                return value
        raise KeyError(f"{column!r} is not a protected attribute")

    @property
    def outcome_column(self) -> str:
        if self.outcome is None:
            raise SchemaError("schema declares no outcome column")
        return self.outcome[0]

    @property
    def favorable(self):
        if self.outcome is None:
            raise SchemaError("schema declares no outcome column")
        return self.outcome[1]

    def with_columns(self, columns: Iterable[tuple[str, str]]) -> "Schema":
        return replace(self, columns=tuple(columns))


def parse_schema(text: str) -> Schema:
    """Parse the declarative schema format.

    One directive per line, ``#`` starts a comment::

        column age numeric
        column sex categorical
        protected sex = Female
        outcome label = 1
    """
    columns: list[tuple[str, str]] = []
    protected: list[tuple[str, object]] = []
    outcome = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        rest = rest.strip()
        if head == "column":
            parts = rest.split()
            if len(parts) != 2:
                raise SchemaError(f"line {lineno}: expected 'column <name> <kind>'")
            columns.append((parts[0], parts[1]))
        elif head in ("protected", "outcome"):
            name, eq, value = rest.partition("=")
            if not eq or not name.strip():
                raise SchemaError(f"line {lineno}: expected '{head} <column> = <value>'")
            entry = (name.strip(), _coerce(value.strip()))
            if head == "protected":
                protected.append(entry)
            else:
                outcome = entry
        else:
            raise SchemaError(f"line {lineno}: unknown directive {head!r}")
    return Schema(tuple(columns), tuple(protected), outcome)


def _coerce(token: str):
    """Numeric-looking tokens become int/float, everything else stays a string."""
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


@dataclass(frozen=True)
class BinSpec:
    """Right-closed intervals ``(edges[i], edges[i+1]]``; edges may be infinite.

    ``target`` renames the binned column; the source column is dropped unless
    ``keep_source`` is set.
    """

    source: str
    edges: tuple[float, ...]
    labels: tuple[str, ...]
    target: str | None = None
    keep_source: bool = False

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(edges) < 2:
            raise ValueError("need at least two edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("bin edges must be strictly increasing")
        if len(self.labels) != len(edges) - 1:
            raise ValueError(f"{len(edges) - 1} intervals but {len(self.labels)} labels")

    def label_for(self, value: float) -> str | None:
        # the leftmost edge is closed when it is -inf so every finite value fits
        for lo, hi, label in zip(self.edges, self.edges[1:], self.labels):
            if (lo < value or lo == -math.inf) and value <= hi:
                return label
        return None


@dataclass(frozen=True)
class PreparedDataset:
    schema: Schema
    table: pd.DataFrame
    encoding_map: dict = field(default_factory=dict)
    feature_columns: tuple[str, ...] | None = None
    name: str = "custom"

    @property
    def row_count(self) -> int:
        return len(self.table)

    def __len__(self) -> int:
        return len(self.table)

    @property
    def columns(self) -> list[str]:
        """Logical column names: encoded sources are listed under their original name."""
        names = []
        for col in self.table.columns:
            src = self._source_of(col)
            name = src if src is not None else col
            if name not in names:
                names.append(name)
        return names

    def _source_of(self, column: str) -> str | None:
        for src, dummies in self.encoding_map.items():
            if any(d == column for _, d in dummies):
                return src
        return None

    def has_column(self, name: str) -> bool:
        return name in self.table.columns or name in self.encoding_map

    def kind(self, name: str) -> str:
        return self.schema.kind(name)

    def values(self, name: str) -> np.ndarray:
        """Column values, decoding one-hot dummies back to their category."""
        if name in self.encoding_map:
            dummies = self.encoding_map[name]
            out = np.empty(len(self.table), dtype=object)
            for value, col in dummies:
                out[self.table[col].to_numpy() == 1] = value
            return out
        if name not in self.table.columns:
            raise KeyError(f"no column {name!r}")
        return self.table[name].to_numpy()

    def labels(self) -> np.ndarray:
        return self.values(self.schema.outcome_column)

    def feature_matrix(self, columns: Sequence[str] | None = None) -> np.ndarray:
        if columns is None:
            columns = self.feature_columns
        if columns is None:
            skip = {self.schema.outcome_column} if self.schema.outcome else set()
            columns = [c for c in self.table.columns
                       if c not in skip and self.schema.kind(c) != "categorical"]
        return self.table[list(columns)].to_numpy(dtype=float)

    def to_csv(self, path=None) -> str:
        """Serialize with a fixed column order and number formatting."""
        buf = io.StringIO()
        self.table.to_csv(buf, index=False, lineterminator="\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def load_csv(path, schema: Schema, *, delimiter: str = ",", name: str = "custom") -> PreparedDataset:
    """Read a CSV with a header row into a raw (unencoded) dataset.

    Only the columns declared in ``schema`` are kept. String cells are trimmed.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        index = {}
        for i, h in enumerate(header):
            index.setdefault(h, i)
        missing = [c for c in schema.names if c not in index]
        if missing:
            raise SchemaError(f"{path}: missing declared column(s): {', '.join(missing)}")
        data: dict[str, list] = {c: [] for c in schema.names}
        for row_idx, row in enumerate(reader):
            if not row:
                continue
            for col, kind in schema.columns:
                cell = row[index[col]].strip() if index[col] < len(row) else ""
                data[col].append(_parse_cell(cell, kind, col, row_idx))
    table = pd.DataFrame(data, columns=schema.names)
    return PreparedDataset(schema, table, name=name)


def _parse_cell(cell: str, kind: str, column: str, row: int):
    if kind == "categorical":
        return cell
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"row {row}: column {column!r}: cannot parse {cell!r} as a number", row) from None
    if kind == "binary" and value not in (0.0, 1.0):
        raise ParseError(f"row {row}: column {column!r}: binary value must be 0 or 1, got {cell!r}", row)
    return int(value) if value.is_integer() else value


def from_frame(frame: pd.DataFrame, schema: Schema, name: str = "custom") -> PreparedDataset:
    missing = [c for c in schema.names if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing declared column(s): {', '.join(missing)}")
    return PreparedDataset(schema, frame[schema.names].reset_index(drop=True), name=name)


def bin_numeric(ds: PreparedDataset, spec: BinSpec) -> PreparedDataset:
    if spec.source not in ds.table.columns:
        raise SchemaError(f"no column {spec.source!r}")
    if ds.schema.kind(spec.source) == "categorical":
        raise ColumnTypeError(f"column {spec.source!r} is not numeric")
    labels = []
    for row, value in enumerate(ds.table[spec.source].tolist()):
        label = spec.label_for(float(value))
        if label is None:
            raise BinningError(f"row {row}: value {value!r} of {spec.source!r} is outside all bins", row)
        labels.append(label)

    target = spec.target or spec.source
    table = ds.table.copy()
    cols = list(table.columns)
    pos = cols.index(spec.source)
    binned = pd.Series(labels, index=table.index, dtype=object)
    schema_cols = list(ds.schema.columns)
    spos = [c for c, _ in schema_cols].index(spec.source)
    if spec.keep_source and target != spec.source:
        table.insert(pos + 1, target, binned)
        schema_cols.insert(spos + 1, (target, "categorical"))
    else:
        table = table.drop(columns=[spec.source])
        table.insert(pos, target, binned)
        schema_cols[spos] = (target, "categorical")
    schema = ds.schema.with_columns(schema_cols)
    return replace(ds, schema=schema, table=table)


def one_hot(ds: PreparedDataset, columns: Sequence[str]) -> PreparedDataset:
    """Replace each categorical column by ``<col>=<value>`` dummies in first-seen order."""
    table = ds.table.copy()
    schema_cols = list(ds.schema.columns)
    encoding = dict(ds.encoding_map)
    for col in columns:
        if col not in table.columns:
            raise SchemaError(f"no column {col!r}")
        if ds.schema.kind(col) != "categorical":
            raise ColumnTypeError(f"column {col!r} is not categorical")
        values = list(dict.fromkeys(table[col].tolist()))
        dummies = [(v, f"{col}={v}") for v in values]
        pos = list(table.columns).index(col)
        source = table.pop(col).to_numpy()
        for offset, (value, dname) in enumerate(dummies):
            table.insert(pos + offset, dname, (source == value).astype(np.int64))
        spos = [c for c, _ in schema_cols].index(col)
        schema_cols[spos:spos + 1] = [(d, "binary") for _, d in dummies]
        encoding[col] = dummies
    # protected/outcome entries keep pointing at the logical (source) column
    schema = replace(ds.schema, columns=tuple(schema_cols),
                     encoded=ds.schema.encoded + tuple(c for c in columns if c not in ds.schema.encoded))
    return replace(ds, schema=schema, table=table, encoding_map=encoding)


# --------------------------------------------------------------------------
# recipes

COMPAS_RACES = ("African-American", "Caucasian")
COMPAS_AGE_BINS = BinSpec("age", (-math.inf, 24, 45, math.inf), ("<25", "25-45", ">45"), target="age_cat")
COMPAS_PRIORS_BINS = BinSpec(
    "priors_count",
    (-math.inf, 0, 3, 7, 15, 24, math.inf),
    ("0", "1-3", "4-7", "8-15", "16-24", ">24"),
    target="priors_group",
    keep_source=True,
)
COMPAS_REQUIRED = (
    "sex", "age", "race", "priors_count", "c_charge_degree", "days_b_screening_arrest",
    "is_recid", "score_text", "two_year_recid", "decile_score",
)

ADULT_COLUMNS = (
    "age", "workclass", "fnlwgt", "education", "education-num", "marital-status",
    "occupation", "relationship", "race", "sex", "capital-gain", "capital-loss",
    "hours-per-week", "native-country", "income",
)
ADULT_AGE_BINS = BinSpec(
    "age",
    (-math.inf, 10, 20, 30, 40, 50, 60, 70, 80, 90, math.inf),
    ("0-10", "11-20", "21-30", "31-40", "41-50", "51-60", "61-70", "71-80", "81-90", ">90"),
)

GERMAN_AGE_BINS = BinSpec("age", (-math.inf, 25, math.inf), ("young", "old"))

# German credit attribute codes (UCI documentation). Savings and employment are
# intervals; each is mapped to a representative number (interval midpoint, or
# the lower bound for open intervals) so that rules can compare them numerically.
GERMAN_SAVINGS_DM = {"A61": 50.0, "A62": 300.0, "A63": 750.0, "A64": 1000.0, "A65": 0.0}
GERMAN_EMPLOYMENT_YEARS = {"A71": 0.0, "A72": 0.5, "A73": 2.5, "A74": 5.5, "A75": 7.0}
GERMAN_CREDIT_HISTORY = {"A30": "Paid", "A31": "Paid", "A32": "Paid", "A33": "Delay", "A34": "Critical"}
GERMAN_SEX = {"A91": "male", "A92": "female", "A93": "male", "A94": "male", "A95": "female"}


def read_compas_raw(raw_path) -> pd.DataFrame:
    """Raw ProPublica ``compas-scores-two-years.csv``; 7214 rows for the public file.

    The file repeats the ``decile_score`` header; the first occurrence wins.
    """
    raw = pd.read_csv(raw_path, dtype=str, keep_default_na=False)
    missing = [c for c in COMPAS_REQUIRED if c not in raw.columns]
    if missing:
        raise SchemaError(f"{raw_path}: not a ProPublica COMPAS file, missing {', '.join(missing)}")
    return raw.apply(lambda s: s.str.strip())


def recipe_compas(raw_path, output_mode: str = "binary") -> PreparedDataset:
    """ProPublica two-year recidivism data with the standard screening filter.

    Rows are kept when ``days_b_screening_arrest`` is within [-30, 30],
    ``is_recid != -1``, ``c_charge_degree != 'O'`` and ``score_text != 'N/A'``,
    and race is African-American or Caucasian (5278 rows for the public file).
    Protected attributes: sex (privileged Female) and race (privileged
    Caucasian). The outcome is ``two_year_recid`` (favorable 0) in binary mode
    and ``decile_score`` (favorable 1, lowest risk) in decile mode.

    Source: https://github.com/propublica/compas-analysis
    """
    if output_mode not in ("binary", "decile"):
        raise ValueError(f"output_mode must be 'binary' or 'decile', got {output_mode!r}")
    raw = read_compas_raw(raw_path)
    days = pd.to_numeric(raw["days_b_screening_arrest"], errors="coerce")
    keep = (
        days.between(-30, 30)
        & (raw["is_recid"] != "-1")
        & (raw["c_charge_degree"] != "O")
        & (raw["score_text"] != "N/A")
        & raw["race"].isin(COMPAS_RACES)
    )
    df = raw.loc[keep.to_numpy()].reset_index(drop=True)
    outcome = "two_year_recid" if output_mode == "binary" else "decile_score"
    frame = pd.DataFrame({
        "sex": df["sex"],
        "race": df["race"],
        "age": df["age"].astype(int),
        "priors_count": df["priors_count"].astype(int),
        "c_charge_degree": df["c_charge_degree"],
        outcome: df[outcome].astype(int),
    })
    schema = Schema(
        (("sex", "categorical"), ("race", "categorical"), ("age", "numeric"),
         ("priors_count", "numeric"), ("c_charge_degree", "categorical"),
         (outcome, "binary" if output_mode == "binary" else "numeric")),
        protected=(("sex", "Female"), ("race", "Caucasian")),
        outcome=(outcome, 0 if output_mode == "binary" else 1),
    )
    ds = PreparedDataset(schema, frame, name="compas" if output_mode == "binary" else "compas-decile")
    ds = bin_numeric(ds, COMPAS_AGE_BINS)
    ds = bin_numeric(ds, COMPAS_PRIORS_BINS)
    ds = one_hot(ds, ["sex", "race", "age_cat", "priors_group", "c_charge_degree"])
    # similarity features: raw prior count, not its grouped dummies
    features = tuple(
        c for c in ds.table.columns
        if c != outcome and not c.startswith("priors_group=")
    )
    return replace(ds, feature_columns=features)


def compas_row_count_raw(raw_path) -> int:
    return len(read_compas_raw(raw_path))


def recipe_adult(raw_path) -> PreparedDataset:
    """UCI Adult ``adult.data`` (no header), restricted to age, sex, race, education.

    Age is grouped into decades, race is 1 for White and 0 otherwise, income
    is 1 for ``>50K``. Protected: sex (privileged Male) and race (privileged 1).
    Cells equal to ``?`` are kept as their own category.

    Source: https://archive.ics.uci.edu/dataset/2/adult
    """
    raw = pd.read_csv(raw_path, header=None, names=list(ADULT_COLUMNS), dtype=str,
                      keep_default_na=False, skipinitialspace=True)
    raw = raw.apply(lambda s: s.str.strip())
    raw = raw[raw["age"] != ""].reset_index(drop=True)
    try:
        age = raw["age"].astype(int)
    except ValueError as exc:
        raise SchemaError(f"{raw_path}: not an Adult data file ({exc})") from None
    income = raw["income"].str.rstrip(".")
    if not set(income) <= {">50K", "<=50K"}:
        raise SchemaError(f"{raw_path}: unexpected income labels {sorted(set(income))[:5]}")
    frame = pd.DataFrame({
        "age": age,
        "sex": raw["sex"],
        "race": (raw["race"] == "White").astype(int),
        "education": raw["education"],
        "income": (income == ">50K").astype(int),
    })
    schema = Schema(
        (("age", "numeric"), ("sex", "categorical"), ("race", "binary"),
         ("education", "categorical"), ("income", "binary")),
        protected=(("sex", "Male"), ("race", 1)),
        outcome=("income", 1),
    )
    ds = PreparedDataset(schema, frame, name="adult")
    ds = bin_numeric(ds, ADULT_AGE_BINS)
    ds = one_hot(ds, ["age", "sex", "education"])
    return ds


def recipe_german(raw_path) -> PreparedDataset:
    """UCI Statlog German credit ``german.data`` (space separated, coded values).

    Kept: credit history, savings, employment, personal status, age, plus the
    derived ``sex`` column. Savings (DM) and employment (years) become numbers
    via the tables above; credit history is grouped into Paid/Delay/Critical.
    Age is young (< 26) or old. Protected: sex (privileged male), age
    (privileged old). Outcome ``credit`` is 1 (good, favorable) or 2 (bad).

    Source: https://archive.ics.uci.edu/dataset/144
    """
    raw = pd.read_csv(raw_path, sep=r"\s+", header=None, dtype=str, engine="python")
    if raw.shape[1] != 21:
        raise SchemaError(f"{raw_path}: expected 21 columns, found {raw.shape[1]}")
    try:
        frame = pd.DataFrame({
            "credit_history": raw[2].map(GERMAN_CREDIT_HISTORY),
            "savings": raw[5].map(GERMAN_SAVINGS_DM),
            "employment": raw[6].map(GERMAN_EMPLOYMENT_YEARS),
            "personal_status": raw[8],
            "sex": raw[8].map(GERMAN_SEX),
            "age": raw[12].astype(int),
            "credit": raw[20].astype(int),
        })
    except ValueError as exc:
        raise SchemaError(f"{raw_path}: not a German credit file ({exc})") from None
    if frame.isna().any().any():
        bad = frame.columns[frame.isna().any()].tolist()
        raise SchemaError(f"{raw_path}: unknown attribute codes in {bad}")
    schema = Schema(
        (("credit_history", "categorical"), ("savings", "numeric"), ("employment", "numeric"),
         ("personal_status", "categorical"), ("sex", "categorical"), ("age", "numeric"),
         ("credit", "numeric")),
        protected=(("sex", "male"), ("age", "old")),
        outcome=("credit", 1),
    )
    ds = PreparedDataset(schema, frame, name="german")
    ds = bin_numeric(ds, GERMAN_AGE_BINS)
    ds = one_hot(ds, ["credit_history", "personal_status", "sex", "age"])
    return ds


RECIPES = {
    "compas": lambda path, mode="binary": recipe_compas(path, mode),
    "adult": lambda path, mode=None: recipe_adult(path),
    "german": lambda path, mode=None: recipe_german(path),
}

DEFAULT_FILES = {
    "compas": "compas-scores-two-years.csv",
    "adult": "adult.data",
    "german": "german.data",
}
