"""Auditor relations as first-match rule files, plus noncomparative profiling.

Rule file grammar (one statement per line, ``#`` comments)::

    output <name> in {<label>, <label>, ...}
    when <cond> and <cond> ... -> <label>
    ...
    otherwise -> <label>

    cond := <column> <op> <value>          op in =, <, >, <=, >= (also ≤, ≥)
          | <column> in [<lo>, <hi>]       inclusive numeric range
          | <column> in {<v>, <v>, ...}    set membership

Tokens are separated by whitespace. Values that parse as numbers are numbers,
everything else is a (whitespace-trimmed, case-sensitive) string.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping

import numpy as np

ORDER_OPS = {"<": np.less, ">": np.greater, "<=": np.less_equal, ">=": np.greater_equal}
OP_ALIASES = {"≤": "<=", "≥": ">=", "==": "="}


class RuleSyntaxError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class RuleError(ValueError):
    """Rule set cannot be applied to the given data."""


def _value(token: str):
    token = token.strip()
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        return token


def _fmt(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


@dataclass(frozen=True)
class Condition:
    column: str
    op: str  # "=", "<", ">", "<=", ">=", "in-set", "in-range"
    operand: object

    def __str__(self) -> str:
        if self.op == "in-range":
            lo, hi = self.operand
            return f"{self.column} in [{_fmt(lo)}, {_fmt(hi)}]"
        if self.op == "in-set":
            return f"{self.column} in {{{', '.join(_fmt(v) for v in self.operand)}}}"
        return f"{self.column} {self.op} {_fmt(self.operand)}"

    @property
    def numeric_only(self) -> bool:
        return self.op in ORDER_OPS or self.op == "in-range"

    def evaluate(self, values: np.ndarray, numeric: bool) -> np.ndarray:
        if self.numeric_only and not numeric:
            raise RuleError(f"condition '{self}' needs a numeric column, {self.column!r} is categorical")
        if self.op in ORDER_OPS:
            return ORDER_OPS[self.op](values.astype(float), float(self.operand))
        if self.op == "in-range":
            lo, hi = self.operand
            v = values.astype(float)
            return (v >= lo) & (v <= hi)
        targets = self.operand if self.op == "in-set" else (self.operand,)
        if numeric:
            nums = [float(t) for t in targets if not isinstance(t, str)]
            return np.isin(values.astype(float), nums)
        strs = {str(t) for t in targets}
        return np.array([str(v) in strs for v in values], dtype=bool)


@dataclass(frozen=True)
class Rule:
    conditions: tuple[Condition, ...]
    label: object

    def __str__(self) -> str:
        return f"when {' and '.join(map(str, self.conditions))} -> {_fmt(self.label)}"


@dataclass(frozen=True)
class RuleSet:
    output: str
    domain: tuple
    rules: tuple[Rule, ...]
    default: object

    @property
    def columns(self) -> list[str]:
        seen: list[str] = []
        for rule in self.rules:
            for cond in rule.conditions:
                if cond.column not in seen:
                    seen.append(cond.column)
        return seen

    def __str__(self) -> str:
        return format_ruleset(self)


_COND_SET = re.compile(r"^(\S+)\s+in\s+\{(.*)\}$")
_COND_RANGE = re.compile(r"^(\S+)\s+in\s+\[(.*)\]$")


def _parse_condition(text: str, lineno: int) -> Condition:
    text = text.strip()
    m = _COND_SET.match(text)
    if m:
        items = [_value(v) for v in m.group(2).split(",") if v.strip()]
        if not items:
            raise RuleSyntaxError(f"empty set in condition {text!r}", lineno)
        return Condition(m.group(1), "in-set", tuple(items))
    m = _COND_RANGE.match(text)
    if m:
        bounds = [_value(v) for v in m.group(2).split(",")]
        if len(bounds) != 2 or any(isinstance(b, str) for b in bounds):
            raise RuleSyntaxError(f"range needs two numeric bounds: {text!r}", lineno)
        if bounds[0] > bounds[1]:
            raise RuleSyntaxError(f"empty range {text!r}", lineno)
        return Condition(m.group(1), "in-range", (bounds[0], bounds[1]))
    parts = text.split(None, 2)
    if len(parts) != 3:
        raise RuleSyntaxError(f"cannot parse condition {text!r}", lineno)
    column, op, operand = parts
    op = OP_ALIASES.get(op, op)
    if op != "=" and op not in ORDER_OPS:
        raise RuleSyntaxError(f"unknown operator {op!r} in {text!r}", lineno)
    value = _value(operand)
    if op in ORDER_OPS and isinstance(value, str):
        raise RuleSyntaxError(f"operator {op!r} needs a numeric operand, got {operand!r}", lineno)
    return Condition(column, op, value)


def parse_ruleset(text: str, columns=None) -> RuleSet:
    """Parse a rule file. When ``columns`` is given, unknown columns are rejected."""
    output = None
    domain: tuple = ()
    rules: list[Rule] = []
    default = None
    default_seen = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if default_seen:
            raise RuleSyntaxError("statements after the 'otherwise' clause", lineno)
        if line.startswith("output "):
            m = re.match(r"^output\s+(\S+)\s+in\s+\{(.*)\}$", line)
            if not m:
                raise RuleSyntaxError("expected 'output <name> in {<labels>}'", lineno)
            if output is not None:
                raise RuleSyntaxError("duplicate output declaration", lineno)
            output = m.group(1)
            domain = tuple(_value(v) for v in m.group(2).split(",") if v.strip())
            if not domain:
                raise RuleSyntaxError("empty label domain", lineno)
            continue
        if output is None:
            raise RuleSyntaxError("the first statement must be the output declaration", lineno)
        body, arrow, label_text = line.rpartition("->")
        if not arrow:
            raise RuleSyntaxError(f"missing '->' in {line!r}", lineno)
        label = _value(label_text)
        if label not in domain:
            raise RuleSyntaxError(f"label {label_text.strip()!r} is not in the output domain", lineno)
        body = body.strip()
        if body == "otherwise":
            default, default_seen = label, True
            continue
        if not body.startswith("when "):
            raise RuleSyntaxError(f"expected 'when ...' or 'otherwise', got {body!r}", lineno)
        conds = tuple(_parse_condition(c, lineno) for c in re.split(r"\s+and\s+", body[5:].strip()))
        if columns is not None:
            for c in conds:
                if c.column not in columns:
                    raise RuleSyntaxError(f"unknown column {c.column!r}", lineno)
        rules.append(Rule(conds, label))
    if output is None:
        raise RuleSyntaxError("no output declaration")
    if not default_seen:
        raise RuleSyntaxError("missing default clause ('otherwise -> <label>')")
    return RuleSet(output, domain, tuple(rules), default)


def format_ruleset(rs: RuleSet) -> str:
    lines = [f"output {rs.output} in {{{', '.join(_fmt(v) for v in rs.domain)}}}"]
    lines += [str(r) for r in rs.rules]
    lines.append(f"otherwise -> {_fmt(rs.default)}")
    return "\n".join(lines) + "\n"


def load_ruleset(path, columns=None) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_ruleset(fh.read(), columns)


SHIPPED_RULES = {
    "compas": "f_compas_binary.rules",
    "compas-decile": "f_compas_decile.rules",
    "adult": "f_adult.rules",
    "german": "f_credit.rules",
}


def shipped_ruleset(name: str) -> RuleSet:
    """One of the bundled auditor relations: compas, compas-decile, adult, german."""
    text = resources.files("ncaudit.rules").joinpath(SHIPPED_RULES[name]).read_text(encoding="utf-8")
    return parse_ruleset(text)


def _column(data, name: str) -> tuple[np.ndarray, bool]:
    if hasattr(data, "values") and hasattr(data, "kind") and hasattr(data, "encoding_map"):
        values = np.asarray(data.values(name))
        return values, data.kind(name) != "categorical"
    values = np.asarray(data[name])
    return values, values.dtype.kind in "iufb"


def apply_ruleset(rs: RuleSet, data) -> np.ndarray:
    """Label every row with the first matching rule, or the default.

    ``data`` is a PreparedDataset or a mapping of column name to values.
    """
    if hasattr(data, "has_column"):
        missing = [c for c in rs.columns if not data.has_column(c)]
        n = data.row_count
    else:
        missing = [c for c in rs.columns if c not in data]
        n = len(next(iter(data.values()))) if isinstance(data, Mapping) and data else 0
    if missing:
        raise RuleError(f"rule set references missing column(s): {', '.join(missing)}")
    cache = {c: _column(data, c) for c in rs.columns}
    if cache:
        n = len(next(iter(cache.values()))[0])
    out = np.full(n, rs.default, dtype=object)
    undecided = np.ones(n, dtype=bool)
    for rule in rs.rules:
        hit = undecided.copy()
        for cond in rule.conditions:
            values, numeric = cache[cond.column]
            hit &= cond.evaluate(values, numeric)
        out[hit] = rule.label
        undecided &= ~hit
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in rs.domain):
        return out.astype(float if any(isinstance(v, float) for v in rs.domain) else np.int64)
    return out


# --------------------------------------------------------------------------
# noncomparative fairness


@dataclass(frozen=True)
class DistanceProfile:
    distances: np.ndarray
    max_distance: float
    epsilon: float
    nc_fair: bool

    @property
    def judgments(self) -> np.ndarray:
        return (self.distances >= self.epsilon).astype(np.int64)

    def summary(self) -> dict:
        return {"rows": int(self.distances.size), "max_distance": self.max_distance,
                "mean_distance": float(self.distances.mean()) if self.distances.size else 0.0,
                "epsilon": self.epsilon, "nc_fair": self.nc_fair,
                "flagged_rows": int(self.judgments.sum())}


def distance_profile(g_outputs, f_outputs, epsilon: float) -> DistanceProfile:
    """Pointwise ``|g(x) - f(x)|``; fair iff every distance is below epsilon."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    g = np.asarray(g_outputs, dtype=float)
    f = np.asarray(f_outputs, dtype=float)
    if g.shape != f.shape:
        raise ValueError(f"length mismatch: {g.shape} vs {f.shape}")
    d = np.abs(g - f)
    top = float(d.max()) if d.size else 0.0
    return DistanceProfile(d, top, epsilon, bool(top < epsilon))


def judgment(g_x, f_x, epsilon) -> int:
    """Binary auditor score: 1 when the outputs are at least epsilon apart."""
    return int(abs(g_x - f_x) >= epsilon)
