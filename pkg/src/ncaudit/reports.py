"""Assemble audit tables and serialize them deterministically (csv, json, md)."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .auditor import RuleSet, apply_ruleset
from .bounds import table2_row
from .metrics import NOTION_TITLES, NOTIONS, metric_report

FORMATS = ("csv", "json", "md")


@dataclass
class Report:
    """A flat table plus provenance; ``kind`` selects the markdown layout."""

    kind: str
    rows: list[dict]
    meta: dict = field(default_factory=dict)

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return to_csv(self.rows, self.meta)
        if fmt == "json":
            return to_json(self.rows, self.meta)
        if fmt == "md":
            return to_markdown(self)
        raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def auditor_table(ds, ruleset: RuleSet, protected=None, notions=NOTIONS) -> list[dict]:
    """Group metrics of the auditor relation scored against the dataset labels."""
    f = apply_ruleset(ruleset, ds)
    labels = ds.labels()
    fav = ds.schema.favorable
    rows = []
    for attr in protected or [p[0] for p in ds.schema.protected]:
        groups = ds.values(attr)
        priv = ds.schema.privileged(attr)
        for notion in notions:
            rep = metric_report(f, labels, groups, priv, fav, notion, protected=attr)
            rows.append({"dataset": ds.name, "protected": attr, "notion": notion,
                         "value": rep.value, "abs_value": abs(rep.value),
                         "support_unprivileged": rep.support_unprivileged,
                         "support_privileged": rep.support_privileged})
    return rows


def system_table(ds, ruleset: RuleSet, epsilon: float, system_outputs=None, protected=None,
                 notions=NOTIONS) -> list[dict]:
    """Transfer-bound rows for the system (recorded outcomes unless given)."""
    f = apply_ruleset(ruleset, ds)
    g = ds.labels() if system_outputs is None else np.asarray(system_outputs)
    rows = []
    for attr in protected or [p[0] for p in ds.schema.protected]:
        for notion in notions:
            rows.append(table2_row(ds, g, f, attr, notion, epsilon).as_dict())
    return rows


def scan_rows(result) -> list[dict]:
    rows = []
    for ki, k in enumerate(result.kappas):
        for di, d in enumerate(result.deltas):
            n = int(result.violations[ki, di])
            wi, wj = result.witnesses.get((ki, di), ("", ""))
            rows.append({"kappa": float(k), "delta": float(d), "violations": n,
                         "satisfied": n == 0, "witness_i": wi, "witness_j": wj})
    return rows


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return "" if value is None else str(value)


def to_csv(rows: list[dict], meta: dict) -> str:
    """Header plus rows; provenance (config hash, seed) is repeated per row."""
    prov = {k: meta[k] for k in ("config_hash", "seed") if k in meta}
    buf = io.StringIO()
    if not rows:
        return ""
    fields = list(rows[0]) + list(prov)
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(v) for k, v in {**row, **prov}.items()})
    return buf.getvalue()


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def to_json(rows: list[dict], meta: dict) -> str:
    return json.dumps({"meta": _jsonable(meta), "rows": _jsonable(rows)}, indent=2, sort_keys=True) + "\n"


def _num(value, places: int = 3) -> str:
    return f"{value:.{places}f}"


def _md_table(header: list[str], body: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in body]
    return lines


def to_markdown(report: Report) -> str:
    meta = report.meta
    lines = [f"<!-- config_hash={meta.get('config_hash', '')} seed={meta.get('seed', '')} -->", ""]
    if report.kind == "auditor":
        lines.append("Auditor relation scored against dataset labels (unprivileged minus privileged)")
        lines.append("")
        keyed = {(r["dataset"], r["protected"], r["notion"]): r["value"] for r in report.rows}
        pairs = list(dict.fromkeys((r["dataset"], r["protected"]) for r in report.rows))
        notions = list(dict.fromkeys(r["notion"] for r in report.rows))
        body = [[d, p] + [_num(keyed[d, p, n]) if (d, p, n) in keyed else "" for n in notions]
                for d, p in pairs]
        lines += _md_table(["Dataset", "Protected"] + [NOTION_TITLES[n] for n in notions], body)
    elif report.kind == "system":
        lines.append(f"System outputs against the auditor relation, epsilon = {meta.get('epsilon')}")
        lines.append("")
        body = [[r["dataset"], NOTION_TITLES[r["notion"]], r["protected"], _num(r["outcome_distance"]),
                 _num(r["upper_bound"]), _num(r["M_hat"]), _num(r["delta"]),
                 "yes" if r["satisfied"] else "no", "yes" if r["abs_satisfied"] else "no"]
                for r in report.rows]
        lines += _md_table(["Dataset", "Notion", "Protected", "Outcome distance", "Upper bound",
                            "M_hat", "delta", "Satisfied (signed)", "Satisfied (abs)"], body)
    elif report.kind == "scan":
        lines.append(f"Individual fairness scan, max input distance = {_num(meta.get('max_input_distance', 0.0), 4)}")
        lines.append("")
        kappas = list(dict.fromkeys(r["kappa"] for r in report.rows))
        deltas = list(dict.fromkeys(r["delta"] for r in report.rows))
        grid = {(r["kappa"], r["delta"]): r["violations"] for r in report.rows}
        body = [[f"{k:g}"] + [str(grid[k, d]) for d in deltas] for k in kappas]
        lines += _md_table(["kappa \\ delta"] + [f"{d:g}" for d in deltas], body)
    else:
        header = list(report.rows[0]) if report.rows else []
        lines += _md_table(header, [[_cell(r[h]) for h in header] for r in report.rows])
    return "\n".join(lines) + "\n"
