"""``ncaudit`` command line: auditor and system tables, IF scans, thresholds, synth.

Exit codes: 0 success, 1 computation error (or synth violations), 2 configuration
or IO error.
"""
from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .auditor import RuleError, RuleSyntaxError, apply_ruleset, load_ruleset, shipped_ruleset
from .bounds import InfeasibleThresholdError, epsilon_threshold_group, epsilon_threshold_individual
from .metrics import NOTIONS, pairwise_if_scan
from .reports import FORMATS, Report, auditor_table, config_hash, scan_rows, system_table
from .synth import campaign_json, run_campaign
from .tabular import DEFAULT_FILES, RECIPES, ParseError, SchemaError, load_csv, parse_schema

DATA_ENV = "NCAUDIT_DATA"
DATASETS = ("compas", "adult", "german", "custom", "all")
DEFAULT_KAPPAS = tuple(k / 2 for k in range(1, 19)) + (9.2,)
DEFAULT_DELTAS = tuple(float(d) for d in range(10))

DEFAULTS = {
    "dataset": "compas",
    "data": None,
    "rules": None,
    "schema": None,
    "epsilon": 1.0,
    "mode": None,
    "format": "csv",
    "out": None,
    "seed": 0,
    "kappa_grid": None,
    "delta_grid": None,
    "pair_cap": 10_000,
    "notions": ",".join(NOTIONS),
    "instances": 1000,
    "delta": None,
    "delta_prime": None,
    "M": None,
    "observed_epsilon": None,
}


class ConfigError(Exception):
    """Invalid configuration or unreadable input; maps to exit code 2."""


def read_config(path) -> dict:
    """``key = value`` lines; keys mirror flag names (dashes or underscores)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip().lstrip("-").replace("-", "_")
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def _float(name, value):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None


def _exact(name, value) -> Fraction:
    try:
        return Fraction(str(value).strip())
    except (TypeError, ValueError, ZeroDivisionError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None


def _int(name, value):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None


def _grid(name, value, default):
    if value is None:
        return list(default)
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    items = [v for v in str(value).split(",") if v.strip()]
    if not items:
        raise ConfigError(f"{name} must be a nonempty comma list")
    return [_float(name, v) for v in items]


def resolve(args: argparse.Namespace) -> dict:
    """Merge builtin defaults, the config file and explicit flags (in that order)."""
    cfg = dict(DEFAULTS)
    if getattr(args, "config", None):
        cfg.update(read_config(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["command"] = args.command
    cfg["epsilon"] = _float("epsilon", cfg["epsilon"])
    if cfg["epsilon"] <= 0:
        raise ConfigError("epsilon must be positive")
    cfg["seed"] = _int("seed", cfg["seed"])
    cfg["pair_cap"] = _int("pair-cap", cfg["pair_cap"])
    cfg["instances"] = _int("instances", cfg["instances"])
    if cfg["instances"] < 0:
        raise ConfigError("instances must be nonnegative")
    if cfg["dataset"] not in DATASETS:
        raise ConfigError(f"unknown dataset {cfg['dataset']!r}; choose from {', '.join(DATASETS)}")
    formats = [f.strip() for f in str(cfg["format"]).split(",") if f.strip()]
    bad = [f for f in formats if f not in FORMATS]
    if bad or not formats:
        raise ConfigError(f"unknown format {','.join(bad) or '(empty)'}; choose from {', '.join(FORMATS)}")
    cfg["format"] = ",".join(formats)
    notions = [n.strip() for n in str(cfg["notions"]).split(",") if n.strip()]
    if not notions or any(n not in NOTIONS for n in notions):
        raise ConfigError(f"notions must be a comma list drawn from {', '.join(NOTIONS)}")
    cfg["notions"] = ",".join(notions)
    return cfg


def _data_path(cfg: dict, dataset: str) -> Path:
    base = Path(cfg["data"] or os.environ.get(DATA_ENV, "data/raw"))
    path = base / DEFAULT_FILES[dataset] if base.is_dir() else base
    if not path.exists():
        raise ConfigError(f"data file not found: {path}")
    return path


def _ruleset(cfg: dict, dataset: str, mode: str | None, columns=None):
    path = cfg["rules"]
    if path is None:
        key = "compas-decile" if dataset == "compas" and mode == "decile" else dataset
        if key == "custom":
            raise ConfigError("--rules is required for a custom dataset")
        return shipped_ruleset(key)
    if not Path(path).is_file():
        raise ConfigError(f"rule file not found: {path}")
    try:
        return load_ruleset(path, columns)
    except RuleSyntaxError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _load(cfg: dict, dataset: str, mode: str | None):
    if dataset == "custom":
        if not cfg["schema"] or not cfg["data"]:
            raise ConfigError("a custom dataset needs --schema and --data")
        try:
            schema = parse_schema(Path(cfg["schema"]).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read schema {cfg['schema']}: {exc.strerror}") from None
        if not Path(cfg["data"]).is_file():
            raise ConfigError(f"data file not found: {cfg['data']}")
        ds = load_csv(cfg["data"], schema, name=Path(cfg["data"]).stem)
    else:
        path = _data_path(cfg, dataset)
        ds = RECIPES[dataset](path, mode or "binary") if dataset == "compas" else RECIPES[dataset](path)
    return ds, _ruleset(cfg, dataset, mode, ds.columns)


def _datasets(cfg: dict) -> list[str]:
    return ["compas", "adult", "german"] if cfg["dataset"] == "all" else [cfg["dataset"]]


def _meta(cfg: dict, **extra) -> dict:
    hashed = {k: v for k, v in cfg.items() if k not in ("out", "format")}
    return {"command": cfg["command"], "config_hash": config_hash(hashed), "seed": cfg["seed"],
            "version": __version__, **extra}


def _emit(report: Report, cfg: dict, stem: str) -> None:
    formats = cfg["format"].split(",")
    if cfg["out"] is None:
        for fmt in formats:
            sys.stdout.write(report.render(fmt))
        return
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        for fmt in formats:
            target = out / f"{stem}.{fmt}"
            target.write_text(report.render(fmt), encoding="utf-8")
            print(f"wrote {target}")
    except OSError as exc:
        raise ConfigError(f"cannot write to {out}: {exc.strerror}") from None


def cmd_audit_auditor(cfg: dict) -> int:
    rows = []
    for name in _datasets(cfg):
        ds, rs = _load(cfg, name, cfg["mode"])
        rows += auditor_table(ds, rs, notions=cfg["notions"].split(","))
    _emit(Report("auditor", rows, _meta(cfg)), cfg, "auditor")
    return 0


def cmd_audit_system(cfg: dict) -> int:
    rows = []
    for name in _datasets(cfg):
        ds, rs = _load(cfg, name, cfg["mode"])
        rows += system_table(ds, rs, cfg["epsilon"], notions=cfg["notions"].split(","))
    _emit(Report("system", rows, _meta(cfg, epsilon=cfg["epsilon"])), cfg, "system")
    return 0


def cmd_if_scan(cfg: dict) -> int:
    if cfg["dataset"] == "all":
        raise ConfigError("if-scan needs a single dataset")
    mode = cfg["mode"] or ("decile" if cfg["dataset"] == "compas" else None)
    ds, rs = _load(cfg, cfg["dataset"], mode)
    outputs = apply_ruleset(rs, ds)
    kappas = _grid("kappa-grid", cfg["kappa_grid"], DEFAULT_KAPPAS)
    deltas = _grid("delta-grid", cfg["delta_grid"], DEFAULT_DELTAS)
    result = pairwise_if_scan(ds, outputs, kappas, deltas, pair_cap=cfg["pair_cap"], seed=cfg["seed"])
    meta = _meta(cfg, max_input_distance=result.max_input_distance, n_rows=result.n_rows,
                 n_pairs=result.n_pairs, sampled=result.sampled)
    _emit(Report("scan", scan_rows(result), meta), cfg, "if_scan")
    satisfied = int(result.satisfied.sum())
    summary = (f"max D = {result.max_input_distance:.4f}; rows = {result.n_rows}; "
               f"cells satisfied = {satisfied}/{result.satisfied.size}")
    print(summary, file=sys.stderr if cfg["out"] is None else sys.stdout)
    return 0


def cmd_thresholds(cfg: dict) -> int:
    if cfg["delta"] is None or cfg["delta_prime"] is None:
        raise ConfigError("thresholds needs --delta and --delta-prime")
    delta, delta_prime = _exact("delta", cfg["delta"]), _exact("delta-prime", cfg["delta_prime"])
    rows = []
    try:
        rows.append({"notion": "individual", "threshold": epsilon_threshold_individual(delta, delta_prime)})
        if cfg["M"] is not None:
            M = _exact("M", cfg["M"])
            rows.append({"notion": "group", "threshold": epsilon_threshold_group(delta, delta_prime, M)})
    except InfeasibleThresholdError as exc:
        raise ConfigError(f"no admissible epsilon: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["observed_epsilon"] is not None:
        observed = _exact("observed-epsilon", cfg["observed_epsilon"])
        for row in rows:
            row["observed_epsilon"] = float(observed)
            row["verdict"] = "accept" if observed < row["threshold"] else "reject"
    for row in rows:
        row["threshold"] = float(row["threshold"])
    _emit(Report("thresholds", rows, _meta(cfg)), cfg, "thresholds")
    return 0


def cmd_synth(cfg: dict) -> int:
    report = run_campaign(cfg["seed"], cfg["instances"])
    report["config_hash"] = _meta(cfg)["config_hash"]
    text = campaign_json(report)
    if cfg["out"] is None:
        sys.stdout.write(text)
    else:
        out = Path(cfg["out"])
        try:
            out.mkdir(parents=True, exist_ok=True)
            (out / "synth.json").write_text(text, encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot write to {out}: {exc.strerror}") from None
        print(f"wrote {out / 'synth.json'}")
    return 1 if report["total_violations"] else 0


COMMANDS = {
    "audit-auditor": cmd_audit_auditor,
    "audit-system": cmd_audit_system,
    "if-scan": cmd_if_scan,
    "thresholds": cmd_thresholds,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; explicit flags take precedence")
    common.add_argument("--dataset", help=f"one of {', '.join(DATASETS)} (default compas)")
    common.add_argument("--data", help=f"data file or directory (default ${DATA_ENV} or data/raw)")
    common.add_argument("--rules", help="auditor rule file (default: the bundled rules)")
    common.add_argument("--schema", help="schema file for --dataset custom")
    common.add_argument("--epsilon", help="noncomparative gap epsilon (default 1.0)")
    common.add_argument("--mode", choices=("binary", "decile"), help="COMPAS outcome mode")
    common.add_argument("--notions", help="comma list of notions (default all three)")
    common.add_argument("--format", help="csv, json, md, or a comma list (default csv)")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--seed", help="seed for sampling and synthetic instances (default 0)")

    parser = argparse.ArgumentParser(prog="ncaudit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("audit-auditor", parents=[common], help="group metrics of the auditor relation")
    sub.add_parser("audit-system", parents=[common], help="transfer-bound table for the system")
    scan = sub.add_parser("if-scan", parents=[common], help="(kappa, delta) individual fairness scan")
    scan.add_argument("--kappa-grid", help="comma list of kappa values")
    scan.add_argument("--delta-grid", help="comma list of delta values")
    scan.add_argument("--pair-cap", help="subsample above this many rows (default 10000)")
    thr = sub.add_parser("thresholds", parents=[common], help="largest admissible epsilon")
    thr.add_argument("--delta")
    thr.add_argument("--delta-prime")
    thr.add_argument("--M", dest="M")
    thr.add_argument("--observed-epsilon")
    syn = sub.add_parser("synth", parents=[common], help="brute-force checks on synthetic instances")
    syn.add_argument("--instances", help="number of instances (default 1000)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"ncaudit: error: {exc}", file=sys.stderr)
        return 2
    except (SchemaError, ParseError) as exc:
        print(f"ncaudit: input error: {exc}", file=sys.stderr)
        return 2
    except (RuleError, ValueError, ArithmeticError) as exc:
        print(f"ncaudit: computation error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
