"""Comparative fairness metrics.

Group metrics follow the unprivileged-minus-privileged sign convention and are
computed from integer counts (``fractions.Fraction``) so that they are exact
before the final conversion to ``float``. Rows whose protected value differs
from the privileged value form the unprivileged group.

The individual-fairness part provides a Mahalanobis similarity over encoded
feature columns and an exhaustive pair scan over a (kappa, delta) grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

NOTIONS = ("statistical_parity", "equal_opportunity", "calibration")
NOTION_TITLES = {
    "statistical_parity": "Statistical Parity Difference",
    "equal_opportunity": "Equal Opportunity Difference",
    "calibration": "Calibration Difference",
}


class UndefinedRateError(ValueError):
    """A conditional rate was requested for an event with no support."""


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class Rate:
    hits: int
    support: int

    @property
    def defined(self) -> bool:
        return self.support > 0

    @property
    def value(self) -> Fraction:
        if not self.support:
            raise UndefinedRateError("rate undefined: conditioning event has zero support")
        return Fraction(self.hits, self.support)


@dataclass(frozen=True)
class GroupRates:
    """Favorable rate, TPR and PPV of one group, kept as counts."""

    group: str
    size: int
    favorable_rate: Rate
    tpr: Rate
    ppv: Rate

    def rate(self, notion: str) -> Rate:
        return {"statistical_parity": self.favorable_rate,
                "equal_opportunity": self.tpr,
                "calibration": self.ppv}[_check_notion(notion)]


def _check_notion(notion: str) -> str:
    if notion not in NOTIONS:
        raise ValueError(f"unknown notion {notion!r}; expected one of {NOTIONS}")
    return notion


def group_rates(predictions, labels, mask, favorable, group: str = "") -> GroupRates:
    pred_fav = np.asarray(predictions) == favorable
    mask = np.asarray(mask, dtype=bool)
    if labels is None:
        lab_fav = np.zeros_like(pred_fav)
    else:
        lab_fav = np.asarray(labels) == favorable
    return GroupRates(
        group=group,
        size=int(mask.sum()),
        favorable_rate=Rate(int((pred_fav & mask).sum()), int(mask.sum())),
        tpr=Rate(int((pred_fav & lab_fav & mask).sum()), int((lab_fav & mask).sum())),
        ppv=Rate(int((pred_fav & lab_fav & mask).sum()), int((pred_fav & mask).sum())),
    )


def split_groups(groups, privileged) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks ``(unprivileged, privileged)``."""
    groups = np.asarray(groups, dtype=object)
    priv = np.array([g == privileged for g in groups], dtype=bool)
    return ~priv, priv


def _rate_pair(predictions, labels, groups, privileged, favorable, notion):
    predictions = np.asarray(predictions)
    if labels is not None and len(labels) != len(predictions):
        raise ValueError("predictions and labels differ in length")
    if len(groups) != len(predictions):
        raise ValueError("predictions and protected column differ in length")
    unpriv, priv = split_groups(groups, privileged)
    ru = group_rates(predictions, labels, unpriv, favorable, "unprivileged")
    rp = group_rates(predictions, labels, priv, favorable, "privileged")
    out = []
    for r in (ru, rp):
        if r.size == 0:
            raise UndefinedRateError(f"{r.group} group (privileged value {privileged!r}) is empty")
        rate = r.rate(notion)
        if not rate.defined:
            event = {"statistical_parity": "rows",
                     "equal_opportunity": "rows with favorable label",
                     "calibration": "rows predicted favorable"}[notion]
            raise UndefinedRateError(f"{notion}: {r.group} group has no {event}")
        out.append(rate.value)
    return out[0], out[1]


def exact_difference(predictions, labels, groups, privileged, favorable, notion: str) -> Fraction:
    """Unprivileged minus privileged rate for ``notion``, as an exact fraction."""
    u, p = _rate_pair(predictions, labels, groups, privileged, favorable, _check_notion(notion))
    return u - p


def statistical_parity_difference(predictions, groups, privileged, favorable) -> float:
    return float(exact_difference(predictions, None, groups, privileged, favorable, "statistical_parity"))


def equal_opportunity_difference(predictions, labels, groups, privileged, favorable) -> float:
    return float(exact_difference(predictions, labels, groups, privileged, favorable, "equal_opportunity"))


def calibration_difference(predictions, labels, groups, privileged, favorable) -> float:
    return float(exact_difference(predictions, labels, groups, privileged, favorable, "calibration"))


def satisfies_coarse(metric_value: float, delta: float) -> bool:
    """Coarse (delta-) version of a group notion: ``|metric| <= delta``."""
    return abs(metric_value) <= delta


@dataclass(frozen=True)
class MetricReport:
    metric: str
    protected: str
    value: float
    delta: float | None
    satisfied: bool | None
    support_unprivileged: int
    support_privileged: int

    def as_dict(self) -> dict:
        return {
            "metric": self.metric,
            "protected": self.protected,
            "value": self.value,
            "delta": self.delta,
            "satisfied": self.satisfied,
            "support_unprivileged": self.support_unprivileged,
            "support_privileged": self.support_privileged,
        }


def metric_report(predictions, labels, groups, privileged, favorable, notion: str,
                  protected: str = "", delta: float | None = None) -> MetricReport:
    value = float(exact_difference(predictions, labels, groups, privileged, favorable, notion))
    unpriv, priv = split_groups(groups, privileged)
    ru = group_rates(predictions, labels, unpriv, favorable).rate(notion)
    rp = group_rates(predictions, labels, priv, favorable).rate(notion)
    return MetricReport(
        metric=notion,
        protected=protected,
        value=value,
        delta=delta,
        satisfied=None if delta is None else satisfies_coarse(value, delta),
        support_unprivileged=ru.support,
        support_privileged=rp.support,
    )


# --------------------------------------------------------------------------
# Mahalanobis similarity


@dataclass(frozen=True)
class CovarianceModel:
    matrix: np.ndarray
    inverse: np.ndarray
    rank: int
    method: str  # "inverse", "pinv" or "ridge"
    regularization: float = 0.0

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def whitener(self) -> np.ndarray:
        """``L`` with ``L @ L.T == inverse``, so distances are Euclidean after ``x @ L``."""
        w, v = np.linalg.eigh((self.inverse + self.inverse.T) / 2)
        return v * np.sqrt(np.clip(w, 0.0, None))


RIDGE = 1e-6


def covariance(data, columns: Sequence[str] | None = None, *, ridge: float = RIDGE) -> CovarianceModel:
    """Sample covariance of the feature matrix with a (pseudo-)inverse.

    Full-rank matrices are inverted directly. Rank-deficient ones (one-hot
    dummies always are) use the Moore-Penrose pseudo-inverse; when an
    eigenvalue sits too close to the rank cut-off to classify reliably the
    ridge-regularized inverse ``(C + ridge*I)^-1`` is used instead.
    """
    X = data.feature_matrix(columns) if hasattr(data, "feature_matrix") else np.asarray(data, float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise InsufficientDataError("covariance needs at least 2 rows")
    C = np.cov(X, rowvar=False, ddof=1).reshape(X.shape[1], X.shape[1])
    C = (C + C.T) / 2
    w = np.linalg.eigvalsh(C)
    top = float(np.abs(w).max()) if w.size else 0.0
    if top == 0.0:
        return CovarianceModel(C, np.zeros_like(C), 0, "pinv")
    tol = top * max(C.shape) * np.finfo(float).eps
    rank = int((w > tol).sum())
    if rank == C.shape[0]:
        return CovarianceModel(C, np.linalg.inv(C), rank, "inverse")
    borderline = np.any((np.abs(w) > tol) & (np.abs(w) < tol * 1e4))
    if borderline:
        inv = np.linalg.inv(C + ridge * np.eye(C.shape[0]))
        return CovarianceModel(C, inv, rank, "ridge", ridge)
    return CovarianceModel(C, np.linalg.pinv(C, rcond=tol / top, hermitian=True), rank, "pinv")


def mahalanobis(x_i, x_j, model: CovarianceModel) -> float:
    diff = np.asarray(x_i, float) - np.asarray(x_j, float)
    if diff.shape != (model.dim,):
        raise ValueError(f"vectors of dimension {diff.shape} do not match model dimension {model.dim}")
    q = float(diff @ model.inverse @ diff)
    return float(np.sqrt(max(q, 0.0)))


def max_pairwise_distance(X, model: CovarianceModel) -> float:
    U = np.unique(np.asarray(X, float), axis=0) @ model.whitener()
    best = 0.0
    for start in range(0, len(U), 512):
        block = U[start:start + 512]
        d2 = ((block[:, None, :] - U[None, :, :]) ** 2).sum(-1)
        best = max(best, float(d2.max(initial=0.0)))
    return float(np.sqrt(best))


@dataclass
class IFScanResult:
    kappas: np.ndarray
    deltas: np.ndarray
    violations: np.ndarray  # shape (len(kappas), len(deltas)), pair counts
    witnesses: dict = field(default_factory=dict)  # (ki, di) -> (row_i, row_j)
    max_input_distance: float = 0.0
    n_rows: int = 0
    n_pairs: int = 0
    sampled: bool = False

    @property
    def satisfied(self) -> np.ndarray:
        return self.violations == 0

    def cells(self) -> list[dict]:
        """Long-form grid rows (kappa, delta, violations, satisfied)."""
        rows = []
        for ki, k in enumerate(self.kappas):
            for di, d in enumerate(self.deltas):
                n = int(self.violations[ki, di])
                rows.append({"kappa": float(k), "delta": float(d), "violations": n,
                             "satisfied": n == 0})
        return rows


def pairwise_if_scan(data, outputs, kappa_grid, delta_grid, *, model: CovarianceModel | None = None,
                     columns: Sequence[str] | None = None, pair_cap: int = 10_000, seed: int = 0,
                     block_pairs: int = 4_000_000) -> IFScanResult:
    """Count (kappa, delta) individual-fairness violations over all row pairs.

    A pair violates cell (kappa, delta) when its Mahalanobis distance is at most
    kappa and its output distance ``|o_i - o_j|`` exceeds delta. Rows sharing
    both feature vector and output are collapsed with multiplicities, which
    keeps the scan exact while touching only distinct pairs. Above
    ``pair_cap`` rows a seeded uniform subsample of ``pair_cap`` rows is used.
    The witness of a violated cell is its lexicographically smallest row pair.
    """
    X = data.feature_matrix(columns) if hasattr(data, "feature_matrix") else np.asarray(data, float)
    outputs = np.asarray(outputs, dtype=float)
    kappas = np.asarray(sorted(float(k) for k in kappa_grid))
    deltas = np.asarray(sorted(float(d) for d in delta_grid))
    if kappas.size == 0 or deltas.size == 0:
        raise ValueError("kappa and delta grids must be nonempty")
    n = len(outputs)
    if X.shape[0] != n:
        raise ValueError("outputs do not align with dataset rows")
    violations = np.zeros((kappas.size, deltas.size), dtype=np.int64)
    result = IFScanResult(kappas, deltas, violations, n_rows=n)
    if n < 2:
        return result
    if model is None:
        model = covariance(X)

    rows = np.arange(n)
    if n > pair_cap:
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(n, size=pair_cap, replace=False))
        result.sampled = True
    Xs, os_ = X[rows], outputs[rows]
    result.n_rows = len(rows)
    result.n_pairs = len(rows) * (len(rows) - 1) // 2

    combo, inverse, counts = np.unique(np.column_stack([Xs, os_]), axis=0,
                                       return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    first = np.full(len(combo), -1, dtype=np.int64)
    second = np.full(len(combo), -1, dtype=np.int64)
    for pos in range(len(rows)):  # rows are ascending, so first/second are minimal
        c = inverse[pos]
        if first[c] < 0:
            first[c] = rows[pos]
        elif second[c] < 0:
            second[c] = rows[pos]
    W = combo[:, :-1] @ model.whitener()
    out = combo[:, -1]
    big = np.iinfo(np.int64).max
    best_key = np.full(violations.shape, big, dtype=np.int64)

    def accumulate(D, d, weight, key):
        order = np.argsort(D, kind="stable")
        D, d, weight, key = D[order], d[order], weight[order], key[order]
        for di, delta in enumerate(deltas):
            hit = d > delta
            if not hit.any():
                continue
            Dh, wh, kh = D[hit], weight[hit], key[hit]
            cum = np.cumsum(wh)
            kmin = np.minimum.accumulate(kh)
            idx = np.searchsorted(Dh, kappas, side="right")
            ok = idx > 0
            violations[ok, di] += cum[idx[ok] - 1]
            best_key[ok, di] = np.minimum(best_key[ok, di], kmin[idx[ok] - 1])

    # identical (features, output) pairs: distance 0 in both spaces
    self_w = counts * (counts - 1) // 2
    has_self = self_w > 0
    if has_self.any():
        accumulate(np.zeros(has_self.sum()), np.zeros(has_self.sum()), self_w[has_self],
                   first[has_self] * n + second[has_self])

    k = len(combo)
    block = max(1, block_pairs // max(k, 1))
    max_d2 = 0.0
    for start in range(0, k - 1, block):
        stop = min(start + block, k - 1)
        heads = np.arange(start, stop)
        ii = np.repeat(heads, k - 1 - heads)
        jj = np.concatenate([np.arange(i + 1, k) for i in heads])
        d2 = ((W[ii] - W[jj]) ** 2).sum(-1)
        if d2.size:
            max_d2 = max(max_d2, float(d2.max()))
        a, b = np.minimum(first[ii], first[jj]), np.maximum(first[ii], first[jj])
        accumulate(np.sqrt(d2), np.abs(out[ii] - out[jj]), counts[ii] * counts[jj], a * n + b)
    result.max_input_distance = float(np.sqrt(max_d2))
    for ki in range(kappas.size):
        for di in range(deltas.size):
            if violations[ki, di]:
                key = int(best_key[ki, di])
                result.witnesses[(ki, di)] = (key // n, key % n)
    return result
