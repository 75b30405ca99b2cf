"""Transfer bounds between an auditor relation f and a system g.

If g stays within epsilon of f on every input, fairness levels of f carry over
to g with slack proportional to epsilon:

* individual fairness: (kappa, delta) for f gives (kappa, 2*eps + delta) for g,
  and f violating (kappa, delta) means g violates (kappa, delta - 2*eps);
* group notions: delta-parity/opportunity/calibration for f gives
  (2*M*eps + delta) for g, M being a Lipschitz constant of the group rates.

All functions accept ints, floats or ``Fraction`` and do plain arithmetic, so
``Fraction`` inputs give exact results.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .auditor import RuleSet, apply_ruleset
from .metrics import NOTIONS, exact_difference, group_rates, split_groups


class InfeasibleThresholdError(ValueError):
    pass


def _nonneg(**kw):
    for name, value in kw.items():
        if value < 0:
            raise ValueError(f"{name} must be nonnegative, got {value}")


def if_transfer(epsilon, delta):
    _nonneg(epsilon=epsilon, delta=delta)
    return 2 * epsilon + delta


def if_converse(epsilon, delta):
    """May be negative, in which case the statement it supports is vacuous."""
    _nonneg(epsilon=epsilon, delta=delta)
    return delta - 2 * epsilon


def group_transfer(epsilon, delta, M):
    _nonneg(epsilon=epsilon)
    return 2 * M * epsilon + delta


def estimate_M(system_rate, auditor_rate, epsilon):
    """Signed empirical Lipschitz constant ``(p(g,a) - p(f,a)) / eps``."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if system_rate is None or auditor_rate is None:
        raise ValueError("rates must be defined")
    return (system_rate - auditor_rate) / epsilon


def epsilon_threshold_individual(delta, delta_prime):
    """Largest tolerable noncomparative gap for (kappa, delta') individual fairness."""
    if delta_prime <= delta:
        raise InfeasibleThresholdError(f"delta' ({delta_prime}) must exceed delta ({delta})")
    _nonneg(delta=delta)
    return (delta_prime - delta) / 2


def epsilon_threshold_group(delta, delta_prime, M):
    if M <= 0:
        raise ValueError(f"threshold undefined for nonpositive Lipschitz constant M={M}")
    if delta_prime <= delta:
        raise InfeasibleThresholdError(f"delta' ({delta_prime}) must exceed delta ({delta})")
    _nonneg(delta=delta)
    return (delta_prime - delta) / (2 * M)


@dataclass(frozen=True)
class IFBound:
    epsilon: float
    delta: float
    forward: float
    converse: float
    threshold: float | None = None
    delta_prime: float | None = None


def if_bound(epsilon, delta, delta_prime=None) -> IFBound:
    thr = None if delta_prime is None else epsilon_threshold_individual(delta, delta_prime)
    return IFBound(epsilon, delta, if_transfer(epsilon, delta), if_converse(epsilon, delta),
                   thr, delta_prime)


@dataclass(frozen=True)
class TransferBoundReport:
    """One system-table cell: the system's metric against its transfer bound.

    ``satisfied`` compares signed values (outcome <= bound); ``abs_satisfied``
    compares magnitudes. Both are emitted since neither reading is canonical.
    """

    dataset: str
    notion: str
    protected: str
    epsilon: float
    delta: float
    M_hat: float
    outcome_distance: float
    upper_bound: float
    satisfied: bool
    abs_satisfied: bool
    system_rate_unprivileged: float
    auditor_rate_unprivileged: float
    support_unprivileged: int
    support_privileged: int

    def as_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "notion": self.notion,
            "protected": self.protected,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "M_hat": self.M_hat,
            "outcome_distance": self.outcome_distance,
            "upper_bound": self.upper_bound,
            "abs_outcome_distance": abs(self.outcome_distance),
            "abs_upper_bound": abs(self.upper_bound),
            "satisfied": self.satisfied,
            "abs_satisfied": self.abs_satisfied,
            "system_rate_unprivileged": self.system_rate_unprivileged,
            "auditor_rate_unprivileged": self.auditor_rate_unprivileged,
            "support_unprivileged": self.support_unprivileged,
            "support_privileged": self.support_privileged,
        }


def table2_row(ds, system_outputs, auditor, protected: str, notion: str,
               epsilon: float = 1.0) -> TransferBoundReport:
    """Assemble one transfer-bound cell.

    ``auditor`` is a RuleSet or its precomputed output vector.
    The auditor is scored against the dataset labels (its auditor-table metric gives
    delta). The system is scored against the auditor's outputs, which act as the
    benchmark labels. M is estimated on the unprivileged group from the same
    rate the notion compares.
    """
    if notion not in NOTIONS:
        raise ValueError(f"unknown notion {notion!r}")
    auditor_outputs = apply_ruleset(auditor, ds) if isinstance(auditor, RuleSet) else np.asarray(auditor)
    groups = ds.values(protected)
    privileged = ds.schema.privileged(protected)
    fav = ds.schema.favorable
    labels = ds.labels()
    try:
        delta = exact_difference(auditor_outputs, labels, groups, privileged, fav, notion)
        outcome = exact_difference(system_outputs, auditor_outputs, groups, privileged, fav, notion)
    except ValueError as exc:
        raise type(exc)(f"{ds.name}/{protected}/{notion}: {exc}") from None
    unpriv, priv = split_groups(groups, privileged)
    sys_u = group_rates(system_outputs, auditor_outputs, unpriv, fav).rate(notion)
    aud_u = group_rates(auditor_outputs, labels, unpriv, fav).rate(notion)
    sys_p = group_rates(system_outputs, auditor_outputs, priv, fav).rate(notion)
    eps = Fraction(str(epsilon))
    M = estimate_M(sys_u.value, aud_u.value, eps)
    eps_f, delta_f, M_f, out_f = float(epsilon), float(delta), float(M), float(outcome)
    upper = group_transfer(eps_f, delta_f, M_f)
    return TransferBoundReport(
        dataset=ds.name, notion=notion, protected=protected, epsilon=eps_f, delta=delta_f,
        M_hat=M_f, outcome_distance=out_f, upper_bound=upper,
        satisfied=bool(out_f <= upper), abs_satisfied=bool(abs(out_f) <= abs(upper)),
        system_rate_unprivileged=float(sys_u.value), auditor_rate_unprivileged=float(aud_u.value),
        support_unprivileged=sys_u.support, support_privileged=sys_p.support,
    )


def system_outputs_default(ds) -> np.ndarray:
    """The dataset's recorded outcome column plays the role of the audited system."""
    return ds.labels()
