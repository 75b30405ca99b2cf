"""Brute-force checks of the transfer bounds on small finite instances.

Instances have integer feature vectors, integer labels and binary ground
truth, so input distances are compared through exact integer squared norms
and group rates are ``Fraction`` objects: every comparison is exact.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

from .bounds import epsilon_threshold_group, epsilon_threshold_individual, group_transfer, if_transfer

FAVORABLE = 1
CHECKS = ("prop1", "prop2", "prop3_sp", "prop4_eo", "prop5_cal", "cor1", "cor2")
GROUP_CHECKS = {"prop3_sp": "statistical_parity", "prop4_eo": "equal_opportunity",
                "prop5_cal": "calibration"}


@dataclass(frozen=True)
class FiniteInstance:
    points: tuple[tuple[int, ...], ...]
    privileged: tuple[bool, ...]
    f: tuple[int, ...]
    g: tuple[int, ...]
    y: tuple[int, ...]
    label_count: int
    seed: int

    @property
    def n(self) -> int:
        return len(self.points)

    def sq_dist(self, i: int, j: int) -> int:
        return sum((a - b) ** 2 for a, b in zip(self.points[i], self.points[j]))

    def close_pairs(self, kappa) -> list[tuple[int, int]]:
        k2 = Fraction(kappa) ** 2
        return [(i, j) for i, j in combinations(range(self.n), 2) if self.sq_dist(i, j) <= k2]

    @property
    def nc_gap(self) -> int:
        """``max_x |g(x) - f(x)|``; g is eps-noncomparatively fair iff this is < eps."""
        return max(abs(a - b) for a, b in zip(self.g, self.f))


@dataclass(frozen=True)
class Skipped:
    reason: str


def random_instance(seed: int, n: int, label_count: int, feature_dim: int,
                    max_gap: int | None = None, coord_range: int = 6) -> FiniteInstance:
    """Seeded instance; g is f shifted by at most ``max_gap`` (random if None)."""
    if n < 2:
        raise ValueError("need at least 2 points")
    if label_count < 2:
        raise ValueError("need at least 2 labels")
    if feature_dim < 1:
        raise ValueError("need at least one feature")
    rng = random.Random(seed)
    points = tuple(tuple(rng.randrange(coord_range) for _ in range(feature_dim)) for _ in range(n))
    priv = [rng.random() < 0.5 for _ in range(n)]
    priv[0], priv[1] = True, False
    rng.shuffle(priv)
    f = tuple(rng.randrange(label_count) for _ in range(n))
    gap = rng.randrange(3) if max_gap is None else max_gap
    g = tuple(min(label_count - 1, max(0, v + rng.randint(-gap, gap))) for v in f)
    y = tuple(rng.randrange(2) for _ in range(n))
    return FiniteInstance(points, tuple(priv), f, g, y, label_count, seed)


def check_prop1(inst: FiniteInstance, kappa, epsilon):
    """Pairs where ``d(g(x1), g(x2)) >= 2*eps + delta`` (expected: none).

    delta is the smallest value for which f is (kappa, delta)-individually fair.
    """
    if not inst.nc_gap < epsilon:
        return Skipped("g is not epsilon-noncomparatively fair")
    close = inst.close_pairs(kappa)
    delta = max((abs(inst.f[i] - inst.f[j]) for i, j in close), default=0)
    bound = if_transfer(Fraction(epsilon), delta)
    return [(i, j) for i, j in close if abs(inst.g[i] - inst.g[j]) >= bound]


def check_prop2(inst: FiniteInstance, kappa, delta, epsilon):
    """Empty when some kappa-close pair has ``d(g) > delta - 2*eps``."""
    if not inst.nc_gap < epsilon:
        return Skipped("g is not epsilon-noncomparatively fair")
    close = inst.close_pairs(kappa)
    if not any(abs(inst.f[i] - inst.f[j]) > delta for i, j in close):
        return Skipped("f is (kappa, delta)-individually fair")
    floor = Fraction(delta) - 2 * Fraction(epsilon)
    if any(abs(inst.g[i] - inst.g[j]) > floor for i, j in close):
        return []
    return [("no witness pair", inst.seed)]


def group_rate(inst: FiniteInstance, outputs, group: bool, notion: str) -> Fraction | None:
    members = [i for i in range(inst.n) if inst.privileged[i] == group]
    if notion == "statistical_parity":
        pool = members
        hits = [i for i in pool if outputs[i] == FAVORABLE]
    elif notion == "equal_opportunity":
        pool = [i for i in members if inst.y[i] == 1]
        hits = [i for i in pool if outputs[i] == FAVORABLE]
    elif notion == "calibration":
        pool = [i for i in members if outputs[i] == FAVORABLE]
        hits = [i for i in pool if inst.y[i] == 1]
    else:
        raise ValueError(f"unknown notion {notion!r}")
    return Fraction(len(hits), len(pool)) if pool else None


def group_gap(inst: FiniteInstance, outputs, notion: str) -> Fraction | None:
    u, p = group_rate(inst, outputs, False, notion), group_rate(inst, outputs, True, notion)
    return None if u is None or p is None else u - p


def check_group_props(inst: FiniteInstance, epsilon, notion: str):
    """``|metric(g)| <= 2*M*eps + |metric(f)|`` with M the empirical rate shift."""
    if not inst.nc_gap < epsilon:
        return Skipped("g is not epsilon-noncomparatively fair")
    rates = {}
    for who, out in (("f", inst.f), ("g", inst.g)):
        for grp in (False, True):
            r = group_rate(inst, out, grp, notion)
            if r is None:
                return Skipped(f"{notion} rate of {who} undefined for a group")
            rates[who, grp] = r
    eps = Fraction(epsilon)
    M = max(abs(rates["g", grp] - rates["f", grp]) for grp in (False, True)) / eps
    delta = abs(rates["f", False] - rates["f", True])
    lhs = abs(rates["g", False] - rates["g", True])
    bound = group_transfer(eps, delta, M)
    return [] if lhs <= bound else [(notion, lhs, bound)]


def check_cor1(inst: FiniteInstance, kappa, delta_prime):
    """An auditor accepted by the epsilon threshold is (kappa, delta')-fair."""
    close = inst.close_pairs(kappa)
    delta = max((abs(inst.f[i] - inst.f[j]) for i, j in close), default=0)
    if Fraction(delta_prime) <= delta:
        return Skipped("delta' does not exceed delta")
    threshold = epsilon_threshold_individual(Fraction(delta), Fraction(delta_prime))
    if not tight_epsilon(inst) < threshold:
        return Skipped("auditor rejected by threshold")
    return [(i, j) for i, j in close if abs(inst.g[i] - inst.g[j]) >= Fraction(delta_prime)]


def check_cor2(inst: FiniteInstance, delta_prime):
    """An auditor accepted by the group threshold satisfies delta'-parity."""
    rf, rg = {}, {}
    for grp in (False, True):
        rf[grp] = group_rate(inst, inst.f, grp, "statistical_parity")
        rg[grp] = group_rate(inst, inst.g, grp, "statistical_parity")
    eps = tight_epsilon(inst)
    M = max(abs(rg[a] - rf[a]) for a in (False, True)) / eps
    delta = abs(rf[False] - rf[True])
    if M <= 0:
        return Skipped("rate shift is zero")
    if Fraction(delta_prime) <= delta:
        return Skipped("delta' does not exceed delta")
    if not eps < epsilon_threshold_group(delta, Fraction(delta_prime), M):
        return Skipped("auditor rejected by threshold")
    lhs = abs(rg[False] - rg[True])
    return [] if lhs < Fraction(delta_prime) else [("parity", lhs, delta_prime)]


def tight_epsilon(inst: FiniteInstance) -> Fraction:
    """Smallest half-integer epsilon for which g is epsilon-noncomparatively fair."""
    return Fraction(2 * inst.nc_gap + 1, 2)


def _campaign_case(seed: int):
    rng = random.Random(seed)
    n = rng.randint(2, 24)
    inst = random_instance(seed, n, rng.randint(2, 10), rng.randint(1, 4))
    max_sq = max(inst.sq_dist(i, j) for i, j in combinations(range(n), 2))
    kappa = rng.randint(0, math.isqrt(max_sq) + 1)
    return rng, inst, kappa


def run_campaign(seed: int = 0, instances: int = 1000) -> dict:
    """Run every check on ``instances`` seeded instances; JSON-ready report."""
    master = random.Random(seed)
    seeds = [master.randrange(2**31) for _ in range(instances)]
    report = {c: {"passed": 0, "skipped": 0, "violations": 0, "violation_seeds": []} for c in CHECKS}

    def record(check, outcome, s):
        entry = report[check]
        if isinstance(outcome, Skipped):
            entry["skipped"] += 1
        elif outcome:
            entry["violations"] += 1
            entry["violation_seeds"].append(s)
        else:
            entry["passed"] += 1

    for s in seeds:
        rng, inst, kappa = _campaign_case(s)
        tight = tight_epsilon(inst)
        # prop1 counts one outcome per (instance, eps) combination
        found = [check_prop1(inst, kappa, eps) for eps in (tight, tight + 1, tight + 3)]
        bad = [v for v in found if not isinstance(v, Skipped) and v]
        record("prop1", bad[0] if bad else [], s)
        close = inst.close_pairs(kappa)
        top = max((abs(inst.f[i] - inst.f[j]) for i, j in close), default=0)
        delta = rng.randint(0, top - 1) if top > 0 else 0
        record("prop2", check_prop2(inst, kappa, delta, tight), s)
        for check, notion in GROUP_CHECKS.items():
            record(check, check_group_props(inst, tight, notion), s)
        record("cor1", check_cor1(inst, kappa, top + rng.randint(1, 4 * inst.nc_gap + 2)), s)
        record("cor2", check_cor2(inst, Fraction(rng.randint(1, 20), 10)), s)

    return {
        "seed": seed,
        "instances": instances,
        "evidence": "finite empirical instances, exact integer/rational arithmetic",
        "checks": report,
        "total_violations": sum(v["violations"] for v in report.values()),
    }


def campaign_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
