"""Nonparametric statistics kernel: rank tests used by the efficacy analysis.

The rank-sum test computes an exact p-value by full enumeration of the
C(n1+n2, n1) group assignments whenever the pooled sample is small
(<= EXACT_ENUMERATION_MAX) and tie-free; larger or tied samples use the
normal approximation with tie and continuity corrections. The normality
test follows Royston's published approximation (valid for 3 <= n <= 5000),
with fixtures pinned against an external reference implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from statistics import NormalDist

import numpy as np

from .errors import EmptyInput, SampleSizeOutOfRange, ZeroVariance

EXACT_ENUMERATION_MAX = 16

_ALTERNATIVES = ("two_sided", "greater", "less")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str  # mann_whitney_exact | mann_whitney_normal_approx | shapiro_wilk
    n1: int
    n2: int
    tie_correction_applied: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p_value {self.p_value} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "method": self.method,
            "n1": self.n1,
            "n2": self.n2,
            "tie_correction_applied": self.tie_correction_applied,
        }


@dataclass(frozen=True)
class RankData:
    values: tuple[float, ...]
    ranks: tuple[float, ...]
    tie_groups: tuple[int, ...]  # sizes of groups with >= 2 tied values


def rank_with_ties(values: list[float]) -> RankData:
    """Average ranks for ties; rank sum is always n(n+1)/2."""
    if not values:
        raise EmptyInput("cannot rank an empty sample")
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    tie_groups: list[int] = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2  # ranks are 1-based: positions i..j
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        if j > i:
            tie_groups.append(j - i + 1)
        i = j + 1
    return RankData(tuple(float(v) for v in values), tuple(ranks), tuple(tie_groups))


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _exact_tail_counts(all_ranks: list[int], n1: int, u_observed: float) -> tuple[int, int, int]:
    """Counts of assignments with U <= u and U >= u over every C(N, n1) split."""
    min_sum = n1 * (n1 + 1) // 2
    c_le = c_ge = total = 0
    for combo in combinations(all_ranks, n1):
        u = sum(combo) - min_sum
        total += 1
        if u <= u_observed:
            c_le += 1
        if u >= u_observed:
            c_ge += 1
    return c_le, c_ge, total


def mann_whitney_u(
    a: list[float], b: list[float], alternative: str = "two_sided"
) -> TestResult:
    """Rank-sum test of two independent samples.

    The reported statistic is U for the first sample (pairs where a exceeds
    b, counting ties as half). ``greater`` tests whether a tends larger.
    """
    if alternative not in _ALTERNATIVES:
        raise ValueError(f"alternative must be one of {_ALTERNATIVES}")
    if not a or not b:
        raise EmptyInput("both samples must be non-empty")
    n1, n2 = len(a), len(b)
    ranked = rank_with_ties(list(a) + list(b))
    r_a = sum(ranked.ranks[:n1])
    u_a = r_a - n1 * (n1 + 1) / 2
    ties = bool(ranked.tie_groups)

    if n1 + n2 <= EXACT_ENUMERATION_MAX and not ties:
        c_le, c_ge, total = _exact_tail_counts(
            list(range(1, n1 + n2 + 1)), n1, u_a
        )
        if alternative == "greater":
            p = c_ge / total
        elif alternative == "less":
            p = c_le / total
        else:
            p = min(1.0, 2 * min(c_le, c_ge) / total)
        return TestResult(
            statistic=u_a,
            p_value=p,
            method="mann_whitney_exact",
            n1=n1,
            n2=n2,
            tie_correction_applied=False,
        )

    n = n1 + n2
    tie_term = sum(t**3 - t for t in ranked.tie_groups)
    correction = 1.0 - tie_term / (n**3 - n) if n > 1 else 0.0
    sd = math.sqrt(correction * n1 * n2 * (n + 1) / 12.0)
    mean = n1 * n2 / 2.0
    if sd == 0.0:
        p = 1.0  # every value tied: no evidence either way
    elif alternative == "greater":
        p = _norm_sf((u_a - mean - 0.5) / sd)
    elif alternative == "less":
        p = _norm_sf(-(u_a - mean + 0.5) / sd)
    else:
        z = max(abs(u_a - mean) - 0.5, 0.0) / sd
        p = min(1.0, 2 * _norm_sf(z))
    return TestResult(
        statistic=u_a,
        p_value=p,
        method="mann_whitney_normal_approx",
        n1=n1,
        n2=n2,
        tie_correction_applied=ties,
    )


# Royston approximation polynomials (argument noted per block; highest degree first).
_C1 = (-2.706056, 4.434685, -2.07119, -0.147981, 0.221157, 0.0)  # in 1/sqrt(n)
_C2 = (-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0)  # in 1/sqrt(n)
_C3 = (-0.0006714, 0.025054, -0.39978, 0.544)  # mu, in n       (4 <= n <= 11)
_C4 = (-0.0020322, 0.062767, -0.77857, 1.3822)  # ln sigma, in n (4 <= n <= 11)
_C5 = (0.0038915, -0.083751, -0.31082, -1.5861)  # mu, in ln n    (n >= 12)
_C6 = (0.0030302, -0.082676, -0.4803)  # ln sigma, in ln n        (n >= 12)
_G = (0.459, -2.273)  # gamma gate, in n                          (4 <= n <= 11)


def _shapiro_weights(n: int) -> np.ndarray:
    """Approximate coefficients of the order-statistic correlation."""
    nd = NormalDist()
    m = np.array([nd.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)])
    ssq = float(np.dot(m, m))
    rsn = 1.0 / math.sqrt(n)
    a = m / math.sqrt(ssq)
    a_n = a[-1] + float(np.polyval(_C1, rsn))
    if n <= 5:
        phi = (ssq - 2 * m[-1] ** 2) / (1 - 2 * a_n**2)
        a = m / math.sqrt(phi)
        a[-1] = a_n
        a[0] = -a_n
    else:
        a_n1 = a[-2] + float(np.polyval(_C2, rsn))
        phi = (ssq - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * a_n**2 - 2 * a_n1**2)
        a = m / math.sqrt(phi)
        a[-1], a[-2] = a_n, a_n1
        a[0], a[1] = -a_n, -a_n1
    return a


def shapiro_wilk(sample: list[float]) -> TestResult:
    """Normality test; W near 1 means the sorted data track normal order statistics.

    Raises:
        SampleSizeOutOfRange: n outside [3, 5000].
        ZeroVariance: all values identical (W undefined).
    """
    n = len(sample)
    if n < 3 or n > 5000:
        raise SampleSizeOutOfRange(f"normality test needs 3 <= n <= 5000, got {n}")
    x = np.sort(np.asarray(sample, dtype=float))
    if x[-1] - x[0] == 0.0:
        raise ZeroVariance("all sample values are identical")

    if n == 3:
        a = np.array([-math.sqrt(0.5), 0.0, math.sqrt(0.5)])
    else:
        a = _shapiro_weights(n)
    centered = x - x.mean()
    w = float(np.dot(a, x) ** 2 / np.dot(centered, centered))
    w = min(w, 1.0)

    if n == 3:
        p = 1.909859 * (math.asin(math.sqrt(w)) - 1.047198)
        p = min(max(p, 0.0), 1.0)
        return TestResult(w, p, "shapiro_wilk", n1=n, n2=0)

    if n <= 11:
        gamma = float(np.polyval(_G, n))
        y = math.log(1.0 - w)
        if y >= gamma:
            return TestResult(w, 1e-19, "shapiro_wilk", n1=n, n2=0)
        y = -math.log(gamma - y)
        mu = float(np.polyval(_C3, n))
        sigma = math.exp(float(np.polyval(_C4, n)))
    else:
        y = math.log(1.0 - w)
        ln_n = math.log(n)
        mu = float(np.polyval(_C5, ln_n))
        sigma = math.exp(float(np.polyval(_C6, ln_n)))
    p = _norm_sf((y - mu) / sigma)
    return TestResult(w, p, "shapiro_wilk", n1=n, n2=0)


@dataclass(frozen=True)
class EfficacyReport:
    """Outcome of the normality-gated comparison of two score groups."""

    mean_a: float
    mean_b: float
    shapiro_a: TestResult
    shapiro_b: TestResult
    normality_rejected: bool
    alpha: float
    method: str  # "mann_whitney" once normality is rejected, else "none"
    test: TestResult | None
    significant: bool | None
    note: str

    def to_dict(self) -> dict:
        return {
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "shapiro_a": self.shapiro_a.to_dict(),
            "shapiro_b": self.shapiro_b.to_dict(),
            "normality_rejected": self.normality_rejected,
            "alpha": self.alpha,
            "method": self.method,
            "test": self.test.to_dict() if self.test else None,
            "significant": self.significant,
            "note": self.note,
        }


def efficacy_analysis(
    group_a: list[float], group_b: list[float], alpha: float = 0.05
) -> EfficacyReport:
    """Normality gate on each group, then the rank test if normality is rejected.

    The parametric branch is deliberately absent: when neither group rejects
    normality the report says so and runs no comparison.
    """
    if not group_a or not group_b:
        raise EmptyInput("both groups must be non-empty")
    sw_a = shapiro_wilk(group_a)
    sw_b = shapiro_wilk(group_b)
    rejected = sw_a.p_value < alpha or sw_b.p_value < alpha
    if rejected:
        test = mann_whitney_u(group_a, group_b, alternative="two_sided")
        return EfficacyReport(
            mean_a=float(np.mean(group_a)),
            mean_b=float(np.mean(group_b)),
            shapiro_a=sw_a,
            shapiro_b=sw_b,
            normality_rejected=True,
            alpha=alpha,
            method="mann_whitney",
            test=test,
            significant=test.p_value < alpha,
            note="normality rejected; nonparametric comparison applied",
        )
    return EfficacyReport(
        mean_a=float(np.mean(group_a)),
        mean_b=float(np.mean(group_b)),
        shapiro_a=sw_a,
        shapiro_b=sw_b,
        normality_rejected=False,
        alpha=alpha,
        method="none",
        test=None,
        significant=None,
        note="normality not rejected for either group; parametric branch out of scope",
    )
