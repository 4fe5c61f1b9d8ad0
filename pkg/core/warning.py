"""
Safe/Dangerous classification and the rank-based threshold analysis.

A detection is Safe only when its estimated distance is strictly greater
than the danger threshold. The threshold itself is configuration: the
nonparametric tests here report whether the dangerous and safe count series
differ, they do not derive a threshold.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.stats import chi2, norm, rankdata

from core.errors import (
    DuplicateThreshold,
    EmptyGroup,
    ExactTooLarge,
    FewerThanTwoGroups,
    FewerThanTwoObservations,
    InputError,
    NonPositiveInput,
)

DEFAULT_DANGER_THRESHOLD_M = 6.0
DEFAULT_ALPHA = 0.05
EXACT_MAX_TOTAL = 20
DEFAULT_PERMUTATIONS = 100_000

# smallest p-value reported; keeps p inside (0, 1]
_P_FLOOR = np.finfo(np.float64).tiny


class Verdict(str, Enum):
    SAFE = "Safe"
    DANGEROUS = "Dangerous"


class TestMethod(str, Enum):
    __test__ = False

    MANN_WHITNEY_EXACT = "mann-whitney-exact"
    MANN_WHITNEY_NORMAL = "mann-whitney-normal"
    KRUSKAL_WALLIS = "kruskal-wallis"
    KRUSKAL_WALLIS_PERMUTATION = "kruskal-wallis-permutation"


@dataclass(frozen=True)
class SafetyVerdict:
    verdict: Verdict
    distance_m: float
    threshold_m: float


@dataclass(frozen=True)
class ThresholdSample:
    threshold_m: float
    dangerous_count: int
    safe_count: int

    def __post_init__(self):
        if not math.isfinite(self.threshold_m) or self.threshold_m <= 0:
            raise NonPositiveInput(f"threshold must be positive, got {self.threshold_m}")
        for name in ("dangerous_count", "safe_count"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise InputError(f"{name} must be a non-negative integer, got {value!r}")


@dataclass(frozen=True)
class TestResult:
    __test__ = False

    statistic: float
    p_value: float
    method: TestMethod

    def to_dict(self) -> dict:
        return {"method": self.method.value, "statistic": self.statistic, "p_value": self.p_value}


@dataclass
class ThresholdAnalysis:
    result: TestResult
    alpha: float
    selected_threshold_m: float
    sample_count: int
    series: List[Dict[str, float]] = field(default_factory=list)
    selection_source: str = "configuration"

    @property
    def consistent(self) -> bool:
        """True when the series show no significant difference (p > alpha)."""
        return self.result.p_value > self.alpha

    def to_dict(self) -> dict:
        return {
            "test": self.result.to_dict(),
            "alpha": self.alpha,
            "significant": not self.consistent,
            "consistent": self.consistent,
            "selected_threshold_m": self.selected_threshold_m,
            "selection_source": self.selection_source,
            "note": (
                "the selected threshold is a configured value; the test reports "
                "evidence about the count series and does not derive it"
            ),
            "samples": self.sample_count,
            "series": self.series,
        }


def classify(distance_m: float, threshold_m: float) -> SafetyVerdict:
    # equality is Dangerous
    if not distance_m > 0:
        raise NonPositiveInput(f"distance must be positive, got {distance_m}")
    if not threshold_m > 0:
        raise NonPositiveInput(f"threshold must be positive, got {threshold_m}")
    verdict = Verdict.SAFE if distance_m > threshold_m else Verdict.DANGEROUS
    return SafetyVerdict(verdict=verdict, distance_m=distance_m, threshold_m=threshold_m)


def _check_groups(*groups: Sequence[float]) -> None:
    for k, g in enumerate(groups):
        if len(g) == 0:
            raise EmptyGroup(f"group {k} is empty")


def _tie_term(values: np.ndarray) -> float:
    _, counts = np.unique(values, return_counts=True)
    counts = counts.astype(np.float64)
    return float(np.sum(counts**3 - counts))


def u_statistics(group_a: Sequence[float], group_b: Sequence[float]) -> Tuple[float, float]:
    """Mann-Whitney U for each group (midranks for ties); U_a + U_b = n_a * n_b."""
    _check_groups(group_a, group_b)
    n1, n2 = len(group_a), len(group_b)
    ranks = rankdata(np.concatenate([np.asarray(group_a, float), np.asarray(group_b, float)]))
    u_a = float(np.sum(ranks[:n1])) - n1 * (n1 + 1) / 2
    return u_a, n1 * n2 - u_a


def _exact_two_sided_p(doubled_ranks: Sequence[int], n1: int, n2: int) -> float:
    """
    Share of all C(N, n1) rank assignments whose U lies at least as far from
    its mean as the observed one. Works on doubled midranks so every sum is
    an integer.
    """
    offset = n1 * (n1 + 1) + n1 * n2  # 2U - n1*n2 = doubled_sum - offset
    observed = abs(sum(doubled_ranks[:n1]) - offset)

    counts = [Counter() for _ in range(n1 + 1)]
    counts[0][0] = 1
    for k, r in enumerate(doubled_ranks):
        for size in range(min(k + 1, n1), 0, -1):
            target = counts[size]
            for s, c in counts[size - 1].items():
                target[s + r] += c

    extreme = sum(c for s, c in counts[n1].items() if abs(s - offset) >= observed)
    return extreme / math.comb(n1 + n2, n1)


def mann_whitney_u(
    group_a: Sequence[float],
    group_b: Sequence[float],
    mode: str = "exact",
    exact_max_total: int = EXACT_MAX_TOTAL,
) -> TestResult:
    """
    Two-sided Mann-Whitney U test. The statistic is U of group_a.

    mode="exact" enumerates every rank assignment (midranks for ties) and is
    limited to exact_max_total observations; mode="normal-approx" uses the
    tie-corrected normal approximation with continuity correction.
    """
    _check_groups(group_a, group_b)
    n1, n2 = len(group_a), len(group_b)
    total = n1 + n2
    values = np.concatenate([np.asarray(group_a, float), np.asarray(group_b, float)])
    u_a, _ = u_statistics(group_a, group_b)

    if mode == "exact":
        if total > exact_max_total:
            raise ExactTooLarge(
                f"exact enumeration is limited to {exact_max_total} observations, got {total}"
            )
        doubled = [int(r) for r in np.rint(2 * rankdata(values))]
        p = _exact_two_sided_p(doubled, n1, n2)
        return TestResult(statistic=u_a, p_value=min(1.0, p), method=TestMethod.MANN_WHITNEY_EXACT)

    if mode != "normal-approx":
        raise InputError(f"unknown Mann-Whitney mode '{mode}'")

    mean_u = n1 * n2 / 2
    var_u = n1 * n2 / 12 * ((total + 1) - _tie_term(values) / (total * (total - 1)))
    if var_u <= 0:
        # every observation tied
        return TestResult(statistic=u_a, p_value=1.0, method=TestMethod.MANN_WHITNEY_NORMAL)
    z = max(abs(u_a - mean_u) - 0.5, 0.0) / math.sqrt(var_u)
    p = min(1.0, max(_P_FLOOR, 2 * float(norm.sf(z))))
    return TestResult(statistic=u_a, p_value=p, method=TestMethod.MANN_WHITNEY_NORMAL)


def _h_uncorrected(rank_sums: np.ndarray, sizes: np.ndarray, total: int) -> np.ndarray:
    # sum n_i * (mean rank_i - (N+1)/2)^2, scaled; zero exactly when all mean ranks agree
    mean_ranks = rank_sums / sizes
    spread = np.sum(sizes * (mean_ranks - (total + 1) / 2) ** 2, axis=-1)
    return 12.0 / (total * (total + 1)) * spread


def kruskal_wallis(
    groups: Sequence[Sequence[float]],
    permutations: Optional[int] = None,
    seed: int = 0,
) -> TestResult:
    """
    Kruskal-Wallis H with midrank tie correction.

    The p-value comes from chi-square with k-1 degrees of freedom, or, when
    `permutations` is given, from a seeded Monte Carlo over rank permutations.
    """
    if len(groups) < 2:
        raise FewerThanTwoGroups(f"need at least two groups, got {len(groups)}")
    _check_groups(*groups)

    sizes = np.array([len(g) for g in groups], dtype=np.float64)
    values = np.concatenate([np.asarray(g, float) for g in groups])
    total = values.size
    ranks = rankdata(values)
    offsets = np.concatenate(([0], np.cumsum(sizes.astype(int))[:-1]))

    h_raw = float(_h_uncorrected(np.add.reduceat(ranks, offsets), sizes, total))
    tie_correction = 1.0 - _tie_term(values) / (total**3 - total)
    if tie_correction <= 0:
        # all observations equal: no rank separation at all
        method = TestMethod.KRUSKAL_WALLIS if permutations is None else TestMethod.KRUSKAL_WALLIS_PERMUTATION
        return TestResult(statistic=0.0, p_value=1.0, method=method)
    h = h_raw / tie_correction

    if permutations is None:
        p = float(chi2.sf(h, len(groups) - 1))
        return TestResult(statistic=h, p_value=min(1.0, max(_P_FLOOR, p)), method=TestMethod.KRUSKAL_WALLIS)

    if permutations < 1:
        raise InputError(f"permutations must be positive, got {permutations}")
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    block = 100_000
    tolerance = 1e-9 * max(1.0, h_raw)
    while done < permutations:
        n = min(block, permutations - done)
        shuffled = rng.permuted(np.tile(ranks, (n, 1)), axis=1)
        h_perm = _h_uncorrected(np.add.reduceat(shuffled, offsets, axis=1), sizes, total)
        hits += int(np.count_nonzero(h_perm >= h_raw - tolerance))
        done += n
    p = (hits + 1) / (permutations + 1)
    logger.debug(f"[🎲] Kruskal-Wallis permutation p from {permutations} draws: {p:.6g}")
    return TestResult(statistic=h, p_value=p, method=TestMethod.KRUSKAL_WALLIS_PERMUTATION)


def run_test(
    group_a: Sequence[float],
    group_b: Sequence[float],
    method: TestMethod,
    exact_max_total: int = EXACT_MAX_TOTAL,
    permutations: Optional[int] = None,
    seed: int = 0,
) -> TestResult:
    if method is TestMethod.MANN_WHITNEY_EXACT:
        return mann_whitney_u(group_a, group_b, "exact", exact_max_total)
    if method is TestMethod.MANN_WHITNEY_NORMAL:
        return mann_whitney_u(group_a, group_b, "normal-approx")
    if method is TestMethod.KRUSKAL_WALLIS_PERMUTATION:
        draws = DEFAULT_PERMUTATIONS if permutations is None else permutations
        return kruskal_wallis([group_a, group_b], permutations=draws, seed=seed)
    return kruskal_wallis([group_a, group_b])


def threshold_plot_series(samples: Sequence[ThresholdSample]) -> List[Dict[str, float]]:
    rows = []
    for s in sorted(samples, key=lambda s: s.threshold_m):
        seen = s.dangerous_count + s.safe_count
        rows.append(
            {
                "threshold_m": s.threshold_m,
                "dangerous": s.dangerous_count,
                "safe": s.safe_count,
                "dangerous_share": s.dangerous_count / seen if seen else 0.0,
            }
        )
    return rows


def analyze_thresholds(
    samples: Sequence[ThresholdSample],
    alpha: float = DEFAULT_ALPHA,
    method: TestMethod = TestMethod.MANN_WHITNEY_EXACT,
    selected_threshold_m: float = DEFAULT_DANGER_THRESHOLD_M,
    exact_max_total: int = EXACT_MAX_TOTAL,
    permutations: Optional[int] = None,
    seed: int = 0,
) -> ThresholdAnalysis:
    """
    Test the dangerous-count series against the safe-count series.

    The selected threshold is passed through from configuration and flagged as
    such in the report.
    """
    if len(samples) < 2:
        raise FewerThanTwoObservations(f"need at least two threshold samples, got {len(samples)}")
    if not 0.0 < alpha < 1.0:
        raise InputError(f"alpha must lie in (0, 1), got {alpha}")
    seen = set()
    for s in samples:
        if s.threshold_m in seen:
            raise DuplicateThreshold(f"threshold {s.threshold_m} appears more than once")
        seen.add(s.threshold_m)

    dangerous = [s.dangerous_count for s in samples]
    safe = [s.safe_count for s in samples]
    result = run_test(dangerous, safe, method, exact_max_total, permutations, seed)
    logger.debug(
        f"[📊] {method.value}: statistic={result.statistic:.6g} p={result.p_value:.6g} alpha={alpha}"
    )
    return ThresholdAnalysis(
        result=result,
        alpha=alpha,
        selected_threshold_m=selected_threshold_m,
        sample_count=len(samples),
        series=threshold_plot_series(samples),
    )
