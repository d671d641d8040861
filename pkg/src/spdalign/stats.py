"""Paired statistical validation of score differences.

The decision procedure mirrors common practice for small paired samples:
test the differences for normality (Lilliefors, with a seeded Monte Carlo
null instead of lookup tables), then use the paired t-test when normality is
not rejected and the exact Wilcoxon signed-rank test otherwise. All three
p-values are always reported alongside the choice.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy import stats as sstats

from .errors import DataError

__all__ = [
    "PairedTestResult",
    "paired_t_test",
    "wilcoxon_signed_rank",
    "lilliefors_normality",
    "paired_tests",
]

LILLIEFORS_REPLICATES = 100_000
NORMALITY_ALPHA = 0.05


@dataclass(frozen=True)
class PairedTestResult:
    lilliefors_p: float
    t_stat: float
    t_p: float
    wilcoxon_stat: float
    wilcoxon_p: float
    chosen_test: str
    chosen_p: float

    def to_dict(self) -> dict:
        return asdict(self)


def _differences(scores_a, scores_b) -> np.ndarray:
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"paired samples must be equal-length vectors, got "
                         f"{a.shape} and {b.shape}")
    return a - b


def paired_t_test(diffs) -> tuple[float, float]:
    """Two-sided paired t-test on precomputed differences.

    Returns ``(t, p)`` with ``t = mean / (sd / sqrt(n))`` and p from the
    t distribution with n - 1 degrees of freedom.
    """
    d = np.asarray(diffs, dtype=np.float64)
    if d.size < 2:
        raise ValueError("need at least 2 differences")
    sd = d.std(ddof=1)
    if sd == 0.0:
        raise DataError("zero-variance differences: t statistic undefined")
    t = d.mean() / (sd / np.sqrt(d.size))
    p = 2.0 * sstats.t.sf(abs(t), df=d.size - 1)
    return float(t), float(p)


def _signed_rank_statistic(diffs: np.ndarray) -> tuple[float, np.ndarray]:
    """W+ (sum of positive-difference ranks) and the doubled integer ranks.

    Zero differences are dropped (standard signed-rank convention); ties get
    average ranks, which are half-integers, so doubling them keeps the exact
    null distribution on an integer grid.
    """
    d = diffs[diffs != 0.0]
    if d.size == 0:
        raise DataError("all differences are zero: signed-rank test undefined")
    ranks = sstats.rankdata(np.abs(d))
    doubled = np.rint(2.0 * ranks).astype(np.int64)
    w_plus = float(np.sum(ranks[d > 0]))
    return w_plus, doubled


def _exact_signed_rank_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    """Null distribution of the doubled W+ by convolution over sign flips."""
    total = int(doubled_ranks.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts += shifted
    return counts


def wilcoxon_signed_rank(diffs, exact_limit: int = 25) -> tuple[float, float]:
    """Two-sided Wilcoxon signed-rank test.

    Returns ``(W+, p)``. For up to ``exact_limit`` nonzero differences the
    p-value is exact, from the full enumeration of the sign-flip null
    (tie-aware, via average ranks); beyond that a normal approximation with
    tie correction and continuity correction is used.
    ``p = min(1, 2 min(P(W <= w), P(W >= w)))``.
    """
    d = np.asarray(diffs, dtype=np.float64)
    w_plus, doubled = _signed_rank_statistic(d)
    m = doubled.size
    if m <= exact_limit:
        counts = _exact_signed_rank_counts(doubled)
        total = counts.sum()
        w2 = int(round(2.0 * w_plus))
        p_le = counts[: w2 + 1].sum() / total
        p_ge = counts[w2:].sum() / total
        p = min(1.0, 2.0 * min(p_le, p_ge))
        return w_plus, float(p)
    # Normal approximation: W+ is a sum of independently sign-flipped ranks,
    # so its null mean is sum(r)/2 and variance sum(r^2)/4 (tie-aware).
    ranks = doubled.astype(np.float64) / 2.0
    mean = ranks.sum() / 2.0
    var = np.sum(ranks ** 2) / 4.0
    z_num = w_plus - mean
    z = (z_num - 0.5 * np.sign(z_num)) / np.sqrt(var)
    p = 2.0 * sstats.norm.sf(abs(z))
    return w_plus, float(min(1.0, p))


def lilliefors_normality(x, n_replicates: int = LILLIEFORS_REPLICATES,
                         seed: int = 0) -> tuple[float, float]:
    """Lilliefors test for normality with a Monte Carlo null.

    The statistic is the Kolmogorov-Smirnov distance between the empirical
    CDF and a normal CDF with mean and standard deviation estimated from the
    sample. The null distribution is simulated with ``n_replicates`` seeded
    standard-normal samples of the same size; the p-value uses the
    ``(r + 1) / (N + 1)`` convention.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.size < 4:
        raise ValueError("need at least 4 observations for Lilliefors")
    if x.std(ddof=1) == 0.0:
        raise DataError("zero-variance sample: normality test undefined")
    d_obs = _lilliefors_statistic(np.sort(x)[np.newaxis, :])[0]
    rng = np.random.default_rng(seed)
    sims = np.sort(rng.standard_normal((n_replicates, x.size)), axis=1)
    d_null = _lilliefors_statistic(sims)
    p = (1.0 + np.count_nonzero(d_null >= d_obs)) / (n_replicates + 1.0)
    return float(d_obs), float(p)


def _lilliefors_statistic(sorted_rows: np.ndarray) -> np.ndarray:
    n = sorted_rows.shape[1]
    mean = sorted_rows.mean(axis=1, keepdims=True)
    sd = sorted_rows.std(axis=1, ddof=1, keepdims=True)
    cdf = sstats.norm.cdf((sorted_rows - mean) / sd)
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return np.maximum(grid_hi - cdf, cdf - grid_lo).max(axis=1)


def paired_tests(scores_a, scores_b, alpha: float = NORMALITY_ALPHA,
                 n_replicates: int = LILLIEFORS_REPLICATES,
                 seed: int = 0) -> PairedTestResult:
    """Run the full paired comparison between two score vectors.

    Differences ``a - b`` are tested for normality; the headline test is the
    paired t-test if Lilliefors p >= ``alpha``, else the exact Wilcoxon
    signed-rank test. Requires at least 5 pairs and non-constant
    differences.
    """
    d = _differences(scores_a, scores_b)
    if d.size < 5:
        raise ValueError(f"need at least 5 paired samples, got {d.size}")
    if d.std(ddof=1) == 0.0:
        raise DataError("zero-variance differences: paired tests undefined")
    _, lp = lilliefors_normality(d, n_replicates=n_replicates, seed=seed)
    t_stat, t_p = paired_t_test(d)
    w_stat, w_p = wilcoxon_signed_rank(d)
    if lp >= alpha:
        chosen, chosen_p = "paired_t", t_p
    else:
        chosen, chosen_p = "wilcoxon", w_p
    return PairedTestResult(
        lilliefors_p=lp, t_stat=t_stat, t_p=t_p,
        wilcoxon_stat=w_stat, wilcoxon_p=w_p,
        chosen_test=chosen, chosen_p=chosen_p,
    )
