"""Nonparametric test battery: Wilcoxon signed-rank, Mann-Whitney U, Cohen's
d, percentile-bootstrap CIs, and Holm-Bonferroni correction.

Small samples use exact null distributions (enumeration / convolution with
mid-ranked ties); larger samples fall back to tie-corrected normal
approximations. Everything is deterministic: the bootstrap draws from the
package's splitmix64 stream, never the global RNG.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DegenerateVariance, KeyMismatch
from .judge import CRITERIA, Scorecard
from .rng import counter_stream_u64, derive_seed

log = logging.getLogger(__name__)

EXACT_N_WILCOXON = 25
EXACT_COMBOS_MWU = 20_000

WILCOXON = "wilcoxon_signed_rank"
MANN_WHITNEY = "mann_whitney_u"


def _midranks(values: list[float]) -> list[float]:
    """Ranks 1..n with ties sharing their average rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2.0  # ranks are 1-based
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _tie_sizes(values: list[float]) -> list[int]:
    counts: dict[float, int] = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    return [t for t in counts.values() if t > 1]


def _norm_sf2(z: float) -> float:
    """Two-sided normal tail: P(|Z| >= |z|)."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def wilcoxon_signed_rank(a: list[float], b: list[float]) -> tuple[float, float]:
    """Paired two-sided test. Zero differences are dropped, ties mid-ranked.

    Returns (W, p) with W the positive-rank sum. Exact null by convolution
    over sign assignments when the effective n <= 25, otherwise a
    tie-corrected normal approximation. All-zero differences give p = 1.0 by
    convention (logged).
    """
    if len(a) != len(b) or not a:
        raise ValueError("wilcoxon requires equal-length nonempty samples")
    diffs = [x - y for x, y in zip(a, b) if x != y]
    if not diffs:
        log.info("wilcoxon: all differences zero; p = 1.0 by convention")
        return 0.0, 1.0
    n = len(diffs)
    absd = [abs(d) for d in diffs]
    ranks = _midranks(absd)
    w_pos = sum(r for d, r in zip(diffs, ranks) if d > 0)

    if n <= EXACT_N_WILCOXON:
        # Convolve over sign assignments using doubled (integer) ranks.
        r2 = [int(round(2 * r)) for r in ranks]
        total2 = sum(r2)
        counts = [0] * (total2 + 1)
        counts[0] = 1
        for r in r2:
            nxt = counts[:]
            for t in range(total2 - r + 1):
                if counts[t]:
                    nxt[t + r] += counts[t]
            counts = nxt
        t_obs = int(round(2 * w_pos))
        t_lo = min(t_obs, total2 - t_obs)
        t_hi = max(t_obs, total2 - t_obs)
        favorable = sum(counts[: t_lo + 1]) + sum(counts[t_hi:])
        p = favorable / float(2 ** n)
        return w_pos, min(p, 1.0)

    mu = n * (n + 1) / 4.0
    tie_term = sum(t ** 3 - t for t in _tie_sizes(absd)) / 48.0
    sigma2 = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
    if sigma2 <= 0:
        return w_pos, 1.0
    z = (w_pos - mu) / math.sqrt(sigma2)
    return w_pos, min(_norm_sf2(z), 1.0)


def _u_statistic(rank_sum_a: float, n_a: int) -> float:
    return rank_sum_a - n_a * (n_a + 1) / 2.0


def mann_whitney_u(a: list[float], b: list[float]) -> tuple[float, float]:
    """Unpaired two-sided test with mid-ranked ties.

    Returns (U, p) with U counted for sample `a`. Exact enumeration of group
    assignments when C(n_a + n_b, n_a) is small, tie-corrected normal
    approximation otherwise.
    """
    if not a or not b:
        raise ValueError("mann_whitney_u requires nonempty samples")
    n_a, n_b = len(a), len(b)
    pooled = list(a) + list(b)
    ranks = _midranks(pooled)
    u_obs = _u_statistic(sum(ranks[:n_a]), n_a)
    mu = n_a * n_b / 2.0

    if math.comb(n_a + n_b, n_a) <= EXACT_COMBOS_MWU:
        # Doubled ranks are integers, so the enumeration is exact arithmetic.
        r2 = [int(round(2 * r)) for r in ranks]
        u2_obs = sum(r2[:n_a]) - n_a * (n_a + 1)  # 2 * U for sample a
        mu2 = n_a * n_b  # 2 * mu
        margin2 = abs(u2_obs - mu2)
        favorable = 0
        total = 0
        for combo in combinations(range(n_a + n_b), n_a):
            u2 = sum(r2[i] for i in combo) - n_a * (n_a + 1)
            total += 1
            if abs(u2 - mu2) >= margin2:
                favorable += 1
        return u_obs, favorable / total

    n = n_a + n_b
    tie_term = sum(t ** 3 - t for t in _tie_sizes(pooled)) / (n * (n - 1))
    sigma2 = n_a * n_b / 12.0 * ((n + 1) - tie_term)
    if sigma2 <= 0:
        return u_obs, 1.0
    z = (u_obs - mu) / math.sqrt(sigma2)
    return u_obs, min(_norm_sf2(z), 1.0)


def cohens_d(a: list[float], b: list[float]) -> float:
    """(mean_a - mean_b) / pooled SD, pooled over (n-1)-weighted variances."""
    n_a, n_b = len(a), len(b)
    if n_a < 2 or n_b < 2:
        raise ValueError("cohens_d requires >= 2 observations per sample")
    mean_a = sum(a) / n_a
    mean_b = sum(b) / n_b
    var_a = sum((x - mean_a) ** 2 for x in a) / (n_a - 1)
    var_b = sum((x - mean_b) ** 2 for x in b) / (n_b - 1)
    pooled = ((n_a - 1) * var_a + (n_b - 1) * var_b) / (n_a + n_b - 2)
    if pooled == 0:
        if mean_a == mean_b:
            return 0.0
        raise DegenerateVariance("pooled SD is zero but means differ")
    return (mean_a - mean_b) / math.sqrt(pooled)


def bootstrap_ci_mean(sample: list[float], resamples: int = 10_000,
                      seed: int = 0) -> tuple[float, float]:
    """95% percentile bootstrap CI of the mean, deterministic per seed."""
    if not sample:
        raise ValueError("sample must be nonempty")
    data = np.asarray(sample, dtype=np.float64)
    n = data.size
    draws = counter_stream_u64(derive_seed(seed, 3), resamples * n)
    idx = (draws % np.uint64(n)).astype(np.intp)
    means = data[idx].reshape(resamples, n).mean(axis=1)
    lo, hi = np.percentile(means, [2.5, 97.5])
    return float(lo), float(hi)


def holm_bonferroni(p_values: list[float]) -> list[float]:
    """Step-down Holm correction, returned in input order and clipped at 1."""
    if any(p < 0 or p > 1 for p in p_values):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p_values)
    order = sorted(range(m), key=lambda i: p_values[i])
    corrected = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, p_values[i] * (m - rank)))
        corrected[i] = running
    return corrected


@dataclass(frozen=True)
class ComparisonResult:
    criterion: str
    mean_a: float
    mean_b: float
    ci_a: tuple[float, float]
    ci_b: tuple[float, float]
    delta: float
    d: float
    p_raw: float
    p_corrected: float
    test: str
    n_a: int
    n_b: int

    @property
    def stars(self) -> str:
        if self.p_corrected < 0.001:
            return "***"
        if self.p_corrected < 0.01:
            return "**"
        if self.p_corrected < 0.05:
            return "*"
        return ""


def _criterion_values(cards: list[Scorecard], criterion: str) -> list[float]:
    return [float(c.scores[criterion]) for c in cards]


def compare_conditions(cards_a: list[Scorecard], cards_b: list[Scorecard], paired: bool,
                       seed: int = 0, resamples: int = 10_000) -> list[ComparisonResult]:
    """Full five-criterion comparison: designated test, effect size, CIs, and
    Holm-Bonferroni correction across the five raw p-values."""
    if not cards_a or not cards_b:
        raise ValueError("card sets must be nonempty")
    if paired:
        keys_a = sorted(c.scenario_id for c in cards_a)
        keys_b = sorted(c.scenario_id for c in cards_b)
        if keys_a != keys_b:
            raise KeyMismatch("paired comparison requires identical scenario_id sets")
        cards_a = sorted(cards_a, key=lambda c: c.scenario_id)
        cards_b = sorted(cards_b, key=lambda c: c.scenario_id)

    rows = []
    raw_ps = []
    for ci, criterion in enumerate(CRITERIA):
        a = _criterion_values(cards_a, criterion)
        b = _criterion_values(cards_b, criterion)
        if paired:
            stat, p = wilcoxon_signed_rank(a, b)
            test = WILCOXON
        else:
            stat, p = mann_whitney_u(a, b)
            test = MANN_WHITNEY
        mean_a = sum(a) / len(a)
        mean_b = sum(b) / len(b)
        try:
            d = cohens_d(a, b)
        except DegenerateVariance:
            d = math.inf if mean_a > mean_b else -math.inf
        raw_ps.append(p)
        rows.append((criterion, a, b, mean_a, mean_b, d, test, ci))

    corrected = holm_bonferroni(raw_ps)
    results = []
    for (criterion, a, b, mean_a, mean_b, d, test, ci), p_raw, p_corr in zip(rows, raw_ps, corrected):
        results.append(ComparisonResult(
            criterion=criterion,
            mean_a=mean_a,
            mean_b=mean_b,
            ci_a=bootstrap_ci_mean(a, resamples, derive_seed(seed, 10, ci, 0)),
            ci_b=bootstrap_ci_mean(b, resamples, derive_seed(seed, 10, ci, 1)),
            delta=mean_a - mean_b,
            d=d,
            p_raw=p_raw,
            p_corrected=p_corr,
            test=test,
            n_a=len(a),
            n_b=len(b),
        ))
    return results


_CSV_FIELDS = ("criterion", "mean_a", "ci_a_lo", "ci_a_hi", "mean_b", "ci_b_lo", "ci_b_hi",
               "delta", "d", "p_raw", "p_corrected", "stars", "test", "n_a", "n_b")


def results_to_csv(results: list[ComparisonResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_FIELDS)
    for r in results:
        writer.writerow([
            r.criterion, f"{r.mean_a:.6g}", f"{r.ci_a[0]:.6g}", f"{r.ci_a[1]:.6g}",
            f"{r.mean_b:.6g}", f"{r.ci_b[0]:.6g}", f"{r.ci_b[1]:.6g}",
            f"{r.delta:.6g}", f"{r.d:.6g}", f"{r.p_raw:.6g}", f"{r.p_corrected:.6g}",
            r.stars, r.test, r.n_a, r.n_b,
        ])
    return buf.getvalue()


def results_to_json(results: list[ComparisonResult]) -> str:
    return json.dumps([
        {
            "criterion": r.criterion,
            "mean_a": r.mean_a,
            "mean_b": r.mean_b,
            "ci_a": list(r.ci_a),
            "ci_b": list(r.ci_b),
            "delta": r.delta,
            "d": r.d,
            "p_raw": r.p_raw,
            "p_corrected": r.p_corrected,
            "stars": r.stars,
            "test": r.test,
            "n_a": r.n_a,
            "n_b": r.n_b,
        }
        for r in results
    ], indent=2, sort_keys=True) + "\n"
