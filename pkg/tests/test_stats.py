import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowcompile.errors import DegenerateVariance, KeyMismatch
from flowcompile.judge import CRITERIA, Scorecard
from flowcompile.stats import (
    bootstrap_ci_mean,
    cohens_d,
    compare_conditions,
    holm_bonferroni,
    mann_whitney_u,
    results_to_csv,
    results_to_json,
    wilcoxon_signed_rank,
)

from conftest import golden_path
from oracles import mwu_exact, ref_cohens_d, ref_holm, wilcoxon_exact

scores = st.lists(st.integers(min_value=1, max_value=5), min_size=2, max_size=10)


def test_wilcoxon_spec_example():
    # Six paired differences, all -1: T = 0, exact two-sided p = 2/64.
    a = [1, 1, 1, 1, 1, 1]
    b = [2, 2, 2, 2, 2, 2]
    w, p = wilcoxon_signed_rank(a, b)
    assert w == 0.0
    assert p == pytest.approx(0.03125, abs=1e-12)


def test_wilcoxon_all_zero_diffs():
    w, p = wilcoxon_signed_rank([3, 3], [3, 3])
    assert (w, p) == (0.0, 1.0)


def test_wilcoxon_zero_diffs_dropped():
    # The tied pair contributes nothing; result equals the 6-pair example.
    a = [1, 1, 1, 1, 1, 1, 9]
    b = [2, 2, 2, 2, 2, 2, 9]
    _, p = wilcoxon_signed_rank(a, b)
    assert p == pytest.approx(0.03125, abs=1e-12)


def test_mwu_spec_example():
    u, p = mann_whitney_u([1, 2], [3, 4])
    assert u == 0.0
    assert p == pytest.approx(2 / 6, abs=1e-12)


def test_mwu_symmetry():
    a, b = [1, 2, 2, 5], [3, 3, 4]
    _, p_ab = mann_whitney_u(a, b)
    _, p_ba = mann_whitney_u(b, a)
    assert p_ab == pytest.approx(p_ba, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(scores, scores)
def test_wilcoxon_matches_oracle(a, b):
    n = min(len(a), len(b))
    a, b = a[:n], b[:n]
    w_impl, p_impl = wilcoxon_signed_rank(a, b)
    w_ref, p_ref = wilcoxon_exact(a, b)
    assert w_impl == pytest.approx(w_ref, abs=1e-12)
    assert p_impl == pytest.approx(p_ref, abs=1e-9)


small = st.lists(st.integers(min_value=1, max_value=5), min_size=2, max_size=7)


@settings(max_examples=150, deadline=None)
@given(small, small)
def test_mwu_matches_oracle(a, b):
    u_impl, p_impl = mann_whitney_u(a, b)
    u_ref, p_ref = mwu_exact(a, b)
    assert u_impl == pytest.approx(u_ref, abs=1e-12)
    assert p_impl == pytest.approx(p_ref, abs=1e-9)


def test_wilcoxon_large_n_normal_branch():
    a = list(range(60))
    b = [x + (1 if x % 3 else -2) for x in a]
    _, p = wilcoxon_signed_rank(a, b)
    assert 0.0 <= p <= 1.0


def test_mwu_large_n_normal_branch():
    a = list(range(40))
    b = [x + 15 for x in range(40)]
    _, p = mann_whitney_u(a, b)
    assert 0.0 < p < 0.05


def test_cohens_d_hand_value():
    a, b = [1.0, 2.0, 3.0], [2.0, 4.0, 6.0]
    assert cohens_d(a, b) == pytest.approx(ref_cohens_d(a, b), abs=1e-12)


def test_cohens_d_degenerate():
    assert cohens_d([2, 2, 2], [2, 2, 2]) == 0.0
    with pytest.raises(DegenerateVariance):
        cohens_d([2, 2, 2], [3, 3, 3])


_vals = st.lists(st.integers(min_value=-50, max_value=50).map(float),
                 min_size=2, max_size=12)


@settings(max_examples=100, deadline=None)
@given(_vals, _vals)
def test_cohens_d_matches_oracle(a, b):
    try:
        got = cohens_d(a, b)
    except DegenerateVariance:
        return
    if got == 0.0 and len(set(a)) == 1 and len(set(b)) == 1:
        return
    assert got == pytest.approx(ref_cohens_d(a, b), abs=1e-9, rel=1e-9)


def test_holm_example_vectors():
    assert holm_bonferroni([0.01, 1.0, 1.0, 1.0, 1.0]) == [0.05, 1.0, 1.0, 1.0, 1.0]
    assert holm_bonferroni([0.05] * 5) == [0.25] * 5


@given(st.lists(st.floats(min_value=0, max_value=1), min_size=1, max_size=10))
def test_holm_properties(ps):
    corrected = holm_bonferroni(ps)
    assert corrected == ref_holm(ps)
    for raw, corr in zip(ps, corrected):
        assert corr >= raw  # dominance
        assert corr <= 1.0
    order = sorted(range(len(ps)), key=lambda i: ps[i])
    ranked = [corrected[i] for i in order]
    assert ranked == sorted(ranked)  # monotone in sorted order


def test_holm_rejects_bad_p():
    with pytest.raises(ValueError):
        holm_bonferroni([0.5, 1.5])


def test_bootstrap_deterministic():
    sample = [1.0, 2.0, 3.0, 4.0, 10.0]
    assert bootstrap_ci_mean(sample, 2000, seed=5) == bootstrap_ci_mean(sample, 2000, seed=5)
    assert bootstrap_ci_mean(sample, 2000, seed=5) != bootstrap_ci_mean(sample, 2000, seed=6)


def test_bootstrap_constant_sample_degenerate():
    lo, hi = bootstrap_ci_mean([4.0] * 8, 500, seed=0)
    assert lo == hi == 4.0


def test_bootstrap_contains_mean_for_symmetric_sample():
    sample = [float(x) for x in range(1, 21)]
    lo, hi = bootstrap_ci_mean(sample, 5000, seed=1)
    assert lo < sum(sample) / len(sample) < hi


def test_bootstrap_golden_values():
    frozen = json.loads(open(golden_path("bootstrap_ci.json"), encoding="utf-8").read())
    for case in frozen:
        lo, hi = bootstrap_ci_mean(case["sample"], case["resamples"], case["seed"])
        assert [lo, hi] == case["ci"]


def make_cards(condition, offset=0, n=12):
    cards = []
    for i in range(n):
        base = 2 + ((i + offset) % 3)
        scores = {
            "Task Success": min(5, base + offset),
            "Information Accuracy": base,
            "Consistency": min(5, base + 1),
            "Graceful Handling": 3,
            "Naturalness": max(1, base - 1),
        }
        cards.append(Scorecard(i, condition, "j", scores, "", True))
    return cards


def test_compare_conditions_paired():
    a = make_cards("x", offset=1)
    b = make_cards("y", offset=0)
    results = compare_conditions(a, b, paired=True, seed=3, resamples=500)
    assert [r.criterion for r in results] == list(CRITERIA)
    for r in results:
        assert r.test == "wilcoxon_signed_rank"
        assert r.n_a == r.n_b == 12
        assert r.p_corrected >= r.p_raw
        assert r.delta == pytest.approx(r.mean_a - r.mean_b)
        assert r.ci_a[0] <= r.mean_a <= r.ci_a[1]
    again = compare_conditions(a, b, paired=True, seed=3, resamples=500)
    assert results == again


def test_compare_conditions_unpaired_test_choice():
    a = make_cards("x", offset=1, n=8)
    b = make_cards("y", offset=0, n=10)
    results = compare_conditions(a, b, paired=False, seed=0, resamples=200)
    assert all(r.test == "mann_whitney_u" for r in results)


def test_compare_conditions_key_mismatch():
    a = make_cards("x", n=5)
    b = make_cards("y", n=6)
    with pytest.raises(KeyMismatch):
        compare_conditions(a, b, paired=True)


def test_compare_conditions_degenerate_d_is_inf():
    base = dict.fromkeys(CRITERIA, 3)
    a = [Scorecard(i, "x", "j", dict(base, **{"Task Success": 4}), "", True)
         for i in range(4)]
    b = [Scorecard(i, "y", "j", dict(base), "", True) for i in range(4)]
    results = compare_conditions(a, b, paired=True, resamples=100)
    ts = next(r for r in results if r.criterion == "Task Success")
    assert math.isinf(ts.d) and ts.d > 0


def test_stars_thresholds():
    a = make_cards("x", offset=1)
    b = make_cards("y", offset=0)
    r = compare_conditions(a, b, paired=True, resamples=100)[0]
    for p, expected in ((0.0005, "***"), (0.005, "**"), (0.04, "*"), (0.2, "")):
        from dataclasses import replace
        assert replace(r, p_corrected=p).stars == expected


def test_results_serialization_and_golden():
    a = make_cards("x", offset=1)
    b = make_cards("y", offset=0)
    results = compare_conditions(a, b, paired=True, seed=42, resamples=1000)
    csv_text = results_to_csv(results)
    assert csv_text.splitlines()[0].startswith("criterion,mean_a")
    assert len(csv_text.splitlines()) == 6
    parsed = json.loads(results_to_json(results))
    assert len(parsed) == 5
    frozen = open(golden_path("comparison.csv"), encoding="utf-8").read()
    assert csv_text == frozen
