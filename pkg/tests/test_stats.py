import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hipmetrics.errors import (
    DomainError,
    InsufficientData,
    ShapeMismatch,
    UnknownLabel,
)
from hipmetrics.stats import (
    ABNORMAL,
    NORMAL,
    ConfusionMatrix,
    IccKind,
    RatingTable,
    confusion,
    f_cdf,
    f_quantile,
    icc_single,
    precision_recall_f1,
    screening_binarize,
)


def icc_oracle(values: np.ndarray, kind: IccKind) -> float:
    """Brute-force two-way ANOVA by explicit sums, kept independent of the
    vectorized implementation."""
    n, k = values.shape
    grand = sum(values[i][j] for i in range(n) for j in range(k)) / (n * k)
    row_means = [sum(values[i][j] for j in range(k)) / k for i in range(n)]
    col_means = [sum(values[i][j] for i in range(n)) / n for j in range(k)]
    ss_rows = k * sum((rm - grand) ** 2 for rm in row_means)
    ss_cols = n * sum((cm - grand) ** 2 for cm in col_means)
    ss_tot = sum((values[i][j] - grand) ** 2
                 for i in range(n) for j in range(k))
    ss_err = ss_tot - ss_rows - ss_cols
    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = ss_err / ((n - 1) * (k - 1))
    if kind is IccKind.CONSISTENCY:
        return (msr - mse) / (msr + (k - 1) * mse)
    return (msr - mse) / (msr + (k - 1) * mse + (k / n) * (msc - mse))


class TestIccSingle:
    def test_identical_raters_are_perfect(self):
        t = RatingTable(np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]))
        for kind in IccKind:
            res = icc_single(t, kind)
            assert res.icc == 1.0
            assert res.ci_low <= 1.0 <= res.ci_high

    def test_hand_anova_constant_offset(self):
        # rater B = rater A + 1 over cases {1,2,3}:
        # MSR = 2, MSC = 1.5, MSE = 0 -> consistency 1, agreement
        # 2 / (2 + (2/3) * 1.5) = 2/3
        t = RatingTable(np.array([[1.0, 2.0], [2.0, 3.0], [3.0, 4.0]]))
        cons = icc_single(t, IccKind.CONSISTENCY)
        agre = icc_single(t, IccKind.ABSOLUTE_AGREEMENT)
        assert cons.icc == 1.0
        assert abs(agre.icc - 2.0 / 3.0) < 1e-9
        assert agre.ci_low <= agre.icc <= agre.ci_high

    def test_row_permutation_invariance(self):
        rng = np.random.default_rng(0)
        values = rng.normal(10, 3, size=(12, 3))
        perm = rng.permutation(12)
        for kind in IccKind:
            a = icc_single(RatingTable(values), kind).icc
            b = icc_single(RatingTable(values[perm]), kind).icc
            assert abs(a - b) < 1e-12

    def test_all_equal_convention(self):
        t = RatingTable(np.full((4, 2), 7.0))
        for kind in IccKind:
            res = icc_single(t, kind)
            assert (res.icc, res.ci_low, res.ci_high) == (1.0, 1.0, 1.0)

    def test_consistency_invariant_under_column_shift(self):
        rng = np.random.default_rng(1)
        values = rng.normal(0, 2, size=(10, 2))
        shifted = values.copy()
        shifted[:, 1] += 5.0
        a = icc_single(RatingTable(values), IccKind.CONSISTENCY).icc
        b = icc_single(RatingTable(shifted), IccKind.CONSISTENCY).icc
        assert abs(a - b) < 1e-9

    def test_agreement_decreases_under_column_shift(self):
        rng = np.random.default_rng(2)
        values = rng.normal(0, 2, size=(10, 2))
        shifted = values.copy()
        shifted[:, 1] += 5.0
        a = icc_single(RatingTable(values), IccKind.ABSOLUTE_AGREEMENT).icc
        b = icc_single(RatingTable(shifted), IccKind.ABSOLUTE_AGREEMENT).icc
        assert b < a

    @given(st.integers(3, 30), st.integers(2, 4),
           st.integers(0, 10_000), st.floats(0.1, 100),
           st.floats(-100, 100))
    @settings(max_examples=60, deadline=None)
    def test_matches_oracle_and_scale_invariance(self, n, k, seed, scale, shift):
        rng = np.random.default_rng(seed)
        values = rng.normal(0, 1, size=(n, k))
        if np.ptp(values) < 1e-9:
            return
        for kind in IccKind:
            got = icc_single(RatingTable(values), kind).icc
            want = icc_oracle(values, kind)
            assert abs(got - want) < 1e-9
            rescaled = icc_single(RatingTable(values * scale), kind).icc
            assert abs(rescaled - got) < 1e-7

    def test_too_small_table_rejected(self):
        with pytest.raises(InsufficientData):
            RatingTable(np.array([[1.0, 2.0], [2.0, 3.0]]))


class TestFQuantile:
    def test_median_is_one_for_equal_df(self):
        for d in (1, 2, 5, 10, 100):
            assert abs(f_quantile(0.5, d, d) - 1.0) < 1e-9

    def test_round_trip_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            p = float(rng.uniform(0.01, 0.99))
            d1 = float(rng.integers(1, 60))
            d2 = float(rng.integers(1, 60))
            x = f_quantile(p, d1, d2)
            assert abs(f_cdf(x, d1, d2) - p) < 1e-8

    def test_against_trapezoid_oracle(self):
        # F(2, 2) density integrated numerically; analytic cdf is x/(1+x)
        x = f_quantile(0.975, 2, 2)

        def density(t):
            return 1.0 / (1.0 + t) ** 2

        grid = np.linspace(0.0, x, 400_001)
        integral = float(np.trapezoid(density(grid), grid))
        assert abs(integral - 0.975) < 1e-6
        assert abs(x - 39.0) < 1e-6  # cdf = x / (1 + x) inverts to p/(1-p)

    def test_strictly_increasing_in_p(self):
        qs = [f_quantile(p, 5, 9) for p in np.linspace(0.05, 0.95, 19)]
        assert all(b > a for a, b in zip(qs, qs[1:]))

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            f_quantile(0.0, 2, 2)
        with pytest.raises(DomainError):
            f_quantile(0.5, 0.5, 2)
        with pytest.raises(DomainError):
            f_cdf(1.0, 2, 0)


class TestConfusion:
    def test_diagonal_for_perfect_prediction(self):
        cm = confusion([1, 2, 3, 2], [1, 2, 3, 2], (1, 2, 3))
        assert np.array_equal(cm.counts, np.diag([1, 2, 1]))

    def test_single_off_diagonal(self):
        cm = confusion([2], [1], (1, 2))
        assert cm.counts[0][1] == 1 and cm.total() == 1

    def test_empty_inputs_zero_matrix(self):
        cm = confusion([], [], (1, 2, 3, 4))
        assert cm.total() == 0

    def test_unknown_label(self):
        with pytest.raises(UnknownLabel):
            confusion([5], [1], (1, 2))

    def test_row_sums_match_truth_counts(self):
        rng = np.random.default_rng(4)
        truth = rng.integers(1, 5, 60).tolist()
        pred = rng.integers(1, 5, 60).tolist()
        cm = confusion(pred, truth, (1, 2, 3, 4))
        for i, cls in enumerate((1, 2, 3, 4)):
            assert cm.counts[i].sum() == truth.count(cls)


class TestPrecisionRecallF1:
    def test_perfect_binary(self):
        cm = confusion([NORMAL, ABNORMAL], [NORMAL, ABNORMAL],
                       (NORMAL, ABNORMAL))
        m = precision_recall_f1(cm, "binary_positive", positive=ABNORMAL)
        assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)

    def test_hand_counts(self):
        # TP 2, FP 1, FN 1, TN 6
        cm = ConfusionMatrix(("neg", "pos"),
                             np.array([[6, 1], [1, 2]]))
        m = precision_recall_f1(cm, "binary_positive", positive="pos")
        assert abs(m.precision - 2 / 3) < 1e-12
        assert abs(m.recall - 2 / 3) < 1e-12
        assert abs(m.f1 - 2 / 3) < 1e-12

    def test_no_predicted_positives_flags_zero_division(self):
        cm = ConfusionMatrix(("neg", "pos"), np.array([[5, 0], [2, 0]]))
        m = precision_recall_f1(cm, "binary_positive", positive="pos")
        assert m.precision == 0.0 and m.zero_division

    def test_macro_relabel_invariance(self):
        rng = np.random.default_rng(6)
        truth = rng.integers(1, 5, 80).tolist()
        pred = rng.integers(1, 5, 80).tolist()
        cm = confusion(pred, truth, (1, 2, 3, 4))
        relabel = {1: "d", 2: "c", 3: "b", 4: "a"}
        cm2 = confusion([relabel[p] for p in pred], [relabel[t] for t in truth],
                        ("d", "c", "b", "a"))
        a = precision_recall_f1(cm, "macro")
        b = precision_recall_f1(cm2, "macro")
        assert abs(a.f1 - b.f1) < 1e-12

    def test_binary_needs_2x2(self):
        cm = confusion([1, 2, 3], [1, 2, 3], (1, 2, 3))
        with pytest.raises(ShapeMismatch):
            precision_recall_f1(cm, "binary_positive", positive=1)


class TestScreeningBinarize:
    def test_grade1_ok_is_normal(self):
        assert screening_binarize([(1, 1)]) == [NORMAL]

    def test_status0_is_abnormal(self):
        assert screening_binarize([(None, 0)]) == [ABNORMAL]

    def test_high_grade_is_abnormal(self):
        assert screening_binarize([(3, 1)]) == [ABNORMAL]

    def test_mixed_batch(self):
        labels = screening_binarize(
            [(1, 1), (2, 1), (None, 0), (4, 1), (1, 1)])
        assert labels == [NORMAL, ABNORMAL, ABNORMAL, ABNORMAL, NORMAL]

    def test_bad_grade_rejected(self):
        with pytest.raises(UnknownLabel):
            screening_binarize([(7, 1)])
