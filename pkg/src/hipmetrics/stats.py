"""Reliability and classification statistics for validation runs.

Implements two-way single-measure intraclass correlation coefficients
(McGraw & Wong 1996 definitions: consistency ICC(C,1) and absolute
agreement ICC(A,1)) with F-based 95% confidence intervals, the F-quantile
machinery behind those intervals, confusion matrices, precision/recall/F1,
and the screening rule that maps processing errors to the abnormal class.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import betainc

from .errors import (
    DegenerateVariance,
    DomainError,
    InsufficientData,
    ShapeMismatch,
    UnknownLabel,
)

_EPS = 1e-12


class IccKind(str, Enum):
    ABSOLUTE_AGREEMENT = "absolute_agreement"
    CONSISTENCY = "consistency"


@dataclass(frozen=True)
class RatingTable:
    """n cases x k raters matrix of measurements in the same unit.

    Cases with a processing error carry no measurement and must be excluded
    before building the table; report their count separately.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 2:
            raise ValueError("rating table must be 2D (cases x raters)")
        n, k = arr.shape
        if n < 3 or k < 2:
            raise InsufficientData(f"need n >= 3 cases and k >= 2 raters, got {n}x{k}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("rating table may not contain missing entries")
        object.__setattr__(self, "values", arr)

    @property
    def n_cases(self) -> int:
        return self.values.shape[0]

    @property
    def n_raters(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class IccResult:
    icc: float
    ci_low: float
    ci_high: float
    kind: IccKind
    alpha_level: float = 0.05


def f_cdf(x: float, d1: float, d2: float) -> float:
    """CDF of the F distribution via the regularized incomplete beta function."""
    if d1 < 1 or d2 < 1:
        raise DomainError("degrees of freedom must be >= 1")
    if x <= 0:
        return 0.0
    z = d1 * x / (d1 * x + d2)
    return float(betainc(d1 / 2.0, d2 / 2.0, z))


def f_quantile(p: float, d1: float, d2: float) -> float:
    """Inverse F CDF by monotone bracketing and bisection.

    Bisection runs on the regularized-incomplete-beta CDF to a relative
    tolerance of 1e-10, which is ample for confidence-interval work and is
    independent of any library quantile routine.
    """
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie strictly between 0 and 1")
    if d1 < 1 or d2 < 1:
        raise DomainError("degrees of freedom must be >= 1")
    lo, hi = 0.0, 1.0
    while f_cdf(hi, d1, d2) < p:
        hi *= 2.0
        if hi > 1e300:
            raise DomainError("quantile bracket overflow")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f_cdf(mid, d1, d2) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * max(1.0, lo):
            break
    return 0.5 * (lo + hi)


def _anova_mean_squares(values: np.ndarray):
    """Two-way ANOVA mean squares: rows (cases), columns (raters), residual."""
    n, k = values.shape
    grand = values.mean()
    row_means = values.mean(axis=1)
    col_means = values.mean(axis=0)
    ss_rows = k * float(np.sum((row_means - grand) ** 2))
    ss_cols = n * float(np.sum((col_means - grand) ** 2))
    ss_total = float(np.sum((values - grand) ** 2))
    ss_err = ss_total - ss_rows - ss_cols
    msr = ss_rows / (n - 1)
    msc = ss_cols / (k - 1)
    mse = max(ss_err, 0.0) / ((n - 1) * (k - 1))
    return msr, msc, mse


def icc_single(table: RatingTable, kind: IccKind,
               alpha_level: float = 0.05) -> IccResult:
    """Two-way single-measure ICC with an F-based confidence interval.

    consistency:        (MSR - MSE) / (MSR + (k-1) MSE)
    absolute agreement: (MSR - MSE) / (MSR + (k-1) MSE + (k/n)(MSC - MSE))

    The consistency interval is exact; agreement uses the Satterthwaite-style
    degrees-of-freedom approximation. A table whose entries are all equal
    returns icc = 1 with interval [1, 1] by convention; any other zero
    denominator raises DegenerateVariance.
    """
    kind = IccKind(kind)
    if not 0.0 < alpha_level < 1.0:
        raise DomainError("alpha_level must lie strictly between 0 and 1")
    values = table.values
    n, k = values.shape
    msr, msc, mse = _anova_mean_squares(values)
    scale = float(np.max(np.abs(values - values.mean()))) ** 2

    if scale < _EPS:  # all entries equal
        return IccResult(1.0, 1.0, 1.0, kind, alpha_level)

    if kind is IccKind.CONSISTENCY:
        denom = msr + (k - 1) * mse
        if denom <= _EPS * scale:
            raise DegenerateVariance("zero consistency denominator")
        icc = (msr - mse) / denom
        df1, df2 = n - 1, (n - 1) * (k - 1)
        if mse <= _EPS * scale:
            return IccResult(icc, icc, icc, kind, alpha_level)
        fobs = msr / mse
        fl = fobs / f_quantile(1 - alpha_level / 2, df1, df2)
        fu = fobs * f_quantile(1 - alpha_level / 2, df2, df1)
        lo = (fl - 1) / (fl + (k - 1))
        hi = (fu - 1) / (fu + (k - 1))
        return IccResult(icc, min(lo, icc), max(hi, icc), kind, alpha_level)

    denom = msr + (k - 1) * mse + (k / n) * (msc - mse)
    if denom <= _EPS * scale:
        raise DegenerateVariance("zero agreement denominator")
    icc = (msr - mse) / denom
    if mse <= _EPS * scale:
        # residual-free table: Satterthwaite df collapse to k - 1
        v = float(k - 1)
        fl = f_quantile(1 - alpha_level / 2, n - 1, v)
        fu = f_quantile(1 - alpha_level / 2, v, n - 1)
        lo = n * msr / (fl * k * msc + n * msr) if msc > 0 else icc
        hi = n * fu * msr / (k * msc + n * fu * msr) if msc > 0 else icc
        return IccResult(icc, min(lo, icc), max(hi, icc), kind, alpha_level)
    fj = msc / mse
    vn = (k - 1) * (n - 1) * (k * icc * fj + n * (1 + (k - 1) * icc) - k * icc) ** 2
    vd = (n - 1) * k ** 2 * icc ** 2 * fj ** 2 \
        + (n * (1 + (k - 1) * icc) - k * icc) ** 2
    v = max(vn / vd, 1.0)
    fl = f_quantile(1 - alpha_level / 2, n - 1, v)
    fu = f_quantile(1 - alpha_level / 2, v, n - 1)
    lo = (n * (msr - fl * mse)) / (
        fl * (k * msc + (k * n - k - n) * mse) + n * msr)
    hi = (n * (fu * msr - mse)) / (
        k * msc + (k * n - k - n) * mse + n * fu * msr)
    return IccResult(icc, min(lo, icc), max(hi, icc), kind, alpha_level)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix; rows are truth, columns are prediction."""

    classes: tuple
    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=int)
        c = len(self.classes)
        if arr.shape != (c, c):
            raise ShapeMismatch("counts must be square over the class list")
        if np.any(arr < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "counts", arr)

    def total(self) -> int:
        return int(self.counts.sum())


def confusion(pred, truth, classes) -> ConfusionMatrix:
    """Count matrix with counts[i][j] = #(truth == classes[i] and pred == classes[j])."""
    pred, truth = list(pred), list(truth)
    if len(pred) != len(truth):
        raise ShapeMismatch("pred and truth must have equal length")
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(index), len(index)), dtype=int)
    for p, t in zip(pred, truth):
        if t not in index:
            raise UnknownLabel(f"truth label {t!r} not in classes")
        if p not in index:
            raise UnknownLabel(f"predicted label {p!r} not in classes")
        counts[index[t], index[p]] += 1
    return ConfusionMatrix(tuple(classes), counts)


@dataclass(frozen=True)
class MetricsTriple:
    precision: float
    recall: float
    f1: float
    zero_division: bool = False


def precision_recall_f1(matrix: ConfusionMatrix, averaging: str = "macro",
                        positive=None) -> MetricsTriple:
    """Precision, recall and F1 from a confusion matrix.

    ``binary_positive`` treats the matrix as 2x2 with a declared positive
    class; ``macro`` takes the unweighted mean of one-vs-rest scores. A zero
    denominator contributes 0 and raises the zero_division flag instead of
    failing, so degenerate folds keep batch reports alive.
    """
    counts = matrix.counts
    if averaging == "binary_positive":
        if counts.shape != (2, 2):
            raise ShapeMismatch("binary_positive needs a 2x2 matrix")
        if positive is None:
            raise ValueError("binary_positive needs a declared positive class")
        if positive not in matrix.classes:
            raise UnknownLabel(f"{positive!r} not in classes")
        i = matrix.classes.index(positive)
        tp = counts[i, i]
        fp = counts[1 - i, i]
        fn = counts[i, 1 - i]
        p, pz = _safe_div(tp, tp + fp)
        r, rz = _safe_div(tp, tp + fn)
        f1, fz = _safe_div(2 * p * r, p + r)
        return MetricsTriple(p, r, f1, pz or rz or fz)
    if averaging == "macro":
        ps, rs, fs, flag = [], [], [], False
        for i in range(counts.shape[0]):
            tp = counts[i, i]
            fp = counts[:, i].sum() - tp
            fn = counts[i, :].sum() - tp
            p, pz = _safe_div(tp, tp + fp)
            r, rz = _safe_div(tp, tp + fn)
            f1, fz = _safe_div(2 * p * r, p + r)
            flag = flag or pz or rz or fz
            ps.append(p)
            rs.append(r)
            fs.append(f1)
        return MetricsTriple(float(np.mean(ps)), float(np.mean(rs)),
                             float(np.mean(fs)), flag)
    raise ValueError(f"unknown averaging {averaging!r}")


def _safe_div(num, den):
    if den == 0:
        return 0.0, True
    return float(num) / float(den), False


NORMAL = "normal"
ABNORMAL = "abnormal"


def screening_binarize(grades_with_status) -> list[str]:
    """Map (ihdi_grade, status) pairs onto the normal/abnormal screen.

    A status-0 case is a processing error: the system could not confirm a
    normal hip, so it counts as abnormal. Grade 1 is normal; grades 2-4 are
    abnormal.
    """
    out = []
    for grade, status in grades_with_status:
        if status == 0:
            out.append(ABNORMAL)
        elif grade == 1:
            out.append(NORMAL)
        elif grade in (2, 3, 4):
            out.append(ABNORMAL)
        else:
            raise UnknownLabel(f"grade {grade!r} with status 1")
    return out
