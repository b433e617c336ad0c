"""Agreement and concordance statistics for paired score series and for
paired categorical labels.

Conventions, fixed by the tests:

* Pearson/Spearman and confidence intervals use sample moments (n-1).
* The concordance correlation coefficient uses population moments (n),
  following Lin (1989), with its confidence interval obtained by a Fisher
  z-transform of the point estimate and Lin's asymptotic standard error.
* Mean confidence intervals use Student t quantiles; the interval for the
  mean difference of a paired series is built from the per-pair
  differences (the paired design).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm as _norm, t as _t

from .errors import InputError, UndefinedStatisticError

__all__ = [
    "PairedSeries",
    "IntervalEstimate",
    "ContingencyTable",
    "PairedMeans",
    "LinearFit",
    "OffDiagonal",
    "pearson",
    "spearman",
    "average_ranks",
    "lin_ccc",
    "interpret_ccc",
    "paired_mean_ci",
    "ols_fit",
    "contingency",
    "agreement_share",
    "off_by_more_than_one",
    "cohen_kappa",
    "interpret_kappa",
    "t_quantile",
    "normal_quantile",
]


@dataclass(frozen=True)
class PairedSeries:
    """Two parallel score series over the same items, all values present
    (filtering of undefined scores happens upstream)."""

    x: tuple[float, ...]
    y: tuple[float, ...]
    ids: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.x) != len(self.y):
            raise InputError(f"series length mismatch: {len(self.x)} vs {len(self.y)}")
        if not self.ids:
            object.__setattr__(self, "ids", tuple(str(i) for i in range(len(self.x))))
        elif len(self.ids) != len(self.x):
            raise InputError(f"ids length mismatch: {len(self.ids)} vs {len(self.x)}")

    def __len__(self):
        return len(self.x)


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    lower: float
    upper: float
    level: float = 0.95

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise InputError(f"confidence level must be in (0,1), got {self.level}")
        if not self.lower <= self.point <= self.upper:
            raise InputError(
                f"interval invariant violated: {self.lower} <= {self.point} <= {self.upper}"
            )


@dataclass(frozen=True)
class ContingencyTable:
    """k x k cross-tabulation; rows are the classes of source A, columns the
    classes of source B."""

    counts: tuple[tuple[int, ...], ...]
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    def __post_init__(self):
        k = len(self.counts)
        if any(len(row) != k for row in self.counts):
            raise InputError("contingency table must be square")
        if len(self.row_labels) != k or len(self.col_labels) != k:
            raise InputError("label lists must match table size")
        if any(c < 0 for row in self.counts for c in row):
            raise InputError("contingency counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


@dataclass(frozen=True)
class PairedMeans:
    mean_x: IntervalEstimate
    mean_y: IntervalEstimate
    diff: IntervalEstimate


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float


@dataclass(frozen=True)
class OffDiagonal:
    count: int
    share: float


def t_quantile(p: float, df: int) -> float:
    """Student t quantile (inverse CDF); e.g. t_quantile(0.975, 10) = 2.2281."""
    return float(_t.ppf(p, df))


def normal_quantile(p: float) -> float:
    return float(_norm.ppf(p))


def _as_arrays(s: PairedSeries) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float)


def _check_variance(values: np.ndarray, name: str) -> None:
    if np.all(values == values[0]):
        raise UndefinedStatisticError(f"series {name} has zero variance")


def pearson(s: PairedSeries) -> float:
    """Sample Pearson correlation of the two series."""
    if len(s) < 2:
        raise UndefinedStatisticError(f"pearson needs n >= 2, got n={len(s)}")
    x, y = _as_arrays(s)
    _check_variance(x, "x")
    _check_variance(y, "y")
    dx = x - x.mean()
    dy = y - y.mean()
    return float(np.dot(dx, dy) / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy)))


def average_ranks(values: Sequence[float]) -> list[float]:
    """Ranks 1..n with ties receiving the mean of the ranks they span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = ((i + 1) + (j + 1)) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def spearman(s: PairedSeries) -> float:
    """Spearman rank correlation: Pearson correlation of the average-ranked
    series."""
    if len(s) < 2:
        raise UndefinedStatisticError(f"spearman needs n >= 2, got n={len(s)}")
    if all(v == s.x[0] for v in s.x):
        raise UndefinedStatisticError("all values tied in series x")
    if all(v == s.y[0] for v in s.y):
        raise UndefinedStatisticError("all values tied in series y")
    return pearson(PairedSeries(x=tuple(average_ranks(s.x)), y=tuple(average_ranks(s.y))))


def lin_ccc(s: PairedSeries, level: float = 0.95) -> IntervalEstimate:
    """Concordance correlation coefficient with confidence interval.

    Point estimate (population moments, divide by n):

        ccc = 2*s_xy / (s_x^2 + s_y^2 + (mean_x - mean_y)^2)

    The CI applies the normal quantile to the Fisher z-transform of the
    point estimate with Lin's (1989) asymptotic standard error, then
    back-transforms the endpoints.
    """
    n = len(s)
    if n < 3:
        raise UndefinedStatisticError(f"lin_ccc needs n >= 3, got n={n}")
    x, y = _as_arrays(s)
    _check_variance(x, "x")
    _check_variance(y, "y")

    mx, my = x.mean(), y.mean()
    sx2 = float(np.mean((x - mx) ** 2))
    sy2 = float(np.mean((y - my) ** 2))
    sxy = float(np.mean((x - mx) * (y - my)))
    ccc = 2 * sxy / (sx2 + sy2 + (mx - my) ** 2)

    if 1 - ccc * ccc < 1e-15:
        # perfect (anti-)concordance: z-transform degenerates, interval collapses
        return IntervalEstimate(point=ccc, lower=ccc, upper=ccc, level=level)

    r = pearson(s)
    u2 = (mx - my) ** 2 / math.sqrt(sx2 * sy2)
    one_m = 1 - ccc * ccc
    if r == 0:
        se_z = math.inf
    else:
        var_z = (
            (1 - r * r) * ccc * ccc / (one_m * r * r)
            + 2 * ccc**3 * (1 - ccc) * u2 / (r * one_m**2)
            - ccc**4 * u2 * u2 / (2 * r * r * one_m**2)
        ) / (n - 2)
        se_z = math.sqrt(max(var_z, 0.0))
    q = normal_quantile((1 + level) / 2)
    z = math.atanh(ccc)
    return IntervalEstimate(
        point=ccc,
        lower=math.tanh(z - q * se_z),
        upper=math.tanh(z + q * se_z),
        level=level,
    )


_CCC_BANDS = [
    (0.20, "poor"),
    (0.40, "fair"),
    (0.60, "moderate"),
    (0.80, "strong"),
    (1.00, "almost perfect"),
]

_KAPPA_BANDS = [
    (0.00, "poor"),  # below zero
    (0.20, "slight"),
    (0.40, "fair"),
    (0.60, "moderate"),
    (0.80, "substantial"),
    (1.00, "almost perfect"),
]


def interpret_ccc(value: float) -> str:
    """Agreement band of a concordance coefficient: <=0.20 poor, then fair /
    moderate / strong / almost perfect in 0.20-wide steps, upper bounds
    inclusive."""
    if not -1 <= value <= 1:
        raise InputError(f"concordance value out of [-1, 1]: {value}")
    for bound, name in _CCC_BANDS:
        if value <= bound:
            return name
    return _CCC_BANDS[-1][1]


def interpret_kappa(value: float) -> str:
    """Landis-Koch band of a kappa coefficient: <0 poor, then slight / fair /
    moderate / substantial / almost perfect, upper bounds inclusive."""
    if not -1 <= value <= 1:
        raise InputError(f"kappa value out of [-1, 1]: {value}")
    if value < 0:
        return "poor"
    for bound, name in _KAPPA_BANDS[1:]:
        if value <= bound:
            return name
    return _KAPPA_BANDS[-1][1]


def paired_mean_ci(s: PairedSeries, level: float = 0.95) -> PairedMeans:
    """Mean of each series and of the per-pair differences, with t-based
    confidence intervals m +- t_{(1+level)/2, n-1} * sd/sqrt(n).

    Using the differences x_i - y_i for the third interval is the paired
    design: positive correlation between the series shrinks sd of the
    differences and with it the interval.
    """
    n = len(s)
    if n < 2:
        raise UndefinedStatisticError(f"paired_mean_ci needs n >= 2, got n={n}")
    x, y = _as_arrays(s)
    d = x - y
    q = t_quantile((1 + level) / 2, n - 1)

    def interval(point: float, sd: float) -> IntervalEstimate:
        half = q * sd / math.sqrt(n)
        return IntervalEstimate(point=point, lower=point - half, upper=point + half, level=level)

    mean_x = float(x.mean())
    mean_y = float(y.mean())
    # diff point as mean_x - mean_y keeps the reported means exactly consistent
    return PairedMeans(
        mean_x=interval(mean_x, float(x.std(ddof=1))),
        mean_y=interval(mean_y, float(y.std(ddof=1))),
        diff=interval(mean_x - mean_y, float(d.std(ddof=1))),
    )


def ols_fit(s: PairedSeries) -> LinearFit:
    """Least-squares fit of y on x: slope = s_xy/s_x^2, intercept through the
    means."""
    if len(s) < 2:
        raise UndefinedStatisticError(f"ols_fit needs n >= 2, got n={len(s)}")
    x, y = _as_arrays(s)
    _check_variance(x, "x")
    dx = x - x.mean()
    slope = float(np.dot(dx, y - y.mean()) / np.dot(dx, dx))
    return LinearFit(slope=slope, intercept=float(y.mean() - slope * x.mean()))


def contingency(
    labels_a: Sequence[int],
    labels_b: Sequence[int],
    k: int,
    row_labels: Optional[Sequence[str]] = None,
    col_labels: Optional[Sequence[str]] = None,
) -> ContingencyTable:
    """Cross-tabulate paired class labels into a k x k table,
    counts[i][j] = #positions with labels_a == i and labels_b == j."""
    if len(labels_a) != len(labels_b):
        raise InputError(f"label length mismatch: {len(labels_a)} vs {len(labels_b)}")
    counts = [[0] * k for _ in range(k)]
    for pos, (i, j) in enumerate(zip(labels_a, labels_b)):
        if not (0 <= i < k and 0 <= j < k):
            raise InputError(f"label out of range 0..{k - 1} at position {pos}: ({i}, {j})")
        counts[i][j] += 1
    generic = tuple(f"class {i}" for i in range(k))
    return ContingencyTable(
        counts=tuple(tuple(row) for row in counts),
        row_labels=tuple(row_labels) if row_labels is not None else generic,
        col_labels=tuple(col_labels) if col_labels is not None else generic,
    )


def agreement_share(t: ContingencyTable) -> float:
    """Share of the total mass on the diagonal."""
    total = t.total
    if total == 0:
        raise UndefinedStatisticError("agreement_share of an empty table")
    return sum(t.counts[i][i] for i in range(len(t.counts))) / total


def off_by_more_than_one(t: ContingencyTable) -> OffDiagonal:
    """Count and share of pairs whose classes differ by two or more."""
    total = t.total
    if total == 0:
        raise UndefinedStatisticError("off_by_more_than_one of an empty table")
    count = sum(
        c for i, row in enumerate(t.counts) for j, c in enumerate(row) if abs(i - j) >= 2
    )
    return OffDiagonal(count=count, share=count / total)


def cohen_kappa(t: ContingencyTable) -> float:
    """Chance-corrected agreement:

        kappa = (p_o - p_e) / (1 - p_e)

    with p_o the diagonal share and p_e = sum_i row_i * col_i / total^2 the
    agreement expected from the margins alone.
    """
    total = t.total
    if total == 0:
        raise UndefinedStatisticError("cohen_kappa of an empty table")
    k = len(t.counts)
    row_sums = [sum(t.counts[i][j] for j in range(k)) for i in range(k)]
    col_sums = [sum(t.counts[i][j] for i in range(k)) for j in range(k)]
    p_o = sum(t.counts[i][i] for i in range(k)) / total
    p_e = sum(row_sums[i] * col_sums[i] for i in range(k)) / (total * total)
    if p_e == 1:
        raise UndefinedStatisticError("cohen_kappa undefined: chance agreement is 1")
    return (p_o - p_e) / (1 - p_e)
