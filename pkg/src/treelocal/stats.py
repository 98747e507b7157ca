"""Statistics kit shared by the experiments: KS tests, score CIs, weighted fits."""

from dataclasses import dataclass

import numpy as np
from scipy.special import kolmogorov
from scipy.stats import norm

# below this per-sample size the asymptotic KS p-value is only indicative
KS_SMALL_SAMPLE = 50


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    small_sample: bool


def ks_two_sample(x, y) -> KSResult:
    """Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.

    Ties are handled through the ECDFs; p-values carry a small-sample flag
    when either sample has fewer than KS_SMALL_SAMPLE points.
    """
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    n, m = len(x), len(y)
    if n == 0 or m == 0:
        raise ValueError("ks_two_sample requires nonempty samples")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / n
    fy = np.searchsorted(y, grid, side="right") / m
    d = float(np.max(np.abs(fx - fy)))
    en = np.sqrt(n * m / (n + m))
    p = float(kolmogorov(en * d))
    return KSResult(d, p, min(n, m) < KS_SMALL_SAMPLE)


def binomial_ci(successes: int, trials: int, level: float = 0.95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("binomial_ci requires trials >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    z = norm.ppf(0.5 + level / 2.0)
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == trials else min(1.0, center + half)
    return lo, hi


@dataclass(frozen=True)
class LinFit:
    slope: float
    intercept: float
    slope_se: float
    intercept_se: float


def weighted_linfit(x, y, w) -> LinFit:
    """Weighted least squares line y ~ a + b x with weights = 1/variance.

    Parameter standard errors come from the inverse normal matrix, i.e. the
    weights are taken as known inverse variances (no residual rescaling).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if len(x) < 2:
        raise ValueError("weighted_linfit needs at least two points")
    sw = w.sum()
    sx = (w * x).sum()
    sy = (w * y).sum()
    sxx = (w * x * x).sum()
    sxy = (w * x * y).sum()
    det = sw * sxx - sx * sx
    if det <= 0:
        raise ValueError("degenerate design in weighted_linfit")
    slope = (sw * sxy - sx * sy) / det
    intercept = (sxx * sy - sx * sxy) / det
    return LinFit(
        slope=float(slope),
        intercept=float(intercept),
        slope_se=float(np.sqrt(sw / det)),
        intercept_se=float(np.sqrt(sxx / det)),
    )


def ecdf(samples):
    """Sorted sample points and the right-continuous ECDF values at them."""
    xs = np.sort(np.asarray(samples, dtype=float))
    if len(xs) == 0:
        raise ValueError("ecdf requires a nonempty sample")
    return xs, np.arange(1, len(xs) + 1) / len(xs)


def ecdf_eval(samples, grid):
    """ECDF of `samples` evaluated at each grid point."""
    xs = np.sort(np.asarray(samples, dtype=float))
    return np.searchsorted(xs, np.asarray(grid, dtype=float), side="right") / len(xs)


def two_sample_chi2(counts_a, counts_b):
    """Chi-square homogeneity test between two binned count vectors.

    Returns (statistic, pvalue, dof).  Cells empty in both samples are dropped.
    """
    from scipy.stats import chi2 as chi2_dist

    a = np.asarray(counts_a, dtype=float).ravel()
    b = np.asarray(counts_b, dtype=float).ravel()
    keep = (a + b) > 0
    a, b = a[keep], b[keep]
    na, nb = a.sum(), b.sum()
    if na == 0 or nb == 0 or len(a) < 2:
        raise ValueError("two_sample_chi2 requires counts in both samples")
    pooled = (a + b) / (na + nb)
    ea, eb = na * pooled, nb * pooled
    stat = float(((a - ea) ** 2 / ea).sum() + ((b - eb) ** 2 / eb).sum())
    dof = len(a) - 1
    return stat, float(chi2_dist.sf(stat, dof)), dof
