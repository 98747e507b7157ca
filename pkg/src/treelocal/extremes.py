"""Extremal observables: centering, maxima, point patterns, tail curves,
the randomly-shifted Gumbel comparison, and the near-max geometry diagnostic."""

import math
from dataclasses import dataclass

import numpy as np

from . import brw
from .field import LocalTimeField
from .stats import binomial_ci, weighted_linfit, ecdf_eval
from .tree import address_of, leaf_location


def max_centering(n: int, t: float, b: int) -> float:
    """Deterministic recentering of the leaf maximum of sqrt(local time).

    sqrt(log b) n - 3/(4 sqrt(log b)) log n - 1/(4 sqrt(log b)) log((sqrt(t)+n)/sqrt(t))
    """
    if n < 1:
        raise ValueError("centering needs depth n >= 1")
    if t <= 0:
        raise ValueError("stop parameter t must be > 0")
    s = math.sqrt(math.log(b))
    rt = math.sqrt(t)
    return s * n - 3.0 / (4.0 * s) * math.log(n) - 1.0 / (4.0 * s) * math.log((rt + n) / rt)


def speed_factor(theta: float, b: int) -> float:
    """Correction factor for the growth rate theta = lim sqrt(t)/n.

    sqrt((theta+1)/(theta+sqrt(log b))) for finite theta, 1 at infinity.
    """
    if theta < 0:
        raise ValueError("theta must be >= 0 (or inf)")
    if math.isinf(theta):
        return 1.0
    return math.sqrt((theta + 1.0) / (theta + math.sqrt(math.log(b))))


@dataclass(frozen=True)
class CenteredMaxSample:
    address: tuple
    location: float
    raw_max: float
    centered: float


def _last_argmax(values: np.ndarray) -> int:
    """Index of the maximum; ties broken toward the largest index (largest
    location, since leaf order follows the unit-interval embedding)."""
    return len(values) - 1 - int(np.argmax(values[::-1]))


def centered_max(field: LocalTimeField) -> CenteredMaxSample:
    """Leaf maximum of sqrt(local time), centered by sqrt(t) + a_n(t)."""
    shape = field.shape
    leaves = field.leaves()
    k = _last_argmax(leaves)
    raw = float(leaves[k])
    a = max_centering(shape.depth, field.t, shape.branching)
    return CenteredMaxSample(
        address=address_of(k, shape.depth, shape),
        location=leaf_location(k, shape),
        raw_max=raw,
        centered=math.sqrt(raw) - math.sqrt(field.t) - a,
    )


@dataclass
class PointPattern:
    """One point per depth-m subtree: location of its maximizing leaf and the
    subtree maximum of sqrt(local time) under the global centering."""

    subtree_depth: int
    locations: np.ndarray
    heights: np.ndarray

    def count_in(self, a_lo: float, a_hi: float, b_lo: float, b_hi: float) -> int:
        """Points with location in [a_lo, a_hi] and height in (b_lo, b_hi]."""
        sel = (
            (self.locations >= a_lo)
            & (self.locations <= a_hi)
            & (self.heights > b_lo)
            & (self.heights <= b_hi)
        )
        return int(np.count_nonzero(sel))


def point_pattern(field: LocalTimeField, m: int) -> PointPattern:
    shape = field.shape
    if not 0 <= m <= shape.depth:
        raise ValueError(f"subtree depth {m} outside [0, {shape.depth}]")
    leaves = field.leaves()
    width = shape.branching ** (shape.depth - m)
    blocks = leaves.reshape(shape.branching ** m, width)
    # last argmax per row = largest-location tie-break
    rev = blocks[:, ::-1]
    arg_rev = np.argmax(rev, axis=1)
    arg = width - 1 - arg_rev
    raw = blocks[np.arange(blocks.shape[0]), arg]
    base = np.arange(blocks.shape[0]) * width + arg
    a = max_centering(shape.depth, field.t, shape.branching)
    return PointPattern(
        subtree_depth=m,
        locations=base / shape.num_leaves,
        heights=np.sqrt(raw) - math.sqrt(field.t) - a,
    )


@dataclass
class TailCurve:
    y: np.ndarray
    p: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    exponent: float
    exponent_se: float
    intercept: float
    truncated: bool


def tail_curve(samples, y_grid, ci_level: float = 0.95) -> TailCurve:
    """Survival curve of centered maxima with a weighted fit of
    log p(y) - log(1+y) against y; the slope estimates the tail exponent."""
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 1000:
        raise ValueError("tail_curve needs a large sample")
    y = np.asarray(y_grid, dtype=float)
    n = len(samples)
    hits = np.array([(samples >= yy).sum() for yy in y])
    truncated = bool(np.any(hits == 0))
    keep = hits > 0
    y_kept, hits_kept = y[keep], hits[keep]
    p = hits_kept / n
    ci = np.array([binomial_ci(int(h), n, ci_level) for h in hits_kept])
    if keep.sum() < 2:
        raise ValueError("tail grid has fewer than two resolved points")
    # weights: delta-method variance of log p is (1-p)/(n p)
    w = n * p / (1.0 - p + 1e-300)
    fit = weighted_linfit(y_kept, np.log(p) - np.log1p(y_kept), w)
    return TailCurve(
        y=y_kept,
        p=p,
        lo=ci[:, 0],
        hi=ci[:, 1],
        exponent=fit.slope,
        exponent_se=fit.slope_se,
        intercept=fit.intercept,
        truncated=truncated,
    )


def mixture_cdf(lam, c: float, d_draws: np.ndarray, b: int) -> np.ndarray:
    """Candidate limit CDF: average over the draws of
    exp(-c * draw * exp(-2 sqrt(log b) * lam))."""
    s = math.sqrt(math.log(b))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    expo = np.exp(-2.0 * s * lam)
    return np.exp(-c * np.outer(d_draws, expo)).mean(axis=0)


@dataclass
class GumbelFit:
    c: float
    sup_distance: float
    draws_used: int
    draws_dropped: int
    grid: np.ndarray
    candidate: float | None = None


def gumbel_fit(samples, d_draws, b: int, grid_size: int = 201) -> GumbelFit:
    """Fit the scale c of the randomly-shifted Gumbel mixture to the empirical
    CDF of centered maxima by minimizing the sup distance on a quantile grid.

    Nonpositive draws (finite-depth artifacts; the limit is a.s. positive) are
    excluded from the mixture and counted in `draws_dropped`.
    """
    samples = np.asarray(samples, dtype=float)
    d_draws = np.asarray(d_draws, dtype=float)
    pos = d_draws[d_draws > 0]
    if len(samples) == 0 or len(pos) == 0:
        raise ValueError("gumbel_fit needs nonempty samples and positive draws")
    lo, hi = np.quantile(samples, [0.001, 0.999])
    grid = np.linspace(lo, hi, grid_size)
    emp = ecdf_eval(samples, grid)
    s = math.sqrt(math.log(b))
    expo = np.exp(-2.0 * s * grid)
    mix = np.exp(-np.outer(pos, expo))

    def sup_dist(c: float) -> float:
        g = np.power(mix, c).mean(axis=0)
        return float(np.max(np.abs(g - emp)))

    # coarse log-scan then golden-section refinement (objective is unimodal
    # in practice; the scan protects against a bad bracket)
    cs = np.exp(np.linspace(math.log(1e-4), math.log(1e4), 61))
    dists = [sup_dist(c) for c in cs]
    k = int(np.argmin(dists))
    lo_c = cs[max(k - 1, 0)]
    hi_c = cs[min(k + 1, len(cs) - 1)]
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, bb = math.log(lo_c), math.log(hi_c)
    x1 = bb - phi * (bb - a)
    x2 = a + phi * (bb - a)
    f1, f2 = sup_dist(math.exp(x1)), sup_dist(math.exp(x2))
    for _ in range(60):
        if f1 <= f2:
            bb, x2, f2 = x2, x1, f1
            x1 = bb - phi * (bb - a)
            f1 = sup_dist(math.exp(x1))
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + phi * (bb - a)
            f2 = sup_dist(math.exp(x2))
        if bb - a < 1e-10:
            break
    c_hat = math.exp((a + bb) / 2.0)
    return GumbelFit(
        c=c_hat,
        sup_distance=sup_dist(c_hat),
        draws_used=len(pos),
        draws_dropped=len(d_draws) - len(pos),
        grid=grid,
    )


@dataclass
class IntensityIntegral:
    """Weighted integral of the tilted BRW max tail over one depth."""

    depth: int
    value: float
    lo: float
    hi: float
    se: float
    nodes: np.ndarray
    node_estimates: np.ndarray
    truncated: bool


def tail_intensity_integral(
    b: int,
    depth: int,
    rng: np.random.Generator,
    nodes: int = 25,
    direct_replicates: int = 200_000,
    importance_replicates: int = 40_000,
    is_threshold: float = 3.0,
) -> IntensityIntegral:
    """Trapezoid quadrature of z * exp(2 sqrt(log b) z) * tail(z) for z from
    depth**(2/5) to depth, importance sampling past `is_threshold`."""
    if depth < 4:
        raise ValueError("depth must be >= 4")
    s = math.sqrt(math.log(b))
    z = np.linspace(depth ** 0.4, float(depth), nodes)
    w = np.full(nodes, z[1] - z[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    est = np.empty(nodes)
    ses = np.empty(nodes)
    truncated = False
    for i, zz in enumerate(z):
        reps = direct_replicates if zz <= is_threshold else importance_replicates
        r = brw.brw_max_tail(b, depth, float(zz), reps, rng, is_threshold=is_threshold)
        if not r.resolved:
            truncated = True
            est[i] = r.hi  # conservative upper bound from the CI
            ses[i] = r.hi
        else:
            est[i] = r.probability
            ses[i] = r.se
    factor = z * np.exp(2.0 * s * z)
    value = float(np.sum(w * factor * est))
    se = float(np.sqrt(np.sum((w * factor * ses) ** 2)))
    return IntensityIntegral(
        depth=depth,
        value=value,
        lo=value - brw._CI_Z * se,
        hi=value + brw._CI_Z * se,
        se=se,
        nodes=z,
        node_estimates=est,
        truncated=truncated,
    )


@dataclass
class PairDepths:
    """Pooled histogram of common-ancestor depths among near-maximal leaf pairs."""

    depth: int
    counts: np.ndarray  # index = ancestor depth, 0..n
    replicates: int = 0
    empty: bool = True

    @property
    def total_pairs(self) -> int:
        return int(self.counts.sum())

    def middle_mass(self, r: int) -> float:
        """Fraction of pairs with ancestor depth in [r, n-r]."""
        total = self.total_pairs
        if total == 0:
            return float("nan")
        return float(self.counts[r : self.depth - r + 1].sum()) / total


def pair_depth_counts(leaves: np.ndarray, depth: int, threshold: float, b: int) -> np.ndarray:
    """Common-ancestor-depth counts over unordered pairs of distinct leaves
    whose value is >= threshold.  Binary trees use the XOR trick; general b
    walks the digit expansions."""
    counts = np.zeros(depth + 1, dtype=np.int64)
    idx = np.flatnonzero(leaves >= threshold)
    if len(idx) < 2:
        return counts
    i, j = np.triu_indices(len(idx), k=1)
    u, v = idx[i], idx[j]
    if b == 2:
        diff = np.bitwise_xor(u, v)
        anc = depth - (np.floor(np.log2(diff)).astype(np.int64) + 1)
    else:
        anc = np.empty(len(u), dtype=np.int64)
        for k, (a, c) in enumerate(zip(u, v)):
            d = 0
            width = len(leaves)
            while width > 1:
                width //= b
                if a // width == c // width:
                    d += 1
                    a %= width
                    c %= width
                else:
                    break
            anc[k] = d
    np.add.at(counts, anc, 1)
    return counts


def near_max_pair_depths(fields, threshold_offset: float) -> PairDepths:
    """Aggregate pair-depth histogram over an iterable of local-time fields,
    thresholding sqrt(values) at sqrt(t) + a_n(t) - offset."""
    result = None
    for f in fields:
        shape = f.shape
        a = max_centering(shape.depth, f.t, shape.branching)
        level = math.sqrt(f.t) + a - threshold_offset
        thr = level * level if level > 0 else 0.0
        c = pair_depth_counts(f.leaves(), shape.depth, thr, shape.branching)
        if result is None:
            result = PairDepths(depth=shape.depth, counts=c, replicates=1, empty=c.sum() == 0)
        else:
            result.counts += c
            result.replicates += 1
            result.empty = result.empty and c.sum() == 0
    if result is None:
        raise ValueError("no fields supplied")
    result.empty = result.total_pairs == 0
    return result


@dataclass
class LaplaceBox:
    """Product box: location interval [a_lo, a_hi], height interval (b_lo, b_hi]."""

    a_lo: float
    a_hi: float
    b_lo: float
    b_hi: float = math.inf


@dataclass
class LaplaceReport:
    boxes: list
    weights: np.ndarray
    empirical: float
    empirical_se: float
    predicted: float
    predicted_se: float

    @property
    def gap(self) -> float:
        return self.empirical - self.predicted


def box_counts(pattern: PointPattern, boxes) -> np.ndarray:
    return np.array(
        [pattern.count_in(bx.a_lo, bx.a_hi, bx.b_lo, bx.b_hi) for bx in boxes],
        dtype=np.int64,
    )


def laplace_comparison(
    counts_matrix: np.ndarray,
    boxes,
    weights,
    z_masses: np.ndarray,
    kappa: float,
    b: int,
) -> LaplaceReport:
    """Compare the empirical Laplace functional of the point patterns with the
    Cox-process prediction.

    counts_matrix: (replicates, len(boxes)) point counts per box.
    z_masses: (draws, len(boxes)) cascade masses of each box's location
    interval.  The prediction is the average over draws of
    exp(-kappa * sum_i (1-e^-a_i) * mass_i * (e^(-2 s b_lo) - e^(-2 s b_hi))).
    """
    weights = np.asarray(weights, dtype=float)
    counts_matrix = np.asarray(counts_matrix)
    if counts_matrix.ndim != 2 or counts_matrix.shape[1] != len(boxes):
        raise ValueError("counts matrix must be (replicates, boxes)")
    if z_masses.ndim != 2 or z_masses.shape[1] != len(boxes):
        raise ValueError("z_masses must be (draws, boxes)")
    s = math.sqrt(math.log(b))
    emp_terms = np.exp(-(counts_matrix * weights).sum(axis=1))
    empirical = float(emp_terms.mean())
    empirical_se = float(emp_terms.std(ddof=1) / math.sqrt(len(emp_terms)))
    height_factor = np.array(
        [math.exp(-2 * s * bx.b_lo) - (0.0 if math.isinf(bx.b_hi) else math.exp(-2 * s * bx.b_hi)) for bx in boxes]
    )
    lam = kappa * (1.0 - np.exp(-weights)) * height_factor
    pred_terms = np.exp(-(z_masses * lam).sum(axis=1))
    predicted = float(pred_terms.mean())
    predicted_se = float(pred_terms.std(ddof=1) / math.sqrt(len(pred_terms)))
    return LaplaceReport(
        boxes=list(boxes),
        weights=weights,
        empirical=empirical,
        empirical_se=empirical_se,
        predicted=predicted,
        predicted_se=predicted_se,
    )
