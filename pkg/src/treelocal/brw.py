"""Branching random walk on the tree and Brownian barrier densities.

The field attaches an independent standard normal to every edge; a vertex
value is the sum along its root path, so Cov(h_u, h_v) equals the depth of
the common ancestor.  The barrier densities are the closed-form reflection
formulas used as analytic oracles by the tests.
"""

import math
from dataclasses import dataclass

import numpy as np

from .tree import TreeShape
from .stats import binomial_ci

CI_LEVEL = 0.99
_CI_Z = 2.5758293035489004  # normal quantile for the 99% two-sided level


@dataclass
class GaussianField:
    """Vertex values of a branching random walk, level-major."""

    shape: TreeShape
    values: np.ndarray

    def level(self, k: int) -> np.ndarray:
        return self.values[self.shape.level_slice(k)]

    def leaves(self) -> np.ndarray:
        return self.level(self.shape.depth)

    @property
    def edge_increments(self) -> np.ndarray:
        """One increment per non-root vertex (the edge to its parent)."""
        b = self.shape.branching
        out = np.empty(self.shape.num_vertices - 1)
        pos = 0
        for k in range(1, self.shape.depth + 1):
            parents = self.level(k - 1)
            vals = self.level(k)
            out[pos : pos + len(vals)] = vals - np.repeat(parents, b)
            pos += len(vals)
        return out


def sample_brw(shape: TreeShape, rng: np.random.Generator) -> GaussianField:
    """Draw one field: i.i.d. N(0,1) per edge, accumulated from the root."""
    values = np.zeros(shape.num_vertices)
    b = shape.branching
    for k in range(1, shape.depth + 1):
        parents = values[shape.level_slice(k - 1)]
        sl = shape.level_slice(k)
        size = shape.level_size(k)
        incr = rng.standard_normal(size)
        incr.reshape(size // b, b)[...] += parents[:, None]
        values[sl] = incr
    return GaussianField(shape=shape, values=values)


def sample_brw_leaves(shape: TreeShape, rng: np.random.Generator, batch: int) -> np.ndarray:
    """Leaf values only, for `batch` independent fields at once: (batch, b**n)."""
    b = shape.branching
    vals = np.zeros((batch, 1))
    for k in range(1, shape.depth + 1):
        size = shape.level_size(k)
        out = rng.standard_normal((batch, size))
        out.reshape(batch, size // b, b)[...] += vals[:, :, None]
        vals = out
    return vals


def bridge_below_density(s: float, z: float, x: float) -> float:
    """Density at x of B_s / sqrt(2) on the event that B / sqrt(2) stays below z.

    Reflection formula: (1/sqrt(pi s)) * (exp(-x^2/s) - exp(-(2z-x)^2/s)).
    """
    if s <= 0 or z <= 0:
        raise ValueError("requires s > 0 and z > 0")
    if x > z:
        raise ValueError("x must satisfy x <= z")
    return (math.exp(-x * x / s) - math.exp(-((2 * z - x) ** 2) / s)) / math.sqrt(math.pi * s)


def joint_max_density(s: float, x: float, z: float) -> float:
    """Joint density of (B_s, running max of B) for a standard Brownian motion.

    2(2z-x)/sqrt(2 pi s^3) * exp(-(2z-x)^2 / 2s) on {x <= z, z >= 0}, else 0.
    """
    if s <= 0:
        raise ValueError("requires s > 0")
    if x > z or z < 0:
        return 0.0
    u = 2 * z - x
    return 2 * u / math.sqrt(2 * math.pi * s ** 3) * math.exp(-u * u / (2 * s))


@dataclass(frozen=True)
class TailEstimate:
    probability: float
    lo: float
    hi: float
    se: float
    replicates: int
    method: str
    resolved: bool


def brw_max_tail(
    b: int,
    depth: int,
    z: float,
    replicates: int,
    rng: np.random.Generator,
    method: str = "auto",
    is_threshold: float = 3.0,
) -> TailEstimate:
    """Monte Carlo estimate of P(max over depth-ell vertices of h/sqrt(2)
    exceeds sqrt(log b) * ell + z).

    method "direct" counts hits with a score CI; "importance" tilts the path
    to one marked leaf at the large-deviation drift (sqrt(log b) + z/ell per
    level) and corrects by the number of exceeding leaves, which keeps the
    estimator unbiased.  "auto" switches to importance sampling for z above
    `is_threshold`.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if z < 0:
        raise ValueError("z must be >= 0")
    shape = TreeShape(b, depth)
    if method == "auto":
        method = "importance" if z > is_threshold else "direct"
    target = math.sqrt(math.log(b)) * depth + z
    if method == "direct":
        return _tail_direct(shape, target, replicates, rng)
    if method == "importance":
        return _tail_importance(shape, target, replicates, rng)
    raise ValueError(f"unknown method {method!r}")


def _tail_direct(shape: TreeShape, target: float, replicates: int, rng) -> TailEstimate:
    thr = target * math.sqrt(2.0)  # threshold in h units
    hits = 0
    done = 0
    while done < replicates:
        batch = min(4096, replicates - done)
        leaves = sample_brw_leaves(shape, rng, batch)
        hits += int(np.count_nonzero(leaves.max(axis=1) > thr))
        done += batch
    p = hits / replicates
    lo, hi = binomial_ci(hits, replicates, level=CI_LEVEL)
    se = math.sqrt(max(p * (1 - p), 1.0 / replicates)) / math.sqrt(replicates)
    return TailEstimate(p, lo, hi, se, replicates, "direct", resolved=hits > 0)


def _tail_importance(shape: TreeShape, target: float, replicates: int, rng) -> TailEstimate:
    """Spine-tilted estimator.

    One leaf is marked; its root path gets drift mu = target*sqrt(2)/depth per
    level, the rest of the tree is sampled untilted.  With S the realized
    spine sum, w = exp(-mu S + depth mu^2 / 2) undoes the tilt, and dividing
    by the number N of exceeding leaves undoes the marking, so
    b**depth * w * 1{spine leaf exceeds} / N averages to the tail probability.
    """
    b, depth = shape.branching, shape.depth
    thr = target * math.sqrt(2.0)
    mu = thr / depth
    total = 0.0
    total_sq = 0.0
    done = 0
    scale = float(b) ** depth
    while done < replicates:
        batch = min(2048, replicates - done)
        spine_incr = rng.normal(mu, 1.0, size=(batch, depth))
        spine = np.cumsum(spine_incr, axis=1)  # spine values at depths 1..depth
        exceed = np.zeros(batch, dtype=np.int64)
        # subtrees hanging off the spine at depths 1..depth (b-1 siblings each
        # of the spine child at that depth, rooted one level above)
        for k in range(1, depth + 1):
            root_vals = spine[:, k - 2] if k >= 2 else np.zeros(batch)
            width = b - 1
            vals = root_vals[:, None] + rng.standard_normal((batch, width))
            for _ in range(depth - k):
                vals = np.repeat(vals, b, axis=1) + rng.standard_normal(
                    (batch, vals.shape[1] * b)
                )
            exceed += (vals > thr).sum(axis=1)
        spine_hit = spine[:, -1] > thr
        n_exceed = exceed + spine_hit
        weight = np.exp(-mu * spine[:, -1] + depth * mu * mu / 2.0)
        term = np.where(spine_hit, scale * weight / np.maximum(n_exceed, 1), 0.0)
        total += float(term.sum())
        total_sq += float((term * term).sum())
        done += batch
    mean = total / replicates
    var = max(total_sq / replicates - mean * mean, 0.0)
    se = math.sqrt(var / replicates)
    return TailEstimate(
        mean,
        max(mean - _CI_Z * se, 0.0),
        mean + _CI_Z * se,
        se,
        replicates,
        "importance",
        resolved=total > 0,
    )
