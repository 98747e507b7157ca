"""Derivative and additive martingales and the multiplicative cascade measure.

All quantities are functionals of the leaf values of a branching random walk:
with s = sqrt(log b) and depth n, each leaf carries the weight
(s n - h/sqrt(2)) * exp(-2 s (s n - h/sqrt(2))).  The cascade measure gives
every leaf interval exactly its weight, so interval masses are block sums of
leaf weights and the total mass is the derivative martingale.

Sums use math.fsum (correctly rounded), since b**n terms span many orders of
magnitude.
"""

import math
from dataclasses import dataclass

import numpy as np

from .brw import GaussianField, sample_brw
from .tree import TreeShape, address_of, format_address


def leaf_weights(field: GaussianField, depth: int | None = None) -> np.ndarray:
    """Derivative-martingale summands at the given level (default: leaves)."""
    n = field.shape.depth if depth is None else depth
    s = math.sqrt(math.log(field.shape.branching))
    gap = s * n - field.level(n) / math.sqrt(2.0)
    return gap * np.exp(-2.0 * s * gap)


def derivative_martingale(field: GaussianField, depth: int | None = None) -> float:
    """Sum of the leaf weights at the given level."""
    return math.fsum(leaf_weights(field, depth))


def additive_martingale(field: GaussianField, depth: int | None = None) -> float:
    """Sum of exp(-2 s (s n - h/sqrt(2))) over the level."""
    n = field.shape.depth if depth is None else depth
    s = math.sqrt(math.log(field.shape.branching))
    gap = s * n - field.level(n) / math.sqrt(2.0)
    return math.fsum(np.exp(-2.0 * s * gap))


def squared_derivative_term(field: GaussianField, depth: int | None = None) -> float:
    """Sum of gap^2 * exp(-4 s gap) over the level; vanishes as depth grows."""
    n = field.shape.depth if depth is None else depth
    s = math.sqrt(math.log(field.shape.branching))
    gap = s * n - field.level(n) / math.sqrt(2.0)
    return math.fsum(gap * gap * np.exp(-4.0 * s * gap))


def cascade_masses(field: GaussianField, m: int) -> np.ndarray:
    """Cascade-measure mass of every depth-m b-adic interval.

    Per leaf the measure has constant density (leaf weight) * b**n on an
    interval of length b**-n, so a depth-m interval mass is the plain sum of
    the leaf weights below it.
    """
    n = field.shape.depth
    if not 0 <= m <= n:
        raise ValueError(f"interval depth {m} outside [0, {n}]")
    w = leaf_weights(field)
    blocks = w.reshape(field.shape.branching ** m, -1)
    return np.array([math.fsum(row) for row in blocks])


@dataclass
class CascadeSummary:
    depth: int
    derivative: float
    additive: float
    squared: float
    interval_masses: dict | None = None


def summarize(field: GaussianField, mass_depth: int | None = None) -> CascadeSummary:
    masses = None
    if mass_depth is not None:
        vals = cascade_masses(field, mass_depth)
        shape = field.shape
        masses = {
            format_address(address_of(i, mass_depth, shape), shape.branching): float(v)
            for i, v in enumerate(vals)
        }
    return CascadeSummary(
        depth=field.shape.depth,
        derivative=derivative_martingale(field),
        additive=additive_martingale(field),
        squared=squared_derivative_term(field),
        interval_masses=masses,
    )


@dataclass
class LimitDraws:
    """Finite-depth draws standing in for the martingale limit."""

    depth: int
    draws: np.ndarray
    stabilization: float  # median |D_n - D_{n-2}| / median D_n
    positive_fraction: float


def derivative_limit_draws(
    b: int, depth: int, replicates: int, rng: np.random.Generator
) -> LimitDraws:
    """Independent draws of the depth-n derivative martingale plus a
    stabilization diagnostic against depth n-2 on the same fields."""
    if depth < 3:
        raise ValueError("depth must be >= 3 for the stabilization diagnostic")
    shape = TreeShape(b, depth)
    draws = np.empty(replicates)
    prev = np.empty(replicates)
    for i in range(replicates):
        f = sample_brw(shape, rng)
        draws[i] = derivative_martingale(f)
        prev[i] = derivative_martingale(f, depth - 2)
    med = float(np.median(draws))
    stab = float(np.median(np.abs(draws - prev))) / med if med > 0 else float("inf")
    return LimitDraws(
        depth=depth,
        draws=draws,
        stabilization=stab,
        positive_fraction=float(np.mean(draws > 0)),
    )
