"""Direct simulator of the walk stopped at the root's inverse local time.

This is the ground-truth oracle: a continuous-time simple random walk with
unit-rate holding times, tracked only through its embedded jump chain plus
per-visit exponential local-time increments (the two are equivalent at
vertices).  Root local time accrues one Exp(1)/b per holding; the walk makes
one root excursion per completed holding and stops mid-holding when the root
crosses t, so the root value is exactly t.
"""

from dataclasses import dataclass

import numpy as np

from .field import LocalTimeField
from .tree import TreeShape


class ExcursionCapExceeded(RuntimeError):
    """An excursion ran longer than the configured safety cap."""


@dataclass(frozen=True)
class WalkConfig:
    shape: TreeShape
    t: float
    excursion_cap: int = 10 ** 9

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("stop parameter t must be > 0")
        if self.excursion_cap < 1:
            raise ValueError("excursion cap must be >= 1")


class _Draws:
    """Chunked buffers over a Generator so per-step costs stay near array reads."""

    def __init__(self, rng: np.random.Generator, chunk: int = 512):
        self._rng = rng
        self._chunk = chunk
        self._exp = rng.exponential(1.0, chunk)
        self._uni = rng.random(chunk)
        self._ie = 0
        self._iu = 0

    def exp(self) -> float:
        if self._ie == len(self._exp):
            self._exp = self._rng.exponential(1.0, self._chunk)
            self._ie = 0
        v = self._exp[self._ie]
        self._ie += 1
        return v

    def uniform(self) -> float:
        if self._iu == len(self._uni):
            self._uni = self._rng.random(self._chunk)
            self._iu = 0
        v = self._uni[self._iu]
        self._iu += 1
        return v


def excursion_from_root(
    shape: TreeShape,
    rng_or_draws,
    values: np.ndarray,
    cap: int = 10 ** 9,
) -> int:
    """Run one excursion from the root, accumulating local time in `values`.

    The walk leaves to a uniform child and performs uniform-neighbor steps
    until it first returns to the root; every visited non-root vertex adds an
    Exp(1)/deg increment.  Returns the number of steps taken.
    """
    draws = rng_or_draws if isinstance(rng_or_draws, _Draws) else _Draws(rng_or_draws)
    b = shape.branching
    n = shape.depth
    offsets = [shape.level_offset(k) for k in range(n + 1)]
    level = 1
    idx = int(draws.uniform() * b)
    steps = 0
    while True:
        steps += 1
        if steps > cap:
            raise ExcursionCapExceeded(f"excursion exceeded {cap} steps")
        if level == n:
            deg = 1
            values[offsets[level] + idx] += draws.exp()
            level -= 1
            idx //= b
        else:
            deg = b + 1
            values[offsets[level] + idx] += draws.exp() / deg
            r = int(draws.uniform() * deg)
            if r == 0:
                level -= 1
                idx //= b
            else:
                level += 1
                idx = idx * b + (r - 1)
        if level == 0:
            return steps


def run_inverse_local_time(cfg: WalkConfig, rng: np.random.Generator) -> LocalTimeField:
    """Exact-law sample of the local-time field at the root's crossing of t."""
    shape = cfg.shape
    values = np.zeros(shape.num_vertices)
    if shape.depth == 0:
        values[0] = cfg.t
        return LocalTimeField(shape=shape, t=cfg.t, values=values)
    draws = _Draws(rng)
    b = shape.branching
    # holdings at the root contribute Exp(1)/b each; the walk completes one
    # excursion per holding finished before the crossing
    acc = 0.0
    excursions = -1
    while acc <= cfg.t:
        acc += draws.exp() / b
        excursions += 1
    for _ in range(excursions):
        excursion_from_root(shape, draws, values, cap=cfg.excursion_cap)
    values[0] = cfg.t
    return LocalTimeField(shape=shape, t=cfg.t, values=values)
