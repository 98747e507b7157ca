"""Implicit rooted b-ary tree of finite depth.

Vertices are addressed by digit tuples (root = empty tuple) and stored in
level-major flat arrays: level ell holds b**ell vertices, ordered by the
base-b value of the address.  No node objects are ever materialized.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class InvalidAddressError(ValueError):
    """Address has a digit outside [0, b) or is too deep for the tree."""


@dataclass(frozen=True)
class TreeShape:
    """Branching factor and depth of a truncated b-ary tree."""

    branching: int
    depth: int

    def __post_init__(self):
        if self.branching < 2:
            raise ValueError(f"branching must be >= 2, got {self.branching}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")

    def level_size(self, level: int) -> int:
        return self.branching ** level

    def level_offset(self, level: int) -> int:
        """Index of the first vertex of `level` in the flat layout."""
        b = self.branching
        return (b ** level - 1) // (b - 1)

    @cached_property
    def num_vertices(self) -> int:
        return self.level_offset(self.depth + 1)

    @cached_property
    def num_leaves(self) -> int:
        return self.branching ** self.depth

    def level_slice(self, level: int) -> slice:
        return slice(self.level_offset(level), self.level_offset(level + 1))

    def degree(self, level: int) -> int:
        """Graph degree in the truncated tree: root b, internal b+1, leaf 1."""
        if level == 0:
            return self.branching if self.depth > 0 else 0
        if level == self.depth:
            return 1
        return self.branching + 1

    def levels(self, flat: np.ndarray) -> list[np.ndarray]:
        """Views of a flat level-major array, one per level."""
        return [flat[self.level_slice(k)] for k in range(self.depth + 1)]


def _check_address(digits, b: int) -> tuple:
    digits = tuple(int(d) for d in digits)
    for d in digits:
        if not 0 <= d < b:
            raise InvalidAddressError(f"digit {d} out of range [0, {b})")
    return digits


def index_of(digits, shape: TreeShape) -> int:
    """Level-local index of an address: the base-b value of its digits."""
    digits = _check_address(digits, shape.branching)
    if len(digits) > shape.depth:
        raise InvalidAddressError(
            f"address depth {len(digits)} exceeds tree depth {shape.depth}"
        )
    idx = 0
    for d in digits:
        idx = idx * shape.branching + d
    return idx


def address_of(index: int, level: int, shape: TreeShape) -> tuple:
    """Inverse of index_of at a given level."""
    if not 0 <= index < shape.level_size(level):
        raise InvalidAddressError(f"index {index} out of range for level {level}")
    digits = []
    for _ in range(level):
        index, d = divmod(index, shape.branching)
        digits.append(d)
    return tuple(reversed(digits))


def common_ancestor_depth(u, v) -> int:
    """Depth of the most recent common ancestor: longest shared prefix."""
    k = 0
    for a, c in zip(u, v):
        if a != c:
            break
        k += 1
    return k


def location(digits, b: int) -> float:
    """Position of a vertex in [0, 1]: sum of digit_i / b**i along the address."""
    digits = _check_address(digits, b)
    x = 0.0
    scale = 1.0
    for d in digits:
        scale /= b
        x += d * scale
    return x


def leaf_of_point(x: float, shape: TreeShape):
    """Leaf whose base interval [location, location + b**-depth] contains x.

    On a boundary shared by two leaves the one with the larger location wins.
    """
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    k = int(np.floor(x * shape.num_leaves))
    k = min(k, shape.num_leaves - 1)
    return address_of(k, shape.depth, shape)


def leaf_location(index: int, shape: TreeShape) -> float:
    """Location of the leaf with the given level-local index."""
    return index / shape.num_leaves


def format_address(digits, b: int) -> str:
    """Serialize an address as a digit string; comma-separated when b > 10."""
    digits = _check_address(digits, b)
    if b <= 10:
        return "".join(str(d) for d in digits)
    return ",".join(str(d) for d in digits)


def parse_address(text: str, b: int) -> tuple:
    if text == "":
        return ()
    parts = text.split(",") if b > 10 else list(text)
    return _check_address((int(p) for p in parts), b)


def parent_index(index: int, b: int) -> int:
    return index // b


def child_index(index: int, b: int, child: int) -> int:
    return index * b + child
