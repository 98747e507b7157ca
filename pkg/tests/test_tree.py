import numpy as np
import pytest

from treelocal.tree import (
    InvalidAddressError,
    TreeShape,
    address_of,
    common_ancestor_depth,
    format_address,
    index_of,
    leaf_location,
    leaf_of_point,
    location,
    parse_address,
)


def test_shape_validation():
    with pytest.raises(ValueError):
        TreeShape(1, 3)
    with pytest.raises(ValueError):
        TreeShape(2, -1)


def test_level_sizes_and_offsets():
    shape = TreeShape(3, 4)
    assert [shape.level_size(k) for k in range(5)] == [1, 3, 9, 27, 81]
    assert shape.level_offset(0) == 0
    assert shape.level_offset(1) == 1
    assert shape.level_offset(2) == 4
    assert shape.num_vertices == 1 + 3 + 9 + 27 + 81
    assert shape.num_leaves == 81


def test_degree_convention():
    shape = TreeShape(2, 3)
    assert shape.degree(0) == 2
    assert shape.degree(1) == 3
    assert shape.degree(2) == 3
    assert shape.degree(3) == 1


@pytest.mark.parametrize(
    "b, digits, expected",
    [
        (2, (), 0),
        (2, (1, 0, 1), 5),
        (3, (2, 2), 8),
    ],
)
def test_index_of_examples(b, digits, expected):
    assert index_of(digits, TreeShape(b, 4)) == expected


def test_index_of_rejects_bad_digit():
    with pytest.raises(InvalidAddressError):
        index_of((0, 2), TreeShape(2, 3))
    with pytest.raises(InvalidAddressError):
        index_of((0, 0, 0, 0), TreeShape(2, 3))


@pytest.mark.parametrize("b, n", [(2, 6), (3, 5), (2, 3), (3, 2)])
def test_index_roundtrip_exhaustive(b, n):
    shape = TreeShape(b, n)
    for level in range(n + 1):
        seen = set()
        for idx in range(shape.level_size(level)):
            addr = address_of(idx, level, shape)
            assert index_of(addr, shape) == idx
            seen.add(addr)
        assert len(seen) == shape.level_size(level)


def test_common_ancestor_depth():
    assert common_ancestor_depth((0, 1), (0, 0)) == 1
    assert common_ancestor_depth((1, 1, 0), (1, 1, 0)) == 3
    assert common_ancestor_depth((0, 1, 1), (1, 1, 1)) == 0
    assert common_ancestor_depth((), (1, 0)) == 0


def test_common_ancestor_symmetry_exhaustive():
    shape = TreeShape(2, 4)
    addrs = [address_of(i, 4, shape) for i in range(16)]
    for u in addrs:
        for v in addrs:
            d = common_ancestor_depth(u, v)
            assert d == common_ancestor_depth(v, u)
            assert (d == 4) == (u == v)


def test_location_examples():
    assert location((), 2) == 0.0
    assert location((1, 0, 1), 2) == 0.625
    for n in (1, 4, 10):
        assert location((1,) * n, 2) == pytest.approx(1 - 2.0 ** -n, abs=1e-15)


def test_leaf_of_point_examples():
    assert leaf_of_point(0.0, TreeShape(2, 3)) == (0, 0, 0)
    # boundary shared by (0,1) and (1,0): larger location wins
    assert leaf_of_point(0.5, TreeShape(2, 2)) == (1, 0)
    assert leaf_of_point(0.3, TreeShape(2, 1)) == (0,)
    assert leaf_of_point(1.0, TreeShape(2, 2)) == (1, 1)
    with pytest.raises(ValueError):
        leaf_of_point(1.5, TreeShape(2, 2))


@pytest.mark.parametrize("b, n", [(2, 5), (3, 4)])
def test_interval_membership(b, n):
    shape = TreeShape(b, n)
    rng = np.random.default_rng(7)
    xs = np.concatenate([rng.random(500), np.arange(shape.num_leaves + 1) / shape.num_leaves])
    for x in xs:
        leaf = leaf_of_point(float(x), shape)
        sigma = location(leaf, b)
        assert sigma - 1e-12 <= x <= sigma + b ** -n + 1e-12


def test_leaf_location_matches_location():
    shape = TreeShape(3, 4)
    for idx in range(shape.num_leaves):
        addr = address_of(idx, 4, shape)
        assert leaf_location(idx, shape) == pytest.approx(location(addr, 3), abs=1e-15)


def test_address_serialization():
    assert format_address((1, 0, 1), 2) == "101"
    assert parse_address("101", 2) == (1, 0, 1)
    assert parse_address("", 2) == ()
    assert format_address((), 2) == ""
    assert parse_address(format_address((11, 3), 12), 12) == (11, 3)
