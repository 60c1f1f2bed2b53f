from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from dyadlab import DyadicInterval as DI, TreeSpec, grid_of
from dyadlab.dyadic import descendants_at, navigate, sliced_subinterval
from dyadlab.errors import InvalidIndex, OutOfTree, UnsupportedTree

T6 = TreeSpec.unit(6)


def test_endpoints_exact():
    iv = DI(3, 5)
    assert (iv.left, iv.right, iv.length) == (Fraction(5, 8), Fraction(3, 4), Fraction(1, 8))


@pytest.mark.parametrize(
    "iv, rel, want",
    [
        (DI(1, 0), "sibling", DI(1, 1)),
        (DI(1, 1), "parent", DI(0, 0)),
        (DI(0, 0), "leftChild", DI(1, 0)),
        (DI(0, 0), "rightChild", DI(1, 1)),
    ],
)
def test_navigate(iv, rel, want):
    assert navigate(T6, iv, rel) == want


@pytest.mark.parametrize("iv, rel", [(DI(6, 3), "leftChild"), (DI(0, 0), "parent"), (DI(0, 0), "sibling"), (DI(7, 0), "parent")])
def test_navigate_out_of_tree(iv, rel):
    with pytest.raises(OutOfTree):
        navigate(T6, iv, rel)


def test_descendants_at():
    assert descendants_at(T6, DI(0, 0), 0) == [DI(0, 0)]
    assert descendants_at(T6, DI(0, 0), 1) == [DI(1, 0), DI(1, 1)]
    assert len(descendants_at(T6, DI(2, 1), 3)) == 8
    with pytest.raises(OutOfTree):
        descendants_at(T6, DI(5, 0), 2)


def test_sliced_subinterval_examples():
    assert sliced_subinterval(T6, DI(0, 0), 2, 1) == DI(2, 0)
    assert sliced_subinterval(T6, DI(0, 0), 1, 2) == DI(1, 1)
    with pytest.raises(InvalidIndex):
        sliced_subinterval(T6, DI(0, 0), 2, 5)
    with pytest.raises(InvalidIndex):
        sliced_subinterval(T6, DI(0, 0), 2, 0)


def test_sliced_matches_descendants_exhaustive():
    tree = TreeSpec.unit(4)
    for iv in tree.intervals():
        for u in range(0, tree.leaf_scale - iv.scale + 1):
            ds = descendants_at(tree, iv, u)
            for m in range(1, 2**u + 1):
                assert sliced_subinterval(tree, iv, u, m) == ds[m - 1]


def test_sweep_involutions_depth6():
    for iv in T6.intervals():
        if iv.scale > 0:
            s = iv.sibling()
            assert s.sibling() == iv
            assert s.parent() == iv.parent()
            assert s.right <= iv.left or iv.right <= s.left
            p = iv.parent()
            assert (p.right_child() if iv.is_right_child else p.left_child()) == iv


def test_parse_roundtrip():
    assert DI.parse("3:5") == DI(3, 5)
    assert str(DI(3, 5)) == "3:5"
    tree = TreeSpec(-1, (0, 1), 3, frozenset({DI(1, 2)}))
    assert TreeSpec.from_description(tree.describe()) == tree


def test_bad_trees():
    with pytest.raises(UnsupportedTree):
        TreeSpec(0, (), 3)
    with pytest.raises(UnsupportedTree):
        TreeSpec(2, (0,), 1)


def test_pruned_tree_leaves():
    tree = TreeSpec(0, (0,), 3, frozenset({DI(1, 1)}))
    assert tree.leaves() == [DI(3, 0), DI(3, 1), DI(3, 2), DI(3, 3), DI(1, 1)]
    assert not tree.contains(DI(2, 2))
    assert tree.is_leaf(DI(1, 1))


def test_huge_positions_do_not_overflow():
    iv = DI(200, 2**199 + 3)
    assert iv.parent().parent().scale == 198
    assert iv.left == Fraction(2**199 + 3, 2**200)


@given(st.integers(1, 7), st.data())
def test_grid_index_roundtrip(depth, data):
    tree = TreeSpec(0, (0, 1), depth)
    g = grid_of(tree)
    d = data.draw(st.integers(0, depth))
    i = data.draw(st.integers(0, g.sizes[d] - 1))
    assert g.index(g.interval(d, i)) == (d, i)
