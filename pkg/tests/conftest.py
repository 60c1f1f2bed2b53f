from fractions import Fraction

import numpy as np
import pytest
from hypothesis import settings, strategies as st

from dyadlab import TreeSpec, TreeFunction, lebesgue, random_sibling_balanced

settings.register_profile("dyadlab", max_examples=40, deadline=None)
settings.load_profile("dyadlab")


def unit(depth, roots=1):
    return TreeSpec(0, tuple(range(roots)), depth)


def rand_rational(tree, rng, lo=-8, hi=8):
    n = len(tree.leaves())
    return TreeFunction.from_values(tree, [Fraction(int(x)) for x in rng.integers(lo, hi + 1, n)])


@st.composite
def measures(draw, min_depth=2, max_depth=5):
    depth = draw(st.integers(min_depth, max_depth))
    roots = draw(st.integers(1, 2))
    seed = draw(st.integers(0, 10_000))
    tree = unit(depth, roots)
    if draw(st.booleans()):
        return lebesgue(tree)
    return random_sibling_balanced(tree, seed, 4.0)


@st.composite
def measure_and_functions(draw, count=2, nonneg=False, **kw):
    mu = draw(measures(**kw))
    n = mu.grid.n_leaves
    lo = 0 if nonneg else -10
    fs = [
        TreeFunction.from_values(mu.tree, draw(st.lists(st.integers(lo, 10), min_size=n, max_size=n)))
        for _ in range(count)
    ]
    return (mu, *fs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
