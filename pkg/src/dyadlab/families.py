"""Concrete functions and weights used by the experiments, plus seeded generators."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .backend import RATIONAL, mp
from .dyadic import DyadicInterval, TreeSpec, grid_of
from .haar import TreeFunction
from .measures import DyadicMeasure, glued_layout


def atom_contrast(mu: DyadicMeasure, k: int) -> TreeFunction:
    """Leaf averages of the function equal to 1 at integers and 2^k elsewhere.

    Only the atoms of ``mu`` see the value 1; every leaf takes the exact
    mu-average of the function over it.
    """
    big = Fraction(2) ** k
    vals = []
    for iv in mu.tree.leaves():
        atom = mu.point_masses.get(iv, Fraction(0))
        total = mu.mass(iv)
        vals.append((atom + big * (total - atom)) / total)
    return TreeFunction.from_values(mu.tree, vals)


def _block_weight_value(n: int, k: int):
    """Weight on the k-th side interval of block n (k = 0 marks the spine leaf)."""
    if k == 0 or k > n:
        return 1
    if k <= n // 2:
        return ("isqrt", k)
    return ("isqrt", n - k + 1)


def _weight_from_side(n: int, local: DyadicInterval, backend):
    # local is relative to [0, 1): side k is the subtree of [2^-k, 2^(1-k))
    k = local.scale
    pos = local.position
    while pos > 1:
        pos >>= 1
        k -= 1
    if pos == 0:
        k = 0  # inside the spine leaf
    v = _block_weight_value(n, k)
    if v == 1:
        return backend.scalar(1)
    return backend.scalar(1) / backend.sqrt(backend.scalar(v[1]))


def thm34_weight(mu: DyadicMeasure, n: int, backend=None) -> TreeFunction:
    """The weight 1/sqrt(k) on side k <= n/2, 1/sqrt(n-k+1) up to n, then 1."""
    backend = backend or mp(128)
    vals = [_weight_from_side(n, iv, backend) for iv in mu.tree.leaves()]
    return TreeFunction(mu.tree, backend.asarray(vals), backend)


def thm34_glued_weight(mu: DyadicMeasure, blocks: int, refine: int = 2, backend=None) -> TreeFunction:
    backend = backend or mp(128)
    _, _, pieces = glued_layout(blocks, refine)
    vals = []
    for iv in mu.tree.leaves():
        for base, n, _ in pieces:
            if base.contains(iv):
                local = DyadicInterval(iv.scale - base.scale, iv.position - (base.position << (iv.scale - base.scale)))
                vals.append(_weight_from_side(n, local, backend))
                break
    return TreeFunction(mu.tree, backend.asarray(vals), backend)


def _random_interval(tree: TreeSpec, rng: np.random.Generator, min_scale: int | None = None) -> DyadicInterval:
    root = tree.roots[int(rng.integers(len(tree.roots)))]
    lo = tree.root_scale if min_scale is None else max(min_scale, tree.root_scale)
    k = int(rng.integers(lo, tree.leaf_scale + 1))
    span = k - tree.root_scale
    return DyadicInterval(k, (root << span) + int(rng.integers(2**span)))


def _indicator_sum(tree: TreeSpec, parts) -> TreeFunction:
    g = grid_of(tree)
    vals = np.array([Fraction(0)] * g.n_leaves, dtype=object)
    for iv, c in parts:
        anc = iv
        while not tree.contains(anc):
            anc = anc.parent()
        d, i = g.index(anc)
        # an interval below a pruned leaf only contributes its share of the leaf
        vals[g.lo[d][i] : g.hi[d][i]] += c * Fraction(1, 2 ** (iv.scale - anc.scale))
    return TreeFunction.from_values(tree, vals)


def random_bumps(tree: TreeSpec, rng: np.random.Generator, count: int = 6, height: int = 16, signed: bool = True) -> TreeFunction:
    """Sum of integer multiples of indicators of random dyadic intervals."""
    parts = []
    for _ in range(count):
        c = int(rng.integers(1, height + 1))
        if signed and rng.random() < 0.5:
            c = -c
        parts.append((_random_interval(tree, rng), Fraction(c)))
    return _indicator_sum(tree, parts)


def random_log_bmo(tree: TreeSpec, rng: np.random.Generator, chains: int = 2) -> TreeFunction:
    """Nested indicators along random descending chains: a dyadic log singularity.

    Each chain draws from its own stream, so a deeper tree extends the same chains.
    """
    parts = []
    for chain_seed in rng.integers(2**32, size=chains):
        crng = np.random.default_rng(int(chain_seed))
        iv = DyadicInterval(tree.root_scale, tree.roots[int(crng.integers(len(tree.roots)))])
        sign = 1 if crng.random() < 0.5 else -1
        while tree.contains(iv):
            parts.append((iv, Fraction(sign)))
            if tree.is_leaf(iv):
                break
            iv = iv.children()[int(crng.integers(2))]
    return _indicator_sum(tree, parts)


def random_bmo(tree: TreeSpec, rng: np.random.Generator) -> TreeFunction:
    """Either bounded random bumps or a log-type chain, chosen by the stream."""
    if rng.random() < 0.5:
        return random_bumps(tree, rng)
    return random_log_bmo(tree, rng)


def random_nonnegative(tree: TreeSpec, rng: np.random.Generator, count: int = 8) -> TreeFunction:
    """Non-negative bumps c 2^(scale) 1_J, so mass is spread over many heights."""
    parts = []
    for _ in range(count):
        iv = _random_interval(tree, rng)
        c = Fraction(int(rng.integers(1, 9))) * Fraction(2) ** (iv.scale - tree.root_scale)
        parts.append((iv, c))
    return _indicator_sum(tree, parts)


def random_dyadic_weight(tree: TreeSpec, rng: np.random.Generator, spread: int = 2) -> TreeFunction:
    """w = 2^b for an integer-valued random b: positive, exact, rational."""
    b = random_bmo(tree, rng)
    cap = Fraction(spread)
    vals = [Fraction(2) ** int(max(-cap, min(cap, x))) for x in b.values]
    return TreeFunction.from_values(tree, vals, RATIONAL)


def restrict(f: TreeFunction, iv: DyadicInterval) -> TreeFunction:
    """f times the indicator of a tree interval."""
    g = f.grid
    d, i = g.index(iv)
    vals = f.values.copy()
    zero = f.backend.scalar(0)
    vals[: g.lo[d][i]] = zero
    vals[g.hi[d][i] :] = zero
    return TreeFunction(f.tree, vals, f.backend)
