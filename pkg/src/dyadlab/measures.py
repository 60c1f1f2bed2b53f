"""Exact measures on finite dyadic trees.

A measure is stored as exact rational masses on the leaves.  The quantity
``m(I) = mu(I-) mu(I+) / mu(I)`` drives everything else: it is the squared
scale of the Haar function of ``I`` and the currency of the sibling-balanced
and balanced conditions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping

import numpy as np

from .backend import RATIONAL, Backend
from .dyadic import DyadicInterval, Grid, TreeSpec, grid_of
from .errors import OutOfTree, TreeTooShallow
from .util import BestPair

DensityIntegral = Callable[[Fraction, Fraction], Fraction]


class DyadicMeasure:
    """Leaf masses (exact, positive) on a TreeSpec.

    ``atomless`` records whether the masses stand for an absolutely
    continuous measure.  ``point_masses`` lists, per leaf, the part of its
    mass that came from a point mass in the construction.
    """

    def __init__(
        self,
        tree: TreeSpec,
        leaf_masses: Iterable,
        atomless: bool,
        point_masses: Mapping[DyadicInterval, Fraction] | None = None,
        label: str = "",
    ):
        self.tree = tree
        self.grid: Grid = grid_of(tree)
        masses = RATIONAL.asarray(list(leaf_masses))
        if masses.shape != (self.grid.n_leaves,):
            raise ValueError(f"expected {self.grid.n_leaves} leaf masses, got {masses.shape}")
        if any(x <= 0 for x in masses):
            raise ValueError("leaf masses must be positive")
        self._leaf = masses
        self.atomless = bool(atomless)
        self.point_masses = dict(point_masses or {})
        self.label = label
        self._cache: dict = {}

    def __repr__(self):
        return f"DyadicMeasure({self.label or 'custom'}, {self.tree.describe()})"

    # -- arrays per backend ---------------------------------------------
    def leaf_masses(self, backend: Backend = RATIONAL) -> np.ndarray:
        key = ("leaf", backend.name)
        if key not in self._cache:
            self._cache[key] = self._leaf if backend is RATIONAL else backend.asarray(self._leaf)
        return self._cache[key]

    def level_masses(self, backend: Backend = RATIONAL) -> list[np.ndarray]:
        key = ("levels", backend.name)
        if key not in self._cache:
            if backend is RATIONAL:
                self._cache[key] = self.grid.aggregate(self._leaf)
            else:
                self._cache[key] = [backend.asarray(a) for a in self.level_masses(RATIONAL)]
        return self._cache[key]

    def child_masses(self, d: int, backend: Backend = RATIONAL) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(mu(I), mu(I-), mu(I+)) for the internal nodes of level d."""
        lv = self.level_masses(backend)
        ch = lv[d + 1]
        return lv[d][self.grid.internal[d]], ch[0::2], ch[1::2]

    def m_levels(self, backend: Backend = RATIONAL) -> list[np.ndarray]:
        """m(I) for the internal nodes of every level (indexed by internal rank)."""
        key = ("m", backend.name)
        if key not in self._cache:
            if backend is RATIONAL:
                out = []
                for d in range(self.grid.depth):
                    tot, left, right = self.child_masses(d)
                    out.append(left * right / tot if len(tot) else np.empty(0, dtype=object))
                self._cache[key] = out
            else:
                self._cache[key] = [backend.asarray(a) for a in self.m_levels(RATIONAL)]
        return self._cache[key]

    def sqrt_m_levels(self, backend: Backend) -> list[np.ndarray]:
        key = ("sqrtm", backend.name)
        if key not in self._cache:
            self._cache[key] = [backend.sqrt(a) if len(a) else a for a in self.m_levels(backend)]
        return self._cache[key]

    # -- scalar queries -------------------------------------------------
    def mass(self, iv: DyadicInterval) -> Fraction:
        d, i = self.grid.index(iv)
        return self.level_masses()[d][i]

    def m(self, iv: DyadicInterval) -> Fraction:
        d, i = self.grid.index(iv)
        r = self.grid.rank[d][i]
        if r < 0:
            raise OutOfTree(f"{iv} is a leaf; m is defined on internal intervals")
        return self.m_levels()[d][r]

    def total(self) -> Fraction:
        return sum(self.level_masses()[0], Fraction(0))

    def with_atomless(self, flag: bool) -> DyadicMeasure:
        return DyadicMeasure(self.tree, self._leaf, flag, self.point_masses, self.label)


def mass(measure: DyadicMeasure, iv: DyadicInterval) -> Fraction:
    return measure.mass(iv)


def m_quantity(measure: DyadicMeasure, iv: DyadicInterval) -> Fraction:
    return measure.m(iv)


@dataclass(frozen=True)
class RegularityReport:
    sib_constant: Fraction
    bal_constant: Fraction
    m_increasing_constant: Fraction
    sib_witness: tuple[DyadicInterval, DyadicInterval]
    bal_witness: tuple[DyadicInterval, DyadicInterval]
    m_increasing_witness: tuple[DyadicInterval, DyadicInterval]


def regularity_characteristics(measure: DyadicMeasure) -> RegularityReport:
    """Exact sibling-balanced, balanced and m-increasing constants with witnesses."""
    if "regularity" not in measure._cache:
        measure._cache["regularity"] = _regularity(measure)
    return measure._cache["regularity"]


def _regularity(measure: DyadicMeasure) -> RegularityReport:
    g = measure.grid
    m = measure.m_levels()
    sib, bal, minc = BestPair(), BestPair(), BestPair()
    for d in range(1, g.depth):
        idx = np.arange(g.sizes[d])
        r = g.rank[d]
        sr = r[idx ^ 1]
        ok = (r >= 0) & (sr >= 0)
        if ok.any():
            sel = idx[ok]
            sib.offer_array(g, m[d][r[sel]] / m[d][sr[sel]], d, sel, d, sel ^ 1)
        ok = r >= 0
        if ok.any():
            sel = idx[ok]
            par = g.parent[d][sel]
            mi = m[d][r[sel]]
            mp_ = m[d - 1][g.rank[d - 1][par]]
            up = mi / mp_
            down = mp_ / mi
            bal.offer_array(g, np.maximum(up, down), d, sel, d - 1, par)
            minc.offer_array(g, up, d, sel, d - 1, par)
    if sib.value is None or bal.value is None:
        raise TreeTooShallow("need at least two generations of internal intervals")
    return RegularityReport(
        sib.value, bal.value, minc.value,
        (sib.first, sib.second), (bal.first, bal.second), (minc.first, minc.second),
    )


# -- constructors ---------------------------------------------------------


def lebesgue(tree: TreeSpec) -> DyadicMeasure:
    return DyadicMeasure(tree, [iv.length for iv in tree.leaves()], True, label="lebesgue")


def piecewise_density(pieces: Iterable[tuple[Fraction | None, Fraction | None, Fraction]]) -> DensityIntegral:
    """Integral of a piecewise constant density; ``None`` bounds are infinite."""
    pieces = [(a, b, Fraction(v)) for a, b, v in pieces]

    def integral(lo: Fraction, hi: Fraction) -> Fraction:
        total = Fraction(0)
        for a, b, v in pieces:
            s = lo if a is None else max(lo, a)
            e = hi if b is None else min(hi, b)
            if e > s:
                total += v * (e - s)
        return total

    return integral


def density_plus_atoms(
    tree: TreeSpec,
    density: DensityIntegral,
    atoms: Mapping[Fraction, Fraction],
    spread: int | None = None,
    label: str = "densityPlusAtoms",
) -> DyadicMeasure:
    """Absolutely continuous part plus point masses, each atom placed on its leaf.

    With ``spread = s`` every atom of weight w at x is replaced by the density
    w 2^s on [x, x + 2^-s).  The result is atomless and its leaf masses do not
    depend on how deep the tree goes.
    """
    leaves = tree.leaves()
    if spread is not None:
        width = Fraction(1, 2**spread) if spread >= 0 else Fraction(2 ** (-spread))
        bumps = piecewise_density([(Fraction(x), Fraction(x) + width, Fraction(w) / width) for x, w in atoms.items()])
        masses = [density(iv.left, iv.right) + bumps(iv.left, iv.right) for iv in leaves]
        return DyadicMeasure(tree, masses, atomless=True, label=label)
    lefts = [iv.left for iv in leaves]
    masses = [density(iv.left, iv.right) for iv in leaves]
    placed: dict[DyadicInterval, Fraction] = {}
    for x, w in atoms.items():
        x = Fraction(x)
        j = int(np.searchsorted(np.array(lefts, dtype=object), x, side="right")) - 1
        if j < 0 or not (leaves[j].left <= x < leaves[j].right):
            continue
        masses[j] += Fraction(w)
        placed[leaves[j]] = placed.get(leaves[j], Fraction(0)) + Fraction(w)
    return DyadicMeasure(tree, masses, atomless=not placed, point_masses=placed, label=label)


def sib_not_balanced(tree: TreeSpec, spread: int | None = None) -> DyadicMeasure:
    """Atoms 2^-k at 2^k and 3/2 2^k, density 1 left of 1 and 2^-3k on [2^k, 2^(k+1))."""
    right = max(iv.right for iv in tree.leaves())
    pieces = [(None, Fraction(1), Fraction(1))]
    atoms: dict[Fraction, Fraction] = {}
    k = 0
    while Fraction(2) ** k < right:
        lo, hi = Fraction(2) ** k, Fraction(2) ** (k + 1)
        pieces.append((lo, hi, Fraction(1, 2 ** (3 * k))))
        atoms[lo] = Fraction(1, 2**k)
        atoms[lo * Fraction(3, 2)] = Fraction(1, 2**k)
        k += 1
    return density_plus_atoms(tree, piecewise_density(pieces), atoms, spread, label="sibNotBalanced")


def mu_k(tree: TreeSpec, k: int, spread: int | None = None) -> DyadicMeasure:
    """Unit atom at every integer plus density 2^-k everywhere."""
    leaves = tree.leaves()
    lo = min(iv.left for iv in leaves)
    hi = max(iv.right for iv in leaves)
    atoms = {Fraction(n): Fraction(1) for n in range(math.ceil(lo), math.ceil(hi))}
    dens = piecewise_density([(None, None, Fraction(1, 2**k))])
    return density_plus_atoms(tree, dens, atoms, spread, label=f"muK({k})")


def random_sibling_balanced(tree: TreeSpec, seed: int, target_const: float = 4.0) -> DyadicMeasure:
    """Random multiplicative cascade with split ratios in [a, 1 - a].

    For siblings the ratio m(I)/m(J) is at most ((1-a)/a) / (4a(1-a)) = 1/(4a^2),
    so a = 1/(2 sqrt(target)) keeps the sibling constant below the target.  Each
    level draws from its own seeded stream, so a deeper tree refines a shallower
    one with the same seed.
    """
    if target_const < 1:
        raise ValueError("target constant must be at least 1")
    steps = 64
    a_num = int(np.ceil(steps / (2 * np.sqrt(target_const)) - 1e-12))
    a_num = min(max(a_num, 1), steps // 2)
    g = grid_of(tree)
    level = [np.array([DyadicInterval(tree.root_scale, p).length for p in tree.roots], dtype=object)]
    for d in range(g.depth):
        rng = np.random.default_rng([seed, d])
        draws = rng.integers(a_num, steps - a_num + 1, size=g.sizes[d])
        t = np.array([Fraction(int(x), steps) for x in draws], dtype=object)[g.internal[d]]
        parent = level[d][g.internal[d]]
        nxt = np.empty(g.sizes[d + 1], dtype=object)
        nxt[0::2] = parent * t
        nxt[1::2] = parent * (1 - t)
        level.append(nxt)
    return DyadicMeasure(tree, g.to_leaves(level), True, label=f"randomSiblingBalanced({seed},{target_const})")


# -- the constructions around the weight counterexample ---------------------


def _block_masses(n: int, depth: int) -> tuple[list[Fraction], list[Fraction], Fraction]:
    """Masses of I_k (k = 0..depth) and of I_k^s (k = 1..depth) for the n-th block."""
    spine = [Fraction(1), Fraction(1, 2)]
    side = [None, Fraction(1, 2)]
    for k in range(2, depth + 1):
        b = Fraction(1, k * k) if k <= n else Fraction(1, n * n)
        side.append(b * spine[k - 1])
        spine.append((1 - b) * spine[k - 1])
    return spine, side, spine[depth]


def block_layout(n: int, depth: int | None = None, refine: int = 2):
    """Leaves of the n-th block on [0, 1) with their masses.

    I_k = [0, 2^-k) and I_k^s = [2^-k, 2^(1-k)).  Each I_k^s carries uniform
    mass and is refined ``refine`` levels; I_depth is a leaf.
    Returns ``(leaves, masses, pruned)`` relative to the unit interval.
    """
    depth = n + 2 if depth is None else depth
    if depth <= n:
        raise TreeTooShallow("the block needs a leaf scale beyond n")
    spine, side, last = _block_masses(n, depth)
    leaves, masses, pruned = [], [], []
    for k in range(1, depth + 1):
        sib = DyadicInterval(k, 1)
        r = min(refine, depth - k)
        if k + r < depth:
            pruned.extend(sib.descendant(r, j) for j in range(1, 2**r + 1))
        for j in range(1, 2**r + 1):
            leaves.append(sib.descendant(r, j))
            masses.append(side[k] / 2**r)
    leaves.append(DyadicInterval(depth, 0))
    masses.append(last)
    return leaves, masses, pruned


def _relocate(iv: DyadicInterval, base: DyadicInterval) -> DyadicInterval:
    """Map an interval of [0, 1) into ``base`` by the affine dyadic map."""
    return DyadicInterval(base.scale + iv.scale, (base.position << iv.scale) + iv.position)


def _ordered_masses(tree: TreeSpec, pairs: dict[DyadicInterval, Fraction]) -> list[Fraction]:
    return [pairs[iv] for iv in tree.leaves()]


def thm34_block(n: int, depth: int | None = None, refine: int = 2) -> DyadicMeasure:
    """The block measure on [0, 1): mu(I_k^s) = mu(I_(k-1))/k^2 up to k = n, then 1/n^2."""
    leaves, masses, pruned = block_layout(n, depth, refine)
    depth = max(iv.scale for iv in leaves)
    tree = TreeSpec(0, (0,), depth, frozenset(pruned))
    return DyadicMeasure(tree, _ordered_masses(tree, dict(zip(leaves, masses))), True, label=f"thm34Block({n})")


def glued_layout(blocks: int, refine: int = 2):
    """Block 2 on [0, 1) and block 2(j+1), scaled by 2^(j-1), on [2^(j-1), 2^j)."""
    placed: dict[DyadicInterval, Fraction] = {}
    pieces = [(DyadicInterval(0, 0), 2, Fraction(1))]
    pieces += [(DyadicInterval(-(j - 1), 1), 2 * (j + 1), Fraction(2) ** (j - 1)) for j in range(1, blocks + 1)]
    for base, n, scale in pieces:
        leaves, masses, _ = block_layout(n, refine=refine)
        for iv, w in zip(leaves, masses):
            placed[_relocate(iv, base)] = w * scale
    leaf_scale = max(iv.scale for iv in placed)
    pruned = frozenset(iv for iv in placed if iv.scale < leaf_scale)
    return TreeSpec(-blocks, (0,), leaf_scale, pruned), placed, pieces


def thm34_glued(blocks: int = 3, refine: int = 2) -> DyadicMeasure:
    tree, placed, _ = glued_layout(blocks, refine)
    return DyadicMeasure(tree, _ordered_masses(tree, placed), True, label=f"thm34Glued({blocks})")


def _opt_int(x):
    return None if x is None or x == "" else int(x)


def construct_measure(kind: str, tree: TreeSpec | None = None, **params) -> DyadicMeasure:
    """Named constructors used by configuration files."""
    if kind == "lebesgue":
        return lebesgue(tree)
    if kind == "sibNotBalanced":
        return sib_not_balanced(tree, _opt_int(params.get("spread")))
    if kind == "muK":
        return mu_k(tree, int(params["k"]), _opt_int(params.get("spread")))
    if kind == "randomSiblingBalanced":
        return random_sibling_balanced(tree, int(params.get("seed", 0)), float(params.get("target_const", 4.0)))
    if kind == "thm34Block":
        return thm34_block(int(params["n"]), params.get("depth"), int(params.get("refine", 2)))
    if kind == "thm34Glued":
        return thm34_glued(int(params.get("blocks", 3)), int(params.get("refine", 2)))
    raise ValueError(f"unknown measure kind {kind!r}")
