"""Functions on a dyadic tree, averages and the weighted Haar system.

For an internal interval I,

    h_I = sqrt(m(I)) (1_{I-}/mu(I-) - 1_{I+}/mu(I+)),
    <f, h_I> = sqrt(m(I)) (<f>_{I-} - <f>_{I+}).

Expansions therefore store the *reduced* coefficient
``r_I = <f>_{I-} - <f>_{I+}`` and the coefficient is ``r_I sqrt(m(I))``.
Analysis, synthesis and all five paraproducts only need ``r_I``, the averages
and ratios of masses, so they stay exact on rational input.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

import numpy as np

from .backend import RATIONAL, Backend, mp
from .dyadic import DyadicInterval, Grid, TreeSpec
from .errors import BackendMismatch, OutOfTree
from .measures import DyadicMeasure


def _col(arr: np.ndarray, like: np.ndarray) -> np.ndarray:
    """Reshape a per-node array so it broadcasts against a batched array."""
    return arr.reshape((-1,) + (1,) * (like.ndim - 1))


def _bmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product where one side may lack the trailing batch axes."""
    if a.ndim < b.ndim:
        return _col(a, b) * b
    if b.ndim < a.ndim:
        return a * _col(b, a)
    return a * b


@dataclass
class TreeFunction:
    """A function constant on the leaves of ``tree`` (values in leaf order).

    ``values`` may carry trailing batch axes on the float backend; every
    operator then acts column by column.
    """

    tree: TreeSpec
    values: np.ndarray
    backend: Backend = RATIONAL

    @classmethod
    def from_values(cls, tree: TreeSpec, values, backend: Backend = RATIONAL) -> TreeFunction:
        return cls(tree, backend.asarray(values), backend)

    @classmethod
    def from_callable(cls, tree: TreeSpec, fn: Callable[[DyadicInterval], object], backend: Backend = RATIONAL) -> TreeFunction:
        return cls.from_values(tree, [fn(iv) for iv in tree.leaves()], backend)

    @classmethod
    def constant(cls, tree: TreeSpec, c, backend: Backend = RATIONAL) -> TreeFunction:
        from .dyadic import grid_of

        n = grid_of(tree).n_leaves
        return cls.from_values(tree, [c] * n, backend)

    @classmethod
    def indicator(cls, tree: TreeSpec, iv: DyadicInterval, backend: Backend = RATIONAL) -> TreeFunction:
        return cls.from_callable(tree, lambda leaf: 1 if iv.contains(leaf) else 0, backend)

    @property
    def grid(self) -> Grid:
        from .dyadic import grid_of

        return grid_of(self.tree)

    def to(self, backend: Backend) -> TreeFunction:
        if backend is self.backend:
            return self
        return TreeFunction(self.tree, backend.asarray(self.values), backend)

    def _other(self, other):
        if isinstance(other, TreeFunction):
            if other.tree != self.tree:
                raise OutOfTree("functions live on different trees")
            if other.backend is not self.backend:
                raise BackendMismatch(f"{self.backend.name} vs {other.backend.name}")
            return other.values
        return self.backend.scalar(other)

    def __add__(self, other):
        return TreeFunction(self.tree, self.values + self._other(other), self.backend)

    __radd__ = __add__

    def __sub__(self, other):
        return TreeFunction(self.tree, self.values - self._other(other), self.backend)

    def __rsub__(self, other):
        return TreeFunction(self.tree, self._other(other) - self.values, self.backend)

    def __mul__(self, other):
        o = self._other(other)
        if isinstance(other, TreeFunction):
            return TreeFunction(self.tree, _bmul(self.values, o), self.backend)
        return TreeFunction(self.tree, self.values * o, self.backend)

    __rmul__ = __mul__

    def __neg__(self):
        return TreeFunction(self.tree, -self.values, self.backend)

    def __truediv__(self, other):
        return TreeFunction(self.tree, self.values / self._other(other), self.backend)

    def __eq__(self, other):
        return (
            isinstance(other, TreeFunction)
            and other.tree == self.tree
            and other.values.shape == self.values.shape
            and bool(np.all(other.values == self.values))
        )

    def max_abs_diff(self, other: TreeFunction) -> float:
        return float(np.max(np.abs(np.asarray(self.values - other.values, dtype=float)))) if self.values.size else 0.0


FunctionRep = TreeFunction


# -- averages -------------------------------------------------------------


def _check(f: TreeFunction, mu: DyadicMeasure) -> None:
    if f.tree != mu.tree:
        raise OutOfTree("function and measure live on different trees")


def level_integrals(f: TreeFunction, mu: DyadicMeasure) -> list[np.ndarray]:
    _check(f, mu)
    w = mu.leaf_masses(f.backend)
    return mu.grid.aggregate(f.values * _col(w, f.values))


def level_averages(f: TreeFunction, mu: DyadicMeasure) -> list[np.ndarray]:
    ints = level_integrals(f, mu)
    masses = mu.level_masses(f.backend)
    return [a / _col(m, a) for a, m in zip(ints, masses)]


def integral(f: TreeFunction, mu: DyadicMeasure):
    return level_integrals(f, mu)[0].sum(axis=0)


def average(f: TreeFunction, mu: DyadicMeasure, iv: DyadicInterval):
    d, i = mu.grid.index(iv)
    return level_averages(f, mu)[d][i]


def expectation(f: TreeFunction, mu: DyadicMeasure, k: int) -> TreeFunction:
    """Conditional expectation onto generation k (scale k); coarser leaves keep f."""
    g = mu.grid
    d = k - mu.tree.root_scale
    if d < 0:
        raise OutOfTree(f"generation {k} is above the roots")
    if d >= g.depth:
        return f
    avg = level_averages(f, mu)[d]
    out = f.values.copy()
    out[g.covered[d]] = np.repeat(avg, g.hi[d] - g.lo[d], axis=0)
    return TreeFunction(f.tree, out, f.backend)


# -- the Haar system ------------------------------------------------------


def _split_ratios(mu: DyadicMeasure, backend: Backend) -> list[tuple[np.ndarray, np.ndarray]]:
    """(mu(I+)/mu(I), mu(I-)/mu(I)) for the internal nodes of every level."""
    key = ("split", backend.name)
    if key not in mu._cache:
        out = []
        for d in range(mu.grid.depth):
            tot, left, right = mu.child_masses(d, backend)
            out.append((right / tot, left / tot))
        mu._cache[key] = out
    return mu._cache[key]


def _top_down(grid: Grid, root_vals: np.ndarray, child_increments: list[np.ndarray]) -> list[np.ndarray]:
    """Per-level values where each child adds its increment to its parent's value."""
    levels = [root_vals]
    for d in range(grid.depth):
        par = levels[d][grid.internal[d]]
        inc = child_increments[d]
        rep = np.repeat(par, 2, axis=0)
        levels.append(rep + inc if inc is not None else rep)
    return levels


def haar_values(mu: DyadicMeasure, iv: DyadicInterval, backend: Backend | None = None) -> tuple:
    """Values of h_I on I- and on I+."""
    backend = backend or mp(128)
    m = backend.scalar(mu.m(iv))
    s = backend.sqrt(np.array([m], dtype=backend.dtype))[0]
    left = backend.scalar(mu.mass(iv.left_child()))
    right = backend.scalar(mu.mass(iv.right_child()))
    return s / left, -s / right


def haar_function(mu: DyadicMeasure, iv: DyadicInterval, backend: Backend | None = None) -> TreeFunction:
    backend = backend or mp(128)
    g = mu.grid
    a, b = haar_values(mu, iv, backend)
    out = backend.zeros(g.n_leaves)
    for child, val in ((iv.left_child(), a), (iv.right_child(), b)):
        d, i = g.index(child)
        out[g.lo[d][i] : g.hi[d][i]] = val
    return TreeFunction(mu.tree, out, backend)


@dataclass
class HaarExpansion:
    """Reduced coefficients per level (over internal ranks) plus root averages."""

    tree: TreeSpec
    backend: Backend
    reduced: list[np.ndarray]
    root_averages: np.ndarray

    @property
    def grid(self) -> Grid:
        from .dyadic import grid_of

        return grid_of(self.tree)

    def reduced_at(self, iv: DyadicInterval):
        d, i = self.grid.index(iv)
        r = self.grid.rank[d][i]
        if r < 0:
            raise OutOfTree(f"{iv} is a leaf and has no Haar function")
        return self.reduced[d][r]

    def coefficient_levels(self, mu: DyadicMeasure) -> list[np.ndarray]:
        """Actual coefficients <f, h_I>; needs a backend with square roots."""
        if self.backend.exact:
            raise BackendMismatch("coefficients involve sqrt(m); use reduced values or a float backend")
        sq = mu.sqrt_m_levels(self.backend)
        return [r * _col(s, r) for r, s in zip(self.reduced, sq)]

    def coefficient(self, mu: DyadicMeasure, iv: DyadicInterval):
        s = self.backend.sqrt(np.array([self.backend.scalar(mu.m(iv))], dtype=self.backend.dtype))[0]
        return self.reduced_at(iv) * s

    def items(self) -> Iterator[tuple[DyadicInterval, object]]:
        """(I, reduced coefficient) in scale-then-position order."""
        g = self.grid
        for d, r in enumerate(self.reduced):
            for j, node in enumerate(g.internal[d]):
                yield g.interval(d, int(node)), r[j]

    @classmethod
    def from_coefficients(cls, mu: DyadicMeasure, backend: Backend, coefficients: list[np.ndarray], root_averages) -> HaarExpansion:
        sq = mu.sqrt_m_levels(backend)
        reduced = [c / _col(s, c) for c, s in zip(coefficients, sq)]
        return cls(mu.tree, backend, reduced, root_averages)


HaarCoefficients = HaarExpansion


def analyze(f: TreeFunction, mu: DyadicMeasure) -> HaarExpansion:
    avg = level_averages(f, mu)
    g = mu.grid
    reduced = [avg[d + 1][0::2] - avg[d + 1][1::2] for d in range(g.depth)]
    return HaarExpansion(mu.tree, f.backend, reduced, avg[0])


def _synthesis_levels(exp: HaarExpansion, mu: DyadicMeasure) -> list[np.ndarray]:
    g = mu.grid
    split = _split_ratios(mu, exp.backend)
    incs = []
    for d in range(g.depth):
        r = exp.reduced[d]
        plus, minus = split[d]
        inc = np.empty((2 * len(r),) + r.shape[1:], dtype=r.dtype)
        inc[0::2] = r * _col(plus, r)
        inc[1::2] = -r * _col(minus, r)
        incs.append(inc)
    return _top_down(g, exp.root_averages, incs)


def synthesize(exp: HaarExpansion, mu: DyadicMeasure) -> TreeFunction:
    levels = _synthesis_levels(exp, mu)
    return TreeFunction(mu.tree, mu.grid.to_leaves(levels), exp.backend)


def _zeros_like_roots(exp: HaarExpansion) -> np.ndarray:
    out = np.empty_like(exp.root_averages)
    out[...] = exp.backend.scalar(0)
    return out


# -- paraproducts ---------------------------------------------------------


def cubed_haar_integral(mu: DyadicMeasure, iv: DyadicInterval) -> Fraction:
    """sqrt(m(I)) times the integral of h_I^3, which equals (mu(I+) - mu(I-))/mu(I)."""
    tot = mu.mass(iv)
    if mu.tree.is_leaf(iv):
        raise OutOfTree(f"{iv} is a leaf")
    return (mu.mass(iv.right_child()) - mu.mass(iv.left_child())) / tot


def _skew_levels(mu: DyadicMeasure, backend: Backend) -> list[np.ndarray]:
    return [plus - minus for plus, minus in _split_ratios(mu, backend)]


def lambda_coefficient(b: TreeFunction, mu: DyadicMeasure, iv: DyadicInterval):
    """c_I(b) = <b, h_I> int h_I^3 + <b>_I."""
    avg = level_averages(b, mu)
    d, i = mu.grid.index(iv)
    r = mu.grid.rank[d][i]
    if r < 0:
        raise OutOfTree(f"{iv} is a leaf")
    red = avg[d + 1][2 * r] - avg[d + 1][2 * r + 1]
    return red * b.backend.scalar(cubed_haar_integral(mu, iv)) + avg[d][i]


PARAPRODUCTS = ("Delta", "pi", "piStar", "Lambda0", "Lambda1", "Lambda")


def paraproduct(kind: str, b: TreeFunction, f: TreeFunction, mu: DyadicMeasure) -> TreeFunction:
    """One of the paraproduct pieces of the product bf.

    Delta:   sum <b,h_I><f,h_I> h_I^2
    pi:      sum <b,h_I><f>_I h_I
    piStar:  sum <b,h_I><f,h_I> 1_I/mu(I)
    Lambda0: sum <f,h_I><b>_I h_I
    Lambda1: sum <f,h_I><b,h_I>(int h_I^3) h_I
    Lambda:  Lambda0 + Lambda1, i.e. sum <f,h_I> c_I(b) h_I
    """
    if b.backend is not f.backend:
        raise BackendMismatch("b and f must share a backend")
    g = mu.grid
    bexp, fexp = analyze(b, mu), analyze(f, mu)
    if kind in ("pi", "Lambda0", "Lambda1", "Lambda"):
        avg_b = level_averages(b, mu) if kind in ("Lambda0", "Lambda") else None
        avg_f = level_averages(f, mu) if kind == "pi" else None
        skew = _skew_levels(mu, f.backend) if kind in ("Lambda1", "Lambda") else None
        reduced = []
        for d in range(g.depth):
            rb, rf = bexp.reduced[d], fexp.reduced[d]
            node = g.internal[d]
            if kind == "pi":
                reduced.append(_bmul(rb, avg_f[d][node]))
            elif kind == "Lambda0":
                reduced.append(_bmul(rf, avg_b[d][node]))
            elif kind == "Lambda1":
                reduced.append(_bmul(_bmul(rf, rb), skew[d]))
            else:
                cb = avg_b[d][node] + _bmul(rb, skew[d])
                reduced.append(_bmul(rf, cb))
        exp = HaarExpansion(mu.tree, f.backend, reduced, _zeros_like_roots(fexp))
        return synthesize(exp, mu)
    if kind == "Delta":
        split = _split_ratios(mu, f.backend)
        incs = []
        for d in range(g.depth):
            q = _bmul(bexp.reduced[d], fexp.reduced[d])
            plus, minus = split[d]
            inc = np.empty((2 * len(q),) + q.shape[1:], dtype=q.dtype)
            inc[0::2] = q * _col(plus * plus, q)
            inc[1::2] = q * _col(minus * minus, q)
            incs.append(inc)
        levels = _top_down(g, _zeros_like_roots(fexp), incs)
        return TreeFunction(mu.tree, g.to_leaves(levels), f.backend)
    if kind == "piStar":
        mlev = mu.m_levels(f.backend)
        masses = mu.level_masses(f.backend)
        own = []
        for d in range(g.depth):
            q = _bmul(bexp.reduced[d], fexp.reduced[d])
            full = np.empty((g.sizes[d],) + q.shape[1:], dtype=q.dtype)
            full[...] = f.backend.scalar(0)
            full[g.internal[d]] = q * _col(mlev[d] / masses[d][g.internal[d]], q)
            own.append(full)
        incs = own[1:] + [None]
        levels = _top_down(g, own[0], incs)
        return TreeFunction(mu.tree, g.to_leaves(levels), f.backend)
    raise ValueError(f"unknown paraproduct {kind!r}; expected one of {PARAPRODUCTS}")


def root_boundary_term(b: TreeFunction, f: TreeFunction, mu: DyadicMeasure) -> TreeFunction:
    """sum over roots R of <b>_R <f>_R 1_R."""
    g = mu.grid
    ab, af = level_averages(b, mu)[0], level_averages(f, mu)[0]
    return TreeFunction(mu.tree, g.broadcast(_bmul(ab, af), 0), f.backend)
