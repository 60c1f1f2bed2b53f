"""Haar shifts, the dyadic Hilbert transform and commutators.

A shift of complexity (u, v) sends ``<f, h_J>`` to ``h_K`` with weight
``alpha^I_{J,K}`` whenever J is u generations and K is v generations below a
common ancestor I.  Shifts are stored as *slices*: for fixed positions
(m, n), J is the m-th descendant of I at depth u and K is the n-th one at
depth v, and the slice holds one coefficient per I.

The dyadic Hilbert transform is the complexity (1, 1) shift

    H f = sum_I <f, h_{I+}> h_{I-} - <f, h_{I-}> h_{I+},

i.e. slice (2, 1) with +1 plus slice (1, 2) with -1.  On a finite forest
the Haar functions of the roots have no sibling inside the tree and are sent
to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .backend import Backend
from .dyadic import DyadicInterval, Grid, TreeSpec
from .errors import BackendMismatch, InvalidIndex, UnsupportedShift
from .haar import HaarExpansion, TreeFunction, _col, analyze, level_averages, synthesize
from .measures import DyadicMeasure

Coefficient = Union[float, int, list]


@dataclass
class HaarShiftSpec:
    """Slices ``(m, n) -> coefficient``; a coefficient is a scalar or per-level arrays.

    Per-level arrays are indexed like the internal nodes of level d of
    ``tree`` (the ancestor I).
    """

    u: int
    v: int
    slices: dict[tuple[int, int], Coefficient] = field(default_factory=dict)
    tree: TreeSpec | None = None
    name: str = ""

    def __post_init__(self):
        if self.u < 0 or self.v < 0:
            raise InvalidIndex("complexity must be non-negative")
        for m, n in self.slices:
            if not (1 <= m <= 2**self.u and 1 <= n <= 2**self.v):
                raise InvalidIndex(f"slice ({m}, {n}) outside complexity ({self.u}, {self.v})")
            if isinstance(self.slices[(m, n)], list) and self.tree is None:
                raise UnsupportedShift("per-interval coefficients need the tree they index")

    def coefficient_arrays(self, grid: Grid, backend: Backend, key: tuple[int, int]) -> list[np.ndarray]:
        c = self.slices[key]
        if isinstance(c, list):
            if self.tree != grid.tree:
                raise UnsupportedShift("shift coefficients were built for another tree")
            return [backend.asarray(a) if backend.dtype == object else np.asarray(a, dtype=float) for a in c]
        val = backend.scalar(c)
        out = []
        for d in range(grid.depth):
            arr = backend.zeros(len(grid.internal[d]))
            arr[...] = val
            out.append(arr)
        return out

    def adjoint(self) -> HaarShiftSpec:
        """The transpose: alpha^I_{J,K} becomes alpha^I_{K,J}."""
        return HaarShiftSpec(self.v, self.u, {(n, m): c for (m, n), c in self.slices.items()}, self.tree, self.name + "*")

    def scaled(self, c) -> HaarShiftSpec:
        out = {}
        for k, a in self.slices.items():
            out[k] = [np.asarray(x) * c for x in a] if isinstance(a, list) else a * c
        return HaarShiftSpec(self.u, self.v, out, self.tree, self.name)

    def __add__(self, other: HaarShiftSpec) -> HaarShiftSpec:
        if (self.u, self.v) != (other.u, other.v):
            raise UnsupportedShift("only shifts of equal complexity can be added")
        out = dict(self.slices)
        for k, a in other.slices.items():
            if k not in out:
                out[k] = a
            elif isinstance(a, list) or isinstance(out[k], list):
                ref = a if isinstance(a, list) else out[k]
                left, right = (
                    c if isinstance(c, list) else [np.full(len(r), c, dtype=object) for r in ref]
                    for c in (out[k], a)
                )
                out[k] = [np.asarray(x) + np.asarray(y) for x, y in zip(left, right)]
            else:
                out[k] = out[k] + a
        return HaarShiftSpec(self.u, self.v, out, self.tree or other.tree, self.name)

    def sup_abs(self) -> float:
        best = 0.0
        for c in self.slices.values():
            if isinstance(c, list):
                for a in c:
                    if len(a):
                        best = max(best, float(np.max(np.abs(np.asarray(a, dtype=float)))))
            else:
                best = max(best, abs(float(c)))
        return best

    def coefficient(self, grid: Grid, i_iv: DyadicInterval, j_iv: DyadicInterval, k_iv: DyadicInterval):
        """alpha^I_{J,K} (zero when J, K are not in the slice pattern)."""
        if not (i_iv.contains(j_iv) and i_iv.contains(k_iv)):
            return 0
        if j_iv.scale - i_iv.scale != self.u or k_iv.scale - i_iv.scale != self.v:
            return 0
        m = j_iv.position - (i_iv.position << self.u) + 1
        n = k_iv.position - (i_iv.position << self.v) + 1
        c = self.slices.get((m, n), 0)
        if isinstance(c, list):
            d, i = grid.index(i_iv)
            return c[d][grid.rank[d][i]]
        return c


def dyadic_hilbert() -> HaarShiftSpec:
    return HaarShiftSpec(1, 1, {(2, 1): 1, (1, 2): -1}, name="H")


def classical_shift() -> HaarShiftSpec:
    """S f = sum_I <f, h_I> (h_{I-} - h_{I+}), complexity (0, 1)."""
    return HaarShiftSpec(0, 1, {(1, 1): 1, (1, 2): -1}, name="S")


def slice_shift(u: int, v: int, m: int, n: int, coefficient: Coefficient = 1, tree: TreeSpec | None = None) -> HaarShiftSpec:
    return HaarShiftSpec(u, v, {(m, n): coefficient}, tree, name=f"T[{u},{v}]({m},{n})")


def hilbert_slices() -> list[tuple[HaarShiftSpec, int]]:
    """H as a signed sum of unit slices."""
    return [(slice_shift(1, 1, 2, 1), 1), (slice_shift(1, 1, 1, 2), -1)]


def shift_from_coefficients(u: int, v: int, mapping: dict, tree: TreeSpec) -> HaarShiftSpec:
    """Build a shift from ``{(I, J, K): alpha}``."""
    from .dyadic import grid_of

    g = grid_of(tree)
    slices: dict[tuple[int, int], list] = {}
    for (i_iv, j_iv, k_iv), a in mapping.items():
        m = j_iv.position - (i_iv.position << u) + 1
        n = k_iv.position - (i_iv.position << v) + 1
        if j_iv.scale - i_iv.scale != u or k_iv.scale - i_iv.scale != v or not (1 <= m <= 2**u and 1 <= n <= 2**v):
            raise InvalidIndex(f"({i_iv}, {j_iv}, {k_iv}) does not fit complexity ({u}, {v})")
        arrs = slices.setdefault((m, n), [np.zeros(len(g.internal[d]), dtype=object) for d in range(g.depth)])
        d, i = g.index(i_iv)
        r = g.rank[d][i]
        if r < 0:
            raise InvalidIndex(f"{i_iv} is a leaf")
        arrs[d][r] = a
    return HaarShiftSpec(u, v, slices, tree)


# -- application ------------------------------------------------------------


def shift_coefficients(T: HaarShiftSpec, grid: Grid, backend: Backend, coef: list[np.ndarray]) -> list[np.ndarray]:
    """Coefficient-side action: returns the output coefficient levels."""
    out = []
    for d in range(grid.depth):
        arr = np.empty_like(coef[d])
        arr[...] = backend.scalar(0)
        out.append(arr)
    for (m, n) in T.slices:
        alpha = T.coefficient_arrays(grid, backend, (m, n))
        for d in range(grid.depth):
            if d + max(T.u, T.v) >= grid.depth:
                break
            jr = grid.descendant_rank(d, T.u, m)
            kr = grid.descendant_rank(d, T.v, n)
            ok = (jr >= 0) & (kr >= 0)
            if not ok.any():
                continue
            src = coef[d + T.u][jr[ok]]
            out[d + T.v][kr[ok]] += _col(alpha[d][ok], src) * src
    return out


def apply_shift(T: HaarShiftSpec, f: TreeFunction, mu: DyadicMeasure) -> TreeFunction:
    """Analyze, move coefficients, synthesize (root averages are dropped)."""
    if not isinstance(T, HaarShiftSpec):
        raise UnsupportedShift(f"expected a HaarShiftSpec, got {type(T).__name__}")
    if f.backend.exact:
        raise BackendMismatch("shifts mix square roots of m; use the mp or float backend")
    exp = analyze(f, mu)
    coef = exp.coefficient_levels(mu)
    moved = shift_coefficients(T, mu.grid, f.backend, coef)
    zero = np.empty_like(exp.root_averages)
    zero[...] = f.backend.scalar(0)
    return synthesize(HaarExpansion.from_coefficients(mu, f.backend, moved, zero), mu)


Operator = Callable[[TreeFunction], TreeFunction]


def _as_callable(T, mu: DyadicMeasure) -> Operator:
    if isinstance(T, HaarShiftSpec):
        return lambda g: apply_shift(T, g, mu)
    if callable(T):
        return T
    raise UnsupportedShift(f"cannot apply {T!r}")


def commutator(T, b: TreeFunction, f: TreeFunction, mu: DyadicMeasure) -> TreeFunction:
    """[T, b] f = T(b f) - b T(f)."""
    op = _as_callable(T, mu)
    return op(b * f) - b * op(f)


def remainder_shift(T: HaarShiftSpec, b: TreeFunction, mu: DyadicMeasure) -> HaarShiftSpec:
    """The shift [T, Lambda0_b]: coefficients alpha (<b>_J - <b>_K) on each slice."""
    if not isinstance(T, HaarShiftSpec):
        raise UnsupportedShift("remainders are defined for Haar shifts")
    g = mu.grid
    backend = b.backend
    avg = level_averages(b, mu)
    slices = {}
    for (m, n) in T.slices:
        alpha = T.coefficient_arrays(g, backend, (m, n))
        beta = []
        for d in range(g.depth):
            arr = backend.zeros(len(g.internal[d]))
            if d + max(T.u, T.v) < g.depth:
                jr = g.descendant_rank(d, T.u, m)
                kr = g.descendant_rank(d, T.v, n)
                ok = (jr >= 0) & (kr >= 0)
                if ok.any():
                    bj = avg[d + T.u][g.internal[d + T.u][jr[ok]]]
                    bk = avg[d + T.v][g.internal[d + T.v][kr[ok]]]
                    arr[ok] = alpha[d][ok] * (bj - bk)
            beta.append(arr)
        slices[(m, n)] = beta
    return HaarShiftSpec(T.u, T.v, slices, mu.tree, name=f"R[{T.name}]")


def sibling_complete_part(f: TreeFunction, mu: DyadicMeasure) -> TreeFunction:
    """Keep the Haar components h_J with J below a root and J's sibling internal.

    On this span H is an isometry with H^2 = -Id; everything else H kills.
    """
    g = mu.grid
    exp = analyze(f, mu)
    zero = f.backend.scalar(0)
    roots = np.empty_like(exp.root_averages)
    roots[...] = zero
    reduced = []
    for d, r in enumerate(exp.reduced):
        keep = np.zeros(len(r), dtype=bool)
        if d >= 1:
            nodes = g.internal[d]
            keep = g.rank[d][nodes ^ 1] >= 0
        out = r.copy()
        out[~keep] = zero
        reduced.append(out)
    return synthesize(HaarExpansion(f.tree, f.backend, reduced, roots), mu)
