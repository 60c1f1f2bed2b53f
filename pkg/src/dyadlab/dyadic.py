"""Dyadic intervals, finite dyadic trees and their compiled level layout.

An interval ``DyadicInterval(k, p)`` is ``[p 2^-k, (p+1) 2^-k)``.  A
``TreeSpec`` is a finite forest: roots at one scale, refined down to a leaf
scale, optionally with some intervals declared leaves early (``pruned``).

``Grid`` is the compiled form used by the numerical modules.  Nodes are stored
level by level (level ``d`` is scale ``root_scale + d``) in left-to-right order,
and the two children of the ``j``-th internal node of a level sit at positions
``2j`` and ``2j + 1`` of the next level.  Leaves are numbered left to right;
every function on the tree is a vector indexed by that numbering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterator

import numpy as np

from .errors import InvalidIndex, OutOfTree, UnsupportedTree

_MAX_GRID_DEPTH = 48


@dataclass(frozen=True, order=True)
class DyadicInterval:
    scale: int
    position: int

    def __post_init__(self):
        object.__setattr__(self, "scale", int(self.scale))
        object.__setattr__(self, "position", int(self.position))

    @property
    def length(self) -> Fraction:
        return Fraction(2) ** (-self.scale)

    @property
    def left(self) -> Fraction:
        return self.position * self.length

    @property
    def right(self) -> Fraction:
        return (self.position + 1) * self.length

    @property
    def is_right_child(self) -> bool:
        return self.position % 2 == 1

    def parent(self) -> DyadicInterval:
        return DyadicInterval(self.scale - 1, self.position >> 1)

    def left_child(self) -> DyadicInterval:
        return DyadicInterval(self.scale + 1, 2 * self.position)

    def right_child(self) -> DyadicInterval:
        return DyadicInterval(self.scale + 1, 2 * self.position + 1)

    def children(self) -> tuple[DyadicInterval, DyadicInterval]:
        return self.left_child(), self.right_child()

    def sibling(self) -> DyadicInterval:
        return DyadicInterval(self.scale, self.position ^ 1)

    def ancestor(self, up: int) -> DyadicInterval:
        return DyadicInterval(self.scale - up, self.position >> up)

    def contains(self, other: DyadicInterval) -> bool:
        """Non-strict containment."""
        up = other.scale - self.scale
        return up >= 0 and (other.position >> up) == self.position

    def descendant(self, u: int, m: int) -> DyadicInterval:
        """The m-th (1-based, left to right) descendant u generations down."""
        return DyadicInterval(self.scale + u, (self.position << u) + m - 1)

    def __str__(self) -> str:
        return f"{self.scale}:{self.position}"

    @classmethod
    def parse(cls, text: str) -> DyadicInterval:
        try:
            k, p = text.strip().split(":")
            return cls(int(k), int(p))
        except ValueError as exc:
            raise ValueError(f"bad interval literal {text!r}") from exc


Interval = DyadicInterval


@dataclass(frozen=True)
class TreeSpec:
    """Roots ``(root_scale, p)`` for p in ``roots``, refined to ``leaf_scale``."""

    root_scale: int
    roots: tuple[int, ...]
    leaf_scale: int
    pruned: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        roots = tuple(sorted({int(p) for p in self.roots}))
        if not roots:
            raise UnsupportedTree("a tree needs at least one root")
        if self.leaf_scale < self.root_scale:
            raise UnsupportedTree("leaf scale above root scale")
        object.__setattr__(self, "roots", roots)
        pruned = frozenset(self.pruned)
        for iv in pruned:
            if not (self.root_scale <= iv.scale < self.leaf_scale):
                raise UnsupportedTree(f"pruned interval {iv} outside the refinable range")
            if (iv.position >> (iv.scale - self.root_scale)) not in roots:
                raise UnsupportedTree(f"pruned interval {iv} is not under a root")
        for iv in pruned:
            cur = iv
            while cur.scale > self.root_scale:
                cur = cur.parent()
                if cur in pruned:
                    raise UnsupportedTree(f"pruned interval {iv} sits below pruned {cur}")
        object.__setattr__(self, "pruned", pruned)

    @classmethod
    def unit(cls, leaf_scale: int) -> TreeSpec:
        """The complete tree on [0, 1)."""
        return cls(0, (0,), leaf_scale)

    @property
    def depth(self) -> int:
        return self.leaf_scale - self.root_scale

    def root_of(self, iv: DyadicInterval) -> DyadicInterval:
        return iv.ancestor(iv.scale - self.root_scale)

    def contains(self, iv: DyadicInterval) -> bool:
        if not (self.root_scale <= iv.scale <= self.leaf_scale):
            return False
        if (iv.position >> (iv.scale - self.root_scale)) not in self.roots:
            return False
        if self.pruned:
            cur = iv
            while cur.scale > self.root_scale:
                cur = cur.parent()
                if cur in self.pruned:
                    return False
        return True

    def is_leaf(self, iv: DyadicInterval) -> bool:
        return iv.scale == self.leaf_scale or iv in self.pruned

    def is_internal(self, iv: DyadicInterval) -> bool:
        return self.contains(iv) and not self.is_leaf(iv)

    def intervals(self) -> Iterator[DyadicInterval]:
        """All tree intervals in scale-then-position order."""
        g = grid_of(self)
        for d in range(g.depth + 1):
            k = self.root_scale + d
            for p in g.pos[d]:
                yield DyadicInterval(k, int(p))

    def internal_intervals(self) -> Iterator[DyadicInterval]:
        g = grid_of(self)
        for d in range(g.depth):
            k = self.root_scale + d
            for p in g.pos[d][g.internal[d]]:
                yield DyadicInterval(k, int(p))

    def leaves(self) -> list[DyadicInterval]:
        """Leaves left to right."""
        return grid_of(self).leaf_intervals

    def describe(self) -> str:
        text = f"root_scale={self.root_scale} roots={','.join(map(str, self.roots))} leaf_scale={self.leaf_scale}"
        if self.pruned:
            text += " pruned=" + ",".join(str(iv) for iv in sorted(self.pruned))
        return text

    @classmethod
    def from_description(cls, text: str) -> TreeSpec:
        fields = dict(tok.split("=", 1) for tok in text.split())
        pruned = frozenset(
            DyadicInterval.parse(s) for s in fields.get("pruned", "").split(",") if s
        )
        return cls(
            int(fields["root_scale"]),
            tuple(int(p) for p in fields["roots"].split(",")),
            int(fields["leaf_scale"]),
            pruned,
        )


_RELATIONS = ("parent", "leftChild", "rightChild", "sibling")


def navigate(tree: TreeSpec, iv: DyadicInterval, relation: str) -> DyadicInterval:
    """Parent, children or sibling of ``iv`` inside ``tree``; raises OutOfTree."""
    if not tree.contains(iv):
        raise OutOfTree(f"{iv} is not in the tree")
    if relation == "parent":
        if iv.scale == tree.root_scale:
            raise OutOfTree(f"{iv} is a root")
        return iv.parent()
    if relation in ("leftChild", "rightChild"):
        if tree.is_leaf(iv):
            raise OutOfTree(f"{iv} is a leaf")
        return iv.left_child() if relation == "leftChild" else iv.right_child()
    if relation == "sibling":
        if iv.scale == tree.root_scale:
            raise OutOfTree(f"{iv} is a root; cross-root siblings are not navigable")
        return iv.sibling()
    raise ValueError(f"relation must be one of {_RELATIONS}")


def descendants_at(tree: TreeSpec, iv: DyadicInterval, u: int) -> list[DyadicInterval]:
    """The 2^u descendants of ``iv`` at depth u below it, left to right."""
    if u < 0:
        raise InvalidIndex("u must be non-negative")
    if not tree.contains(iv):
        raise OutOfTree(f"{iv} is not in the tree")
    out = [iv.descendant(u, m) for m in range(1, 2**u + 1)]
    if u and not all(tree.contains(j) for j in out):
        raise OutOfTree(f"{iv} has no complete generation {u} levels down")
    return out


def sliced_subinterval(tree: TreeSpec, iv: DyadicInterval, u: int, m: int) -> DyadicInterval:
    if u < 0 or not (1 <= m <= 2**u):
        raise InvalidIndex(f"slice index {m} outside 1..2^{u}")
    if not tree.contains(iv):
        raise OutOfTree(f"{iv} is not in the tree")
    out = iv.descendant(u, m)
    if not tree.contains(out):
        raise OutOfTree(f"{out} is not in the tree")
    return out


class Grid:
    """Level-by-level index arrays for a TreeSpec (see module docstring)."""

    def __init__(self, tree: TreeSpec):
        self.tree = tree
        depth = tree.depth
        if depth > _MAX_GRID_DEPTH:
            raise UnsupportedTree(f"tree depth {depth} exceeds {_MAX_GRID_DEPTH}")
        self.depth = depth
        pruned_by_level: dict[int, set[int]] = {}
        for iv in tree.pruned:
            pruned_by_level.setdefault(iv.scale - tree.root_scale, set()).add(iv.position)

        pos = [np.array(tree.roots, dtype=np.int64)]
        internal, leaf_idx = [], []
        for d in range(depth + 1):
            p = pos[d]
            if d == depth:
                is_int = np.zeros(len(p), dtype=bool)
            else:
                is_int = np.ones(len(p), dtype=bool)
                if d in pruned_by_level:
                    is_int &= ~np.isin(p, np.fromiter(pruned_by_level[d], dtype=np.int64))
            internal.append(np.flatnonzero(is_int))
            leaf_idx.append(np.flatnonzero(~is_int))
            if d < depth:
                q = p[is_int]
                pos.append(np.stack([2 * q, 2 * q + 1], axis=1).reshape(-1))
        self.pos = pos
        self.internal = internal
        self.leaf_idx = leaf_idx
        self.sizes = [len(p) for p in pos]

        span = int(max(abs(int(pos[0].min())), abs(int(pos[0].max())) + 1))
        if span.bit_length() + depth > 62:
            raise UnsupportedTree("positions too large for the compiled layout")

        rank = []
        for d in range(depth + 1):
            r = np.full(self.sizes[d], -1, dtype=np.int64)
            r[internal[d]] = np.arange(len(internal[d]))
            rank.append(r)
        self.rank = rank

        # leaf numbering, left to right
        keys, lev, idx = [], [], []
        for d in range(depth + 1):
            li = leaf_idx[d]
            keys.append(pos[d][li] << (depth - d))
            lev.append(np.full(len(li), d, dtype=np.int64))
            idx.append(li)
        keys = np.concatenate(keys)
        lev = np.concatenate(lev)
        idx = np.concatenate(idx)
        order = np.argsort(keys, kind="stable")
        self.leaf_key = keys[order]
        self.leaf_level = lev[order]
        self.leaf_node = idx[order]
        self.n_leaves = len(order)
        leaf_global = [np.empty(0, dtype=np.int64) for _ in range(depth + 1)]
        inv = np.empty(self.n_leaves, dtype=np.int64)
        inv[order] = np.arange(self.n_leaves)
        start = 0
        for d in range(depth + 1):
            n = len(leaf_idx[d])
            leaf_global[d] = inv[start : start + n]
            start += n
        self.leaf_global = leaf_global

        # contiguous leaf ranges of each node
        lo, hi = [], []
        for d in range(depth + 1):
            a = pos[d] << (depth - d)
            b = (pos[d] + 1) << (depth - d)
            lo.append(np.searchsorted(self.leaf_key, a, side="left"))
            hi.append(np.searchsorted(self.leaf_key, b, side="left"))
        self.lo, self.hi = lo, hi
        self.covered = [
            np.concatenate([np.arange(a, b) for a, b in zip(lo[d], hi[d])]) if self.sizes[d] else np.empty(0, np.int64)
            for d in range(depth + 1)
        ]
        self.parent = [np.empty(0, dtype=np.int64)] + [
            np.repeat(internal[d - 1], 2) for d in range(1, depth + 1)
        ]
        self.complete = not tree.pruned

    # -- lookups ---------------------------------------------------------
    def level_of(self, iv: DyadicInterval) -> int:
        return iv.scale - self.tree.root_scale

    def index(self, iv: DyadicInterval) -> tuple[int, int]:
        d = iv.scale - self.tree.root_scale
        if not (0 <= d <= self.depth):
            raise OutOfTree(f"{iv} is not in the tree")
        p = self.pos[d]
        i = int(np.searchsorted(p, iv.position))
        if i >= len(p) or p[i] != iv.position:
            raise OutOfTree(f"{iv} is not in the tree")
        return d, i

    def interval(self, d: int, i: int) -> DyadicInterval:
        return DyadicInterval(self.tree.root_scale + d, int(self.pos[d][i]))

    def intervals_at(self, d: int, idx=None) -> list[DyadicInterval]:
        p = self.pos[d] if idx is None else self.pos[d][idx]
        k = self.tree.root_scale + d
        return [DyadicInterval(k, int(x)) for x in p]

    @cached_property
    def leaf_intervals(self) -> list[DyadicInterval]:
        out = []
        for g in range(self.n_leaves):
            d = int(self.leaf_level[g])
            out.append(self.interval(d, int(self.leaf_node[g])))
        return out

    def lookup_positions(self, d: int, positions: np.ndarray) -> np.ndarray:
        """Node indices at level d for the given positions, -1 where absent."""
        p = self.pos[d]
        i = np.searchsorted(p, positions)
        i = np.minimum(i, len(p) - 1)
        ok = p[i] == positions
        return np.where(ok, i, -1)

    @lru_cache(maxsize=None)
    def descendant_rank(self, d: int, u: int, m: int) -> np.ndarray:
        """For each internal node at level d, internal rank of its (u, m) descendant or -1."""
        idx = self.internal[d]
        if d + u > self.depth:
            return np.full(len(idx), -1, dtype=np.int64)
        target = (self.pos[d][idx] << u) + (m - 1)
        node = self.lookup_positions(d + u, target)
        out = np.full(len(idx), -1, dtype=np.int64)
        ok = node >= 0
        out[ok] = self.rank[d + u][node[ok]]
        return out

    # -- aggregation -----------------------------------------------------
    def aggregate(self, leaf_vals: np.ndarray) -> list[np.ndarray]:
        """Per-level sums of leaf values over each node's leaves."""
        rest = leaf_vals.shape[1:]
        levels: list[np.ndarray] = [None] * (self.depth + 1)  # type: ignore[list-item]
        for d in range(self.depth, -1, -1):
            out = np.empty((self.sizes[d],) + rest, dtype=leaf_vals.dtype)
            li = self.leaf_idx[d]
            if len(li):
                out[li] = leaf_vals[self.leaf_global[d]]
            if d < self.depth and len(self.internal[d]):
                ch = levels[d + 1]
                out[self.internal[d]] = ch[0::2] + ch[1::2]
            levels[d] = out
        return levels

    def to_leaves(self, levels: list[np.ndarray]) -> np.ndarray:
        """Read leaf values out of per-level arrays."""
        first = levels[0]
        out = np.empty((self.n_leaves,) + first.shape[1:], dtype=first.dtype)
        for d in range(self.depth + 1):
            li = self.leaf_idx[d]
            if len(li):
                out[self.leaf_global[d]] = levels[d][li]
        return out

    def segsum(self, leaf_vals: np.ndarray, d: int) -> np.ndarray:
        """Sum of leaf values over each node of level d."""
        lo, hi = self.lo[d], self.hi[d]
        if leaf_vals.dtype == object:
            cs = np.concatenate([np.array([leaf_vals[0] * 0], dtype=object), np.cumsum(leaf_vals)])
            return cs[hi] - cs[lo]
        pad = np.concatenate([leaf_vals, np.zeros((1,) + leaf_vals.shape[1:])])
        idx = np.stack([lo, hi], axis=1).reshape(-1)
        sums = np.add.reduceat(pad, idx)[0::2]
        sums[lo == hi] = 0
        return sums

    def broadcast(self, vals: np.ndarray, d: int, fill=0) -> np.ndarray:
        """Leaf vector carrying each level-d node's value on its leaves."""
        out = np.empty((self.n_leaves,) + vals.shape[1:], dtype=vals.dtype)
        out[...] = fill
        out[self.covered[d]] = np.repeat(vals, self.hi[d] - self.lo[d], axis=0)
        return out


@lru_cache(maxsize=64)
def grid_of(tree: TreeSpec) -> Grid:
    return Grid(tree)
