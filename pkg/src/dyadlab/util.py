"""Small helpers shared by the numerical modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyadic import DyadicInterval, Grid


def first_max(values: np.ndarray) -> int:
    """Index of the first maximal entry (works for object arrays)."""
    if values.dtype != object:
        return int(np.argmax(values))
    best = 0
    for i in range(1, len(values)):
        if values[i] > values[best]:
            best = i
    return best


def max_value(values: np.ndarray):
    if values.dtype != object:
        return values.max()
    return max(values)


@dataclass
class BestPair:
    """Running supremum over (I, J) candidate pairs.

    Ties go to the pair that comes first in scale-then-position order,
    comparing I before J.
    """

    value: object = None
    first: DyadicInterval | None = None
    second: DyadicInterval | None = None

    def _key(self, a: DyadicInterval, b: DyadicInterval | None):
        return (a.scale, a.position) + ((b.scale, b.position) if b is not None else ())

    def offer(self, value, a: DyadicInterval, b: DyadicInterval | None = None) -> None:
        if self.value is None or value > self.value or (
            value == self.value and self._key(a, b) < self._key(self.first, self.second)
        ):
            self.value, self.first, self.second = value, a, b

    def offer_array(self, grid: Grid, values: np.ndarray, d_a: int, idx_a, d_b=None, idx_b=None) -> None:
        if len(values) == 0:
            return
        top = max_value(values)
        if self.value is not None and top < self.value:
            return
        ties = np.flatnonzero(values == top) if values.dtype != object else [
            i for i in range(len(values)) if values[i] == top
        ]
        for t in ties:
            a = grid.interval(d_a, int(idx_a[t]))
            b = grid.interval(d_b, int(idx_b[t])) if d_b is not None else None
            self.offer(top, a, b)
