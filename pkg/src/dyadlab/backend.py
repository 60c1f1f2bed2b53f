"""Numeric backends: exact rationals, multiprecision floats and plain float64.

Every array handled by the package is a numpy array.  The exact and the
multiprecision backends use ``dtype=object`` holding ``Fraction`` or
``mpmath.mpf`` scalars; the float backend uses ``float64``.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from .errors import BackendMismatch


def _iroot(n: int, k: int) -> int | None:
    """Exact integer k-th root of n >= 0, or None."""
    if n < 0:
        return None
    if n < 2:
        return n
    r = int(round(n ** (1.0 / k))) if n.bit_length() < 1000 else 1 << (n.bit_length() // k)
    # Newton polish, then a small local search
    for _ in range(200):
        nr = ((k - 1) * r + n // r ** (k - 1)) // k
        if abs(nr - r) <= 1:
            r = nr
            break
        r = nr
    for c in (r - 1, r, r + 1):
        if c >= 0 and c**k == n:
            return c
    return None


class Backend:
    name = "abstract"
    exact = False
    dtype: object = object

    def scalar(self, x):
        raise NotImplementedError

    def asarray(self, values) -> np.ndarray:
        arr = np.asarray(values, dtype=object)
        out = np.empty(arr.shape, dtype=self.dtype)
        flat_in = arr.reshape(-1)
        flat_out = out.reshape(-1)
        for i, v in enumerate(flat_in):
            flat_out[i] = self.scalar(v)
        return out

    def zeros(self, shape) -> np.ndarray:
        out = np.empty(shape, dtype=self.dtype)
        out[...] = self.scalar(0)
        return out

    def sqrt(self, arr):
        raise NotImplementedError

    def power(self, arr, exponent):
        raise NotImplementedError

    def exp(self, arr):
        raise NotImplementedError

    def log(self, arr):
        raise NotImplementedError

    def to_float(self, arr) -> np.ndarray:
        return np.asarray(arr, dtype=float)

    def __repr__(self):
        return f"<backend {self.name}>"


class RationalBackend(Backend):
    name = "rational"
    exact = True

    def scalar(self, x):
        if isinstance(x, Fraction):
            return x
        if isinstance(x, (int, np.integer)):
            return Fraction(int(x))
        if isinstance(x, str):
            return Fraction(x)
        if isinstance(x, float) and x.is_integer():
            return Fraction(int(x))
        raise BackendMismatch(f"cannot store {x!r} exactly")

    def sqrt(self, arr):
        return self.power(arr, Fraction(1, 2))

    def power(self, arr, exponent):
        """Exact power; fractional exponents only when every root is rational."""
        e = Fraction(exponent)
        a = np.asarray(arr, dtype=object)
        if e.denominator == 1:
            k = int(e)
            f = np.frompyfunc(lambda x: x**k, 1, 1)
            return f(a)

        def root(x):
            if x < 0:
                raise BackendMismatch("negative base")
            num = _iroot(x.numerator, e.denominator)
            den = _iroot(x.denominator, e.denominator)
            if num is None or den is None:
                raise BackendMismatch(f"{x} has no rational {e.denominator}-th root")
            return Fraction(num, den) ** e.numerator

        return np.frompyfunc(root, 1, 1)(a)

    def exp(self, arr):
        raise BackendMismatch("exp is not exact")

    def log(self, arr):
        raise BackendMismatch("log is not exact")


class MPBackend(Backend):
    """mpmath floats at a fixed binary precision (independent context)."""

    exact = False

    def __init__(self, bits: int):
        self.bits = int(bits)
        self.ctx = mpmath.MPContext()
        self.ctx.prec = self.bits
        self.name = f"mp{self.bits}"
        self._sqrt = np.frompyfunc(self.ctx.sqrt, 1, 1)
        self._exp = np.frompyfunc(self.ctx.exp, 1, 1)
        self._log = np.frompyfunc(self.ctx.log, 1, 1)

    def scalar(self, x):
        ctx = self.ctx
        if isinstance(x, Fraction):
            return ctx.mpf(x.numerator) / x.denominator
        if isinstance(x, (int, np.integer)):
            return ctx.mpf(int(x))
        if isinstance(x, mpmath.mpf):
            return ctx.mpf(x)
        return ctx.mpf(x)

    def sqrt(self, arr):
        return self._sqrt(np.asarray(arr, dtype=object))

    def power(self, arr, exponent):
        e = Fraction(exponent)
        if e.denominator == 1:
            k = int(e)
            return np.frompyfunc(lambda x: x**k, 1, 1)(np.asarray(arr, dtype=object))
        ee = self.scalar(e)
        return np.frompyfunc(lambda x: self.ctx.power(x, ee), 1, 1)(np.asarray(arr, dtype=object))

    def exp(self, arr):
        return self._exp(np.asarray(arr, dtype=object))

    def log(self, arr):
        return self._log(np.asarray(arr, dtype=object))


class FloatBackend(Backend):
    name = "float"
    exact = False
    dtype = np.float64

    def scalar(self, x):
        return float(x)

    def asarray(self, values) -> np.ndarray:
        arr = np.asarray(values)
        if arr.dtype == object:
            return np.array([float(v) for v in arr.reshape(-1)], dtype=float).reshape(arr.shape)
        return arr.astype(float)

    def zeros(self, shape):
        return np.zeros(shape)

    def sqrt(self, arr):
        return np.sqrt(np.asarray(arr, dtype=float))

    def power(self, arr, exponent):
        return np.power(np.asarray(arr, dtype=float), float(exponent))

    def exp(self, arr):
        return np.exp(np.asarray(arr, dtype=float))

    def log(self, arr):
        return np.log(np.asarray(arr, dtype=float))


RATIONAL = RationalBackend()
FLOAT = FloatBackend()


@lru_cache(maxsize=None)
def mp(bits: int = 128) -> MPBackend:
    return MPBackend(bits)


def get_backend(name: str | Backend) -> Backend:
    if isinstance(name, Backend):
        return name
    if name == "rational":
        return RATIONAL
    if name == "float":
        return FLOAT
    if name.startswith("mp"):
        return mp(int(name[2:] or 128))
    raise BackendMismatch(f"unknown backend {name!r}")


def as_float(x) -> float:
    """Best float approximation of a scalar from any backend."""
    if isinstance(x, Fraction):
        return x.numerator / x.denominator if x.denominator < 1 << 1000 else float(x)
    return float(x)
