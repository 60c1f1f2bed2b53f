"""Operator norms on L^p(w dmu) over a finite tree.

Functions are vectors of leaf values.  With D = diag(w mu) the L^p(w dmu)
norm of x is the l^p norm of D^(1/p) x, so the norm of A equals the l^p
operator norm of B = D^(1/p) A D^(-1/p).  At p = 2 that is the top singular
value of B.  Elsewhere a nonlinear power iteration (Boyd's method) climbs
to a local maximum of ||Bx||_p / ||x||_p; the value is a certified lower
bound, never a claimed exact norm.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.linalg import LinearOperator, svds

from .backend import FLOAT
from .errors import InvalidExponent, NegativeInput, NoConvergence, ZeroFunction
from .haar import TreeFunction
from .measures import DyadicMeasure
from .shifts import HaarShiftSpec, apply_shift

DENSE_LIMIT = 512  # dense SVD up to here, Lanczos above
POWER_DENSE_LIMIT = 2048  # power iteration multiplies a stored matrix up to here

ArrayMap = Callable[[np.ndarray], np.ndarray]


@dataclass
class LeafOperator:
    """A linear map on leaf values, with its L^2(mu) adjoint.

    Both maps take arrays of shape (N,) or (N, batch).
    """

    mu: DyadicMeasure
    apply: ArrayMap
    adjoint: ArrayMap
    name: str = ""

    @property
    def size(self) -> int:
        return self.mu.grid.n_leaves

    def matrix(self) -> np.ndarray:
        return self.apply(np.eye(self.size))

    def transpose_apply(self, y: np.ndarray) -> np.ndarray:
        """Plain matrix transpose: A^T = M A* M^(-1) with M = diag(mu)."""
        m = _col(self.mu.leaf_masses(FLOAT), y)
        return m * self.adjoint(y / m)

    def __sub__(self, other: LeafOperator) -> LeafOperator:
        return LeafOperator(
            self.mu,
            lambda x: self.apply(x) - other.apply(x),
            lambda y: self.adjoint(y) - other.adjoint(y),
            f"({self.name} - {other.name})",
        )


def _col(v: np.ndarray, like: np.ndarray) -> np.ndarray:
    return v.reshape(v.shape + (1,) * (like.ndim - 1))


def _wrap(mu: DyadicMeasure, fn: Callable[[TreeFunction], TreeFunction]) -> ArrayMap:
    return lambda x: np.asarray(fn(TreeFunction(mu.tree, np.asarray(x, dtype=float), FLOAT)).values, dtype=float)


def shift_operator(T: HaarShiftSpec, mu: DyadicMeasure) -> LeafOperator:
    Ta = T.adjoint()
    return LeafOperator(mu, _wrap(mu, lambda f: apply_shift(T, f, mu)), _wrap(mu, lambda f: apply_shift(Ta, f, mu)), T.name)


def multiplication_operator(b: TreeFunction, mu: DyadicMeasure) -> LeafOperator:
    bv = np.asarray(b.to(FLOAT).values, dtype=float)
    return LeafOperator(mu, lambda x: _col(bv, x) * x, lambda y: _col(bv, y) * y, "b")


def identity_operator(mu: DyadicMeasure) -> LeafOperator:
    return LeafOperator(mu, lambda x: np.array(x, dtype=float), lambda y: np.array(y, dtype=float), "Id")


def commutator_operator(T, b: TreeFunction, mu: DyadicMeasure) -> LeafOperator:
    """[T, b] = T b - b T; T is a shift spec or a LeafOperator."""
    op = T if isinstance(T, LeafOperator) else shift_operator(T, mu)
    bv = np.asarray(b.to(FLOAT).values, dtype=float)

    def fwd(x):
        return op.apply(_col(bv, x) * x) - _col(bv, x) * op.apply(x)

    def adj(y):
        # [T, b]* = b T* - T* b
        return _col(bv, y) * op.adjoint(y) - op.adjoint(_col(bv, y) * y)

    return LeafOperator(mu, fwd, adj, f"[{op.name}, b]")


def as_leaf_operator(T, mu: DyadicMeasure) -> LeafOperator:
    if isinstance(T, LeafOperator):
        return T
    if isinstance(T, HaarShiftSpec):
        return shift_operator(T, mu)
    raise TypeError(f"cannot turn {T!r} into a leaf operator")


# -- norms -------------------------------------------------------------------


def _density(mu: DyadicMeasure, weight: TreeFunction | None) -> np.ndarray:
    d = np.asarray(mu.leaf_masses(FLOAT), dtype=float)
    if weight is not None:
        w = np.asarray(weight.to(FLOAT).values, dtype=float)
        if np.any(w <= 0):
            raise NegativeInput("weights must be positive")
        d = d * w
    return d


def lp_norm(x: np.ndarray, density: np.ndarray, p: float) -> float:
    return float(np.sum(np.abs(x) ** p * density) ** (1.0 / p))


@dataclass
class NormEstimate:
    value: float
    method: str
    certificate: np.ndarray = field(repr=False)
    p: float = 2.0
    iterations: int = 0
    tolerance: float = 0.0
    converged: bool = True
    agreement: float = 1.0  # share of restarts that reached the best value

    def verify(self, T, mu: DyadicMeasure, weight: TreeFunction | None = None) -> float:
        """Re-derive the ratio from the certificate through the operator itself."""
        op = as_leaf_operator(T, mu)
        dens = _density(mu, weight)
        x = self.certificate
        den = lp_norm(x, dens, self.p)
        if den == 0:
            return 0.0
        return lp_norm(op.apply(x), dens, self.p) / den


def _spectral(op: LeafOperator, dens: np.ndarray) -> tuple[float, np.ndarray, str]:
    n = op.size
    s = np.sqrt(dens)
    if n <= DENSE_LIMIT:
        B = s[:, None] * op.matrix() / s[None, :]
        u, sv, vt = np.linalg.svd(B)
        return float(sv[0]), vt[0] / s, "exactSpectral"
    lin = LinearOperator(
        (n, n),
        matvec=lambda v: s * op.apply(np.ravel(v) / s),
        rmatvec=lambda v: op.transpose_apply(s * np.ravel(v)) / s,
        dtype=float,
    )
    u, sv, vt = svds(lin, k=1, tol=1e-12, random_state=0)
    return float(sv[0]), vt[0] / s, "lanczosSpectral"


def _dual(z: np.ndarray, r: float) -> np.ndarray:
    return np.sign(z) * np.abs(z) ** (r - 1)


def _power_iteration(fwd: ArrayMap, tr: ArrayMap, x: np.ndarray, p: float, tol: float, max_iter: int):
    q = p / (p - 1)
    x = x / np.sum(np.abs(x) ** p) ** (1 / p)
    val = 0.0
    for it in range(1, max_iter + 1):
        y = fwd(x)
        new = float(np.sum(np.abs(y) ** p) ** (1 / p))
        if new == 0:
            return 0.0, x, it, True
        z = _dual(tr(_dual(y, p)), q)
        zn = np.sum(np.abs(z) ** p) ** (1 / p)
        if zn == 0:
            return new, x, it, True
        if abs(new - val) <= tol * max(new, 1e-300):
            return new, x, it, True
        val = new
        x = z / zn
    return val, x, max_iter, False


def operator_norm(
    T,
    mu: DyadicMeasure,
    weight: TreeFunction | None = None,
    p: float = 2.0,
    seed: int = 0,
    tol: float = 1e-10,
    restarts: int = 16,
    max_iter: int = 500,
    strict: bool = False,
    method: str = "auto",
) -> NormEstimate:
    """Largest ||T x|| / ||x|| on L^p(w dmu) found, with the realizing vector.

    ``method="power"`` runs the power iteration at p = 2 as well.  With
    ``strict`` a run that never met the tolerance raises NoConvergence
    carrying the best estimate.
    """
    if not 1 < p < np.inf:
        raise InvalidExponent(f"need 1 < p < infinity, got {p}")
    op = as_leaf_operator(T, mu)
    dens = _density(mu, weight)
    if method not in ("auto", "power"):
        raise ValueError(f"unknown method {method!r}")
    if p == 2 and method == "auto":
        val, cert, label = _spectral(op, dens)
        return NormEstimate(val, label, cert, p, 1, 1e-12 * max(val, 1.0), True, 1.0)
    s = dens ** (1.0 / p)
    if op.size <= POWER_DENSE_LIMIT:
        B = s[:, None] * op.matrix() / s[None, :]
        fwd, tr = (lambda v: B @ v), (lambda v: B.T @ v)
    else:
        fwd = lambda v: s * op.apply(v / s)  # noqa: E731
        tr = lambda v: op.transpose_apply(s * v) / s  # noqa: E731
    results = []
    for k in range(restarts):
        rng = np.random.default_rng([seed, k])
        x0 = rng.standard_normal(op.size)
        results.append(_power_iteration(fwd, tr, x0, p, tol, max_iter))
    best = max(range(restarts), key=lambda k: (results[k][0], -k))
    val, x, its, conv = results[best]
    agree = sum(1 for r in results if abs(r[0] - val) <= 1e-6 * max(val, 1e-300)) / restarts
    est = NormEstimate(val, "pPowerIteration", x / s, p, its, tol, conv, agree)
    if strict and not conv:
        raise NoConvergence(f"power iteration stalled at {val}", est)
    return est


def random_lower_bound(T, mu: DyadicMeasure, weight: TreeFunction | None = None, p: float = 2.0, seed: int = 0, samples: int = 256) -> NormEstimate:
    """Best ratio over random vectors; a crude but unconditional lower bound."""
    op = as_leaf_operator(T, mu)
    dens = _density(mu, weight)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((op.size, samples))
    Y = op.apply(X)
    num = np.sum(np.abs(Y) ** p * dens[:, None], axis=0) ** (1 / p)
    den = np.sum(np.abs(X) ** p * dens[:, None], axis=0) ** (1 / p)
    k = int(np.argmax(num / den))
    return NormEstimate(float(num[k] / den[k]), "randomLowerBound", X[:, k], p, samples, 0.0, True, 1.0)


def brute_force_norm(T, mu: DyadicMeasure, weight: TreeFunction | None = None, p: float = 2.0, grid: int = 9) -> float:
    """Direction-grid search plus local refinement; for a handful of leaves only."""
    op = as_leaf_operator(T, mu)
    n = op.size
    if n > 6:
        raise ValueError("brute force is limited to 6 leaves")
    dens = _density(mu, weight)
    A = op.matrix()

    def ratio(x):
        den = lp_norm(x, dens, p)
        return lp_norm(A @ x, dens, p) / den if den > 0 else 0.0

    ticks = np.linspace(-1.0, 1.0, grid)
    cands = []
    for pt in itertools.product(ticks, repeat=n - 1):
        # fix the last coordinate's sign by homogeneity
        for last in (0.0, 1.0):
            x = np.array(pt + (last,))
            if np.any(x):
                cands.append((ratio(x), x))
    cands.sort(key=lambda t: -t[0])
    best = cands[0][0]
    for _, x0 in cands[:8]:
        res = minimize(lambda x: -ratio(x), x0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
        best = max(best, -res.fun)
    return float(best)


# -- weak type ---------------------------------------------------------------


@dataclass
class WeakTypeRatio:
    ratio: float
    level: float


def weak_type_ratio(T, mu: DyadicMeasure, f: TreeFunction, levels: Iterable[float] | None = None) -> WeakTypeRatio:
    """sup over levels t of t mu{|Tf| > t} / ||f||_1.

    Without a level grid the supremum is taken exactly: it is approached as
    t rises to one of the values |Tf| takes, so t mu{|Tf| >= t} over those
    values gives it.
    """
    op = as_leaf_operator(T, mu)
    w = np.asarray(mu.leaf_masses(FLOAT), dtype=float)
    fv = np.asarray(f.to(FLOAT).values, dtype=float)
    norm = float(np.sum(np.abs(fv) * w))
    if norm == 0:
        raise ZeroFunction("f vanishes")
    tf = np.abs(op.apply(fv))
    if levels is None:
        order = np.argsort(-tf, kind="stable")
        ts, acc = tf[order], np.cumsum(w[order])
        # close each run of equal values before scoring it
        last = np.append(ts[1:] != ts[:-1], True)
        ts, vals = ts[last], ts[last] * acc[last]
    else:
        ts = np.asarray(list(levels), dtype=float)
        vals = np.array([t * w[tf > t].sum() for t in ts])
    if not len(vals) or vals.max() <= 0:
        return WeakTypeRatio(0.0, 0.0)
    k = int(np.argmax(vals))
    return WeakTypeRatio(float(vals[k]) / norm, float(ts[k]))


# -- scans -----------------------------------------------------------------


def norm_scan(grid: Iterable[dict], evaluate: Callable[[dict], dict], out=None) -> list[dict]:
    """Evaluate every grid point; a failing row records its error and the scan goes on.

    With ``out`` (a path or a text stream) the rows are written as CSV.
    """
    rows = []
    for params in grid:
        row = dict(params)
        try:
            row.update(evaluate(params))
            row["error"] = ""
        except Exception as exc:  # noqa: BLE001 - a scan must survive bad points
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    if out is not None:
        keys = list(dict.fromkeys(k for r in rows for k in r))
        if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
            with open(out, "w", newline="") as fh:
                _write_csv(fh, keys, rows)
        else:
            _write_csv(out, keys, rows)
    return rows


def _write_csv(fh: io.TextIOBase, keys: list[str], rows: list[dict]) -> None:
    w = csv.DictWriter(fh, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
