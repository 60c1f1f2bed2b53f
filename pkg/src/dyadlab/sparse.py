"""Calderon-Zygmund decompositions, stopping families and sparse forms.

The stopping rule is the usual one on a dyadic tree: the stopping intervals
of f at height t inside I are the maximal J strictly inside I with
<f>_J > t.  Sparse families are grown from a top interval by stopping at
16 times the current averages of two functions at once, then closed under
"both children present => add the parent".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .backend import FLOAT, as_float
from .dyadic import DyadicInterval, Grid
from .errors import (
    AtomicMeasure,
    CertificateViolation,
    HeightTooLow,
    NegativeInput,
    OutOfTree,
    RecursionBudgetExceeded,
    UnsupportedTree,
)
from .haar import TreeFunction, analyze, level_averages
from .measures import DyadicMeasure, regularity_characteristics
from .shifts import apply_shift, dyadic_hilbert
from .weights import bmo_norm

STOPPING_FACTOR = 16


def _nonnegative(f: TreeFunction) -> None:
    if any(x < 0 for x in f.values):
        raise NegativeInput("expected a non-negative function")


def _maximal_above(g: Grid, avg: list[np.ndarray], d: int, i: int, threshold) -> list[tuple[int, int]]:
    """Maximal (level, index) strictly inside node (d, i) with average > threshold."""
    out = []
    r = g.rank[d][i]
    if r < 0:
        return out
    cand = np.array([2 * r, 2 * r + 1])
    e = d + 1
    while len(cand):
        hit = np.array([v > threshold for v in avg[e][cand]], dtype=bool)
        out.extend((e, int(j)) for j in cand[hit])
        rest = g.rank[e][cand[~hit]]
        rest = rest[rest >= 0]
        cand = np.stack([2 * rest, 2 * rest + 1], axis=1).reshape(-1)
        e += 1
    return out


def _support_root(f: TreeFunction, g: Grid) -> DyadicInterval:
    nz = np.flatnonzero(np.array([x != 0 for x in f.values], dtype=bool))
    if not len(nz):
        return g.interval(0, 0)
    roots = {g.tree.root_of(g.leaf_intervals[k]) for k in (nz[0], nz[-1])}
    if len(roots) != 1:
        raise UnsupportedTree("the support spans several roots; pass the top interval explicitly")
    return roots.pop()


@dataclass
class CZConstants:
    """Constants the certificate checks against."""

    l1: Fraction = Fraction(2)
    # 0 <= g <= 2 height and the integral of g equals that of f, so 2^(p-1) works
    lp: dict = field(default_factory=lambda: {2: 2.0, 4: 8.0})
    bmo: float = 1.0


@dataclass
class CZCertificate:
    zero_mean: bool
    l1_ratio: object
    lp_ratio: dict
    bmo_ratio: object
    constants: CZConstants

    @property
    def ok(self) -> bool:
        return (
            self.zero_mean
            and self.l1_ratio <= self.constants.l1
            and all(self.lp_ratio[p] <= self.constants.lp[p] for p in self.lp_ratio)
            and self.bmo_ratio <= self.constants.bmo
        )


@dataclass
class CZDecomposition:
    top: DyadicInterval
    height: object
    stopping: list[DyadicInterval]
    pieces: list[TreeFunction]
    good: TreeFunction
    certificate: CZCertificate


def cz_decompose(
    f: TreeFunction,
    mu: DyadicMeasure,
    height,
    top: DyadicInterval | None = None,
    constants: CZConstants | None = None,
) -> CZDecomposition:
    """f = g + sum_k b_k with b_k = f 1_{I_k} - <f 1_{I_k}>_{parent(I_k)} 1_{parent(I_k)}.

    The certificate checks: every piece has zero integral; ||b_k||_1 <= l1
    times the integral of f over I_k; ||g||_p^p <= C_p height^(p-1) ||f||_1;
    ||g||_BMO <= bmo times the height.  A failed check raises.
    """
    constants = constants or CZConstants()
    _nonnegative(f)
    g = mu.grid
    top = top or _support_root(f, g)
    d0, i0 = g.index(top)
    outside = np.ones(g.n_leaves, dtype=bool)
    outside[g.lo[d0][i0] : g.hi[d0][i0]] = False
    if any(x != 0 for x in f.values[outside]):
        raise OutOfTree(f"f is not supported in {top}")
    avg = level_averages(f, mu)
    if height < avg[d0][i0]:
        raise HeightTooLow(f"height {height} is below the top average {avg[d0][i0]}")
    stops = _maximal_above(g, avg, d0, i0, height)
    stops.sort(key=lambda t: g.lo[t[0]][t[1]])
    masses = mu.level_masses(f.backend)
    leafw = mu.leaf_masses(f.backend)
    zero = f.backend.scalar(0)
    pieces, intervals = [], []
    good = f.values.copy()
    for d, i in stops:
        par = g.parent[d][i]
        lo, hi = g.lo[d][i], g.hi[d][i]
        plo, phi = g.lo[d - 1][par], g.hi[d - 1][par]
        c = avg[d][i] * masses[d][i] / masses[d - 1][par]
        vals = np.empty(g.n_leaves, dtype=f.values.dtype)
        vals[...] = zero
        vals[plo:phi] = -c
        vals[lo:hi] += f.values[lo:hi]
        pieces.append(TreeFunction(mu.tree, vals, f.backend))
        good = good - vals
        intervals.append(g.interval(d, i))
    good_f = TreeFunction(mu.tree, good, f.backend)

    zero_mean = all(sum(p.values * leafw) == 0 for p in pieces)
    l1 = Fraction(0) if f.backend.exact else 0.0
    for (d, i), p in zip(stops, pieces):
        mass_f = avg[d][i] * masses[d][i]
        norm = sum(abs(x) * w for x, w in zip(p.values, leafw))
        if mass_f > 0:
            l1 = max(l1, norm / mass_f)
    f_l1 = sum(f.values * leafw)
    lp = {}
    for p in constants.lp:
        gp = sum(abs(x) ** p * w for x, w in zip(good, leafw))
        lp[p] = as_float(gp) / (as_float(height) ** (p - 1) * as_float(f_l1)) if f_l1 > 0 else 0.0
    gnorm = bmo_norm(good_f, mu, exponents=(1,)).norm if g.depth >= 1 else zero
    bmo_ratio = as_float(gnorm) / as_float(height) if height > 0 else 0.0
    cert = CZCertificate(bool(zero_mean), l1, lp, bmo_ratio, constants)
    if not cert.ok:
        raise CertificateViolation(f"CZ certificate failed: {cert}")
    return CZDecomposition(top, height, intervals, pieces, good_f, cert)


# -- stopping families ------------------------------------------------------


class _Averages:
    """Exact level averages of a pair of functions with interval lookups."""

    def __init__(self, f1: TreeFunction, f2: TreeFunction, mu: DyadicMeasure):
        _nonnegative(f1)
        _nonnegative(f2)
        self.mu = mu
        self.g = mu.grid
        self.a1 = level_averages(f1, mu)
        self.a2 = level_averages(f2, mu)

    def children(self, d: int, i: int) -> list[tuple[int, int]]:
        t1 = STOPPING_FACTOR * self.a1[d][i]
        t2 = STOPPING_FACTOR * self.a2[d][i]
        found = set(_maximal_above(self.g, self.a1, d, i, t1)) | set(_maximal_above(self.g, self.a2, d, i, t2))
        # keep maximal ones
        out = []
        for e, j in found:
            up_e, up_j, keep = e, j, True
            while up_e > d + 1:
                up_j = int(self.g.parent[up_e][up_j])
                up_e -= 1
                if (up_e, up_j) in found:
                    keep = False
                    break
            if keep:
                out.append((e, j))
        return sorted(out, key=lambda t: self.g.lo[t[0]][t[1]])


@dataclass
class StoppingChildren:
    parent: DyadicInterval
    bad: list[DyadicInterval]
    tree_grid: Grid = field(repr=False)

    def good(self) -> list[DyadicInterval]:
        """Intervals of D(parent) not inside any stopping child."""
        g = self.tree_grid
        d0, i0 = g.index(self.parent)
        blocked = {g.index(b) for b in self.bad}
        out = [self.parent]
        cand = [(d0, i0)]
        while cand:
            nxt = []
            for d, i in cand:
                r = g.rank[d][i]
                if r < 0:
                    continue
                for c in (2 * r, 2 * r + 1):
                    if (d + 1, int(c)) not in blocked:
                        out.append(g.interval(d + 1, int(c)))
                        nxt.append((d + 1, int(c)))
            cand = nxt
        return out


def stopping_children(f1: TreeFunction, f2: TreeFunction, mu: DyadicMeasure, iv: DyadicInterval) -> StoppingChildren:
    av = _Averages(f1, f2, mu)
    d, i = mu.grid.index(iv)
    return StoppingChildren(iv, [mu.grid.interval(e, j) for e, j in av.children(d, i)], mu.grid)


@dataclass
class SparseFamily:
    top: DyadicInterval
    base: list[DyadicInterval]
    added: list[DyadicInterval]
    eta: Fraction
    packing: dict = field(repr=False, default_factory=dict)

    @property
    def intervals(self) -> list[DyadicInterval]:
        return sorted(set(self.base) | set(self.added))


def packing_sums(intervals, mu: DyadicMeasure) -> dict:
    """For each member I, the exact sum of mu(J) over members J strictly inside I."""
    members = set(intervals)
    acc = {iv: Fraction(0) for iv in members}
    root = mu.tree.root_scale
    for j in members:
        mj = mu.mass(j)
        cur = j
        while cur.scale > root:
            cur = cur.parent()
            if cur in acc:
                acc[cur] += mj
    return acc


def packing_eta(intervals, mu: DyadicMeasure) -> Fraction:
    """Largest eta <= 1 with sum_{J strictly inside I} mu(J) <= mu(I)/eta for all members."""
    acc = packing_sums(intervals, mu)
    eta = Fraction(1)
    for iv, s in acc.items():
        if s > 0:
            eta = min(eta, mu.mass(iv) / s)
    return eta


def verify_packing(intervals, mu: DyadicMeasure, eta) -> bool:
    """Exact check of sum_{J strictly inside I} mu(J) <= mu(I)/eta over the family."""
    eta = Fraction(eta)
    return all(s * eta <= mu.mass(iv) for iv, s in packing_sums(intervals, mu).items())


def build_sparse_family(
    f1: TreeFunction, f2: TreeFunction, mu: DyadicMeasure, top: DyadicInterval | None = None, budget: int | None = None
) -> SparseFamily:
    return _grow_family(_Averages(f1, f2, mu), top, budget)


def _grow_family(av: _Averages, top: DyadicInterval | None, budget: int | None) -> SparseFamily:
    mu = av.mu
    g = mu.grid
    top = top or g.interval(0, 0)
    budget = g.depth + 1 if budget is None else budget
    d0, i0 = g.index(top)
    base = {(d0, i0)}
    frontier = [(d0, i0)]
    rounds = 0
    while frontier:
        rounds += 1
        if rounds > budget:
            raise RecursionBudgetExceeded(f"stopping recursion deeper than {budget}")
        nxt = []
        for d, i in frontier:
            for kid in av.children(d, i):
                if kid not in base:
                    base.add(kid)
                    nxt.append(kid)
        frontier = nxt
    base_iv = [g.interval(d, i) for d, i in base]
    members = set(base_iv)
    added = []
    for iv in base_iv:
        if iv.scale > mu.tree.root_scale and iv.sibling() in members:
            par = iv.parent()
            if par not in members and par not in added:
                added.append(par)
    acc = packing_sums(members | set(added), mu)
    eta = packing_eta(members | set(added), mu)
    return SparseFamily(top, sorted(base_iv), sorted(added), eta, acc)


def disjoint_certificate(intervals, mu: DyadicMeasure, eta) -> dict | None:
    """Greedy disjoint sets E_I (leaf index lists) with mu(E_I) >= eta mu(I), or None."""
    g = mu.grid
    w = mu.leaf_masses()
    free = np.ones(g.n_leaves, dtype=bool)
    out = {}
    for iv in sorted(intervals, key=lambda x: (-x.scale, x.position)):
        d, i = g.index(iv)
        need = Fraction(eta) * mu.mass(iv)
        got, chosen = Fraction(0), []
        for k in range(g.lo[d][i], g.hi[d][i]):
            if got >= need:
                break
            if free[k]:
                chosen.append(k)
                got += w[k]
        if got < need:
            return None
        free[chosen] = False
        out[iv] = chosen
    return out


def verify_certificate(certificate: dict, mu: DyadicMeasure, eta) -> bool:
    w = mu.leaf_masses()
    seen: set[int] = set()
    for iv, leaves in certificate.items():
        d, i = mu.grid.index(iv)
        if any(not (mu.grid.lo[d][i] <= k < mu.grid.hi[d][i]) for k in leaves):
            return False
        if seen & set(leaves):
            return False
        seen |= set(leaves)
        if sum((w[k] for k in leaves), Fraction(0)) < Fraction(eta) * mu.mass(iv):
            return False
    return True


# -- forms -----------------------------------------------------------------


class _FormData:
    def __init__(self, av: _Averages):
        self.mu = av.mu
        self.g = av.g
        self.a1 = av.a1
        self.a2 = av.a2
        self.m = av.mu.m_levels()

    def avg(self, which: int, iv: DyadicInterval) -> float:
        d, i = self.g.index(iv)
        return as_float((self.a1 if which == 1 else self.a2)[d][i])

    def m_of(self, iv: DyadicInterval) -> float:
        """m(I), with m of a leaf taken as 0 (no Haar function there)."""
        d, i = self.g.index(iv)
        r = self.g.rank[d][i]
        return as_float(self.m[d][r]) if r >= 0 else 0.0

    def has_parent(self, iv: DyadicInterval) -> bool:
        return iv.scale > self.mu.tree.root_scale


def sparse_forms(intervals, f1: TreeFunction, f2: TreeFunction, mu: DyadicMeasure) -> dict[str, float]:
    """A_S and the four non-standard forms E1..E4 over the family."""
    return _forms(set(intervals), _FormData(_Averages(f1, f2, mu)))


def _forms(S: set, fd: _FormData) -> dict[str, float]:
    mu = fd.mu
    A = sum(fd.avg(1, iv) * fd.avg(2, iv) * as_float(mu.mass(iv)) for iv in S)
    by_parent1: dict[DyadicInterval, float] = {}
    by_parent2: dict[DyadicInterval, float] = {}
    for iv in S:
        if fd.has_parent(iv):
            par = iv.parent()
            by_parent1[par] = by_parent1.get(par, 0.0) + fd.avg(1, iv)
            by_parent2[par] = by_parent2.get(par, 0.0) + fd.avg(2, iv)
    E1 = 0.0
    for par, s1 in by_parent1.items():
        if fd.has_parent(par):
            s2 = by_parent2.get(par.sibling(), 0.0)
            if s2:
                E1 += s1 * s2 * np.sqrt(fd.m_of(par) * fd.m_of(par.sibling()))
    E2 = E3 = E4 = 0.0
    for j in S:
        if not fd.has_parent(j):
            continue
        pj = j.parent()
        if fd.has_parent(pj) and pj.sibling() in S:
            i = pj.sibling()
            # E2: I = sibling(parent(J))
            E2 += fd.avg(1, i) * fd.avg(2, j) * np.sqrt(fd.m_of(i) * fd.m_of(pj))
            # E3 with the roles swapped: J' = sibling(parent(I')), I' = j
            E3 += fd.avg(1, j) * fd.avg(2, i) * np.sqrt(fd.m_of(pj) * fd.m_of(i))
        if j.sibling() in S:
            E4 += fd.avg(1, j.sibling()) * fd.avg(2, j) * np.sqrt(fd.m_of(j) * fd.m_of(j.sibling()))
    return {"A": A, "E1": E1, "E2": E2, "E3": E3, "E4": E4}


def hilbert_pairing(f1: TreeFunction, f2: TreeFunction, mu: DyadicMeasure) -> float:
    """<H f1, f2> in float arithmetic."""
    h = apply_shift(dyadic_hilbert(), f1.to(FLOAT), mu)
    return float(np.sum(h.values * np.asarray(f2.to(FLOAT).values) * mu.leaf_masses(FLOAT)))


@dataclass
class DominationResult:
    lhs: float
    rhs: float
    ratio: float
    sib: float
    forms: dict
    family: SparseFamily


def domination_check(
    f1: TreeFunction, f2: TreeFunction, mu: DyadicMeasure, top: DyadicInterval | None = None
) -> DominationResult:
    """|<H f1, f2>| against sib^(1/2) A_S + E1 + E2 + E3 for the grown family S."""
    if not mu.atomless:
        raise AtomicMeasure("sparse domination is checked on atomless measures only")
    av = _Averages(f1, f2, mu)
    fam = _grow_family(av, top, None)
    sib = as_float(regularity_characteristics(mu).sib_constant)
    forms = _forms(set(fam.intervals), _FormData(av))
    lhs = abs(hilbert_pairing(f1, f2, mu))
    rhs = np.sqrt(sib) * forms["A"] + forms["E1"] + forms["E2"] + forms["E3"]
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else float("inf"))
    return DominationResult(lhs, float(rhs), float(ratio), sib, forms, fam)


def iteration_step_terms(f1: TreeFunction, f2: TreeFunction, mu: DyadicMeasure, iv: DyadicInterval) -> tuple[float, dict]:
    """Left side and the four right-hand terms of the single stopping step at I.

    The left side is |sum_{J in G(I)} <f1,h_{J+}><f2,h_{J-}> - <f1,h_{J-}><f2,h_{J+}>|.
    """
    g = mu.grid
    av = _Averages(f1, f2, mu)
    d0, i0 = g.index(iv)
    bad = av.children(d0, i0)
    bad1 = sorted({kid for e, j in bad for kid in av.children(e, j)})
    B = [g.interval(e, j) for e, j in bad]
    B1 = [g.interval(e, j) for e, j in bad1]
    Bup = set(B) | set(B1)
    fd = _FormData(av)
    sib = as_float(regularity_characteristics(mu).sib_constant)

    T0 = np.sqrt(sib) * fd.avg(1, iv) * fd.avg(2, iv) * as_float(mu.mass(iv))
    T1 = 0.0
    for s in Bup:
        for t in Bup:
            if fd.has_parent(s) and fd.has_parent(t) and fd.has_parent(t.parent()) and s.parent() == t.parent().sibling():
                T1 += fd.avg(1, s) * fd.avg(2, t) * np.sqrt(fd.m_of(s.parent()) * fd.m_of(t.parent()))
    T2 = 0.0
    Bset = set(B)
    for s in B:
        if fd.has_parent(s) and s.sibling() in Bset:
            t = s.sibling()
            T2 += fd.avg(1, s) * fd.avg(2, t) * np.sqrt(fd.m_of(s) * fd.m_of(t))
    T3 = 0.0
    for s in B:
        for t in set(B1) | Bset:
            if fd.has_parent(t) and fd.has_parent(t.parent()) and s == t.parent().sibling():
                T3 += (fd.avg(1, s) * fd.avg(2, t) + fd.avg(1, t) * fd.avg(2, s)) * np.sqrt(fd.m_of(s) * fd.m_of(t.parent()))

    e1, e2 = analyze(f1.to(FLOAT), mu), analyze(f2.to(FLOAT), mu)
    c1, c2 = e1.coefficient_levels(mu), e2.coefficient_levels(mu)
    lhs = 0.0
    for J in StoppingChildren(iv, B, g).good():
        d, i = g.index(J)
        r = g.rank[d][i]
        if r < 0:
            continue
        rl, rr = g.rank[d + 1][2 * r], g.rank[d + 1][2 * r + 1]
        if rl < 0 or rr < 0:
            continue
        lhs += c1[d + 1][rr] * c2[d + 1][rl] - c1[d + 1][rl] * c2[d + 1][rr]
    return abs(float(lhs)), {"T0": float(T0), "T1": float(T1), "T2": float(T2), "T3": float(T3)}
