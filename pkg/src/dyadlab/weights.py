"""BMO quantities, dyadic maximal functions and weight characteristics.

All suprema run over the finite tree.  The BMO norm uses the parent average,

    ||b|| = sup_I mu(I)^-1 int_I |b - <b>_{parent(I)}| dmu,

so only intervals with a parent in the tree take part.  Characteristics are
suprema of <w>_I <s>_J^(p-1) over a class of pairs (I, J), where
s = w^(-1/(p-1)) is the dual weight; see ``characteristic``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .backend import FLOAT, Backend, as_float, mp
from .dyadic import DyadicInterval
from .errors import BackendMismatch, Divergence, InvalidExponent, NegativeInput, NoExponent, OutOfTree
from .haar import TreeFunction, analyze, level_averages
from .measures import DyadicMeasure
from .util import BestPair

CLASS_TAGS = ("Ap", "ApHat", "ApBal", "ApSib", "Ainf")


@dataclass
class BmoReport:
    norm: object
    norm_witness: DyadicInterval
    oscillation: dict = field(default_factory=dict)
    oscillation_witness: dict = field(default_factory=dict)
    oscillation_power: dict = field(default_factory=dict)
    haar_jump: object = 0
    haar_jump_witness: DyadicInterval | None = None

    @property
    def K(self) -> dict:
        return self.oscillation

    @property
    def D(self):
        return self.haar_jump


def _abs(x):
    return np.abs(x)


def bmo_norm(b: TreeFunction, mu: DyadicMeasure, exponents=(1, 2)) -> BmoReport:
    """The parent-average BMO norm, the oscillation sups K_b^p and D_b.

    ``oscillation[p]`` is sup_I (<|b - <b>_I|^p>_I)^(1/p) (a float unless the
    root is exact); ``oscillation_power[p]`` keeps the exact p-th power.
    ``haar_jump`` is D_b = sup_I |<b>_{I+} - <b>_{I-}|.
    """
    g = mu.grid
    if g.depth < 1:
        raise OutOfTree("the tree has no interval with a parent")
    avg = level_averages(b, mu)
    masses = mu.level_masses(b.backend)
    w = mu.leaf_masses(b.backend)
    zero = b.backend.scalar(0)

    best = BestPair()
    for d in range(1, g.depth + 1):
        c = avg[d - 1][g.parent[d]]
        dev = _abs(b.values - g.broadcast(c, d, fill=zero)) * w
        ratio = g.segsum(dev, d) / masses[d]
        best.offer_array(g, ratio, d, np.arange(g.sizes[d]))

    osc, osc_w, osc_pow = {}, {}, {}
    for p in exponents:
        pf = Fraction(p)
        if pf < 1:
            raise InvalidExponent("oscillation exponents must be at least 1")
        kb = BestPair()
        for d in range(g.depth + 1):
            dev = _abs(b.values - g.broadcast(avg[d], d, fill=zero))
            devp = dev**int(pf) if pf.denominator == 1 else b.backend.power(dev, pf)
            ratio = g.segsum(devp * w, d) / masses[d]
            kb.offer_array(g, ratio, d, np.arange(g.sizes[d]))
        osc_pow[p] = kb.value
        osc_w[p] = kb.first
        osc[p] = kb.value if pf == 1 else as_float(kb.value) ** (1.0 / float(pf))

    jump = BestPair()
    exp = analyze(b, mu)
    for d in range(g.depth):
        if len(exp.reduced[d]):
            jump.offer_array(g, _abs(exp.reduced[d]), d, g.internal[d])
    return BmoReport(best.value, best.first, osc, osc_w, osc_pow, jump.value if jump.value is not None else zero, jump.first)


@dataclass
class JNProfile:
    interval: DyadicInterval
    alphas: np.ndarray
    fractions: np.ndarray
    decay: float
    prefactor: float


def jn_profile(b: TreeFunction, mu: DyadicMeasure, iv: DyadicInterval, alphas) -> JNProfile:
    """mu{x in I : |b - <b>_parent(I)| > alpha} / mu(I) and a fitted exponential decay."""
    g = mu.grid
    d, i = g.index(iv)
    if d == 0:
        raise OutOfTree(f"{iv} has no parent in the tree")
    avg = level_averages(b, mu)
    c = avg[d - 1][g.parent[d][i]]
    lo, hi = g.lo[d][i], g.hi[d][i]
    dev = np.asarray(_abs(b.values[lo:hi] - c), dtype=float)
    w = np.asarray(mu.leaf_masses(FLOAT)[lo:hi], dtype=float)
    total = w.sum()
    alphas = np.asarray(alphas, dtype=float)
    fr = np.array([w[dev > a].sum() / total for a in alphas])
    pos = fr > 0
    if pos.sum() >= 2:
        slope, icept = np.polyfit(alphas[pos], np.log(fr[pos]), 1)
        decay, pref = -slope, float(np.exp(icept))
    else:
        decay, pref = float("inf"), 0.0
    return JNProfile(iv, alphas, fr, float(decay), pref)


def dyadic_maximal(f: TreeFunction, mu: DyadicMeasure, weight: TreeFunction | None = None) -> TreeFunction:
    """M f(x) = max over tree intervals I containing x of <|f|>_I (weighted if given)."""
    if any(x < 0 for x in np.asarray(f.values).reshape(-1)):
        raise NegativeInput("the maximal function here takes non-negative input")
    g = mu.grid
    if weight is None:
        avg = level_averages(f, mu)
    else:
        num = level_averages(f * weight, mu)
        den = level_averages(weight, mu)
        avg = [a / c for a, c in zip(num, den)]
    run = [avg[0]]
    for d in range(g.depth):
        par = np.repeat(run[d][g.internal[d]], 2, axis=0)
        run.append(np.maximum(par, avg[d + 1]))
    return TreeFunction(mu.tree, g.to_leaves(run), f.backend)


def dual_weight(w: TreeFunction, p) -> TreeFunction:
    """s = w^(-1/(p-1)); exact when the rational roots exist."""
    p = Fraction(p)
    if p <= 1:
        raise InvalidExponent("p must exceed 1")
    if any(x <= 0 for x in np.asarray(w.values).reshape(-1)):
        raise NegativeInput("weights must be positive")
    return TreeFunction(w.tree, w.backend.power(w.values, -1 / (p - 1)), w.backend)


@dataclass
class CharacteristicReport:
    tag: str
    p: object
    value: object
    witness: tuple[DyadicInterval, DyadicInterval]
    backend: str


def _char_levels(w: TreeFunction, mu: DyadicMeasure, p: Fraction, backend: Backend):
    wb = w.to(backend)
    s = dual_weight(wb, p)
    aw = level_averages(wb, mu)
    asg = level_averages(s, mu)
    pw = [backend.power(a, p - 1) for a in asg]
    return aw, pw


def _characteristic(w: TreeFunction, mu: DyadicMeasure, p: Fraction, tag: str, backend: Backend) -> CharacteristicReport:
    g = mu.grid
    best = BestPair()
    if tag == "Ainf":
        return _a_infinity(w.to(backend), mu)
    aw, pw = _char_levels(w, mu, p, backend)
    masses = mu.level_masses(backend)
    mlev = mu.m_levels(backend)

    if tag in ("Ap", "ApHat", "ApSib"):
        for d in range(g.depth + 1):
            best.offer_array(g, aw[d] * pw[d], d, np.arange(g.sizes[d]), d, np.arange(g.sizes[d]))
    if tag == "ApHat":
        for d in range(1, g.depth + 1):
            idx = np.arange(g.sizes[d])
            par = g.parent[d]
            best.offer_array(g, aw[d] * pw[d - 1][par], d, idx, d - 1, par)
            best.offer_array(g, aw[d - 1][par] * pw[d], d - 1, par, d, idx)
    if tag == "ApBal":
        half = p / 2
        mp_ = [backend.power(x, half) if len(x) else x for x in mlev]
        pm1 = [backend.power(x, p - 1) for x in masses]

        def factor(di, ri, ni, dj, rj, nj):
            return mp_[di][ri] * mp_[dj][rj] / (pm1[di][ni] * masses[dj][nj])

        for d in range(g.depth):
            nodes = g.internal[d]
            r = np.arange(len(nodes))
            best.offer_array(g, factor(d, r, nodes, d, r, nodes) * aw[d][nodes] * pw[d][nodes], d, nodes, d, nodes)
        for d in range(1, g.depth - 1):
            idx = np.arange(g.sizes[d])
            ri, rs = g.rank[d], g.rank[d][idx ^ 1]
            ok = (ri >= 0) & (rs >= 0)
            if not ok.any():
                continue
            sel = idx[ok]
            for c in (0, 1):
                kid = 2 * rs[sel] + c
                rk = g.rank[d + 1][kid]
                good = rk >= 0
                if not good.any():
                    continue
                i_n, k_n = sel[good], kid[good]
                i_r, k_r = ri[i_n], rk[good]
                # (I, child of I^s)
                val = factor(d, i_r, i_n, d + 1, k_r, k_n) * aw[d][i_n] * pw[d + 1][k_n]
                best.offer_array(g, val, d, i_n, d + 1, k_n)
                # (child of J^s, J) with J = I
                val = factor(d + 1, k_r, k_n, d, i_r, i_n) * aw[d + 1][k_n] * pw[d][i_n]
                best.offer_array(g, val, d + 1, k_n, d, i_n)
    if tag == "ApSib":
        pm1 = p - 1
        for e in range(1, g.depth):
            idx = np.arange(g.sizes[e])
            rp, rq = g.rank[e], g.rank[e][idx ^ 1]
            ok = (rp >= 0) & (rq >= 0)
            if not ok.any():
                continue
            P = idx[ok]
            Q = P ^ 1
            rP, rQ = rp[P], rq[P]
            mP, mQ = mlev[e][rP], mlev[e][rQ]
            for a in (0, 1):
                I = 2 * rP + a
                # J = sibling of parent(I)
                c = backend.power(mP / masses[e + 1][I], pm1) * mQ / masses[e][Q]
                best.offer_array(g, c * aw[e + 1][I] * pw[e][Q], e + 1, I, e, Q)
                # I = sibling of parent(J): here J = child a of P and I = Q
                J = I
                c = backend.power(mQ / masses[e][Q], pm1) * mP / masses[e + 1][J]
                best.offer_array(g, c * aw[e][Q] * pw[e + 1][J], e, Q, e + 1, J)
                for cc in (0, 1):
                    J2 = 2 * rQ + cc
                    c = backend.power(mP / masses[e + 1][I], pm1) * mQ / masses[e + 1][J2]
                    best.offer_array(g, c * aw[e + 1][I] * pw[e + 1][J2], e + 1, I, e + 1, J2)
    if best.value is None:
        raise OutOfTree("no admissible pair in this tree")
    return CharacteristicReport(tag, p, best.value, (best.first, best.second), backend.name)


def _a_infinity(w: TreeFunction, mu: DyadicMeasure) -> CharacteristicReport:
    g = mu.grid
    aw = level_averages(w, mu)
    ints = [a * m for a, m in zip(aw, mu.level_masses(w.backend))]
    leafw = mu.leaf_masses(w.backend)
    best = BestPair()
    for d in range(g.depth + 1):
        run = {d: aw[d]}
        for e in range(d, g.depth):
            run[e + 1] = np.maximum(np.repeat(run[e][g.internal[e]], 2), aw[e + 1])
        leaf_vals = np.empty(g.n_leaves, dtype=aw[0].dtype)
        leaf_vals[...] = w.backend.scalar(0)
        for e in range(d, g.depth + 1):
            li = g.leaf_idx[e]
            if len(li):
                leaf_vals[g.leaf_global[e]] = run[e][li]
        tot = g.segsum(leaf_vals * leafw, d)
        idx = np.arange(g.sizes[d])
        best.offer_array(g, tot / ints[d], d, idx, d, idx)
    return CharacteristicReport("Ainf", None, best.value, (best.first, best.second), w.backend.name)


def characteristic(w: TreeFunction, mu: DyadicMeasure, p, tag: str, backend: Backend | None = None) -> CharacteristicReport:
    """sup over a class of pairs (I, J) of c(I, J) <w>_I <s>_J^(p-1).

    Ap:    I = J.
    ApHat: J in {I, parent(I)} or I in {J, parent(J)}.
    ApBal: J in {I} or children(sibling(I)), and symmetrically; the factor is
           m(I)^(p/2) m(J)^(p/2) / (mu(I)^(p-1) mu(J)).
    ApSib: I = J (factor 1); parents siblings; J the sibling of parent(I);
           I the sibling of parent(J), with the corresponding m/mu factors.
    Ainf:  sup_I int_I M(w 1_I) dmu / w(I).

    Exact on rational input when every power involved is rational, otherwise
    evaluated with 128-bit floats (or the weight's own float backend).
    """
    if tag not in CLASS_TAGS:
        raise ValueError(f"unknown class tag {tag!r}")
    pf = Fraction(p) if p is not None else None
    if tag != "Ainf" and (pf is None or pf <= 1):
        raise InvalidExponent("p must exceed 1")
    if backend is not None:
        return _characteristic(w, mu, pf, tag, backend)
    try:
        return _characteristic(w, mu, pf, tag, w.backend)
    except BackendMismatch:
        return _characteristic(w, mu, pf, tag, mp(128))


def exp_weight(b: TreeFunction, delta: float) -> TreeFunction:
    """w = exp(delta b) on the float backend."""
    vals = np.asarray(b.values, dtype=float)
    return TreeFunction(b.tree, np.exp(delta * vals), FLOAT)


def find_admissible_delta(
    b: TreeFunction, mu: DyadicMeasure, p, budget: float | None = None, ceiling: float = 64.0, steps: int = 40
) -> float:
    """Largest delta (to bisection accuracy) with [exp(delta b)]_ApHat <= ceiling."""
    if budget is None:
        norm = as_float(bmo_norm(b, mu, exponents=(1,)).norm)
        budget = 4.0 / norm if norm > 0 else 1.0

    def ok(delta: float) -> bool:
        return as_float(characteristic(exp_weight(b, delta), mu, p, "ApHat").value) <= ceiling

    hi = float(budget)
    if ok(hi):
        return hi
    lo = hi
    while not ok(lo):
        lo /= 2
        if lo < budget * 1e-12:
            raise Divergence("no admissible delta above the search floor")
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def reverse_holder_constant(w: TreeFunction, mu: DyadicMeasure, gamma: float) -> tuple[float, DyadicInterval]:
    """sup_I <w^gamma>_I^(1/gamma) / <w>_I."""
    wf = w.to(FLOAT)
    aw = level_averages(wf, mu)
    ag = level_averages(TreeFunction(w.tree, wf.values**gamma, FLOAT), mu)
    best = BestPair()
    g = mu.grid
    for d in range(g.depth + 1):
        best.offer_array(g, ag[d] ** (1.0 / gamma) / aw[d], d, np.arange(g.sizes[d]))
    return float(best.value), best.first


def reverse_holder_exponent(
    w: TreeFunction, mu: DyadicMeasure, gamma_max: float = 4.0, ceiling: float = 8.0, steps: int = 40
) -> tuple[float, float]:
    """Largest gamma in (1, gamma_max] with reverse Hoelder constant <= ceiling.

    Returns ``(gamma, constant)``.  The constant is nondecreasing in gamma, so
    bisection applies.
    """
    if gamma_max <= 1:
        raise InvalidExponent("gamma_max must exceed 1")
    top, _ = reverse_holder_constant(w, mu, gamma_max)
    if top <= ceiling:
        return gamma_max, top
    lo, hi = 1.0, gamma_max
    floor = 1.0 + 1e-9
    first, _ = reverse_holder_constant(w, mu, floor)
    if first > ceiling:
        raise NoExponent("reverse Hoelder fails arbitrarily close to 1")
    lo = floor
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if reverse_holder_constant(w, mu, mid)[0] <= ceiling:
            lo = mid
        else:
            hi = mid
    return lo, reverse_holder_constant(w, mu, lo)[0]


def stopping_maximal_intervals(w: TreeFunction, mu: DyadicMeasure, level) -> list[DyadicInterval]:
    """Maximal tree intervals with <w>_I > level, left to right."""
    g = mu.grid
    avg = level_averages(w, mu)
    out: list[DyadicInterval] = []
    cand = np.arange(g.sizes[0])
    for d in range(g.depth + 1):
        if not len(cand):
            break
        vals = avg[d][cand]
        hit = np.array([v > level for v in vals], dtype=bool)
        out.extend(g.intervals_at(d, cand[hit]))
        rest = cand[~hit]
        if d < g.depth:
            r = g.rank[d][rest]
            r = r[r >= 0]
            cand = np.stack([2 * r, 2 * r + 1], axis=1).reshape(-1)
    return sorted(out, key=lambda iv: iv.left)
