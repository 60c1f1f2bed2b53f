"""Seeded experiments behind the bundled scenarios.

Each experiment returns a list of ``Measured`` rows.  Quantities are plain
numbers; checks (ceilings, floors) live in the scenario files so the same
numbers can be judged against different thresholds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .backend import FLOAT, as_float, mp
from .dyadic import DyadicInterval, TreeSpec
from .families import (
    atom_contrast,
    random_bmo,
    random_dyadic_weight,
    random_log_bmo,
    random_nonnegative,
    restrict,
    thm34_glued_weight,
    thm34_weight,
)
from .haar import TreeFunction, haar_function, integral, level_averages, paraproduct
from .measures import (
    DyadicMeasure,
    lebesgue,
    mu_k,
    random_sibling_balanced,
    regularity_characteristics,
    sib_not_balanced,
    thm34_block,
    thm34_glued,
)
from .normlab import commutator_operator, operator_norm, weak_type_ratio, shift_operator
from .shifts import apply_shift, dyadic_hilbert, remainder_shift, sibling_complete_part
from .sparse import (
    CZConstants,
    build_sparse_family,
    cz_decompose,
    domination_check,
    verify_packing,
)
from .weights import bmo_norm, characteristic, find_admissible_delta, reverse_holder_exponent


@dataclass
class Measured:
    quantity: str
    value: float
    witness: str = ""
    depth: int | None = None
    seed: int | None = None


def _rng(*key) -> np.random.Generator:
    return np.random.default_rng(list(key))


def _unit(depth: int, roots: int = 1) -> TreeSpec:
    return TreeSpec(0, tuple(range(roots)), depth)


# -- operator algebra ----------------------------------------------------------


def hilbert_algebra(depth: int = 6, seed: int = 0, bits: int = 128, trials: int = 100) -> list[Measured]:
    """Worst errors of H^2 = -P, H* = -H, |Hf| = |Pf|, H h_{I+} = h_{I-}, R_b = [H, Lambda0_b]."""
    B = mp(bits)
    H = dyadic_hilbert()
    worst = {"square": 0.0, "antisymmetry": 0.0, "isometry": 0.0, "haar_rotation": 0.0, "remainder": 0.0}
    for t in range(trials):
        rng = _rng(seed, t)
        mu = random_sibling_balanced(_unit(depth, 2), int(rng.integers(2**31)), 4.0)
        n = mu.grid.n_leaves
        f = TreeFunction.from_values(mu.tree, [int(x) for x in rng.integers(-20, 21, n)], B)
        g = TreeFunction.from_values(mu.tree, [int(x) for x in rng.integers(-20, 21, n)], B)
        b = random_bmo(mu.tree, rng).to(B)
        Hf, Hg = apply_shift(H, f, mu), apply_shift(H, g, mu)
        Pf = sibling_complete_part(f, mu)
        worst["square"] = max(worst["square"], as_float((apply_shift(H, Hf, mu) + Pf).max_abs_diff(f * 0)))
        worst["antisymmetry"] = max(worst["antisymmetry"], abs(as_float(integral(Hf * g, mu) + integral(f * Hg, mu))))
        worst["isometry"] = max(worst["isometry"], abs(as_float(integral(Hf * Hf, mu) - integral(Pf * Pf, mu))))
        g_ = mu.grid
        d = int(rng.integers(0, g_.depth - 1))
        node = int(g_.internal[d][int(rng.integers(len(g_.internal[d])))])
        iv = g_.interval(d, node)
        left, right = iv.children()
        if mu.tree.is_internal(left) and mu.tree.is_internal(right):
            err = (apply_shift(H, haar_function(mu, right, B), mu) - haar_function(mu, left, B)).max_abs_diff(f * 0)
            worst["haar_rotation"] = max(worst["haar_rotation"], as_float(err))
        R = remainder_shift(H, b, mu)
        lam = paraproduct("Lambda0", b, f, mu)
        direct = apply_shift(H, lam, mu) - paraproduct("Lambda0", b, Hf, mu)
        worst["remainder"] = max(worst["remainder"], as_float(apply_shift(R, f, mu).max_abs_diff(direct)))
    return [Measured(k + "_error", v, depth=depth, seed=seed) for k, v in worst.items()]


def hilbert_l2_norm(depth: int = 8, seed: int = 0) -> list[Measured]:
    mu = random_sibling_balanced(_unit(depth), seed)
    est = operator_norm(dyadic_hilbert(), mu)
    return [Measured("hilbert_l2_norm", est.value, est.method, depth, seed)]


# -- the counterexample pairs (mu_k, b_k) --------------------------------------


def mu_k_profile(depth: int, ks, roots: int = 2, power: bool = True) -> list[Measured]:
    """Per k: sib constant, D/2^k, K2/2^(k/2), commutator norm estimates and ratios."""
    rows = []
    H = dyadic_hilbert()
    for k in ks:
        mu = mu_k(_unit(depth, roots), k)
        b = atom_contrast(mu, k)
        rep = bmo_norm(b.to(FLOAT), mu)
        sib = as_float(regularity_characteristics(mu).sib_constant)
        C = commutator_operator(H, b, mu)
        est = operator_norm(C, mu)
        certified = est.verify(C, mu)
        rows += [
            Measured(f"sib[k={k}]", sib, depth=depth),
            Measured(f"D_over_2k[k={k}]", float(rep.D) / 2**k, depth=depth),
            Measured(f"K2_over_sqrt2k[k={k}]", float(rep.K[2]) / 2 ** (k / 2), depth=depth),
            Measured(f"norm_over_sqrt2k[k={k}]", est.value / 2 ** (k / 2), est.method, depth),
            Measured(f"certified_over_sqrt2k[k={k}]", certified / 2 ** (k / 2), depth=depth),
            Measured(f"norm_over_D[k={k}]", est.value / float(rep.D), depth=depth),
        ]
        if power:
            pw = operator_norm(C, mu, method="power", restarts=2, max_iter=300, tol=1e-9)
            rows.append(Measured(f"power_over_sqrt2k[k={k}]", pw.value / 2 ** (k / 2), depth=depth))
    ks = list(ks)
    if len(ks) >= 2:
        r = pick(rows, "norm_over_D")
        s = pick(rows, "norm_over_sqrt2k")
        span = f"k={ks[0]}..{ks[-1]}"
        rows += [
            Measured("norm_over_D_drop", r[-1] / r[0], span, depth),
            Measured("norm_over_D_monotone", float(all(a > b for a, b in zip(r, r[1:]))), span, depth),
            Measured("norm_over_sqrt2k_spread", max(s) / min(s), span, depth),
        ]
    return rows


def pick(rows: list[Measured], prefix: str) -> list[float]:
    return [r.value for r in rows if r.quantity.startswith(prefix + "[") or r.quantity == prefix]


# -- commutators on generated grids -----------------------------------------


def commutator_grid(depth: int, measures: int, functions: int, p: float, seed: int = 0) -> list[Measured]:
    """||[H,b]|| lower bounds over ||b||_BMO and the per-interval testing ratios."""
    H = dyadic_hilbert()
    best_norm, best_test = 0.0, 0.0
    wit_norm = wit_test = ""
    for i in range(measures):
        mu = random_sibling_balanced(_unit(depth), 1000 * seed + i, 4.0)
        for j in range(functions):
            b = random_bmo(mu.tree, _rng(seed, i, j))
            bmo = as_float(bmo_norm(b, mu, exponents=(1,)).norm)
            if bmo == 0:
                continue
            C = commutator_operator(H, b, mu)
            est = operator_norm(C, mu, p=p, restarts=4, seed=j)
            r = est.value / bmo
            if r > best_norm:
                best_norm, wit_norm = r, f"p={p:g} measure={i} function={j}"
            t, where = testing_ratio(C, b, mu, p)
            if t > best_test:
                best_test, wit_test = t, f"p={p:g} measure={i} function={j} I={where}"
    return [
        Measured("commutator_over_bmo", best_norm, wit_norm, depth, seed),
        Measured("testing_ratio", best_test, wit_test, depth, seed),
    ]


def testing_ratio(C, b: TreeFunction, mu: DyadicMeasure, p: float) -> tuple[float, str]:
    """max over I below a root of int_I |b - <b>_I|^p / ||[H,b] 1_I||_p^p."""
    g = mu.grid
    bv = np.asarray(b.to(FLOAT).values, dtype=float)
    w = np.asarray(mu.leaf_masses(FLOAT), dtype=float)
    avg = level_averages(b.to(FLOAT), mu)
    best, where = 0.0, ""
    for d in range(1, g.depth + 1):
        n = g.sizes[d]
        ind = np.zeros((g.n_leaves, n))
        for i in range(n):
            ind[g.lo[d][i] : g.hi[d][i], i] = 1.0
        out = C.apply(ind)
        rhs = np.sum(np.abs(out) ** p * w[:, None], axis=0)
        dev = np.abs(bv[:, None] - g.broadcast(avg[d], d, fill=0.0)[:, None]) ** p * ind
        lhs = np.sum(dev * w[:, None], axis=0)
        for i in np.flatnonzero(lhs > 1e-12 * max(1.0, lhs.max())):
            r = lhs[i] / rhs[i] if rhs[i] > 0 else math.inf
            if r > best:
                best, where = r, str(g.interval(d, int(i)))
    return best, where


# -- weights from BMO and reverse Hoelder ------------------------------------


def chain_weight(tree: TreeSpec, rng: np.random.Generator, spread: int = 3) -> TreeFunction:
    """2^b for b a clipped log chain; the same seed refines consistently with depth."""
    b = random_log_bmo(tree, rng)
    return TreeFunction.from_values(tree, [Fraction(2) ** int(max(-spread, min(spread, x))) for x in b.values])


def theorem_b(depth: int, weights: int, functions: int, seed: int = 0, rh_ceiling: float = 8.0, ap_ceiling: float = 64.0) -> list[Measured]:
    rows = []
    worst_log, worst_delta, min_gamma, max_const = -math.inf, math.inf, math.inf, 0.0
    for i in range(weights):
        rng = _rng(seed, i)
        mu = random_sibling_balanced(_unit(depth), 1000 * seed + i, 4.0)
        w = random_dyadic_weight(mu.tree, rng)
        q = as_float(characteristic(w, mu, 2, "ApHat").value)
        logw = TreeFunction(mu.tree, np.log(np.asarray(w.to(FLOAT).values, dtype=float)), FLOAT)
        worst_log = max(worst_log, as_float(bmo_norm(logw, mu, exponents=(1,)).norm) - math.log(2 * q))
        cw = chain_weight(mu.tree, _rng(seed, i, 7))
        gamma, const = reverse_holder_exponent(cw, mu, ceiling=rh_ceiling)
        min_gamma, max_const = min(min_gamma, gamma), max(max_const, const)
    for j in range(functions):
        mu = random_sibling_balanced(_unit(depth), 1000 * seed + j, 4.0)
        b = random_bmo(mu.tree, _rng(seed, j, 11))
        norm = as_float(bmo_norm(b, mu, exponents=(1,)).norm)
        if norm == 0:
            continue
        delta = find_admissible_delta(b, mu, 2, ceiling=ap_ceiling)
        worst_delta = min(worst_delta, delta * norm)
    rows += [
        Measured("bmo_log_minus_log2Q", worst_log, depth=depth, seed=seed),
        Measured("delta_times_bmo", worst_delta, depth=depth, seed=seed),
        Measured("rh_gamma", min_gamma, depth=depth, seed=seed),
        Measured("rh_constant", max_const, depth=depth, seed=seed),
    ]
    return rows


def rh_profile(depths, weights: int, seed: int = 0, ceiling: float = 8.0) -> dict[int, list[tuple[float, float]]]:
    """Reverse Hoelder (gamma, constant) of the same chain weights at several depths."""
    out = {}
    for d in depths:
        res = []
        for i in range(weights):
            mu = random_sibling_balanced(_unit(d), 1000 * seed + i, 4.0)
            res.append(reverse_holder_exponent(chain_weight(mu.tree, _rng(seed, i, 7)), mu, ceiling=ceiling))
        out[d] = res
    return out


# -- balanced but not sibling-regular weights ---------------------------------


def separation(ns=(4, 8, 16, 32), blocks=(1, 2, 3, 4)) -> list[Measured]:
    rows = []
    for n in ns:
        mu = thm34_block(n)
        w = thm34_weight(mu, n)
        hat = characteristic(w, mu, 2, "ApHat")
        bal = characteristic(w, mu, 2, "ApBal")
        rows += [
            Measured(f"aphat[n={n}]", as_float(hat.value), " ".join(map(str, hat.witness))),
            Measured(f"aphat_over_bound[n={n}]", as_float(hat.value) / (0.5 * math.sqrt(n / 2))),
            Measured(f"apbal[n={n}]", as_float(bal.value), " ".join(map(str, bal.witness))),
            Measured(f"bal[n={n}]", as_float(regularity_characteristics(mu).bal_constant)),
        ]
    for k in blocks:
        mu = thm34_glued(k)
        w = thm34_glued_weight(mu, k)
        rows += [
            Measured(f"glued_bal[blocks={k}]", as_float(regularity_characteristics(mu).bal_constant)),
            Measured(f"glued_aphat[blocks={k}]", as_float(characteristic(w, mu, 2, "ApHat").value)),
            Measured(f"glued_apbal[blocks={k}]", as_float(characteristic(w, mu, 2, "ApBal").value)),
        ]
    glued = pick(rows, "glued_aphat")
    if len(glued) >= 2:
        rows.append(Measured("glued_aphat_increasing", float(all(a < b for a, b in zip(glued, glued[1:])))))
    return rows


# -- stopping times and sparse families ---------------------------------------


def cz_trials(depth: int, trials: int, seed: int = 0, constants: CZConstants | None = None) -> list[Measured]:
    """Decompose seeded inputs; a failing certificate raises inside cz_decompose."""
    loose = CZConstants(Fraction(10**9), {2: 1e18, 4: 1e18}, 1e18)
    worst = {"l1": 0.0, "lp2": 0.0, "lp4": 0.0, "bmo": 0.0}
    failures = 0
    for t in range(trials):
        rng = _rng(seed, t)
        tree = _unit(depth)
        mu = lebesgue(tree) if t % 2 == 0 else random_sibling_balanced(tree, int(rng.integers(2**31)), 4.0)
        f = random_nonnegative(tree, rng)
        top = level_averages(f, mu)[0][0]
        height = top * int(rng.choice([1, 2, 4, 8, 16]))
        cz = cz_decompose(f, mu, height, constants=loose)
        c = cz.certificate
        c.constants = constants or CZConstants()
        failures += 0 if c.ok and _reconstructs(f, cz) else 1
        worst["l1"] = max(worst["l1"], float(c.l1_ratio))
        worst["lp2"] = max(worst["lp2"], c.lp_ratio[2])
        worst["lp4"] = max(worst["lp4"], c.lp_ratio[4])
        worst["bmo"] = max(worst["bmo"], c.bmo_ratio)
    rows = [Measured("cz_failures", failures, depth=depth, seed=seed)]
    rows += [Measured(f"cz_{k}_ratio", v, depth=depth, seed=seed) for k, v in worst.items()]
    return rows


def _reconstructs(f: TreeFunction, cz) -> bool:
    total = cz.good
    for piece in cz.pieces:
        total = total + piece
    return total == f


DOMINATION_FAMILIES = ("lebesgue", "sibNotBalanced", "muK", "thm34Glued")


def domination_measure(family: str, depth: int) -> DyadicMeasure:
    """Atomless members of each family; atoms are spread over [x, x + 1/64)."""
    if family == "lebesgue":
        return lebesgue(_unit(depth))
    if family == "sibNotBalanced":
        return sib_not_balanced(_unit(depth, 2), spread=6)
    if family == "muK":
        return mu_k(_unit(depth, 2), 4, spread=6)
    if family == "thm34Glued":
        return thm34_glued(max(1, depth - 8))
    raise ValueError(f"unknown family {family!r}")


def domination_trials(family: str, depth: int, trials: int, seed: int = 0) -> list[Measured]:
    mu = domination_measure(family, depth)
    top = mu.grid.interval(0, 0)
    best, eta_min, where = 0.0, Fraction(1), ""
    packing_ok = True
    for t in range(trials):
        rng = _rng(seed, t)
        f1 = restrict(random_nonnegative(mu.tree, rng), top)
        f2 = restrict(random_nonnegative(mu.tree, rng), top)
        res = domination_check(f1, f2, mu, top)
        if res.ratio > best:
            best, where = res.ratio, f"trial={t}"
        eta_min = min(eta_min, res.family.eta)
        packing_ok &= verify_packing(res.family.intervals, mu, res.family.eta)
    return [
        Measured(f"domination_ratio[{family}]", best, where, depth, seed),
        Measured(f"packing_eta[{family}]", float(eta_min), depth=depth, seed=seed),
        Measured(f"packing_verified[{family}]", 1.0 if packing_ok else 0.0, depth=depth, seed=seed),
    ]


def two_bump_sweep(family: str, depth: int) -> list[Measured]:
    """Domination ratio of f1 = 1_J, f2 = 1_J' with J, J' at the left ends of K-, K+.

    K runs down the left edge of the top interval and J, J' over every finer
    scale.  Random inputs rarely hit these pairs, yet they give the largest
    ratios seen, at every depth.
    """
    mu = domination_measure(family, depth)
    g = mu.grid
    top = g.interval(0, 0)
    best, where = 0.0, ""
    for s in range(1, g.depth):
        K = DyadicInterval(top.scale + s, top.position << s)
        for t in range(s + 1, g.depth + 1):
            pair = [DyadicInterval(top.scale + t, c.position << (t - s - 1)) for c in K.children()]
            if not all(mu.tree.contains(iv) for iv in pair):
                continue
            f1, f2 = (TreeFunction.indicator(mu.tree, iv) for iv in pair)
            r = domination_check(f1, f2, mu, top).ratio
            if r > best:
                best, where = r, f"K={K} J={pair[0]} J'={pair[1]}"
    return [Measured(f"two_bump_ratio[{family}]", best, where, depth)]


def domination_pilot(depth: int, trials: int, seed: int) -> float:
    """Largest ratio over random trials and the two-bump sweep, all families."""
    worst = 0.0
    for fam in DOMINATION_FAMILIES:
        worst = max(worst, pick(domination_trials(fam, depth, trials, seed), "domination_ratio")[0])
        worst = max(worst, pick(two_bump_sweep(fam, depth), "two_bump_ratio")[0])
    return worst


def sparse_family_on_atoms(depth: int, trials: int, seed: int = 0) -> float:
    """Smallest packing eta of families built on the atomic sibling-but-not-balanced measure."""
    mu = sib_not_balanced(_unit(depth, 2))
    top = mu.grid.interval(0, 0)
    eta = Fraction(1)
    for t in range(trials):
        rng = _rng(seed, t)
        fam = build_sparse_family(restrict(random_nonnegative(mu.tree, rng), top), restrict(random_nonnegative(mu.tree, rng), top), mu, top)
        eta = min(eta, fam.eta)
    return float(eta)


# -- weights ----------------------------------------------------------------


def containments(depth: int, measures: int, weights: int, ps=(2, 3), seed: int = 0) -> list[Measured]:
    worst37, worst_ratio = 0.0, 0.0
    w37 = wr = ""
    for i in range(measures):
        mu = random_sibling_balanced(_unit(depth), 1000 * seed + i, 4.0)
        for j in range(weights):
            w = random_dyadic_weight(mu.tree, _rng(seed, i, j))
            for p in ps:
                sib = as_float(characteristic(w, mu, p, "ApSib").value)
                hat = as_float(characteristic(w, mu, p, "ApHat").value)
                bal = as_float(characteristic(w, mu, p, "ApBal").value)
                r = sib / (2 ** max(1, p - 1) * hat**3)
                if r > worst37:
                    worst37, w37 = r, f"measure={i} weight={j} p={p}"
                if sib / bal > worst_ratio:
                    worst_ratio, wr = sib / bal, f"measure={i} weight={j} p={p}"
    return [
        Measured("apsib_over_bound", worst37, w37, depth, seed),
        Measured("apsib_over_apbal", worst_ratio, wr, depth, seed),
    ]


def weighted_commutators(depth: int, weights: int, functions: int, seed: int = 0) -> list[Measured]:
    H = dyadic_hilbert()
    best, where = 0.0, ""
    for i in range(weights):
        mu = random_sibling_balanced(_unit(depth), 1000 * seed + i, 4.0)
        w = random_dyadic_weight(mu.tree, _rng(seed, i, 3))
        for j in range(functions):
            b = random_bmo(mu.tree, _rng(seed, i, j, 5))
            norm = as_float(bmo_norm(b, mu, exponents=(1,)).norm)
            if norm == 0:
                continue
            est = operator_norm(commutator_operator(H, b, mu), mu, weight=w)
            if est.value / norm > best:
                best, where = est.value / norm, f"weight={i} function={j}"
    return [Measured("weighted_commutator_over_bmo", best, where, depth, seed)]


def weak_type_profile(depth: int, ks, roots: int = 2) -> list[Measured]:
    """Per k, the weak (1,1) ratio of H on mu_k, maximized over interval indicators."""
    rows = []
    H = dyadic_hilbert()
    for k in ks:
        mu = mu_k(_unit(depth, roots), k)
        op = shift_operator(H, mu)
        best, where = 0.0, ""
        for iv in mu.tree.intervals():
            r = weak_type_ratio(op, mu, TreeFunction.indicator(mu.tree, iv, FLOAT))
            if r.ratio > best:
                best, where = r.ratio, f"f=1_{iv} level={r.level:.6g}"
        rows.append(Measured(f"weak_ratio[k={k}]", best, where, depth))
    ks = list(ks)
    if len(ks) >= 2:
        r = pick(rows, "weak_ratio")
        rows.append(Measured("weak_ratio_spread", max(r) / min(r), f"k={ks[0]}..{ks[-1]}", depth))
    return rows


REGISTRY = {
    "hilbert_algebra": hilbert_algebra,
    "hilbert_l2_norm": hilbert_l2_norm,
    "mu_k_profile": mu_k_profile,
    "commutator_grid": commutator_grid,
    "theorem_b": theorem_b,
    "separation": separation,
    "cz_trials": cz_trials,
    "domination_trials": domination_trials,
    "containments": containments,
    "weighted_commutators": weighted_commutators,
    "weak_type_profile": weak_type_profile,
    "two_bump_sweep": two_bump_sweep,
}

