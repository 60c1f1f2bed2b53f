import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dyadlab import DyadicInterval as DI, TreeFunction, TreeSpec, characteristic, lebesgue, mu_k, random_sibling_balanced
from dyadlab.backend import FLOAT, as_float
from dyadlab.errors import InvalidExponent, NegativeInput, NoExponent, OutOfTree
from dyadlab.families import atom_contrast, random_bmo, random_dyadic_weight, thm34_weight
from dyadlab.haar import average
from dyadlab.measures import thm34_block
from dyadlab.weights import (
    bmo_norm,
    dual_weight,
    dyadic_maximal,
    exp_weight,
    find_admissible_delta,
    jn_profile,
    reverse_holder_constant,
    reverse_holder_exponent,
    stopping_maximal_intervals,
)

import oracles
from conftest import measure_and_functions, measures, unit


@st.composite
def weighted(draw, **kw):
    mu = draw(measures(**kw))
    w = random_dyadic_weight(mu.tree, np.random.default_rng(draw(st.integers(0, 10_000))))
    return mu, w


def test_bmo_constant():
    mu = mu_k(unit(4, 2), 2)
    rep = bmo_norm(TreeFunction.constant(mu.tree, 3), mu)
    assert rep.norm == 0 and rep.D == 0 and rep.K[1] == 0


def test_bmo_needs_parent():
    mu = lebesgue(TreeSpec.unit(0))
    with pytest.raises(OutOfTree):
        bmo_norm(TreeFunction.constant(mu.tree, 1), mu)


def test_bmo_indicator_lebesgue():
    # b = 1 on [0, 1/2): parent-average oscillation over [0,1/2) is 1/2
    mu = lebesgue(TreeSpec.unit(4))
    b = TreeFunction.indicator(mu.tree, DI(1, 0))
    rep = bmo_norm(b, mu)
    assert rep.norm == F(1, 2)
    assert rep.D == 1


@pytest.mark.parametrize("k", [4, 6, 8, 10])
def test_b_k_bmo_scaling(k):
    mu = mu_k(unit(10, 2), k)
    rep = bmo_norm(atom_contrast(mu, k).to(FLOAT), mu)
    assert 0.25 <= rep.D / 2**k <= 4
    assert rep.K[2] / 2 ** (k / 2) <= 8


@pytest.mark.parametrize("k", [4, 8])
def test_b_k_bmo_float_matches_exact(k):
    mu = mu_k(unit(10, 2), k)
    b = atom_contrast(mu, k)
    exact, approx = bmo_norm(b, mu), bmo_norm(b.to(FLOAT), mu)
    assert isinstance(exact.D, F)
    for a, e in ((approx.D, exact.D), (approx.K[2], exact.K[2]), (approx.norm, exact.norm)):
        assert abs(a - float(e)) <= 1e-12 * float(e)


@given(measure_and_functions(count=1, min_depth=2))
def test_bmo_norm_relations(data):
    mu, b = data
    rep = bmo_norm(b, mu, exponents=(1,))
    assert rep.D <= 2 * rep.norm
    assert rep.norm <= rep.K[1] + rep.D


def test_jn_profile_zero_and_monotone():
    mu = lebesgue(TreeSpec.unit(10))
    zero = jn_profile(TreeFunction.constant(mu.tree, 0), mu, DI(1, 0), [0.5, 1, 2])
    assert np.all(zero.fractions == 0)
    # log-type chain, scaled to norm 1
    b = TreeFunction.from_callable(mu.tree, lambda iv: sum(1 for j in range(1, 11) if iv.right <= F(1, 2**j)))
    b = b / bmo_norm(b, mu, exponents=(1,)).norm
    prof = jn_profile(b, mu, DI(1, 0), np.linspace(0.25, 6, 24))
    assert np.all(np.diff(prof.fractions) <= 0)
    assert prof.decay > 0


def test_maximal_examples():
    mu = lebesgue(TreeSpec.unit(6))
    one = TreeFunction.constant(mu.tree, 1)
    assert dyadic_maximal(one, mu) == one
    f = TreeFunction.indicator(mu.tree, DI(6, 0)) * 64
    M = dyadic_maximal(f, mu)
    assert list(M.values) == oracles.maximal(f, mu)
    assert M.values[0] == 64
    assert M.values[-1] == 1
    with pytest.raises(NegativeInput):
        dyadic_maximal(-one, mu)


@given(measure_and_functions(count=1, nonneg=True))
def test_maximal_dominates(data):
    mu, f = data
    M = dyadic_maximal(f, mu)
    assert all(m >= x for m, x in zip(M.values, f.values))
    assert list(M.values) == oracles.maximal(f, mu)


def test_weighted_maximal_of_constant():
    mu = random_sibling_balanced(unit(4), 2)
    w = random_dyadic_weight(mu.tree, np.random.default_rng(0))
    one = TreeFunction.constant(mu.tree, 1)
    assert dyadic_maximal(one, mu, w) == one


def test_dual_weight_exact():
    mu = lebesgue(TreeSpec.unit(3))
    w = TreeFunction.from_values(mu.tree, [F(4) ** e for e in (-2, -1, 0, 1, 2, 1, 0, -1)])
    s2 = dual_weight(w, 2)
    assert dual_weight(s2, 2) == w
    s3 = dual_weight(w, 3)
    assert s3.values[0] == 4
    assert dual_weight(s3, F(3, 2)) == w
    with pytest.raises(InvalidExponent):
        dual_weight(w, 1)


def test_unit_weight_characteristics():
    mu = random_sibling_balanced(unit(5), 4)
    one = TreeFunction.constant(mu.tree, 1)
    assert characteristic(one, mu, 2, "Ap").value == 1
    assert characteristic(one, mu, 3, "ApHat").value == 1
    with pytest.raises(InvalidExponent):
        characteristic(one, mu, 1, "Ap")
    with pytest.raises(ValueError):
        characteristic(one, mu, 2, "Bogus")


@given(weighted(min_depth=2, max_depth=4))
def test_characteristics_match_pair_oracle(data):
    mu, w = data
    for tag in ("Ap", "ApHat", "ApSib"):
        assert characteristic(w, mu, 2, tag).value == oracles.characteristic_p2(w, mu, tag)
    assert characteristic(w, mu, 2, "ApBal").value == oracles.apbal_p2(w, mu)


@given(weighted(min_depth=2))
def test_class_relations(data):
    mu, w = data
    for p in (2, 3):
        ap = as_float(characteristic(w, mu, p, "Ap").value)
        hat = as_float(characteristic(w, mu, p, "ApHat").value)
        sib = as_float(characteristic(w, mu, p, "ApSib").value)
        assert 1 - 1e-12 <= ap <= hat + 1e-12
        assert sib <= 2 ** max(1, p - 1) * hat**3 * (1 + 1e-12)


def test_witness_realizes_value():
    mu = random_sibling_balanced(unit(5), 1)
    w = random_dyadic_weight(mu.tree, np.random.default_rng(3))
    rep = characteristic(w, mu, 2, "ApHat")
    I, J = rep.witness
    s = TreeFunction(w.tree, 1 / w.values, w.backend)
    assert average(w, mu, I) * average(s, mu, J) == rep.value


@pytest.mark.parametrize("n", [4, 8, 16, 32])
def test_thm34_weight_separation(n):
    mu = thm34_block(n)
    w = thm34_weight(mu, n)
    side = DI(n // 2, 1)
    inv = TreeFunction(w.tree, 1 / w.values, w.backend)
    assert abs(as_float(average(inv, mu, side)) - math.sqrt(n / 2)) < 1e-25
    hat = characteristic(w, mu, 2, "ApHat")
    assert as_float(hat.value) >= 0.5 * math.sqrt(n / 2)
    assert as_float(characteristic(w, mu, 2, "ApBal").value) < 1


def test_ainf_finite_and_at_least_one():
    mu = random_sibling_balanced(unit(5), 6)
    w = random_dyadic_weight(mu.tree, np.random.default_rng(6))
    v = characteristic(w, mu, None, "Ainf").value
    assert 1 <= v < 64


def test_exp_weight_and_delta_zero():
    mu = lebesgue(TreeSpec.unit(5))
    zero = TreeFunction.constant(mu.tree, 0)
    assert np.all(exp_weight(zero, 3.0).values == 1)
    assert find_admissible_delta(zero, mu, 2) == 1.0


def test_admissible_delta_bounded_below():
    mu = lebesgue(TreeSpec.unit(8))
    worst = math.inf
    for seed in range(8):
        b = random_bmo(mu.tree, np.random.default_rng(seed))
        norm = float(bmo_norm(b, mu, exponents=(1,)).norm)
        if norm == 0:
            continue
        delta = find_admissible_delta(b, mu, 2)
        assert as_float(characteristic(exp_weight(b, delta), mu, 2, "ApHat").value) <= 64
        worst = min(worst, delta * norm)
    assert worst >= 1 / 8


def test_reverse_holder_unit_weight():
    mu = lebesgue(TreeSpec.unit(4))
    assert reverse_holder_exponent(TreeFunction.constant(mu.tree, 1), mu) == (4.0, 1.0)
    with pytest.raises(InvalidExponent):
        reverse_holder_exponent(TreeFunction.constant(mu.tree, 1), mu, gamma_max=1)


def _rh_oracle(w, mu, gamma):
    best = 0.0
    for iv in mu.tree.intervals():
        vals = [float(x) for x, leaf in zip(w.values, mu.tree.leaves()) if iv.contains(leaf)]
        ms = [float(mu.mass(leaf)) for leaf in mu.tree.leaves() if iv.contains(leaf)]
        tot = sum(ms)
        num = sum(m * v**gamma for v, m in zip(vals, ms)) / tot
        den = sum(m * v for v, m in zip(vals, ms)) / tot
        best = max(best, num ** (1 / gamma) / den)
    return best


def test_reverse_holder_two_valued_against_enumeration():
    mu = lebesgue(TreeSpec.unit(5))
    rng = np.random.default_rng(4)
    w = TreeFunction.from_values(mu.tree, [F(1, 2) if x else F(2) for x in rng.integers(0, 2, 32)])
    ceiling = 1.3
    gamma, const = reverse_holder_exponent(w, mu, gamma_max=4.0, ceiling=ceiling)
    grid = np.linspace(1.0001, 4.0, 3000)
    passing = [g for g in grid if _rh_oracle(w, mu, g) <= ceiling]
    assert abs(gamma - passing[-1]) <= grid[1] - grid[0]
    assert abs(const - _rh_oracle(w, mu, gamma)) < 1e-9
    assert const <= ceiling


def test_reverse_holder_no_exponent():
    mu = lebesgue(TreeSpec.unit(3))
    w = TreeFunction.from_values(mu.tree, [1, 1, 1, 1, 1, 1, 1, 10**6])
    with pytest.raises(NoExponent):
        reverse_holder_exponent(w, mu, ceiling=1.0)


def test_stopping_maximal_examples():
    mu = mu_k(unit(4, 2), 2)
    one = TreeFunction.constant(mu.tree, 1)
    assert stopping_maximal_intervals(one, mu, F(1, 2)) == [DI(0, 0), DI(0, 1)]
    assert stopping_maximal_intervals(one, mu, 2) == []


@given(weighted(min_depth=3))
def test_stopping_intervals_bounded_by_characteristic(data):
    mu, w = data
    q = characteristic(w, mu, 2, "ApHat").value
    level = F(1, 2)
    ivs = stopping_maximal_intervals(w, mu, level)
    for a, b in zip(ivs, ivs[1:]):
        assert a.right <= b.left
    for iv in ivs:
        assert average(w, mu, iv) > level
        assert average(w, mu, iv) <= q * level or iv.scale == mu.tree.root_scale


@given(weighted(min_depth=2))
def test_log_weight_in_bmo(data):
    mu, w = data
    q = as_float(characteristic(w, mu, 2, "ApHat").value)
    logw = TreeFunction(mu.tree, np.log(np.asarray(w.to(FLOAT).values, dtype=float)), FLOAT)
    assert as_float(bmo_norm(logw, mu, exponents=(1,)).norm) <= math.log(2 * q) + 1
