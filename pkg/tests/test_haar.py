from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import given

from dyadlab import DyadicInterval as DI, TreeFunction, TreeSpec, analyze, haar_function, integral, lebesgue, mp, mu_k, paraproduct, synthesize
from dyadlab.backend import FLOAT, RATIONAL, as_float
from dyadlab.errors import BackendMismatch, OutOfTree
from dyadlab.families import atom_contrast
from dyadlab.haar import (
    average,
    cubed_haar_integral,
    expectation,
    haar_values,
    lambda_coefficient,
    level_averages,
    root_boundary_term,
)
from dyadlab.measures import DyadicMeasure
from dyadlab.weights import bmo_norm

from conftest import measure_and_functions, measures, unit

B = mp(128)


def test_haar_values_lebesgue():
    a, b = haar_values(lebesgue(TreeSpec.unit(3)), DI(0, 0))
    assert abs(a - 1) < 1e-35 and abs(b + 1) < 1e-35


def test_haar_values_mu2():
    mu = mu_k(TreeSpec(0, (0, 1, 2, 3), 6), 2)
    a, b = haar_values(mu, DI(0, 0), B)
    with mpmath.workprec(128):
        s = mpmath.sqrt(mpmath.mpf(9) / 80)
        assert abs(a - s / (mpmath.mpf(9) / 8)) < mpmath.mpf(10) ** -35
        assert abs(b + s * 8) < mpmath.mpf(10) ** -35
    h = haar_function(mu, DI(0, 0), B)
    assert abs(as_float(integral(h, mu))) < 1e-30
    assert abs(as_float(integral(h * h, mu)) - 1) < 1e-30


def test_haar_of_leaf_raises():
    mu = lebesgue(TreeSpec.unit(2))
    with pytest.raises(OutOfTree):
        cubed_haar_integral(mu, DI(2, 0))
    with pytest.raises(OutOfTree):
        analyze(TreeFunction.constant(mu.tree, 1), mu).reduced_at(DI(2, 1))


def test_orthonormal_sweep_depth5():
    mu = mu_k(unit(5, 2), 3)
    hs = [haar_function(mu, iv, B) for iv in mu.tree.internal_intervals()]
    for i, hi in enumerate(hs):
        for j, hj in enumerate(hs):
            val = as_float(integral(hi * hj, mu))
            assert abs(val - (1.0 if i == j else 0.0)) < 1e-30


def test_constant_averages_and_expectation():
    mu = mu_k(unit(4, 2), 3)
    f = TreeFunction.constant(mu.tree, F(7, 3))
    assert average(f, mu, DI(2, 1)) == F(7, 3)
    assert expectation(f, mu, 2) == f
    assert all(r == 0 for lvl in analyze(f, mu).reduced for r in lvl)


@pytest.mark.parametrize("k", [3, 5, 8])
def test_b_k_average_on_left_intervals(k):
    mu = mu_k(unit(8, 2), k)
    b = atom_contrast(mu, k)
    for j in range(0, 9):
        want = (1 + F(1, 2**j)) / (1 + F(1, 2 ** (k + j)))
        assert average(b, mu, DI(j, 0)) == want


def test_expectation_tower(rng):
    mu = mu_k(unit(5, 2), 2)
    f = TreeFunction.from_values(mu.tree, [int(x) for x in rng.integers(-9, 10, mu.grid.n_leaves)])
    for j in range(6):
        for k in range(6):
            assert expectation(expectation(f, mu, j), mu, k) == expectation(f, mu, min(j, k))


def test_expectation_is_level_average(rng):
    mu = mu_k(unit(4), 2)
    f = TreeFunction.from_values(mu.tree, [int(x) for x in rng.integers(-9, 10, mu.grid.n_leaves)])
    e = expectation(f, mu, 2)
    for leaf, v in zip(mu.tree.leaves(), e.values):
        assert v == average(f, mu, leaf.ancestor(leaf.scale - 2))


@given(measure_and_functions(count=1))
def test_roundtrip_exact(data):
    mu, f = data
    assert synthesize(analyze(f, mu), mu) == f


@given(measure_and_functions(count=1))
def test_parseval_128(data):
    # oracle: direct leaf-sum quadrature of f^2
    mu, f = data
    fb = f.to(B)
    exp = analyze(fb, mu)
    coef = exp.coefficient_levels(mu)
    total = sum((c * c).sum() for c in coef if len(c))
    roots = mu.level_masses(B)[0]
    total += (roots * exp.root_averages**2).sum()
    direct = sum(x * x * w for x, w in zip(fb.values, mu.leaf_masses(B)))
    assert abs(as_float(total - direct)) < 1e-25 * max(1.0, as_float(direct))


def test_coefficients_need_roots_on_rational():
    mu = lebesgue(TreeSpec.unit(2))
    with pytest.raises(BackendMismatch):
        analyze(TreeFunction.constant(mu.tree, 1), mu).coefficient_levels(mu)


def test_b_k_coefficients_on_integer_family():
    # |<b_k, h_I>| / (|I|^(1/2) 2^(k/2)) stays within fixed bounds over k
    ratios = []
    for k in (4, 6, 8):
        mu = mu_k(unit(10, 2), k)
        b = atom_contrast(mu, k).to(B)
        exp = analyze(b, mu)
        for j in range(0, 6):
            iv = DI(j, 0)
            ratios.append(abs(as_float(exp.coefficient(mu, iv))) / (float(iv.length) ** 0.5 * 2 ** (k / 2)))
    assert max(ratios) / min(ratios) < 4


def test_cubed_haar_two_leaf():
    tree = TreeSpec.unit(1)
    mu = DyadicMeasure(tree, [1, 3], atomless=True)
    # oracle: leaf sum of h^3 at 128 bits times sqrt(m)
    h = haar_function(mu, DI(0, 0), B)
    direct = integral(h * h * h, mu) * B.sqrt(np.array([B.scalar(mu.m(DI(0, 0)))], dtype=object))[0]
    assert abs(as_float(direct) - 0.5) < 1e-30
    assert cubed_haar_integral(mu, DI(0, 0)) == F(1, 2)


def test_cubed_haar_symmetric():
    assert cubed_haar_integral(lebesgue(TreeSpec.unit(3)), DI(1, 1)) == 0


@given(measures())
def test_cubed_haar_identity_every_interval(mu):
    for iv in mu.tree.internal_intervals():
        h = haar_function(mu, iv, B)
        s = B.sqrt(np.array([B.scalar(mu.m(iv))], dtype=object))[0]
        assert abs(as_float(s * integral(h * h * h, mu)) - float(cubed_haar_integral(mu, iv))) < 1e-28


def test_constant_symbol_paraproducts(rng):
    mu = mu_k(unit(4, 2), 2)
    f = TreeFunction.from_values(mu.tree, [int(x) for x in rng.integers(-9, 10, mu.grid.n_leaves)])
    b = TreeFunction.constant(mu.tree, 5)
    assert paraproduct("pi", b, f, mu) == TreeFunction.constant(mu.tree, 0)
    roots = mu.grid.broadcast(level_averages(f, mu)[0], 0)
    assert paraproduct("Lambda0", b, f, mu) == 5 * (f - TreeFunction.from_values(mu.tree, roots))
    assert lambda_coefficient(b, mu, DI(1, 1)) == 5


@given(measure_and_functions(count=2))
def test_paraproduct_decompositions_exact(data):
    mu, b, f = data
    P = lambda kind: paraproduct(kind, b, f, mu)
    R = root_boundary_term(b, f, mu)
    assert b * f == P("Delta") + P("pi") + P("Lambda0") + R
    assert b * f == P("pi") + P("piStar") + P("Lambda") + R
    assert P("Lambda") == P("Lambda0") + P("Lambda1")


@given(measure_and_functions(count=3))
def test_pi_star_is_adjoint(data):
    mu, b, f, g = data
    lhs = integral(paraproduct("pi", b, f, mu) * g, mu)
    rhs = integral(f * paraproduct("piStar", b, g, mu), mu)
    assert lhs == rhs


def test_paraproduct_backend_mismatch():
    mu = lebesgue(TreeSpec.unit(2))
    with pytest.raises(BackendMismatch):
        paraproduct("pi", TreeFunction.constant(mu.tree, 1), TreeFunction.constant(mu.tree, 1, FLOAT), mu)


@pytest.mark.parametrize("k", [4, 6, 8])
def test_lambda_coefficient_mu_k(k):
    mu = mu_k(unit(6, 2), k)
    b = atom_contrast(mu, k)
    for j in range(0, 5):
        assert abs(lambda_coefficient(b, mu, DI(j, 0)) - 2**k) < 4
    worst = 0
    for iv in mu.tree.internal_intervals():
        if iv.scale > 0:
            worst = max(worst, abs(lambda_coefficient(b, mu, iv) - lambda_coefficient(b, mu, iv.sibling())))
    assert worst < 4


@given(measure_and_functions(count=1, min_depth=3))
def test_expectation_contracts_bmo(data):
    mu, b = data
    full = bmo_norm(b, mu, exponents=(1,)).norm
    for k in range(mu.grid.depth + 1):
        assert bmo_norm(expectation(b, mu, k), mu, exponents=(1,)).norm <= full
