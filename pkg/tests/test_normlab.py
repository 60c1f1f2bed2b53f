import io

import numpy as np
import pytest

from dyadlab import TreeFunction, TreeSpec, dyadic_hilbert, lebesgue, mu_k, random_sibling_balanced
from dyadlab.errors import InvalidExponent, NegativeInput, ZeroFunction
from dyadlab.families import random_bmo, random_dyadic_weight
from dyadlab.normlab import (
    brute_force_norm,
    commutator_operator,
    identity_operator,
    multiplication_operator,
    norm_scan,
    operator_norm,
    random_lower_bound,
    shift_operator,
    weak_type_ratio,
)
from dyadlab.shifts import classical_shift

from conftest import unit


@pytest.mark.parametrize("make", [lambda: lebesgue(TreeSpec.unit(6)), lambda: mu_k(unit(6, 2), 3), lambda: random_sibling_balanced(unit(6, 2), 1)])
def test_hilbert_is_contraction_with_norm_one(make):
    est = operator_norm(dyadic_hilbert(), make())
    assert abs(est.value - 1) < 1e-10
    assert est.method == "exactSpectral"


def test_commutator_with_constant_vanishes():
    mu = mu_k(unit(5, 2), 2)
    est = operator_norm(commutator_operator(dyadic_hilbert(), TreeFunction.constant(mu.tree, 3), mu), mu)
    assert est.value < 1e-12


def test_multiplication_norm_is_sup():
    mu = lebesgue(TreeSpec.unit(4))
    b = TreeFunction.from_values(mu.tree, list(range(-8, 8)))
    assert operator_norm(multiplication_operator(b, mu), mu).value == pytest.approx(8)
    assert operator_norm(multiplication_operator(b, mu), mu, p=3).value == pytest.approx(8, rel=1e-6)


def _small():
    return random_sibling_balanced(TreeSpec.unit(2), 5)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("weighted", [False, True])
def test_power_iteration_against_brute_force(p, weighted):
    mu = _small()
    w = random_dyadic_weight(mu.tree, np.random.default_rng(7)) if weighted else None
    b = random_bmo(mu.tree, np.random.default_rng(8))
    T = commutator_operator(dyadic_hilbert(), b, mu)
    est = operator_norm(T, mu, w, p=p, method="power")
    brute = brute_force_norm(T, mu, w, p)
    assert abs(est.value - brute) <= 1e-4 * max(1.0, brute)
    assert abs(est.verify(T, mu, w) - est.value) <= 1e-9 * max(1.0, est.value)


def test_brute_force_size_limit():
    mu = lebesgue(TreeSpec.unit(3))
    with pytest.raises(ValueError):
        brute_force_norm(identity_operator(mu), mu)


def test_lower_bound_below_estimate():
    mu = random_sibling_balanced(unit(6), 2)
    T = commutator_operator(dyadic_hilbert(), random_bmo(mu.tree, np.random.default_rng(2)), mu)
    assert random_lower_bound(T, mu).value <= operator_norm(T, mu).value + 1e-12


def test_matrix_free_agrees_with_dense(monkeypatch):
    import dyadlab.normlab as nl

    mu = random_sibling_balanced(unit(7), 3)
    T = commutator_operator(dyadic_hilbert(), random_bmo(mu.tree, np.random.default_rng(3)), mu)
    dense2, dense3 = operator_norm(T, mu).value, operator_norm(T, mu, p=3).value
    monkeypatch.setattr(nl, "DENSE_LIMIT", 4)
    monkeypatch.setattr(nl, "POWER_DENSE_LIMIT", 4)
    lan = operator_norm(T, mu)
    assert lan.method == "lanczosSpectral"
    assert abs(lan.value - dense2) < 1e-8
    assert abs(operator_norm(T, mu, p=3).value - dense3) < 1e-8


def test_operator_norm_errors():
    mu = lebesgue(TreeSpec.unit(3))
    with pytest.raises(InvalidExponent):
        operator_norm(identity_operator(mu), mu, p=1)
    with pytest.raises(NegativeInput):
        operator_norm(identity_operator(mu), mu, TreeFunction.constant(mu.tree, 0))
    with pytest.raises(ValueError):
        operator_norm(identity_operator(mu), mu, method="guess")
    with pytest.raises(TypeError):
        operator_norm("H", mu)


def test_weak_ratio_identity():
    mu = random_sibling_balanced(unit(6), 4)
    rng = np.random.default_rng(4)
    for _ in range(5):
        f = TreeFunction.from_values(mu.tree, [int(x) for x in rng.integers(-5, 6, mu.grid.n_leaves)])
        if any(f.values):
            assert weak_type_ratio(identity_operator(mu), mu, f).ratio <= 1 + 1e-12


def test_weak_ratio_indicator_exact():
    # |f| = 1 on [0, 1/4): t mu{|f| >= t} peaks at t = 1 with value 1/4 = ||f||_1
    mu = lebesgue(TreeSpec.unit(2))
    f = TreeFunction.from_values(mu.tree, [1, 0, 0, 0])
    res = weak_type_ratio(identity_operator(mu), mu, f)
    assert res.ratio == pytest.approx(1.0) and res.level == 1.0
    assert weak_type_ratio(identity_operator(mu), mu, f, levels=[0.5]).ratio == pytest.approx(0.5)


@pytest.mark.parametrize("c", [2, -3, 7])
def test_weak_ratio_scale_invariant(c):
    mu = mu_k(unit(6, 2), 3)
    rng = np.random.default_rng(1)
    f = TreeFunction.from_values(mu.tree, [int(x) for x in rng.integers(-4, 5, mu.grid.n_leaves)])
    H = shift_operator(dyadic_hilbert(), mu)
    assert weak_type_ratio(H, mu, f * c).ratio == pytest.approx(weak_type_ratio(H, mu, f).ratio, rel=1e-12)


def test_weak_ratio_zero():
    mu = lebesgue(TreeSpec.unit(2))
    with pytest.raises(ZeroFunction):
        weak_type_ratio(identity_operator(mu), mu, TreeFunction.constant(mu.tree, 0))


def test_norm_scan_survives_errors():
    mu = lebesgue(TreeSpec.unit(3))

    def evaluate(params):
        return {"norm": operator_norm(identity_operator(mu), mu, p=params["p"]).value}

    buf = io.StringIO()
    rows = norm_scan([{"p": 2.0}, {"p": 0.5}, {"p": 3.0}], evaluate, buf)
    assert [r["error"] == "" for r in rows] == [True, False, True]
    assert rows[1]["error"].startswith("InvalidExponent")
    assert buf.getvalue().splitlines()[0] == "p,norm,error"


def test_two_slice_shift_norm_bounded():
    # each slice is a partial isometry
    mu = lebesgue(TreeSpec.unit(6))
    T = classical_shift()
    assert operator_norm(T, mu).value <= 2 + 1e-12
