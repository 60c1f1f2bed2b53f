import io
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given

from dyadlab import DyadicInterval as DI, TreeFunction, TreeSpec, analyze, apply_shift, characteristic, dyadic_hilbert, lebesgue, mu_k
from dyadlab.backend import FLOAT
from dyadlab.errors import ConfigError
from dyadlab.families import random_dyadic_weight
from dyadlab.serialize import (
    characteristic_rows,
    dump_coefficients,
    dump_family,
    dump_function,
    dump_measure,
    dump_shift,
    load_coefficients,
    load_family,
    load_function,
    load_measure,
    load_shift,
    write_csv,
)
from dyadlab.shifts import classical_shift
from dyadlab.sparse import build_sparse_family, disjoint_certificate

from conftest import measure_and_functions, measures, unit


@given(measures())
def test_measure_roundtrip(mu):
    back = load_measure(dump_measure(mu))
    assert back.tree == mu.tree and back.atomless == mu.atomless
    assert list(back.leaf_masses()) == list(mu.leaf_masses())


def test_pruned_tree_roundtrip():
    tree = TreeSpec(0, (0,), 3, frozenset({DI(1, 1)}))
    mu = lebesgue(tree)
    assert load_measure(dump_measure(mu)).tree == tree


@given(measure_and_functions(count=1))
def test_function_roundtrip(data):
    _, f = data
    assert load_function(dump_function(f)) == f


def test_float_function_roundtrip():
    tree = TreeSpec.unit(3)
    f = TreeFunction.from_values(tree, np.linspace(-1, 1, 8) / 3, FLOAT)
    back = load_function(dump_function(f))
    assert back.backend is FLOAT
    assert np.array_equal(np.asarray(back.values, dtype=float), np.asarray(f.values, dtype=float))


@given(measure_and_functions(count=1))
def test_coefficients_roundtrip(data):
    mu, f = data
    exp = analyze(f, mu)
    tree, roots, reduced = load_coefficients(dump_coefficients(exp))
    assert tree == mu.tree
    assert list(roots.values()) == list(exp.root_averages)
    assert all(reduced[iv] == exp.reduced_at(iv) for iv in mu.tree.internal_intervals())


@pytest.mark.parametrize("make", [dyadic_hilbert, classical_shift])
def test_shift_roundtrip_acts_the_same(make):
    mu = mu_k(unit(5, 2), 2)
    T = make()
    back = load_shift(dump_shift(T, mu.tree))
    rng = np.random.default_rng(0)
    f = TreeFunction.from_values(mu.tree, rng.standard_normal(mu.grid.n_leaves), FLOAT)
    assert np.allclose(np.asarray(apply_shift(back, f, mu).values, dtype=float), np.asarray(apply_shift(T, f, mu).values, dtype=float), atol=1e-13)


def test_family_roundtrip():
    mu = lebesgue(TreeSpec.unit(8))
    f = TreeFunction.indicator(mu.tree, DI(8, 0)) * 256
    fam = build_sparse_family(f, f, mu)
    cert = disjoint_certificate(fam.intervals, mu, fam.eta / 2)
    ivs, eta, back = load_family(dump_family(fam, cert))
    assert ivs == fam.intervals and eta == fam.eta
    assert back == cert


def test_csv_and_characteristic_rows():
    mu = lebesgue(TreeSpec.unit(3))
    w = random_dyadic_weight(mu.tree, np.random.default_rng(1))
    reps = [characteristic(w, mu, 2, tag) for tag in ("Ap", "ApHat")]
    rows = characteristic_rows(reps, 3)
    buf = io.StringIO()
    write_csv(buf, ["classTag", "p", "value", "witnessI", "witnessJ", "depth"], rows)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "classTag,p,value,witnessI,witnessJ,depth"
    assert lines[1].startswith("Ap,2,") and lines[2].startswith("ApHat,2,")
    assert F(lines[1].split(",")[2]) == reps[0].value


@pytest.mark.parametrize(
    "text",
    [
        "atomless: yes\n0:0 1\n",
        "tree: root_scale=0 roots=0 leaf_scale=1\natomless: maybe\n1:0 1\n1:1 1\n",
        "tree: root_scale=0 roots=0 leaf_scale=1\natomless: yes\n1:0 1\n",
        "tree: root_scale=0 roots=0 leaf_scale=1\natomless: yes\n1:0 x\n1:1 1\n",
        "tree: root_scale=0 roots=0 leaf_scale=1\natomless: yes\n1:zero 1\n1:1 1\n",
        "tree: roots=0\natomless: yes\n",
        "tree: root_scale=0 roots=0 leaf_scale=1\natomless: yes\n1:0\n1:1 1\n",
    ],
)
def test_bad_measure_files(text):
    with pytest.raises(ConfigError):
        load_measure(text)


def test_bad_shift_file():
    with pytest.raises(ConfigError):
        load_shift("tree: root_scale=0 roots=0 leaf_scale=2\ncomplexity: one 1\n")


def test_comments_ignored():
    mu = lebesgue(TreeSpec.unit(2))
    text = "# a comment\n" + dump_measure(mu)
    assert load_measure(text).tree == mu.tree
