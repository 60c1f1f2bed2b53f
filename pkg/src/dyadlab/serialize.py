"""Plain-text file formats.

Intervals are written as ``k:p``.  Exact values are written as ``a/b``
fractions; float values with ``repr``.
"""

from __future__ import annotations

import csv
from fractions import Fraction
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .backend import FLOAT, RATIONAL
from .dyadic import DyadicInterval, TreeSpec, grid_of
from .errors import ConfigError
from .haar import HaarExpansion, TreeFunction
from .measures import DyadicMeasure
from .shifts import HaarShiftSpec, shift_from_coefficients
from .sparse import SparseFamily


def _num(x) -> str:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _parse_num(text: str):
    try:
        return Fraction(text)
    except ValueError as exc:
        raise ConfigError(f"bad number {text!r}") from exc


def _lines(text: str) -> list[str]:
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]


def _tree(lines: list[str]) -> TreeSpec:
    try:
        return TreeSpec.from_description(_header(lines, "tree"))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad tree description: {exc}") from exc


def _interval(text: str) -> DyadicInterval:
    try:
        return DyadicInterval.parse(text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _header(lines: list[str], key: str) -> str:
    for ln in lines:
        if ln.startswith(key + ":"):
            return ln.split(":", 1)[1].strip()
    raise ConfigError(f"missing header {key!r}")


# -- measures --------------------------------------------------------------


def dump_measure(mu: DyadicMeasure) -> str:
    out = [f"tree: {mu.tree.describe()}", f"atomless: {'yes' if mu.atomless else 'no'}"]
    if mu.label:
        out.append(f"label: {mu.label}")
    for iv, w in zip(mu.tree.leaves(), mu.leaf_masses()):
        out.append(f"{iv} {_num(w)}")
    return "\n".join(out) + "\n"


def load_measure(text: str) -> DyadicMeasure:
    lines = _lines(text)
    tree = _tree(lines)
    flag = _header(lines, "atomless")
    if flag not in ("yes", "no"):
        raise ConfigError(f"atomless must be yes or no, got {flag!r}")
    label = next((ln.split(":", 1)[1].strip() for ln in lines if ln.startswith("label:")), "")
    masses = _leaf_records(lines, tree)
    return DyadicMeasure(tree, masses, flag == "yes", label=label)


def _leaf_records(lines: list[str], tree: TreeSpec) -> list:
    vals = {}
    for ln in lines:
        head = ln.split()[0]
        if head.endswith(":") or ":" not in head:
            continue
        iv = _interval(head)
        if len(ln.split()) < 2:
            raise ConfigError(f"no value on line {ln!r}")
        vals[iv] = _parse_num(ln.split()[1])
    leaves = tree.leaves()
    missing = [str(iv) for iv in leaves if iv not in vals]
    if missing:
        raise ConfigError(f"no value for leaves {', '.join(missing[:4])}")
    return [vals[iv] for iv in leaves]


# -- functions -------------------------------------------------------------


def dump_function(f: TreeFunction) -> str:
    out = [f"tree: {f.tree.describe()}", f"backend: {'rational' if f.backend.exact else 'float'}"]
    for iv, v in zip(f.tree.leaves(), f.values):
        out.append(f"{iv} {_num(v)}")
    return "\n".join(out) + "\n"


def load_function(text: str) -> TreeFunction:
    lines = _lines(text)
    tree = _tree(lines)
    backend = RATIONAL if _header(lines, "backend") == "rational" else FLOAT
    vals = _leaf_records(lines, tree)
    if backend is FLOAT:
        vals = [float(v) for v in vals]
    return TreeFunction.from_values(tree, vals, backend)


# -- Haar coefficients -----------------------------------------------------


def dump_coefficients(exp: HaarExpansion) -> str:
    """One "k:p r" line per internal interval; the coefficient is r sqrt(m(I))."""
    out = [f"tree: {exp.tree.describe()}"]
    g = grid_of(exp.tree)
    for iv, avg in zip(g.intervals_at(0), exp.root_averages):
        out.append(f"root {iv} {_num(avg)}")
    for iv in exp.tree.internal_intervals():
        out.append(f"{iv} {_num(exp.reduced_at(iv))}")
    return "\n".join(out) + "\n"


def load_coefficients(text: str) -> tuple[TreeSpec, dict, dict]:
    """(tree, root averages, reduced coefficients) keyed by interval."""
    lines = _lines(text)
    tree = _tree(lines)
    roots, reduced = {}, {}
    for ln in lines:
        parts = ln.split()
        if parts[0] == "root":
            roots[_interval(parts[1])] = _parse_num(parts[2])
        elif not parts[0].endswith(":"):
            reduced[_interval(parts[0])] = _parse_num(parts[1])
    return tree, roots, reduced


# -- shifts ----------------------------------------------------------------


def dump_shift(T: HaarShiftSpec, tree: TreeSpec) -> str:
    g = grid_of(tree)
    out = [f"tree: {tree.describe()}", f"complexity: {T.u} {T.v}"]
    for iv in tree.internal_intervals():
        if iv.scale - tree.root_scale + max(T.u, T.v) > g.depth:
            continue
        for (m, n) in sorted(T.slices):
            j, k = iv.descendant(T.u, m), iv.descendant(T.v, n)
            if not (tree.is_internal(j) and tree.is_internal(k)):
                continue
            c = T.coefficient(g, iv, j, k)
            if c != 0:
                out.append(f"I={iv} J={j} K={k} {_num(c)}")
    return "\n".join(out) + "\n"


def load_shift(text: str) -> HaarShiftSpec:
    lines = _lines(text)
    tree = _tree(lines)
    try:
        u, v = (int(x) for x in _header(lines, "complexity").split())
    except ValueError as exc:
        raise ConfigError("complexity needs two integers") from exc
    mapping = {}
    for ln in lines:
        if not ln.startswith("I="):
            continue
        parts = ln.split()
        keys = {p.split("=")[0]: _interval(p.split("=")[1]) for p in parts[:3]}
        mapping[(keys["I"], keys["J"], keys["K"])] = _parse_num(parts[3])
    return shift_from_coefficients(u, v, mapping, tree)


# -- sparse families and CSV -------------------------------------------------


def dump_family(fam: SparseFamily, certificate: dict | None = None) -> str:
    out = [f"top: {fam.top}", f"eta: {_num(fam.eta)}"]
    for iv in fam.intervals:
        line = str(iv)
        if certificate and iv in certificate:
            line += " E=" + ",".join(str(k) for k in certificate[iv])
        out.append(line)
    return "\n".join(out) + "\n"


def load_family(text: str) -> tuple[list[DyadicInterval], Fraction, dict]:
    lines = _lines(text)
    eta = _parse_num(_header(lines, "eta"))
    ivs, cert = [], {}
    for ln in lines:
        if ln.startswith(("top:", "eta:")):
            continue
        parts = ln.split()
        iv = _interval(parts[0])
        ivs.append(iv)
        if len(parts) > 1 and parts[1].startswith("E="):
            cert[iv] = [int(x) for x in parts[1][2:].split(",") if x]
    return ivs, eta, cert


def write_csv(path_or_stream, header: list[str], rows: Iterable[Iterable]) -> None:
    def emit(fh: TextIO):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(x) if isinstance(x, (Fraction, float, np.floating)) else x for x in r])

    if isinstance(path_or_stream, (str, Path)):
        with open(path_or_stream, "w", newline="") as fh:
            emit(fh)
    else:
        emit(path_or_stream)


def characteristic_rows(reports, depth: int) -> list[list]:
    """CSV rows: classTag, p, value, witnessI, witnessJ, depth."""
    rows = []
    for r in reports:
        wi, wj = (r.witness if isinstance(r.witness, tuple) else (r.witness, None))
        rows.append([r.tag, _num(r.p), _num(r.value), str(wi) if wi else "", str(wj) if wj else "", depth])
    return rows
