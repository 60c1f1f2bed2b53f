"""Scenario runner: ``dyadlab run|list|describe|calibrate``.

A scenario is an INI file::

    [scenario]
    name = ...
    anchor = ...           ; where the checked statement lives
    summary = ...

    [run.main]             ; one or more runs
    experiment = cz_trials
    depth = 6
    trials = 50

    [check.failures]
    quantity = cz_failures ; exact name, or "prefix*" for every prefix[...]
    max = 0                ; and/or min; "@key" reads data/constants.ini

Exit codes: 0 when every check passes, 1 on a failed check, 2 on a bad
configuration or unknown scenario.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import inspect
import io
import sys
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

from . import experiments
from .errors import CheckFailure, ConfigError, UnknownScenario

SCENARIO_DIR = "scenarios"
CONSTANTS_FILE = "constants.ini"


def _package_file(*parts: str):
    return resources.files("dyadlab").joinpath(*parts)


# -- constants -------------------------------------------------------------


def load_constants(path: str | Path | None = None) -> dict[str, float]:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if path is None:
        cp.read_string(_package_file("data", CONSTANTS_FILE).read_text())
    else:
        if not Path(path).exists():
            raise ConfigError(f"no constants file at {path}")
        cp.read(path)
    out = {}
    for sec in cp.sections():
        for key, val in cp[sec].items():
            try:
                out[key] = float(Fraction(val))
            except ValueError:
                continue
    return out


# -- scenarios ---------------------------------------------------------------


@dataclass
class Check:
    name: str
    quantity: str
    low: str | None
    high: str | None
    anchor: str


@dataclass
class Scenario:
    name: str
    anchor: str
    summary: str
    runs: list[tuple[str, str, dict]]
    checks: list[Check]
    source: str = ""


def _convert(text: str):
    text = text.strip()
    if "," in text:
        return [_convert(t) for t in text.split(",") if t.strip()]
    if ".." in text:
        a, b = text.split("..")
        return list(range(int(a), int(b) + 1))
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text in ("true", "false"):
        return text == "true"
    return text


def parse_scenario(text: str, source: str = "") -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if "scenario" not in cp:
        raise ConfigError(f"{source}: missing [scenario] section")
    head = cp["scenario"]
    if "name" not in head:
        raise ConfigError(f"{source}: scenario needs a name")
    runs, checks = [], []
    for sec in cp.sections():
        if sec.startswith("run."):
            params = {k: _convert(v) for k, v in cp[sec].items() if k != "experiment"}
            exp = cp[sec].get("experiment")
            if exp not in experiments.REGISTRY:
                raise ConfigError(f"{source}: unknown experiment {exp!r} in [{sec}]")
            fn = experiments.REGISTRY[exp]
            accepted = set(inspect.signature(fn).parameters)
            extra = set(params) - accepted
            if extra:
                raise ConfigError(f"{source}: [{sec}] has parameters {sorted(extra)} that {exp} does not take")
            runs.append((sec[4:], exp, params))
        elif sec.startswith("check."):
            c = cp[sec]
            if "quantity" not in c or ("min" not in c and "max" not in c):
                raise ConfigError(f"{source}: [{sec}] needs a quantity and a min or max")
            checks.append(Check(sec[6:], c["quantity"], c.get("min"), c.get("max"), c.get("anchor", head.get("anchor", ""))))
        elif sec != "scenario":
            raise ConfigError(f"{source}: unexpected section [{sec}]")
    return Scenario(head["name"], head.get("anchor", ""), head.get("summary", ""), runs, checks, source)


def bundled_names() -> list[str]:
    folder = _package_file(SCENARIO_DIR)
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".ini"))


def load_scenario(name_or_path: str) -> Scenario:
    path = Path(name_or_path)
    if path.suffix == ".ini" and path.exists():
        return parse_scenario(path.read_text(), str(path))
    if path.suffix == ".ini":
        raise ConfigError(f"no scenario file at {path}")
    if name_or_path not in bundled_names():
        raise UnknownScenario(f"no bundled scenario named {name_or_path!r}")
    return parse_scenario(_package_file(SCENARIO_DIR, name_or_path + ".ini").read_text(), name_or_path)


def list_scenarios() -> list[str]:
    return bundled_names()


def describe(name: str) -> str:
    sc = load_scenario(name)
    lines = [f"{sc.name}: {sc.summary}", f"  anchor: \"{sc.anchor}\""]
    for run, exp, params in sc.runs:
        pretty = ", ".join(f"{k}={v}" for k, v in params.items())
        lines.append(f"  run {run}: {exp}({pretty})")
    for c in sc.checks:
        bounds = " and ".join(x for x in (f">= {c.low}" if c.low else "", f"<= {c.high}" if c.high else "") if x)
        lines.append(f"  check {c.name}: {c.quantity} {bounds}  [\"{c.anchor}\"]")
    return "\n".join(lines)


# -- running ---------------------------------------------------------------


@dataclass
class ReportRow:
    scenario: str
    seed: object
    depth: object
    quantity: str
    value: float
    ceiling: str
    passed: bool
    witness: str
    anchor: str


def _bound(text: str | None, constants: dict[str, float]) -> float | None:
    if text is None:
        return None
    text = text.strip()
    if text.startswith("@"):
        key = text[1:].lower()
        if key not in constants:
            raise ConfigError(f"constant {key!r} is not defined")
        return constants[key]
    try:
        return float(Fraction(text))
    except ValueError as exc:
        raise ConfigError(f"bad bound {text!r}") from exc


def _matches(quantity: str, pattern: str) -> bool:
    if pattern.endswith("*"):
        return quantity.startswith(pattern[:-1])
    return quantity == pattern


def run_scenario(
    sc: Scenario,
    depth: int | None = None,
    seed: int | None = None,
    bits: int | None = None,
    constants: dict[str, float] | None = None,
) -> list[ReportRow]:
    constants = load_constants() if constants is None else constants
    measured = []
    # smallest depth first so failures surface early
    for _, exp, params in sorted(sc.runs, key=lambda r: r[2].get("depth", 0) if isinstance(r[2].get("depth", 0), int) else 0):
        fn = experiments.REGISTRY[exp]
        accepted = inspect.signature(fn).parameters
        args = dict(params)
        for key, val in (("depth", depth), ("seed", seed), ("bits", bits)):
            if val is not None and key in accepted:
                args[key] = val
        measured.extend(fn(**args))
    rows = []
    for c in sc.checks:
        low, high = _bound(c.low, constants), _bound(c.high, constants)
        ceiling = " ".join(x for x in (f">={low!r}" if low is not None else "", f"<={high!r}" if high is not None else "") if x)
        hits = [m for m in measured if _matches(m.quantity, c.quantity)]
        if not hits:
            raise ConfigError(f"check {c.name}: no measured quantity matches {c.quantity!r}")
        for m in hits:
            ok = (low is None or m.value >= low) and (high is None or m.value <= high)
            rows.append(ReportRow(sc.name, m.seed if m.seed is not None else "", m.depth if m.depth is not None else "", m.quantity, float(m.value), ceiling, ok, m.witness, c.anchor))
    return rows


CSV_HEADER = ["scenario", "seed", "depth", "quantity", "value", "ceiling", "pass", "witness", "anchor"]


def report_csv(rows: list[ReportRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.scenario, r.seed, r.depth, r.quantity, repr(r.value), r.ceiling, "pass" if r.passed else "FAIL", r.witness, r.anchor])
    return buf.getvalue()


def report_summary(sc: Scenario, rows: list[ReportRow]) -> str:
    failed = [r for r in rows if not r.passed]
    out = [f"scenario {sc.name}: {len(rows) - len(failed)}/{len(rows)} checks pass", f"anchor: \"{sc.anchor}\"", ""]
    for r in rows:
        out.append(f"{'PASS' if r.passed else 'FAIL'}  {r.quantity} = {r.value:.6g}  ({r.ceiling})  {r.witness}".rstrip())
    return "\n".join(out) + "\n"


def _write_reports(sc: Scenario, rows: list[ReportRow], out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{sc.name}.csv").write_text(report_csv(rows))
    (out / f"{sc.name}.txt").write_text(report_summary(sc, rows))


# -- calibration -------------------------------------------------------------

CALIBRATION_SEED = 1000
CONSTANTS_HEADER = """\
; Frozen thresholds read by the bundled scenarios as @name.
; Ceilings without a proven value are twice the largest pilot measurement.
; [calibrated] is rewritten by `dyadlab calibrate`.

"""


def calibrate(trials: int = 50, depth: int = 8, seed: int = CALIBRATION_SEED) -> dict[str, float]:
    """Twice the largest domination ratio over calibration seeds and the two-bump sweep."""
    worst = experiments.domination_pilot(depth, trials, seed)
    return {"domination_pilot_max": worst, "domination_c0": 2 * worst}


def write_constants(values: dict[str, float], path: Path, template: str | None = None) -> None:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.read_string(template if template is not None else _package_file("data", CONSTANTS_FILE).read_text())
    if "calibrated" not in cp:
        cp["calibrated"] = {}
    for k, v in values.items():
        cp["calibrated"][k] = repr(round(v, 6))
    with open(path, "w") as fh:
        fh.write(CONSTANTS_HEADER)
        cp.write(fh)


# -- entry point ---------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dyadlab", description="Run dyadic Haar-shift experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a bundled scenario or a scenario file")
    run.add_argument("scenario")
    run.add_argument("--depth", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--precision-bits", type=int, dest="bits")
    run.add_argument("--out", default="reports")
    run.add_argument("--constants", help="constants file (defaults to the bundled one)")
    sub.add_parser("list", help="list bundled scenarios")
    desc = sub.add_parser("describe", help="show a scenario and its checks")
    desc.add_argument("scenario")
    cal = sub.add_parser("calibrate", help="fit the frozen domination constant")
    cal.add_argument("--depth", type=int, default=8)
    cal.add_argument("--seed", type=int, default=CALIBRATION_SEED)
    cal.add_argument("--trials", type=int, default=50)
    cal.add_argument("--out", default=CONSTANTS_FILE)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list":
            for name in list_scenarios():
                sc = load_scenario(name)
                print(f"{name:22s} {sc.anchor}")
            return 0
        if args.command == "describe":
            print(describe(args.scenario))
            return 0
        if args.command == "calibrate":
            values = calibrate(args.trials, args.depth, args.seed)
            write_constants(values, Path(args.out))
            print(f"domination_c0 = {values['domination_c0']:.6g} written to {args.out}")
            return 0
        sc = load_scenario(args.scenario)
        constants = load_constants(args.constants) if args.constants else None
        rows = run_scenario(sc, args.depth, args.seed, args.bits, constants)
        _write_reports(sc, rows, Path(args.out))
        sys.stdout.write(report_summary(sc, rows))
        if any(not r.passed for r in rows):
            raise CheckFailure(f"{sum(not r.passed for r in rows)} check(s) failed")
        return 0
    except (ConfigError, UnknownScenario) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CheckFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
