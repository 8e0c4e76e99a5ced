"""``ful`` command line: JSON scenarios in, CSV tables and JSON reports out.

Exit codes: 0 success, 1 failed verify gate, 2 configuration error,
3 numerical guard (grazing, truncation overflow, tracking ambiguity, ...).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .adiabatic import (R0, RT, BelowThreshold, NormalPoint, SingularityAhead, section_points,
                        section_to_collision, to_adiabatic)
from .classical import CollisionRecord, SimulationError, simulate
from .floquet import (FoldBoundary, NotUnitary, TrackingAmbiguity, quad_coeff,
                      quasienergy_spectrum, spectrum_rows)
from .model import (ModelParams, ParameterError, classical_q, construct_quantum_resonant,
                    detect_quantum_resonance)
from .propagator import TruncationOverflow, Wave, evolve_and_fit
from .skew import OnCutPoint, birkhoff_diagnostics, classify_rational, parse_rational
from .verify import run_verify

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

TASKS = ("classical-simulate", "classical-poincare", "classical-classify", "classical-birkhoff",
         "quantum-spectrum", "quantum-evolve", "quantum-coeff", "verify")
PARAM_KEYS = {"A", "B", "T", "p", "q", "resonance"}
NUMERIC_GUARDS = (SimulationError, TruncationOverflow, TrackingAmbiguity, FoldBoundary,
                  NotUnitary, BelowThreshold, SingularityAhead, OnCutPoint)


class ConfigError(ValueError):
    pass


def _fraction(text, what: str) -> Fraction:
    if not isinstance(text, str):
        raise ConfigError(f"{what} must be a string 'r/s', got {text!r}")
    try:
        return parse_rational(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _number(opts: Dict, key: str, default=None, kind=float, positive=False):
    if key not in opts:
        if default is None:
            raise ConfigError(f"missing option '{key}'")
        return default
    val = opts[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"option '{key}' must be numeric, got {val!r}")
    if kind is int and val != int(val):
        raise ConfigError(f"option '{key}' must be an integer, got {val!r}")
    val = kind(val)
    if not math.isfinite(val) or (positive and val <= 0):
        raise ConfigError(f"option '{key}' must be {'positive' if positive else 'finite'}, got {val!r}")
    return val


class Scenario:
    """A validated scenario: parameters, the task name and its options."""

    def __init__(self, data: Dict, task: Optional[str] = None):
        if not isinstance(data, dict):
            raise ConfigError("scenario must be a JSON object")
        file_task = data.get("task")
        if task and file_task and task != file_task:
            raise ConfigError(f"command selects task '{task}' but scenario says '{file_task}'")
        self.task = task or file_task
        if self.task not in TASKS:
            raise ConfigError(f"unknown or missing task {self.task!r}")
        block = dict(data.get("params", {}))
        block.update({k: v for k, v in data.items() if k in PARAM_KEYS})
        self.options = {k: v for k, v in data.items() if k not in PARAM_KEYS | {"params", "task"}}
        self.p = self.q = None
        try:
            if "resonance" in block or "p" in block:
                if "resonance" in block:
                    frac = _fraction(block["resonance"], "resonance")
                    self.p, self.q = frac.numerator, frac.denominator
                else:
                    self.p = _number(block, "p", kind=int, positive=True)
                    self.q = _number(block, "q", kind=int, positive=True)
                if "T" in block:
                    raise ConfigError("give either T or the quantum resonance p/q, not both")
                self.params = construct_quantum_resonant(_number(block, "A"), _number(block, "B"),
                                                         self.p, self.q)
            else:
                self.params = ModelParams(_number(block, "A"), _number(block, "B"), _number(block, "T"))
        except ParameterError as exc:
            raise ConfigError(f"parameters: {exc}") from None
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"parameters: {exc}") from None

    def resolved(self) -> Dict:
        out = {"A": self.params.A, "B": self.params.B, "T": self.params.T}
        if self.p is not None:
            out.update(p=self.p, q=self.q)
        return out

    def quantum_pq(self):
        if self.p is None:
            res = detect_quantum_resonance(self.params)
            if res is None:
                raise ConfigError("quantum tasks need a (p, q)-resonance; give p and q")
            return res.p, res.q
        return self.p, self.q


def _header(scn: Scenario) -> str:
    return f"ful {__version__} task={scn.task} params={json.dumps(scn.resolved(), sort_keys=True)}"


def _write_csv(path: Path, scn: Scenario, columns: List[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {_header(scn)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def _write_json(path: Path, scn: Scenario, body: Dict) -> Path:
    # JSON has no comments, so the header travels as the first field
    doc = {"header": _header(scn)}
    doc.update(body)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False, default=float)
        fh.write("\n")
    return path


def _start_record(scn: Scenario) -> CollisionRecord:
    o = scn.options
    if "tau0" in o or "I0" in o:
        section = o.get("section", R0)
        if section not in (R0, RT):
            raise ConfigError(f"section must be {R0} or {RT}")
        point = NormalPoint(_number(o, "tau0") % 1.0, _number(o, "I0", positive=True), section)
        return CollisionRecord(*section_to_collision(point, scn.params))
    return CollisionRecord(_number(o, "t0", 0.0), _number(o, "v0", positive=True))


def task_classical_simulate(scn: Scenario, out: Path, seed: int) -> List[Path]:
    n = _number(scn.options, "collisions", 1000, int, positive=True)
    recs = simulate(_start_record(scn), scn.params, n_moving_collisions=n)
    rows = []
    for i, rec in enumerate(recs):
        pt = to_adiabatic(rec.t, rec.v, scn.params, side="left" if rec.singular else "right")
        rows.append((i, rec.t, rec.v, pt.I, pt.theta, int(rec.singular)))
    return [_write_csv(out / "trajectory.csv", scn, ["n", "t", "v", "I", "theta", "singular"], rows)]


def task_classical_poincare(scn: Scenario, out: Path, seed: int) -> List[Path]:
    periods = _number(scn.options, "periods", 100, int, positive=True)
    start = _start_record(scn)
    recs = simulate(start, scn.params, t_max=start.t + periods * scn.params.period)
    rows = [(idx, pt.section, pt.tau, pt.I, int(pt.singular))
            for idx, pt in section_points(recs, scn.params)]
    return [_write_csv(out / "poincare.csv", scn, ["n", "section", "tau", "I", "singular"], rows)]


def _tau_list(value) -> list:
    values = value if isinstance(value, list) else [value]
    out = []
    for v in values:
        if isinstance(v, str):
            out.append((v, _fraction(v, "tau0")))
        elif isinstance(v, (int, float)) and not isinstance(v, bool) and 0 <= v < 1:
            out.append((repr(float(v)), float(v)))
        else:
            raise ConfigError(f"tau0 entries must lie in [0, 1), got {v!r}")
    return out


def task_classical_classify(scn: Scenario, out: Path, seed: int) -> List[Path]:
    D = _fraction(scn.options.get("D"), "D")
    if not 0 <= D < 1:
        raise ConfigError("D must lie in [0, 1)")
    try:
        q = (classical_q(scn.params) if "q" not in scn.options
             else _number(scn.options, "q", kind=int, positive=True))
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    if "tau0" not in scn.options:
        raise ConfigError("missing option 'tau0'")
    rows = []
    for label, tau0 in _tau_list(scn.options["tau0"]):
        res = classify_rational(D.numerator, D.denominator, tau0, q)
        rows.append((D.numerator, D.denominator, q, label, res.Q, res.delta_eta, res.verdict))
    return [_write_csv(out / "classify.csv", scn,
                       ["r", "s", "q", "tau0", "Q", "delta_eta", "verdict"], rows)]


def task_classical_birkhoff(scn: Scenario, out: Path, seed: int) -> List[Path]:
    o = scn.options
    rng = np.random.default_rng(seed)
    D = o.get("D")
    D = float(_fraction(D, "D")) if isinstance(D, str) else (_number(o, "D") if D is not None else rng.random())
    try:
        q = classical_q(scn.params) if "q" not in o else _number(o, "q", kind=int, positive=True)
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None
    tau0 = _number(o, "tau0", rng.random())
    N = _number(o, "N", 10**6, int, positive=True)
    rep = birkhoff_diagnostics(D, q, tau0, N)
    body = {"D": D, "q": q, "tau0": tau0, **rep.__dict__}
    return [_write_json(out / "birkhoff.json", scn, body)]


def task_quantum_spectrum(scn: Scenario, out: Path, seed: int) -> List[Path]:
    p, q = scn.quantum_pq()
    grid = _number(scn.options, "grid", 1024, int, positive=True)
    spec = quasienergy_spectrum(scn.params, p, q, grid)
    csv_path = _write_csv(out / "spectrum.csv", scn, ["x0", "branch", "xi", "rho"], spectrum_rows(spec))
    body = {"bands": [list(b) for b in spec.bands], "degenerate": spec.degenerate,
            "max_residual": spec.max_residual}
    return [csv_path, _write_json(out / "bands.json", scn, body)]


def _initial_phi(scn: Scenario):
    mode = _number(scn.options, "mode", 1, int, positive=True)
    return mode, (lambda x: math.sqrt(2) * np.sin(mode * np.pi * x))


def task_quantum_evolve(scn: Scenario, out: Path, seed: int) -> List[Path]:
    p, q = scn.quantum_pq()
    o = scn.options
    n_modes = _number(o, "n_modes", 4096, int, positive=True)
    periods = _number(o, "periods", 200, int, positive=True)
    ordering = o.get("ordering", "as-written")
    if ordering not in ("as-written", "jump-first"):
        raise ConfigError(f"ordering must be 'as-written' or 'jump-first', got {ordering!r}")
    mode, phi = _initial_phi(scn)
    if mode > n_modes:
        raise ConfigError("mode exceeds n_modes")
    series = evolve_and_fit(Wave.mode(mode, n_modes), scn.params, periods, ordering)
    a_an = quad_coeff(scn.params, p, q, phi)
    a, b, c = series.fit
    csv_path = _write_csv(out / "energy.csv", scn, ["N", "E"], enumerate(series.E.tolist()))
    body = {"a": a, "b": b, "c": c, "residual_rms": series.residual_rms, "a_analytic": a_an,
            "rel_err": abs(a - a_an) / abs(a_an) if a_an else None}
    return [csv_path, _write_json(out / "fit.json", scn, body)]


def task_quantum_coeff(scn: Scenario, out: Path, seed: int) -> List[Path]:
    p, q = scn.quantum_pq()
    h = _number(scn.options, "h", 1.0 / 2048, positive=True)
    _, phi = _initial_phi(scn)
    a = quad_coeff(scn.params, p, q, phi, h=h)
    return [_write_json(out / "coeff.json", scn, {"a_analytic": a, "grid_h": h, "branches": q})]


def task_verify(scn: Scenario, out: Path, seed: int):
    o = scn.options
    scale = _number(o, "scale", 1.0, positive=True)
    tol = _number(o, "tolerance", None) if "tolerance" in o else None
    gates = run_verify(scn.params, seed=seed, scale=scale, tolerance=tol)
    for g in gates:
        print(g.line())
    ok = all(g.passed for g in gates)
    body = {"passed": ok, "seed": seed, "scale": scale, "gates": [g.to_dict() for g in gates]}
    return [_write_json(out / "verify.json", scn, body)], ok


HANDLERS = {
    "classical-simulate": task_classical_simulate,
    "classical-poincare": task_classical_poincare,
    "classical-classify": task_classical_classify,
    "classical-birkhoff": task_classical_birkhoff,
    "quantum-spectrum": task_quantum_spectrum,
    "quantum-evolve": task_quantum_evolve,
    "quantum-coeff": task_quantum_coeff,
}


def run(data: Dict, out: Path, task: Optional[str] = None, seed: int = 0) -> int:
    """Validate and execute one scenario; returns the exit code."""
    try:
        scn = Scenario(data, task)
        out.mkdir(parents=True, exist_ok=True)
        if scn.task == "verify":
            _, ok = task_verify(scn, out, seed)
            return EXIT_OK if ok else EXIT_VERIFY
        for path in HANDLERS[scn.task](scn, out, seed):
            print(path)
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_GUARDS as exc:
        print(f"error: numerical: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _global_flags(parser: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="JSON scenario file")
    parser.add_argument("--out", default=d if suppress else ".", help="output directory")
    parser.add_argument("--threads", type=int, default=d if suppress else 1,
                        help="accepted for interface stability; work runs serially")
    parser.add_argument("--seed", type=int, default=d if suppress else 0, help="RNG seed (u64)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ful", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ful {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="group", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    for group, names in (("classical", ("simulate", "poincare", "classify", "birkhoff")),
                         ("quantum", ("spectrum", "evolve", "coeff"))):
        gp = sub.add_parser(group, parents=[common])
        gsub = gp.add_subparsers(dest="action", required=True)
        for name in names:
            gsub.add_parser(name, parents=[common])
    sub.add_parser("verify", parents=[common], help="run the oracle gates")
    sub.add_parser("run", parents=[common], help="run the task named in the scenario")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: config: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed < 0 or args.seed >= 2 ** 64:
        print("error: config: --seed must be a u64", file=sys.stderr)
        return EXIT_CONFIG
    task = None if args.group == "run" else (
        "verify" if args.group == "verify" else f"{args.group}-{args.action}")
    if args.config is None:
        if task != "verify":
            print("error: config: --config is required for this command", file=sys.stderr)
            return EXIT_CONFIG
        data = {"A": 1 / math.sqrt(2), "B": math.sqrt(2), "T": 1.0}
    else:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: config: cannot read scenario: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    return run(data, Path(args.out), task, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
