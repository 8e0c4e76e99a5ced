"""Cross-module oracle gates: each pairs two independent computations of one quantity.

Gate functions take an explicit ``numpy.random.Generator`` and return
:class:`Gate` records; they never raise on a failed comparison.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional

import numpy as np

from .adiabatic import (R0, RT, AdiabaticPoint, NormalPoint, P1, P2, default_i_min,
                        from_adiabatic, section_points, section_to_collision, to_adiabatic)
from .classical import CollisionRecord, simulate
from .floquet import (build_matrices, gamma_table, quad_coeff, quasienergy_spectrum,
                      reduced_period, unitarity_defect)
from .model import ModelParams, classical_q, construct_quantum_resonant, detect_classical_resonance
from .propagator import (OVERSAMPLE, Wave, evolve_and_fit, full_period, sine_synthesis,
                         snap_resonance)
from .skew import birkhoff_diagnostics, build_layout, classify_rational, verify_skew_equivalence

ParamSource = Callable[[np.random.Generator], ModelParams]


@dataclass
class Gate:
    name: str
    value: float
    tol: float
    passed: bool
    detail: Dict
    below: bool = True  # pass when value < tol; otherwise when value >= tol

    def retolerance(self, tol: float):
        self.tol = float(tol)
        self.passed = bool(self.value < self.tol) if self.below else bool(self.value >= self.tol)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.value:.6g} (tol {self.tol:.3g})"

    def to_dict(self) -> Dict:
        return asdict(self)


def _gate(name, value, tol, detail=None, below=True) -> Gate:
    gate = Gate(name, float(value), float(tol), False, detail or {}, below)
    gate.retolerance(tol)
    return gate


def random_params(rng: np.random.Generator) -> ModelParams:
    A = rng.uniform(0.5, 2.0)
    return ModelParams(A, A * rng.uniform(1.2, 4.0), rng.uniform(0.5, 3.0))


def resonant_params(rng: np.random.Generator, q_max: int = 5) -> ModelParams:
    q = int(rng.integers(1, q_max + 1))
    A = rng.uniform(0.5, 2.0)
    return ModelParams(A, A * (1 + q), rng.uniform(0.5, 3.0))


def _source(params: Optional[ModelParams], default: ParamSource) -> ParamSource:
    return default if params is None else (lambda rng: params)


def _circ(d: float) -> float:
    d = abs(d) % 1.0
    return min(d, 1.0 - d)


def shear_gate(rng, n: int = 500, params: Optional[ModelParams] = None,
               tol: float = 1e-9) -> List[Gate]:
    """Collision pairs away from the kinks against the shear (theta + 1/I, I)."""
    draw = _source(params, random_params)
    worst_I = worst_theta = 0.0
    for _ in range(n):
        p = draw(rng)
        I0 = rng.uniform(50, 100) * default_i_min(p)
        # both collisions must stay inside one half period
        half = 0.5 if rng.random() < 0.5 else 0.0
        theta0 = half + rng.uniform(0.0, 0.5 - 3.0 / I0)
        t, v = from_adiabatic(AdiabaticPoint(theta0, I0), p)
        rec = simulate(CollisionRecord(t, v), p, n_moving_collisions=1)[1]
        pt = to_adiabatic(rec.t, rec.v, p)
        worst_I = max(worst_I, abs(pt.I - I0) / I0)
        worst_theta = max(worst_theta, abs(pt.theta - theta0 - 1.0 / I0))
    return [_gate("shear: relative change of I", worst_I, tol, {"samples": n}),
            _gate("shear: theta increment error", worst_theta, tol, {"samples": n})]


def normal_form_gate(rng, n: int = 500, params: Optional[ModelParams] = None,
                     tol: float = 1e-8) -> List[Gate]:
    """Exact simulation across one kink against P1 (from R0) or P2 (from RT)."""
    draw = _source(params, random_params)
    worst_tau = worst_I = 0.0
    for i in range(n):
        p = draw(rng)
        start = NormalPoint(rng.random(), rng.uniform(1, 5) * default_i_min(p),
                            R0 if i % 2 == 0 else RT)
        t, v = section_to_collision(start, p)
        recs = simulate(CollisionRecord(t, v), p, t_max=t + 2 * p.T)
        got = section_points(recs, p)[0][1]
        want = P1(start, p) if start.section == R0 else P2(start, p)
        worst_tau = max(worst_tau, _circ(got.tau - want.tau))
        worst_I = max(worst_I, abs(got.I - want.I) / want.I)
    return [_gate("normal forms: tau", worst_tau, tol, {"crossings": n}),
            _gate("normal forms: relative I", worst_I, tol, {"crossings": n})]


def skew_gates(rng, draws: int = 100, steps: int = 10**4, params: Optional[ModelParams] = None,
               tol_D: float = 1e-10, tol_tau: float = 1e-9, margin: int = 300) -> List[Gate]:
    """Circle invariance of D and direct P against the (F, eta) skew product.

    Starts sit ``margin`` floors above the validity threshold so that orbits
    which descend for a while stay in the domain of the normal forms.
    """
    draw = _source(params, resonant_params)
    worst_D = worst_tau = 0.0
    mismatches = 0
    for _ in range(draws):
        p = draw(rng)
        q = classical_q(p)
        D, tau = rng.random(), rng.random()
        floor = round((default_i_min(p) + 2 * q * margin) / (2 * q))
        I = 2 * q * (D + floor - tau)
        rep = verify_skew_equivalence(NormalPoint(tau, I), p, steps, q=q)
        worst_D = max(worst_D, rep.max_dD)
        worst_tau = max(worst_tau, rep.max_dtau)
        mismatches += rep.mismatches
    detail = {"draws": draws, "steps": steps}
    return [_gate("circle invariance: D drift", worst_D, tol_D, detail),
            _gate("skew product: tau deviation", worst_tau, tol_tau, detail),
            _gate("skew product: fiber mismatches", mismatches, 0.5, detail)]


def ulam_gates(tau_escape: float = 0.1, tau_bounded: float = 0.5, periods_escape: int = 1000,
               periods_bounded: int = 10**4, floor_escape: int = 50,
               floor_bounded: int = 15) -> List[Gate]:
    """Classifier verdicts on D = 1/2 against exact simulation at Ulam's parameters."""
    p = ModelParams(1 / math.sqrt(2), math.sqrt(2), 1.0)
    q = classical_q(p)
    gates = []
    esc = classify_rational(1, 2, tau_escape, q)
    gates.append(_gate("ulam: escaping verdict with delta_eta = +1",
                       float(esc.verdict == "escaping" and esc.delta_eta == 1), 1.0,
                       {"verdict": esc.verdict, "delta_eta": esc.delta_eta}, below=False))
    theory = esc.gain_per_step(q)
    I0 = 2 * q * (0.5 + floor_escape - tau_escape)
    r0 = [pt.I for pt in _r0_points(p, NormalPoint(tau_escape, I0), periods_escape)]
    mean_gain = (r0[-1] - I0) / len(r0)
    gates.append(_gate("ulam: mean gain per period / theory", mean_gain / theory, 0.9,
                       {"mean_gain": mean_gain, "theory": theory, "periods": len(r0)}, below=False))
    bdd = classify_rational(1, 2, tau_bounded, q)
    I0 = 2 * q * (0.5 + floor_bounded - tau_bounded)
    r0 = [pt.I for pt in _r0_points(p, NormalPoint(tau_bounded, I0), periods_bounded)]
    bound = 2 * (2 * p.B * p.k * p.calT)
    spread = max(abs(I - I0) for I in r0)
    gates.append(_gate("ulam: bounded orbit max |I - I0|", spread, bound,
                       {"verdict": bdd.verdict, "periods": len(r0)}))
    gates.append(_gate("ulam: bounded verdict", float(bdd.verdict == "bounded"), 1.0,
                       {"verdict": bdd.verdict}, below=False))
    return gates


def _r0_points(p: ModelParams, start: NormalPoint, periods: int) -> List[NormalPoint]:
    t, v = section_to_collision(start, p)
    recs = simulate(CollisionRecord(t, v), p, t_max=t + periods * p.period)
    return [pt for _, pt in section_points(recs, p) if pt.section == R0]


def cocycle_gates(rng, layouts: int = 200, draws: int = 20, N: int = 10**6,
                  q_values=(1, 2, 3), tol_mean: float = 1e-12, min_returns: int = 100,
                  tol_ratio: float = 1e-2) -> List[Gate]:
    """Zero mean of eta on every layout, and recurrence of its Birkhoff sums."""
    worst = 0.0
    specials = [Fraction(r, s) for s in range(1, 7) for r in range(s) if math.gcd(r, s) == 1]
    for q in range(1, 9):
        for D in specials + [rng.random() for _ in range(layouts // 8)]:
            worst = max(worst, abs(float(build_layout(D, q).mean_eta())))
    fewest, ratio = None, 0.0
    for i in range(draws):
        q = q_values[i % len(q_values)]
        rep = birkhoff_diagnostics(rng.random(), q, rng.random(), N)
        fewest = rep.returns_to_zero if fewest is None else min(fewest, rep.returns_to_zero)
        ratio = max(ratio, rep.final_ratio)
    return [_gate("cocycle: |mean eta|", worst, tol_mean),
            _gate("cocycle: fewest returns to zero", fewest, min_returns,
                  {"draws": draws, "N": N}, below=False),
            _gate("cocycle: max |S_N|/N", ratio, tol_ratio, {"draws": draws, "N": N})]


def unitarity_gates(rng, pq_max: int = 8, samples: int = 100, tol: float = 1e-12) -> List[Gate]:
    worst = 0.0
    for q in range(1, pq_max + 1):
        for p in range(1, pq_max + 1):
            if math.gcd(p, q) != 1:
                continue
            params = construct_quantum_resonant(1.0, 2.0, p, q)
            table = gamma_table(p, q)
            worst = max(worst, unitarity_defect(table.matrix()))
            for x in rng.uniform(0, 1, samples):
                fm = build_matrices(params, p, q, float(x), table=table)
                worst = max(worst, unitarity_defect(fm.S), unitarity_defect(fm.R))
    g12 = float(np.abs(gamma_table(1, 2).gamma - np.array([0, 1])).max())
    return [_gate("floquet: unitarity defect", worst, tol, {"pq_max": pq_max}),
            _gate("floquet: gamma(1,2) vs [0, 1]", g12, 1e-14)]


def band_gates(params: ModelParams, p: int, q: int, expected: List[float], tol: float,
               grid: int = 1024, residual_tol: float = 1e-10) -> List[Gate]:
    """Band or branch endpoint set of the tracked spectrum against ``expected``."""
    spec = quasienergy_spectrum(params, p, q, grid)
    ends = sorted({round(v, 12) for band in spec.bands for v in band})
    err = max(min(abs(e - x) for x in ends) for e in expected)
    err = max(err, max(min(abs(e - x) for x in expected) for e in ends))
    name = f"spectrum ({p},{q}): endpoint error"
    return [_gate(name, err, tol, {"bands": [list(b) for b in spec.bands]}),
            _gate(f"spectrum ({p},{q}): eigen-residual", spec.max_residual, residual_tol)]


def _phi1(x):
    return math.sqrt(2) * np.sin(np.pi * x)


def growth_gate(params: ModelParams, p: int, q: int, n_modes: int, periods: int,
                a_target: Optional[float] = None, tol: float = 0.05,
                rel_residual_tol: float = 1e-3) -> List[Gate]:
    """Fitted leading coefficient of E(N) against the analytic a (quad_coeff unless given)."""
    a_ref = quad_coeff(params, p, q, _phi1) if a_target is None else a_target
    series = evolve_and_fit(Wave.mode(1, n_modes), params, periods)
    a_fit = series.fit[0]
    rel = abs(a_fit - a_ref) / abs(a_ref)
    detail = {"a_fit": a_fit, "a_target": a_ref, "n_modes": n_modes, "periods": periods}
    return [_gate(f"growth ({p},{q}): relative error of fitted a", rel, tol, detail),
            _gate(f"growth ({p},{q}): fit residual / E(N_max)", series.rel_residual,
                  rel_residual_tol, detail)]


def cross_gate(params: ModelParams, p: int, q: int, n_modes: int = 4096,
               tol: float = 1e-5, oversample: int = OVERSAMPLE) -> Gate:
    """One jump-first period: direct propagation against the reduced action."""
    M = oversample * n_modes
    wave = Wave.mode(1, n_modes)
    direct = sine_synthesis(full_period(wave, params, "jump-first", oversample,
                                        snap_resonance(params)), M)
    reduced = reduced_period(sine_synthesis(wave, M), params, p, q, "jump-first")
    return _gate(f"cross ({p},{q}): max pointwise difference", np.abs(direct - reduced).max(),
                 tol, {"n_modes": n_modes})


def run_verify(params: ModelParams, seed: int = 0, scale: float = 1.0,
               tolerance: Optional[float] = None) -> List[Gate]:
    """Gates applicable to ``params`` at a reduced default scale.

    Classical gates always run; skew and cocycle gates need a classical
    resonance and the quantum gates a quantum one.  ``tolerance`` replaces every
    gate tolerance when given.
    """
    rng = np.random.default_rng(seed)

    def n(k):
        return max(1, int(round(k * scale)))

    gates = shear_gate(rng, n(50), params) + normal_form_gate(rng, n(50), params)
    res = detect_classical_resonance(params)
    if res is not None:
        gates += skew_gates(rng, n(10), n(2000), params)
        gates += cocycle_gates(rng, layouts=n(40), draws=n(3), N=n(10**5),
                               q_values=(res.q,), min_returns=n(10))
    qres = snap_resonance(params)
    if qres is not None and qres.q <= 16:
        p, q = qres.p, qres.q
        table = gamma_table(p, q)
        worst = max(max(unitarity_defect(fm.S), unitarity_defect(fm.R))
                    for fm in (build_matrices(params, p, q, float(x), table=table)
                               for x in rng.uniform(0, 1, n(50))))
        gates.append(_gate(f"floquet ({p},{q}): unitarity defect", worst, 1e-12))
        spec = quasienergy_spectrum(params, p, q, n(256))
        gates.append(_gate(f"spectrum ({p},{q}): eigen-residual", spec.max_residual, 1e-10))
        gates.append(cross_gate(params, p, q, n(1024)))
        gates += growth_gate(params, p, q, n(1024), n(100))
    if tolerance is not None:
        # counting gates (value >= threshold) keep their thresholds
        for g in gates:
            if g.below:
                g.retolerance(tolerance)
    return gates
