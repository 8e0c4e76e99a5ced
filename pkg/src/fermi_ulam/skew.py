"""Invariant circles of P under classical q-resonance and their skew-product form.

Under (B - A)/A = q the lines tau + I/(2q) = D (mod 1) are invariant under
P = P2 o P1. Writing tau + I/(2q) = D + n, the map acts on (tau, n) as

    (tau, n) -> (F(tau), n + eta(tau))

with F an exchange of q+1 intervals of length 1/(q+1) and eta in {-1, 0, 1}.

Layouts accept ``D`` as a float or as a ``fractions.Fraction``; with a
Fraction every cut point and every orbit point is computed exactly.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .adiabatic import R0, NormalPoint, P, default_i_min, iterate_P
from .model import ModelParams, classical_q

CUT_TOL = 1e-13
TYPICAL_TOL = 1e-12
FLOOR_DRIFT = 0.25

Number = Union[float, Fraction]


class OnCutPoint(ValueError):
    pass


class DegenerateReduction(ValueError):
    pass


def _frac(x):
    r = x - math.floor(x)
    if not isinstance(r, Fraction) and r >= 1.0:
        return 0.0
    return r


def _circ_dist(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


@dataclass(frozen=True)
class CircleId:
    D: float
    q: int
    kind: str
    m: int


def _classify_D(D: Number, q: int) -> Tuple[int, bool]:
    """(m, typical) for D in [0, 1)."""
    qd = q * D
    if isinstance(D, Fraction):
        m = math.floor(qd)
        return m, qd != m
    nearest = round(qd)
    if abs(qd - nearest) < TYPICAL_TOL:
        return int(nearest) % q, False
    return math.floor(qd), True


def circle_of(point: NormalPoint, q: int) -> CircleId:
    if q < 1:
        raise ValueError("q must be >= 1")
    D = _frac(point.tau + point.I / (2 * q))
    m, typical = _classify_D(D, q)
    if not typical and m == 0 and D > 0.5:
        D = 0.0
    return CircleId(D, q, "typical" if typical else "atypical", m)


def verify_circle_invariance(point: NormalPoint, params: ModelParams, q: Optional[int] = None,
                             tol: float = 1e-10, i_min=None) -> bool:
    q = classical_q(params) if q is None else q
    before = circle_of(point, q).D
    after = circle_of(P(point, params, i_min), q).D
    return _circ_dist(before, after) < tol


@dataclass(frozen=True)
class Component:
    start: Number
    end: Number
    s: int
    label: str
    eta: int
    offset: Number

    @property
    def length(self):
        return self.end - self.start


@dataclass(frozen=True)
class CircleLayout:
    D: Number
    q: int
    m: int
    typical: bool
    base: Number
    components: Tuple[Component, ...]
    secondary_cut: Optional[Number] = None
    _starts: Tuple = field(default=(), repr=False, compare=False)

    @property
    def cuts(self) -> List[Number]:
        """All interior cut points, including the zero-length-component ones."""
        pts = sorted({c.start for c in self.components} | {c.end for c in self.components})
        return [p for p in pts if 0 < p < 1]

    def component(self, tau: Number) -> Component:
        tau = _frac(tau)
        exact = isinstance(tau, Fraction) and isinstance(self.D, Fraction)
        for c in (0, 1, *self.cuts):
            if (tau == c) if exact else _circ_dist(float(tau), float(c)) < CUT_TOL:
                raise OnCutPoint(f"tau={float(tau)!r} lies on the cut point {float(c)!r}")
        live = [c for c in self.components if c.length > 0]
        idx = bisect_right([c.start for c in live], tau) - 1
        return live[idx]

    def mean_eta(self) -> float:
        return float(sum(c.length * c.eta for c in self.components))

    def total_length(self) -> float:
        return float(sum(c.length for c in self.components))

    def eta_array(self, tau: np.ndarray) -> np.ndarray:
        live = [c for c in self.components if c.length > 0]
        starts = np.array([float(c.start) for c in live])
        etas = np.array([c.eta for c in live], dtype=np.int64)
        idx = np.searchsorted(starts, np.mod(tau, 1.0), side="right") - 1
        return etas[idx]

    def to_dict(self) -> dict:
        return {
            "D": float(self.D), "q": self.q, "m": self.m,
            "kind": "typical" if self.typical else "atypical",
            "cuts": [float(c) for c in self.cuts],
            "secondary_cut": None if self.secondary_cut is None else float(self.secondary_cut),
            "components": [
                {"label": c.label, "s": c.s, "start": float(c.start), "end": float(c.end),
                 "eta": c.eta, "F_offset": float(c.offset)}
                for c in self.components
            ],
        }


def build_layout(D: Number, q: int) -> CircleLayout:
    """Continuity components of P on the circle C_D, with F offsets and eta values."""
    if q < 1:
        raise ValueError("q must be >= 1")
    if not 0 <= D < 1:
        raise ValueError(f"D must lie in [0, 1), got {D!r}")
    exact = isinstance(D, Fraction)
    one = Fraction(1) if exact else 1.0
    m, typical = _classify_D(D, q)
    w = one / (q + 1)
    shift = q * (1 - 2 * D) * w

    def offset(s):
        return _frac(shift + 2 * (m + 1 - s) * w)

    comps = []
    if not typical:
        for s in range(1, q + 2):
            comps.append(Component((s - 1) * w, s * w, s, str(s), 0, offset(s)))
        return CircleLayout(D, q, m, False, 0 * one, tuple(comps))

    base = (q * D - m) * w
    twice = 2 * (q * D - m) - 1
    first_half = twice <= 0 if exact else twice <= TYPICAL_TOL
    secondary = None
    if first_half:
        comps.append(Component(0 * one, base, 0, "0", 1, offset(0)))
    else:
        secondary = (2 * q * D - 2 * m - 1) * w
        comps.append(Component(0 * one, secondary, 0, "0-", 0, offset(0)))
        comps.append(Component(secondary, base, 0, "0+", 1, offset(0)))
    for s in range(1, q + 1):
        comps.append(Component(base + (s - 1) * w, base + s * w, s, str(s), 0, offset(s)))
    last = base + q * w
    if first_half:
        secondary = min((2 * q * D - 2 * m + q) * w, one)
        comps.append(Component(last, secondary, q + 1, f"{q + 1}-", -1, offset(q + 1)))
        comps.append(Component(secondary, one, q + 1, f"{q + 1}+", 0, offset(q + 1)))
    else:
        comps.append(Component(last, one, q + 1, str(q + 1), -1, offset(q + 1)))
    return CircleLayout(D, q, m, True, base, tuple(comps), secondary)


def F_base(tau: Number, layout: CircleLayout) -> Number:
    return _frac(tau + layout.component(tau).offset)


def eta(tau: Number, layout: CircleLayout) -> int:
    return layout.component(tau).eta


@dataclass(frozen=True)
class SkewState:
    tau: Number
    n: int


def skew_step(state: SkewState, layout: CircleLayout) -> SkewState:
    comp = layout.component(state.tau)
    return SkewState(_frac(state.tau + comp.offset), state.n + comp.eta)


def floor_number(point: NormalPoint, D: float, q: int) -> int:
    """Floor n with tau + I/(2q) = D + n; drift beyond 0.25 is an error."""
    raw = point.tau + point.I / (2 * q) - D
    n = round(raw)
    if abs(raw - n) > FLOOR_DRIFT:
        raise AssertionError(f"floor number drifted: {raw!r} is not near an integer")
    return int(n)


@dataclass
class SkewReport:
    steps: int
    max_dtau: float
    mismatches: int
    max_dD: float
    min_I: float
    max_I: float


def verify_skew_equivalence(point: NormalPoint, params: ModelParams, steps: int,
                            q: Optional[int] = None, i_min=None) -> SkewReport:
    """Iterate P directly and the skew product in parallel from ``point``."""
    if point.section != R0:
        raise ValueError("skew comparison starts on R0")
    q = classical_q(params) if q is None else q
    # exact D of the starting binary values; float rounding at large I would bias every offset
    D = float(_frac(Fraction(point.tau) + Fraction(point.I) / (2 * q)))
    layout = build_layout(D, q)
    state = SkewState(point.tau, floor_number(point, D, q))
    max_dtau = max_dD = 0.0
    mismatches = 0
    lo = hi = point.I
    for cur, whole, rest in iterate_P(point, params, steps, i_min):
        state = skew_step(state, layout)
        max_dtau = max(max_dtau, _circ_dist(cur.tau, state.tau))
        # I/(2q) = whole/q + rest/(2q), kept apart to avoid cancellation
        raw = cur.tau + (whole % q) / q + rest / (2 * q) - D
        max_dD = max(max_dD, _circ_dist(raw, 0.0))
        n = round(raw + (whole // q))
        if abs(raw + (whole // q) - n) > FLOOR_DRIFT:
            raise AssertionError(f"floor number drifted: {raw!r} is not near an integer")
        if n != state.n:
            mismatches += 1
        lo, hi = min(lo, cur.I), max(hi, cur.I)
    return SkewReport(steps, max_dtau, mismatches, max_dD, lo, hi)


@dataclass
class ClassificationResult:
    verdict: str
    delta_eta: int
    Q: int
    orbit: List[float]
    n1: int
    n2: int

    @property
    def period(self) -> int:
        """Length of the base cycle actually reached (a divisor of Q or smaller)."""
        return self.n2 - self.n1

    def gain_per_step(self, q: int) -> float:
        """Mean change of I per application of P: each unit of eta moves I by 2q."""
        return 2 * q * self.delta_eta / self.period


def classify_rational(r: int, s: int, tau0, q: int) -> ClassificationResult:
    """Period momentum change of the orbit of tau0 on the rational circle D = r/s.

    The base orbit is computed in exact rational arithmetic; ``tau0`` may be a
    float (taken at its exact binary value), a Fraction or an "a/b" string.
    """
    if s < 1 or not 0 <= r < s or math.gcd(r, s) != 1:
        raise ValueError(f"need gcd(r, s) = 1 and 0 <= r < s, got r={r}, s={s}")
    layout = build_layout(Fraction(r, s), q)
    tau = _frac(Fraction(tau0))
    Q = math.lcm(s, q + 1)
    # base translations live on the lattice (1/(s(q+1)))Z, so a repeat is certain within s(q+1) steps
    bound = max(Q, s * (q + 1))
    seen = {}
    orbit = []
    etas = []
    for n in range(bound + 1):
        if tau in seen:
            n1, n2 = seen[tau], n
            break
        seen[tau] = n
        orbit.append(float(tau))
        try:
            comp = layout.component(tau)
        except OnCutPoint as exc:
            raise OnCutPoint(f"cut-point orbit: iterate {n} {exc}") from None
        etas.append(comp.eta)
        tau = _frac(tau + comp.offset)
    else:  # pragma: no cover - excluded by the lattice argument
        raise RuntimeError("no repeat found")
    delta = sum(etas[n1:n2])
    verdict = "escaping" if delta > 0 else "bounded" if delta == 0 else "descending"
    return ClassificationResult(verdict, delta, Q, orbit, n1, n2)


def parse_rational(text: Union[str, Fraction, Tuple[int, int]]) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, tuple):
        return Fraction(*text)
    if "/" not in str(text):
        raise ValueError(f"rational values must be given as 'r/s', got {text!r}")
    return Fraction(str(text).strip())


def level_orbit(D: float, q: int, tau0: float, N: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Orbit tau_0..tau_{N-1} of F, computed through its rotation-plus-level structure.

    With u = tau - base = (j + x)/(q+1), F acts as x -> x + b (mod 1) and
    j -> floor(x + b) - j (mod q+1), b = q(1 - 2D) + 2m. Returns (tau, x, j).
    """
    layout = build_layout(D, q)
    base = float(layout.base)
    m = layout.m
    b = q * (1 - 2 * D) + 2 * m
    b_int = math.floor(b)
    b_frac = b - b_int
    u0 = (tau0 - base) % 1.0
    j0 = math.floor((q + 1) * u0)
    x0 = (q + 1) * u0 - j0
    n = np.arange(N, dtype=np.float64)
    x = np.mod(x0 + np.mod(n * b_frac, 1.0), 1.0)
    c = (x + b_frac >= 1.0).astype(np.int64) + b_int
    sign = np.where(np.arange(N) % 2 == 0, 1, -1)
    y = np.empty(N, dtype=np.int64)
    y[0] = j0
    if N > 1:
        y[1:] = j0 + np.cumsum(-sign[:-1] * c[:-1])
    j = np.mod(sign * y, q + 1)
    tau = np.mod(base + (j + x) / (q + 1), 1.0)
    return tau, x, j


@dataclass
class BirkhoffReport:
    N: int
    discrepancy: float
    returns_to_zero: int
    final_sum: int
    final_ratio: float
    max_ratio: float
    max_abs_sum: int


def star_discrepancy(points: np.ndarray) -> float:
    u = np.sort(np.asarray(points, dtype=float))
    n = len(u)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def birkhoff_diagnostics(D: float, q: int, tau0: float, N: int) -> BirkhoffReport:
    if N < 1:
        raise ValueError("N must be >= 1")
    layout = build_layout(D, q)
    tau, _, _ = level_orbit(D, q, tau0, N)
    sums = np.cumsum(layout.eta_array(tau))
    j = np.arange(1, N + 1)
    return BirkhoffReport(
        N=N,
        discrepancy=star_discrepancy(tau),
        returns_to_zero=int(np.count_nonzero(sums == 0)),
        final_sum=int(sums[-1]),
        final_ratio=abs(float(sums[-1])) / N,
        max_ratio=float(np.max(np.abs(sums) / j)),
        max_abs_sum=int(np.max(np.abs(sums))),
    )


@dataclass(frozen=True)
class HReduction:
    kappa: float
    pieces: Tuple[Tuple[float, float, int], ...]

    def phi(self, x):
        x = np.mod(np.asarray(x, dtype=float), 1.0)
        out = np.zeros(x.shape, dtype=np.int64)
        for lo, hi, val in self.pieces:
            out[(x >= lo) & (x < hi)] = val
        return out


def reduce_to_h(D: float, q: int, tol: float = 1e-13) -> HReduction:
    """Rotation number and level cocycle of the two-step map h(x, k) = (x + 2 kappa, k + phi(x))."""
    kappa = _frac(-2 * q * D)
    if kappa < tol or abs(kappa - 0.5) < tol or kappa > 1 - tol:
        raise DegenerateReduction(f"kappa={kappa!r} is degenerate")
    if kappa < 0.5:
        pieces = ((0.0, 1 - 2 * kappa, 0), (1 - 2 * kappa, 1 - kappa, 1), (1 - kappa, 1.0, -1))
    else:
        pieces = ((0.0, 1 - kappa, 1), (1 - kappa, 2 - 2 * kappa, -1), (2 - 2 * kappa, 1.0, 0))
    return HReduction(float(kappa), pieces)


def verify_h_reduction(D: float, q: int, tau0: float, N: int) -> int:
    """Count steps where the two-step level change of F differs from phi (mod q+1)."""
    red = reduce_to_h(D, q)
    _, x, j = level_orbit(D, q, tau0, N + 2)
    step = np.mod(j[2:] - j[:-2], q + 1)
    expected = np.mod(red.phi(x[:-2]), q + 1)
    return int(np.count_nonzero(step != expected))
