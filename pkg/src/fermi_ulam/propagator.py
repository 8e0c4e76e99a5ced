"""Direct propagation of the stopped-wall Schroedinger equation in a sine basis.

Coefficients c_n refer to the orthonormal basis sqrt(2) sin(n pi x) on (0, 1).
Free flight is diagonal in this basis and the x^2 kicks are applied on an
oversampled position grid through a type-I discrete sine transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.fft import dst

from .model import ModelParams, QuantumResonance, detect_quantum_resonance, wall_position, wall_velocity

TRUNCATION_LIMIT = 1e-6
OVERSAMPLE = 8
# tolerance for treating (pi/2) calT as exactly p/q when building free phases
RESONANCE_SNAP = 1e-12


class TruncationOverflow(RuntimeError):
    """A kick pushed more than the allowed mass beyond the retained modes."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class Wave:
    c: np.ndarray
    truncated: float = 0.0  # cumulative mass discarded by kicks

    @property
    def n_modes(self) -> int:
        return len(self.c)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.c))

    @classmethod
    def mode(cls, n: int, n_modes: int) -> "Wave":
        c = np.zeros(n_modes, dtype=complex)
        c[n - 1] = 1.0
        return cls(c)

    @classmethod
    def from_function(cls, f: Callable, n_modes: int, oversample: int = OVERSAMPLE) -> "Wave":
        M = oversample * n_modes
        return sine_analysis(f(grid(M)), n_modes)


@dataclass
class EnergySeries:
    E: np.ndarray
    fit: Tuple[float, float, float]
    residual_rms: float
    truncated: float
    norm_drift: float

    @property
    def rel_residual(self) -> float:
        return self.residual_rms / self.E[-1]


def grid(M: int) -> np.ndarray:
    """Interior nodes x_i = i/(M+1), i = 1..M."""
    return np.arange(1, M + 1) / (M + 1)


def sine_analysis(values: np.ndarray, n_modes: Optional[int] = None) -> Wave:
    """Coefficients of grid samples at x_i = i/(M+1), keeping the first n_modes."""
    values = np.asarray(values, dtype=complex)
    M = len(values)
    n_modes = M if n_modes is None else n_modes
    if n_modes > M:
        raise ValueError(f"need M >= n_modes, got M={M}, n_modes={n_modes}")
    return Wave(dst(values, type=1, norm="ortho")[:n_modes] / math.sqrt(M + 1))


def sine_synthesis(wave: Wave, M: int) -> np.ndarray:
    """Values of sum_n c_n sqrt(2) sin(n pi x) at x_i = i/(M+1)."""
    if M < wave.n_modes:
        raise ValueError(f"need M >= n_modes, got M={M}, n_modes={wave.n_modes}")
    pad = np.zeros(M, dtype=complex)
    pad[:wave.n_modes] = wave.c
    return math.sqrt(M + 1) * dst(pad, type=1, norm="ortho")


def free_phases(n_modes: int, duration: float,
                resonance: Optional[QuantumResonance] = None) -> np.ndarray:
    """exp(-i (n pi)^2 duration) for n = 1..n_modes.

    With a resonance the phases are exp(-2 pi i n^2 p/q), reduced in integers;
    at thousands of modes the float argument would otherwise lose ~1e-7.
    """
    n = np.arange(1, n_modes + 1, dtype=np.int64)
    if resonance is not None:
        r = (n * n * resonance.p) % resonance.q
        return np.exp(-2j * np.pi * r / resonance.q)
    return np.exp(-1j * (n * math.pi) ** 2 * duration)


def free_step(wave: Wave, duration: float,
              resonance: Optional[QuantumResonance] = None) -> Wave:
    return Wave(free_phases(wave.n_modes, duration, resonance) * wave.c, wave.truncated)


def kick(wave: Wave, J: float, sign: int, oversample: int = OVERSAMPLE,
         limit: float = TRUNCATION_LIMIT) -> Wave:
    """Multiply by exp(sign * i J x^2) on an oversampled grid and truncate."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if J == 0:
        return Wave(wave.c.copy(), wave.truncated)
    M = oversample * wave.n_modes
    x = grid(M)
    full = sine_analysis(np.exp(sign * 1j * J * x * x) * sine_synthesis(wave, M))
    lost = float(np.sum(np.abs(full.c[wave.n_modes:]) ** 2))
    if lost > limit:
        raise TruncationOverflow(f"kick discarded mass {lost:.3e} > {limit:g}")
    return Wave(full.c[:wave.n_modes], wave.truncated + lost)


def snap_resonance(params: ModelParams) -> Optional[QuantumResonance]:
    return detect_quantum_resonance(params, tol=RESONANCE_SNAP)


def full_period(wave: Wave, params: ModelParams, ordering: str = "as-written",
                oversample: int = OVERSAMPLE,
                resonance: Optional[QuantumResonance] = None) -> Wave:
    """One period 2 calT of the evolution.

    'as-written': free, kick(J1,-), free, kick(J2,+).
    'jump-first': kick(J1,-), free, kick(J2,+), free.
    """
    phases = free_phases(wave.n_modes, params.calT, resonance)

    def free(w):
        return Wave(phases * w.c, w.truncated)

    if ordering == "as-written":
        w = kick(free(wave), params.J1, -1, oversample)
        return kick(free(w), params.J2, +1, oversample)
    if ordering == "jump-first":
        w = free(kick(wave, params.J1, -1, oversample))
        return free(kick(w, params.J2, +1, oversample))
    raise ValueError(f"unknown ordering {ordering!r}")


def energy(wave: Wave, q: Optional[int] = None) -> float:
    """E = (1/2) sum (n pi)^2 |c_n|^2.

    The shifted-copy form with prefactor 1/(2q) gives the same number for every
    q, so ``q`` is accepted only for call-site symmetry.
    """
    n = np.arange(1, wave.n_modes + 1)
    return float(0.5 * np.sum((n * math.pi) ** 2 * np.abs(wave.c) ** 2))


def fit_quadratic(E: np.ndarray) -> Tuple[Tuple[float, float, float], float]:
    """Least-squares E ~ a N^2 + b N + c over the second half of the series."""
    N = np.arange(len(E))
    window = N >= (len(E) - 1) // 2
    coeffs = np.polyfit(N[window], E[window], 2)
    resid = E[window] - np.polyval(coeffs, N[window])
    return tuple(float(v) for v in coeffs), float(np.sqrt(np.mean(resid ** 2)))


def evolve_and_fit(wave: Wave, params: ModelParams, n_periods: int,
                   ordering: str = "as-written", oversample: int = OVERSAMPLE) -> EnergySeries:
    """Record E after each period and fit the late half quadratically."""
    if n_periods < 4:
        raise ValueError("need at least 4 periods for a quadratic fit")
    resonance = snap_resonance(params)
    norm0 = wave.norm
    E = [energy(wave)]
    for _ in range(n_periods):
        try:
            wave = full_period(wave, params, ordering, oversample, resonance)
        except TruncationOverflow as exc:
            raise TruncationOverflow(str(exc), partial=np.array(E)) from None
        E.append(energy(wave))
    E = np.array(E)
    fit, rms = fit_quadratic(E)
    return EnergySeries(E, fit, rms, wave.truncated, abs(wave.norm - norm0))


def stop_wall_inverse(f: Callable, t: float, params: ModelParams, x: np.ndarray) -> np.ndarray:
    """(W^-1 f)(x) = sqrt(l) exp(-(i/4) l l' x^2) f(l x), sampled at x in (0, 1).

    The factor i makes the map unitary from L2(0, l) to L2(0, 1).
    """
    l = wall_position(params, t)
    ldot = wall_velocity(params, t)
    x = np.asarray(x, float)
    return math.sqrt(l) * np.exp(-0.25j * l * ldot * x * x) * f(l * x)


def stop_wall(g: Callable, t: float, params: ModelParams, y: np.ndarray) -> np.ndarray:
    """Inverse of :func:`stop_wall_inverse`, sampled at y in (0, l(t))."""
    l = wall_position(params, t)
    ldot = wall_velocity(params, t)
    x = np.asarray(y, float) / l
    return np.exp(0.25j * l * ldot * x * x) * g(x) / math.sqrt(l)
