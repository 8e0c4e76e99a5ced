"""Wall motion, derived constants and resonance bookkeeping.

The moving wall follows the sawtooth

    l(t) = B - k t          for t in [0, T)
    l(t) = A + k (t - T)    for t in [T, 2T)

with k = (B - A) / T, repeated with period 2T.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

# collisions within this fraction of T of a kink are treated as kink collisions
KINK_TOL = 1e-12


class ParameterError(ValueError):
    """Raised when wall parameters violate B > A > 0, T > 0."""


@dataclass(frozen=True)
class ModelParams:
    A: float
    B: float
    T: float

    def __post_init__(self):
        for name in ("A", "B", "T"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if not self.A > 0:
            raise ParameterError(f"A must be positive, got {self.A!r}")
        if not self.B > self.A:
            raise ParameterError(f"B must exceed A (B > A), got A={self.A!r}, B={self.B!r}")
        if not self.T > 0:
            raise ParameterError(f"T must be positive, got {self.T!r}")

    @property
    def k(self) -> float:
        return (self.B - self.A) / self.T

    @property
    def calT(self) -> float:
        """Reduced half period, the integral of 1/l^2 over [0, T] (= T/AB)."""
        return self.T / (self.A * self.B)

    @property
    def J1(self) -> float:
        return self.B * (self.A - self.B) / (2 * self.T)

    @property
    def J2(self) -> float:
        return self.A * (self.A - self.B) / (2 * self.T)

    @property
    def period(self) -> float:
        return 2 * self.T

    def to_dict(self) -> dict:
        return {"A": self.A, "B": self.B, "T": self.T}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        # derived quantities are always recomputed, never read back
        return cls(float(data["A"]), float(data["B"]), float(data["T"]))

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ClassicalResonance:
    q: int


@dataclass(frozen=True)
class QuantumResonance:
    p: int
    q: int

    def __post_init__(self):
        if self.p < 1 or self.q < 1 or math.gcd(self.p, self.q) != 1:
            raise ParameterError(f"(p, q) must be coprime positive integers, got ({self.p}, {self.q})")


def reduce_time(params: ModelParams, t: float) -> float:
    """Reduce ``t`` into [0, 2T)."""
    r = math.fmod(t, params.period)
    if r < 0:
        r += params.period
    if r >= params.period:
        r = 0.0
    return r


def wall_position(params: ModelParams, t: float) -> float:
    s = reduce_time(params, t)
    if s < params.T:
        return params.B - params.k * s
    return params.A + params.k * (s - params.T)


def wall_velocity(params: ModelParams, t: float, side: str = "right") -> float:
    """Slope of l at ``t``; at kinks the one-sided limit named by ``side``."""
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    s = reduce_time(params, t)
    tol = KINK_TOL * params.T
    at_zero = s < tol or params.period - s < tol
    at_T = abs(s - params.T) < tol
    if at_zero:
        return params.k if side == "left" else -params.k
    if at_T:
        return -params.k if side == "left" else params.k
    return -params.k if s < params.T else params.k


def detect_classical_resonance(params: ModelParams, max_q: int = 100,
                               tol: float = 1e-9) -> Optional[ClassicalResonance]:
    ratio = (params.B - params.A) / params.A
    q = round(ratio)
    if 1 <= q <= max_q and abs(ratio - q) < tol:
        return ClassicalResonance(int(q))
    return None


def detect_quantum_resonance(params: ModelParams, max_q: int = 64,
                             tol: float = 1e-9) -> Optional[QuantumResonance]:
    """Best rational p/q (q <= max_q) for (pi/2) T/(AB), if within ``tol``."""
    ratio = 0.5 * math.pi * params.calT
    frac = Fraction(ratio).limit_denominator(max_q)
    if frac.numerator < 1 or abs(ratio - float(frac)) >= tol:
        return None
    return QuantumResonance(frac.numerator, frac.denominator)


def construct_quantum_resonant(A: float, B: float, p: int, q: int) -> ModelParams:
    """Parameters with (pi/2) T/(AB) = p/q, i.e. T = 2ABp/(pi q)."""
    QuantumResonance(p, q)
    if not (A > 0 and B > A):
        raise ParameterError(f"need B > A > 0, got A={A!r}, B={B!r}")
    return ModelParams(A, B, 2 * A * B * p / (math.pi * q))


def classical_q(params: ModelParams, tol: float = 1e-9) -> int:
    """The classical resonance order, or ParameterError if not resonant."""
    res = detect_classical_resonance(params, max_q=10**6, tol=tol)
    if res is None:
        raise ParameterError(f"(B-A)/A = {(params.B - params.A) / params.A!r} is not an integer")
    return res.q
