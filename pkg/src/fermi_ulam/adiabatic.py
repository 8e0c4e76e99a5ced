"""Adiabatic coordinates (theta, I) and the normal forms P1, P2 on the kink sections.

    I     = calT * (l(t) v + l(t) l'(t))
    theta = (1 / 2 calT) * integral_0^t ds / l(s)^2

theta runs over [0, 1) in one wall period and equals 1/2 at t = T. Away from
the kinks the collision map is the shear (theta, I) -> (theta + 1/I, I); this
is exact for a piecewise linear wall.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np

from .model import KINK_TOL, ModelParams, reduce_time

R0 = "R0"
RT = "RT"


class SingularityAhead(ValueError):
    """The free shear step would cross theta = 1/2 or theta = 1."""


class BelowThreshold(ValueError):
    """Momentum below the validity threshold of the normal forms."""


@dataclass(frozen=True)
class AdiabaticPoint:
    theta: float
    I: float


@dataclass(frozen=True)
class NormalPoint:
    tau: float
    I: float
    section: str = R0
    singular: bool = False


def _kink_side(params: ModelParams, s: float) -> str:
    """'zero', 'T' or '' depending on which kink the reduced time sits on."""
    tol = KINK_TOL * params.T
    if s < tol or params.period - s < tol:
        return "zero"
    if abs(s - params.T) < tol:
        return "T"
    return ""


def adiabatic_momentum(t: float, v: float, params: ModelParams, side: str = "right") -> float:
    return to_adiabatic(t, v, params, side=side).I


def to_adiabatic(t: float, v: float, params: ModelParams, side: str = "right") -> AdiabaticPoint:
    """Adiabatic coordinates of a moving-wall collision at time t with speed v.

    ``v`` is the speed toward the fixed wall just after the collision. At a
    kink, ``side`` picks the wall segment the collision belongs to.
    """
    A, B, k, calT = params.A, params.B, params.k, params.calT
    s = reduce_time(params, t)
    kink = _kink_side(params, s)
    if kink == "zero":
        # l = B at both ends of the period
        slope = k if side == "left" else -k
        return AdiabaticPoint(0.0, calT * B * (v + slope))
    if kink == "T":
        slope = -k if side == "left" else k
        return AdiabaticPoint(0.5, calT * A * (v + slope))
    if s < params.T:
        l = B - k * s
        theta = s / (2 * calT * B * l)
        slope = -k
    else:
        u = s - params.T
        l = A + k * u
        theta = 0.5 + u / (2 * calT * A * l)
        slope = k
    return AdiabaticPoint(theta, calT * l * (v + slope))


def from_adiabatic(point: AdiabaticPoint, params: ModelParams) -> Tuple[float, float]:
    """Inverse of ``to_adiabatic`` for theta in [0, 1); returns (t, v), t in [0, 2T)."""
    theta, I = point.theta, point.I
    if not 0.0 <= theta < 1.0:
        raise ValueError(f"theta must lie in [0, 1), got {theta!r}")
    A, B, k, calT, T = params.A, params.B, params.k, params.calT, params.T
    if theta < 0.5:
        g = 2 * calT * theta
        t = g * B * B / (1 + g * B * k)
        l = B - k * t
        v = I / (calT * l) + k
    else:
        g = 2 * calT * (theta - 0.5)
        u = g * A * A / (1 - g * A * k)
        t = T + u
        l = A + k * u
        v = I / (calT * l) - k
    return t, v


def adiabatic_step(point: AdiabaticPoint) -> AdiabaticPoint:
    """One collision away from the kink strips: theta -> theta + 1/I."""
    new = point.theta + 1.0 / point.I
    for edge in (0.5, 1.0):
        if point.theta < edge <= new:
            raise SingularityAhead(f"step from theta={point.theta!r} crosses {edge}")
    return AdiabaticPoint(new, point.I)


def default_i_min(params: ModelParams) -> float:
    c = 2 * params.k * params.calT
    return 10.0 * max(params.A * c, params.B * c)


def _frac(x: float) -> float:
    r = x - math.floor(x)
    return 0.0 if r >= 1.0 else r


def _normal_form(point: NormalPoint, gain: float, source: str, target: str,
                 params: ModelParams, i_min) -> NormalPoint:
    if point.section != source:
        raise ValueError(f"expected a point on {source}, got {point.section}")
    threshold = default_i_min(params) if i_min is None else i_min
    if point.I < threshold:
        raise BelowThreshold(f"I={point.I!r} below validity threshold {threshold!r}")
    tau = _frac(point.tau - _frac(0.5 * point.I))
    return NormalPoint(tau, point.I + gain * (2 * tau - 1), target, singular=(tau == 0.0))


def P1(point: NormalPoint, params: ModelParams, i_min=None) -> NormalPoint:
    """R0 -> RT: tau' = tau - I/2 mod 1, I' = I + 2 A k calT (2 tau' - 1)."""
    gain = 2 * params.A * params.k * params.calT
    return _normal_form(point, gain, R0, RT, params, i_min)


def P2(point: NormalPoint, params: ModelParams, i_min=None) -> NormalPoint:
    """RT -> R0: tau' = tau - I/2 mod 1, I' = I - 2 B k calT (2 tau' - 1)."""
    gain = -2 * params.B * params.k * params.calT
    return _normal_form(point, gain, RT, R0, params, i_min)


def P(point: NormalPoint, params: ModelParams, i_min=None) -> NormalPoint:
    return P2(P1(point, params, i_min), params, i_min)


def normal_form_jacobians(params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """Constant Jacobians of P1 and P2 in (tau, I) coordinates."""
    a = params.A * params.k * params.calT
    b = params.B * params.k * params.calT
    dp1 = np.array([[1.0, -0.5], [4 * a, 1 - 2 * a]])
    dp2 = np.array([[1.0, -0.5], [-4 * b, 1 + 2 * b]])
    return dp1, dp2


def section_to_collision(point: NormalPoint, params: ModelParams) -> Tuple[float, float]:
    """The (t, v) collision represented by a section point (first collision after a kink)."""
    offset = 0.0 if point.section == R0 else 0.5
    return from_adiabatic(AdiabaticPoint(offset + point.tau / point.I, point.I), params)


def section_points(records: Iterable, params: ModelParams) -> List[Tuple[int, NormalPoint]]:
    """Section crossings of a collision sequence.

    Returns (record index, NormalPoint) for every record that is the first
    moving-wall collision after a kink. ``records`` are (t, v, singular) tuples.
    """
    out = []
    prev_half = None
    for idx, rec in enumerate(records):
        t, v = rec[0], rec[1]
        singular = rec[2] if len(rec) > 2 else False
        half = math.floor(t / params.T)
        if singular and abs(math.remainder(t, params.T)) < KINK_TOL * params.T:
            # kink collisions belong to the segment on their left
            half = round(t / params.T) - 1
        if prev_half is not None and half != prev_half:
            point = to_adiabatic(t, v, params, side="left" if singular else "right")
            if half % 2 == 0:
                section, base = R0, 0.0
            else:
                section, base = RT, 0.5
            theta = point.theta
            if half % 2 == 0 and theta > 0.5:
                theta -= 1.0
            tau = point.I * (theta - base)
            out.append((idx, NormalPoint(_frac(tau), point.I, section, singular=singular)))
        prev_half = half
    return out


def iterate_P(point: NormalPoint, params: ModelParams, steps: int, i_min=None):
    """Yield the first ``steps`` images of ``point`` under P.

    The momentum is carried as 2*whole + rest with integer ``whole``: tau only
    depends on I/2 mod 1 and the increments are O(1), so this keeps the
    rounding error at the level of ulp(2) however large I grows.
    """
    if point.section != R0:
        raise ValueError("P acts on R0 points")
    threshold = default_i_min(params) if i_min is None else i_min
    # extended precision for tau and rest: D-level rounding is otherwise integrated along the orbit
    ld = np.longdouble
    A, B = ld(params.A), ld(params.B)
    # 2Ak calT = 2(B-A)/B and 2Bk calT = 2(B-A)/A, with fewer roundings
    gains = (2 * (B - A) / B, -2 * (B - A) / A)
    half, one, two = ld(0.5), ld(1), ld(2)
    whole = math.floor(point.I / 2)
    rest = ld(point.I) - 2 * whole
    tau = ld(point.tau)
    for _ in range(steps):
        for gain in gains:
            if 2 * whole + float(rest) < threshold:
                raise BelowThreshold(f"I={2 * whole + float(rest)!r} below validity threshold {threshold!r}")
            tau = tau - half * rest
            tau -= np.floor(tau)
            rest += gain * (two * tau - one)
            w = int(np.floor(rest / two))
            whole += w
            rest -= 2 * w
        tau_f = float(tau) % 1.0
        yield NormalPoint(tau_f, 2 * whole + float(rest), R0, singular=(tau_f == 0.0)), whole, float(rest)
