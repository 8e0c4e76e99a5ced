"""Exact event-driven motion between the fixed wall x=0 and the wall x=l(t).

Between events the particle moves on a straight line and the wall is linear
on each half period, so every event time is the root of a linear equation on
one wall segment. No root finder and no time stepping are involved.

Velocities in ``ParticleState`` are signed (positive = away from the fixed
wall). ``CollisionRecord.v`` follows the collision-map convention instead: it
is the speed toward the fixed wall immediately after a moving-wall collision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple

from .adiabatic import adiabatic_momentum
from .model import KINK_TOL, ModelParams, wall_position, wall_velocity

GRAZING_FACTOR = 1e-10


class SimulationError(RuntimeError):
    pass


class GrazingError(SimulationError):
    """Relative approach speed at contact is below the grazing threshold."""


class ReCollisionError(SimulationError):
    """The moving wall catches the particle before it reaches the fixed wall."""


class Event(Enum):
    FIXED = "fixed-wall"
    MOVING = "moving-wall"


@dataclass(frozen=True)
class ParticleState:
    x: float
    v: float
    t: float


class CollisionRecord(NamedTuple):
    t: float
    v: float
    singular: bool = False


def _segment(params: ModelParams, t: float) -> Tuple[float, float, float]:
    """(start, wall position at start, slope) of the wall segment containing t."""
    n = math.floor(t / params.T)
    a = n * params.T
    if n % 2 == 0:
        return a, params.B, -params.k
    return a, params.A, params.k


def _is_kink(params: ModelParams, t: float) -> bool:
    r = math.remainder(t, params.T)
    return abs(r) < KINK_TOL * params.T


def _next_event(params: ModelParams, x: float, v: float, t: float):
    """Earliest future contact: (event, time, wall slope at contact, singular)."""
    k = params.k
    eps_g = GRAZING_FACTOR * k
    t_fixed = t - x / v if v < 0 else math.inf

    a, la, slope = _segment(params, t)
    T = params.T
    while a < t_fixed:
        b = a + T
        s0 = t if t > a else a
        gap0 = la + slope * (s0 - a) - (x + v * (s0 - t))
        rate = slope - v
        if rate < 0:
            s = s0 - gap0 / rate
            if s < s0:
                s = s0
            if s <= b + KINK_TOL * T:
                if -rate < eps_g:
                    raise GrazingError(f"grazing contact at t={s!r} (approach speed {-rate!r})")
                if s < t_fixed:
                    return Event.MOVING, s, slope, _is_kink(params, s)
                break
        a = b
        if slope < 0:
            la, slope = params.A, k
        else:
            la, slope = params.B, -k
    if t_fixed == math.inf:
        raise SimulationError("no future event (impossible for k > 0)")
    if -v < eps_g:
        raise GrazingError(f"grazing contact with the fixed wall at t={t_fixed!r}")
    return Event.FIXED, t_fixed, 0.0, False


def next_event(state: ParticleState, params: ModelParams) -> Tuple[Event, float]:
    event, time, _, _ = _next_event(params, state.x, state.v, state.t)
    return event, time


def reflect(state: ParticleState, event: Event, params: ModelParams,
            wall_slope: Optional[float] = None) -> ParticleState:
    """Elastic reflection at the event reached by ``state``.

    For the moving wall the reflection is a velocity reversal in the wall
    frame, v -> 2 l'(t) - v. ``wall_slope`` overrides the slope lookup, which is
    needed at kinks; by default the left segment is used there.
    """
    if event is Event.FIXED:
        return ParticleState(0.0, -state.v, state.t)
    if wall_slope is None:
        wall_slope = wall_velocity(params, state.t, side="left")
    return ParticleState(wall_position(params, state.t), 2 * wall_slope - state.v, state.t)


def advance(state: ParticleState, params: ModelParams) -> Tuple[Event, ParticleState, bool]:
    """Move to the next event and reflect. Returns (event, new state, singular)."""
    event, time, slope, singular = _next_event(params, state.x, state.v, state.t)
    arrived = ParticleState(state.x + state.v * (time - state.t), state.v, time)
    return event, reflect(arrived, event, params, wall_slope=slope), singular


def simulate(initial: CollisionRecord, params: ModelParams,
             n_moving_collisions: Optional[int] = None,
             t_max: Optional[float] = None,
             I_ceiling: Optional[float] = None,
             I_floor: Optional[float] = None,
             max_events: int = 10**8) -> List[CollisionRecord]:
    """Moving-wall collisions starting from ``initial`` (which is included).

    At least one stop condition must be supplied. ``I_ceiling``/``I_floor``
    stop after the first record whose adiabatic momentum crosses them.
    """
    if n_moving_collisions is None and t_max is None and I_ceiling is None and I_floor is None:
        raise ValueError("no stop condition given")
    records = [initial]
    if n_moving_collisions is not None and n_moving_collisions <= 0:
        return records

    x = wall_position(params, initial.t)
    v = -initial.v
    t = initial.t
    n_moving = 0
    calT = params.calT
    for _ in range(max_events):
        event, s, slope, singular = _next_event(params, x, v, t)
        if event is Event.FIXED:
            x, v, t = 0.0, -v, s
            continue
        if t_max is not None and s > t_max:
            break
        t = s
        x = wall_position(params, t)
        v = 2 * slope - v
        records.append(CollisionRecord(t, -v, singular))
        n_moving += 1
        if n_moving_collisions is not None and n_moving >= n_moving_collisions:
            break
        if I_ceiling is not None or I_floor is not None:
            I = calT * x * (-v + slope)
            if I_ceiling is not None and I >= I_ceiling:
                break
            if I_floor is not None and I <= I_floor:
                break
    else:
        raise SimulationError(f"max_events={max_events} exhausted")
    return records


def collision_map_f(t0: float, v0: float, params: ModelParams) -> Tuple[float, float]:
    """High-energy collision map (t0, v0) -> (t1, v1).

    Solves v0 (t1 - t0) = l(t0) + l(t1), v1 = v0 - 2 l'(t1) segment by segment.
    Raises ReCollisionError if the wall reaches the particle before the fixed
    wall does.
    """
    l0 = wall_position(params, t0)
    if v0 <= 0:
        raise ReCollisionError(f"v0={v0!r} does not head toward the fixed wall")
    t_fixed = t0 + l0 / v0
    # gap l(t) - x(t) is piecewise linear and zero at t0: check the start slope and every kink
    if -v0 >= wall_velocity(params, t0, side="right"):
        raise ReCollisionError(f"wall outruns the particle at t0={t0!r}")
    a, _, _ = _segment(params, t0)
    kink = a + params.T
    while kink < t_fixed:
        if wall_position(params, kink) <= l0 - v0 * (kink - t0):
            raise ReCollisionError(f"wall reaches the particle before the fixed wall (t={kink!r})")
        kink += params.T

    a, la, slope = _segment(params, t_fixed)
    while True:
        s0 = max(t_fixed, a)
        gap0 = la + slope * (s0 - a) - v0 * (s0 - t_fixed)
        rate = slope - v0
        if rate < 0:
            s = s0 - gap0 / rate
            if s <= a + params.T + KINK_TOL * params.T:
                return s, v0 - 2 * slope
        a += params.T
        la, slope = (params.A, params.k) if slope < 0 else (params.B, -params.k)


def record_momentum(record: CollisionRecord, params: ModelParams) -> float:
    side = "left" if record.singular else "right"
    return adiabatic_momentum(record.t, record.v, params, side=side)
