import math

import numpy as np
import pytest
from scipy.integrate import quad

from fermi_ulam.adiabatic import (R0, RT, AdiabaticPoint, BelowThreshold, NormalPoint, P, P1, P2,
                                  SingularityAhead, adiabatic_step, default_i_min, from_adiabatic,
                                  iterate_P, normal_form_jacobians, section_points,
                                  section_to_collision, to_adiabatic)
from fermi_ulam.classical import CollisionRecord, simulate
from fermi_ulam.model import ModelParams, wall_position
from fermi_ulam.verify import normal_form_gate, shear_gate

LOW = 1.0  # the worked examples sit below the default validity threshold


def theta_by_quadrature(p, t):
    def f(s):
        return 1.0 / wall_position(p, s) ** 2
    val = quad(f, 0, min(t, p.T), epsabs=1e-14, epsrel=1e-13)[0]
    if t > p.T:
        val += quad(f, p.T, t, epsabs=1e-14, epsrel=1e-13)[0]
    return val / (2 * p.calT)


def test_to_adiabatic_worked_example(unit_params):
    pt = to_adiabatic(0.5, 10.0, unit_params)
    assert pt.theta == pytest.approx(theta_by_quadrature(unit_params, 0.5), abs=1e-13)
    assert pt.theta == pytest.approx(1 / 6, abs=1e-15)
    assert pt.I == pytest.approx(6.75, abs=1e-14)


@pytest.mark.parametrize("t", [0.1, 0.77, 1.0, 1.3, 1.95])
def test_theta_matches_quadrature(unit_params, t):
    assert to_adiabatic(t, 5.0, unit_params).theta == pytest.approx(
        theta_by_quadrature(unit_params, t), abs=1e-12)


def test_theta_at_kinks(unit_params):
    assert to_adiabatic(0.0, 3.0, unit_params).theta == 0.0
    assert to_adiabatic(0.0, 99.0, unit_params).theta == 0.0
    assert to_adiabatic(1.0, 3.0, unit_params).theta == pytest.approx(0.5, abs=1e-15)


def test_from_adiabatic(unit_params):
    t, v = from_adiabatic(AdiabaticPoint(1 / 6, 6.75), unit_params)
    assert (t, v) == pytest.approx((0.5, 10.0), abs=1e-12)
    assert from_adiabatic(AdiabaticPoint(0.0, 7.0), unit_params)[0] == 0.0
    assert from_adiabatic(AdiabaticPoint(0.5, 7.0), unit_params)[0] == pytest.approx(1.0, abs=1e-15)
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            from_adiabatic(AdiabaticPoint(bad, 7.0), unit_params)


def test_round_trip(rng):
    for _ in range(300):
        A = rng.uniform(0.5, 2)
        p = ModelParams(A, A * rng.uniform(1.2, 4), rng.uniform(0.5, 3))
        t0, v0 = rng.uniform(0, 2 * p.T), rng.uniform(5, 500)
        pt = to_adiabatic(t0, v0, p)
        t1, v1 = from_adiabatic(pt, p)
        assert t1 == pytest.approx(t0, abs=1e-11)
        assert v1 == pytest.approx(v0, rel=1e-11)


def test_adiabatic_step_agrees_with_simulator(unit_params):
    stepped = adiabatic_step(AdiabaticPoint(1 / 6, 6.75))
    assert stepped.theta == pytest.approx(1 / 6 + 1 / 6.75, abs=1e-15)
    assert stepped.theta == pytest.approx(0.3148148148, abs=1e-10)
    rec = simulate(CollisionRecord(0.5, 10.0), unit_params, n_moving_collisions=1)[1]
    sim = to_adiabatic(rec.t, rec.v, unit_params)
    assert (sim.theta, sim.I) == pytest.approx((stepped.theta, stepped.I), abs=1e-12)


def test_adiabatic_step_edges():
    assert adiabatic_step(AdiabaticPoint(0.0, 1e6)) == AdiabaticPoint(1e-6, 1e6)
    with pytest.raises(SingularityAhead):
        adiabatic_step(AdiabaticPoint(0.49, 10.0))
    with pytest.raises(SingularityAhead):
        adiabatic_step(AdiabaticPoint(0.95, 10.0))


@pytest.mark.parametrize("start,expected", [((0.3, 10.4), (0.1, 9.6)), ((0.7, 8.0), (0.7, 8.4))])
def test_P1_examples(unit_params, start, expected):
    out = P1(NormalPoint(*start, R0), unit_params, i_min=LOW)
    assert out.section == RT
    assert (out.tau, out.I) == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("start,expected", [((0.1, 9.6), (0.3, 10.4)), ((0.7, 8.4), (0.5, 8.4))])
def test_P2_examples(unit_params, start, expected):
    out = P2(NormalPoint(*start, RT), unit_params, i_min=LOW)
    assert out.section == R0
    assert (out.tau, out.I) == pytest.approx(expected, abs=1e-13)


@pytest.mark.parametrize("start,expected", [((0.3, 10.4), (0.3, 10.4)), ((0.7, 8.0), (0.5, 8.4))])
def test_P_composition(unit_params, start, expected):
    out = P(NormalPoint(*start), unit_params, i_min=LOW)
    assert (out.tau, out.I) == pytest.approx(expected, abs=1e-12)


def test_neutral_phase_keeps_momentum(unit_params):
    # tau - I/2 = 1/2 mod 1
    out = P1(NormalPoint(0.5, 40.0), unit_params)
    assert out.tau == 0.5 and out.I == 40.0
    out = P2(NormalPoint(0.5, 40.0, RT), unit_params)
    assert out.I == 40.0


def test_threshold(unit_params):
    assert default_i_min(unit_params) == pytest.approx(20.0)
    with pytest.raises(BelowThreshold):
        P1(NormalPoint(0.3, 10.4), unit_params)
    with pytest.raises(ValueError):
        P1(NormalPoint(0.3, 30.0, RT), unit_params)


def test_kink_image_flagged_singular(unit_params):
    out = P1(NormalPoint(0.5, 41.0), unit_params)
    assert out.tau == 0.0 and out.singular


def test_worked_example_against_simulator(unit_params):
    start = NormalPoint(0.3, 10.4)
    t, v = section_to_collision(start, unit_params)
    recs = simulate(CollisionRecord(t, v), unit_params, t_max=t + 2 * unit_params.T)
    _, got = section_points(recs, unit_params)[0]
    assert got.section == RT
    assert (got.tau, got.I) == pytest.approx((0.1, 9.6), abs=1e-10)


def test_jacobians_area_preserving_and_match_finite_differences(rng):
    p = ModelParams(0.8, 2.3, 1.7)
    dp1, dp2 = normal_form_jacobians(p)
    assert np.linalg.det(dp1) == pytest.approx(1.0, abs=1e-14)
    assert np.linalg.det(dp2) == pytest.approx(1.0, abs=1e-14)
    h = 1e-6
    for jac, fn, sec in ((dp1, P1, R0), (dp2, P2, RT)):
        for _ in range(20):
            tau, I = rng.uniform(0.2, 0.8), rng.uniform(200, 400)
            base = fn(NormalPoint(tau, I, sec), p)
            if min(base.tau, 1 - base.tau) < 1e-3:
                continue
            cols = []
            for d in ((h, 0), (0, h)):
                out = fn(NormalPoint(tau + d[0], I + d[1], sec), p)
                cols.append([(out.tau - base.tau) / h, (out.I - base.I) / h])
            assert np.array(cols).T == pytest.approx(jac, abs=1e-6)


def test_iterate_P_matches_repeated_P(rng):
    # generic start: decimal data on a resonance can sit exactly on a cut of P
    p = ModelParams(1.0, 2.71828, 0.8)
    start = NormalPoint(0.3712345, 400.314159)
    pt = start
    for cur, whole, rest in iterate_P(start, p, 50):
        pt = P(pt, p)
        assert cur.tau == pytest.approx(pt.tau, abs=1e-11)
        assert cur.I == pytest.approx(pt.I, rel=1e-13)
        assert 2 * whole + rest == pytest.approx(cur.I, rel=1e-15)


def test_shear_lemma_on_random_starts(rng):
    for gate in shear_gate(rng, n=100, tol=1e-10):
        assert gate.passed, gate.line()


def test_normal_forms_against_simulator(rng):
    for gate in normal_form_gate(rng, n=100):
        assert gate.passed, gate.line()
