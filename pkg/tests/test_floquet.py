import cmath
import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import unitary_group

from fermi_ulam.floquet import (FoldBoundary, NotUnitary, TrackingAmbiguity, _match, apply_reduced_floquet,
                                build_matrices, eigenphase_derivatives, eigenphases, fold,
                                gamma_table, quad_coeff, quasienergy_spectrum, reduced_period,
                                spectrum_rows, unitarity_defect)
from fermi_ulam.model import ModelParams, construct_quantum_resonant

P11 = ModelParams(1.0, 2.0, 4 / math.pi)
P12 = ModelParams(1.0, 3.0, 3 / math.pi)
PI = math.pi


def phi1(x):
    return math.sqrt(2) * np.sin(np.pi * x)


def gamma_brute(p, q):
    return [sum(cmath.exp(-2j * PI * m * m * p / q) * math.cos(2 * PI * n * m / q) for m in range(q)) / q
            for n in range(q)]


def test_gamma_examples():
    assert gamma_table(1, 1).gamma == pytest.approx([1.0], abs=1e-15)
    assert np.abs(gamma_table(1, 2).gamma - [0, 1]).max() < 1e-14
    s3 = math.sqrt(3)
    assert gamma_table(1, 3).gamma == pytest.approx([-1j / s3, 0.5 + 0.5j / s3, 0.5 + 0.5j / s3], abs=1e-14)


@pytest.mark.parametrize("p,q", [(1, 3), (2, 5), (3, 7), (5, 8), (7, 12), (1, 16)])
def test_gamma_brute_force_symmetry_unitarity(p, q):
    g = gamma_table(p, q)
    assert g.gamma == pytest.approx(gamma_brute(p, q), abs=1e-12)
    for n in range(1, q):
        assert abs(g.gamma[q - n] - g.gamma[n]) < 1e-13
    assert unitarity_defect(g.matrix()) < 1e-12


def test_gamma_rejects_non_coprime():
    with pytest.raises(ValueError):
        gamma_table(2, 4)


@pytest.mark.parametrize("x,expected", [(1.3, -0.7), (0.5, 0.5), (-2.4, -0.4), (3.9, -0.1)])
def test_fold(x, expected):
    assert fold(x) == pytest.approx(expected, abs=1e-14)


def test_fold_boundary():
    for x in (1.0, -1.0, 3.0):
        with pytest.raises(FoldBoundary):
            fold(x)
    assert fold(1.0, "left") == 1.0
    assert fold(1.0, "right") == -1.0


def test_matrices_scalar_case():
    fm = build_matrices(P11, 1, 1, 0.5)
    assert fm.S[0, 0] == pytest.approx(cmath.exp(1j * PI / 16), abs=1e-15)
    assert fm.R[0, 0] == pytest.approx(cmath.exp(-1j * PI / 32), abs=1e-15)


@pytest.mark.parametrize("x", [0.1, 0.37, 0.5, 0.93])
def test_matrices_q2_diagonal_monodromy(x):
    J1, J2 = P12.J1, P12.J2
    expected = np.diag([cmath.exp(1j * (J2 * x * x - J1 * (x - 1) ** 2)),
                        cmath.exp(1j * (J2 * (x - 1) ** 2 - J1 * x * x))])
    assert np.abs(build_matrices(P12, 1, 2, x).M - expected).max() < 1e-14


def test_matrix_unitarity(rng):
    for q in range(1, 9):
        for p in range(1, 9):
            if math.gcd(p, q) != 1:
                continue
            params = construct_quantum_resonant(0.7, 1.9, p, q)
            for x in rng.uniform(0, 1, 10):
                fm = build_matrices(params, p, q, float(x))
                assert unitarity_defect(fm.S) < 1e-12
                assert unitarity_defect(fm.R) < 1e-12
                assert unitarity_defect(fm.M) < 1e-12


def test_eigenphases_scalar_and_q2():
    xi, Q, res = eigenphases(np.array([[cmath.exp(1j * PI / 32)]]))
    assert xi == pytest.approx([PI / 32], abs=1e-15)
    xi, Q, res = eigenphases(build_matrices(P12, 1, 2, 0.5).M)
    assert xi == pytest.approx([PI / 6, PI / 6], abs=1e-13)


def test_eigenphases_random_unitary():
    for seed in range(20):
        U = unitary_group.rvs(int(2 + seed % 7), random_state=seed)
        xi, Q, res = eigenphases(U)
        assert res < 1e-10
        assert np.abs(U @ Q - Q @ np.diag(np.exp(1j * xi))).max() < 1e-10
        assert unitarity_defect(Q) < 1e-12
        assert np.all(xi > -PI) and np.all(xi <= PI)


def test_eigenphases_degenerate():
    V = unitary_group.rvs(4, random_state=1)
    U = V @ np.diag(np.exp(1j * np.array([0.3, 0.3, 0.3, -1.0]))) @ V.conj().T
    xi, Q, res = eigenphases(U)
    assert sorted(xi) == pytest.approx([-1.0, 0.3, 0.3, 0.3], abs=1e-12)
    assert unitarity_defect(Q) < 1e-12


def test_eigenphases_rejects_non_unitary():
    with pytest.raises(NotUnitary):
        eigenphases(np.array([[1.0, 0.1], [0.0, 1.0]]))


def test_tracking_ambiguity():
    F = np.fft.fft(np.eye(3)) / math.sqrt(3)
    xi = np.zeros(3)
    with pytest.raises(TrackingAmbiguity):
        _match(np.eye(3, dtype=complex), xi, F, xi)
    # well separated phases rescue a poor overlap
    perm = _match(np.eye(3, dtype=complex), np.array([0.0, 1.0, 2.0]), F, np.array([2.0, 0.0, 1.0]))
    assert list(perm) == [1, 2, 0]


def test_spectrum_11_band():
    spec = quasienergy_spectrum(P11, 1, 1, 1024)
    lo, hi = spec.bands[0]
    assert lo == pytest.approx(-PI ** 2 / 32, abs=1e-8)
    assert hi == pytest.approx(0.0, abs=1e-8)
    # per-point closed form
    assert spec.rho[:, 0] == pytest.approx(-PI ** 2 * spec.grid ** 2 / 32, abs=1e-12)
    assert not spec.degenerate[0]


def test_spectrum_12_branch_endpoints():
    spec = quasienergy_spectrum(P12, 1, 2, 512)
    ends = sorted(spec.endpoint_rho[:, 0])
    assert ends == pytest.approx([-PI ** 2 / 2, PI ** 2 / 6], abs=1e-6)
    # the tracked branch is continuous
    assert np.abs(np.diff(spec.branches, axis=0)).max() < 0.05


@pytest.mark.parametrize("p,q", [(1, 1), (1, 2), (1, 3), (2, 5), (3, 4)])
def test_spectrum_identities(p, q):
    params = construct_quantum_resonant(1.0, 2.2, p, q)
    spec = quasienergy_spectrum(params, p, q, 200)
    for s in spec.samples:
        lam = np.exp(1j * s.xi)
        assert np.abs(np.exp(-2j * params.calT * s.rho) - lam).max() < 1e-10
        M = build_matrices(params, p, q, s.x0).M
        assert np.abs(M @ s.Qmat - s.Qmat @ np.diag(lam)).max() < 1e-10


def test_spectrum_rows():
    spec = quasienergy_spectrum(P12, 1, 2, 4)
    rows = spectrum_rows(spec)
    assert len(rows) == 8
    assert rows[0][:2] == (0.125, 0)


def test_derivative_step_halving():
    x = np.array([0.2, 0.45, 0.8])
    d1, _ = eigenphase_derivatives(P11, 1, 1, x, 1 / 2048)
    d2, _ = eigenphase_derivatives(P11, 1, 1, x, 1 / 4096)
    assert np.abs(d1 - d2).max() / np.abs(d2).max() < 1e-4
    assert d2[:, 0] == pytest.approx(2 * (P11.J2 - P11.J1) * x, rel=1e-8)


def test_quad_coeff_11():
    analytic = 2 * (PI / 8) ** 2 * (1 / 3 - 1 / (2 * PI ** 2))
    assert analytic == pytest.approx(0.087185, abs=2e-6)
    assert quad_coeff(P11, 1, 1, phi1) == pytest.approx(analytic, rel=1e-6)


def test_quad_coeff_12_against_quadrature():
    # the xi'^2-weighted mass of both components folded back onto (0, 1)
    J1, J2 = P12.J1, P12.J2
    ref = 2 * quad(lambda x: (J2 * x + J1 * (1 - x)) ** 2 * 2 * math.sin(PI * x) ** 2, 0, 1)[0]
    assert ref == pytest.approx(9.0596, abs=1e-4)
    assert quad_coeff(P12, 1, 2, phi1) == pytest.approx(ref, rel=1e-6)


def test_quad_coeff_degenerate_branches():
    flat = SimpleNamespace(J1=0.0, J2=0.0, calT=0.5)
    assert quad_coeff(flat, 1, 3, phi1, n_nodes=128) == pytest.approx(0.0, abs=1e-14)


def test_quad_coeff_non_negative(rng):
    for _ in range(6):
        q = int(rng.integers(1, 6))
        p = int(rng.integers(1, 6))
        if math.gcd(p, q) != 1:
            continue
        params = construct_quantum_resonant(rng.uniform(0.5, 1.5), rng.uniform(1.6, 3), p, q)
        modes = rng.integers(1, 5, 3)
        weights = rng.normal(size=3) + 1j * rng.normal(size=3)
        wave = lambda x: sum(w * np.sin(m * np.pi * x) for w, m in zip(weights, modes))
        assert quad_coeff(params, p, q, wave, n_nodes=256) >= -1e-12


def test_reduced_floquet_q1_is_a_kick():
    L = 1000
    x = np.arange(1, L) / L
    vals = phi1(x).astype(complex)
    out = apply_reduced_floquet(vals, P11, 1, 1, "first")
    assert out == pytest.approx(np.exp(-1j * P11.J1 * x ** 2) * vals, abs=1e-15)


def test_reduced_floquet_q2_swap_and_phase():
    L = 1000
    x = np.arange(1, L) / L
    vals = (x * (1 - x) ** 2).astype(complex)
    out = apply_reduced_floquet(vals, P12, 1, 2, "first")
    # odd 2-periodic extension: phi(x + 1) = -phi(1 - x)
    shifted = -((1 - x) * x ** 2)
    assert out == pytest.approx(np.exp(-1j * P12.J1 * x ** 2) * shifted, abs=1e-15)


def test_reduced_floquet_matches_matrices():
    """Grid action against S(x) applied to the component vector Phi(x)."""
    p, q = 1, 3
    params = construct_quantum_resonant(1.0, 2.0, p, q)
    L = 300
    x = np.arange(1, L) / L
    f = lambda y: np.sin(np.pi * y) + 0.3j * np.sin(3 * np.pi * y)
    out = apply_reduced_floquet(f(x), params, p, q, "first")
    for i in (17, 101, 250):
        Phi = f(x[i] + 2 * np.arange(q) / q)  # sines are already odd and 2-periodic
        assert out[i] == pytest.approx((build_matrices(params, p, q, x[i]).S @ Phi)[0], abs=1e-13)


def test_reduced_period_orderings():
    L = 1000
    x = np.arange(1, L) / L
    vals = phi1(x).astype(complex)
    aw = reduced_period(vals, P11, 1, 1, "as-written")
    jf = reduced_period(vals, P11, 1, 1, "jump-first")
    assert aw == pytest.approx(jf, abs=1e-14)
    assert aw == pytest.approx(np.exp(1j * (P11.J2 - P11.J1) * x ** 2) * vals, abs=1e-14)
    with pytest.raises(ValueError):
        reduced_period(vals, P11, 1, 1, "sideways")
    with pytest.raises(ValueError):
        apply_reduced_floquet(vals[:-1], construct_quantum_resonant(1, 2, 1, 4), 1, 4)
