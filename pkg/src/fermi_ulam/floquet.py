"""Resonant q x q Floquet matrices, quasi-energy spectra and the growth coefficient a.

Under a quantum (p, q)-resonance the free flight over one half period maps the
odd 2-periodic wave phi to sum_n gamma_n phi(x + 2n/q), so the one-period
evolution acts on the vector Phi(x) = (phi(x + 2m/q))_m through R(x) S(x).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
from scipy.linalg import schur
from scipy.optimize import linear_sum_assignment

from .model import ModelParams

FOLD_TOL = 1e-13
UNITARY_TOL = 1e-10
RESIDUAL_TOL = 1e-10
MIN_OVERLAP = 0.5
DEGENERATE_TOL = 1e-10
DEFAULT_H = 1.0 / 2048


class FoldBoundary(ValueError):
    """A shifted position folds onto the singular points +-1."""


class NotUnitary(ValueError):
    pass


class TrackingAmbiguity(RuntimeError):
    """Eigenvectors at adjacent grid points cannot be paired reliably."""


@dataclass(frozen=True)
class GammaTable:
    p: int
    q: int
    gamma: np.ndarray

    def matrix(self) -> np.ndarray:
        """Gamma_{mn} = gamma_{n-m} with indices mod q."""
        idx = np.arange(self.q)
        return self.gamma[(idx[None, :] - idx[:, None]) % self.q]


@dataclass
class FloquetMatrices:
    x: float
    S: np.ndarray
    R: np.ndarray

    @property
    def M(self) -> np.ndarray:
        return self.R @ self.S


@dataclass
class SpectrumSample:
    x0: float
    xi: np.ndarray
    rho: np.ndarray
    Qmat: np.ndarray
    residual: float


@dataclass
class Spectrum:
    """Tracked quasi-energy branches over a grid of x0.

    ``branches`` holds eigenphases unwrapped along each branch (so a branch may
    leave (-pi, pi]); ``samples`` keep the raw per-point decompositions with
    columns already permuted into branch order.  Band extents include the
    one-sided limits at x0 = 0 and x0 = 1 when ``endpoints`` were requested.
    """

    params: ModelParams
    p: int
    q: int
    grid: np.ndarray
    samples: List[SpectrumSample]
    branches: np.ndarray
    rho: np.ndarray
    endpoint_xi: Optional[np.ndarray] = None
    endpoint_rho: Optional[np.ndarray] = None
    bands: List[tuple] = field(default_factory=list)
    degenerate: List[bool] = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return max(s.residual for s in self.samples)


def _check_pq(p: int, q: int):
    if q < 1 or p < 1 or math.gcd(p, q) != 1:
        raise ValueError(f"need coprime positive p, q, got p={p}, q={q}")


def gamma_table(p: int, q: int) -> GammaTable:
    """gamma_n = (1/q) sum_m exp(-2 pi i m^2 p/q) cos(2 pi n m/q)."""
    _check_pq(p, q)
    m = np.arange(q)
    # reduce the exponents exactly before going to floating point
    phases = np.exp(-2j * np.pi * ((m * m * p) % q) / q)
    nm = np.outer(m, m) % q
    gamma = (np.cos(2 * np.pi * nm / q) @ phases) / q
    return GammaTable(p, q, gamma)


def fold(x: float, side: Optional[str] = None) -> float:
    """Reduce x mod 2 into (-1, 1).

    At +-1 the value is singular; ``side`` selects a one-sided limit, 'right'
    for x approached from above (giving -1) and 'left' from below (giving 1).
    """
    if not math.isfinite(x):
        raise ValueError(f"fold needs a finite argument, got {x!r}")
    y = (x + 1.0) % 2.0 - 1.0
    if abs(abs(y) - 1.0) < FOLD_TOL:
        if side == "right":
            return -1.0
        if side == "left":
            return 1.0
        raise FoldBoundary(f"x={x!r} folds onto the boundary +-1")
    return y


def _folded_squares(x: float, q: int, side: Optional[str]) -> np.ndarray:
    return np.array([fold(x + 2 * m / q, side) ** 2 for m in range(q)])


def build_matrices(params: ModelParams, p: int, q: int, x: float,
                   side: Optional[str] = None,
                   table: Optional[GammaTable] = None) -> FloquetMatrices:
    """S = diag(alpha) Gamma and R = diag(beta) Gamma at position x."""
    table = gamma_table(p, q) if table is None else table
    G = table.matrix()
    sq = _folded_squares(x, q, side)
    alpha = np.exp(-1j * params.J1 * sq)
    beta = np.exp(1j * params.J2 * sq)
    return FloquetMatrices(x, alpha[:, None] * G, beta[:, None] * G)


def unitarity_defect(U: np.ndarray) -> float:
    return float(np.abs(U @ U.conj().T - np.eye(U.shape[0])).max())


def eigenphases(M: np.ndarray):
    """Eigenphases xi in (-pi, pi] and orthonormal eigenvectors of a unitary M.

    A complex Schur form of a normal matrix is diagonal, and its unitary factor
    already spans degenerate eigenspaces orthonormally.
    Returns (xi, Q, residual).
    """
    M = np.asarray(M, dtype=complex)
    if unitarity_defect(M) > UNITARY_TOL:
        raise NotUnitary(f"matrix deviates from unitary by {unitarity_defect(M):.3e}")
    T, Q = schur(M, output="complex")
    lam = np.diag(T).copy()
    lam /= np.abs(lam)
    residual = float(np.abs(M @ Q - Q * lam[None, :]).max())
    if residual > RESIDUAL_TOL:
        raise NotUnitary(f"eigen-residual {residual:.3e} exceeds {RESIDUAL_TOL:g}")
    xi = np.angle(lam)
    xi[xi <= -math.pi] += 2 * math.pi
    return xi, Q, residual


def _wrap(d):
    return (np.asarray(d) + math.pi) % (2 * math.pi) - math.pi


def _match(Q_ref, xi_ref, Q_new, xi_new) -> np.ndarray:
    """Permutation perm with new column perm[j] continuing reference branch j."""
    overlap = np.abs(Q_ref.conj().T @ Q_new) ** 2
    rows, cols = linear_sum_assignment(-overlap)
    perm = np.empty(len(rows), dtype=int)
    perm[rows] = cols
    if overlap[rows, cols].min() >= MIN_OVERLAP:
        return perm
    # fall back to phase proximity, accepted only when unambiguous
    dist = np.abs(_wrap(xi_ref[:, None] - xi_new[None, :]))
    rows, cols = linear_sum_assignment(dist)
    srt = np.sort(dist, axis=1)
    if dist.shape[1] > 1 and np.any(dist[rows, cols] >= 0.5 * srt[:, 1]):
        raise TrackingAmbiguity(
            f"eigenvector overlap {overlap.max(axis=1).min():.3f} below {MIN_OVERLAP} "
            "and phases too close to pair")
    perm[rows] = cols
    return perm


def _decompose(params, p, q, x, table, side=None):
    xi, Q, res = eigenphases(build_matrices(params, p, q, x, side, table).M)
    return xi, Q, res


def midpoint_grid(n: int) -> np.ndarray:
    """n cell midpoints of (0, 1); they stay clear of the kinks at 0 and 1."""
    return (np.arange(n) + 0.5) / n


def quasienergy_spectrum(params: ModelParams, p: int, q: int,
                         grid=1024, endpoints: bool = True) -> Spectrum:
    """Eigenphase branches of M(x0) = R S tracked over an increasing grid.

    ``grid`` is either an array of x0 in (0, 1) or a point count for a
    midpoint grid.
    """
    grid = midpoint_grid(grid) if np.isscalar(grid) else np.sort(np.asarray(grid, float))
    if grid.size == 0 or grid[0] <= 0 or grid[-1] >= 1:
        raise ValueError("spectrum grid must lie inside (0, 1)")
    table = gamma_table(p, q)
    two_T = 2 * params.calT
    samples = []
    branches = np.empty((grid.size, q))
    prev = None
    for i, x0 in enumerate(grid):
        xi, Q, res = _decompose(params, p, q, float(x0), table)
        if prev is not None:
            perm = _match(prev[1], prev[0], Q, xi)
            xi, Q = xi[perm], Q[:, perm]
            branches[i] = branches[i - 1] + _wrap(xi - branches[i - 1])
        else:
            branches[i] = xi
        prev = (xi, Q)
        samples.append(SpectrumSample(float(x0), xi, -xi / two_T, Q, res))
    spec = Spectrum(params, p, q, grid, samples, branches, -branches / two_T)
    lo, hi = branches.min(axis=0), branches.max(axis=0)
    if endpoints:
        ends = []
        for x_end, side, ref in ((0.0, "right", 0), (1.0, "left", -1)):
            xi, Q, _ = _decompose(params, p, q, x_end, table, side)
            s = samples[ref]
            perm = _match(s.Qmat, s.xi, Q, xi)
            ends.append(branches[ref] + _wrap(xi[perm] - branches[ref]))
        spec.endpoint_xi = np.array(ends)
        spec.endpoint_rho = -spec.endpoint_xi / two_T
        lo = np.minimum(lo, spec.endpoint_xi.min(axis=0))
        hi = np.maximum(hi, spec.endpoint_xi.max(axis=0))
    # rho = -xi/(2 calT) reverses the order
    spec.bands = [(-hi[j] / two_T, -lo[j] / two_T) for j in range(q)]
    spec.degenerate = [bool(hi[j] - lo[j] < DEGENERATE_TOL) for j in range(q)]
    return spec


def _odd_extension(phi: Callable) -> Callable:
    """Odd 2-periodic extension of a function given on [0, 1]."""
    def ext(y):
        y = np.mod(np.asarray(y, float), 2.0)
        upper = y > 1.0
        out = np.asarray(phi(np.where(upper, 2.0 - y, y)), dtype=complex)
        return np.where(upper, -out, out)
    return ext


def eigenphase_derivatives(params: ModelParams, p: int, q: int, x: np.ndarray,
                           h: float = DEFAULT_H):
    """Central differences of the branches at each x, with eigenvectors at x.

    Returns (dxi, Q) with dxi of shape (len(x), q) and Q of shape (len(x), q, q).
    """
    table = gamma_table(p, q)
    dxi = np.empty((len(x), q))
    Qs = np.empty((len(x), q, q), dtype=complex)
    for i, xc in enumerate(x):
        xi0, Q0, _ = _decompose(params, p, q, float(xc), table)
        xs = []
        for xe in (xc + h, xc - h):
            # a stencil leg may touch a fold kink; the one-sided limit keeps it finite
            xi, Q, _ = _decompose(params, p, q, float(xe), table,
                                  "left" if xe > xc else "right")
            xs.append(xi[_match(Q0, xi0, Q, xi)])
        dxi[i] = _wrap(xs[0] - xs[1]) / (2 * h)
        Qs[i] = Q0
    return dxi, Qs


def quad_coeff(params: ModelParams, p: int, q: int, phi: Callable,
               h: float = DEFAULT_H, n_nodes: Optional[int] = None) -> float:
    """a = (1/2q) sum_j integral (xi_j')^2 |(Q^-1 Phi)_j|^2 dx over (0, 1).

    ``phi`` is the initial wave on [0, 1]; its odd 2-periodic extension
    supplies the shifted components.  The integral uses midpoint nodes.
    """
    n = int(round(1 / h)) if n_nodes is None else n_nodes
    x = midpoint_grid(n)
    ext = _odd_extension(phi)
    Phi = np.stack([ext(x + 2 * m / q) for m in range(q)], axis=1)
    dxi, Qs = eigenphase_derivatives(params, p, q, x, h)
    c = np.einsum("imj,im->ij", Qs.conj(), Phi)
    integrand = np.sum(dxi ** 2 * np.abs(c) ** 2, axis=1)
    return float(integrand.mean() / (2 * q))


def _check_shift(n_points: int, q: int):
    if (2 * n_points) % q:
        raise ValueError(f"grid with spacing 1/{n_points} cannot represent shifts by 2/{q}")


def _extend_samples(values: np.ndarray) -> np.ndarray:
    """Samples at i/L, i=1..L-1, to the odd extension at i/L, i=0..2L-1."""
    L = len(values) + 1
    ext = np.zeros(2 * L, dtype=complex)
    ext[1:L] = values
    ext[L + 1:] = -values[::-1]
    return ext


def _mix(values: np.ndarray, table: GammaTable) -> np.ndarray:
    L = len(values) + 1
    _check_shift(L, table.q)
    ext = _extend_samples(values)
    out = np.zeros(L - 1, dtype=complex)
    for n, g in enumerate(table.gamma):
        if abs(g) > 0:
            out += g * np.roll(ext, -2 * n * L // table.q)[1:L]
    return out


def apply_reduced_floquet(values: np.ndarray, params: ModelParams, p: int, q: int,
                          half: str = "first") -> np.ndarray:
    """Act with S ('first') or R ('second') on samples at x_i = i/L, i = 1..L-1.

    phi_T(x) = e^{-i J1 x^2} sum_n gamma_n phi(x + 2n/q) for the first half,
    with e^{+i J2 x^2} in the second.  2L must be divisible by q.
    """
    values = np.asarray(values, dtype=complex)
    x = np.arange(1, len(values) + 1) / (len(values) + 1)
    mixed = _mix(values, gamma_table(p, q))
    if half == "first":
        return np.exp(-1j * params.J1 * x ** 2) * mixed
    if half == "second":
        return np.exp(1j * params.J2 * x ** 2) * mixed
    raise ValueError(f"half must be 'first' or 'second', got {half!r}")


def reduced_period(values: np.ndarray, params: ModelParams, p: int, q: int,
                   ordering: str = "as-written") -> np.ndarray:
    """One full period of the reduced action.

    'as-written' is R S (mix, then kick, per half); 'jump-first' kicks before
    mixing in each half, matching the order in which the evolution is derived.
    """
    if ordering == "as-written":
        out = apply_reduced_floquet(values, params, p, q, "first")
        return apply_reduced_floquet(out, params, p, q, "second")
    if ordering == "jump-first":
        table = gamma_table(p, q)
        values = np.asarray(values, dtype=complex)
        x = np.arange(1, len(values) + 1) / (len(values) + 1)
        out = _mix(np.exp(-1j * params.J1 * x ** 2) * values, table)
        return _mix(np.exp(1j * params.J2 * x ** 2) * out, table)
    raise ValueError(f"unknown ordering {ordering!r}")


def spectrum_rows(spec: Spectrum) -> List[tuple]:
    """Rows (x0, branch, xi, rho) in grid order, branches unwrapped."""
    return [(float(x0), j, float(spec.branches[i, j]), float(spec.rho[i, j]))
            for i, x0 in enumerate(spec.grid) for j in range(spec.q)]
