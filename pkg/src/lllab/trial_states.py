"""Laughlin and giant-vortex trial states in the occupation basis.

The bosonic Laughlin polynomial prod_{i<j} (z_i - z_j)^2 is the square of
the Vandermonde determinant, so the coefficient of z^lam is the signed count

    sum over permutations s, t of 0..N-1 with s + t = lam of sgn(s) sgn(t),

an exact integer.  A monomial symmetric function m_lam has Bargmann norm^2
(N! / prod_l n_l!) prod_i (pi lam_i!), which converts integer coefficients to
normalized occupation amplitudes.  Multiplying by prod_j z_j^m shifts every
part of lam by m.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .basis import FockVector, Occupation, enumerate_sector, partitions
from .operators import HamiltonianParams, ResourceError

N_MAX = 8


@lru_cache(maxsize=None)
def _permutations(N: int) -> tuple[np.ndarray, np.ndarray]:
    perms = np.array(list(itertools.permutations(range(N))), dtype=np.int64)
    inv = np.zeros(len(perms), dtype=np.int64)
    for i in range(N):
        for j in range(i + 1, N):
            inv += perms[:, i] > perms[:, j]
    return perms, 1 - 2 * (inv % 2)


def _permutation_signs(rows: np.ndarray) -> np.ndarray:
    inv = np.zeros(len(rows), dtype=np.int64)
    n = rows.shape[1]
    for i in range(n):
        for j in range(i + 1, n):
            inv += rows[:, i] > rows[:, j]
    return 1 - 2 * (inv % 2)


def vandermonde_squared_coefficient(lam: tuple[int, ...]) -> int:
    """Integer coefficient of z_1^lam_1 ... z_N^lam_N in prod_{i<j} (z_i - z_j)^2."""
    N = len(lam)
    perms, signs = _permutations(N)
    t = np.asarray(lam, dtype=np.int64)[None, :] - perms
    ok = np.all((t >= 0) & (t < N), axis=1)
    t, s = t[ok], signs[ok]
    # t must itself be a permutation of 0..N-1
    distinct = np.sort(t, axis=1)
    ok = np.all(distinct == np.arange(N), axis=1)
    t, s = t[ok], s[ok]
    if len(t) == 0:
        return 0
    return int(np.sum(s * _permutation_signs(t)))


@lru_cache(maxsize=None)
def laughlin_polynomial(N: int) -> dict[tuple[int, ...], int]:
    """Nonzero coefficients of prod (z_i - z_j)^2 on monomial symmetric functions.

    Keys are decreasing partitions of N(N-1) padded to length N.
    """
    if not 2 <= N:
        raise ValueError("Laughlin state needs N >= 2")
    if N > N_MAX:
        raise ResourceError(f"N={N} exceeds N_MAX={N_MAX} for the symbolic expansion")
    out = {}
    for lam in partitions(N * (N - 1), N, max_part=2 * (N - 1)):
        c = vandermonde_squared_coefficient(lam)
        if c:
            out[lam] = c
    return out


def _log_multiplicity(parts: np.ndarray) -> np.ndarray:
    """log prod_l n_l! per row of sorted partitions (invariant under shifts)."""
    out = np.zeros(len(parts))
    for row, p in enumerate(parts):
        _, counts = np.unique(p, return_counts=True)
        out[row] = gammaln(counts + 1.0).sum()
    return out


@dataclass(frozen=True)
class TrialSupport:
    """Sparse form of a giant-vortex state: partitions and normalized amplitudes."""

    N: int
    m: int
    parts: np.ndarray  # (terms, N), decreasing rows
    amplitudes: np.ndarray

    @property
    def L(self) -> int:
        return self.N * (self.N - 1) + self.N * self.m


@lru_cache(maxsize=None)
def _laughlin_arrays(N: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Partitions, sign and log|coefficient| of the Laughlin expansion, plus
    the log multiplicity factor of each partition."""
    poly = laughlin_polynomial(N)
    parts = np.array(list(poly.keys()), dtype=np.int64)
    sign = np.array([1.0 if poly[tuple(p)] > 0 else -1.0 for p in parts])
    log_a = np.array([math.log(abs(poly[tuple(p)])) for p in parts])
    return parts, sign, log_a, _log_multiplicity(parts)


def trial_support(N: int, m: int = 0) -> TrialSupport:
    if m < 0:
        raise ValueError("vortex charge m must be >= 0")
    parts, sign, log_a, log_mult = _laughlin_arrays(N)
    shifted = parts + m
    # amplitude = coefficient * sqrt(prod lam_i! / prod n_l!), in log space
    log_amp = log_a + 0.5 * (gammaln(shifted + 1.0).sum(axis=1) - log_mult)
    amp = sign * np.exp(log_amp - log_amp.max())
    amp /= np.linalg.norm(amp)
    return TrialSupport(N, m, shifted, amp)


def _to_fock(sup: TrialSupport) -> FockVector:
    basis = enumerate_sector(sup.N, sup.L)
    coeffs = np.zeros(basis.dim)
    for p, a in zip(sup.parts, sup.amplitudes):
        coeffs[basis.index[Occupation.from_partition(tuple(int(x) for x in p), sup.L)]] = a
    return FockVector((sup.N, sup.L), coeffs)


def laughlin_fock(N: int) -> FockVector:
    """Normalized prod_{i<j} (z_i - z_j)^2 in sector L = N(N-1)."""
    return _to_fock(trial_support(N, 0))


def giant_vortex_fock(N: int, m: int) -> FockVector:
    """Normalized prod_j z_j^m prod_{i<j} (z_i - z_j)^2 in sector L = N(N-1) + N m."""
    return _to_fock(trial_support(N, m))


@dataclass(frozen=True)
class TrialEnergyRecord:
    m: int
    L_m: int
    E: float
    L2_expect: float


def trial_energy(N: int, m: int, p: HamiltonianParams) -> TrialEnergyRecord:
    """Exact energy of the giant-vortex trial state; its interaction energy is zero."""
    sup = trial_support(N, m)
    weights = sup.amplitudes**2
    l2 = float(weights @ (sup.parts.astype(float) ** 2).sum(axis=1))
    L = sup.L
    return TrialEnergyRecord(m, L, (p.omega + 3.0 * p.k) * L + p.k * l2, l2)


def optimal_m(omega: float, k: float, N: int) -> int:
    """Closed-form optimal vortex charge: 0 if omega >= -2kN, else |omega|/(2k) - N,
    rounded half-up."""
    if k <= 0:
        if omega < 0:
            raise ValueError("omega < 0 requires k > 0")
        return 0
    if omega >= -2.0 * k * N:
        return 0
    return max(0, math.floor(abs(omega) / (2.0 * k) - N + 0.5))


def numeric_optimal_m(omega: float, k: float, N: int, m_cap: int | None = None) -> int:
    """Integer m minimizing the exact trial energy (scan until the energy turns up).

    The energy is convex in m along the family, so the first local minimum is
    global; the scan stops after two consecutive increases.
    """
    if k <= 0:
        raise ValueError("numeric optimization needs k > 0")
    p = HamiltonianParams(omega=omega, g=0.0, k=k)
    if m_cap is None:
        m_cap = int(abs(omega) / k) + 2 * N + 10
    best_m, best_E = 0, trial_energy(N, 0, p).E
    prev = best_E
    rising = 0
    for m in range(1, m_cap + 1):
        E = trial_energy(N, m, p).E
        if E < best_E:
            best_m, best_E = m, E
        rising = rising + 1 if E > prev else 0
        if rising >= 2:
            break
        prev = E
    return best_m
