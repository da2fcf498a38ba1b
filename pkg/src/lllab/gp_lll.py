"""Gross-Pitaevskii functional restricted to the lowest Landau level.

A one-body state is phi(z) = sum_l c_l z^l / sqrt(pi l!), and

    E^GP[c] = omega sum_l l |c_l|^2 + (Ng / 2) Q(c),
    Q(c) = int |phi|^4 exp(-2|z|^2) d^2z.

The contact kernel factorizes, delta(m1, m2, m3, m4) = K[m1, m2] K[m3, m4]
with K[a, b] = sqrt(binom(a + b, a) / (2 pi 2^(a+b))), so

    Q(c) = sum_M |S_M|^2,  S_M = sum_{a+b=M} K[a, b] c_a c_b,

which costs O(l_max^2) instead of a quartic sum.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .operators import HamiltonianParams
from .spectra import SolverConfig, ground_state_scan

ABRIKOSOV = 1.16
NORM_TOL = 1e-10
TAIL_TOL = 1e-6
DEFAULT_L_MAX = 32
DEFAULT_RESTARTS = 16


class GPConvergenceError(RuntimeError):
    def __init__(self, message: str, grad_norm: float):
        super().__init__(f"{message} (projected gradient norm {grad_norm:.3e})")
        self.grad_norm = grad_norm


class IllConditionedRootsWarning(UserWarning):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GPState:
    coeffs: np.ndarray  # complex, index l = 0..l_max
    energy: float = math.nan
    grad_norm: float = math.nan
    iterations: int = 0
    restart: int = -1

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        object.__setattr__(self, "coeffs", c)
        if abs(np.vdot(c, c).real - 1.0) > NORM_TOL:
            raise ValueError(f"GP state must have unit norm, got {np.vdot(c, c).real!r}")

    @property
    def l_max(self) -> int:
        return len(self.coeffs) - 1

    def mean_L(self) -> float:
        return float(np.arange(len(self.coeffs)) @ np.abs(self.coeffs) ** 2)

    def tail_weight(self) -> float:
        cut = int(0.9 * self.l_max)
        return float(np.sum(np.abs(self.coeffs[cut + 1 :]) ** 2))

    def padded(self, l_max: int) -> "GPState":
        c = np.zeros(l_max + 1, dtype=complex)
        c[: len(self.coeffs)] = self.coeffs
        return GPState(c)

    def wavefunction(self, z: np.ndarray) -> np.ndarray:
        """phi(z) (Bargmann analytic part, without the Gaussian factor)."""
        ell = np.arange(len(self.coeffs))
        scale = np.exp(-0.5 * (math.log(math.pi) + gammaln(ell + 1.0)))
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), self.coeffs * scale)

    def density(self, z: np.ndarray) -> np.ndarray:
        """|phi(z)|^2 exp(-|z|^2), normalized to one in the plane."""
        return np.abs(self.wavefunction(z)) ** 2 * np.exp(-np.abs(z) ** 2)


@lru_cache(maxsize=16)
def contact_kernel(l_max: int) -> np.ndarray:
    """K[a, b] = sqrt(binom(a+b, a) / (2 pi 2^(a+b))), shape (l_max+1, l_max+1)."""
    a = np.arange(l_max + 1, dtype=float)
    A, B = np.meshgrid(a, a, indexing="ij")
    M = A + B
    log_k = 0.5 * (gammaln(M + 1) - gammaln(A + 1) - gammaln(B + 1) - math.log(2 * math.pi) - M * math.log(2.0))
    return np.exp(log_k)


def _antidiagonal_sums(T: np.ndarray) -> np.ndarray:
    n = T.shape[0]
    idx = np.add.outer(np.arange(n), np.arange(n)).ravel()
    flat = T.ravel()
    return np.bincount(idx, flat.real, 2 * n - 1) + 1j * np.bincount(idx, flat.imag, 2 * n - 1)


def quartic_form(c: np.ndarray) -> float:
    """Q(c) = int |phi|^4 e^{-2|z|^2}; unnormalized c allowed."""
    c = np.asarray(c, dtype=complex)
    K = contact_kernel(len(c) - 1)
    S = _antidiagonal_sums(K * np.outer(c, c))
    return float(np.sum(np.abs(S) ** 2))


def _check_norm(c: np.ndarray) -> None:
    nrm = float(np.vdot(c, c).real)
    if abs(nrm - 1.0) > NORM_TOL:
        raise ValueError(f"GP energy needs a unit-norm state, got norm^2 = {nrm!r}")


def gp_energy(s: GPState | np.ndarray, omega: float, Ng: float) -> float:
    c = s.coeffs if isinstance(s, GPState) else np.asarray(s, dtype=complex)
    _check_norm(c)
    ell = np.arange(len(c))
    return float(omega * (ell @ np.abs(c) ** 2) + 0.5 * Ng * quartic_form(c))


def energy_and_gradient(c: np.ndarray, omega: float, Ng: float) -> tuple[float, np.ndarray]:
    """Energy and its gradient with respect to (Re c, Im c), packed as a complex array.

    No norm constraint is applied here; the gradient is 2 dE/d conj(c).
    """
    ell = np.arange(len(c))
    K = contact_kernel(len(c) - 1)
    S = _antidiagonal_sums(K * np.outer(c, c))
    E = float(omega * (ell @ np.abs(c) ** 2) + 0.5 * Ng * np.sum(np.abs(S) ** 2))
    # dE/dconj(c_a) = omega a c_a + Ng sum_b K[a,b] S[a+b] conj(c_b)
    S_ab = S[np.add.outer(ell, ell)]
    wirt = omega * ell * c + Ng * (K * S_ab) @ np.conj(c)
    return E, 2.0 * wirt


def _project(c: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g - np.real(np.vdot(c, g)) * c


def _descend(
    c: np.ndarray, omega: float, Ng: float, tol: float, max_iter: int
) -> tuple[np.ndarray, float, float, int]:
    """Projected gradient descent on the unit sphere with Armijo backtracking.

    Trial steps start from a Barzilai-Borwein estimate; every accepted step
    lowers the energy and is renormalized.
    """
    c = c / np.linalg.norm(c)
    E, g = energy_and_gradient(c, omega, Ng)
    gt = _project(c, g)
    t = 1.0 / max(1.0, abs(omega) * len(c) + Ng)
    prev = None
    for it in range(1, max_iter + 1):
        gnorm = float(np.linalg.norm(gt))
        if gnorm < tol:
            return c, E, gnorm, it
        if prev is not None:
            dc = c - prev[0]
            dg = gt - prev[1]
            denom = float(np.real(np.vdot(dc, dg)))
            if denom > 0:
                t = float(np.real(np.vdot(dc, dc))) / denom
        while True:
            trial = c - t * gt
            trial = trial / np.linalg.norm(trial)
            E_trial, g_trial = energy_and_gradient(trial, omega, Ng)
            if E_trial <= E - 1e-4 * t * gnorm**2 or t < 1e-16:
                break
            t *= 0.5
        if E_trial > E:
            return c, E, gnorm, it
        prev = (c, gt)
        c, E, g = trial, E_trial, g_trial
        gt = _project(c, g)
    gnorm = float(np.linalg.norm(gt))
    if gnorm < 10 * tol:
        return c, E, gnorm, max_iter
    raise GPConvergenceError(f"GP descent did not converge in {max_iter} iterations", gnorm)


def _starts(l_max: int, restarts: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    out = [np.eye(1, l_max + 1, 0, dtype=complex).ravel()]
    for _ in range(restarts):
        v = rng.standard_normal(l_max + 1) + 1j * rng.standard_normal(l_max + 1)
        # bias random starts toward low orbitals so they are not tail heavy
        v *= np.exp(-np.arange(l_max + 1) / (0.5 * l_max + 1))
        out.append(v / np.linalg.norm(v))
    return out


def minimize_gp(
    omega: float,
    Ng: float,
    l_max: int = DEFAULT_L_MAX,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = 1e-6,
    seed: int = 0,
    max_iter: int = 20_000,
    auto_extend: bool = True,
    l_cap: int = 512,
) -> GPState:
    """Lowest GP energy over unit-norm LLL states with l <= l_max.

    Runs the pure l=0 start plus ``restarts`` random complex starts and keeps
    the lowest energy (ties go to the lower restart index).  If the winner
    carries more than 1e-6 of its weight in the top 10% of orbitals, l_max is
    doubled and the winner is refined in the larger space.
    """
    if omega <= 0:
        raise ValueError("GP minimization needs omega > 0")
    if Ng < 0:
        raise ValueError("Ng must be >= 0")
    lam, _ = _tf_lambda_energy(omega, Ng) if Ng > 0 else (0.0, 0.0)
    best: GPState | None = None
    for index, c0 in enumerate(_starts(l_max, restarts, seed)):
        c, E, gnorm, its = _descend(c0, omega, Ng, tol, max_iter)
        if best is None or E < best.energy - 1e-12 * max(1.0, abs(E)):
            best = GPState(c / np.linalg.norm(c), E, gnorm, its, index)
    assert best is not None
    while auto_extend and best.tail_weight() > TAIL_TOL and best.l_max < l_cap:
        wider = best.padded(min(2 * best.l_max, l_cap))
        c, E, gnorm, its = _descend(wider.coeffs, omega, Ng, tol, max_iter)
        best = GPState(c / np.linalg.norm(c), E, gnorm, its, best.restart)
    if best.tail_weight() > TAIL_TOL or lam / omega > 0.8 * best.l_max:
        warnings.warn(
            f"orbital cutoff l_max={best.l_max} may truncate the condensate "
            f"(TF radius^2 {lam / omega:.3g}, tail weight {best.tail_weight():.2e})",
            TruncationWarning,
            stacklevel=2,
        )
    return best


@dataclass(frozen=True)
class TFProfile:
    omega: float
    Ng: float
    lam: float
    e_ab: float = ABRIKOSOV

    @property
    def radius(self) -> float:
        return math.sqrt(self.lam / self.omega)

    def density(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.maximum(self.lam - self.omega * r**2, 0.0) / (self.Ng * self.e_ab)


def _tf_lambda_energy(omega: float, Ng: float, e_ab: float = ABRIKOSOV) -> tuple[float, float]:
    lam = math.sqrt(2.0 * omega * Ng * e_ab / math.pi)
    return lam, 2.0 * lam / 3.0 - omega


def tf_profile_and_energy(omega: float, Ng: float, e_ab: float = ABRIKOSOV) -> tuple[TFProfile, float]:
    """Thomas-Fermi profile (lam - omega r^2)_+ / (Ng e_ab) and the value

        E^TF = int omega (|x|^2 - 1) rho + (Ng e_ab / 2) int rho^2 = 2 lam / 3 - omega.
    """
    if omega <= 0 or Ng <= 0:
        raise ValueError("need omega > 0 and Ng > 0")
    lam, E = _tf_lambda_energy(omega, Ng, e_ab)
    return TFProfile(omega, Ng, lam, e_ab), E


def tf_functional(profile: TFProfile, n: int = 20001) -> float:
    """E^TF evaluated by radial quadrature (independent of the closed form)."""
    r = np.linspace(0.0, profile.radius, n)
    rho = profile.density(r)
    integrand = (profile.omega * (r**2 - 1.0) * rho + 0.5 * profile.Ng * profile.e_ab * rho**2) * 2 * np.pi * r
    return float(np.trapezoid(integrand, r))


@dataclass(frozen=True)
class VortexZeros:
    roots: np.ndarray
    bulk: np.ndarray
    radius: float

    @property
    def bulk_count(self) -> int:
        return len(self.bulk)


def vortex_zeros(s: GPState, radius: float | None = None, cond_tol: float = 1e-12) -> VortexZeros:
    """Zeros of phi(z) = sum_l c_l z^l / sqrt(pi l!) via the companion matrix.

    ``radius`` separates bulk vortices; with no radius given every root
    counts as bulk.  Vanishing top coefficients lower the degree, and a
    tiny leading coefficient relative to the rest triggers a warning.
    """
    ell = np.arange(len(s.coeffs))
    poly = s.coeffs * np.exp(-0.5 * (math.log(math.pi) + gammaln(ell + 1.0)))
    nz = np.flatnonzero(np.abs(s.coeffs) > 0)
    if len(nz) == 0 or nz[-1] < 1:
        raise ValueError("polynomial degree must be >= 1")
    poly = poly[: nz[-1] + 1]
    if abs(s.coeffs[nz[-1]]) < cond_tol * np.max(np.abs(s.coeffs)):
        warnings.warn("near-degenerate leading coefficient, large roots are ill conditioned", IllConditionedRootsWarning, stacklevel=2)
    roots = np.polynomial.polynomial.polyroots(poly)
    R = math.inf if radius is None else radius
    return VortexZeros(roots, roots[np.abs(roots) < R], R)


@dataclass(frozen=True)
class GPComparison:
    N: int
    omega: float
    g: float
    E_GP: float
    E_exact: float
    L_star: int

    @property
    def ratio(self) -> float:
        return self.E_exact / self.E_GP if self.E_GP else math.nan


def compare_gp_exact(
    N: int,
    omega: float,
    g: float,
    *,
    restarts: int = DEFAULT_RESTARTS,
    seed: int = 0,
    config: SolverConfig = SolverConfig(),
) -> GPComparison:
    """N E_1^GP(omega, N g) against the exact k = 0 ground energy."""
    if not 2 <= N <= 6:
        raise ValueError("exact comparison supports 2 <= N <= 6")
    if omega <= 0:
        raise ValueError("need omega > 0")
    if g == 0:
        E_GP = 0.0
    else:
        E_GP = N * minimize_gp(omega, N * g, restarts=restarts, seed=seed).energy
    # for k = 0 the Laughlin sector caps the ground energy, so L <= N(N-1) suffices
    rec = ground_state_scan(N, HamiltonianParams(omega=omega, g=g, k=0.0), N * (N - 1), config=config)
    if E_GP < rec.energy - 1e-8:
        raise AssertionError(f"GP energy {E_GP} below exact ground energy {rec.energy}")
    return GPComparison(N, omega, g, E_GP, rec.energy, rec.L_star)
