"""Radial mean-field free energy of the plasma and its limiting profiles.

    E[rho] = int W_m rho - 2 iint rho(z) log|z - z'| rho(z') + (1/N) int rho log rho,
    W_m(z) = |z|^2 - (2m/N) log|z|,

over radial probability densities.  The angular average of log|z - z'| is
log max(|z|, |z'|), so the potential of a radial density reduces to two
cumulative sums on the grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid


class MeanFieldConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class GridResolutionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RadialGrid:
    r: np.ndarray
    weights: np.ndarray  # 2 pi r times trapezoid weights

    @classmethod
    def uniform(cls, r_max: float, n: int) -> "RadialGrid":
        r = np.linspace(0.0, r_max, n)
        h = r[1] - r[0]
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        return cls(r, 2.0 * np.pi * r * w)

    @property
    def spacing(self) -> float:
        return float(self.r[1] - self.r[0])

    def integrate(self, f: np.ndarray) -> float:
        return float(np.dot(self.weights, f))


def default_grid(N: int, m: int, n: int | None = None) -> RadialGrid:
    """Uniform grid up to R_+ + 5/sqrt(N), at least 20 points per 1/sqrt(N)."""
    r_max = math.sqrt(2.0 + m / N) + 5.0 / math.sqrt(N)
    if n is None:
        n = max(800, int(math.ceil(20 * r_max * math.sqrt(N))) + 1)
    return RadialGrid.uniform(r_max, n)


@dataclass(frozen=True)
class MeanFieldProfile:
    N: int
    m: int
    grid: RadialGrid
    rho: np.ndarray
    mu: float
    energy: float
    regime: str  # "annulus" | "thermal" | "numeric"
    iterations: int = 0
    residual: float = 0.0
    history: tuple[float, ...] = ()  # energy after each accepted step, starting point first

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    def mass(self) -> float:
        return self.grid.integrate(self.rho)

    def peak_radius(self) -> float:
        return float(self.grid.r[np.argmax(self.rho)])


def W_m(r: np.ndarray, N: int, m: int) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logr = np.log(r)
    if m == 0:
        return r**2
    return r**2 - 2.0 * m / N * logr


def log_potential(grid: RadialGrid, rho: np.ndarray) -> np.ndarray:
    """Phi(r_i) = -sum_j w_j rho_j log max(r_i, r_j), the angle-averaged log potential."""
    q = grid.weights * rho
    with np.errstate(divide="ignore"):
        logr = np.log(grid.r)
    logr_safe = np.where(grid.r > 0, logr, 0.0)
    inner = np.cumsum(q)  # mass at radius <= r_i
    outer = np.cumsum((q * logr_safe)[::-1])[::-1]  # sum_{j >= i}
    outer_strict = np.concatenate([outer[1:], [0.0]])
    # mass inside r = 0 is zero (zero weight), so the first term vanishes there
    return -(np.where(grid.r > 0, logr_safe * inner, 0.0) + outer_strict)


def energy_terms(grid: RadialGrid, rho: np.ndarray, N: int, m: int) -> tuple[float, float, float]:
    """(external, interaction, entropy) parts of E[rho] on the grid."""
    W = W_m(grid.r, N, m)
    support = rho > 0
    ext = grid.integrate(np.where(support, W, 0.0) * rho)
    inter = 2.0 * grid.integrate(log_potential(grid, rho) * rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = grid.integrate(np.where(support, rho * np.log(np.where(support, rho, 1.0)), 0.0)) / N
    return ext, inter, ent


def mf_energy(grid: RadialGrid, rho: np.ndarray, N: int, m: int) -> float:
    return float(sum(energy_terms(grid, rho, N, m)))


def _regime(terms: tuple[float, float, float]) -> str:
    ext, inter, ent = terms
    total = abs(ext + inter + ent)
    if abs(ent) < 0.01 * total:
        return "annulus"
    if abs(inter) < 0.1 * total:
        return "thermal"
    return "numeric"


def annulus_radii(N: int, m: int) -> tuple[float, float]:
    return math.sqrt(m / N), math.sqrt(2.0 + m / N)


def annulus_profile(N: int, m: int, grid: RadialGrid | None = None) -> MeanFieldProfile:
    """rho = 1/(2 pi) on sqrt(m/N) <= r <= sqrt(2 + m/N), zero elsewhere.

    Renormalized on the grid so that the discrete mass is exactly one; the
    plateau differs from 1/(2 pi) by the O(h) edge-cell error.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    grid = grid or default_grid(N, m)
    r_in, r_out = annulus_radii(N, m)
    rho = np.where((grid.r >= r_in) & (grid.r <= r_out), 1.0 / (2.0 * np.pi), 0.0)
    rho = rho / grid.integrate(rho)
    terms = energy_terms(grid, rho, N, m)
    return MeanFieldProfile(N, m, grid, rho, math.nan, float(sum(terms)), "annulus")


def thermal_profile(N: int, m: int, grid: RadialGrid | None = None) -> MeanFieldProfile:
    """Normalized r^{2m} exp(-N r^2), evaluated in log space."""
    if m < 1:
        raise ValueError("thermal profile needs m >= 1")
    grid = grid or default_grid(N, m)
    with np.errstate(divide="ignore"):
        logrho = 2.0 * m * np.log(grid.r) - N * grid.r**2
    rho = np.exp(logrho - logrho.max())
    rho /= grid.integrate(rho)
    terms = energy_terms(grid, rho, N, m)
    return MeanFieldProfile(N, m, grid, rho, math.nan, float(sum(terms)), "thermal")


def thermal_peak_radius(N: int, m: int) -> float:
    return math.sqrt(m / N)


def _gibbs_update(grid: RadialGrid, rho: np.ndarray, N: int, m: int) -> tuple[np.ndarray, float]:
    """Normalized exp(-N (W_m + 4 Phi[rho] - mu)) and the chemical potential mu."""
    with np.errstate(divide="ignore"):
        expo = -N * (W_m(grid.r, N, m) + 4.0 * log_potential(grid, rho))
    shift = expo.max()
    new = np.exp(expo - shift)
    Z = grid.integrate(new)
    new /= Z
    mu = -(shift + math.log(Z)) / N
    return new, mu


def check_resolution(grid: RadialGrid, N: int, m: int) -> None:
    width = 1.0 / math.sqrt(N)
    if grid.spacing > 0.1 * width:
        warnings.warn(
            f"grid spacing {grid.spacing:.3g} does not resolve the 1/sqrt(N) = {width:.3g} edge layer",
            GridResolutionWarning,
            stacklevel=3,
        )
    if grid.r[-1] < math.sqrt(2.0 + m / N) + 3.0 * width:
        warnings.warn("grid ends before the outer edge of the density", GridResolutionWarning, stacklevel=3)


def minimize_mf(
    N: int,
    m: int,
    grid: RadialGrid | None = None,
    tol: float = 1e-6,
    max_iter: int = 200_000,
    damping: float = 0.5,
) -> MeanFieldProfile:
    """Minimize the mean-field free energy over radial densities.

    Damped fixed-point iteration of rho = exp(-N (W_m + 4 Phi[rho] - mu)):
    the new iterate is (1 - a) rho + a T(rho).  T(rho) - rho is a descent
    direction of the convex functional, so a is halved from ``damping``
    until the energy does not increase, and grown again after successes.
    Stops when sup |T(rho) - rho| < tol.  Starts from the better of the
    annulus and thermal profiles, so the result never has higher energy than
    either.
    """
    grid = grid or default_grid(N, m)
    check_resolution(grid, N, m)
    starts = [annulus_profile(N, m, grid)]
    if m >= 1:
        starts.append(thermal_profile(N, m, grid))
    start = min(starts, key=lambda p: p.energy)
    rho = start.rho
    E = start.energy
    a = damping
    residual = math.inf
    history = [E]
    for it in range(1, max_iter + 1):
        target, mu = _gibbs_update(grid, rho, N, m)
        residual = float(np.max(np.abs(target - rho)))
        if residual < tol:
            terms = energy_terms(grid, rho, N, m)
            return MeanFieldProfile(N, m, grid, rho, mu, E, _regime(terms), it, residual, tuple(history))
        while True:
            trial = (1.0 - a) * rho + a * target
            E_trial = mf_energy(grid, trial, N, m)
            if E_trial <= E or a < 1e-12:
                break
            a *= 0.5
        if E_trial > E:
            # energy differences are below rounding before the density has settled
            raise MeanFieldConvergenceError("energy stalled above the requested tolerance", residual)
        assert E_trial <= E
        rho, E = trial, E_trial
        history.append(E)
        a = min(damping, 2.0 * a)
    raise MeanFieldConvergenceError(f"mean-field iteration did not converge in {max_iter} steps", residual)


def l1_distance(grid: RadialGrid, rho_a: np.ndarray, rho_b: np.ndarray) -> float:
    """int |rho_a - rho_b| d^2z on the grid."""
    return grid.integrate(np.abs(rho_a - rho_b))


def interpolate_to_grid(grid: RadialGrid, edges: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Piecewise-constant histogram values evaluated on the grid (zero outside)."""
    idx = np.searchsorted(edges, grid.r, side="right") - 1
    inside = (idx >= 0) & (idx < len(values))
    out = np.zeros_like(grid.r)
    out[inside] = values[idx[inside]]
    return out


def cumulative_mass(grid: RadialGrid, rho: np.ndarray) -> np.ndarray:
    return cumulative_trapezoid(2.0 * np.pi * grid.r * rho, grid.r, initial=0.0)
