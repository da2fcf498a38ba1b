"""Metropolis sampling of the 2D one-component plasma of giant-vortex states.

In scaled variables the N-particle density of prod_j z_j^m prod_{i<j}(z_i - z_j)^2
is exp(-H / T) with T = 1/N and

    H(Z) = sum_j (|z_j|^2 - (2m/N) log|z_j|) - (4/N) sum_{i<j} log|z_i - z_j|.

The sampler works with the dimensionless action N * H.  Random numbers are
drawn from numpy's PCG64 in fixed-size chunks and handed to a compiled sweep
kernel, so a seed determines the sample stream bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import gammainc

TARGET_ACCEPTANCE = 0.35
CHUNK_SWEEPS = 200
CHECK_EVERY = 1000
MIN_BATCHES = 32


@dataclass(frozen=True)
class PlasmaConfig:
    positions: np.ndarray  # complex, shape (N,)
    m: int

    @property
    def N(self) -> int:
        return len(self.positions)


def plasma_energy(cfg: PlasmaConfig) -> float:
    """H_{N,m}(Z); +inf for coincident points or a point at the origin when m > 0."""
    z = np.asarray(cfg.positions, dtype=complex)
    N = len(z)
    r = np.abs(z)
    if cfg.m > 0 and np.any(r == 0.0):
        return math.inf
    one_body = float(np.sum(r**2))
    if cfg.m > 0:
        one_body -= 2.0 * cfg.m / N * float(np.sum(np.log(r)))
    iu, ju = np.triu_indices(N, 1)
    d = np.abs(z[iu] - z[ju])
    if np.any(d == 0.0):
        return math.inf
    return one_body - 4.0 / N * float(np.sum(np.log(d)))


@njit(cache=True)
def _action_change(x, y, j, xn, yn, N, m):
    """N * (H(new) - H(old)) for moving particle j to (xn, yn)."""
    r2o = x[j] * x[j] + y[j] * y[j]
    r2n = xn * xn + yn * yn
    if r2n == 0.0 and m > 0:
        return np.inf
    d = N * (r2n - r2o)
    if m > 0:
        d -= m * (math.log(r2n) - math.log(r2o))
    pair = 0.0
    for i in range(x.shape[0]):
        if i == j:
            continue
        dxn = xn - x[i]
        dyn = yn - y[i]
        dn = dxn * dxn + dyn * dyn
        if dn == 0.0:
            return np.inf
        dxo = x[j] - x[i]
        dyo = y[j] - y[i]
        pair += math.log(dn) - math.log(dxo * dxo + dyo * dyo)
    # 4 log|.| = 2 log|.|^2
    return d - 2.0 * pair


@njit(cache=True)
def _sweeps(x, y, m, step, normals, uniforms, action):
    """Run len(uniforms) sweeps in place; each sweep visits particles in order.

    Returns accepted moves and the updated action N * H.
    """
    n_sweeps, N = uniforms.shape
    accepted = 0
    for s in range(n_sweeps):
        for j in range(N):
            xn = x[j] + step * normals[s, j, 0]
            yn = y[j] + step * normals[s, j, 1]
            dS = _action_change(x, y, j, xn, yn, N, m)
            if dS <= 0.0 or uniforms[s, j] < math.exp(-dS):
                x[j] = xn
                y[j] = yn
                action += dS
                accepted += 1
    return accepted, action


def metropolis_step(
    positions: np.ndarray, m: int, j: int, new: complex, u: float
) -> tuple[bool, float]:
    """One accept/reject decision for moving particle j to ``new``.

    Returns (accepted, N * delta H).  Shares the compiled energy difference
    with the sampler.
    """
    x = positions.real.copy()
    y = positions.imag.copy()
    dS = _action_change(x, y, j, new.real, new.imag, len(positions), m)
    return bool(dS <= 0.0 or u < math.exp(-dS)), float(dS)


def default_step(N: int) -> float:
    # a fraction of the mean interparticle spacing sqrt(2 pi / N)
    return 0.5 * math.sqrt(2.0 * math.pi / N)


def initial_positions(N: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform on the disk of radius sqrt(2 + m/N)."""
    R = math.sqrt(2.0 + m / N)
    r = R * np.sqrt(rng.random(N))
    theta = 2.0 * math.pi * rng.random(N)
    return r * np.exp(1j * theta)


@dataclass
class PlasmaRun:
    N: int
    m: int
    seed: int
    n_sweeps: int
    burn_in: int
    stride: int
    step_scale: float
    acceptance: float
    samples: np.ndarray  # complex (n_kept, N)
    max_energy_drift: float  # relative, incremental vs full recomputation
    energy_trace: list[float] = field(default_factory=list)

    @property
    def n_particle_samples(self) -> int:
        return self.samples.size

    def metadata(self) -> dict:
        return {
            "N": self.N,
            "m": self.m,
            "seed": self.seed,
            "n_sweeps": self.n_sweeps,
            "burn_in": self.burn_in,
            "stride": self.stride,
            "step_scale": self.step_scale,
            "acceptance": self.acceptance,
            "retained_configurations": int(self.samples.shape[0]),
            "retained_particle_samples": int(self.samples.size),
            "max_energy_drift": self.max_energy_drift,
        }


def run_metropolis(
    N: int,
    m: int,
    n_sweeps: int,
    step_scale: float | None = None,
    seed: int = 0,
    burn_in: int = 1000,
    stride: int = 1,
    tune: bool = True,
) -> PlasmaRun:
    """Single-particle Gaussian random-walk Metropolis for exp(-N H_{N,m}).

    During burn-in the step is rescaled every chunk toward 35% acceptance;
    after burn-in it is frozen.  ``n_sweeps`` counts burn-in sweeps too.
    Every ``stride``-th post-burn-in configuration is kept.
    """
    if N < 1 or m < 0:
        raise ValueError("need N >= 1 and m >= 0")
    if not n_sweeps > burn_in >= 0:
        raise ValueError("need n_sweeps > burn_in >= 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rng = np.random.default_rng(seed)
    z = initial_positions(N, m, rng)
    x, y = z.real.copy(), z.imag.copy()
    step = default_step(N) if step_scale is None else float(step_scale)
    action = N * plasma_energy(PlasmaConfig(x + 1j * y, m))

    kept = []
    accepted = moves = 0
    drift = 0.0
    trace = []
    done = 0
    next_check = CHECK_EVERY
    while done < n_sweeps:
        # chunks never straddle the end of burn-in
        limit = burn_in if done < burn_in else n_sweeps
        chunk = min(CHUNK_SWEEPS, limit - done)
        normals = rng.standard_normal((chunk, N, 2))
        uniforms = rng.random((chunk, N))
        if done >= burn_in:
            # one sweep per call so configurations can be recorded
            for s in range(chunk):
                acc, action = _sweeps(x, y, m, step, normals[s : s + 1], uniforms[s : s + 1], action)
                accepted += acc
                moves += N
                if (done + s - burn_in + 1) % stride == 0:
                    kept.append(x + 1j * y)
        else:
            acc, action = _sweeps(x, y, m, step, normals, uniforms, action)
            if tune:
                rate = acc / (chunk * N)
                step *= math.exp(rate - TARGET_ACCEPTANCE)
        done += chunk
        if done >= next_check or done == n_sweeps:
            exact = N * plasma_energy(PlasmaConfig(x + 1j * y, m))
            drift = max(drift, abs(action - exact) / max(1.0, abs(exact)))
            trace.append(exact / N)
            action = exact
            next_check += CHECK_EVERY
    samples = np.array(kept) if kept else np.zeros((0, N), dtype=complex)
    return PlasmaRun(
        N=N,
        m=m,
        seed=seed,
        n_sweeps=n_sweeps,
        burn_in=burn_in,
        stride=stride,
        step_scale=step,
        acceptance=accepted / moves if moves else math.nan,
        samples=samples,
        max_energy_drift=drift,
        energy_trace=trace,
    )


@dataclass(frozen=True)
class RadialDensity:
    edges: np.ndarray
    values: np.ndarray
    mc_error: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def shell_areas(self) -> np.ndarray:
        return np.pi * (self.edges[1:] ** 2 - self.edges[:-1] ** 2)

    def total_mass(self) -> float:
        return float(np.sum(self.values * self.shell_areas))


def radial_density(samples: np.ndarray, bins: int | np.ndarray = 100, n_batches: int = MIN_BATCHES) -> RadialDensity:
    """Histogram of particle radii normalized as a probability density in the plane.

    Error bars are batch means over ``n_batches`` consecutive blocks of
    configurations.
    """
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("empty sample stream")
    if samples.ndim == 1:
        samples = samples[None, :]
    r = np.abs(samples)
    if np.isscalar(bins):
        edges = np.linspace(0.0, float(r.max()) * (1.0 + 1e-9), int(bins) + 1)
    else:
        edges = np.asarray(bins, dtype=float)
    areas = np.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    counts, _ = np.histogram(r.ravel(), bins=edges)
    values = counts / (r.size * areas)
    nb = min(n_batches, r.shape[0])
    if nb >= 2:
        per = np.array(
            [np.histogram(blk.ravel(), bins=edges)[0] / (blk.size * areas) for blk in np.array_split(r, nb)]
        )
        err = per.std(axis=0, ddof=1) / math.sqrt(nb)
    else:
        err = np.full_like(values, np.nan)
    return RadialDensity(edges, values, err)


def thermal_radial_cdf(r: np.ndarray, N: int, m: int) -> np.ndarray:
    """CDF of |z| under the planar density proportional to |z|^{2m} exp(-N|z|^2).

    N |z|^2 is Gamma(m + 1)-distributed.
    """
    return gammainc(m + 1.0, N * np.asarray(r, dtype=float) ** 2)


def ks_distance_thermal(samples: np.ndarray, N: int, m: int) -> float:
    """Kolmogorov-Smirnov distance between sampled radii and the thermal law."""
    r = np.sort(np.abs(np.asarray(samples)).ravel())
    F = thermal_radial_cdf(r, N, m)
    n = len(r)
    upper = np.arange(1, n + 1) / n - F
    lower = F - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


def angular_uniformity(samples: np.ndarray, bins: int = 16) -> tuple[np.ndarray, float]:
    """Angular histogram counts and the largest deviation from uniform in sigma units."""
    theta = np.angle(np.asarray(samples).ravel())
    counts, _ = np.histogram(theta, bins=bins, range=(-np.pi, np.pi))
    expected = counts.sum() / bins
    sigma = math.sqrt(expected * (1 - 1 / bins))
    return counts, float(np.max(np.abs(counts - expected)) / sigma)
