"""Sector-by-sector eigenanalysis: yrast curve, gaps, kernels, ground states."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, cg, eigsh

from .basis import FockVector, enumerate_sector
from .lanczos import ConvergenceError, LanczosConfig, block_lanczos
from .operators import (
    HamiltonianParams,
    SparseSymmetricOperator,
    assemble_hamiltonian,
    interaction_for,
)

DENSE_MAX = 500
# kernel and gap analysis must resolve large zero-mode multiplicities
DENSE_SPECTRUM_MAX = 4000
ZERO_REL = 1e-9
RESIDUAL_REL = 1e-8
GAP_TOL = 1e-9

T = TypeVar("T")
R = TypeVar("R")


class InsufficientRangeError(RuntimeError):
    """The sector scan ended before the energy lower bound certified the minimum."""


@dataclass(frozen=True)
class SolverConfig:
    dense_max: int = DENSE_MAX
    dense_spectrum_max: int = DENSE_SPECTRUM_MAX
    backend: str = "arpack"  # or "block-lanczos"
    lanczos: LanczosConfig = LanczosConfig()
    max_iter: int = 20_000


def _parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int) -> list[R]:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _fix_sign(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of every column positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _eigh_lowest(
    op: SparseSymmetricOperator, count: int, config: SolverConfig
) -> tuple[np.ndarray, np.ndarray]:
    if not 1 <= count <= op.dim:
        raise ValueError(f"count must be in [1, {op.dim}], got {count}")
    if op.dim <= config.dense_max or count >= op.dim - 1:
        w, v = scipy.linalg.eigh(op.to_dense(), subset_by_index=[0, count - 1])
        return w, _fix_sign(v)
    A = op.to_csr()
    norm = op.norm_bound()
    if config.backend == "block-lanczos":
        cfg = LanczosConfig(
            block_size=max(config.lanczos.block_size, count),
            max_basis=config.lanczos.max_basis,
            max_restarts=config.lanczos.max_restarts,
            rel_tol=RESIDUAL_REL,
            seed=config.lanczos.seed,
        )
        w, v = block_lanczos(A, count, cfg, norm_estimate=norm)
    else:
        v0 = np.random.default_rng(config.lanczos.seed).standard_normal(op.dim)
        ncv = min(op.dim, max(2 * count + 1, 40))
        try:
            w, v = eigsh(A, k=count, which="SA", v0=v0, ncv=ncv, tol=1e-13, maxiter=config.max_iter)
        except ArpackNoConvergence as exc:
            vals, vecs = exc.eigenvalues, exc.eigenvectors
            res = (
                float(np.linalg.norm(A @ vecs - vecs * vals, axis=0).max()) if len(vals) else math.inf
            )
            raise ConvergenceError("ARPACK did not converge", res) from exc
        order = np.argsort(w)
        w, v = w[order], v[:, order]
    resid = float(np.linalg.norm(A @ v - v * w, axis=0).max())
    if resid > RESIDUAL_REL * max(norm, 1e-300):
        raise ConvergenceError("eigenpair residual above tolerance", resid)
    return w, _fix_sign(v)


def lowest_eigenpairs(
    op: SparseSymmetricOperator, count: int, config: SolverConfig = SolverConfig()
) -> list[tuple[float, FockVector]]:
    """The ``count`` smallest eigenvalues with orthonormal eigenvectors.

    Dense LAPACK for ``dim <= config.dense_max``, implicitly restarted Lanczos
    (or the in-house block Lanczos) above.
    """
    w, v = _eigh_lowest(op, count, config)
    return [(float(w[i]), FockVector(op.basis_tag, v[:, i].copy())) for i in range(len(w))]


def zero_threshold(op: SparseSymmetricOperator) -> float:
    return ZERO_REL * max(1.0, op.norm_bound())


@dataclass(frozen=True)
class SectorSpectrum:
    """Lowest part of the interaction spectrum of one sector."""

    N: int
    L: int
    dim: int
    eigenvalues: np.ndarray  # ascending; the whole spectrum when complete
    kernel_dim: int
    threshold: float
    complete: bool


def _bottom_spectrum(
    op: SparseSymmetricOperator, config: SolverConfig, vectors: bool
) -> tuple[np.ndarray, np.ndarray | None, bool]:
    """Lowest eigenvalues of ``op`` including the whole zero block and at least
    one eigenvalue above the zero threshold (unless the spectrum is exhausted)."""
    if op.dim <= config.dense_spectrum_max:
        if vectors:
            w, v = scipy.linalg.eigh(op.to_dense())
            return w, _fix_sign(v), True
        return scipy.linalg.eigvalsh(op.to_dense()), None, True
    thr = zero_threshold(op)
    count = min(op.dim, 16)
    while True:
        try:
            w, v = _eigh_lowest(op, count, config)
        except ConvergenceError:
            if count >= op.dim:
                raise
            count = min(op.dim, 2 * count)
            continue
        # a margin of one nonzero eigenvalue above a complete zero block
        if int(np.sum(w < thr)) < count - 1 or count == op.dim:
            return w, v, count == op.dim
        count = min(op.dim, 2 * count)


def sector_spectrum(
    N: int, L: int, config: SolverConfig = SolverConfig(), cache_dir=None
) -> SectorSpectrum:
    """Interaction eigenvalues of sector (N, L), enough to see the kernel and the gap."""
    op = interaction_for(N, L, cache_dir)
    thr = zero_threshold(op)
    w, _, complete = _bottom_spectrum(op, config, vectors=False)
    return SectorSpectrum(N, L, op.dim, w, int(np.sum(w < thr)), thr, complete)


@dataclass(frozen=True)
class YrastPoint:
    L: int
    I_of_L: float
    gap: float
    kernel_dim: int
    dim: int


def _yrast_point(spec: SectorSpectrum) -> YrastPoint:
    w = spec.eigenvalues
    nonzero = w[w >= spec.threshold]
    gap = float(nonzero[0]) if len(nonzero) else math.nan
    lowest = 0.0 if spec.kernel_dim else float(w[0])
    return YrastPoint(spec.L, lowest, gap, spec.kernel_dim, spec.dim)


def _yrast_job(args: tuple[int, int, SolverConfig, object]) -> YrastPoint:
    N, L, config, cache_dir = args
    return _yrast_point(sector_spectrum(N, L, config, cache_dir))


def yrast_curve(
    N: int,
    L_max: int,
    *,
    workers: int = 1,
    config: SolverConfig = SolverConfig(),
    cache_dir=None,
) -> list[YrastPoint]:
    """One point per L = 0..L_max: lowest interaction energy, gap, kernel size.

    Eigenvalues below the zero threshold are reported as exactly 0.
    """
    if L_max < 0:
        raise ValueError("L_max must be >= 0")
    jobs = [(N, L, config, cache_dir) for L in range(L_max + 1)]
    return _parallel_map(_yrast_job, jobs, workers)


@dataclass(frozen=True)
class GapScan:
    gaps: list[float]
    min_gap: float
    conjecture_holds: bool
    reference_L: int
    reference_gap: float

    def __iter__(self):
        return iter((self.gaps, self.min_gap, self.conjecture_holds))


def spectral_gap_scan(
    N: int, L_max: int, *, workers: int = 1, config: SolverConfig = SolverConfig()
) -> GapScan:
    """Gaps Delta_N(L) for L = 0..L_max and whether Delta_N(L) >= Delta_N(N(N-1) - N)
    for every scanned L <= N(N-1)."""
    ref_L = max(N * (N - 1) - N, 0)
    if L_max < ref_L:
        raise ValueError(f"L_max must reach the reference sector L={ref_L}")
    points = yrast_curve(N, L_max, workers=workers, config=config)
    gaps = [p.gap for p in points]
    ref = gaps[ref_L]
    window = gaps[: min(L_max, N * (N - 1)) + 1]
    holds = all(g >= ref - GAP_TOL for g in window)
    return GapScan(gaps, float(min(window)), holds, ref_L, ref)


def kernel_vectors(N: int, L: int, config: SolverConfig = SolverConfig()) -> list[FockVector]:
    """Orthonormal basis of Ker I_N in sector (N, L)."""
    op = interaction_for(N, L)
    thr = zero_threshold(op)
    w, v, _ = _bottom_spectrum(op, config, vectors=True)
    return [FockVector((N, L), v[:, i].copy()) for i in np.flatnonzero(w < thr)]


def kernel_dimension(N: int, L: int, config: SolverConfig = SolverConfig()) -> int:
    return sector_spectrum(N, L, config).kernel_dim


def correlation_defect(v: FockVector, kernel_basis: Iterable[FockVector]) -> float:
    """Norm of the part of ``v`` orthogonal to the span of ``kernel_basis``."""
    kb = list(kernel_basis)
    if not kb:
        return float(np.linalg.norm(v.coeffs))
    K = np.stack([k.coeffs for k in kb], axis=1)
    if K.shape[0] != v.dim:
        raise ValueError(f"dimension mismatch: vector {v.dim}, kernel basis {K.shape[0]}")
    for k in kb:
        if k.basis_tag != v.basis_tag:
            raise ValueError(f"kernel vector from sector {k.basis_tag}, state from {v.basis_tag}")
    rest = v.coeffs - K @ (K.T @ v.coeffs)
    return float(np.linalg.norm(rest))


def range_defect(op: SparseSymmetricOperator, v: FockVector, rtol: float = 1e-12) -> float:
    """Norm of the part of ``v`` outside Ker(op), without computing the kernel.

    Conjugate gradients on op x = op v started at zero stay in Range(op) and
    converge to the projection of v onto it; the nonzero spectrum is bounded
    below by the gap, so the iteration is well conditioned.
    """
    A = op.to_csr()
    b = A @ v.coeffs
    if not np.any(b):
        return 0.0
    # absolute floor: A v of a kernel vector is pure rounding noise
    atol = rtol * max(1.0, op.norm_bound()) * float(np.linalg.norm(v.coeffs))
    x, info = cg(A, b, rtol=rtol, atol=atol, maxiter=10 * op.dim)
    if info > 0:
        raise ConvergenceError("CG for the correlation defect did not converge", float(np.linalg.norm(A @ x - b)))
    return float(np.linalg.norm(x))


def filling_factor(N: int, L: int) -> float:
    return math.inf if L == 0 else N * (N - 1) / (2.0 * L)


def sector_lower_bound(p: HamiltonianParams, N: int, L: int) -> float:
    """(omega + 3k) L + k L^2 / N, a lower bound on every eigenvalue of the sector."""
    return (p.omega + 3.0 * p.k) * L + p.k * L * L / N


@dataclass(frozen=True)
class GroundStateRecord:
    params: HamiltonianParams
    N: int
    L_star: int
    energy: float
    vector: FockVector
    correlation_defect: float
    filling_factor: float
    touching: tuple[int, ...] = ()
    sector_energies: dict[int, float] = field(default_factory=dict, repr=False)

    @property
    def is_tie(self) -> bool:
        return len(self.touching) > 1


def _sector_ground(args) -> tuple[int, float, np.ndarray]:
    N, L, p, config = args
    basis = enumerate_sector(N, L)
    H = assemble_hamiltonian(basis, p, interaction_for(N, L))
    w, v = _eigh_lowest(H, 1, config)
    return L, float(w[0]), v[:, 0]


def ground_state_scan(
    N: int,
    p: HamiltonianParams,
    L_max: int,
    *,
    workers: int = 1,
    config: SolverConfig = SolverConfig(),
    tie_tol: float = 1e-9,
    upper_bound: float | None = None,
) -> GroundStateRecord:
    """Global ground state of (omega+3k) L + k sum L_i^2 + g I_N over sectors 0..L_max.

    Sectors are visited in ascending L; the scan stops once the sector lower
    bound exceeds the best energy and can only grow further.  Raises
    InsufficientRangeError if that never happens within L_max.

    ``upper_bound`` is the energy of any known state (e.g. a trial state);
    sectors whose lower bound exceeds it are skipped without diagonalization.
    """
    best_E = math.inf
    energies: dict[int, float] = {}
    vectors: dict[int, np.ndarray] = {}
    # the bound is a parabola in L; it is increasing beyond its vertex
    vertex = -N * (p.omega + 3.0 * p.k) / (2.0 * p.k) if p.k > 0 else -math.inf
    certified = False
    L = 0
    chunk = max(1, workers)
    while L <= L_max and not certified:
        batch = list(range(L, min(L + chunk, L_max + 1)))
        todo = batch
        if upper_bound is not None:
            cut = upper_bound + tie_tol * max(1.0, abs(upper_bound))
            todo = [x for x in batch if sector_lower_bound(p, N, x) <= cut]
        for Lb, E, vec in _parallel_map(_sector_ground, [(N, x, p, config) for x in todo], workers):
            energies[Lb] = E
            vectors[Lb] = vec
            best_E = min(best_E, E)
        for Lb in batch:
            bound = sector_lower_bound(p, N, Lb + 1)
            if Lb + 1 >= vertex and bound > best_E + tie_tol * max(1.0, abs(best_E)):
                certified = True
                break
        L = batch[-1] + 1
    if not certified:
        raise InsufficientRangeError(
            f"L_max={L_max} insufficient: lower bound at L={L_max + 1} is "
            f"{sector_lower_bound(p, N, L_max + 1):.6g}, best energy {best_E:.6g}"
        )
    scale = tie_tol * max(1.0, abs(best_E))
    touching = tuple(sorted(Lb for Lb, E in energies.items() if E <= best_E + scale))
    L_star = touching[0]
    vec = FockVector((N, L_star), vectors[L_star])
    if vec.dim <= config.dense_spectrum_max:
        defect = correlation_defect(vec, kernel_vectors(N, L_star, config))
    else:
        defect = range_defect(interaction_for(N, L_star), vec)
    return GroundStateRecord(
        params=p,
        N=N,
        L_star=L_star,
        energy=best_E,
        vector=vec,
        correlation_defect=min(1.0, defect),
        filling_factor=filling_factor(N, L_star),
        touching=touching,
        sector_energies=dict(sorted(energies.items())),
    )
