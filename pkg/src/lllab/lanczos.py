"""Block Lanczos with full reorthogonalization and thick restarts.

Used for sectors too large for dense diagonalization.  The Krylov basis is
kept explicitly and orthogonalized twice against all previous vectors, so
Rayleigh-Ritz on ``V^T A V`` is stable; the block size bounds the eigenvalue
multiplicity that can be resolved.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (achieved residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class LanczosConfig:
    block_size: int = 4
    max_basis: int = 400
    max_restarts: int = 60
    rel_tol: float = 1e-8
    seed: int = 12345


def _orthonormalize_against(W: np.ndarray, V: np.ndarray | None, rng) -> np.ndarray:
    """Orthogonalize the columns of W against V (twice) and among themselves.
    Columns that collapse are replaced by fresh random directions."""
    for _ in range(2):
        if V is not None and V.shape[1]:
            W = W - V @ (V.T @ W)
    Q, R = np.linalg.qr(W)
    scale = np.abs(np.diag(R))
    ref = max(scale.max(initial=0.0), 1.0)
    bad = scale < 1e-10 * ref
    if bad.any():
        fresh = rng.standard_normal((W.shape[0], int(bad.sum())))
        for _ in range(2):
            if V is not None and V.shape[1]:
                fresh = fresh - V @ (V.T @ fresh)
            good = Q[:, ~bad]
            fresh = fresh - good @ (good.T @ fresh)
        fq, _ = np.linalg.qr(fresh)
        Q = np.concatenate([Q[:, ~bad], fq], axis=1)
    return Q


def block_lanczos(
    A: sp.spmatrix | np.ndarray,
    count: int,
    config: LanczosConfig = LanczosConfig(),
    norm_estimate: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """The ``count`` smallest eigenpairs of symmetric ``A``.

    Returns eigenvalues (ascending) and eigenvectors as columns.
    Raises ConvergenceError if the residual criterion
    ``||A v - lambda v|| <= rel_tol * ||A||`` is not met.
    """
    n = A.shape[0]
    if not 1 <= count <= n:
        raise ValueError(f"count must be in [1, {n}], got {count}")
    rng = np.random.default_rng(config.seed)
    block = max(config.block_size, count)
    max_basis = min(n, max(config.max_basis, 3 * block + count))
    if norm_estimate is None:
        norm_estimate = float(abs(A).sum(axis=1).max()) if n else 0.0
    threshold = config.rel_tol * max(norm_estimate, 1e-300)

    V = _orthonormalize_against(rng.standard_normal((n, block)), None, rng)
    AV = A @ V
    last = block
    worst = np.inf
    for _ in range(config.max_restarts + 1):
        while V.shape[1] < max_basis:
            W = AV[:, -last:][:, : max_basis - V.shape[1]]
            Qn = _orthonormalize_against(W, V, rng)
            V = np.concatenate([V, Qn], axis=1)
            AV = np.concatenate([AV, A @ Qn], axis=1)
            last = Qn.shape[1]
        T = V.T @ AV
        theta, Y = np.linalg.eigh(0.5 * (T + T.T))
        ritz = V @ Y[:, :count]
        resid = AV @ Y[:, :count] - ritz * theta[:count]
        worst = float(np.linalg.norm(resid, axis=0).max())
        # a basis spanning the whole space makes the Ritz pairs exact up to rounding
        if worst <= threshold or V.shape[1] >= n:
            return theta[:count], ritz
        # thick restart: keep the lower half of the Ritz space, continue from
        # the residual block of the wanted pairs
        keep = max(count + block, max_basis // 2)
        V = V @ Y[:, :keep]
        AV = AV @ Y[:, :keep]
        R = AV[:, :block] - V[:, :block] * theta[:block]
        Qn = _orthonormalize_against(R, V, rng)
        V = np.concatenate([V, Qn], axis=1)
        AV = np.concatenate([AV, A @ Qn], axis=1)
        last = Qn.shape[1]
    raise ConvergenceError(
        f"block Lanczos did not converge for {count} eigenpairs of a {n}x{n} matrix", worst
    )
