"""Contact interaction and rotating-trap Hamiltonian on a fixed (N, L) sector.

The two-body kernel is the Bargmann-space contact operator
``delta_12 f(z1, z2) = f(w, w) / (2 pi)`` with ``w = (z1 + z2) / 2``; between
normalized orbital products it has the closed form

    <m1 m2| delta |m3 m4> = M! / (2 pi 2^M sqrt(m1! m2! m3! m4!)),  M = m1 + m2 = m3 + m4.

Operators are stored as upper-triangle coordinate triplets, which makes them
exactly symmetric, and converted to CSR for products.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from numba import njit

from .basis import Occupation, SectorBasis, enumerate_sector

DROP_TOL = 1e-14
DEFAULT_MAX_DIM = 200_000


class ResourceError(RuntimeError):
    """Requested computation exceeds a configured size limit."""


_LOGFACT = np.zeros(1)


def log_factorial(n: int) -> float:
    global _LOGFACT
    if n >= len(_LOGFACT):
        size = max(n + 1, 2 * len(_LOGFACT))
        _LOGFACT = np.concatenate(([0.0], np.cumsum(np.log(np.arange(1, size)))))
    return float(_LOGFACT[n])


def delta_matrix_element(m1: int, m2: int, m3: int, m4: int) -> float:
    """<m1, m2 | delta_12 | m3, m4> between normalized, non-symmetrized orbital products."""
    if min(m1, m2, m3, m4) < 0:
        raise ValueError("orbital indices must be non-negative")
    M = m1 + m2
    if M != m3 + m4:
        return 0.0
    log_val = (
        log_factorial(M)
        - M * math.log(2.0)
        - 0.5 * (log_factorial(m1) + log_factorial(m2) + log_factorial(m3) + log_factorial(m4))
    )
    return math.exp(log_val) / (2.0 * math.pi)


@dataclass(frozen=True)
class HamiltonianParams:
    """omega = trap minus rotation frequency, g = contact coupling, k = quartic strength."""

    omega: float
    g: float = 1.0
    k: float = 0.0

    def __post_init__(self) -> None:
        if self.g < 0:
            raise ValueError(f"coupling g must be >= 0, got {self.g}")
        if self.k < 0:
            raise ValueError(f"quartic strength k must be >= 0, got {self.k}")
        if self.omega < 0 and self.k <= 0:
            raise ValueError("omega < 0 requires k > 0 (unbounded below otherwise)")


@dataclass(frozen=True)
class SparseSymmetricOperator:
    dim: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    basis_tag: tuple[int, int]

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()))

    def to_csr(self) -> sp.csr_matrix:
        off = self.rows != self.cols
        r = np.concatenate([self.rows, self.cols[off]])
        c = np.concatenate([self.cols, self.rows[off]])
        v = np.concatenate([self.values, self.values[off]])
        return sp.csr_matrix((v, (r, c)), shape=(self.dim, self.dim))

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_csr() @ x

    def norm_bound(self) -> float:
        """Cheap upper bound on the spectral norm (max absolute row sum)."""
        if self.dim == 0:
            return 0.0
        return float(abs(self.to_csr()).sum(axis=1).max())

    def scaled(self, factor: float) -> "SparseSymmetricOperator":
        return SparseSymmetricOperator(
            self.dim, self.rows, self.cols, self.values * factor, self.basis_tag
        )

    def plus_diagonal(self, diag: np.ndarray) -> "SparseSymmetricOperator":
        idx = np.arange(self.dim)
        coo = sp.coo_matrix(
            (
                np.concatenate([self.values, diag]),
                (np.concatenate([self.rows, idx]), np.concatenate([self.cols, idx])),
            ),
            shape=(self.dim, self.dim),
        ).tocsr()
        coo.sum_duplicates()
        coo = coo.tocoo()
        return SparseSymmetricOperator(
            self.dim,
            coo.row.astype(np.int64),
            coo.col.astype(np.int64),
            coo.data,
            self.basis_tag,
        )


def _pair_table(L: int) -> dict[int, list[tuple[int, int, float]]]:
    """For every pair momentum M: unordered pairs (c, d), c <= d, with the factor
    w_cd / sqrt(c! d!) where w = 2 for c != d (both orderings) and 1 otherwise."""
    table: dict[int, list[tuple[int, int, float]]] = {}
    for M in range(L + 1):
        row = []
        for c in range(M // 2 + 1):
            d = M - c
            w = 1.0 if c == d else 2.0
            row.append((c, d, w * math.exp(-0.5 * (log_factorial(c) + log_factorial(d)))))
        table[M] = row
    return table


def _row_couplings(
    n: tuple[int, ...],
    pairs: dict[int, list[tuple[int, int, float]]],
    kernel_M: list[float],
) -> dict[tuple[int, ...], float]:
    """Nonzero matrix elements <n'| I_N |n> for one occupation n."""
    out: dict[tuple[int, ...], float] = {}
    occ = [ell for ell, c in enumerate(n) if c]
    work = list(n)
    for ia, a in enumerate(occ):
        for b in occ[ia:]:
            if a == b:
                if n[a] < 2:
                    continue
                ann = math.sqrt(n[a] * (n[a] - 1))
                wa = 1.0
            else:
                ann = math.sqrt(n[a] * n[b])
                wa = 2.0
            M = a + b
            pref = 0.5 * kernel_M[M] * wa * ann * math.exp(
                -0.5 * (log_factorial(a) + log_factorial(b))
            )
            work[a] -= 1
            work[b] -= 1
            for c, d, wcd in pairs[M]:
                if c == d:
                    cre = math.sqrt((work[c] + 1) * (work[c] + 2))
                else:
                    cre = math.sqrt((work[c] + 1) * (work[d] + 1))
                work[c] += 1
                work[d] += 1
                key = tuple(work)
                out[key] = out.get(key, 0.0) + pref * wcd * cre
                work[c] -= 1
                work[d] -= 1
            work[a] += 1
            work[b] += 1
    return out


@njit(cache=True)
def _rank_tables(N, L):
    """S[rest, s, x] = sum_{f <= min(x, rest)} P(rest - f, s, f), where P(r, s, c)
    counts partitions of r into at most s parts no larger than c."""
    P = np.zeros((L + 1, N + 1, L + 1), dtype=np.int64)
    for s in range(N + 1):
        for c in range(L + 1):
            P[0, s, c] = 1
    for r in range(1, L + 1):
        for s in range(1, N + 1):
            for c in range(1, L + 1):
                P[r, s, c] = P[r, s, c - 1]
                if c <= r:
                    P[r, s, c] += P[r - c, s - 1, c]
    S = np.zeros((L + 1, N, L + 1), dtype=np.int64)
    for rest in range(L + 1):
        for s in range(N):
            acc = 0
            for x in range(L + 1):
                if x <= rest:
                    acc += P[rest - x, s, x]
                S[rest, s, x] = acc
    return S


@njit(cache=True)
def _rank(work, N, L, S):
    """Position of an occupation in the lexicographically decreasing enumeration."""
    r = 0
    rest = L
    cap = L
    i = 0
    for ell in range(L, -1, -1):
        for _ in range(work[ell]):
            hi = min(rest, cap)
            r += S[rest, N - i - 1, hi] - S[rest, N - i - 1, ell]
            rest -= ell
            cap = ell
            i += 1
    return r


@njit(cache=True)
def _triplets(occ, N, L, lf, kernel_M, S, fill, rows, cols, vals):
    """Upper-triangle contributions of 1/2 sum V a+ a+ a a, one per (row, pair, pair).

    With fill=False only counts them.  Duplicates are summed later.
    """
    dim = occ.shape[0]
    count = 0
    work = np.zeros(L + 1, dtype=np.int64)
    held = np.zeros(N, dtype=np.int64)
    for j in range(dim):
        nocc = 0
        for ell in range(L + 1):
            work[ell] = occ[j, ell]
            if work[ell] > 0:
                held[nocc] = ell
                nocc += 1
        for ia in range(nocc):
            a = held[ia]
            for ib in range(ia, nocc):
                b = held[ib]
                if a == b:
                    if occ[j, a] < 2:
                        continue
                    ann = math.sqrt(occ[j, a] * (occ[j, a] - 1.0))
                    wa = 1.0
                else:
                    ann = math.sqrt(occ[j, a] * 1.0 * occ[j, b])
                    wa = 2.0
                M = a + b
                pref = 0.5 * kernel_M[M] * wa * ann * math.exp(-0.5 * (lf[a] + lf[b]))
                work[a] -= 1
                work[b] -= 1
                for c in range(M // 2 + 1):
                    d = M - c
                    if c == d:
                        wcd = 1.0
                        cre = math.sqrt((work[c] + 1.0) * (work[c] + 2.0))
                    else:
                        wcd = 2.0
                        cre = math.sqrt((work[c] + 1.0) * (work[d] + 1.0))
                    work[c] += 1
                    work[d] += 1
                    i = _rank(work, N, L, S)
                    if i <= j:
                        if fill:
                            rows[count] = i
                            cols[count] = j
                            vals[count] = pref * wcd * math.exp(-0.5 * (lf[c] + lf[d])) * cre
                        count += 1
                    work[c] -= 1
                    work[d] -= 1
                work[a] += 1
                work[b] += 1
    return count


def assemble_interaction(
    basis: SectorBasis, max_dim: int = DEFAULT_MAX_DIM
) -> SparseSymmetricOperator:
    """Matrix of I_N = sum_{i<j} delta_ij, i.e. 1/2 sum V a+ a+ a a, in the sector."""
    if basis.dim > max_dim:
        raise ResourceError(f"sector dimension {basis.dim} exceeds max_dim={max_dim}")
    N, L = basis.N, basis.L
    occ = np.array([s.n for s in basis.states], dtype=np.int64).reshape(basis.dim, L + 1)
    log_factorial(L + 1)
    lf = _LOGFACT[: L + 2].copy()
    # M! / (2 pi 2^M); the sqrt(m!) factors of the four orbitals are applied per term
    kernel_M = np.exp(lf[: L + 1] - np.arange(L + 1) * math.log(2.0)) / (2.0 * math.pi)
    S = _rank_tables(N, L)
    empty_i = np.zeros(0, dtype=np.int64)
    count = _triplets(occ, N, L, lf, kernel_M, S, False, empty_i, empty_i, np.zeros(0))
    rows = np.empty(count, dtype=np.int64)
    cols = np.empty(count, dtype=np.int64)
    vals = np.empty(count)
    _triplets(occ, N, L, lf, kernel_M, S, True, rows, cols, vals)
    coo = sp.coo_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim))
    coo.sum_duplicates()  # also sorts by (row, col)
    keep = np.abs(coo.data) >= DROP_TOL
    return SparseSymmetricOperator(
        basis.dim,
        coo.row[keep].astype(np.int64),
        coo.col[keep].astype(np.int64),
        coo.data[keep],
        basis.tag,
    )


def reference_interaction(basis: SectorBasis) -> SparseSymmetricOperator:
    """Pure-Python assembly through occupation dictionaries (slow cross-check)."""
    L = basis.L
    pairs = _pair_table(L)
    kernel_M = [
        math.exp(log_factorial(M) - M * math.log(2.0)) / (2.0 * math.pi) for M in range(L + 1)
    ]
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for j, state in enumerate(basis.states):
        for key, val in _row_couplings(state.n, pairs, kernel_M).items():
            i = basis.index[Occupation(key)]
            if i <= j and abs(val) >= DROP_TOL:
                rows.append(i)
                cols.append(j)
                vals.append(val)
    order = np.lexsort((np.asarray(cols), np.asarray(rows)))
    return SparseSymmetricOperator(
        basis.dim,
        np.asarray(rows, dtype=np.int64)[order],
        np.asarray(cols, dtype=np.int64)[order],
        np.asarray(vals, dtype=float)[order],
        basis.tag,
    )


def angular_momentum_squares(basis: SectorBasis) -> np.ndarray:
    """Diagonal of sum_i L_(i)^2, i.e. sum_l l^2 n[l] per basis state."""
    return np.array(
        [sum(ell * ell * c for ell, c in enumerate(s.n)) for s in basis.states], dtype=float
    )


def assemble_hamiltonian(
    basis: SectorBasis,
    p: HamiltonianParams,
    interaction: SparseSymmetricOperator | None = None,
) -> SparseSymmetricOperator:
    """(omega + 3k) L_N + k sum_i L_(i)^2 + g I_N restricted to the sector."""
    if interaction is None:
        interaction = assemble_interaction(basis)
    diag = (p.omega + 3.0 * p.k) * basis.L + p.k * angular_momentum_squares(basis)
    return interaction.scaled(p.g).plus_diagonal(diag)


def interaction_for(N: int, L: int, cache_dir: str | Path | None = None) -> SparseSymmetricOperator:
    """Assemble I_N for (N, L), going through the on-disk cache when one is given."""
    if cache_dir is None:
        return assemble_interaction(enumerate_sector(N, L))
    path = Path(cache_dir) / cache_filename(N, L)
    if path.exists():
        return load_operator(path, (N, L))
    op = assemble_interaction(enumerate_sector(N, L))
    path.parent.mkdir(parents=True, exist_ok=True)
    save_operator(op, path)
    return op


# -- binary cache -----------------------------------------------------------
#
# little-endian layout:
#   uint64 dim
#   uint64 count
#   count records of (int64 row, int64 col, float64 value), row <= col

_TRIPLET = np.dtype([("row", "<i8"), ("col", "<i8"), ("value", "<f8")])


def cache_filename(N: int, L: int) -> str:
    return f"interaction_N{N}_L{L}.bin"


def save_operator(op: SparseSymmetricOperator, path: str | Path) -> None:
    rec = np.empty(len(op.values), dtype=_TRIPLET)
    rec["row"] = op.rows
    rec["col"] = op.cols
    rec["value"] = op.values
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", op.dim, len(rec)))
        fh.write(rec.tobytes())


def load_operator(path: str | Path, basis_tag: tuple[int, int]) -> SparseSymmetricOperator:
    with open(path, "rb") as fh:
        dim, count = struct.unpack("<QQ", fh.read(16))
        rec = np.frombuffer(fh.read(count * _TRIPLET.itemsize), dtype=_TRIPLET)
    if len(rec) != count:
        raise ValueError(f"truncated operator cache {path}")
    return SparseSymmetricOperator(
        int(dim),
        rec["row"].astype(np.int64),
        rec["col"].astype(np.int64),
        rec["value"].astype(float),
        basis_tag,
    )
