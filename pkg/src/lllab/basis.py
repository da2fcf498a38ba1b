"""Bosonic many-body basis of the lowest Landau level at fixed (N, L).

A basis vector is an occupation of the orbitals phi_l(z) = z^l / sqrt(pi l!),
equivalently a partition of L into at most N parts.  States are stored in
lexicographically decreasing order of their partitions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np


class SectorError(ValueError):
    """Occupation does not belong to the requested (N, L) sector."""


def _check_sector(N: int, L: int) -> None:
    if int(N) != N or int(L) != L:
        raise ValueError(f"N and L must be integers, got N={N!r}, L={L!r}")
    if N < 1:
        raise ValueError(f"particle number must be >= 1, got N={N}")
    if L < 0:
        raise ValueError(f"angular momentum must be >= 0, got L={L}")


@dataclass(frozen=True)
class Occupation:
    """Occupation numbers ``n[l]`` of orbitals ``l = 0 .. len(n) - 1``."""

    n: tuple[int, ...]

    def __post_init__(self) -> None:
        if any(x < 0 for x in self.n):
            raise ValueError(f"negative occupation in {self.n}")

    @classmethod
    def from_partition(cls, parts: Sequence[int], L: int | None = None) -> "Occupation":
        """Build from the orbital index of every particle (zeros allowed)."""
        size = (max(parts) if parts else 0) + 1
        if L is not None:
            size = max(size, L + 1)
        n = [0] * size
        for p in parts:
            n[p] += 1
        return cls(tuple(n))

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[int, int]], L: int) -> "Occupation":
        n = [0] * (L + 1)
        for ell, count in pairs:
            n[ell] += count
        return cls(tuple(n))

    @property
    def N(self) -> int:
        return sum(self.n)

    @property
    def L(self) -> int:
        return sum(ell * c for ell, c in enumerate(self.n))

    def pairs(self) -> tuple[tuple[int, int], ...]:
        """Sparse (l, n[l]) pairs of occupied orbitals."""
        return tuple((ell, c) for ell, c in enumerate(self.n) if c)

    def partition(self) -> tuple[int, ...]:
        """Orbital indices of all particles, decreasing."""
        out: list[int] = []
        for ell in range(len(self.n) - 1, -1, -1):
            out.extend([ell] * self.n[ell])
        return tuple(out)

    def padded(self, length: int) -> "Occupation":
        if length < len(self.n):
            if any(self.n[length:]):
                raise SectorError(f"occupation {self.n} does not fit in {length} orbitals")
            return Occupation(self.n[:length])
        return Occupation(self.n + (0,) * (length - len(self.n)))


def partitions(L: int, max_parts: int, max_part: int | None = None) -> Iterator[tuple[int, ...]]:
    """Partitions of L into at most ``max_parts`` parts, lexicographically decreasing.

    Each partition is returned as a decreasing tuple of length ``max_parts``
    padded with zeros.
    """
    if max_part is None:
        max_part = L

    def rec(rest: int, slots: int, cap: int) -> Iterator[tuple[int, ...]]:
        if slots == 0:
            if rest == 0:
                yield ()
            return
        # the largest part must be at least ceil(rest / slots)
        lo = -(-rest // slots)
        for first in range(min(rest, cap), lo - 1, -1):
            for tail in rec(rest - first, slots - 1, first):
                yield (first,) + tail

    yield from rec(L, max_parts, max_part)


@lru_cache(maxsize=None)
def sector_dimension(N: int, L: int) -> int:
    """Number of partitions of L into at most N parts (DP, no enumeration)."""
    _check_sector(N, L)
    # parts of size <= N  <->  at most N parts (conjugation)
    table = [1] + [0] * L
    for part in range(1, N + 1):
        for total in range(part, L + 1):
            table[total] += table[total - part]
    return table[L]


@dataclass(frozen=True)
class SectorBasis:
    N: int
    L: int
    states: tuple[Occupation, ...]
    index: dict[Occupation, int] = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def tag(self) -> tuple[int, int]:
        return (self.N, self.L)

    def state_at(self, p: int) -> Occupation:
        return self.states[p]

    def index_of(self, occ: Occupation) -> int:
        return index_of(self, occ)


@lru_cache(maxsize=64)
def enumerate_sector(N: int, L: int) -> SectorBasis:
    """All occupations with N particles and total angular momentum L."""
    _check_sector(N, L)
    states = tuple(Occupation.from_partition(p, L) for p in partitions(L, N))
    index = {s: i for i, s in enumerate(states)}
    return SectorBasis(N, L, states, index)


def index_of(basis: SectorBasis, occ: Occupation) -> int:
    if occ.N != basis.N or occ.L != basis.L:
        raise SectorError(
            f"occupation with N={occ.N}, L={occ.L} is not in sector N={basis.N}, L={basis.L}"
        )
    return basis.index[occ.padded(basis.L + 1)]


@dataclass(frozen=True)
class FockVector:
    """Real amplitudes over the states of the (N, L) sector, in enumeration order."""

    basis_tag: tuple[int, int]
    coeffs: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.coeffs)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def normalized(self) -> "FockVector":
        nrm = self.norm()
        if nrm == 0.0:
            raise ValueError("zero vector cannot be normalized")
        return FockVector(self.basis_tag, self.coeffs / nrm)

    def overlap(self, other: "FockVector") -> float:
        if other.basis_tag != self.basis_tag:
            raise SectorError(f"sectors differ: {self.basis_tag} vs {other.basis_tag}")
        return float(self.coeffs @ other.coeffs)

    def expectation(self, matrix) -> float:
        return float(self.coeffs @ (matrix @ self.coeffs))
