import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lllab.basis import Occupation, enumerate_sector
from lllab.operators import (
    HamiltonianParams,
    ResourceError,
    angular_momentum_squares,
    assemble_hamiltonian,
    assemble_interaction,
    cache_filename,
    delta_matrix_element,
    interaction_for,
    load_operator,
    reference_interaction,
    save_operator,
)


def binomial_oracle_squared(m1, m2, m3, m4) -> Fraction:
    """(2 pi <m1 m2|delta|m3 m4>)^2 from the binomial expansion of ((z1 + z2)/2)^M.

    delta phi_m3(z1) phi_m4(z2) = (2 pi)^-1 w^M / (pi sqrt(m3! m4!)), w = (z1 + z2)/2,
    and <z^a, z^b> = pi a! delta_ab, so only the z1^m1 z2^m2 term survives.
    """
    M = m1 + m2
    coeff = Fraction(math.comb(M, m1), 2**M)
    return coeff**2 * Fraction(math.factorial(m1) * math.factorial(m2), math.factorial(m3) * math.factorial(m4))


def test_closed_form_matches_binomial_oracle_for_small_momenta():
    for M in range(9):
        for m1 in range(M + 1):
            for m3 in range(M + 1):
                m2, m4 = M - m1, M - m3
                exact_sq = binomial_oracle_squared(m1, m2, m3, m4)
                closed_sq = Fraction(math.factorial(M) ** 2, 4**M) / Fraction(
                    math.factorial(m1) * math.factorial(m2) * math.factorial(m3) * math.factorial(m4)
                )
                assert exact_sq == closed_sq
                val = 2 * math.pi * delta_matrix_element(m1, m2, m3, m4)
                assert abs(val - math.sqrt(exact_sq)) <= 1e-14 * math.sqrt(exact_sq)


def test_delta_examples():
    assert delta_matrix_element(0, 0, 0, 0) == pytest.approx(1 / (2 * math.pi), rel=1e-15)
    assert delta_matrix_element(1, 0, 1, 0) == pytest.approx(1 / (4 * math.pi), rel=1e-15)
    assert delta_matrix_element(1, 0, 0, 0) == 0.0


def test_delta_mixed_pair_follows_closed_form():
    # 2! / (2 pi 4 sqrt(2)); the sum over both orderings of (2, 0) would be twice this
    assert delta_matrix_element(2, 0, 1, 1) == pytest.approx(1 / (4 * math.sqrt(2) * math.pi), rel=1e-14)
    both = delta_matrix_element(2, 0, 1, 1) + delta_matrix_element(0, 2, 1, 1)
    assert both == pytest.approx(1 / (2 * math.sqrt(2) * math.pi), rel=1e-14)


def test_delta_rejects_negative_indices():
    with pytest.raises(ValueError):
        delta_matrix_element(-1, 1, 0, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 30), st.integers(0, 30), st.integers(0, 60))
def test_delta_symmetries(a, b, c):
    M = a + b
    c = c % (M + 1)
    d = M - c
    v = delta_matrix_element(a, b, c, d)
    assert v == delta_matrix_element(b, a, c, d)
    assert v == pytest.approx(delta_matrix_element(c, d, a, b), rel=1e-14)
    assert v > 0


def test_four_particles_at_zero_momentum():
    op = assemble_interaction(enumerate_sector(4, 0))
    assert op.dim == 1
    assert op.to_dense()[0, 0] == pytest.approx(3 / math.pi, rel=1e-14)


@pytest.mark.parametrize("N", range(2, 8))
def test_condensate_expectation(N):
    op = assemble_interaction(enumerate_sector(N, 0))
    assert abs(op.to_dense()[0, 0] - N * (N - 1) / (4 * math.pi)) < 1e-12


@pytest.mark.parametrize("L", range(0, 11))
def test_two_particle_spectrum_is_rank_one(L):
    w = np.linalg.eigvalsh(assemble_interaction(enumerate_sector(2, L)).to_dense())
    assert abs(w[-1] - 1 / (2 * math.pi)) < 1e-12
    assert np.all(np.abs(w[:-1]) < 1e-12)


def test_laughlin_zero_mode_three_particles():
    w = np.linalg.eigvalsh(assemble_interaction(enumerate_sector(3, 6)).to_dense())
    assert abs(w[0]) < 1e-12


@pytest.mark.parametrize("N,L", [(3, 5), (4, 9), (5, 12), (6, 14), (3, 20)])
def test_symmetric_and_positive_semidefinite(N, L):
    op = assemble_interaction(enumerate_sector(N, L))
    A = op.to_dense()
    assert np.all(op.rows <= op.cols)
    assert np.max(np.abs(A - A.T)) == 0.0
    assert np.linalg.eigvalsh(A)[0] >= -1e-10


@pytest.mark.parametrize("N,L", [(2, 6), (3, 9), (4, 12), (5, 15), (6, 18)])
def test_compiled_assembly_matches_reference(N, L):
    b = enumerate_sector(N, L)
    A = assemble_interaction(b).to_dense()
    B = reference_interaction(b).to_dense()
    assert np.max(np.abs(A - B)) < 1e-14


def test_interaction_conserves_particle_number_pairwise():
    # applying I to a single occupation only produces states of the same sector
    b = enumerate_sector(4, 7)
    op = assemble_interaction(b)
    assert op.rows.max() < b.dim and op.cols.max() < b.dim


def test_resource_limit():
    with pytest.raises(ResourceError):
        assemble_interaction(enumerate_sector(4, 20), max_dim=10)


def test_hamiltonian_without_interaction_or_quartic_term():
    b = enumerate_sector(3, 5)
    H = assemble_hamiltonian(b, HamiltonianParams(omega=0.7, g=0.0, k=0.0)).to_dense()
    assert np.allclose(H, 0.7 * 5 * np.eye(b.dim), atol=0, rtol=1e-15)


def test_hamiltonian_diagonal_example():
    b = enumerate_sector(2, 2)
    omega, k = 0.3, 0.2
    H = assemble_hamiltonian(b, HamiltonianParams(omega=omega, g=0.0, k=k)).to_dense()
    i = b.index_of(Occupation((1, 0, 1)))
    assert H[i, i] == pytest.approx((omega + 3 * k) * 2 + k * 4, rel=1e-15)
    assert angular_momentum_squares(b)[i] == 4


def test_hamiltonian_shift_at_zero_quartic():
    b = enumerate_sector(4, 8)
    g, omega = 1.7, 0.4
    H = assemble_hamiltonian(b, HamiltonianParams(omega=omega, g=g, k=0.0)).to_dense()
    I = assemble_interaction(b).to_dense()
    assert np.allclose(np.linalg.eigvalsh(H), omega * 8 + g * np.linalg.eigvalsh(I), atol=1e-12)


@pytest.mark.parametrize(
    "kwargs", [dict(omega=1.0, g=-1.0), dict(omega=1.0, k=-0.1), dict(omega=-0.5, k=0.0)]
)
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        HamiltonianParams(**kwargs)


def test_negative_omega_allowed_with_quartic_term():
    HamiltonianParams(omega=-3.0, g=1.0, k=0.1)


def test_cache_round_trip_is_bit_identical(tmp_path):
    op = assemble_interaction(enumerate_sector(5, 14))
    path = tmp_path / cache_filename(5, 14)
    save_operator(op, path)
    back = load_operator(path, (5, 14))
    assert back.dim == op.dim
    assert back.rows.tobytes() == op.rows.tobytes()
    assert back.cols.tobytes() == op.cols.tobytes()
    assert back.values.tobytes() == op.values.tobytes()
    # the layout is two little-endian uint64 followed by 24-byte records
    assert path.stat().st_size == 16 + 24 * len(op.values)


def test_cached_assembly_reuses_file(tmp_path):
    a = interaction_for(4, 10, tmp_path)
    assert (tmp_path / cache_filename(4, 10)).exists()
    b = interaction_for(4, 10, tmp_path)
    assert a.values.tobytes() == b.values.tobytes()


def test_truncated_cache_rejected(tmp_path):
    op = assemble_interaction(enumerate_sector(3, 6))
    path = tmp_path / "x.bin"
    save_operator(op, path)
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(ValueError):
        load_operator(path, (3, 6))
