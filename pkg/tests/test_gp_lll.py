import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq, minimize

from lllab.gp_lll import (
    ABRIKOSOV,
    GPState,
    IllConditionedRootsWarning,
    compare_gp_exact,
    contact_kernel,
    energy_and_gradient,
    gp_energy,
    minimize_gp,
    quartic_form,
    tf_functional,
    tf_profile_and_energy,
    vortex_zeros,
)
from lllab.operators import delta_matrix_element


def random_state(rng, l_max):
    c = rng.standard_normal(l_max + 1) + 1j * rng.standard_normal(l_max + 1)
    return c / np.linalg.norm(c)


def quadrature_quartic(c, n_r=160, n_theta=96, r_max=9.0):
    """int |phi|^4 exp(-2|z|^2) d^2z in polar coordinates.

    Gauss-Legendre in r; the periodic trapezoid rule in theta is exact for
    the trigonometric polynomial |phi|^4 once n_theta exceeds its degree.
    """
    x, w = np.polynomial.legendre.leggauss(n_r)
    r = 0.5 * r_max * (x + 1)
    wr = 0.5 * r_max * w
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    z = r[:, None] * np.exp(1j * theta[None, :])
    s = GPState(c / np.linalg.norm(c))
    phi = s.wavefunction(z) * np.linalg.norm(c)
    integrand = np.abs(phi) ** 4 * np.exp(-2 * r[:, None] ** 2)
    return float(np.sum(wr * r * integrand.mean(axis=1)) * 2 * np.pi)


def test_kernel_reproduces_the_contact_matrix_elements():
    K = contact_kernel(8)
    for m1 in range(5):
        for m2 in range(5):
            for m3 in range(m1 + m2 + 1):
                m4 = m1 + m2 - m3
                assert K[m1, m2] * K[m3, m4] == pytest.approx(delta_matrix_element(m1, m2, m3, m4), rel=1e-13)


def test_energy_examples():
    Ng, omega = 3.0, 0.7
    assert gp_energy(np.array([1.0, 0, 0]), omega, Ng) == pytest.approx(Ng / (4 * math.pi), rel=1e-14)
    assert gp_energy(np.array([0, 1.0, 0]), omega, Ng) == pytest.approx(omega + Ng / (8 * math.pi), rel=1e-14)


def test_energy_requires_unit_norm():
    with pytest.raises(ValueError):
        gp_energy(np.array([1.0, 1.0]), 1.0, 1.0)
    with pytest.raises(ValueError):
        GPState(np.array([0.5, 0.0]))


def test_quartic_form_matches_quadrature():
    rng = np.random.default_rng(2024)
    for _ in range(5):
        c = random_state(rng, 6)
        assert quartic_form(c) == pytest.approx(quadrature_quartic(c), rel=1e-8, abs=1e-12)


def test_quartic_form_matches_quartic_sum():
    rng = np.random.default_rng(7)
    c = random_state(rng, 5)
    total = 0.0
    for m1 in range(6):
        for m2 in range(6):
            for m3 in range(6):
                m4 = m1 + m2 - m3
                if 0 <= m4 <= 5:
                    total += (np.conj(c[m1] * c[m2]) * c[m3] * c[m4] * delta_matrix_element(m1, m2, m3, m4)).real
    assert quartic_form(c) == pytest.approx(total, rel=1e-13)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    omega, Ng = 0.4, 12.0
    h = 1e-6
    for _ in range(5):
        c = random_state(rng, 8)
        _, grad = energy_and_gradient(c, omega, Ng)
        fd = np.zeros_like(c)
        for a in range(len(c)):
            for unit, part in ((1.0, 1.0), (1j, 1j)):
                e = np.zeros_like(c)
                e[a] = unit
                dp = energy_and_gradient(c + h * e, omega, Ng)[0]
                dm = energy_and_gradient(c - h * e, omega, Ng)[0]
                fd[a] += part * (dp - dm) / (2 * h)
        assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(grad)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 2 * math.pi), st.integers(1, 12))
def test_phase_invariance_and_positivity(seed, alpha, l_max):
    c = random_state(np.random.default_rng(seed), l_max)
    E = gp_energy(c, 0.3, 5.0)
    assert gp_energy(np.exp(1j * alpha) * c, 0.3, 5.0) == pytest.approx(E, rel=1e-13)
    assert quartic_form(c) >= 0.0


def test_minimizer_keeps_unit_norm_and_converges():
    s = minimize_gp(0.3, 10.0, l_max=16, restarts=4)
    assert abs(np.vdot(s.coeffs, s.coeffs).real - 1.0) < 1e-12
    assert s.grad_norm < 1e-6
    assert s.energy == pytest.approx(gp_energy(s, 0.3, 10.0), rel=1e-14)


def test_weak_coupling_minimizer_is_the_lowest_orbital():
    omega, Ng = 1.0, 0.5
    s = minimize_gp(omega, Ng, l_max=8, restarts=4)
    assert abs(s.coeffs[0]) ** 2 > 1 - 1e-10
    assert s.energy == pytest.approx(Ng / (4 * math.pi), abs=1e-10)

    # brute force over the l <= 2 subspace from many starts
    def f(x):
        c = x[:3] + 1j * x[3:]
        return gp_energy(c / np.linalg.norm(c), omega, Ng)

    rng = np.random.default_rng(0)
    best = min(minimize(f, rng.standard_normal(6), method="Nelder-Mead", options=dict(xatol=1e-10, fatol=1e-14, maxiter=20000)).fun for _ in range(10))
    assert best == pytest.approx(s.energy, abs=1e-9)


def test_restart_count_only_lowers_the_energy():
    a = minimize_gp(0.1, 30.0, l_max=24, restarts=1, seed=5)
    b = minimize_gp(0.1, 30.0, l_max=24, restarts=8, seed=5)
    assert b.energy <= a.energy + 1e-12


def test_slow_rotation_approaches_thomas_fermi():
    omega, Ng = 0.05, 100.0
    s = minimize_gp(omega, Ng)
    _, E_tf = tf_profile_and_energy(omega, Ng)
    assert abs(s.energy / E_tf - 1.0) < 0.10


@pytest.mark.parametrize("omega", [0.01, 0.1, 1.0])
@pytest.mark.parametrize("Ng", [5.0, 50.0, 500.0])
def test_thomas_fermi_lambda_from_normalization(omega, Ng):
    def mass(lam):
        # int (lam - omega r^2)_+ / (Ng e) d^2x = pi lam^2 / (2 omega Ng e)
        R2 = lam / omega
        return 2 * math.pi * (lam * R2 / 2 - omega * R2**2 / 4) / (Ng * ABRIKOSOV)

    lam_root = brentq(lambda x: mass(x) - 1.0, 1e-12, 1e6, xtol=1e-15, rtol=1e-15)
    prof, E = tf_profile_and_energy(omega, Ng)
    assert prof.lam == pytest.approx(lam_root, rel=1e-8)
    r = np.linspace(0, prof.radius, 200_001)
    assert np.trapezoid(2 * math.pi * r * prof.density(r), r) == pytest.approx(1.0, abs=1e-8)
    assert tf_functional(prof) == pytest.approx(E, rel=1e-6, abs=1e-8)


def test_thomas_fermi_input_validation():
    with pytest.raises(ValueError):
        tf_profile_and_energy(0.0, 1.0)


def test_zero_of_pure_first_orbital():
    z = vortex_zeros(GPState(np.array([0, 1.0, 0])))
    assert z.bulk_count == 1
    assert abs(z.roots[0]) < 1e-15


def test_small_quadratic_term_gives_two_far_roots():
    eps = 1e-4
    c = np.array([1.0, 0.0, eps])
    c = c / np.linalg.norm(c)
    z = vortex_zeros(GPState(c), radius=3.0)
    # 1 + eps z^2 / sqrt(2) = 0  =>  |z|^2 = sqrt(2) / eps
    assert len(z.roots) == 2
    assert np.allclose(np.abs(z.roots) ** 2, math.sqrt(2) / eps, rtol=1e-8)
    assert z.bulk_count == 0


def test_degree_zero_polynomial_rejected():
    with pytest.raises(ValueError):
        vortex_zeros(GPState(np.array([1.0, 0.0])))


def test_tiny_leading_coefficient_warns():
    c = np.array([1.0, 0.0, 1e-14])
    with pytest.warns(IllConditionedRootsWarning):
        vortex_zeros(GPState(c / np.linalg.norm(c)))


def test_bulk_vortex_density_trend():
    # zeros inside the TF radius approach the density 1/pi of a uniform lattice
    ratios = []
    for omega, Ng in [(0.1, 50.0), (0.05, 100.0), (0.02, 200.0)]:
        s = minimize_gp(omega, Ng)
        prof, _ = tf_profile_and_energy(omega, Ng)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IllConditionedRootsWarning)
            z = vortex_zeros(s, radius=prof.radius)
        ratios.append(z.bulk_count / prof.radius**2)
    assert ratios[0] < ratios[1] < ratios[2] <= 1.1


def test_comparison_without_interaction():
    cmp = compare_gp_exact(3, 0.5, 0.0)
    assert cmp.E_GP == 0.0 and cmp.E_exact == 0.0 and cmp.L_star == 0


def test_gp_energy_is_an_upper_bound_for_four_particles():
    for omega in np.geomspace(0.01, 3.0, 5):
        cmp = compare_gp_exact(4, float(omega), 1.0)
        assert cmp.E_GP >= cmp.E_exact - 1e-8


def test_comparison_input_validation():
    with pytest.raises(ValueError):
        compare_gp_exact(7, 1.0, 1.0)
    with pytest.raises(ValueError):
        compare_gp_exact(3, 0.0, 1.0)
