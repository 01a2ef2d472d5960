from itertools import product
from math import cos, pi, sin, sqrt

import numpy as np
import pytest

from gapcert.chain import build_full_chain, build_segment
from gapcert.errors import DomainError
from gapcert.models import teleport as T
from gapcert.operators import null_basis, opnorm, restrict
from gapcert.renorm import kernel_z_and_gtilde, renormalized_coupling


def test_bell_and_measure_spectra():
    assert np.allclose(np.linalg.eigvalsh(T.h_bell()), [0] * 6 + [1] * 3, atol=1e-12)
    # five orthonormal rank-1 projectors
    for theta in (0.0, 0.3, 1.2):
        ev = np.linalg.eigvalsh(T.h_measure(theta))
        assert np.allclose(ev, [0] * 4 + [1] * 5, atol=1e-12)


def test_measure_theta0_keeps_bell_pair():
    # with sin = 0 the Bell pair on levels 0, 1 is annihilated
    phi = np.zeros(9)
    phi[0] = phi[4] = 1 / sqrt(2)
    assert np.linalg.norm(T.h_measure(0.0) @ phi) <= 1e-14


def test_theta_range():
    with pytest.raises(DomainError):
        T.teleport_spec(pi / 2)
    with pytest.raises(DomainError):
        T.teleport_spec(-0.1)


def test_m_annihilation():
    for theta in (0.0, 0.4, 1.1, 1.5):
        assert np.max(np.abs(T.h_measure(theta) @ T.m_map(theta))) <= 1e-12
    # exact spot check at theta = 0: M is the projector onto levels {0, 1}^2
    p = np.diag([1.0, 1.0, 0.0])
    assert np.array_equal(T.m_map(0.0), np.kron(p, p))


def test_overlaps_closed_form():
    assert T.teleport_overlaps(1, 0.9) == (0.0, 1.0)
    for ell_bar in (2, 5, 9):
        assert T.teleport_overlaps(ell_bar, 0.0) == (1.0, 0.0)
    # theta = pi/3: cos^2 = 1/4, sin^2/4 = 3/16
    assert T.teleport_overlaps(2, pi / 3) == pytest.approx((0.25, 0.1875), abs=1e-12)


@pytest.mark.parametrize("m,theta", [(1, 0.7), (2, 0.7), (2, pi / 3), (3, 1.2)])
def test_gram_pattern(m, theta):
    p = {ab: T.psi_ab(m, *ab, theta) for ab in product((0, 1), repeat=2)}
    alpha, beta = T.teleport_overlaps(m + 1, theta)
    assert p[0, 0] @ p[0, 0] == pytest.approx(alpha + 2 * beta, abs=1e-12)
    assert p[1, 1] @ p[1, 1] == pytest.approx(alpha + 2 * beta, abs=1e-12)
    assert p[0, 1] @ p[0, 1] == pytest.approx(alpha, abs=1e-12)
    assert p[1, 0] @ p[1, 0] == pytest.approx(alpha, abs=1e-12)
    assert p[0, 0] @ p[1, 1] == pytest.approx(2 * beta, abs=1e-12)
    assert abs(p[0, 1] @ p[1, 0]) <= 1e-12
    assert abs(p[0, 0] @ p[0, 1]) <= 1e-12


@pytest.mark.parametrize("m", [1, 2, 3])
def test_two_qutrit_trace(m):
    theta = 0.7
    for a, b, a2, b2 in product((0, 1), repeat=4):
        x = T.psi_ab(m, a, b, theta).reshape(9, -1)
        y = T.psi_ab(m, a2, b2, theta).reshape(9, -1)
        assert np.max(np.abs(x @ y.T - T.two_qutrit_reduced(m, a, b, a2, b2, theta))) <= 1e-12


@pytest.mark.parametrize("ell_bar,theta", [(2, 0.0), (2, 0.7), (3, 1.3)])
def test_ground_basis(ell_bar, theta):
    cols = T.psi_columns(ell_bar, theta)
    assert cols.shape[1] == 4
    assert np.allclose(cols.T @ cols, np.eye(4), atol=1e-10)
    seg = build_segment(T.teleport_spec(theta), ell_bar).to_dense()
    assert np.max(np.abs(seg @ cols)) <= 1e-10
    assert null_basis(seg).count == 4
    gs = T.teleport_ground_basis(ell_bar, theta)
    assert gs.d_bar == 4


def test_normalizations_at_zero():
    for m in (2, 3, 7):
        assert T.normalizations(m, 0.0) == (1.0, 1.0)


def test_k_matrix():
    k = T.k_matrix()
    assert np.array_equal(k, k.T)
    assert set(np.unique(k * 4).astype(int)) <= {-1, 0, 1, 3}
    assert np.allclose(np.linalg.eigvalsh(k), [0] * 4 + [1] * 12, atol=1e-12)


def test_k_matrix_is_link_restriction():
    # link bond I x H^B x I restricted to two theta = 0 segments
    cols = T.psi_columns(2, 0.0)
    bond = np.kron(np.kron(np.eye(9), T.teleport_spec(0.0).hbar), np.eye(9))
    assert np.allclose(restrict(bond, np.kron(cols, cols)), T.k_matrix(), atol=1e-10)


def _delta_oracle(m, theta):
    # 4 (1 - N0 / N) with both normalizations read off dense vectors
    p = {ab: T.psi_ab(m, *ab, theta) for ab in product((0, 1), repeat=2)}
    n0 = sqrt(2) / np.linalg.norm(p[0, 0] + p[1, 1])
    n = sqrt(2) / np.linalg.norm(p[0, 1] + p[1, 0])
    return 4 * (1 - n0 / n)


def test_delta_values():
    assert T.teleport_delta(4, 0.0) == 0.0
    # exact value 4 (1 - sqrt(10/19)) = 1.0980950
    assert _delta_oracle(2, pi / 3) == pytest.approx(4 * (1 - sqrt(10 / 19)), abs=1e-12)
    assert _delta_oracle(2, pi / 3) == pytest.approx(1.098097, abs=5e-6)
    assert T.teleport_delta(2, pi / 3) == pytest.approx(_delta_oracle(2, pi / 3), abs=1e-12)
    assert T.teleport_delta(3, 1.1) == pytest.approx(_delta_oracle(3, 1.1), abs=1e-12)


def test_delta_monotone():
    vals = [T.teleport_delta(m, 1.0) for m in range(2, 13)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("ell_bar,theta", [(2, 0.0), (2, 0.7), (3, 1.0)])
def test_closed_coupling_matches_restriction(ell_bar, theta):
    gs = T.teleport_ground_basis(ell_bar, theta)
    rc = renormalized_coupling(T.teleport_spec(theta), gs)
    assert np.allclose(rc.h_bar, T.segment_coupling(ell_bar, ell_bar, theta), atol=1e-10)


def test_flank_identity():
    theta, ell_bar = 0.9, 3
    split = T.teleport_htilde(ell_bar, theta)
    ff = np.kron(T.flank(ell_bar, theta), T.flank(ell_bar, theta))
    assert np.allclose(split.h_bar, ff @ split.h_tilde @ ff, atol=1e-12)


def test_htilde_small_k():
    split = T.teleport_htilde(3, 1.0)
    assert opnorm(split.k_bar) <= T.teleport_delta(3, 1.0)
    assert np.max(np.abs(T.teleport_htilde(2, 0.0).k_bar)) <= 1e-14


@pytest.mark.parametrize("theta", np.linspace(0, 1.5, 6))
def test_htilde_commutes_and_gap(theta):
    split = T.teleport_htilde(2, theta)
    assert split.comm_residual <= 1e-10
    ev = np.linalg.eigvalsh(split.h_tilde)
    gap = ev[ev > 1e-12].min()
    assert gap == pytest.approx(T.coupling_prefactor(2, 2, theta), rel=1e-12)
    assert gap >= cos(theta) ** 4 - 1e-12


def test_kernel_z_is_four():
    for theta in (0.2, 1.0):
        z, g_t = kernel_z_and_gtilde(T.teleport_htilde(2, theta))
        assert z == 4 and g_t >= cos(theta) ** 4 - 1e-12


@pytest.mark.parametrize("ell,theta", [(2, 0.0), (3, 0.6), (4, 1.2)])
def test_boundary_forms(ell, theta):
    bf = T.teleport_boundary_forms(ell, theta)
    assert bf.kernel_dim == 1
    ev = np.linalg.eigvalsh(bf.h_tilde_0 + bf.h_tilde_end)
    assert ev[1] - ev[0] == pytest.approx(bf.prefactor, rel=1e-10)
    ev = np.linalg.eigvalsh(bf.h_bar_0 + bf.h_bar_end)
    assert ev[1] - ev[0] >= bf.c1_lower - 1e-12
    c2, q = cos(theta) ** 2, sin(theta) ** 2 / 4
    ratio = c2 * (c2 + q) ** (ell - 1) / ((c2 + q) ** ell - q ** ell)
    assert bf.c1_lower == pytest.approx((1 - T.teleport_delta(ell, theta) / 2) * ratio, rel=1e-12)


def test_boundary_c1_at_zero():
    assert T.teleport_boundary_forms(3, 0.0).c1_lower == pytest.approx(1.0)


def test_qutrit_chain_equals_composite_chain():
    for theta in (0.0, 0.8):
        a = T.qutrit_chain(theta, 2).to_dense()
        b = build_full_chain(T.teleport_spec(theta), 2).to_dense()
        assert np.allclose(a, b, atol=1e-14)
