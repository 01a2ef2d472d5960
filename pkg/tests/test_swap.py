from math import cos, pi, sin

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapcert.chain import build_full_chain, build_segment
from gapcert.errors import DomainError
from gapcert.models import swap as S
from gapcert.operators import lowest_eigs, null_basis, opnorm, restrict
from gapcert.renorm import kernel_z_and_gtilde, renormalized_coupling

E3 = np.eye(3)


def ket(*levels):
    out = np.ones(1)
    for lv in levels:
        out = np.kron(out, E3[lv])
    return out


def test_coupling_is_projector():
    for theta in (0.0, 0.5, 1.3):
        h = S.swap_spec(theta).hbar
        assert np.max(np.abs(h @ h - h)) <= 1e-12
        assert np.allclose(np.linalg.eigvalsh(h), [0] * 5 + [1] * 4, atol=1e-12)


def test_theta_range():
    with pytest.raises(DomainError):
        S.swap_spec(pi / 2)


def test_two_qutrit_toy_ground_state():
    theta = 0.6
    c, s = cos(theta), sin(theta)
    toy = S.swap_spec(theta).hbar + np.kron(E3, np.diag([0, 1, 0])) + np.kron(np.diag([0, 0, 1]), E3)
    w, v = np.linalg.eigh(toy)
    assert abs(w[0]) < 1e-12 and w[1] > 1e-3
    psi0 = c * ket(0, 0) + s * ket(0, S.IDLE)
    assert abs(abs(v[:, 0] @ psi0) - 1) <= 1e-12


def test_history_base_and_product():
    for b in (0, 1):
        assert np.array_equal(S.history_state(1, b, 0, 0.4), E3[b])
    theta = 0.9
    psi = cos(theta) * E3[0] + sin(theta) * E3[S.IDLE]
    ref = np.kron(np.kron(E3[0], psi), np.kron(psi, psi))
    assert np.allclose(S.history_state(4, 0, 0, theta), ref, atol=1e-14)


@given(st.integers(1, 6), st.floats(0.0, 1.5))
@settings(max_examples=30, deadline=None)
def test_history_recursive_matches_closed(m, theta):
    for b in (0, 1):
        for j in range(m):
            rec = S.history_state(m, b, j, theta)
            assert np.max(np.abs(rec - S.history_state_closed(m, b, j, theta))) <= 1e-12
            assert np.linalg.norm(rec) == pytest.approx(1.0, abs=1e-12)


def test_history_lowering_overlaps():
    # |0><IDLE| on the leading qutrit between Psi_1(5; 0) and Psi_1(5; j)
    theta, m = 0.7, 5
    op = np.kron(np.outer(E3[0], E3[S.IDLE]), np.eye(3 ** (m - 1)))
    top = S.history_state(m, 1, 0, theta)
    for j in range(1, m):
        val = top @ op @ S.history_state(m, 1, j, theta)
        assert val == pytest.approx(cos(theta) * sin(theta) ** (j - 1), abs=1e-12)


def test_gamma_two_listed_states():
    theta = 0.8
    c, s = cos(theta), sin(theta)
    listed = [
        c * ket(0, 0) + s * ket(0, S.IDLE),
        c * ket(0, 1) + s * ket(1, S.IDLE),
        ket(S.IDLE, 0),
        ket(S.IDLE, 1),
        ket(S.IDLE, S.IDLE),
    ]
    g = S.gamma_columns(2, theta)
    assert np.allclose(g @ g.T, sum(np.outer(v, v) for v in listed), atol=1e-12)


@pytest.mark.parametrize("m", range(2, 8))
def test_gamma_is_segment_kernel(m):
    theta = 0.55
    g = S.gamma_columns(m, theta)
    assert g.shape[1] == 2 * m + 1
    assert np.allclose(g.T @ g, np.eye(2 * m + 1), atol=1e-10)
    seg = build_segment(S.swap_spec(theta), m)
    assert np.max(np.abs(seg.matmat(g))) <= 1e-10
    if m <= 6:
        assert null_basis(seg).count == 2 * m + 1
    else:
        ev = lowest_eigs(seg, 2 * m + 6).eigenvalues
        assert np.count_nonzero(ev < 1e-9) == 2 * m + 1


def test_gamma_basis_dim():
    assert S.gamma_basis(8, 0.3).d_bar == 17


def test_v_w_spectra():
    assert np.allclose(np.linalg.eigvalsh(S.v_matrix(4, pi / 4)), [0, 1, 1, 2], atol=1e-12)
    w3 = S.w_matrix(4, pi / 3)
    assert w3.shape == (3, 3)
    ev = np.linalg.eigvalsh(w3)
    assert np.allclose(ev, [0.479309, 1, 3.520691], atol=1e-6)
    assert np.allclose(ev, S.w_spectrum(4, pi / 3), atol=1e-9)


@pytest.mark.parametrize("theta", [0.0, 0.3, 0.9, 1.4])
def test_v_kernel_one_dim(theta):
    for m in range(3, 13):
        ev = np.linalg.eigvalsh(S.v_matrix(m, theta))
        assert np.count_nonzero(np.abs(ev) < 1e-9) == 1
        assert np.allclose(ev, S.v_spectrum(m, theta), atol=1e-9)
        assert np.allclose(np.linalg.eigvalsh(S.w_matrix(m, theta)), S.w_spectrum(m, theta), atol=1e-9)


def test_weights():
    a = S.swap_weights(5, 0.4)
    assert np.allclose(a[:-1], cos(0.4) ** 2) and a[-1] == 1.0


def _dense_bond(m, theta):
    # the link bond on 2m qutrits restricted to Gamma (x) Gamma
    g = S.gamma_columns(m, theta)
    bond = np.kron(np.kron(np.eye(3 ** (m - 1)), S.swap_spec(theta).hbar), np.eye(3 ** (m - 1)))
    return restrict(bond, np.kron(g, g))


@pytest.mark.parametrize("m,theta", [(2, 0.5), (3, 0.5), (3, 1.2), (2, 0.0)])
def test_hbar_matches_dense_restriction(m, theta):
    assert np.allclose(S.swap_hbar(m, theta).h_bar, _dense_bond(m, theta), atol=1e-10)


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_hbar_matches_numeric_coupling(m):
    theta = 0.65
    rc = renormalized_coupling(S.swap_spec(theta), S.gamma_basis(m, theta))
    assert np.allclose(S.swap_hbar(m, theta).h_bar, rc.h_bar, atol=1e-10)


def test_hbar_mixed_lengths():
    theta = 0.4
    g2, g3 = S.gamma_columns(2, theta), S.gamma_columns(3, theta)
    bond = np.kron(np.kron(np.eye(3), S.swap_spec(theta).hbar), np.eye(9))
    assert np.allclose(S.swap_hbar(2, theta, right_len=3).h_bar, restrict(bond, np.kron(g2, g3)), atol=1e-10)


@pytest.mark.parametrize("m", [2, 4, 7])
def test_hbar_gap_is_cos4(m):
    theta = 0.5
    ev = np.linalg.eigvalsh(S.swap_hbar(m, theta).h_bar)
    assert abs(ev[0]) <= 1e-12
    gap = ev[ev > 1e-10].min()
    assert gap == pytest.approx(cos(theta) ** 4, abs=1e-12)
    assert gap == pytest.approx(0.593133, abs=1e-6)
    assert S.swap_coupling_gap(m, m, theta) == pytest.approx(gap, abs=1e-12)


def test_block_structure():
    m, theta = 4, 0.7
    h = S.swap_hbar(m, theta).h_bar
    blocks = S.swap_block_structure(m)
    assert len(blocks.blocks) == m
    assert all(len(b) == 4 * m + 2 for b in blocks.blocks)
    idx = [list(b) for b in blocks.blocks] + [list(blocks.zero_block)]
    assert sorted(i for b in idx for i in b) == list(range(h.shape[0]))
    for b in idx:
        rest = np.setdiff1d(np.arange(h.shape[0]), b)
        assert np.max(np.abs(h[np.ix_(b, rest)])) <= 1e-14
    assert np.max(np.abs(h[np.ix_(idx[-1], idx[-1])])) <= 1e-14
    # blocks differ only by the weight a_j
    ref = h[np.ix_(idx[0], idx[0])]
    for j in range(1, m - 1):
        assert np.allclose(h[np.ix_(idx[j], idx[j])], ref, atol=1e-14)
    assert np.allclose(h[np.ix_(idx[m - 1], idx[m - 1])] * cos(theta) ** 2, ref, atol=1e-14)


def test_arrowhead_subblocks():
    # left Psi_0(j) against right {Psi_0(0..m-1), IDLE} is a_j cos^2 V(m + 1)
    m, theta = 5, 0.6
    h = S.swap_hbar(m, theta).h_bar
    d = 2 * m + 1
    a = S.swap_weights(m, theta)
    for j in range(m):
        left = S.basis_index(m, 0, j)
        right = [S.basis_index(m, 0, k) for k in range(m)] + [S.basis_index(m, None)]
        sub = h[np.ix_([left * d + r for r in right], [left * d + r for r in right])]
        assert np.allclose(sub, a[j] * cos(theta) ** 2 * S.v_matrix(m + 1, theta), atol=1e-14)


def test_htilde_delta():
    split = S.swap_htilde(3, 0.5)
    assert split.delta <= 2 * cos(0.5) * sin(0.5) ** 2 + 1e-15
    assert split.delta <= 0.403423
    assert split.comm_residual <= 1e-10
    assert np.max(np.abs(S.swap_htilde(4, 0.0).k_bar)) == 0.0


@pytest.mark.parametrize("m", [2, 3, 4])
def test_sub_cos4_count(m):
    theta = 0.7
    split = S.swap_htilde(m, theta)
    d = 2 * m + 1
    eye = np.eye(d)
    ev = np.linalg.eigvalsh(np.kron(split.h_tilde, eye) + np.kron(eye, split.h_tilde))
    assert np.count_nonzero(ev < cos(theta) ** 4 - 1e-12) <= 6 * m + 1
    z, g_t = kernel_z_and_gtilde(split)
    assert z == 6 * m + 1 and g_t >= cos(theta) ** 4 - 1e-12


def test_boundary_restriction():
    ell, theta = 4, 0.8
    m = ell + 2
    penalty = (np.kron(np.outer(E3[S.IDLE], E3[S.IDLE]), np.eye(3 ** (m - 1)))
               + np.kron(np.eye(3 ** (m - 1)), np.outer(E3[1], E3[1])))
    comp = restrict(penalty, S.gamma_columns(m, theta))
    assert np.allclose(comp, S.swap_boundary_operator(ell, theta), atol=1e-10)
    ev = np.linalg.eigvalsh(comp)
    cases = S.swap_boundary_spectrum(ell, theta)
    want = np.sort(np.concatenate([[c.value] * c.multiplicity for c in cases]))
    assert np.allclose(ev, want, atol=1e-10)
    assert ev[1] - ev[0] == pytest.approx(cos(theta) ** 2, abs=1e-12)


def test_boundary_zero_vector():
    ell, theta = 3, 0.5
    diag = np.diag(S.swap_boundary_operator(ell, theta))
    zero = np.flatnonzero(diag < 1e-12)
    assert list(zero) == [S.basis_index(ell + 2, 0, 0)]


@pytest.mark.parametrize("ell,theta", [(1, 0.5), (2, 1.0), (3, 0.3), (4, 1.3)])
def test_full_chain_unique_ground_state(ell, theta):
    ev = np.linalg.eigvalsh(build_full_chain(S.swap_spec(theta), ell).to_dense())
    assert abs(ev[0]) <= 1e-10 and ev[1] > 1e-6


def test_full_chain_ground_state_is_history():
    ell, theta = 3, 0.4
    op = build_full_chain(S.swap_spec(theta), ell)
    psi = S.history_state(ell + 2, 0, 0, theta)
    assert np.linalg.norm(op.matmat(psi[:, None])) <= 1e-12


def test_delta_bound_formula():
    assert S.swap_delta_bound(3, 0.5) == pytest.approx(2 * cos(0.5) * sin(0.5) ** 2)
    assert S.swap_delta_bound(5, 0.0) == 0.0
    assert opnorm(S.swap_htilde(5, 1.0).k_bar) <= S.swap_delta_bound(5, 1.0) + 1e-15
