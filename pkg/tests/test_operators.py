import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gapcert.errors import DegeneracyAmbiguityError, ShapeError, SizeError, SymmetryError
from gapcert.models import swap, teleport
from gapcert.operators import (
    HermitianOp,
    LocalTerm,
    dense_cap,
    embed_local,
    ground_gap,
    kron,
    lowest_eigs,
    null_basis,
    opnorm,
    ordered_eigs,
    restrict,
)


def rand_herm(rng, n, complex_=False):
    a = rng.standard_normal((n, n))
    if complex_:
        a = a + 1j * rng.standard_normal((n, n))
    return (a + a.conj().T) / 2


def test_kron_small_cases():
    assert np.array_equal(kron(np.eye(2), np.eye(3)), np.eye(6))
    assert np.array_equal(kron(np.diag([1, 2]), np.diag([3, 4])), np.diag([3, 4, 6, 8]))


def test_kron_size_cap():
    with pytest.raises(SizeError):
        kron(np.eye(64), np.eye(64), size_cap=1000)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_kron_spectrum_is_products(seed):
    rng = np.random.default_rng(seed)
    a, b = rand_herm(rng, 3), rand_herm(rng, 3)
    prods = np.sort(np.outer(np.linalg.eigvalsh(a), np.linalg.eigvalsh(b)).ravel())
    assert np.allclose(np.linalg.eigvalsh(kron(a, b)), prods, atol=1e-12)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_kron_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (rng.standard_normal((d, d)) for d in rng.integers(2, 4, 3))
    assert np.max(np.abs(kron(kron(a, b), c) - kron(a, kron(b, c)))) <= 1e-14


def test_embed_at_zero_is_block():
    h = swap.swap_spec(0.4).hbar
    assert np.allclose(embed_local(h, 0, [3, 3]).to_dense(), h)


def test_embedded_zz_terms_commute():
    zz = np.kron(np.diag([1, -1]), np.diag([1, -1]))
    a = embed_local(zz, 0, [2, 2, 2]).to_dense()
    b = embed_local(zz, 1, [2, 2, 2]).to_dense()
    assert np.allclose(a @ b, b @ a)


def test_embed_teleport_bond_matches_kron():
    h = teleport.teleport_spec(0.6).hbar
    ref = np.kron(h, np.eye(9))
    assert np.allclose(embed_local(h, 1, [9, 9, 9]).to_dense(), ref)


def test_embed_shape_error():
    with pytest.raises(ShapeError):
        embed_local(np.eye(4), 0, [3, 3])


@given(st.lists(st.integers(1, 4), min_size=2, max_size=5), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_lazy_matches_dense(dims, seed):
    rng = np.random.default_rng(seed)
    terms = [LocalTerm(i, rand_herm(rng, dims[i] * dims[i + 1])) for i in range(len(dims) - 1)]
    op = HermitianOp(dims, terms)
    # explicit kron chain, site 0 rightmost
    ref = np.zeros((op.dim, op.dim))
    for t in terms:
        left = int(np.prod(dims[t.site + 2:]))
        right = int(np.prod(dims[:t.site]))
        ref += np.kron(np.kron(np.eye(left), t.block), np.eye(right))
    assert np.allclose(op.to_dense(), ref, atol=1e-12)
    v = rng.standard_normal((op.dim, 5))
    assert np.linalg.norm(op.matmat(v) - ref @ v) <= 1e-10 * np.linalg.norm(v)


def test_ordered_eigs_diag():
    spec = ordered_eigs(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(spec.eigenvalues, [1, 2, 3])
    assert np.all(spec.residuals <= 1e-10 * 3)


def test_ordered_eigs_rejects_nonhermitian():
    with pytest.raises(SymmetryError):
        ordered_eigs(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_ordered_eigs_bell_projector_sum():
    ev = ordered_eigs(teleport.h_bell()).eigenvalues
    assert np.allclose(ev, [0] * 6 + [1] * 3, atol=1e-12)


def test_ordered_eigs_k_matrix():
    ev = ordered_eigs(teleport.k_matrix()).eigenvalues
    assert np.allclose(ev, [0] * 4 + [1] * 12, atol=1e-12)


def test_lowest_eigs_small():
    spec = lowest_eigs(np.diag([0.0, 0.0, 5.0]), 2)
    assert np.allclose(spec.eigenvalues, [0, 0])


def test_lowest_eigs_iterative_matches_dense():
    # 3^8 chain is above the dense cap; compare against a dense solve
    sp = swap.swap_spec(0.5)
    from gapcert.chain import build_full_chain

    op = build_full_chain(sp, 6)
    assert op.dim > dense_cap()
    it = lowest_eigs(op, 5, seed=3)
    dense = np.linalg.eigvalsh(op.to_dense())[:5]
    assert np.allclose(it.eigenvalues, dense, atol=1e-9)
    assert np.all(it.residuals <= 1e-8 * 4)


def test_lowest_eigs_seeded_deterministic():
    from gapcert.chain import build_full_chain

    op = build_full_chain(swap.swap_spec(0.9), 6)
    a = lowest_eigs(op, 3, seed=11).eigenvalues
    b = lowest_eigs(op, 3, seed=11).eigenvalues
    assert np.array_equal(a, b)


def test_lowest_eigs_diagonal_operator():
    # Krylov on a diagonal operator with few levels stalls; the diagonal path handles it
    from gapcert.chain import build_full_chain

    op = build_full_chain(swap.swap_spec(0.0), 7)
    ev = lowest_eigs(op, 4).eigenvalues
    assert ev[0] == 0.0 and ground_gap(ev) == pytest.approx(1.0)


def test_teleport_chain_frustration_free_and_gapped():
    op = teleport.qutrit_chain(0.5, 2)
    ev = lowest_eigs(op, 2).eigenvalues
    assert abs(ev[0]) < 1e-9 and ev[1] > 1e-3


def test_null_basis_counts():
    assert null_basis(teleport.h_bell()).count == 6
    from gapcert.chain import build_segment

    assert null_basis(build_segment(teleport.teleport_spec(0.3), 2)).count == 4
    nb = null_basis(build_segment(swap.swap_spec(0.3), 2))
    assert nb.count == 5
    g = swap.gamma_columns(2, 0.3)
    assert np.allclose(nb.projector(), g @ g.T, atol=1e-10)


def test_null_basis_ambiguous_cut():
    with pytest.raises(DegeneracyAmbiguityError):
        null_basis(np.diag([0.0, 1e-9, 1.0]), tol=1e-9)


def test_null_basis_rejects_indefinite():
    with pytest.raises(SymmetryError):
        null_basis(np.diag([-1.0, 1.0]))


@given(st.integers(0, 1000))
@settings(max_examples=20, deadline=None)
def test_restrict_to_kernel_vanishes(seed):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((4, 9))
    op = g.T @ g
    nb = null_basis(op)
    assert nb.count == 5
    assert opnorm(restrict(op, nb)) <= 10 * 1e-9 * max(1.0, opnorm(op))
    assert np.allclose(nb.columns.T @ nb.columns, np.eye(5), atol=1e-10)


def test_restrict_identity_and_k_matrix():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.standard_normal((7, 3)))
    assert np.allclose(restrict(np.eye(7), q), np.eye(3))
    sp = teleport.teleport_spec(0.0)
    cols = teleport.psi_columns(2, 0.0)
    basis = np.kron(cols, cols)
    assert np.allclose(restrict(np.kron(np.kron(np.eye(9), sp.hbar), np.eye(9)), basis), teleport.k_matrix(),
                       atol=1e-10)


def test_restrict_shape_error():
    with pytest.raises(ShapeError):
        restrict(np.eye(4), np.eye(5)[:, :2])


def test_opnorm_values():
    assert opnorm(np.zeros((3, 3))) == 0.0
    assert opnorm(teleport.k_matrix()) == pytest.approx(1.0, abs=1e-12)
    split = swap.swap_htilde(3, 0.5)
    assert opnorm(split.k_bar) <= 0.403423


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_eigenvalue_stability(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    a = rand_herm(rng, n, complex_=bool(seed % 2))
    b = 0.1 * rand_herm(rng, n, complex_=bool(seed % 2))
    shift = np.abs(np.linalg.eigvalsh(a + b) - np.linalg.eigvalsh(a))
    assert np.all(shift <= opnorm(b) + 1e-12)


def test_ground_gap_clusters():
    assert ground_gap([0.0, 1e-12, 0.5, 0.7]) == pytest.approx(0.5)
    assert ground_gap([2.0, 2.0]) == float("inf")


def test_complex_hermitian_supported():
    rng = np.random.default_rng(5)
    h = rand_herm(rng, 4, complex_=True)
    h = h - np.linalg.eigvalsh(h)[0] * np.eye(4)
    op = embed_local(h, 0, [2, 2, 2]) + embed_local(h, 1, [2, 2, 2])
    ev = ordered_eigs(op).eigenvalues
    assert np.allclose(ev, np.linalg.eigvalsh(op.to_dense()))


def test_lowest_eigs_finds_decoupled_kernel_states():
    # decoupled basis states (e.g. all-IDLE) are invisible to Lanczos
    from gapcert.chain import build_segment

    seg = build_segment(swap.swap_spec(0.5), 8)
    assert seg.dim > dense_cap() and seg.decoupled().any()
    assert null_basis(seg).count == 17
    ev = lowest_eigs(seg, 20).eigenvalues
    assert np.count_nonzero(ev < 1e-9) == 17


def test_decoupled_mask_small():
    h = np.diag([0.0, 1.0, 1.0, 2.0])
    h[1, 2] = h[2, 1] = 0.5
    op = HermitianOp([2, 2], [LocalTerm(0, h)])
    assert list(op.decoupled()) == [True, False, False, True]
    assert np.allclose(op.diagonal_entries(), np.diag(h))
