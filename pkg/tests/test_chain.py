import json

import numpy as np
import pytest

from gapcert.chain import (
    ChainSpec,
    Partition,
    build_full_chain,
    build_linked,
    build_remnant,
    build_segment,
    check_frustration_free,
    decompose_full_chain,
)
from gapcert.errors import DomainError, ShapeError
from gapcert.models import swap, teleport
from gapcert.operators import lowest_eigs, null_basis


def identity_spec(d=2):
    i = np.eye(d * d)
    return ChainSpec(d, d, d, i, i, i)


def test_spec_rejects_non_psd():
    with pytest.raises(DomainError):
        ChainSpec(2, 2, 2, -np.eye(4), np.eye(4), np.eye(4))


def test_spec_rejects_bad_shape():
    with pytest.raises(ShapeError):
        ChainSpec(2, 3, 2, np.eye(4), np.eye(4), np.eye(4))


def test_spec_json_roundtrip(tmp_path):
    sp = swap.swap_spec(0.7)
    path = tmp_path / "spec.json"
    sp.save(path)
    data = json.loads(path.read_text())
    assert set(data["dims"]) == {"d", "d0", "dEnd"}
    back = ChainSpec.load(path)
    assert back.digest() == sp.digest()
    assert back.theta == pytest.approx(0.7)


def test_spec_json_complex_roundtrip():
    h = np.array([[1, 1j, 0, 0], [-1j, 1, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0]])
    sp = ChainSpec(2, 2, 2, h, np.eye(4), np.eye(4))
    back = ChainSpec.from_json(sp.to_json())
    assert np.array_equal(back.hbar, sp.hbar)


def test_partition():
    p = Partition(11, 3)
    assert (p.n_seg, p.remnant) == (3, 2)
    with pytest.raises(DomainError):
        Partition(5, 1)


def test_full_chain_needs_a_bulk_spin():
    with pytest.raises(DomainError):
        build_full_chain(swap.swap_spec(0.3), 0)


def test_teleport_full_chain_frustration_free():
    op = build_full_chain(teleport.teleport_spec(0.8), 2)
    ok, lam0 = check_frustration_free(op)
    assert ok and abs(lam0) < 1e-9


def test_swap_full_chain_unique_ground_state():
    op = build_full_chain(swap.swap_spec(0.5), 4)
    ev = np.linalg.eigvalsh(op.to_dense())
    assert abs(ev[0]) < 1e-10 and ev[1] > 1e-3


def test_segment_of_two_is_the_bond():
    sp = swap.swap_spec(0.2)
    assert np.allclose(build_segment(sp, 2).to_dense(), sp.hbar)


@pytest.mark.parametrize("model,seg_len,want", [("teleport", 2, 4), ("swap", 3, 7)])
def test_segment_kernels(model, seg_len, want):
    sp = teleport.teleport_spec(0.5) if model == "teleport" else swap.swap_spec(0.5)
    assert null_basis(build_segment(sp, seg_len)).count == want


def test_linked_is_open_chain():
    sp = swap.swap_spec(0.9)
    assert np.allclose(build_linked(sp, 2, 2).to_dense(), build_segment(sp, 4).to_dense())
    with pytest.raises(DomainError):
        build_linked(sp, 1, 2)


def test_teleport_linked_kernel():
    op = build_linked(teleport.teleport_spec(0.4), 2, 2)
    ev = lowest_eigs(op, 8).eigenvalues
    assert np.sum(np.abs(ev) < 1e-9) == 4


def test_swap_linked_kernel():
    assert null_basis(build_linked(swap.swap_spec(0.6), 3, 2)).count == 13


def test_remnants():
    sp = swap.swap_spec(0.6)
    r0 = build_remnant(sp, 0)
    assert r0.dim == 1 and np.allclose(r0.to_dense(), 0)
    r1 = build_remnant(sp, 1)
    assert r1.dim == 3 and np.allclose(r1.to_dense(), 0)
    assert null_basis(build_remnant(sp, 3)).count == 7


@pytest.mark.parametrize("ell,seg_len", [(1, 2), (4, 2), (5, 2), (5, 3), (6, 4), (3, 5)])
def test_partition_identity(ell, seg_len):
    sp = swap.swap_spec(0.45)
    parts = decompose_full_chain(sp, ell, seg_len)
    total = sum(op.to_dense() for op in parts.values())
    assert np.max(np.abs(total - build_full_chain(sp, ell).to_dense())) <= 1e-12


def test_frustrated_identity_spec():
    sp = identity_spec()
    op = build_full_chain(sp, 3)
    ok, lam0 = check_frustration_free(op)
    # ell + 1 identity bonds including both ends
    assert not ok and lam0 == pytest.approx(4.0)
    ok, lam0 = check_frustration_free(build_segment(sp, 4))
    assert not ok and lam0 == pytest.approx(3.0)


def test_linked_ground_energy_zero_when_full_chain_is():
    sp = teleport.teleport_spec(1.1)
    assert check_frustration_free(build_full_chain(sp, 2))[0]
    assert check_frustration_free(build_linked(sp, 2, 2))[0]
