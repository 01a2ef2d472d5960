"""Segment ground spaces, renormalized couplings and the gap bounds built on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import sqrt
from typing import Callable

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .chain import ChainSpec, build_segment
from .errors import (
    DomainError,
    HypothesisViolatedError,
    ModelInconsistencyError,
    ShapeError,
    SplitNotFoundError,
    WitnessNotFoundError,
)
from .operators import (
    HermitianOp,
    LocalTerm,
    SubspaceBasis,
    _classify_kernel,
    dense_cap,
    lowest_eigs,
    null_basis,
    opnorm,
    ordered_eigs,
)

__all__ = [
    "CommutingSplit",
    "GroundSpace",
    "RenormCoupling",
    "abc_bound",
    "commutator_residual",
    "commuting_split",
    "coupling_from_reduced",
    "end_reduced",
    "kernel_z_and_gtilde",
    "knabe_bound",
    "lm_threshold",
    "lm_witness",
    "renormalized_chain",
    "renormalized_coupling",
    "segment_ground_space",
    "theorem2_bound",
    "x_threshold",
]

RESIDUAL_CHECK_CAP = 2**21


@dataclass(frozen=True)
class GroundSpace:
    """Orthonormal zero-energy basis of one segment."""

    basis: SubspaceBasis
    seg_len: int
    d: int
    spec_digest: str = ""
    source: str = "numeric"
    labels: tuple = ()

    @property
    def d_bar(self) -> int:
        return self.basis.count

    @property
    def columns(self) -> np.ndarray:
        return self.basis.columns


def segment_ground_space(spec: ChainSpec, seg_len: int, tol: float = 1e-9, seed: int = 42,
                         closed_form: Callable[[int], np.ndarray] | None = None,
                         labels: tuple = ()) -> GroundSpace:
    """Ground space of an isolated segment, numeric or from a closed form.

    A closed-form basis is checked for orthonormality and for being
    annihilated by the segment Hamiltonian (when the segment is small enough
    to apply), and its size is compared with the numeric kernel when the
    segment fits the dense cap.
    """
    if seg_len < 1:
        raise DomainError("segment length must be at least 1")
    dim = spec.d ** seg_len
    if closed_form is None:
        seg = build_segment(spec, seg_len)
        basis = null_basis(seg, tol=tol, seed=seed)
        return GroundSpace(basis, seg_len, spec.d, spec.digest(), "numeric", labels)
    cols = np.asarray(closed_form(seg_len))
    if cols.shape[0] != dim:
        raise ShapeError(f"closed-form basis has {cols.shape[0]} rows, expected {dim}")
    gram = cols.conj().T @ cols
    if np.max(np.abs(gram - np.eye(cols.shape[1]))) > 1e-10:
        raise ModelInconsistencyError("closed-form ground basis is not orthonormal")
    if dim <= RESIDUAL_CHECK_CAP:
        seg = build_segment(spec, seg_len)
        scale = max(1.0, seg.norm_upper())
        res = np.linalg.norm(seg.matmat(cols), axis=0)
        if res.size and np.max(res) > tol * scale:
            raise ModelInconsistencyError(f"closed-form ground state has residual {np.max(res):.3e}")
        if dim <= dense_cap():
            count = null_basis(seg, tol=tol, seed=seed).count
            if count != cols.shape[1]:
                raise ModelInconsistencyError(
                    f"closed form gives {cols.shape[1]} ground states, numeric kernel has {count}")
    basis = SubspaceBasis(dim, cols, tol)
    return GroundSpace(basis, seg_len, spec.d, spec.digest(), "closed-form", labels)


def end_reduced(columns: np.ndarray, site_dim: int, side: str) -> np.ndarray:
    """Matrix elements of single-site operators at one end of a basis.

    Returns ``R[i, j, y, y']`` with ``<col_i| (|y><y'| on the end site) |col_j>``.
    ``side='last'`` is the rightmost tensor factor, ``'first'`` the leftmost.
    """
    n = columns.shape[1]
    if side == "last":
        t = columns.reshape(-1, site_dim, n)
        return np.einsum("ryi,rwj->ijyw", t.conj(), t)
    if side == "first":
        t = columns.reshape(site_dim, -1, n)
        return np.einsum("yri,wrj->ijyw", t.conj(), t)
    raise ValueError(f"side must be 'first' or 'last', got {side!r}")


def coupling_from_reduced(block: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Two-site block compressed to a product of end-reduced bases.

    ``left`` holds the reduced operators of the left factor's last site and
    ``right`` those of the right factor's first site (see :func:`end_reduced`).
    """
    nl, dl = left.shape[0], left.shape[2]
    nr, dr = right.shape[0], right.shape[2]
    if block.shape != (dl * dr, dl * dr):
        raise ShapeError(f"block shape {block.shape} does not match end dims ({dl}, {dr})")
    blk = block.reshape(dl, dr, dl, dr)
    h = np.einsum("abcd,ijac,klbd->ikjl", blk, left, right, optimize=True)
    h = h.reshape(nl * nr, nl * nr)
    return (h + h.conj().T) / 2


@dataclass(frozen=True)
class RenormCoupling:
    """The link bond compressed to the product of two segment ground spaces."""

    h_bar: np.ndarray
    d_left: int
    d_right: int
    labels: tuple = ()

    @property
    def d_bar(self) -> int:
        if self.d_left != self.d_right:
            raise ShapeError("coupling joins ground spaces of different sizes")
        return self.d_left


def renormalized_coupling(spec: ChainSpec, gs: GroundSpace, right: GroundSpace | None = None) -> RenormCoupling:
    """Link bond between two segments written in their ground bases."""
    right = gs if right is None else right
    lred = end_reduced(gs.columns, spec.d, "last")
    rred = end_reduced(right.columns, spec.d, "first")
    h = coupling_from_reduced(spec.hbar, lred, rred)
    return RenormCoupling(h, gs.d_bar, right.d_bar)


def renormalized_chain(rc: RenormCoupling | np.ndarray, n_seg: int) -> HermitianOp:
    """Chain of ``n_seg`` renormalized sites joined by ``h_bar`` bonds."""
    h = rc.h_bar if isinstance(rc, RenormCoupling) else np.asarray(rc)
    db = int(round(sqrt(h.shape[0])))
    if db * db != h.shape[0]:
        raise ShapeError("renormalized coupling must act on two equal sites")
    if n_seg < 2:
        raise DomainError("a renormalized chain needs at least two sites")
    return HermitianOp([db] * n_seg, [LocalTerm(i, h) for i in range(n_seg - 1)])


COMMUTATOR_DENSE_CAP = 1000


def commutator_residual(h_tilde: np.ndarray) -> float:
    """Norm of ``[h (x) I, I (x) h]`` on three renormalized sites."""
    db = int(round(sqrt(h_tilde.shape[0])))
    dim = db**3
    if dim <= COMMUTATOR_DENSE_CAP:
        eye = np.eye(db)
        a = np.kron(h_tilde, eye)
        b = np.kron(eye, h_tilde)
        return opnorm(a @ b - b @ a)
    h = np.asarray(h_tilde)

    def left(x):
        return (h @ x.reshape(db * db, db)).reshape(-1)

    def right(x):
        return (x.reshape(db, db * db) @ h.T).reshape(-1)

    def comm(x):
        return left(right(x)) - right(left(x))

    # the commutator is anti-Hermitian, so -C^2 is PSD with top eigenvalue ||C||^2
    dtype = np.result_type(h.dtype, np.float64)
    gram = LinearOperator((dim, dim), matvec=lambda x: -comm(comm(np.ravel(x))), dtype=dtype)
    v0 = np.random.default_rng(0).standard_normal(dim)
    if not np.any(comm(v0)):
        probe = np.random.default_rng(1).standard_normal((dim, 4))
        if not any(np.any(comm(probe[:, i])) for i in range(4)):
            return 0.0
    try:
        top = eigsh(gram, k=1, which="LA", tol=1e-10, v0=v0, return_eigenvectors=False)[0]
    except ArpackNoConvergence as exc:
        raise SplitNotFoundError("commutator norm did not converge") from exc
    return sqrt(max(float(np.real(top)), 0.0)) * (1 + 1e-8)


@dataclass(frozen=True)
class CommutingSplit:
    """``h_bar = h_tilde + k_bar`` with commuting neighbouring ``h_tilde`` terms."""

    h_bar: np.ndarray
    h_tilde: np.ndarray
    k_bar: np.ndarray
    delta: float
    eta: float
    comm_residual: float
    strategy: str = "model"
    meta: dict = field(default_factory=dict, compare=False)


def _exact_split(h_bar: np.ndarray, h_tilde: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    k_bar = h_bar - h_tilde
    h_t = h_bar - k_bar
    if np.array_equal(h_t + k_bar, h_bar):
        return h_t, k_bar
    return h_tilde, k_bar


def commuting_split(rc: RenormCoupling | np.ndarray, strategy: str = "threshold", tol: float = 1e-10,
                    h_tilde: np.ndarray | None = None, eps: float | None = None) -> CommutingSplit:
    """Split the renormalized coupling into a commuting part plus a remainder.

    ``strategy='model'`` uses the supplied ``h_tilde``; ``'threshold'`` zeroes
    entries of ``h_bar`` below ``eps`` in magnitude, re-symmetrizes and clips
    negative eigenvalues.  Raises :class:`SplitNotFoundError` when the
    commutator residual exceeds ``tol``.
    """
    h_bar = rc.h_bar if isinstance(rc, RenormCoupling) else np.asarray(rc)
    if strategy == "model":
        if h_tilde is None:
            raise SplitNotFoundError("model strategy needs a closed-form h_tilde")
        ht = np.asarray(h_tilde)
    elif strategy == "threshold":
        eps = 10 * tol if eps is None else eps
        ht = np.where(np.abs(h_bar) < eps, 0.0, h_bar)
        ht = (ht + ht.conj().T) / 2
        w, v = np.linalg.eigh(ht)
        ht = (v * np.clip(w, 0.0, None)) @ v.conj().T
        ht = (ht + ht.conj().T) / 2
    else:
        raise ValueError(f"unknown split strategy {strategy!r}")
    if ht.shape != h_bar.shape:
        raise ShapeError("h_tilde and h_bar differ in shape")
    lam0 = float(np.linalg.eigvalsh(ht)[0]) if ht.size else 0.0
    if lam0 < -1e-10 * max(1.0, opnorm(ht)):
        raise SplitNotFoundError(f"h_tilde is not PSD (lowest eigenvalue {lam0:.3e})")
    ht, k_bar = _exact_split(h_bar, ht)
    resid = commutator_residual(ht)
    if resid > tol:
        raise SplitNotFoundError(f"commutator residual {resid:.3e} exceeds {tol:.1e}")
    return CommutingSplit(h_bar, ht, k_bar, opnorm(k_bar), opnorm(ht), resid, strategy)


def _three_site(h: np.ndarray) -> HermitianOp:
    db = int(round(sqrt(h.shape[0])))
    return HermitianOp([db] * 3, [LocalTerm(0, h), LocalTerm(1, h)])


def kernel_z_and_gtilde(split: CommutingSplit, tol: float = 1e-9, seed: int = 42) -> tuple[int, float]:
    """Kernel dimension ``z`` of the 3-site renormalized chain and ``g_tilde``.

    ``z`` counts the kernel of ``h_bar (x) I + I (x) h_bar``; ``g_tilde`` is
    the eigenvalue with 0-based index ``z`` of ``h_tilde (x) I + I (x) h_tilde``.
    """
    op_bar = _three_site(split.h_bar)
    op_til = _three_site(split.h_tilde)
    if op_bar.dim <= dense_cap():
        ev = ordered_eigs(op_bar, vectors=False).eigenvalues
        scale = max(1.0, float(np.max(np.abs(ev))))
        z = _classify_kernel(ev, tol, scale)
        evt = ordered_eigs(op_til, vectors=False).eigenvalues
        g_tilde = float(evt[z]) if z < evt.size else float("inf")
        return z, g_tilde
    z = null_basis(op_bar, tol=tol, seed=seed).count
    g_tilde = float(lowest_eigs(op_til, z + 1, tol=tol, seed=seed).eigenvalues[z])
    return z, g_tilde


def abc_bound(gap_B: float, c1: float, norm_C: float) -> float:
    """Lower bound ``gap_B c1 / (gap_B + c1 + ||C||)`` on the gap of ``B + C``.

    Requires ``B`` and ``P_B C P_B`` to share a zero ground energy.  An
    infinite ``gap_B`` (no excited level) gives the limit ``c1``.
    """
    if not gap_B > 0 or not c1 > 0 or not norm_C >= 0:
        raise DomainError(f"abc_bound needs gap_B > 0, c1 > 0, norm_C >= 0 (got {gap_B}, {c1}, {norm_C})")
    if np.isinf(gap_B):
        return float(c1)
    if np.isinf(c1):
        return float(gap_B)
    return gap_B * c1 / (gap_B + c1 + norm_C)


def knabe_bound(g_bar: float, x: float) -> float:
    """Gap bound ``g_bar - 2x`` for the renormalized chain (may be <= 0)."""
    return g_bar - 2.0 * x


def x_threshold(delta: float, eta: float, g_tilde: float) -> float:
    """Anticommutator threshold ``2 delta (2 eta + delta) / (g_tilde - 2 delta)``."""
    if not g_tilde > 2.0 * delta:
        raise HypothesisViolatedError(
            f"g_tilde = {g_tilde:.6g} does not exceed 2*delta = {2 * delta:.6g}; try a longer segment")
    return 2.0 * delta * (2.0 * eta + delta) / (g_tilde - 2.0 * delta)


def theorem2_bound(g_bar: float, delta: float, eta: float, g_tilde: float) -> float:
    """Size-independent lower bound on the gap of the renormalized chain."""
    return knabe_bound(g_bar, x_threshold(delta, eta, g_tilde))


LM_CONSTANT = 4.0 * sqrt(6.0)


def lm_threshold(n: float) -> float:
    """Finite-size gap threshold ``4 sqrt(6) n^(-3/2)``."""
    return LM_CONSTANT * float(n) ** -1.5


def lm_witness(gap_HS: float, c1: float, norm_Hbar: float, cap: int = 10**9, links: str = "n") -> int:
    """Smallest segment count ``n`` whose gap bound beats the finite-size threshold.

    The bound on ``n`` linked segments is ``gap_HS c1 / (gap_HS + c1 + L(n) ||H_bar||)``
    with ``L(n) = n`` (``links='n'``) or ``n - 1`` (``links='n-1'``).
    """
    if links not in ("n", "n-1"):
        raise ValueError("links must be 'n' or 'n-1'")
    if not (gap_HS > 0 and c1 > 0):
        raise WitnessNotFoundError("gap bound inputs must be positive")
    shift = 0 if links == "n" else 1

    def wins(n: int) -> bool:
        bound = abc_bound(gap_HS, c1, (n - shift) * norm_Hbar)
        return bound > lm_threshold(n)

    # The excess bound * n^1.5 - const is convex in n, so once the bound
    # wins it keeps winning: exponential search then bisection.
    if wins(1):
        return 1
    hi = 2
    while not wins(hi):
        if hi >= cap:
            raise WitnessNotFoundError(f"no witness below cap {cap}")
        hi = min(2 * hi, cap)
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if wins(mid):
            hi = mid
        else:
            lo = mid
    return hi
