"""Hermitian operators on tensor-product spaces.

Site 0 is the rightmost (least significant) tensor factor, so for local
dimensions ``dims = [d_0, d_1, ..., d_{n-1}]`` a basis state with site
values ``s_i`` has index ``sum_i s_i * prod_{j<i} d_j``.  A two-site block
placed at ``left_site = i`` acts on the factor pair ``(i+1, i)`` and is
written in the ordering ``kron(site i+1, site i)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from math import prod
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import (
    ConvergenceError,
    DegeneracyAmbiguityError,
    ShapeError,
    SizeError,
    SymmetryError,
)

__all__ = [
    "DEFAULT_DENSE_CAP",
    "DEFAULT_SIZE_CAP",
    "HermitianOp",
    "LocalTerm",
    "Spectrum",
    "SubspaceBasis",
    "dense_cap",
    "embed_local",
    "kron",
    "lowest_eigs",
    "null_basis",
    "opnorm",
    "ordered_eigs",
    "restrict",
]

DEFAULT_DENSE_CAP = 4096
DEFAULT_SIZE_CAP = 2**26
HERMITIAN_RTOL = 1e-12


def dense_cap() -> int:
    """Dimension up to which dense diagonalization is used.

    The environment variable ``GAPCERT_DENSE_CAP`` overrides the default.
    """
    raw = os.environ.get("GAPCERT_DENSE_CAP")
    if raw is None:
        return DEFAULT_DENSE_CAP
    return int(raw)


def _as_matrix(a) -> np.ndarray:
    if isinstance(a, HermitianOp):
        return a.to_dense()
    m = np.asarray(a)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    return m


def _hermitian_defect(m: np.ndarray) -> tuple[float, float]:
    scale = float(np.linalg.norm(m))
    return float(np.linalg.norm(m - m.conj().T)), scale


def _check_hermitian(m: np.ndarray, what: str = "matrix") -> None:
    defect, scale = _hermitian_defect(m)
    if defect > HERMITIAN_RTOL * max(scale, 1e-300) and defect > 1e-300:
        raise SymmetryError(f"{what} is not Hermitian (defect {defect:.3e}, norm {scale:.3e})")


def _real_if_possible(m: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(m) and not np.any(m.imag):
        return np.ascontiguousarray(m.real)
    return m


def kron(a, b, size_cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
    """Dense Kronecker product ``a (x) b``, with ``b`` the rightmost factor."""
    ma, mb = _as_matrix(a), _as_matrix(b)
    dim = ma.shape[0] * mb.shape[0]
    if dim > size_cap:
        raise SizeError(f"Kronecker product of dimension {dim} exceeds cap {size_cap}")
    return np.kron(ma, mb)


@dataclass(frozen=True)
class LocalTerm:
    """A two-site block acting on sites ``(site + 1, site)``."""

    site: int
    block: np.ndarray


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues with optional eigenvectors and residuals."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None
    residuals: np.ndarray | None = None
    seed: int | None = None

    def gap(self, tol: float = 1e-9) -> float:
        """Distance from the lowest eigenvalue to the next distinct one."""
        return ground_gap(self.eigenvalues, tol)


@dataclass(frozen=True)
class SubspaceBasis:
    """Orthonormal columns spanning a subspace of an ambient space."""

    ambient_dim: int
    columns: np.ndarray
    tol_used: float = 0.0
    eigenvalues: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def count(self) -> int:
        return int(self.columns.shape[1])

    def projector(self) -> np.ndarray:
        return self.columns @ self.columns.conj().T


def ground_gap(eigenvalues: Sequence[float], tol: float = 1e-9) -> float:
    """Gap between the lowest eigenvalue cluster and the next eigenvalue.

    Eigenvalues within ``tol * max(1, |lambda|)`` of the lowest one count as
    part of the ground cluster.  Returns ``inf`` when no excited level exists.
    """
    ev = np.sort(np.asarray(eigenvalues, dtype=float))
    if ev.size == 0:
        raise ShapeError("empty spectrum")
    scale = max(1.0, float(np.max(np.abs(ev))))
    above = ev[ev > ev[0] + tol * scale]
    if above.size == 0:
        return float("inf")
    return float(above[0] - ev[0])


class HermitianOp:
    """Hermitian operator stored densely or as a lazy sum of local terms.

    Parameters
    ----------
    dims : sequence of int
        Local dimensions, site 0 first (rightmost factor).
    terms : sequence of LocalTerm
        Two-site Hermitian blocks.
    dense : ndarray, optional
        A dense matrix on the whole space added to the local terms.
    """

    def __init__(self, dims: Sequence[int], terms: Sequence[LocalTerm] = (), dense=None):
        self.dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in self.dims):
            raise ShapeError(f"local dimensions must be positive: {self.dims}")
        self.dim = prod(self.dims)
        for t in terms:
            _check_term(t, self.dims)
        self.terms = tuple(terms)
        if dense is not None:
            dense = _real_if_possible(np.asarray(dense))
            if dense.shape != (self.dim, self.dim):
                raise ShapeError(f"dense part has shape {dense.shape}, expected {(self.dim, self.dim)}")
            _check_hermitian(dense, "dense part")
        self.dense = dense

    @classmethod
    def from_dense(cls, matrix) -> "HermitianOp":
        m = _as_matrix(matrix)
        return cls([m.shape[0]], dense=m)

    @classmethod
    def zero(cls, dims: Sequence[int]) -> "HermitianOp":
        return cls(dims)

    @property
    def is_lazy(self) -> bool:
        return self.dense is None

    @property
    def dtype(self):
        parts = [t.block.dtype for t in self.terms]
        if self.dense is not None:
            parts.append(self.dense.dtype)
        if any(np.issubdtype(p, np.complexfloating) for p in parts):
            return np.complex128
        return np.float64

    def __add__(self, other: "HermitianOp") -> "HermitianOp":
        if not isinstance(other, HermitianOp):
            return NotImplemented
        if other.dim != self.dim:
            raise ShapeError(f"cannot add operators of dims {self.dim} and {other.dim}")
        if other.terms and other.dims != self.dims:
            if self.terms:
                raise ShapeError("local terms refer to different site layouts")
            return other + self
        dense = self.dense
        if other.dense is not None:
            dense = other.dense if dense is None else dense + other.dense
        return HermitianOp(self.dims, self.terms + other.terms, dense)

    def scaled(self, factor: float) -> "HermitianOp":
        terms = [LocalTerm(t.site, factor * t.block) for t in self.terms]
        dense = None if self.dense is None else factor * self.dense
        return HermitianOp(self.dims, terms, dense)

    def matmat(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[:, None]
        if x.shape[0] != self.dim:
            raise ShapeError(f"vector length {x.shape[0]} does not match dim {self.dim}")
        dtype = np.result_type(x.dtype, self.dtype)
        out = np.zeros(x.shape, dtype=dtype)
        if self.dense is not None:
            out += self.dense @ x
        k = x.shape[1]
        for t in self.terms:
            left = prod(self.dims[t.site + 2:])
            pair = self.dims[t.site + 1] * self.dims[t.site]
            right = prod(self.dims[:t.site])
            x4 = x.reshape(left, pair, right * k)
            out += np.matmul(t.block, x4).reshape(out.shape)
        return out[:, 0] if squeeze else out

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.matmat(v)

    def __matmul__(self, x):
        return self.matmat(x)

    def to_sparse(self) -> sp.csr_matrix:
        acc = sp.csr_matrix((self.dim, self.dim), dtype=self.dtype)
        for t in self.terms:
            left = prod(self.dims[t.site + 2:])
            right = prod(self.dims[:t.site])
            blk = sp.kron(sp.identity(left, format="csr"), sp.csr_matrix(t.block), format="csr")
            acc = acc + sp.kron(blk, sp.identity(right, format="csr"), format="csr")
        if self.dense is not None:
            acc = acc + sp.csr_matrix(self.dense)
        return acc.tocsr()

    def to_dense(self, size_cap: int = DEFAULT_SIZE_CAP) -> np.ndarray:
        if self.dim * self.dim > size_cap * 64:
            raise SizeError(f"refusing to densify an operator of dimension {self.dim}")
        if self.dense is not None and not self.terms:
            return self.dense
        return _real_if_possible(self.to_sparse().toarray())

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator(
            (self.dim, self.dim), matvec=self.matvec, matmat=self.matmat,
            rmatvec=self.matvec, dtype=self.dtype,
        )

    def diagonal(self) -> np.ndarray | None:
        """The diagonal when every part is diagonal, else ``None``."""
        blocks = [t.block for t in self.terms]
        if self.dense is not None:
            blocks.append(self.dense)
        if any(np.count_nonzero(b - np.diag(np.diag(b))) for b in blocks):
            return None
        return self.diagonal_entries()

    def diagonal_entries(self) -> np.ndarray:
        """Real part of the diagonal of the full matrix."""
        out = np.zeros(self.dim)
        for t in self.terms:
            left = prod(self.dims[t.site + 2:])
            right = prod(self.dims[:t.site])
            out += np.tile(np.repeat(np.real(np.diag(t.block)), right), left)
        if self.dense is not None:
            out += np.real(np.diag(self.dense))
        return out

    def decoupled(self) -> np.ndarray:
        """Mask of basis states that no part links to any other basis state.

        Each such state is an exact eigenvector.  Cancellations between
        terms are not detected, so the mask may be smaller than it could be.
        """
        coupled = np.zeros(self.dim, dtype=bool)
        for t in self.terms:
            row = np.any(t.block - np.diag(np.diag(t.block)) != 0, axis=1)
            left = prod(self.dims[t.site + 2:])
            right = prod(self.dims[:t.site])
            coupled |= np.tile(np.repeat(row, right), left)
        if self.dense is not None:
            coupled |= np.any(self.dense - np.diag(np.diag(self.dense)) != 0, axis=1)
        return ~coupled

    def norm_upper(self) -> float:
        """Cheap upper bound on the spectral norm (triangle inequality)."""
        total = sum(opnorm(t.block) for t in self.terms)
        if self.dense is not None:
            total += opnorm(self.dense)
        return float(total)

    def __repr__(self) -> str:
        kind = "lazy" if self.is_lazy else "dense"
        return f"HermitianOp(dim={self.dim}, {kind}, terms={len(self.terms)})"


def _check_term(t: LocalTerm, dims: tuple[int, ...]) -> None:
    i = t.site
    if not 0 <= i <= len(dims) - 2:
        raise ShapeError(f"two-site term at site {i} does not fit {len(dims)} sites")
    want = dims[i + 1] * dims[i]
    if t.block.shape != (want, want):
        raise ShapeError(f"block shape {t.block.shape} does not match sites ({i + 1}, {i}) of dims {dims}")


def embed_local(block, left_site: int, dims: Sequence[int]) -> HermitianOp:
    """Place a two-site block on sites ``(left_site + 1, left_site)``."""
    m = _real_if_possible(np.asarray(block))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"block must be square, got {m.shape}")
    _check_hermitian(m, "local block")
    return HermitianOp(dims, [LocalTerm(int(left_site), m)])


def opnorm(m) -> float:
    """Largest singular value (0 for an empty matrix)."""
    a = m.to_dense() if isinstance(m, HermitianOp) else np.atleast_2d(np.asarray(m))
    if a.size == 0:
        return 0.0
    if a.shape[0] != a.shape[1]:
        return float(np.linalg.norm(a, 2))
    h_defect, scale = _hermitian_defect(a)
    if h_defect <= 1e-14 * max(scale, 1e-300):
        return float(np.max(np.abs(np.linalg.eigvalsh(a))))
    return float(np.linalg.norm(a, 2))


def _hermitian_dense(op) -> np.ndarray:
    m = _as_matrix(op)
    _check_hermitian(m)
    return (m + m.conj().T) / 2


def ordered_eigs(op, vectors: bool = True) -> Spectrum:
    """Full ascending spectrum of a Hermitian operator of moderate size."""
    if isinstance(op, HermitianOp) and op.dim > dense_cap():
        raise SizeError(f"dimension {op.dim} exceeds the dense cap {dense_cap()}")
    m = _hermitian_dense(op)
    if not vectors:
        return Spectrum(np.linalg.eigvalsh(m))
    w, v = np.linalg.eigh(m)
    res = np.linalg.norm(m @ v - v * w, axis=0)
    return Spectrum(w, v, res)


def _operator_scale(op: HermitianOp, seed: int) -> float:
    if op.dim <= dense_cap():
        return max(1.0, opnorm(op.to_dense()))
    rng = np.random.default_rng(seed)
    try:
        top = eigsh(op.as_linear_operator(), k=1, which="LA", tol=1e-6,
                    v0=rng.standard_normal(op.dim), return_eigenvectors=False)
        return max(1.0, float(abs(top[0])) * (1 + 1e-5))
    except ArpackNoConvergence:
        return max(1.0, op.norm_upper())


GUARD_PAIRS = 8


def lowest_eigs(op, k: int, tol: float = 1e-9, seed: int = 42, maxiter: int | None = None) -> Spectrum:
    """The ``k`` smallest eigenvalues and eigenvectors.

    Dense diagonalization is used up to :func:`dense_cap`; above it the
    implicitly restarted Lanczos solver of ARPACK runs matrix-free from a
    seeded start vector, followed by a Rayleigh-Ritz polish.  Residuals are
    checked against ``tol * max(1, ||op||)``.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if not isinstance(op, HermitianOp):
        op = HermitianOp.from_dense(op)
    k = min(k, op.dim)
    if op.dim <= dense_cap():
        m = _hermitian_dense(op)
        w, v = scipy.linalg.eigh(m, subset_by_index=[0, k - 1])
        res = np.linalg.norm(m @ v - v * w, axis=0)
        return Spectrum(w, v, res, seed)
    diag = op.diagonal()
    if diag is not None:
        # Krylov methods stall on diagonal operators with few distinct levels
        idx = np.argsort(diag, kind="stable")[:k]
        vecs = np.zeros((op.dim, k))
        vecs[idx, np.arange(k)] = 1.0
        return Spectrum(diag[idx], vecs, np.zeros(k), seed)
    if k >= op.dim - 1:
        raise SizeError(f"cannot request {k} eigenpairs of a {op.dim}-dim operator iteratively")
    rng = np.random.default_rng(seed)
    scale = _operator_scale(op, seed)
    lin = op.as_linear_operator()
    # Krylov methods never return basis states that are decoupled from the
    # rest of the space, so those are read off the diagonal and the solver
    # only sees the coupled part
    free = op.decoupled()
    vals, cols = [], []
    if free.any():
        idx = np.flatnonzero(free)
        dvals = op.diagonal_entries()[idx]
        keep = np.argsort(dvals, kind="stable")[:k]
        unit = np.zeros((op.dim, keep.size), dtype=op.dtype)
        unit[idx[keep], np.arange(keep.size)] = 1.0
        vals.append(dvals[keep])
        cols.append(unit)
        mask = ~free
        big = 4.0 * scale

        def mv(x):
            x = np.asarray(x).reshape(op.dim, -1)
            return op.matmat(x * mask[:, None]) * mask[:, None] + big * (x * free[:, None])

        lin = LinearOperator(lin.shape, matvec=mv, matmat=mv, dtype=op.dtype)
    n_rest = op.dim - int(free.sum())
    if n_rest > 0:
        # extra Ritz pairs guard against Lanczos skipping a tight low cluster
        k_run = min(n_rest, k + GUARD_PAIRS)
        if k_run >= n_rest - 1:
            rest = np.flatnonzero(~free)
            sub = _compress_to_indices(op, rest)
            w, u = scipy.linalg.eigh(sub, subset_by_index=[0, min(k, rest.size) - 1])
            v = np.zeros((op.dim, w.size), dtype=np.result_type(op.dtype, u.dtype))
            v[rest] = u
        else:
            w, v = _lanczos(lin, op.dim, k_run, rng, op.dtype, tol, maxiter)
            if free.any():
                w, v = w[w < 0.5 * big], v[:, w < 0.5 * big]
        vals.append(w)
        cols.append(v)
    order = np.argsort(np.concatenate(vals), kind="stable")[:k]
    q, _ = np.linalg.qr(np.hstack(cols)[:, order])
    aq = op.matmat(q)
    small = q.conj().T @ aq
    ws, u = np.linalg.eigh((small + small.conj().T) / 2)
    vecs = q @ u
    res = np.linalg.norm(aq @ u - vecs * ws, axis=0)
    if np.max(res) > max(tol, 1e-8) * scale:
        raise ConvergenceError("Lanczos residuals above tolerance", float(np.max(res)))
    return Spectrum(ws, vecs, res, seed)


def _compress_to_indices(op, idx, chunk=256):
    # principal submatrix on the basis states ``idx``, built column by column
    out = np.zeros((idx.size, idx.size), dtype=op.dtype)
    for a in range(0, idx.size, chunk):
        part = idx[a:a + chunk]
        unit = np.zeros((op.dim, part.size), dtype=op.dtype)
        unit[part, np.arange(part.size)] = 1.0
        out[:, a:a + part.size] = op.matmat(unit)[idx]
    return (out + out.conj().T) / 2


def _lanczos(lin, dim, k, rng, dtype, tol, maxiter):
    v0 = rng.standard_normal(dim)
    if dtype == np.complex128:
        v0 = v0 + 1j * rng.standard_normal(dim)
    ncv = min(dim, max(2 * k + 1, k + 40))
    try:
        return eigsh(lin, k=k, which="SA", v0=v0, ncv=ncv, tol=tol * 1e-2,
                     maxiter=maxiter or 50 * dim // ncv + 1000)
    except ArpackNoConvergence as exc:
        best = float("nan")
        if exc.eigenvectors is not None and exc.eigenvectors.size:
            r = lin.matmat(exc.eigenvectors) - exc.eigenvectors * exc.eigenvalues
            best = float(np.max(np.linalg.norm(r, axis=0)))
        raise ConvergenceError(f"Lanczos did not converge for k={k}", best) from exc


def _classify_kernel(ev: np.ndarray, tol: float, scale: float) -> int:
    cut = tol * scale
    border = ev[(ev >= 0.1 * cut) & (ev <= 10 * cut)]
    if border.size:
        raise DegeneracyAmbiguityError(
            f"eigenvalue {border[0]:.3e} is within the ambiguity window around the kernel cut {cut:.3e}",
            float(border[0]),
        )
    return int(np.count_nonzero(ev < cut))


def null_basis(op, tol: float = 1e-9, seed: int = 42) -> SubspaceBasis:
    """Orthonormal basis of the (numerical) kernel of a PSD operator."""
    if not isinstance(op, HermitianOp):
        op = HermitianOp.from_dense(op)
    if op.dim <= dense_cap():
        spec = ordered_eigs(op)
        ev = spec.eigenvalues
        scale = max(1.0, float(np.max(np.abs(ev))) if ev.size else 1.0)
        if ev.size and ev[0] < -10 * tol * scale:
            raise SymmetryError(f"operator is not PSD (lowest eigenvalue {ev[0]:.3e})")
        n = _classify_kernel(ev, tol, scale)
        return SubspaceBasis(op.dim, spec.eigenvectors[:, :n], tol, ev[:n])
    scale = _operator_scale(op, seed)
    k = 8
    while True:
        k = min(k, op.dim - 2)
        spec = lowest_eigs(op, k, tol=tol, seed=seed)
        ev = spec.eigenvalues
        if ev[0] < -10 * tol * scale:
            raise SymmetryError(f"operator is not PSD (lowest eigenvalue {ev[0]:.3e})")
        n = _classify_kernel(ev, tol, scale)
        if n < k or k >= op.dim - 2:
            return SubspaceBasis(op.dim, spec.eigenvectors[:, :n], tol, ev[:n])
        k *= 2


def restrict(op, basis) -> np.ndarray:
    """Matrix of ``op`` compressed to the span of ``basis``: ``B^dag op B``."""
    cols = basis.columns if isinstance(basis, SubspaceBasis) else np.asarray(basis)
    if isinstance(op, HermitianOp):
        if op.dim != cols.shape[0]:
            raise ShapeError(f"operator dim {op.dim} does not match basis ambient dim {cols.shape[0]}")
        img = op.matmat(cols)
    else:
        m = _as_matrix(op)
        if m.shape[0] != cols.shape[0]:
            raise ShapeError(f"operator dim {m.shape[0]} does not match basis ambient dim {cols.shape[0]}")
        img = m @ cols
    out = cols.conj().T @ img
    return _real_if_possible((out + out.conj().T) / 2)
