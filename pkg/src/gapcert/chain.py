"""Chain specifications and the Hamiltonians built from them.

A chain of bulk length ``ell`` has sites ``0 .. ell + 1``: site 0 carries
the boundary space of dimension ``d0``, sites ``1 .. ell`` the bulk spins of
dimension ``d`` and site ``ell + 1`` the far boundary of dimension ``d_end``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError
from .operators import HermitianOp, LocalTerm, lowest_eigs, _operator_scale, _real_if_possible

__all__ = [
    "ChainSpec",
    "Partition",
    "build_full_chain",
    "build_linked",
    "build_links",
    "build_open_chain",
    "build_remnant",
    "build_segment",
    "build_unlinked",
    "check_frustration_free",
    "decompose_full_chain",
]

PSD_RTOL = 1e-10


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])


@dataclass(frozen=True)
class ChainSpec:
    """Couplings and local dimensions of a frustration-free chain.

    ``hbar`` acts on ``kron(site i+1, site i)``; ``h_first`` on
    ``kron(site 1, site 0)`` and ``h_last`` on ``kron(site ell+1, site ell)``.
    """

    d: int
    d0: int
    d_end: int
    hbar: np.ndarray
    h_first: np.ndarray
    h_last: np.ndarray
    theta: float | None = None
    name: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        checks = (
            ("hbar", self.hbar, self.d * self.d),
            ("h_first", self.h_first, self.d * self.d0),
            ("h_last", self.h_last, self.d_end * self.d),
        )
        for label, m, want in checks:
            m = np.asarray(m)
            if m.shape != (want, want):
                raise ShapeError(f"{label} has shape {m.shape}, expected {(want, want)}")
            if np.linalg.norm(m - m.conj().T) > 1e-12 * max(1.0, np.linalg.norm(m)):
                raise ShapeError(f"{label} is not Hermitian")
            scale = max(1.0, float(np.max(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2)))))
            if _min_eig(m) < -PSD_RTOL * scale:
                raise DomainError(f"{label} is not positive semidefinite")
            object.__setattr__(self, label, _real_if_possible(np.array(m)))

    def digest(self) -> str:
        """Stable hash of dimensions and matrices."""
        h = hashlib.sha256()
        h.update(f"{self.d},{self.d0},{self.d_end}".encode())
        for m in (self.hbar, self.h_first, self.h_last):
            h.update(np.ascontiguousarray(m, dtype=np.complex128).tobytes())
        return h.hexdigest()[:16]

    def to_json(self) -> dict:
        out = {
            "dims": {"d": self.d, "d0": self.d0, "dEnd": self.d_end},
            "matrices": {
                "hbar": _encode_matrix(self.hbar),
                "hFirst": _encode_matrix(self.h_first),
                "hLast": _encode_matrix(self.h_last),
            },
            "name": self.name,
        }
        if self.theta is not None:
            out["theta"] = self.theta
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ChainSpec":
        try:
            dims = data["dims"]
            mats = data["matrices"]
            return cls(
                d=int(dims["d"]), d0=int(dims["d0"]), d_end=int(dims["dEnd"]),
                hbar=_decode_matrix(mats["hbar"]),
                h_first=_decode_matrix(mats["hFirst"]),
                h_last=_decode_matrix(mats["hLast"]),
                theta=data.get("theta"),
                name=data.get("name", "custom"),
            )
        except KeyError as exc:
            raise ShapeError(f"chain spec is missing field {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "ChainSpec":
        return cls.from_json(json.loads(Path(path).read_text()))


def _encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _decode_matrix(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise ShapeError("matrices must be row-major arrays of [re, im] pairs")
    return _real_if_possible(arr[..., 0] + 1j * arr[..., 1])


@dataclass(frozen=True)
class Partition:
    """Split of ``ell`` bulk sites into segments of ``seg_len`` plus a remnant."""

    ell: int
    seg_len: int

    def __post_init__(self):
        if self.seg_len < 2:
            raise DomainError("segment length must be at least 2")
        if self.ell < 0:
            raise DomainError("chain length must be non-negative")

    @property
    def n_seg(self) -> int:
        return self.ell // self.seg_len

    @property
    def remnant(self) -> int:
        return self.ell - self.n_seg * self.seg_len


def build_open_chain(spec: ChainSpec, length: int) -> HermitianOp:
    """Open bulk chain of ``length`` spins with ``length - 1`` bonds."""
    if length < 0:
        raise DomainError("length must be non-negative")
    dims = [spec.d] * length if length else [1]
    terms = [LocalTerm(i, spec.hbar) for i in range(length - 1)]
    return HermitianOp(dims, terms)


def build_segment(spec: ChainSpec, seg_len: int) -> HermitianOp:
    """Hamiltonian of one isolated segment."""
    if seg_len < 1:
        raise DomainError("segment length must be at least 1")
    return build_open_chain(spec, seg_len)


def build_unlinked(spec: ChainSpec, n_seg: int, seg_len: int) -> HermitianOp:
    """``n_seg`` segment copies with no bonds between them."""
    if n_seg < 1:
        raise DomainError("need at least one segment")
    terms = [LocalTerm(k * seg_len + i, spec.hbar) for k in range(n_seg) for i in range(seg_len - 1)]
    return HermitianOp([spec.d] * (n_seg * seg_len), terms)


def build_links(spec: ChainSpec, n_seg: int, seg_len: int) -> HermitianOp:
    """The ``n_seg - 1`` bonds joining consecutive segments."""
    if n_seg < 1:
        raise DomainError("need at least one segment")
    terms = [LocalTerm(k * seg_len - 1, spec.hbar) for k in range(1, n_seg)]
    return HermitianOp([spec.d] * (n_seg * seg_len), terms)


def build_linked(spec: ChainSpec, n_seg: int, seg_len: int) -> HermitianOp:
    """Unlinked segments plus the links between them."""
    if n_seg < 2:
        raise DomainError("a linked chain needs at least two segments")
    return build_unlinked(spec, n_seg, seg_len) + build_links(spec, n_seg, seg_len)


def build_remnant(spec: ChainSpec, remnant_len: int) -> HermitianOp:
    """Open chain on the leftover sites; zero operator for length 0 or 1."""
    return build_open_chain(spec, remnant_len)


def build_full_chain(spec: ChainSpec, ell: int) -> HermitianOp:
    """Chain of ``ell`` bulk spins with both boundary couplings."""
    if ell < 1:
        raise DomainError("the full chain needs ell >= 1")
    dims = [spec.d0] + [spec.d] * ell + [spec.d_end]
    terms = [LocalTerm(0, spec.h_first)]
    terms += [LocalTerm(i, spec.hbar) for i in range(1, ell)]
    terms.append(LocalTerm(ell, spec.h_last))
    return HermitianOp(dims, terms)


def decompose_full_chain(spec: ChainSpec, ell: int, seg_len: int) -> dict[str, HermitianOp]:
    """Pieces of the full chain grouped as segments, links, remnant and boundary.

    The remnant sits on bulk sites ``1 .. r`` next to site 0; segments fill
    the sites above it.  All pieces act on the full-chain site layout and sum
    to :func:`build_full_chain`.
    """
    part = Partition(ell, seg_len)
    dims = [spec.d0] + [spec.d] * ell + [spec.d_end]
    r = part.remnant
    seg, links = [], []
    for k in range(part.n_seg):
        base = 1 + r + k * seg_len
        seg += [LocalTerm(base + i, spec.hbar) for i in range(seg_len - 1)]
        if k:
            links.append(LocalTerm(base - 1, spec.hbar))
    remnant = [LocalTerm(1 + i, spec.hbar) for i in range(r - 1)]
    bridge = [LocalTerm(r, spec.hbar)] if r and part.n_seg else []
    boundary = [LocalTerm(0, spec.h_first), LocalTerm(ell, spec.h_last)]
    return {
        "segments": HermitianOp(dims, seg),
        "links": HermitianOp(dims, links),
        "bridge": HermitianOp(dims, bridge),
        "remnant": HermitianOp(dims, remnant),
        "boundary": HermitianOp(dims, boundary),
    }


def check_frustration_free(op: HermitianOp, tol: float = 1e-9, seed: int = 42) -> tuple[bool, float]:
    """Whether the lowest eigenvalue vanishes relative to the operator norm."""
    lam0 = float(lowest_eigs(op, 1, tol=tol, seed=seed).eigenvalues[0])
    scale = _operator_scale(op, seed)
    return lam0 <= tol * scale, lam0
