"""Teleportation chain: qutrit pairs joined by Bell-pair and measurement terms.

Qutrit levels are ordered ``(0, 1, IDLE)``.  A composite spin is a pair of
adjacent qutrits (dimension 9), and the chain carries a qubit at each end.
States are written left to right as tensor factors; the leftmost factor is
the highest site index, so a segment vector ``kron(q_1, ..., q_{2m})`` has
``q_1`` on its highest site.  Every coupling is symmetric under reflection,
so reading the chain in either direction gives the same formulas.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin, sqrt

import numpy as np

from ..chain import ChainSpec
from ..errors import DomainError, ModelInconsistencyError
from ..operators import HermitianOp, LocalTerm
from ..renorm import (
    CommutingSplit,
    GroundSpace,
    commuting_split,
    coupling_from_reduced,
    segment_ground_space,
)

__all__ = [
    "IDLE",
    "BoundaryForms",
    "bell",
    "coupling_prefactor",
    "end_qutrit_reduced",
    "flank",
    "h_bell",
    "h_measure",
    "k_matrix",
    "m_map",
    "normalizations",
    "psi_ab",
    "psi_columns",
    "qutrit_chain",
    "segment_coupling",
    "single_composite_coupling",
    "teleport_boundary_forms",
    "teleport_delta",
    "teleport_ground_basis",
    "teleport_htilde",
    "teleport_overlaps",
    "teleport_spec",
    "two_qutrit_reduced",
]

IDLE = 2
I3 = np.eye(3)
I9 = np.eye(9)


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta < np.pi / 2:
        raise DomainError(f"theta must lie in [0, pi/2), got {theta}")


def _ket(*levels: int, dim: int = 3) -> np.ndarray:
    out = np.ones(1)
    for lv in levels:
        e = np.zeros(dim)
        e[lv] = 1.0
        out = np.kron(out, e)
    return out


def bell() -> np.ndarray:
    """``(|00> + |11>)/sqrt(2)`` on two qutrits."""
    return (_ket(0, 0) + _ket(1, 1)) / sqrt(2)


def h_bell() -> np.ndarray:
    """Bell-pair term on two qutrits: penalizes 01, 10 and 00 - 11."""
    minus = (_ket(0, 0) - _ket(1, 1)) / sqrt(2)
    return (np.outer(_ket(0, 1), _ket(0, 1)) + np.outer(_ket(1, 0), _ket(1, 0))
            + np.outer(minus, minus))


def h_measure(theta: float) -> np.ndarray:
    """Measurement term on two qutrits, a sum of five orthogonal projectors."""
    out = np.zeros((9, 9))
    for b in (0, 1):
        for v in (_ket(IDLE, b), _ket(b, IDLE)):
            out += np.outer(v, v)
    w = sin(theta) * bell() - cos(theta) * _ket(IDLE, IDLE)
    return out + np.outer(w, w)


def _embed_qubit(h: np.ndarray, qubit_side: str) -> np.ndarray:
    """Restrict a two-qutrit operator to qutrit (x) qubit or qubit (x) qutrit."""
    iso = np.eye(3)[:, :2]
    if qubit_side == "right":
        v = np.kron(I3, iso)
    else:
        v = np.kron(iso, I3)
    return v.T @ h @ v


def teleport_spec(theta: float) -> ChainSpec:
    """Composite-spin chain spec (d = 9) with qubit boundaries (d0 = d_end = 2)."""
    _check_theta(theta)
    hb, hp = h_bell(), h_measure(theta)
    hbar = (np.kron(np.kron(I3, hb), I3) + np.kron(I9, hp / 2) + np.kron(hp / 2, I9))
    h_first = np.kron(I3, _embed_qubit(hb, "right")) + np.kron(hp / 2, np.eye(2))
    h_last = np.kron(_embed_qubit(hb, "left"), I3) + np.kron(np.eye(2), hp / 2)
    return ChainSpec(9, 2, 2, hbar, h_first, h_last, theta=float(theta), name="teleport")


def m_map(theta: float) -> np.ndarray:
    """The 9x9 map sending a Bell-paired composite to its measured history."""
    p01 = np.diag([1.0, 1.0, 0.0])
    lo = np.zeros((3, 3))
    lo[IDLE, 0] = 1.0
    l1 = np.zeros((3, 3))
    l1[IDLE, 1] = 1.0
    return cos(theta) * np.kron(p01, p01) + sin(theta) / sqrt(2) * (np.kron(lo, lo) + np.kron(l1, l1))


def psi_ab(m: int, a: int, b: int, theta: float) -> np.ndarray:
    """Unnormalized ground state of an ``m``-composite segment with end labels a, b."""
    if m < 1:
        raise DomainError("segment length must be at least 1")
    vec = _ket(a)
    for _ in range(m - 1):
        vec = np.kron(vec, bell())
    vec = np.kron(vec, _ket(b))
    mm = m_map(theta)
    t = vec.reshape([9] * m)
    for k in range(m):
        t = np.moveaxis(np.tensordot(mm, t, axes=([1], [k])), 0, k)
    return t.reshape(-1)


def _ratios(m: int, theta: float) -> tuple[float, float]:
    """``(x, r^m)`` with ``x = cos^2 + sin^2/4`` and ``r = (sin^2/4) / x``."""
    c2, q = cos(theta) ** 2, sin(theta) ** 2 / 4
    x = c2 + q
    return x, (q / x) ** m


def teleport_overlaps(ell_bar: int, theta: float) -> tuple[float, float]:
    """Overlap recursion scalars ``(alpha, beta)`` after ``ell_bar - 1`` steps."""
    if ell_bar < 1:
        raise DomainError("ell_bar must be at least 1")
    c2, q = cos(theta) ** 2, sin(theta) ** 2 / 4
    n = ell_bar - 1
    return (c2 + q) ** n - q ** n, q ** n


def normalizations(m: int, theta: float) -> tuple[float, float]:
    """``(N0, N)`` normalizing the symmetric and the other three states."""
    c2, q = cos(theta) ** 2, sin(theta) ** 2 / 4
    x = c2 + q
    return 1.0 / sqrt(x ** m + 3 * q ** m), 1.0 / sqrt(x ** m - q ** m)


def psi_columns(m: int, theta: float) -> np.ndarray:
    """The four orthonormal segment ground states as columns, ordered 0..3."""
    _check_theta(theta)
    p = {(a, b): psi_ab(m, a, b, theta) for a in (0, 1) for b in (0, 1)}
    n0, n = normalizations(m, theta)
    cols = [
        n0 * (p[0, 0] + p[1, 1]),
        n * (p[0, 1] + p[1, 0]),
        n * (p[0, 1] - p[1, 0]),
        n * (p[0, 0] - p[1, 1]),
    ]
    return np.stack(cols, axis=1) / sqrt(2)


def teleport_ground_basis(ell_bar: int, theta: float, tol: float = 1e-9) -> GroundSpace:
    """Closed-form ground space of an ``ell_bar``-composite segment (d_bar = 4)."""
    if ell_bar < 2:
        raise DomainError("teleport segments need at least two composite spins")
    spec = teleport_spec(theta)
    return segment_ground_space(spec, ell_bar, tol=tol, closed_form=lambda m: psi_columns(m, theta),
                                labels=("Psi0", "Psi1", "Psi2", "Psi3"))


# Link bond I x H^B x I in the basis {Phi+, Psi+, Psi-, Phi-}^(x2) of the
# two segments' end-qutrit pairs.
_K_QUARTERS = np.array([
    [3, 0, 0, 0, 0, -1, 0, 0, 0, 0, 1, 0, 0, 0, 0, -1],
    [0, 3, 0, 0, -1, 0, 0, 0, 0, 0, 0, 1, 0, 0, -1, 0],
    [0, 0, 3, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0, -1, 0, 0],
    [0, 0, 0, 3, 0, 0, 1, 0, 0, -1, 0, 0, -1, 0, 0, 0],
    [0, -1, 0, 0, 3, 0, 0, 0, 0, 0, 0, 1, 0, 0, -1, 0],
    [-1, 0, 0, 0, 0, 3, 0, 0, 0, 0, 1, 0, 0, 0, 0, -1],
    [0, 0, 0, 1, 0, 0, 3, 0, 0, 1, 0, 0, 1, 0, 0, 0],
    [0, 0, 1, 0, 0, 0, 0, 3, 1, 0, 0, 0, 0, 1, 0, 0],
    [0, 0, -1, 0, 0, 0, 0, 1, 3, 0, 0, 0, 0, -1, 0, 0],
    [0, 0, 0, -1, 0, 0, 1, 0, 0, 3, 0, 0, -1, 0, 0, 0],
    [1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 3, 0, 0, 0, 0, 1],
    [0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0, 3, 0, 0, 1, 0],
    [0, 0, 0, -1, 0, 0, 1, 0, 0, -1, 0, 0, 3, 0, 0, 0],
    [0, 0, -1, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0, 3, 0, 0],
    [0, -1, 0, 0, -1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 3, 0],
    [-1, 0, 0, 0, 0, -1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 3],
])

# Boundary bonds at theta = 0.  The near end acts on (Bell pair, qubit 0),
# the far end on (qubit ell+1, Bell pair); the far block is the mirror image
# of the near one.
_NEAR_QUARTERS = np.array([
    [3, 0, 0, -1, 0, -1, -1, 0],
    [0, 3, -1, 0, 1, 0, 0, 1],
    [0, -1, 3, 0, 1, 0, 0, 1],
    [-1, 0, 0, 3, 0, -1, -1, 0],
    [0, 1, 1, 0, 3, 0, 0, -1],
    [-1, 0, 0, -1, 0, 3, -1, 0],
    [-1, 0, 0, -1, 0, -1, 3, 0],
    [0, 1, 1, 0, -1, 0, 0, 3],
])
_FAR_QUARTERS = np.array([
    [3, 0, 0, -1, 0, -1, 1, 0],
    [0, 3, -1, 0, -1, 0, 0, 1],
    [0, -1, 3, 0, -1, 0, 0, 1],
    [-1, 0, 0, 3, 0, -1, 1, 0],
    [0, -1, -1, 0, 3, 0, 0, 1],
    [-1, 0, 0, -1, 0, 3, 1, 0],
    [1, 0, 0, 1, 0, 1, 3, 0],
    [0, 1, 1, 0, 1, 0, 0, 3],
])


def k_matrix() -> np.ndarray:
    """The fixed 16x16 link matrix with entries in {0, +-1/4, 3/4}."""
    return _K_QUARTERS / 4.0


def teleport_delta(m: int, theta: float) -> float:
    """Normalization defect ``4 (1 - N0/N)`` of a length-``m`` segment."""
    if m < 1:
        raise DomainError("length must be at least 1")
    _, rm = _ratios(m, theta)
    return 4.0 * (1.0 - sqrt((1.0 - rm) / (1.0 + 3.0 * rm)))


def flank(m: int, theta: float) -> np.ndarray:
    """``diag(1 - delta/4, 1, 1, 1)`` for a length-``m`` segment."""
    return np.diag([1.0 - teleport_delta(m, theta) / 4.0, 1.0, 1.0, 1.0])


def coupling_prefactor(m1: int, m2: int, theta: float) -> float:
    """``N(m1)^2 N(m2)^2 cos^4 x^(m1+m2-2)`` evaluated without underflow."""
    x, r1 = _ratios(m1, theta)
    _, r2 = _ratios(m2, theta)
    return cos(theta) ** 4 / (x * x * (1.0 - r1) * (1.0 - r2))


def segment_coupling(m1: int, m2: int, theta: float) -> np.ndarray:
    """Closed-form link bond between segments of lengths ``m1`` (left) and ``m2``."""
    if m1 < 2 or m2 < 2:
        raise DomainError("closed-form coupling needs both segments of length >= 2")
    ff = np.kron(flank(m1, theta), flank(m2, theta))
    return ff @ (coupling_prefactor(m1, m2, theta) * k_matrix()) @ ff


def teleport_htilde(ell_bar: int, theta: float, h_bar: np.ndarray | None = None,
                    tol: float = 1e-10) -> CommutingSplit:
    """Commuting split with ``h_tilde`` proportional to the K matrix.

    ``h_bar`` defaults to the closed-form coupling; pass a numerically
    restricted coupling to split that instead.
    """
    _check_theta(theta)
    if h_bar is None:
        h_bar = segment_coupling(ell_bar, ell_bar, theta)
    h_tilde = coupling_prefactor(ell_bar, ell_bar, theta) * k_matrix()
    split = commuting_split(h_bar, strategy="model", h_tilde=h_tilde, tol=tol)
    bound = teleport_delta(ell_bar, theta)
    if split.delta > bound * (1 + 1e-12) + 1e-14:
        raise ModelInconsistencyError(f"||k_bar|| = {split.delta:.3e} exceeds delta({ell_bar}) = {bound:.3e}")
    return split


def _reduced_scalars(m: int, theta: float):
    """Overlap scalars scaled by ``x^(1-m)`` with matching normalizations."""
    x, rm = _ratios(m, theta)
    r1 = _ratios(m - 1, theta)[1]
    alpha, beta = 1.0 - r1, r1
    n0sq = 1.0 / (x * (1.0 + 3.0 * rm))
    nsq = 1.0 / (x * (1.0 - rm))
    return alpha, beta, n0sq, nsq


def _psi_coefficients(n0: float, n: float) -> np.ndarray:
    # rows: Psi_z, columns: psi_ab ordered (00, 01, 10, 11)
    return np.array([
        [n0, 0, 0, n0],
        [0, n, n, 0],
        [0, n, -n, 0],
        [n, 0, 0, -n],
    ]) / sqrt(2)


def end_qutrit_reduced(m: int, theta: float, side: str = "last") -> np.ndarray:
    """Closed-form end-qutrit matrix elements ``R[z, z', y, y']`` of the segment basis.

    Uses the single-qutrit trace formula for the ``psi_ab`` states; the last
    qutrit follows from the first by reflection, which exchanges ``a`` and ``b``.
    Valid for any ``m >= 1`` without building the ``9^m`` vectors.
    """
    _check_theta(theta)
    c2, s2 = cos(theta) ** 2, sin(theta) ** 2
    alpha, beta, n0sq, nsq = _reduced_scalars(m, theta)
    labels = [(0, 0), (0, 1), (1, 0), (1, 1)]
    # red[(a b), (a' b')] = Tr_rest |psi_ab><psi_a'b'| on the chosen end qutrit
    red = np.zeros((4, 4, 3, 3))
    for i, (a, b) in enumerate(labels):
        for j, (a2, b2) in enumerate(labels):
            if side == "first":
                near, far, near2, far2 = a, b, a2, b2
            elif side == "last":
                near, far, near2, far2 = b, a, b2, a2
            else:
                raise ValueError(f"side must be 'first' or 'last', got {side!r}")
            t = np.zeros((3, 3))
            if far == far2:
                t[near, near2] += c2 * (alpha + beta)
            t[IDLE, IDLE] += s2 * ((near == near2 and far == far2) * alpha / 4
                                   + (a == b and a2 == b2) * beta / 2)
            red[i, j] = t
    coeff = _psi_coefficients(sqrt(n0sq), sqrt(nsq))
    # <Psi_z| (|y><y'|) |Psi_z'> = sum C[z,i] C[z',j] red[j, i][y', y]
    return np.einsum("zi,wj,jiba->zwab", coeff, coeff, red)


def two_qutrit_reduced(m: int, a: int, b: int, a2: int, b2: int, theta: float) -> np.ndarray:
    """Conjectured partial trace onto the first two qutrits of ``|psi_ab><psi_a'b'|``."""
    _check_theta(theta)
    alpha, beta = (0.0, 1.0) if m == 1 else teleport_overlaps(m, theta)
    e = np.eye(3)
    inner = (alpha / 2) * (b == b2) * np.diag([1.0, 1.0, 1.0]) + beta * np.outer(e[b], e[b2])
    mm = m_map(theta)
    return mm @ np.kron(np.outer(e[a], e[a2]), inner) @ mm.T


def single_composite_coupling(m: int, theta: float) -> np.ndarray:
    """The bond to one free composite spin, compressed to ``Psi(m) (x) C^9`` (36x36)."""
    left = end_qutrit_reduced(m, theta, "last")
    right = np.einsum("kw,lv->klwv", np.eye(9), np.eye(9))
    bond = coupling_from_reduced(np.kron(h_bell(), I3), left, right)
    return bond + np.kron(np.eye(4), h_measure(theta) / 2)


def _boundary_prefactor(ell: int, theta: float) -> float:
    x, rl = _ratios(ell, theta)
    return cos(theta) ** 2 / (x * (1.0 - rl))


@dataclass(frozen=True)
class BoundaryForms:
    """Boundary bonds compressed to ``{qubit} (x) Psi(ell) (x) {qubit}``."""

    h_bar_0: np.ndarray
    h_bar_end: np.ndarray
    h_tilde_0: np.ndarray
    h_tilde_end: np.ndarray
    c1_lower: float
    prefactor: float
    kernel_dim: int


def teleport_boundary_forms(ell: int, theta: float) -> BoundaryForms:
    """Closed-form boundary matrices and the lower bound on their gap."""
    _check_theta(theta)
    if ell < 2:
        raise DomainError("boundary forms need ell >= 2 composite spins")
    pref = _boundary_prefactor(ell, theta)
    i2 = np.eye(2)
    ht0 = pref * np.kron(i2, _NEAR_QUARTERS / 4.0)
    htl = pref * np.kron(_FAR_QUARTERS / 4.0, i2)
    fl = np.kron(np.kron(i2, flank(ell, theta)), i2)
    hb0 = fl @ ht0 @ fl
    hbl = fl @ htl @ fl
    ev = np.linalg.eigvalsh(hb0 + hbl)
    kernel = int(np.count_nonzero(ev < 1e-9 * max(1.0, ev[-1])))
    if kernel != 1:
        raise ModelInconsistencyError(f"boundary compression has a {kernel}-dim kernel, expected 1")
    c1_lower = (1.0 - teleport_delta(ell, theta) / 2.0) * pref
    return BoundaryForms(hb0, hbl, ht0, htl, c1_lower, pref, kernel)


def qutrit_chain(theta: float, ell: int) -> HermitianOp:
    """Full chain at qutrit level: qubit, ``2 ell`` qutrits, qubit (site 0 rightmost)."""
    _check_theta(theta)
    if ell < 1:
        raise DomainError("ell must be at least 1")
    hb, hp = h_bell(), h_measure(theta)
    n = 2 * ell
    dims = [2] + [3] * n + [2]
    terms = [LocalTerm(0, _embed_qubit(hb, "right"))]
    for q in range(1, n):
        # qutrit sites q+1, q; odd q pairs within a composite spin
        terms.append(LocalTerm(q, hp if q % 2 == 1 else hb))
    terms.append(LocalTerm(n, _embed_qubit(hb, "left")))
    return HermitianOp(dims, terms)
