"""Swap chain: a single qubit swapped down a line of qutrits.

Qutrit levels are ordered ``(0, 1, IDLE)``.  States are written left to
right as tensor factors with the leftmost factor on the highest site, which
is also the order the couplings are written in.

The segment ground basis is ordered ``Psi_0(m; 0..m-1), Psi_1(m; 0..m-1),
IDLE^m``, so ``Psi_b(m; j)`` sits at index ``b*m + j`` and the all-IDLE state
at ``2m``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import cos, sin, sqrt, tan

import numpy as np

from ..chain import ChainSpec
from ..errors import DomainError, ModelInconsistencyError
from ..renorm import CommutingSplit, GroundSpace, RenormCoupling, commuting_split, segment_ground_space

__all__ = [
    "IDLE",
    "BoundaryCase",
    "SwapBlocks",
    "basis_index",
    "gamma_basis",
    "gamma_columns",
    "history_state",
    "history_state_closed",
    "swap_block_structure",
    "swap_boundary_operator",
    "swap_boundary_spectrum",
    "swap_coupling_gap",
    "swap_delta_bound",
    "swap_hbar",
    "swap_htilde",
    "swap_spec",
    "swap_weights",
    "v_matrix",
    "v_spectrum",
    "vw_matrices",
    "w_matrix",
    "w_spectrum",
]

IDLE = 2


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta < np.pi / 2:
        raise DomainError(f"theta must lie in [0, pi/2), got {theta}")


def _ket(*levels: int) -> np.ndarray:
    out = np.ones(1)
    for lv in levels:
        out = np.kron(out, np.eye(3)[lv])
    return out


def swap_spec(theta: float) -> ChainSpec:
    """Qutrit chain spec with the swap coupling and its two boundary penalties."""
    _check_theta(theta)
    c, s = cos(theta), sin(theta)
    vecs = [
        s * _ket(0, 0) - c * _ket(0, IDLE),
        s * _ket(0, 1) - c * _ket(1, IDLE),
        _ket(1, 0),
        _ket(1, 1),
    ]
    hbar = sum(np.outer(v, v) for v in vecs)
    eye = np.eye(3)
    one = np.outer(eye[1], eye[1])
    idle = np.outer(eye[IDLE], eye[IDLE])
    h_first = np.kron(eye, one) + hbar
    h_last = np.kron(idle, eye) + hbar
    return ChainSpec(3, 3, 3, hbar, h_first, h_last, theta=float(theta), name="swap")


def history_state(m: int, b: int, j: int, theta: float) -> np.ndarray:
    """``IDLE^j (x) Psi_b(m - j; 0)`` built by the two-qutrit recursion."""
    _check_theta(theta)
    if b not in (0, 1) or not 0 <= j < m:
        raise DomainError(f"need b in {{0, 1}} and 0 <= j < m, got b={b}, j={j}, m={m}")
    c, s = cos(theta), sin(theta)
    # |0> -> psi_0 and |1> -> psi_1 on the leading qutrit; nothing starts with IDLE
    grow = np.zeros((9, 3))
    grow[:, 0] = c * _ket(0, 0) + s * _ket(0, IDLE)
    grow[:, 1] = c * _ket(0, 1) + s * _ket(1, IDLE)
    vec = _ket(b)
    for _ in range(m - j - 1):
        vec = (grow @ vec.reshape(3, -1)).reshape(-1)
    return np.kron(_ket(*([IDLE] * j)), vec) if j else vec


def history_state_closed(m: int, b: int, j: int, theta: float) -> np.ndarray:
    """Same state from the explicit product and sum forms."""
    _check_theta(theta)
    c, s = cos(theta), sin(theta)
    n = m - j
    psi = c * _ket(0) + s * _ket(IDLE)

    def power(v, k):
        out = np.ones(1)
        for _ in range(k):
            out = np.kron(out, v)
        return out

    if b == 0:
        core = np.kron(_ket(0), power(psi, n - 1))
    elif n == 1:
        core = _ket(1)
    else:
        core = s ** (n - 1) * np.kron(_ket(1), power(_ket(IDLE), n - 1))
        for k in range(n - 1):
            tail = np.kron(np.kron(power(psi, n - 2 - k), _ket(1)), power(_ket(IDLE), k))
            core = core + c * s**k * np.kron(_ket(0), tail)
    return np.kron(power(_ket(IDLE), j), core)


def basis_index(m: int, b: int | None, j: int | None = None) -> int:
    """Position of ``Psi_b(m; j)`` in the ground basis; ``b=None`` is all-IDLE."""
    if b is None:
        return 2 * m
    return b * m + j


def gamma_columns(m: int, theta: float, closed: bool = False) -> np.ndarray:
    """The ``2m + 1`` ground states of an ``m``-qutrit segment as columns."""
    build = history_state_closed if closed else history_state
    cols = [build(m, b, j, theta) for b in (0, 1) for j in range(m)]
    cols.append(_ket(*([IDLE] * m)))
    return np.stack(cols, axis=1)


def gamma_basis(ell_bar: int, theta: float, tol: float = 1e-9) -> GroundSpace:
    """Segment ground space from the history-state recursion.

    The recursive and explicit constructions are compared entrywise; a
    mismatch means the closed forms are wrong for this input.
    """
    if ell_bar < 1:
        raise DomainError("segment length must be at least 1")
    rec = gamma_columns(ell_bar, theta)
    closed = gamma_columns(ell_bar, theta, closed=True)
    err = float(np.max(np.abs(rec - closed)))
    if err > 1e-12:
        raise ModelInconsistencyError(f"history-state constructions disagree by {err:.3e}")
    labels = tuple(f"Psi{b}({j})" for b in (0, 1) for j in range(ell_bar)) + ("IDLE",)
    return segment_ground_space(swap_spec(theta), ell_bar, tol=tol, closed_form=lambda m: rec, labels=labels)


def v_matrix(m: int, theta: float) -> np.ndarray:
    """The ``m x m`` arrowhead matrix with first row ``t^2, -s, ..., -s^(m-2), -t s^(m-2)``."""
    if m < 2:
        raise DomainError("V(m) needs m >= 2")
    _check_theta(theta)
    s, t = sin(theta), tan(theta)
    out = np.eye(m)
    row = np.array([-(s**k) for k in range(1, m - 1)] + [-t * s ** (m - 2)])
    out[0, 0] = t * t
    out[0, 1:] = row
    out[1:, 0] = row
    return out


def w_matrix(m: int, theta: float) -> np.ndarray:
    """``V(m)`` with its last row and column removed (size ``m - 1``)."""
    return v_matrix(m, theta)[:-1, :-1]


def v_spectrum(m: int, theta: float) -> np.ndarray:
    """Closed-form eigenvalues of ``V(m)``, ascending."""
    return np.array([0.0] + [1.0] * (m - 2) + [1.0 / cos(theta) ** 2])


def w_spectrum(m: int, theta: float) -> np.ndarray:
    """Closed-form eigenvalues of ``W(m - 1)``, ascending."""
    c2 = cos(theta) ** 2
    root = sqrt(max(0.0, 1.0 - 4.0 * c2 * sin(theta) ** (2 * (m - 1))))
    return np.array([(1.0 - root) / (2 * c2)] + [1.0] * (m - 3) + [(1.0 + root) / (2 * c2)])


def vw_matrices(m: int, theta: float):
    """``(V(m), W(m-1), (spec_V, spec_W))`` for ``m >= 3``."""
    if m < 3:
        raise DomainError("V/W pair needs m >= 3")
    return v_matrix(m, theta), w_matrix(m, theta), (v_spectrum(m, theta), w_spectrum(m, theta))


def swap_weights(m: int, theta: float) -> np.ndarray:
    """Block weights ``a_j``: ``cos^2`` for ``j <= m-2`` and 1 for the last."""
    a = np.full(m, cos(theta) ** 2)
    a[-1] = 1.0
    return a


def _coupling_entries(m1: int, m2: int, theta: float, keep_small: bool):
    """Nonzero entries ``(row, col, value)`` of the link bond in the ground bases.

    ``keep_small=False`` drops the couplings that vanish with the segment
    length, which yields the commuting part.
    """
    c, s = cos(theta), sin(theta)
    c2, s2 = c * c, s * s
    d2 = 2 * m2 + 1
    a = swap_weights(m1, theta) if m1 > 1 else np.ones(1)
    idle_r = basis_index(m2, None)
    entries = []

    def at(left, right):
        return left * d2 + right

    for j in range(m1):
        aj = a[j]
        l0, l1 = basis_index(m1, 0, j), basis_index(m1, 1, j)
        # left Psi_0(j): the commuting diagonal part
        for b in (0, 1):
            entries.append((at(l0, basis_index(m2, b, 0)),) * 2 + (aj * s2,))
            for k in range(1, m2):
                entries.append((at(l0, basis_index(m2, b, k)),) * 2 + (aj * c2,))
        entries.append((at(l0, idle_r),) * 2 + (aj * c2,))
        # left Psi_1(j): diagonal
        for b in (0, 1):
            entries.append((at(l1, basis_index(m2, b, 0)),) * 2 + (aj,))
            for k in range(1, m2):
                entries.append((at(l1, basis_index(m2, b, k)),) * 2 + (aj * c2,))
        entries.append((at(l1, idle_r),) * 2 + (aj * c2,))
        # transitions Psi_b(0) <-> Psi_b(k) on the right segment
        last = m2 - 1 if keep_small else m2 - 2
        for b in (0, 1):
            for k in range(1, last + 1):
                v = -aj * c2 * s**k
                p, q = at(l0, basis_index(m2, b, 0)), at(l0, basis_index(m2, b, k))
                entries += [(p, q, v), (q, p, v)]
        if keep_small:
            v = -aj * c * s**m2
            p, q = at(l0, basis_index(m2, 0, 0)), at(l0, idle_r)
            entries += [(p, q, v), (q, p, v)]
            p, q = at(l0, basis_index(m2, 1, 0)), at(l1, idle_r)
            entries += [(p, q, v), (q, p, v)]
    return entries


def _assemble(m1: int, m2: int, theta: float, keep_small: bool) -> np.ndarray:
    n = (2 * m1 + 1) * (2 * m2 + 1)
    out = np.zeros((n, n))
    for p, q, v in _coupling_entries(m1, m2, theta, keep_small):
        out[p, q] += v
    return out


def swap_hbar(ell_bar: int, theta: float, right_len: int | None = None) -> RenormCoupling:
    """Closed-form link bond in the ground bases, assembled block by block.

    ``right_len`` gives the right segment a different length; both segments
    may have any length >= 1.
    """
    _check_theta(theta)
    m2 = ell_bar if right_len is None else right_len
    if ell_bar < 1 or m2 < 1:
        raise DomainError("segment lengths must be at least 1")
    h = _assemble(ell_bar, m2, theta, keep_small=True)
    return RenormCoupling(h, 2 * ell_bar + 1, 2 * m2 + 1)


def swap_delta_bound(ell_bar: int, theta: float) -> float:
    """``2 cos(theta) sin(theta)^(ell_bar - 1)``, the bound on the dropped part."""
    return 2.0 * cos(theta) * sin(theta) ** (ell_bar - 1)


def swap_htilde(ell_bar: int, theta: float, h_bar: np.ndarray | None = None,
                tol: float = 1e-10) -> CommutingSplit:
    """Commuting split that drops the exponentially small couplings."""
    _check_theta(theta)
    if ell_bar < 2:
        raise DomainError("swap segments need ell_bar >= 2")
    if h_bar is None:
        h_bar = swap_hbar(ell_bar, theta).h_bar
    h_tilde = _assemble(ell_bar, ell_bar, theta, keep_small=False)
    split = commuting_split(h_bar, strategy="model", h_tilde=h_tilde, tol=tol)
    bound = swap_delta_bound(ell_bar, theta)
    if split.delta > bound * (1 + 1e-12) + 1e-14:
        raise ModelInconsistencyError(f"||k_bar|| = {split.delta:.3e} exceeds {bound:.3e}")
    return split


def swap_coupling_gap(m1: int, m2: int, theta: float) -> float:
    """Lowest positive eigenvalue of the bond between segments of lengths m1, m2.

    The bond splits into arrowhead blocks ``a V(m2 + 1)`` and diagonal entries,
    so the gap is ``a_min cos^2`` when ``m2 >= 2`` and ``a_min`` when ``m2 = 1``,
    with ``a_min = cos^2`` unless ``m1 = 1``.
    """
    c2 = cos(theta) ** 2
    a_min = c2 if m1 >= 2 else 1.0
    return a_min * (c2 if m2 >= 2 else 1.0)


@dataclass(frozen=True)
class SwapBlocks:
    """Index sets of the invariant blocks of the bond."""

    blocks: tuple
    zero_block: tuple


def swap_block_structure(ell_bar: int) -> SwapBlocks:
    """Blocks of size ``4 ell_bar + 2`` (one per left ``j``) plus the left-IDLE zero block."""
    d = 2 * ell_bar + 1
    blocks = []
    for j in range(ell_bar):
        rows = []
        for b in (0, 1):
            left = basis_index(ell_bar, b, j)
            rows += [left * d + r for r in range(d)]
        blocks.append(tuple(rows))
    idle = basis_index(ell_bar, None)
    return SwapBlocks(tuple(blocks), tuple(idle * d + r for r in range(d)))


@dataclass(frozen=True)
class BoundaryCase:
    value: float
    multiplicity: int
    label: str


def swap_boundary_operator(ell: int, theta: float) -> np.ndarray:
    """The end penalties restricted to the ground space of ``ell + 2`` qutrits.

    Diagonal in the ground basis: ``IDLE`` on the top site hits every state
    with ``j >= 1``; ``|1><1|`` on site 0 hits ``Psi_1`` with weight ``cos^2``,
    except the last one, which ends in ``|1>`` outright.
    """
    m = ell + 2
    c2 = cos(theta) ** 2
    diag = np.zeros(2 * m + 1)
    for b in (0, 1):
        for j in range(m):
            # the last history state is IDLE^(m-1)|b>, full weight on site 0
            diag[basis_index(m, b, j)] = (j >= 1) + b * (1.0 if j == m - 1 else c2)
    diag[basis_index(m, None)] = 1.0
    return np.diag(diag)


def swap_boundary_spectrum(ell: int, theta: float) -> list[BoundaryCase]:
    """Spectrum of the compressed end penalties as labelled cases.

    The state ``IDLE^(ell+1) |1>`` ends in ``|1>`` with full weight, so it
    sits at 2 rather than with the other ``Psi_1(j >= 1)`` at ``cos^2 + 1``.
    """
    _check_theta(theta)
    if ell < 0:
        raise DomainError("ell must be non-negative")
    c2 = cos(theta) ** 2
    return [
        BoundaryCase(0.0, 1, "Psi0(0)"),
        BoundaryCase(c2, 1, "Psi1(0)"),
        BoundaryCase(1.0, ell + 2, "Psi0(j>=1), IDLE"),
        BoundaryCase(c2 + 1.0, ell, "Psi1(1<=j<=ell)"),
        BoundaryCase(2.0, 1, "Psi1(ell+1)"),
    ]
