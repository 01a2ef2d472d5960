"""Model adapters: what the certifier needs to know about each chain.

Every adapter supplies the renormalized-chain inputs at a segment length,
the gap of a bond compressed to two ground spaces (used to bound segment and
remnant gaps by splitting), and the boundary data.  ``SpecModel`` does all of
this numerically for an arbitrary :class:`ChainSpec`; the built-in models
use closed forms and fall back to numerics only to cross-verify.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import cos

import numpy as np

from ..chain import ChainSpec, build_full_chain, build_segment
from ..errors import DomainError, GapcertError, ModelInconsistencyError, SizeError
from ..operators import ground_gap, lowest_eigs, opnorm
from ..renorm import (
    GroundSpace,
    commuting_split,
    coupling_from_reduced,
    end_reduced,
    kernel_z_and_gtilde,
    renormalized_coupling,
    segment_ground_space,
)
from . import swap, teleport

__all__ = ["MODELS", "ModelAdapter", "RenormInputs", "SpecModel", "SwapModel", "TeleportModel",
           "boundary_compression", "get_model"]

# segments up to this many amplitudes are diagonalized directly
NUMERIC_SEGMENT_CAP = 6561


@dataclass(frozen=True)
class RenormInputs:
    """Quantities entering the renormalized-chain bound at one segment length."""

    d_bar: int
    z: int
    g_bar: float
    g_tilde: float
    delta: float
    eta: float
    comm_residual: float
    strategy: str
    verified_numerically: bool
    delta_computed: float | None = None
    notes: tuple = field(default_factory=tuple)


def _positive_gap(ev: np.ndarray, tol: float) -> float:
    return ground_gap(ev, tol)


def boundary_compression(spec: ChainSpec, gs: GroundSpace) -> np.ndarray:
    """``h_first + h_last`` compressed to ``C^d_end (x) ground(ell) (x) C^d0``."""
    cols = gs.columns
    last = end_reduced(cols, spec.d, "last")
    first = end_reduced(cols, spec.d, "first")
    ident0 = np.einsum("kw,lv->klwv", np.eye(spec.d0), np.eye(spec.d0))
    identn = np.einsum("kw,lv->klwv", np.eye(spec.d_end), np.eye(spec.d_end))
    near = coupling_from_reduced(spec.h_first, last, ident0)
    far = coupling_from_reduced(spec.h_last, identn, first)
    return np.kron(np.eye(spec.d_end), near) + np.kron(far, np.eye(spec.d0))


class ModelAdapter:
    """Interface used by the certifier."""

    id = "abstract"
    closed_form = False
    base_cap = NUMERIC_SEGMENT_CAP

    def spec(self, theta: float | None) -> ChainSpec:
        raise NotImplementedError

    def renorm_inputs(self, ell_bar: int, theta, tol: float, seed: int, split_tol: float) -> RenormInputs:
        raise NotImplementedError

    def coupling_gap(self, m1: int, m2: int, theta) -> float:
        """Lowest positive eigenvalue of the bond on ground(m1) (x) ground(m2)."""
        raise NotImplementedError

    def min_seg_len(self) -> int:
        return 2

    def norm_hbar(self, theta) -> float:
        return opnorm(self.spec(theta).hbar)

    def base_gap(self, m: int, theta, tol: float, seed: int) -> float | None:
        """Exact gap of the open ``m``-site bulk chain when it is small enough."""
        spec = self.spec(theta)
        if m <= 1:
            return float("inf")
        if spec.d**m > self.base_cap:
            return None
        return _open_chain_gap(spec, m, tol, seed)

    def c1_remnant(self, ell_bar: int, theta) -> tuple[float, float | None]:
        """``(numeric at L = ell_bar, closed-form uniform bound or None)``, min over remnants."""
        vals = [self.coupling_gap(ell_bar, r, theta) for r in range(1, ell_bar)]
        return (min(vals) if vals else float("inf")), None

    def c1_boundary(self, ell_bar: int, theta) -> tuple[float, float | None]:
        return self.c1_boundary_at(ell_bar, theta), None

    def c1_boundary_at(self, ell: int, theta) -> float:
        raise NotImplementedError

    def norm_boundary(self, theta) -> float:
        spec = self.spec(theta)
        return opnorm(spec.h_first) + opnorm(spec.h_last)

    def boundary_bulk_length(self, ell: int) -> int:
        """Length of the bulk chain ``B`` in the boundary step for ``ell`` bulk spins."""
        return ell

    def full_chain(self, theta, ell: int):
        return build_full_chain(self.spec(theta), ell)

    def max_crosscheck_ell(self, cap: int = 10**6) -> int:
        spec = self.spec(None)
        ell = 0
        while spec.d0 * spec.d_end * spec.d ** (ell + 1) <= cap:
            ell += 1
        return ell


def _open_chain_gap(spec: ChainSpec, m: int, tol: float, seed: int) -> float:
    op = build_segment(spec, m)
    k = 8
    while True:
        k = min(k, op.dim)
        ev = lowest_eigs(op, k, tol=tol, seed=seed).eigenvalues
        g = ground_gap(ev, max(tol, 1e-8))
        if np.isfinite(g) or k == op.dim:
            return g
        if k >= op.dim - 2:
            k = op.dim
        else:
            k *= 2


class SpecModel(ModelAdapter):
    """Fully numeric adapter for a user-supplied chain."""

    id = "custom"
    closed_form = False

    def __init__(self, spec: ChainSpec):
        self._spec = spec
        self._gs = {}

    def spec(self, theta=None) -> ChainSpec:
        return self._spec

    def ground(self, m: int, tol: float = 1e-9, seed: int = 42) -> GroundSpace:
        key = (m, tol, seed)
        if key not in self._gs:
            if self._spec.d**m > 2**20:
                raise SizeError(f"segment of length {m} is too large for the numeric route")
            self._gs[key] = segment_ground_space(self._spec, m, tol=tol, seed=seed)
        return self._gs[key]

    def renorm_inputs(self, ell_bar, theta, tol, seed, split_tol):
        gs = self.ground(ell_bar, tol, seed)
        if gs.d_bar == 0:
            raise ModelInconsistencyError("segment has no zero-energy states; the chain is not frustration free")
        rc = renormalized_coupling(self._spec, gs)
        split = commuting_split(rc, strategy="threshold", tol=split_tol)
        z, g_tilde = kernel_z_and_gtilde(split, tol=tol, seed=seed)
        g_bar = _positive_gap(np.linalg.eigvalsh(rc.h_bar), tol)
        return RenormInputs(gs.d_bar, z, g_bar, g_tilde, split.delta, split.eta, split.comm_residual,
                            "threshold", True, split.delta)

    def coupling_gap(self, m1, m2, theta=None):
        left, right = self.ground(m1), self.ground(m2)
        h = renormalized_coupling(self._spec, left, right).h_bar
        return _positive_gap(np.linalg.eigvalsh(h), 1e-9)

    def c1_boundary_at(self, ell, theta=None):
        h = boundary_compression(self._spec, self.ground(ell))
        return _positive_gap(np.linalg.eigvalsh(h), 1e-9)


class TeleportModel(ModelAdapter):
    """Composite-spin teleportation chain (d = 9) with qubit ends."""

    id = "teleport"
    closed_form = True
    verify_cap = 4

    def spec(self, theta):
        return teleport.teleport_spec(0.0 if theta is None else theta)

    def renorm_inputs(self, ell_bar, theta, tol, seed, split_tol):
        h_bar = teleport.segment_coupling(ell_bar, ell_bar, theta)
        verified = False
        if ell_bar <= self.verify_cap:
            gs = teleport.teleport_ground_basis(ell_bar, theta, tol=tol)
            numeric = renormalized_coupling(self.spec(theta), gs).h_bar
            err = float(np.max(np.abs(numeric - h_bar)))
            if err > 1e-10:
                raise ModelInconsistencyError(f"closed-form bond differs from restriction by {err:.3e}")
            verified = True
        split = teleport.teleport_htilde(ell_bar, theta, h_bar, tol=split_tol)
        z, g_tilde = kernel_z_and_gtilde(split, tol=tol, seed=seed)
        g_bar = _positive_gap(np.linalg.eigvalsh(h_bar), tol)
        return RenormInputs(4, z, g_bar, g_tilde, split.delta, split.eta, split.comm_residual,
                            "model", verified, split.delta)

    def coupling_gap(self, m1, m2, theta):
        if m1 < 2:
            raise DomainError("left block must hold at least two composite spins")
        if m2 == 1:
            h = teleport.single_composite_coupling(m1, theta)
        else:
            h = teleport.segment_coupling(m1, m2, theta)
        return _positive_gap(np.linalg.eigvalsh(h), 1e-12)

    def c1_remnant(self, ell_bar, theta):
        numeric = [self.coupling_gap(ell_bar, r, theta) for r in range(1, ell_bar)]
        if not numeric:
            return float("inf"), float("inf")
        # a left block of n*ell_bar spins only changes the bond through
        # exponentially small terms: sample the single-spin remnant out to
        # the long-block limit and bound r >= 2 via the flank factors
        closed = [self.coupling_gap(k * ell_bar, 1, theta) for k in (1, 2, 4, 8, 64, 4096)]
        x, _ = teleport._ratios(1, theta)
        shrink_l = 1.0 - teleport.teleport_delta(ell_bar, theta) / 4.0
        for r in range(2, ell_bar):
            _, rr = teleport._ratios(r, theta)
            pref = cos(theta) ** 4 / (x * x * (1.0 - rr))
            closed.append(pref * (shrink_l * (1.0 - teleport.teleport_delta(r, theta) / 4.0)) ** 2)
        return min(numeric), min(closed)

    def c1_boundary_at(self, ell, theta):
        forms = teleport.teleport_boundary_forms(ell, theta)
        return _positive_gap(np.linalg.eigvalsh(forms.h_bar_0 + forms.h_bar_end), 1e-12)

    def c1_boundary(self, ell_bar, theta):
        numeric = self.c1_boundary_at(ell_bar, theta)
        closed, ell = float("inf"), ell_bar
        while True:
            closed = min(closed, teleport.teleport_boundary_forms(ell, theta).c1_lower)
            _, rl = teleport._ratios(ell, theta)
            if rl < 1e-17 or ell > 10**6:
                break
            ell += 1
        return numeric, closed

    def full_chain(self, theta, ell):
        return teleport.qutrit_chain(theta, ell)


class SwapModel(ModelAdapter):
    """Qutrit swap chain; the renormalized inputs are exact closed forms."""

    id = "swap"
    closed_form = True
    verify_cap = 5
    # open swap chains are highly degenerate; stay on the dense path
    base_cap = 3**7

    def spec(self, theta):
        return swap.swap_spec(0.0 if theta is None else theta)

    def norm_hbar(self, theta):
        return 1.0

    def renorm_inputs(self, ell_bar, theta, tol, seed, split_tol):
        c4 = cos(theta) ** 4
        delta = swap.swap_delta_bound(ell_bar, theta)
        notes, verified, delta_computed = [], False, None
        if ell_bar <= self.verify_cap:
            gs = swap.gamma_basis(ell_bar, theta, tol=tol)
            numeric = renormalized_coupling(self.spec(theta), gs).h_bar
            closed = swap.swap_hbar(ell_bar, theta).h_bar
            err = float(np.max(np.abs(numeric - closed)))
            if err > 1e-10:
                raise ModelInconsistencyError(f"closed-form bond differs from restriction by {err:.3e}")
            split = swap.swap_htilde(ell_bar, theta, closed, tol=split_tol)
            z, g_tilde = kernel_z_and_gtilde(split, tol=tol, seed=seed)
            g_bar = _positive_gap(np.linalg.eigvalsh(closed), tol)
            if z != 6 * ell_bar + 1:
                raise ModelInconsistencyError(f"kernel dimension {z}, expected {6 * ell_bar + 1}")
            if g_tilde < c4 * (1 - 1e-9) or abs(g_bar - c4) > 1e-9 or split.eta > 1 + 1e-12:
                raise ModelInconsistencyError("numeric local gaps disagree with the closed forms")
            verified, delta_computed = True, split.delta
            comm = split.comm_residual
        else:
            comm = 0.0
            notes.append("closed form only")
        # analytic inputs: the dropped couplings are bounded by 2 cos sin^(l-1)
        return RenormInputs(2 * ell_bar + 1, 6 * ell_bar + 1, c4, c4, delta, 1.0, comm,
                            "model", verified, delta_computed, tuple(notes))

    def coupling_gap(self, m1, m2, theta):
        return swap.swap_coupling_gap(m1, m2, theta)

    def c1_remnant(self, ell_bar, theta):
        vals = [swap.swap_coupling_gap(ell_bar, r, theta) for r in range(1, ell_bar)]
        numeric = float("inf")
        for r in range(1, ell_bar):
            if (2 * ell_bar + 1) * (2 * r + 1) > 1200:
                break
            ev = np.linalg.eigvalsh(swap.swap_hbar(ell_bar, theta, r).h_bar)
            numeric = min(numeric, _positive_gap(ev, 1e-12))
        return (numeric if np.isfinite(numeric) or not vals else min(vals)), (min(vals) if vals else float("inf"))

    def c1_boundary_at(self, ell, theta):
        ev = np.diag(swap.swap_boundary_operator(ell, theta))
        return _positive_gap(ev, 1e-12)

    def c1_boundary(self, ell_bar, theta):
        return self.c1_boundary_at(ell_bar, theta), cos(theta) ** 2

    def norm_boundary(self, theta):
        # IDLE penalty on the top qutrit plus |1><1| on site 0
        return 2.0

    def boundary_bulk_length(self, ell):
        return ell + 2


MODELS = {"teleport": TeleportModel(), "swap": SwapModel()}


def get_model(model_id: str) -> ModelAdapter:
    try:
        return MODELS[model_id]
    except KeyError:
        raise GapcertError(f"unknown model {model_id!r}; known: {sorted(MODELS)}") from None
