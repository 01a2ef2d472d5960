"""End-to-end gap certification and its exact-diagonalization cross-check.

A run walks five stages for one segment length:

a. segment ground space,
b. renormalized coupling,
c. commuting split,
d. renormalized-chain bound, finite-size witness,
e. remnant and boundary steps, each a two-block lower bound.

If the renormalized bound is not positive the next segment length in the
retry schedule is tried.  Certificates never claim gaplessness.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .chain import ChainSpec
from .errors import (ConvergenceError, DomainError, GapcertError, HypothesisViolatedError,
                     ModelInconsistencyError, SizeError, WitnessNotFoundError)
from .models.registry import ModelAdapter, SpecModel, get_model
from .operators import ground_gap, lowest_eigs
from .renorm import abc_bound, lm_threshold, lm_witness, theorem2_bound, x_threshold

__all__ = [
    "BASE_SCHEDULE",
    "SCHEMA_VERSION",
    "CrosscheckRow",
    "GapCertificate",
    "StageBound",
    "assembled_bound",
    "certify",
    "crosscheck_exact",
    "crosscheck_to_csv",
    "resolve_model",
    "retry_schedule",
    "segment_gap_lower",
]

SCHEMA_VERSION = "gapcert.certificate/1"
BASE_SCHEDULE = (2, 3, 4, 6, 8, 12, 16)
# closed-form models keep doubling past the base schedule
EXTENDED_LIMIT = 2**20
# witness search cap: the segment-gap bound can be tiny near theta = pi/2
WITNESS_CAP = 10**300
CROSSCHECK_DIM_CAP = 10**6
CSV_COLUMNS = ("size", "lambda0", "lambda1", "gap", "bound", "seed")


def retry_schedule(extended: bool) -> tuple[int, ...]:
    out = list(BASE_SCHEDULE)
    if extended:
        k = 32
        while k <= EXTENDED_LIMIT:
            out += [k * 3 // 4, k]
            k *= 2
    return tuple(dict.fromkeys(out))


def _num(x) -> str | None:
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


@dataclass
class StageBound:
    """Inputs and result of one two-block lower bound."""

    name: str
    gap_B: float
    c1: float
    norm_C: float
    bound: float
    c1_numeric: float | None = None
    c1_closed: float | None = None

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "gap_B": _num(self.gap_B),
            "c1": _num(self.c1),
            "c1_numeric": _num(self.c1_numeric),
            "c1_closed": _num(self.c1_closed),
            "norm_C": _num(self.norm_C),
            "bound": _num(self.bound),
        }


@dataclass
class GapCertificate:
    model: str
    theta: float | None
    verdict: str = "inconclusive"
    seg_len: int | None = None
    d_bar: int | None = None
    z: int | None = None
    g_bar: float | None = None
    g_tilde: float | None = None
    delta: float | None = None
    delta_computed: float | None = None
    eta: float | None = None
    comm_residual: float | None = None
    x_threshold: float | None = None
    theorem2_bound: float | None = None
    segment_gap: float | None = None
    norm_hbar: float | None = None
    lm_n_star: int | None = None
    lm_links: str = "n-1"
    lm_threshold: float | None = None
    lm_bound: float | None = None
    stages: list = field(default_factory=list)
    final_bound: float | None = None
    failed_stage: str | None = None
    message: str | None = None
    verified_numerically: bool = False
    split_strategy: str | None = None
    spec_digest: str | None = None
    attempts: list = field(default_factory=list)
    tol: float = 1e-9
    split_tol: float = 1e-10
    seed: int = 42

    @property
    def certified(self) -> bool:
        return self.verdict == "certified_gapped"

    def stage(self, name: str) -> StageBound:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "model": self.model,
            "theta": _num(self.theta),
            "verdict": self.verdict,
            "failed_stage": self.failed_stage,
            "message": self.message,
            "seg_len": self.seg_len,
            "d_bar": self.d_bar,
            "z": self.z,
            "g_bar": _num(self.g_bar),
            "g_tilde": _num(self.g_tilde),
            "delta": _num(self.delta),
            "delta_computed": _num(self.delta_computed),
            "eta": _num(self.eta),
            "comm_residual": _num(self.comm_residual),
            "x_threshold": _num(self.x_threshold),
            "theorem2_bound": _num(self.theorem2_bound),
            "segment_gap": _num(self.segment_gap),
            "norm_hbar": _num(self.norm_hbar),
            "lm_witness": {
                "n_star": None if self.lm_n_star is None else str(self.lm_n_star),
                "links": self.lm_links,
                "threshold": _num(self.lm_threshold),
                "bound": _num(self.lm_bound),
            },
            "stages": [s.to_json() for s in self.stages],
            "final_bound": _num(self.final_bound),
            "verified_numerically": self.verified_numerically,
            "split_strategy": self.split_strategy,
            "spec_digest": self.spec_digest,
            "attempts": self.attempts,
            "tolerances": {"tol": _num(self.tol), "split_tol": _num(self.split_tol)},
            "seeds": {"seed": self.seed},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())


def resolve_model(model) -> ModelAdapter:
    if isinstance(model, ModelAdapter):
        return model
    if isinstance(model, ChainSpec):
        return SpecModel(model)
    return get_model(model)


def segment_gap_lower(adapter: ModelAdapter, m: int, theta, tol: float = 1e-9, seed: int = 42) -> float:
    """Lower bound on the gap of the open ``m``-site bulk chain.

    Small chains are diagonalized.  Longer ones are cut into two halves and
    the two-block bound is applied with the bond compressed to the halves'
    ground spaces; halves recurse.
    """
    return _segment_gap(adapter, int(m), theta, tol, seed)


@lru_cache(maxsize=None)
def _segment_gap(adapter, m, theta, tol, seed):
    if m <= 1:
        return float("inf")
    exact = adapter.base_gap(m, theta, tol, seed)
    if exact is not None:
        return exact
    m1 = (m + 1) // 2
    m2 = m - m1
    g_parts = min(_segment_gap(adapter, m1, theta, tol, seed), _segment_gap(adapter, m2, theta, tol, seed))
    return abc_bound(g_parts, adapter.coupling_gap(m1, m2, theta), adapter.norm_hbar(theta))


def _remnant_gap_min(adapter, ell_bar, theta, tol, seed) -> float:
    vals = [segment_gap_lower(adapter, r, theta, tol, seed) for r in range(2, ell_bar)]
    return min(vals) if vals else float("inf")


def _attempt(adapter, theta, ell_bar, tol, seed, split_tol) -> GapCertificate:
    cert = GapCertificate(adapter.id, theta, seg_len=ell_bar, tol=tol, split_tol=split_tol, seed=seed)
    cert.spec_digest = adapter.spec(theta).digest()
    stage = "a"
    try:
        inputs = adapter.renorm_inputs(ell_bar, theta, tol, seed, split_tol)
        cert.d_bar, cert.z = inputs.d_bar, inputs.z
        cert.g_bar, cert.g_tilde = inputs.g_bar, inputs.g_tilde
        cert.delta, cert.eta = inputs.delta, inputs.eta
        cert.delta_computed = inputs.delta_computed
        cert.comm_residual = inputs.comm_residual
        cert.split_strategy = inputs.strategy
        cert.verified_numerically = inputs.verified_numerically
        stage = "d"
        if not inputs.z:
            # a frustration-free chain always leaves a kernel on three segments
            raise ModelInconsistencyError("three-segment renormalized chain has an empty kernel")
        cert.x_threshold = x_threshold(inputs.delta, inputs.eta, inputs.g_tilde)
        cert.theorem2_bound = theorem2_bound(inputs.g_bar, inputs.delta, inputs.eta, inputs.g_tilde)
        if not cert.theorem2_bound > 0:
            raise HypothesisViolatedError(
                f"renormalized bound {cert.theorem2_bound:.6g} is not positive at seg_len {ell_bar}")
        g_h = cert.theorem2_bound
        cert.norm_hbar = adapter.norm_hbar(theta)
        cert.segment_gap = segment_gap_lower(adapter, ell_bar, theta, tol, seed)
        n_star = lm_witness(cert.segment_gap, g_h, cert.norm_hbar, cap=WITNESS_CAP, links="n-1")
        cert.lm_n_star = n_star
        cert.lm_threshold = lm_threshold(n_star)
        bulk = abc_bound(cert.segment_gap, g_h, (n_star - 1) * cert.norm_hbar) if n_star > 1 else cert.segment_gap
        cert.lm_bound = bulk
        stage = "e"
        rem_num, rem_closed = adapter.c1_remnant(ell_bar, theta)
        c1_rem = min(v for v in (rem_num, rem_closed) if v is not None)
        gap_rem = _remnant_gap_min(adapter, ell_bar, theta, tol, seed)
        gap_B = min(bulk, gap_rem)
        rem = StageBound("remnant", gap_B, c1_rem, cert.norm_hbar,
                         abc_bound(gap_B, c1_rem, cert.norm_hbar) if c1_rem > 0 else 0.0,
                         rem_num, rem_closed)
        cert.stages.append(rem)
        bnd_num, bnd_closed = adapter.c1_boundary(ell_bar, theta)
        c1_bnd = min(v for v in (bnd_num, bnd_closed) if v is not None)
        norm_b = adapter.norm_boundary(theta)
        bnd = StageBound("boundary", rem.bound, c1_bnd, norm_b,
                         abc_bound(rem.bound, c1_bnd, norm_b) if (c1_bnd > 0 and rem.bound > 0) else 0.0,
                         bnd_num, bnd_closed)
        cert.stages.append(bnd)
        cert.final_bound = bnd.bound
        if not (rem.bound > 0 and bnd.bound > 0):
            raise HypothesisViolatedError("remnant or boundary step gives no positive bound")
        cert.verdict = "certified_gapped"
    except (GapcertError, ValueError, np.linalg.LinAlgError) as exc:
        cert.verdict = "inconclusive"
        cert.failed_stage = _stage_of(stage, exc)
        cert.message = f"{type(exc).__name__}: {exc}"
    return cert


def _stage_of(stage: str, exc: Exception) -> str:
    name = type(exc).__name__
    if stage == "a":
        if name == "SplitNotFoundError":
            return "c"
        if name in ("HypothesisViolatedError",):
            return "d"
        if "coupling" in str(exc):
            return "b"
    if isinstance(exc, WitnessNotFoundError):
        return "d"
    return stage


def certify(model, theta: float | None = None, seg_len: int | None = None, tol: float = 1e-9,
            seed: int = 42, split_tol: float = 1e-10, schedule=None) -> GapCertificate:
    """Certify a gap for a registered model id, an adapter, or a :class:`ChainSpec`.

    With ``seg_len`` only that length is tried; otherwise the retry schedule
    is walked and the first (smallest) certifying length is kept.
    """
    adapter = resolve_model(model)
    if seg_len is not None:
        lengths = (int(seg_len),)
    else:
        lengths = tuple(schedule) if schedule is not None else retry_schedule(adapter.closed_form)
    attempts, last = [], None
    for ell_bar in lengths:
        if ell_bar < adapter.min_seg_len():
            continue
        cert = _attempt(adapter, theta, ell_bar, tol, seed, split_tol)
        attempts.append({"seg_len": ell_bar, "verdict": cert.verdict,
                         "theorem2_bound": _num(cert.theorem2_bound), "failed_stage": cert.failed_stage})
        last = cert
        if cert.certified or cert.failed_stage == "a":
            break
    if last is None:
        last = GapCertificate(adapter.id, theta, tol=tol, split_tol=split_tol, seed=seed,
                              failed_stage="a", message="no admissible segment length")
    last.attempts = attempts
    return last


def assembled_bound(adapter: ModelAdapter, cert: GapCertificate, ell: int, tol: float = 1e-9,
                    seed: int = 42) -> float:
    """Lower bound on the full-chain gap at ``ell`` bulk spins from certificate inputs.

    The bulk used by the boundary step has ``L`` spins; it is split into
    ``n = L // seg_len`` segments plus a remnant next to site 0.
    """
    theta, ell_bar = cert.theta, cert.seg_len
    big_l = adapter.boundary_bulk_length(ell)
    n, r = divmod(big_l, ell_bar)
    norm_h = cert.norm_hbar
    if n == 0:
        bulk = segment_gap_lower(adapter, big_l, theta, tol, seed)
    else:
        if n >= 2:
            g_h = abc_bound(cert.segment_gap, cert.theorem2_bound, (n - 1) * norm_h)
        else:
            g_h = cert.segment_gap
        if r == 0:
            bulk = g_h
        else:
            c1_rem = adapter.coupling_gap(n * ell_bar, r, theta)
            if n * ell_bar >= ell_bar:
                c1_rem = min(c1_rem, cert.stage("remnant").c1) if r < ell_bar else c1_rem
            gap_r = segment_gap_lower(adapter, r, theta, tol, seed)
            bulk = abc_bound(min(g_h, gap_r), c1_rem, norm_h) if c1_rem > 0 else 0.0
    try:
        c1_b = adapter.c1_boundary_at(ell, theta)
    except DomainError:
        # no boundary data at this size: make no claim
        return 0.0
    if not (bulk > 0 and c1_b > 0):
        return 0.0
    return abc_bound(bulk, c1_b, adapter.norm_boundary(theta))


@dataclass
class CrosscheckRow:
    size: int
    lambda0: float
    lambda1: float
    gap: float
    bound: float
    seed: int
    ok: bool
    error: str | None = None


def _exact_gap(op, tol, seed):
    # widen the window until a level above the ground cluster shows up
    k = 4
    while True:
        k = min(k, op.dim)
        ev = lowest_eigs(op, k, tol=tol, seed=seed).eigenvalues
        gap = ground_gap(ev, max(tol, 1e-8))
        if math.isfinite(gap) or k == op.dim:
            return ev, gap
        k = op.dim if k >= op.dim // 2 else 2 * k


def crosscheck_exact(model, theta: float | None, sizes, cert: GapCertificate | None = None,
                     tol: float = 1e-9, seed: int = 42, dim_cap: int = CROSSCHECK_DIM_CAP,
                     seg_len: int | None = None) -> list[CrosscheckRow]:
    """Exact full-chain gaps next to the assembled certificate bound.

    Sizes are bulk lengths ``ell``; sizes whose Hilbert space exceeds
    ``dim_cap`` are skipped.  A row is ``ok`` when ``bound <= gap + 1e-9``.
    """
    adapter = resolve_model(model)
    if cert is None:
        cert = certify(adapter, theta, seg_len=seg_len, tol=tol, seed=seed)
    rows = []
    for ell in sizes:
        op = adapter.full_chain(theta, int(ell))
        if op.dim > dim_cap:
            continue
        bound = assembled_bound(adapter, cert, int(ell), tol, seed) if cert.certified else 0.0
        try:
            ev, gap = _exact_gap(op, tol, seed)
        except (ConvergenceError, SizeError) as exc:
            rows.append(CrosscheckRow(int(ell), math.nan, math.nan, math.nan, bound, seed, False, str(exc)))
            continue
        lam1 = float(ev[0] + gap) if math.isfinite(gap) else math.inf
        rows.append(CrosscheckRow(int(ell), float(ev[0]), lam1, gap, bound, seed, bound <= gap + 1e-9))
    return rows


def crosscheck_to_csv(rows, path=None) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for r in rows:
        lines.append(",".join([str(r.size), _num(r.lambda0), _num(r.lambda1), _num(r.gap),
                               _num(r.bound), str(r.seed)]))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
