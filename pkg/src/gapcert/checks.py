"""Self-checks of the closed forms and bounds against brute-force numerics.

``paper_check(suite)`` runs one suite ("core", "teleport", "swap" or "all")
and returns a :class:`CheckReport` with a residual per identity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import cos, pi, sin

import numpy as np
from scipy.linalg import subspace_angles

from .operators import ground_gap, opnorm
from .renorm import (
    abc_bound,
    kernel_z_and_gtilde,
    lm_threshold,
    renormalized_coupling,
    segment_ground_space,
)

__all__ = ["CheckReport", "CheckResult", "SUITES", "paper_check", "random_abc_instance"]

SUITES = ("core", "teleport", "swap")


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    residual: float
    detail: str = ""


@dataclass
class CheckReport:
    results: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.passed]

    @property
    def ok(self) -> bool:
        return not self.failures

    def lines(self) -> list[str]:
        return [f"{'PASS' if r.passed else 'FAIL'}  {r.suite:<9} {r.name:<44} residual={r.residual:.3e}"
                + (f"  {r.detail}" if r.detail else "") for r in self.results]


class _Recorder:
    def __init__(self, suite: str, report: CheckReport):
        self.suite, self.report = suite, report

    def close(self, name, residual, tol, detail=""):
        residual = float(residual)
        self.report.results.append(CheckResult(self.suite, name, bool(residual <= tol), residual, detail))

    def true(self, name, cond, detail=""):
        self.report.results.append(CheckResult(self.suite, name, bool(cond), 0.0 if cond else 1.0, detail))


def random_abc_instance(rng: np.random.Generator, dim: int):
    """Random ``B`` (PSD, nontrivial kernel) and ``C = G^T G`` with ``P C P`` singular.

    Both share a common zero vector, so the lowest eigenvalue of ``B + C``
    is zero as the two-block bound requires.
    """
    ker = int(rng.integers(1, max(2, dim // 2)))
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    vals = np.concatenate([np.zeros(ker), rng.uniform(0.05, 2.0, dim - ker)])
    b = (q * vals) @ q.T
    # C annihilates the first kernel vector, so c0 = 0 on ker(B)
    g = rng.standard_normal((int(rng.integers(1, dim + 1)), dim))
    g -= np.outer(g @ q[:, 0], q[:, 0])
    c = g.T @ g * rng.uniform(0.1, 2.0)
    return (b + b.T) / 2, (c + c.T) / 2, q[:, :ker]


def _core(rec: _Recorder, seed: int):
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(200):
        dim = int(rng.integers(3, 41))
        b, c, ker = random_abc_instance(rng, dim)
        ev_b = np.linalg.eigvalsh(b)
        gap_b = ground_gap(ev_b, 1e-9)
        pcp = ker.T @ c @ ker
        c1 = ground_gap(np.linalg.eigvalsh(pcp), 1e-9)
        if not np.isfinite(c1):
            continue
        bound = abc_bound(gap_b, c1, opnorm(c))
        worst = max(worst, bound - ground_gap(np.linalg.eigvalsh(b + c), 1e-9))
    rec.close("two-block bound on 200 random instances", max(worst, 0.0), 1e-9)

    worst = 0.0
    for _ in range(50):
        dim = int(rng.integers(2, 30))
        a = rng.standard_normal((dim, dim))
        a = (a + a.T) / 2
        p = rng.standard_normal((dim, dim)) * rng.uniform(0.01, 1.0)
        p = (p + p.T) / 2
        shift = np.abs(np.linalg.eigvalsh(a + p) - np.linalg.eigvalsh(a))
        worst = max(worst, float(np.max(shift)) - opnorm(p))
    rec.close("eigenvalue stability under perturbation", max(worst, 0.0), 1e-10)
    rec.close("finite-size threshold at n = 100", abs(lm_threshold(100) - 0.0097980), 1e-7)


def _teleport(rec: _Recorder, seed: int):
    from .models import teleport as T

    rec.close("overlaps at one composite spin", np.max(np.abs(np.subtract(T.teleport_overlaps(1, 0.7), (0, 1)))),
              1e-15)
    k = T.k_matrix()
    ev = np.linalg.eigvalsh(k)
    rec.close("K spectrum {0 x4, 1 x12}", np.max(np.abs(ev - np.r_[np.zeros(4), np.ones(12)])), 1e-10)
    rec.close("Delta vanishes at theta = 0", abs(T.teleport_delta(5, 0.0)), 1e-15)
    for theta in (0.0, 0.7, 1.4):
        spec = T.teleport_spec(theta)
        for ell_bar in (2, 3):
            num = segment_ground_space(spec, ell_bar, seed=seed)
            closed = T.psi_columns(ell_bar, theta)
            ang = float(np.max(subspace_angles(num.columns, closed))) if num.d_bar == 4 else np.inf
            rec.close(f"ground space d=4 at l={ell_bar}, theta={theta}", ang, 1e-8)
        gs = T.teleport_ground_basis(2, theta)
        h_num = renormalized_coupling(spec, gs).h_bar
        rec.close(f"closed-form bond at theta={theta}", np.max(np.abs(h_num - T.segment_coupling(2, 2, theta))),
                  1e-10)
        if theta == 0.0:
            rec.close("bond equals K at theta = 0", np.max(np.abs(h_num - k)), 1e-10)
        split = T.teleport_htilde(3, theta)
        rec.close(f"||k_bar|| <= Delta(3) at theta={theta}", max(0.0, split.delta - T.teleport_delta(3, theta)),
                  1e-12)
        rec.close(f"commuting h_tilde at theta={theta}", split.comm_residual, 1e-10)
        z, g_t = kernel_z_and_gtilde(split, seed=seed)
        rec.true(f"three-segment kernel z = 4 at theta={theta}", z == 4, f"z={z}")
        rec.close(f"g_tilde >= cos^4 at theta={theta}", max(0.0, cos(theta) ** 4 - g_t), 1e-10)
        forms = T.teleport_boundary_forms(3, theta)
        rec.true(f"boundary kernel is one-dimensional at theta={theta}", forms.kernel_dim == 1)
        gap_t = ground_gap(np.linalg.eigvalsh(forms.h_tilde_0 + forms.h_tilde_end), 1e-12)
        rec.close(f"boundary h_tilde gap equals prefactor at theta={theta}", abs(gap_t - forms.prefactor), 1e-10)
        gap_b = ground_gap(np.linalg.eigvalsh(forms.h_bar_0 + forms.h_bar_end), 1e-12)
        rec.close(f"boundary c1 lower bound holds at theta={theta}", max(0.0, forms.c1_lower - gap_b), 1e-12)


def _swap(rec: _Recorder, seed: int):
    from .models import swap as S

    theta = 0.6
    spec = S.swap_spec(theta)
    ev = np.linalg.eigvalsh(spec.hbar)
    rec.close("coupling spectrum {0 x5, 1 x4}", np.max(np.abs(ev - np.r_[np.zeros(5), np.ones(4)])), 1e-12)
    c, s = cos(theta), sin(theta)
    toy = spec.hbar + np.kron(np.eye(3), np.diag([0.0, 1.0, 0.0])) + np.kron(np.diag([0.0, 0.0, 1.0]), np.eye(3))
    w, v = np.linalg.eigh(toy)
    psi0 = np.zeros(9)
    psi0[0], psi0[2] = c, s
    rec.true("unique two-qutrit ground state", w[0] < 1e-12 < w[1] - 1e-9)
    rec.close("two-qutrit ground vector", 1.0 - abs(float(v[:, 0] @ psi0)), 1e-12)
    prod_state = np.array([1.0])
    for _ in range(3):
        prod_state = np.kron(prod_state, np.array([c, 0.0, s]))
    rec.close("Psi0(4;0) is a product state", np.max(np.abs(S.history_state(4, 0, 0, theta)
                                                             - np.kron(np.eye(3)[0], prod_state))), 1e-12)
    lower = np.kron(np.outer(np.eye(3)[0], np.eye(3)[2]), np.eye(3 ** 4))
    for j in range(1, 5):
        val = S.history_state(5, 1, 0, theta) @ lower @ S.history_state(5, 1, j, theta)
        rec.close(f"history overlap j={j}", abs(val - c * s ** (j - 1)), 1e-12)
    for ell_bar in (2, 3, 4):
        gs = segment_ground_space(spec, ell_bar, seed=seed)
        rec.true(f"ground dimension 2l+1 at l={ell_bar}", gs.d_bar == 2 * ell_bar + 1, f"d={gs.d_bar}")
        closed = S.gamma_columns(ell_bar, theta)
        rec.close(f"history states span the kernel at l={ell_bar}",
                  float(np.max(subspace_angles(gs.columns, closed))), 1e-8)
    for th in (0.2, 0.5, 1.0, 1.3):
        err = 0.0
        for m in range(3, 13):
            v_m, w_m = S.v_matrix(m, th), S.w_matrix(m, th)
            err = max(err, np.max(np.abs(np.linalg.eigvalsh(v_m) - np.sort(S.v_spectrum(m, th)))),
                      np.max(np.abs(np.linalg.eigvalsh(w_m) - np.sort(S.w_spectrum(m, th)))))
        rec.close(f"V and W spectra at theta={th}", err, 1e-10)
    rec.close("V(4) at pi/4 is {0, 1, 1, 2}",
              np.max(np.abs(np.linalg.eigvalsh(S.v_matrix(4, pi / 4)) - [0, 1, 1, 2])), 1e-10)
    for ell_bar in (2, 3, 4):
        gs = S.gamma_basis(ell_bar, theta)
        h_num = renormalized_coupling(spec, gs).h_bar
        h_cf = S.swap_hbar(ell_bar, theta).h_bar
        rec.close(f"closed-form bond at l={ell_bar}", np.max(np.abs(h_num - h_cf)), 1e-10)
        ev = np.linalg.eigvalsh(h_cf)
        rec.close(f"bond gap is cos^4 at l={ell_bar}", abs(ground_gap(ev, 1e-9) - c ** 4), 1e-9)
        split = S.swap_htilde(ell_bar, theta, h_cf)
        rec.close(f"||k_bar|| <= 2 cos sin^(l-1) at l={ell_bar}",
                  max(0.0, split.delta - 2 * c * s ** (ell_bar - 1)), 1e-12)
        z, g_t = kernel_z_and_gtilde(split, seed=seed)
        rec.true(f"three-segment kernel z = 6l+1 at l={ell_bar}", z == 6 * ell_bar + 1, f"z={z}")
        rec.close(f"g_tilde >= cos^4 at l={ell_bar}", max(0.0, c ** 4 - g_t), 1e-10)
    for th in (0.3, 0.8):
        cols = S.gamma_columns(6, th)
        ends = (np.kron(np.diag([0.0, 0.0, 1.0]), np.eye(3 ** 5))
                + np.kron(np.eye(3 ** 5), np.diag([0.0, 1.0, 0.0])))
        restricted = cols.T @ ends @ cols
        rec.close(f"closed-form boundary operator at theta={th}",
                  np.max(np.abs(restricted - S.swap_boundary_operator(4, th))), 1e-12)
        ev = np.linalg.eigvalsh(restricted)
        cases = np.sort(np.concatenate([[cs.value] * cs.multiplicity for cs in S.swap_boundary_spectrum(4, th)]))
        rec.close(f"boundary spectrum at theta={th}", np.max(np.abs(ev - cases)), 1e-10)
        rec.close(f"boundary c1 = cos^2 at theta={th}", abs(ground_gap(ev, 1e-12) - cos(th) ** 2), 1e-10)


_RUNNERS = {"core": _core, "teleport": _teleport, "swap": _swap}


def paper_check(suite: str = "all", seed: int = 42) -> CheckReport:
    """Run the identity checks of one suite, or all of them."""
    names = SUITES if suite == "all" else (suite,)
    report = CheckReport()
    for name in names:
        if name not in _RUNNERS:
            raise ValueError(f"unknown suite {suite!r}; choose from {SUITES + ('all',)}")
        rec = _Recorder(name, report)
        try:
            _RUNNERS[name](rec, seed)
        except Exception as exc:  # a crashing identity counts as a failure
            report.results.append(CheckResult(name, "suite raised", False, float("inf"), repr(exc)))
    return report
