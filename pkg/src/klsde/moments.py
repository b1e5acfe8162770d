"""First and second moments of the solution and of its truncations.

With ``a = sqrt(2/T)`` and ``lam_k`` from the expansion basis::

    E X_t        = e^{tL} X_0
    E |X_t|^2    = |e^{tL} X_0|^2 + a^2 sum_{k>=1} |phi_cos_k(L) B|_F^2
    E |X^m_t|^2  = |e^{tL} X_0|^2 + a^2 sum_{k<=m} |phi_cos_k(L) B|_F^2

so the weak and the strong truncation errors both equal the tail
``a^2 sum_{k>m} |phi_cos_k(L) B|_F^2``. Infinite sums are cut at ``K`` terms
plus a closed-form estimate of the rest, once a certified bound on the
estimate's error falls below ``rel_tol`` times the value.

The error bound combines ``|(A - z)^{-1}| <= 1 / d(z, F(A))`` with a sector
``(alpha, gamma)`` enclosing the numerical range, giving
``d >= lam cos(alpha) - gamma sin(alpha)``, and an integral comparison for
the sum over ``k > K``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import AssumptionError, DomainError, NumericalError, ValidationError
from .matkit import expm, fov_estimate, log_norm, sector_candidates
from .phifn import PhiSpec, phi_pair_matrix, phi_pair_scalar
from .sampler import SdeProblem

__all__ = [
    "SecondMoment",
    "MomentReport",
    "exact_mean",
    "phi_term_norms",
    "exact_second_moment",
    "second_moment_normal",
    "truncated_second_moment",
    "strong_error_bound",
    "weak_error_bound",
    "weak_error_exact",
    "strong_error_exact",
    "series_tail",
    "lyapunov_second_moment",
    "moment_report",
]

EIG_COND_LIMIT = 1e8
MAX_TERMS = 50_000_000
_CHUNK = 1 << 15


class SecondMoment(NamedTuple):
    """Series value, number of summed terms, bound on the error of ``value``."""

    value: float
    terms: int
    tail_bound: float
    certified: bool


def exact_mean(problem: SdeProblem) -> np.ndarray:
    """``e^{tL} X_0``."""
    return expm(problem.l, problem.t_end) @ problem.x0


# ---------------------------------------------------------------------------
# Term norms a^2 |phi_cos_k(L) B|_F^2
# ---------------------------------------------------------------------------

class _TermEngine:
    """Vectorized ``a^2 |phi_cos_k(L) B|_F^2`` over blocks of ``k``.

    With ``L = V diag(w) V^{-1}`` and ``W = V^{-1} B`` the squared norm is the
    Hermitian form ``phi^H G phi``, ``G_ij = (V^H V)_ij (W W^H)_ji``. Drift
    matrices with an ill-conditioned eigenbasis use resolvent solves instead.
    """

    def __init__(self, problem: SdeProblem):
        self.problem = problem
        self.t = problem.t_end
        self.amp2 = problem.basis.amplitude ** 2
        l = problem.l
        w, v = np.linalg.eig(l)
        self.eigenvalues = w
        self.spectral = bool(np.linalg.cond(v) < EIG_COND_LIMIT)
        if self.spectral:
            wb = np.linalg.solve(v, problem.b)
            self.g = (v.conj().T @ v) * (wb @ wb.conj().T).T
        else:
            self.expl = expm(l, self.t)

    def __call__(self, k: np.ndarray) -> np.ndarray:
        lam = (np.asarray(k, dtype=float) - self.problem.basis.offset) * (math.pi / self.problem.basis.horizon)
        out = np.empty(lam.shape[0])
        for s in range(0, lam.shape[0], _CHUNK):
            out[s:s + _CHUNK] = self._block(lam[s:s + _CHUNK])
        return self.amp2 * out

    def _block(self, lam: np.ndarray) -> np.ndarray:
        if self.spectral:
            pc, _ = phi_pair_scalar(lam[:, None], self.t, self.eigenvalues[None, :])
            return np.einsum("ki,ij,kj->k", pc.conj(), self.g, pc).real
        return np.array([self._direct(x) for x in lam])

    def _direct(self, lam: float) -> float:
        pc, _ = phi_pair_matrix(PhiSpec(lam, self.t), self.problem.l, expta=self.expl,
                                eigenvalues=self.eigenvalues)
        return float(np.linalg.norm(pc @ self.problem.b) ** 2)


def phi_term_norms(problem: SdeProblem, k) -> np.ndarray:
    """``a^2 |phi_cos_k(L) B|_F^2`` for the integer indices ``k`` (1-based)."""
    k = np.atleast_1d(np.asarray(k))
    if k.size and k.min() < 1:
        raise DomainError("term indices start at 1")
    return _TermEngine(problem)(k)


# ---------------------------------------------------------------------------
# Tail bounds
# ---------------------------------------------------------------------------

def _spectral_norm(b: np.ndarray) -> float:
    return float(np.linalg.norm(b, 2)) if b.size else 0.0


def _horizon_bound(problem: SdeProblem, m: int) -> float:
    # a^2 |B|_2^2 n sum_{k>m} 1/lam_k^2 <= 2 T |B|^2 n / (pi^2 (m - 1))
    t_h = problem.basis.horizon
    return 2.0 * t_h * _spectral_norm(problem.b) ** 2 * problem.n / (math.pi ** 2 * (m - 1))


class _Tail:
    """Estimate and certified error for ``a^2 sum_{k>K} |phi_cos_k(L) B|_F^2``.

    Write ``phi_cos_k(L) = s_k / lam_k I + psi_k`` with ``s_k = sin(lam_k t)``.
    The leading part sums in closed form because ``a^2 sum_k s_k^2 / lam_k^2``
    is the variance of the driving process at ``t``. The correction obeys::

        psi_k = (L^2 + lam^2)^{-1} (L e^{tL} - cos(lam t) L - s_k L^2 / lam)
        |psi_k| <= (|L|^2 / lam + |L| (1 + e^{t mu})) / d(i lam, F)^2

    so the neglected part is ``O(1/K^2)``. With ``d >= rho lam`` for
    ``lam >= lam_{K+1}`` (sector bound) the remainder sums by integral
    comparison.
    """

    def __init__(self, problem: SdeProblem, b_fro2: float):
        basis = problem.basis
        self.t = problem.t_end
        self.horizon = basis.horizon
        self.delta = basis.offset
        self.c = math.pi / basis.horizon
        self.scale = basis.amplitude ** 2 * b_fro2
        self.problem = problem
        if basis.offset:
            self.lead_total = 0.5 * self.t * self.horizon
        else:
            self.lead_total = 0.5 * self.t * (self.horizon - self.t)
        fov = fov_estimate(problem.l)
        self.cands = sector_candidates(fov)
        self.lnorm = _spectral_norm(problem.l)
        try:
            self.grow = math.exp(self.t * fov.mu)
        except OverflowError:
            self.grow = math.inf
        self.certified = bool(self.cands) and math.isfinite(self.grow)
        self._k = 0
        self._partial = 0.0

    def _lead_partial(self, k_done: int) -> float:
        if k_done < self._k:
            self._k, self._partial = 0, 0.0
        if k_done > self._k:
            lam = (np.arange(self._k + 1, k_done + 1) - self.delta) * self.c
            self._partial += float(np.sum((np.sin(lam * self.t) / lam)[::-1] ** 2))
            self._k = k_done
        return self._partial

    def estimate(self, k_done: int) -> float:
        return self.scale * max(self.lead_total - self._lead_partial(k_done), 0.0)

    def _sums(self, k_done: int, p: int) -> float:
        # sum_{k>K} lam_k^{-p} <= int_K^inf (c (x - delta))^{-p} dx
        return self.c ** (-p) * (k_done - self.delta) ** (1 - p) / (p - 1)

    def bound(self, k_done: int) -> float:
        if k_done - self.delta <= 0.0:
            return math.inf
        if not self.certified:
            return math.inf if k_done < 2 else _horizon_bound(self.problem, k_done)
        lam_next = self.c * (k_done + 1 - self.delta)
        best = math.inf
        for alpha, gamma in self.cands:
            rho = math.cos(alpha) - gamma * math.sin(alpha) / lam_next
            if rho <= 0.0:
                continue
            a1 = self.lnorm ** 2 / rho ** 2
            a2 = self.lnorm * (1.0 + self.grow) / rho ** 2
            s = {p: self._sums(k_done, p) for p in (3, 4, 5, 6)}
            # 2 |psi| / lam + |psi|^2 with |psi| <= a1 / lam^3 + a2 / lam^2
            r = (2.0 * a1 * s[4] + 2.0 * a2 * s[3]
                 + a1 * a1 * s[6] + 2.0 * a1 * a2 * s[5] + a2 * a2 * s[4])
            best = min(best, self.scale * r)
        return best


def series_tail(problem: SdeProblem, k_done: int) -> tuple[float, float, bool]:
    """Estimate of ``a^2 sum_{k > k_done} |phi_cos_k(L) B|_F^2`` with an error bound.

    Returns ``(estimate, bound, certified)``; the true tail lies within
    ``bound`` of ``estimate``. When no sector encloses the numerical range the
    bound is the heuristic ``2 T |B|^2 n / (pi^2 (K - 1))`` and ``certified``
    is False.
    """
    tail = _Tail(problem, float(np.sum(problem.b ** 2)))
    return tail.estimate(k_done), tail.bound(k_done), tail.certified


def _sum_series(terms: Callable[[np.ndarray], np.ndarray], tail: _Tail,
                start: int, base: float, rel_tol: float, max_terms: int) -> tuple[float, int, float]:
    """Sum ``terms(k)`` for ``k >= start`` plus the tail estimate, to relative accuracy ``rel_tol``."""
    total = 0.0
    k_done = start - 1
    chunk = 256
    while True:
        est, bound = tail.estimate(k_done), tail.bound(k_done)
        if bound <= rel_tol * (base + total + est):
            return total + est, k_done, bound
        if k_done - start + 1 >= max_terms:
            raise NumericalError(
                f"series not converged to rel_tol={rel_tol:g} after {max_terms} terms "
                f"(remaining error bound {bound:.3e})")
        ks = np.arange(k_done + 1, k_done + 1 + chunk)
        # small terms first
        total += float(np.sum(terms(ks)[::-1]))
        k_done += chunk
        chunk = min(2 * chunk, 1 << 20)


def _check_tol(rel_tol: float):
    if not (rel_tol > 0.0 and math.isfinite(rel_tol)):
        raise ValidationError(f"rel_tol must be positive, got {rel_tol!r}")


def exact_second_moment(problem: SdeProblem, rel_tol: float = 1e-8,
                        max_terms: int = MAX_TERMS) -> SecondMoment:
    """``E |X_t|^2`` by summing the series until the tail bound is below ``rel_tol``.

    Returns
    -------
    SecondMoment
        ``value`` is the partial sum plus the tail estimate; the exact value
        lies within ``tail_bound`` of it. ``certified`` is False when the
        error bound is heuristic.
    """
    _check_tol(rel_tol)
    base = float(np.sum(exact_mean(problem) ** 2))
    b_fro2 = float(np.sum(problem.b ** 2))
    if b_fro2 == 0.0:
        return SecondMoment(base, 0, 0.0, True)
    tail = _Tail(problem, b_fro2)
    s, k, bound = _sum_series(_TermEngine(problem), tail, 1, base, rel_tol, max_terms)
    return SecondMoment(base + s, k, bound, tail.certified)


def second_moment_normal(problem: SdeProblem, rel_tol: float = 1e-8,
                         max_terms: int = MAX_TERMS) -> SecondMoment:
    """``E |X_t|^2`` for normal ``L`` and ``B = c I`` from the eigenvalues alone.

    ``|e^{tL} X_0|^2 + a^2 c^2 sum_k sum_j |phi_cos_k(lam_j)|^2``.
    """
    _check_tol(rel_tol)
    if not problem.is_normal():
        raise DomainError("drift matrix is not normal")
    c = problem.scalar_noise()
    if c is None:
        raise DomainError("noise matrix is not a multiple of the identity")
    base = float(np.sum(exact_mean(problem) ** 2))
    if c == 0.0:
        return SecondMoment(base, 0, 0.0, True)
    eigs = np.linalg.eigvals(problem.l)
    t = problem.t_end
    basis = problem.basis
    scale = basis.amplitude ** 2 * c * c

    def terms(k):
        lam = (k - basis.offset) * (math.pi / basis.horizon)
        out = np.empty(lam.shape[0])
        for s in range(0, lam.shape[0], _CHUNK):
            pc, _ = phi_pair_scalar(lam[s:s + _CHUNK, None], t, eigs[None, :])
            out[s:s + _CHUNK] = np.sum(np.abs(pc) ** 2, axis=1)
        return scale * out

    tail = _Tail(problem, c * c * problem.n)
    s, k, bound = _sum_series(terms, tail, 1, base, rel_tol, max_terms)
    return SecondMoment(base + s, k, bound, tail.certified)


def truncated_second_moment(problem: SdeProblem, m: int) -> float:
    """``E |X^m_t|^2``: the finite sum over ``k <= m``."""
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")
    base = float(np.sum(exact_mean(problem) ** 2))
    if m == 0:
        return base
    return base + float(np.sum(_TermEngine(problem)(np.arange(1, m + 1))[::-1]))


def _check_bound_domain(problem: SdeProblem, m: int):
    if m < 2:
        raise DomainError(f"bound needs m >= 2, got {m}")
    mu = log_norm(problem.l)
    if mu > 1e-12 * max(1.0, float(np.linalg.norm(problem.l))):
        raise AssumptionError(f"logarithmic norm {mu:.6g} > 0: drift is not negative semidefinite")


def strong_error_bound(problem: SdeProblem, m: int) -> float:
    """``2 T |B|_2^2 n / (pi^2 (m - 1))`` for negative semidefinite drift."""
    _check_bound_domain(problem, m)
    return _horizon_bound(problem, m)


def weak_error_bound(problem: SdeProblem, m: int) -> float:
    """Same constant as :func:`strong_error_bound`; the two errors coincide."""
    return strong_error_bound(problem, m)


def weak_error_exact(problem: SdeProblem, m: int, rel_tol: float = 1e-6,
                     max_terms: int = MAX_TERMS) -> SecondMoment:
    """``a^2 sum_{k>m} |phi_cos_k(L) B|_F^2`` with the remainder below ``rel_tol`` of the tail itself."""
    _check_tol(rel_tol)
    if m < 0:
        raise DomainError(f"m must be nonnegative, got {m}")
    b_fro2 = float(np.sum(problem.b ** 2))
    if b_fro2 == 0.0:
        return SecondMoment(0.0, m, 0.0, True)
    tail = _Tail(problem, b_fro2)
    s, k, bound = _sum_series(_TermEngine(problem), tail, m + 1, 0.0, rel_tol, max_terms)
    return SecondMoment(s, k, bound, tail.certified)


def strong_error_exact(problem: SdeProblem, m: int, rel_tol: float = 1e-6,
                       max_terms: int = MAX_TERMS) -> SecondMoment:
    """``E |X_t - X^m_t|^2``; identical series to :func:`weak_error_exact`."""
    return weak_error_exact(problem, m, rel_tol, max_terms)


# ---------------------------------------------------------------------------
# Lyapunov oracle
# ---------------------------------------------------------------------------

def lyapunov_second_moment(problem: SdeProblem, steps: int = 10_000) -> float:
    """``|e^{tL} X_0|^2 + tr P(t)`` with ``P' = L P + P L^T + B B^T``, ``P(0) = 0``, by RK4.

    Independent of the series. Only meaningful for the Wiener basis on
    ``[0, t_end]`` (the bridge changes the covariance).
    """
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    l = problem.l
    q = problem.b @ problem.b.T
    h = problem.t_end / steps

    def rhs(p):
        lp = l @ p
        return lp + lp.T + q

    p = np.zeros_like(q)
    for _ in range(steps):
        k1 = rhs(p)
        k2 = rhs(p + 0.5 * h * k1)
        k3 = rhs(p + 0.5 * h * k2)
        k4 = rhs(p + h * k3)
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return float(np.sum(exact_mean(problem) ** 2) + np.trace(p))


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentReport:
    """Moments of one problem; per-``m`` quantities are methods.

    ``terms`` holds the first ``terms_used`` series terms, so per-``m``
    errors for ``m <= terms_used`` cost no further evaluations; their absolute
    accuracy is ``tail_bound``.
    """

    problem: SdeProblem = field(repr=False)
    mean: np.ndarray
    second_moment_exact: float
    terms_used: int
    tail_bound: float
    certified: bool
    terms: np.ndarray = field(repr=False)
    tail_estimate: float = 0.0

    def second_moment_truncated(self, m: int) -> float:
        if m <= self.terms_used:
            return float(np.sum(self.mean ** 2) + np.sum(self.terms[:m][::-1]))
        return truncated_second_moment(self.problem, m)

    def weak_error_exact(self, m: int) -> float:
        if m <= self.terms_used:
            return float(np.sum(self.terms[m:][::-1]) + self.tail_estimate)
        return weak_error_exact(self.problem, m).value

    def strong_error_exact(self, m: int) -> float:
        return self.weak_error_exact(m)

    def weak_error_bound(self, m: int) -> float:
        return weak_error_bound(self.problem, m)

    def strong_error_bound(self, m: int) -> float:
        return strong_error_bound(self.problem, m)


def moment_report(problem: SdeProblem, rel_tol: float = 1e-8) -> MomentReport:
    """Collect the moment quantities of ``problem`` in one :class:`MomentReport`."""
    sm = exact_second_moment(problem, rel_tol)
    terms = _TermEngine(problem)(np.arange(1, sm.terms + 1)) if sm.terms else np.zeros(0)
    terms.setflags(write=False)
    mean = exact_mean(problem)
    mean.setflags(write=False)
    tail_est = sm.value - float(np.sum(mean ** 2)) - float(np.sum(terms[::-1]))
    return MomentReport(problem=problem, mean=mean, second_moment_exact=sm.value,
                        terms_used=sm.terms, tail_bound=sm.tail_bound,
                        certified=sm.certified, terms=terms, tail_estimate=tail_est)
