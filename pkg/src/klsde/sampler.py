"""Realizations of the truncated Karhunen--Loeve solution.

For ``dX = L X dt + B dW`` the ``m``-term approximation at ``t`` is::

    X^m_t = e^{tL} X_0 + a * sum_{k=1}^m phi_cos_k(L) B Z_k,    a = sqrt(2/T)

Four interchangeable strategies evaluate it:

``phi_series``
    precompute ``phi_cos_k(L) B`` for every k; each sample is one product.
``diagonalized``
    spectral calculus on ``L = V D V^{-1}`` (orthogonal real Schur basis when
    ``L`` is normal); scalar phi tables only.
``augmented_exp``
    one exponential of the ``(n + 2m)`` block matrix per sample.
``sylvester``
    cached Schur forms; one Sylvester solve per sample for the coupling block.
"""
from __future__ import annotations

import enum
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SingularityError, StrategyUnavailable, ValidationError
from .klprocess import GaussianDraw, KlBasis
from .matkit import SylvesterSolver, as_matrix, expm, real_schur
from .phifn import PhiSpec, phi_pair_matrix, phi_pair_scalar

__all__ = [
    "Strategy",
    "SdeProblem",
    "FourierForcing",
    "SamplerPlan",
    "prepare",
    "sample",
    "sample_batch",
    "sample_normal_fastpath",
    "sample_normal_fastpath_batch",
    "solve_fourier_ode",
    "solve_augmented_exp",
    "solve_sylvester_route",
    "augmented_matrix",
]

log = logging.getLogger(__name__)

DIAG_COND_LIMIT = 1e8
NORMAL_RTOL = 1e-10


class Strategy(str, enum.Enum):
    DIAGONALIZED = "diagonalized"
    PHI_SERIES = "phi_series"
    AUGMENTED_EXP = "augmented_exp"
    SYLVESTER = "sylvester"


@dataclass(frozen=True)
class SdeProblem:
    """``dX = L X dt + B dW`` on ``[0, t_end]`` with initial state ``x0``.

    ``b`` is ``n x d``; the noise has ``d`` components. The expansion basis
    defaults to the Wiener basis on ``[0, t_end]``.
    """

    l: np.ndarray
    b: np.ndarray
    x0: np.ndarray
    t_end: float
    basis: KlBasis | None = None

    def __post_init__(self):
        l = as_matrix(self.l, "l", square=True)
        b = as_matrix(self.b, "b")
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        if b.shape[0] != l.shape[0]:
            raise DimensionError(f"b has {b.shape[0]} rows, l is {l.shape}")
        if x0.shape[0] != l.shape[0]:
            raise DimensionError(f"x0 has length {x0.shape[0]}, l is {l.shape}")
        if not np.all(np.isfinite(x0)):
            raise ValidationError("x0 contains non-finite entries")
        if not (math.isfinite(self.t_end) and self.t_end > 0.0):
            raise ValidationError(f"t_end must be positive, got {self.t_end!r}")
        for arr in (l, b, x0):
            arr.setflags(write=False)
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "t_end", float(self.t_end))
        if self.basis is None:
            object.__setattr__(self, "basis", KlBasis(horizon=self.t_end))

    @property
    def n(self) -> int:
        return self.l.shape[0]

    @property
    def noise_dim(self) -> int:
        return self.b.shape[1]

    def is_normal(self) -> bool:
        l = self.l
        comm = np.linalg.norm(l @ l.T - l.T @ l)
        return bool(comm <= NORMAL_RTOL * max(np.linalg.norm(l) ** 2, np.finfo(float).tiny))

    def scalar_noise(self) -> float | None:
        """``c`` if ``b == c * I``, else ``None``."""
        b = self.b
        if b.shape[0] != b.shape[1]:
            return None
        c = float(b[0, 0]) if b.size else 0.0
        return c if np.array_equal(b, c * np.eye(b.shape[0])) else None


@dataclass(frozen=True)
class FourierForcing:
    """``g(t) = sum_k a_k cos(c_k t) + b_k sin(c_k t)``; ``a``, ``b`` are ``(N, n)``.

    A zero frequency is allowed and carries a constant term ``a_k``.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if c.size == 0:
            a = a.reshape(0, a.shape[-1] if a.size else 0)
            b = b.reshape(0, b.shape[-1] if b.size else 0)
        if a.shape != b.shape or a.shape[0] != c.shape[0]:
            raise DimensionError(f"coefficient shapes disagree: a{a.shape}, b{b.shape}, c{c.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def terms(self) -> int:
        return self.c.shape[0]

    @classmethod
    def empty(cls, n: int) -> "FourierForcing":
        return cls(np.zeros((0, n)), np.zeros((0, n)), np.zeros(0))

    @classmethod
    def sawtooth(cls, p, ell: float, terms: int) -> "FourierForcing":
        """Series of ``f(t) p`` with ``f(t) = t / (2 ell)`` extended ``2 ell``-periodically.

        Includes the mean ``p / 2`` as a zero-frequency term followed by
        ``terms`` sine terms ``b_k = -p / (k pi)``, ``c_k = k pi / ell``.
        """
        p = np.asarray(p, dtype=float).reshape(-1)
        k = np.arange(1, terms + 1, dtype=float)
        a = np.vstack([0.5 * p, np.zeros((terms, p.size))])
        b = np.vstack([np.zeros(p.size), -np.outer(1.0 / (k * math.pi), p)])
        c = np.concatenate([[0.0], k * math.pi / ell])
        return cls(a, b, c)

    def __call__(self, t: float) -> np.ndarray:
        return np.cos(self.c * t) @ self.a + np.sin(self.c * t) @ self.b


@dataclass(frozen=True)
class SamplerPlan:
    """Sample-independent precomputation for one (problem, m, strategy).

    ``cache`` is read-only after :func:`prepare`; plans may be shared across
    threads.
    """

    strategy: Strategy
    problem: SdeProblem
    m: int
    cache: dict = field(repr=False)

    @property
    def mean(self) -> np.ndarray:
        return self.cache["mean"]


def _freeze(cache: dict) -> dict:
    for v in cache.values():
        if isinstance(v, np.ndarray):
            v.setflags(write=False)
    return cache


def _phi_series_cache(problem: SdeProblem, m: int, expl: np.ndarray) -> dict:
    t = problem.t_end
    lam = problem.basis.frequencies(m)
    amp = problem.basis.amplitude
    eigs = np.linalg.eigvals(problem.l)
    n, d = problem.n, problem.noise_dim
    gmat = np.empty((m, d, n))
    for k in range(m):
        pc, _ = phi_pair_matrix(PhiSpec(lam[k], t), problem.l, expta=expl, eigenvalues=eigs)
        gmat[k] = amp * (pc @ problem.b).T
    return {"gmat": gmat.reshape(m * d, n)}


def _normal_tables(problem: SdeProblem, m: int):
    """Real Schur basis and block phi tables for a normal drift matrix."""
    sch = real_schur(problem.l)
    t_ = sch.tmat
    n = problem.n
    lam = problem.basis.frequencies(m)
    eig = np.empty(n, dtype=complex)
    partner = np.arange(n)
    sign = np.zeros(n)
    i = 0
    while i < n:
        if i + 1 < n and t_[i + 1, i] != 0.0:
            a = 0.5 * (t_[i, i] + t_[i + 1, i + 1])
            b = 0.5 * (t_[i, i + 1] - t_[i + 1, i])
            eig[i] = eig[i + 1] = complex(a, b)
            partner[i], partner[i + 1] = i + 1, i
            sign[i], sign[i + 1] = 1.0, -1.0
            i += 2
        else:
            eig[i] = t_[i, i]
            i += 1
    # f(aI + bJ) = Re f(a+ib) I + Im f(a+ib) J with J = [[0, 1], [-1, 0]]
    pc, _ = phi_pair_scalar(lam[:, None], problem.t_end, eig[None, :])
    if not sign.any():
        # real spectrum: no 2 x 2 blocks to couple
        return sch.q, pc.real.copy(), None, None
    return sch.q, pc.real.copy(), pc.imag * sign, partner


def _diagonalized_cache(problem: SdeProblem, m: int) -> dict:
    if problem.is_normal():
        q, re, ims, partner = _normal_tables(problem, m)
        cache = {"normal": True, "q": q, "qtb": q.T @ problem.b, "re": re}
        if ims is not None:
            cache.update(ims=ims, partner=partner)
        return cache
    w, v = np.linalg.eig(problem.l)
    cond = np.linalg.cond(v)
    if not cond < DIAG_COND_LIMIT:
        raise StrategyUnavailable(
            f"eigenvector matrix condition number {cond:.2e} exceeds {DIAG_COND_LIMIT:.0e}; "
            "use the phi_series strategy for this drift matrix")
    lam = problem.basis.frequencies(m)
    pc, _ = phi_pair_scalar(lam[:, None], problem.t_end, w[None, :])
    return {"normal": False, "v": v, "vinvb": np.linalg.solve(v, problem.b), "phi": pc}


def augmented_matrix(l: np.ndarray, a_n: np.ndarray, b_n: np.ndarray, c: np.ndarray) -> np.ndarray:
    """``[[L, A_N, B_N], [0, 0, -C_N], [0, C_N, 0]]`` with ``C_N = diag(c)``."""
    n, nt = l.shape[0], c.shape[0]
    big = np.zeros((n + 2 * nt, n + 2 * nt))
    big[:n, :n] = l
    big[:n, n:n + nt] = a_n
    big[:n, n + nt:] = b_n
    idx = np.arange(nt)
    big[n + idx, n + nt + idx] = -c
    big[n + nt + idx, n + idx] = c
    return big


def _skew_block(lam: np.ndarray) -> np.ndarray:
    m = lam.shape[0]
    c = np.zeros((2 * m, 2 * m))
    idx = np.arange(m)
    c[idx, m + idx] = -lam
    c[m + idx, idx] = lam
    return c


def prepare(problem: SdeProblem, m: int, strategy: Strategy | str = Strategy.PHI_SERIES) -> SamplerPlan:
    """Do all sample-independent work for ``m`` expansion terms.

    Raises
    ------
    StrategyUnavailable
        ``diagonalized`` on a drift matrix whose eigenvector basis is
        ill-conditioned (or defective).
    """
    strategy = Strategy(strategy)
    if m < 0:
        raise ValidationError(f"m must be nonnegative, got {m}")
    t = problem.t_end
    expl = expm(problem.l, t)
    cache = {"expl": expl, "mean": expl @ problem.x0}
    if strategy is Strategy.PHI_SERIES:
        cache.update(_phi_series_cache(problem, m, expl))
    elif strategy is Strategy.DIAGONALIZED:
        cache.update(_diagonalized_cache(problem, m))
    elif strategy is Strategy.AUGMENTED_EXP:
        cache["lam"] = problem.basis.frequencies(m)
    elif strategy is Strategy.SYLVESTER:
        lam = problem.basis.frequencies(m)
        cache["lam"] = lam
        cache["cos"] = np.cos(lam * t)
        cache["sin"] = np.sin(lam * t)
        if m:
            try:
                cache["solver"] = SylvesterSolver(problem.l, _skew_block(lam),
                                                  schur_l=real_schur(problem.l))
            except SingularityError as exc:
                warnings.warn(f"Sylvester route unavailable ({exc}); falling back to phi_series",
                              RuntimeWarning, stacklevel=2)
                cache["fallback"] = True
                cache.update(_phi_series_cache(problem, m, expl))
    return SamplerPlan(strategy=strategy, problem=problem, m=m, cache=_freeze(cache))


def _coefficients(plan: SamplerPlan, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    d = plan.problem.noise_dim
    if z.ndim < 2 or z.shape[-1] != d or z.shape[-2] < plan.m:
        raise DimensionError(
            f"draw must have shape (..., >= {plan.m}, {d}), got {z.shape}")
    return z[..., :plan.m, :]


def _sylvester_one(plan: SamplerPlan, z: np.ndarray) -> np.ndarray:
    c = plan.cache
    if plan.m == 0:
        return c["mean"].copy()
    a_n = plan.problem.basis.amplitude * (plan.problem.b @ z.T)
    # (1,2)-block [A_N, 0]; rhs = e^{tL} [A_N, 0] - [A_N, 0] e^{tC}
    rhs = np.hstack([c["expl"] @ a_n - a_n * c["cos"], a_n * c["sin"]])
    x = c["solver"].solve(rhs)
    return c["mean"] + x[:, :plan.m].sum(axis=1)


def solve_sylvester_route(plan: SamplerPlan, draw: GaussianDraw | np.ndarray) -> np.ndarray:
    """One sample through the cached Sylvester solver."""
    if plan.strategy is not Strategy.SYLVESTER:
        raise StrategyUnavailable(f"plan was prepared for {plan.strategy.value}")
    z = _coefficients(plan, getattr(draw, "z", draw))
    if plan.cache.get("fallback"):
        return plan.cache["mean"] + z.reshape(-1) @ plan.cache["gmat"]
    return _sylvester_one(plan, z)


def _block_phi(c: dict, w: np.ndarray) -> np.ndarray:
    # sum_k phi_cos_k(T) w_k for the block-diagonal real Schur factor T
    y = np.einsum("Nkn,kn->Nn", w, c["re"])
    if "ims" in c:
        y += np.einsum("Nkn,kn->Nn", w[..., c["partner"]], c["ims"])
    return y


def sample_batch(plan: SamplerPlan, z) -> np.ndarray:
    """Samples for a stack of draws ``z`` with shape ``(N, >= m, d)``; returns ``(N, n)``."""
    z = _coefficients(plan, z)
    if z.ndim != 3:
        raise DimensionError(f"batch must be 3-D, got shape {z.shape}")
    c = plan.cache
    nb, m = z.shape[0], plan.m
    mean = c["mean"]
    if m == 0:
        return np.broadcast_to(mean, (nb, plan.problem.n)).copy()
    s = plan.strategy
    if s is Strategy.PHI_SERIES or c.get("fallback"):
        return mean + z.reshape(nb, -1) @ c["gmat"]
    if s is Strategy.DIAGONALIZED:
        amp = plan.problem.basis.amplitude
        if c["normal"]:
            return mean + amp * (_block_phi(c, z @ c["qtb"].T) @ c["q"].T)
        w = z @ c["vinvb"].T
        y = np.einsum("Nkn,kn->Nn", w, c["phi"])
        return mean + amp * (y @ c["v"].T).real
    if s is Strategy.SYLVESTER:
        return np.stack([_sylvester_one(plan, zi) for zi in z])
    # augmented exponential
    prob = plan.problem
    amp = prob.basis.amplitude
    out = np.empty((nb, prob.n))
    v0 = np.concatenate([prob.x0, np.ones(m), np.zeros(m)])
    zeros = np.zeros((prob.n, m))
    for i, zi in enumerate(z):
        big = augmented_matrix(prob.l, amp * (prob.b @ zi.T), zeros, c["lam"])
        out[i] = (expm(big, prob.t_end) @ v0)[:prob.n]
    return out


def sample(plan: SamplerPlan, draw: GaussianDraw | np.ndarray) -> np.ndarray:
    """One realization of ``X^m`` at ``t_end`` for ``draw`` (``(>= m, d)`` coefficients)."""
    z = getattr(draw, "z", draw)
    return sample_batch(plan, np.asarray(z, dtype=float)[None])[0]


def sample_normal_fastpath_batch(plan: SamplerPlan, z) -> np.ndarray:
    """Distributional shortcut for normal ``L`` and ``B = c I``.

    The orthogonal rotation ``Q^T Z_k`` of i.i.d. standard normals is again
    i.i.d. standard normal, so the draws enter the Schur basis unrotated.
    Paths differ from :func:`sample_batch`; the distribution does not.
    """
    c = plan.cache
    if plan.strategy is not Strategy.DIAGONALIZED or not c.get("normal"):
        raise StrategyUnavailable("fast path needs a diagonalized plan for a normal drift matrix")
    scal = plan.problem.scalar_noise()
    if scal is None:
        raise StrategyUnavailable("fast path needs B = c * I")
    z = _coefficients(plan, z)
    if plan.m == 0:
        return np.broadcast_to(c["mean"], (z.shape[0], plan.problem.n)).copy()
    return c["mean"] + (plan.problem.basis.amplitude * scal) * (_block_phi(c, z) @ c["q"].T)


def sample_normal_fastpath(plan: SamplerPlan, draw: GaussianDraw | np.ndarray) -> np.ndarray:
    z = getattr(draw, "z", draw)
    return sample_normal_fastpath_batch(plan, np.asarray(z, dtype=float)[None])[0]


# ---------------------------------------------------------------------------
# Deterministic Fourier-forced ODE u' = L u + g_N(t)
# ---------------------------------------------------------------------------

def _check_ode(l, forcing: FourierForcing, u0):
    l = as_matrix(l, "l", square=True)
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    if u0.shape[0] != l.shape[0]:
        raise DimensionError(f"u0 has length {u0.shape[0]}, l is {l.shape}")
    if forcing.terms and forcing.a.shape[1] != l.shape[0]:
        raise DimensionError(f"forcing has dimension {forcing.a.shape[1]}, l is {l.shape}")
    return l, u0


def solve_fourier_ode(l, forcing: FourierForcing, u0, t: float) -> np.ndarray:
    """``e^{tL} u0 + sum_k phi_cos_k(L) a_k + phi_sin_k(L) b_k`` (variation of constants)."""
    l, u0 = _check_ode(l, forcing, u0)
    expl = expm(l, t)
    u = expl @ u0
    if forcing.terms == 0:
        return u
    eigs = np.linalg.eigvals(l)
    for ak, bk, ck in zip(forcing.a, forcing.b, forcing.c):
        pc, ps = phi_pair_matrix(PhiSpec(ck, t), l, expta=expl, eigenvalues=eigs)
        u = u + pc @ ak + ps @ bk
    return u


def solve_augmented_exp(l, forcing: FourierForcing, u0, t: float) -> np.ndarray:
    """Same solution from one exponential of the ``(n + 2N)`` block matrix."""
    l, u0 = _check_ode(l, forcing, u0)
    n, nt = l.shape[0], forcing.terms
    big = augmented_matrix(l, forcing.a.T.reshape(n, nt), forcing.b.T.reshape(n, nt), forcing.c)
    v0 = np.concatenate([u0, np.ones(nt), np.zeros(nt)])
    return (expm(big, t) @ v0)[:n]
