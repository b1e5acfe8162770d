"""Time-stepping baselines: Euler--Maruyama and backward Euler--Maruyama.

Both iterate on the uniform grid ``t_i = i * t_end / m_steps``::

    EM   V_{i+1} = V_i + dt L V_i + B dW_i
    BEM  V_{i+1} = (I - dt L)^{-1} V_i + B dW_i

The backward scheme adds the noise after the implicit solve. Increments
come from the same keyed per-sample streams as the expansion coefficients.
With ``substeps = r`` each increment is the sum of ``r`` finer increments,
so plans with ``m_steps * substeps`` equal see the same Brownian path.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import DomainError, SingularityError, StrategyUnavailable, ValidationError
from .klprocess import standard_normals
from .sampler import SdeProblem

__all__ = [
    "Scheme",
    "SteppingPlan",
    "increments",
    "step_paths",
    "em_path",
    "bem_path",
    "em_second_moment",
    "bem_second_moment",
]


class Scheme(str, enum.Enum):
    EM = "em"
    BACKWARD_EM = "bem"


@dataclass(frozen=True)
class SteppingPlan:
    """Grid, scheme and cached step operator for one problem.

    ``cache['step']`` is ``I + dt L`` for EM; ``cache['lu']`` the LU factors
    of ``I - dt L`` for the backward scheme.
    """

    problem: SdeProblem
    m_steps: int
    scheme: Scheme = Scheme.EM
    substeps: int = 1
    cache: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if int(self.m_steps) != self.m_steps or self.m_steps < 1:
            raise ValidationError(f"m_steps must be a positive integer, got {self.m_steps!r}")
        if int(self.substeps) != self.substeps or self.substeps < 1:
            raise ValidationError(f"substeps must be a positive integer, got {self.substeps!r}")
        n = self.problem.n
        dt = self.dt
        cache = {}
        if self.scheme is Scheme.EM:
            cache["step"] = np.eye(n) + dt * self.problem.l
        else:
            mat = np.eye(n) - dt * self.problem.l
            if n and np.linalg.cond(mat) > 1.0 / np.finfo(float).eps:
                raise SingularityError(f"I - dt L is singular to working precision (dt={dt:g})")
            cache["lu"] = lu_factor(mat)
        for v in cache.values():
            for arr in v if isinstance(v, tuple) else (v,):
                arr.setflags(write=False)
        object.__setattr__(self, "cache", cache)

    @property
    def dt(self) -> float:
        return self.problem.t_end / self.m_steps

    def times(self) -> np.ndarray:
        """Grid ``t_0 = 0, ..., t_m = t_end`` (last point exact)."""
        t = np.arange(self.m_steps + 1) * self.dt
        t[-1] = self.problem.t_end
        return t

    def advance(self, v: np.ndarray) -> np.ndarray:
        """Drift part of one step applied to row states ``v`` of shape ``(N, n)``."""
        if self.scheme is Scheme.EM:
            return v @ self.cache["step"].T
        return lu_solve(self.cache["lu"], v.T).T


def increments(plan: SteppingPlan, seed: int, start: int = 0, count: int = 1) -> np.ndarray:
    """Brownian increments ``dW`` of shape ``(count, m_steps, d)`` for samples ``start..``."""
    r = plan.substeps
    d = plan.problem.noise_dim
    z = standard_normals(seed, start, count, plan.m_steps * r, d)
    if r > 1:
        z = z.reshape(count, plan.m_steps, r, d).sum(axis=2)
    return z * math.sqrt(plan.dt / r)


def step_paths(plan: SteppingPlan, seed: int, start: int = 0, count: int = 1,
               trajectory: bool = False) -> np.ndarray:
    """Run ``count`` seeded paths.

    Returns
    -------
    ndarray
        ``(count, n)`` endpoints, or ``(count, m_steps + 1, n)`` with the
        initial state in row 0 when ``trajectory`` is set.
    """
    if count < 0:
        raise ValidationError("count must be nonnegative")
    prob = plan.problem
    noise = increments(plan, seed, start, count) @ prob.b.T
    v = np.broadcast_to(prob.x0, (count, prob.n)).copy()
    if trajectory:
        out = np.empty((count, plan.m_steps + 1, prob.n))
        out[:, 0] = v
    for i in range(plan.m_steps):
        v = plan.advance(v) + noise[:, i]
        if trajectory:
            out[:, i + 1] = v
    return out if trajectory else v


def em_path(plan: SteppingPlan, seed: int, index: int = 0) -> np.ndarray:
    """Euler--Maruyama endpoint for sample ``index`` of the stream ``seed``."""
    if plan.scheme is not Scheme.EM:
        raise StrategyUnavailable("plan was built for the backward scheme")
    return step_paths(plan, seed, index, 1)[0]


def bem_path(plan: SteppingPlan, seed: int, index: int = 0) -> np.ndarray:
    """Backward Euler--Maruyama endpoint for sample ``index`` of the stream ``seed``."""
    if plan.scheme is not Scheme.BACKWARD_EM:
        raise StrategyUnavailable("plan was built for the explicit scheme")
    return step_paths(plan, seed, index, 1)[0]


def _moment_recursion(plan: SteppingPlan) -> float:
    prob = plan.problem
    q = plan.dt * (prob.b @ prob.b.T)
    mean = prob.x0.copy()
    p = np.zeros((prob.n, prob.n))
    for _ in range(plan.m_steps):
        mean = plan.advance(mean[None])[0]
        ap = plan.advance(p)          # rows of P -> (A P^T)^T = P A^T
        p = plan.advance(ap.T) + q    # A (P A^T) + q
    return float(mean @ mean + np.trace(p))


def em_second_moment(problem: SdeProblem, m_steps: int) -> float:
    """Exact ``E |V_m|^2`` of the Euler--Maruyama chain (no sampling).

    ``mean_{i+1} = A mean_i``, ``P_{i+1} = A P_i A^T + dt B B^T``.
    """
    return _moment_recursion(SteppingPlan(problem, m_steps, Scheme.EM))


def bem_second_moment(problem: SdeProblem, m_steps: int) -> float:
    """Exact ``E |V_m|^2`` of the backward chain with ``A = (I - dt L)^{-1}``."""
    if m_steps < 1:
        raise DomainError("m_steps must be >= 1")
    return _moment_recursion(SteppingPlan(problem, m_steps, Scheme.BACKWARD_EM))
