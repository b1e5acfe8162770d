"""Benchmark problems."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ValidationError
from ..sampler import SdeProblem

__all__ = [
    "BenchProblem",
    "build_turbulent_diffusion",
    "build_heat_spde",
    "build_scalar_ou",
    "build_custom",
    "build_problem",
    "PROBLEM_KINDS",
]


@dataclass(frozen=True)
class BenchProblem:
    """An :class:`SdeProblem` plus labels used in the CSV output."""

    kind: str
    problem: SdeProblem
    coords: np.ndarray  # one label per state component (grid points for the heat problem)
    params: dict = field(default_factory=dict)


def _positive(name: str, value: float):
    if not (math.isfinite(value) and value > 0.0):
        raise ValidationError(f"{name} must be positive, got {value!r}")


def build_turbulent_diffusion(t1: float = 0.5, t2: float = 0.5, sigma1: float = 1.0,
                              sigma2: float = 1.0, beta: float = 2.0, t_end: float = 1.0,
                              dim: int = 3) -> BenchProblem:
    """Two coupled velocity components in ``dim`` space dimensions.

    ``L = [[-(1/T1 + beta) I, beta I], [beta I, -(1/T2 + beta) I]]``,
    ``B = diag(sigma1 I, sigma2 I)``, ``X_0 = (1, ..., 1)``.
    """
    _positive("t1", t1)
    _positive("t2", t2)
    _positive("t_end", t_end)
    if beta < 0.0 or sigma1 < 0.0 or sigma2 < 0.0:
        raise ValidationError("beta and the sigmas must be nonnegative")
    eye = np.eye(dim)
    l = np.block([[-(1.0 / t1 + beta) * eye, beta * eye],
                  [beta * eye, -(1.0 / t2 + beta) * eye]])
    b = np.block([[sigma1 * eye, np.zeros((dim, dim))],
                  [np.zeros((dim, dim)), sigma2 * eye]])
    prob = SdeProblem(l, b, np.ones(2 * dim), t_end)
    params = dict(t1=t1, t2=t2, sigma1=sigma1, sigma2=sigma2, beta=beta, t_end=t_end, dim=dim)
    return BenchProblem("turbulent_diffusion", prob, np.arange(1.0, 2 * dim + 1), params)


def heat_operators(n: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Second-difference and centered first-difference matrices on ``n`` interior points of [0, 1]."""
    dx = 1.0 / (n + 1)
    off = np.ones(n - 1)
    lap = (np.diag(-2.0 * np.ones(n)) + np.diag(off, 1) + np.diag(off, -1)) / dx ** 2
    grad = (np.diag(off, 1) - np.diag(off, -1)) / (2.0 * dx)
    return lap, grad, dx


def build_heat_spde(n: int = 200, eps: float = 0.1, alpha: float = -1.0, beta: float = 0.1,
                    t_end: float = 0.4) -> BenchProblem:
    """Finite-difference advection--diffusion with space-time white noise.

    ``L = eps * lap + alpha * grad``, ``B = beta / sqrt(dx) I`` with
    ``dx = 1/(n+1)``; the initial state samples the hat function
    ``2x`` on ``[0, 1/2]``, ``2 - 2x`` on ``[1/2, 1]``.
    """
    if int(n) != n or n < 2:
        raise ValidationError(f"n must be an integer >= 2, got {n!r}")
    _positive("eps", eps)
    _positive("t_end", t_end)
    n = int(n)
    lap, grad, dx = heat_operators(n)
    x = dx * np.arange(1, n + 1)
    x0 = np.where(x <= 0.5, 2.0 * x, 2.0 - 2.0 * x)
    prob = SdeProblem(eps * lap + alpha * grad, (beta / math.sqrt(dx)) * np.eye(n), x0, t_end)
    return BenchProblem("heat_spde", prob, x, dict(n=n, eps=eps, alpha=alpha, beta=beta, t_end=t_end))


def build_scalar_ou(drift: float = -1.0, noise: float = 1.0, x0: float = 1.0,
                    t_end: float = 1.0) -> BenchProblem:
    """``dX = drift X dt + noise dW``."""
    _positive("t_end", t_end)
    prob = SdeProblem([[drift]], [[noise]], [x0], t_end)
    return BenchProblem("scalar_ou", prob, np.ones(1), dict(drift=drift, noise=noise, x0=x0, t_end=t_end))


def build_custom(l_path, b_path, x0_path, t_end: float, base: Path | None = None) -> BenchProblem:
    """Problem from whitespace-separated matrix files (``numpy.loadtxt`` format)."""
    def load(p):
        p = Path(p)
        if base is not None and not p.is_absolute():
            p = base / p
        try:
            return np.loadtxt(p, ndmin=2)
        except OSError as exc:
            raise ConfigError(f"cannot read matrix file {p}: {exc}") from exc

    l = load(l_path)
    prob = SdeProblem(l, load(b_path), load(x0_path).reshape(-1), t_end)
    return BenchProblem("custom", prob, np.arange(1.0, prob.n + 1),
                        dict(l=str(l_path), b=str(b_path), x0=str(x0_path), t_end=t_end))


_BUILDERS = {
    "turbulent_diffusion": build_turbulent_diffusion,
    "heat_spde": build_heat_spde,
    "scalar_ou": build_scalar_ou,
}
PROBLEM_KINDS = tuple(_BUILDERS) + ("custom",)


def build_problem(kind: str, params: dict, base: Path | None = None) -> BenchProblem:
    """Dispatch on ``kind``; unknown kinds or keyword names raise :class:`ConfigError`."""
    if kind == "custom":
        try:
            return build_custom(params["l"], params["b"], params["x0"], float(params["t_end"]), base)
        except KeyError as exc:
            raise ConfigError(f"custom problem needs l, b, x0 and t_end (missing {exc})") from exc
    try:
        builder = _BUILDERS[kind]
    except KeyError:
        raise ConfigError(f"unknown problem kind {kind!r}; choose from {', '.join(PROBLEM_KINDS)}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {kind}: {exc}") from exc
