"""Trigonometric phi functions.

For a frequency ``lam`` and time ``t``::

    phi_cos(z) = int_0^t exp((t - s) z) cos(lam s) ds
    phi_sin(z) = int_0^t exp((t - s) z) sin(lam s) ds

with the closed forms::

    phi_cos(z) = (z e^{zt} - z cos(lam t) + lam sin(lam t)) / (z^2 + lam^2)
    phi_sin(z) = (lam e^{zt} - z sin(lam t) - lam cos(lam t)) / (z^2 + lam^2)

Matrix arguments are evaluated through the resolvent identity
``phi_cos(A) + i phi_sin(A) = (e^{tA} - e^{i lam t} I)(A - i lam I)^{-1}``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BoundUnavailable, DomainError, ValidationError
from .matkit import as_matrix, expm, fov_distance, log_norm

__all__ = [
    "PhiSpec",
    "PhiAccuracyWarning",
    "phi_cos_scalar",
    "phi_sin_scalar",
    "phi_pair_scalar",
    "phi_cos_matrix",
    "phi_sin_matrix",
    "phi_pair_matrix",
    "phi_norm_bound",
    "SERIES_RADIUS",
]

# |t (z - w)| below this uses the Taylor series of the divided difference.
SERIES_RADIUS = 0.5
_SERIES_TERMS = 18  # remainder below 0.5**18 / 19! ~ 3e-23
# Distance from i*lam to the spectrum (relative to max(1, ||A||)) that triggers the fallback.
EIG_GAP_RTOL = 1e-8


class PhiAccuracyWarning(UserWarning):
    """The resolvent route was bypassed because ``i*lam`` is (nearly) an eigenvalue."""


@dataclass(frozen=True)
class PhiSpec:
    """Frequency ``lam`` and time horizon ``t`` selecting one phi function."""

    lam: float
    t: float

    def __post_init__(self):
        if not math.isfinite(self.lam):
            raise ValidationError(f"lam must be finite, got {self.lam!r}")
        if not (math.isfinite(self.t) and self.t >= 0.0):
            raise ValidationError(f"t must be finite and nonnegative, got {self.t!r}")


def _divdiff_exp(z, w, t):
    """``(e^{tz} - e^{tw}) / (z - w)``, with the limit ``t e^{tw}`` at ``z = w``.

    Near the diagonal the difference quotient cancels, so there it is
    ``t e^{tw} sum_j x^j / (j+1)!`` with ``x = t (z - w)``.
    """
    x = t * (z - w)
    small = np.abs(x) < SERIES_RADIUS
    out = np.empty(np.broadcast(z, w).shape, dtype=complex)
    if np.any(small):
        xs = x[small]
        acc = np.full(xs.shape, 1.0 / math.factorial(_SERIES_TERMS), dtype=complex)
        for j in range(_SERIES_TERMS - 1, 0, -1):
            acc = acc * xs + 1.0 / math.factorial(j)
        out[small] = t * np.exp(t * w[small]) * acc
    big = ~small
    if np.any(big):
        zb, wb = z[big], w[big]
        out[big] = (np.exp(t * zb) - np.exp(t * wb)) / (zb - wb)
    return out


def phi_pair_scalar(lam, t, z):
    """Return ``(phi_cos(z), phi_sin(z))``; broadcasts over ``lam`` and ``z``.

    With ``D(w) = (e^{tz} - e^{tw}) / (z - w)``::

        phi_cos(z) + i phi_sin(z) = D(i lam)
        phi_cos(z) - i phi_sin(z) = D(-i lam)

    The removable singularities at ``z = +-i lam`` are handled inside ``D``.
    """
    lam = np.asarray(lam, dtype=float)
    z = np.asarray(z, dtype=complex)
    scalar = lam.ndim == 0 and z.ndim == 0
    lam, z = np.broadcast_arrays(np.atleast_1d(lam), np.atleast_1d(z))
    d_plus = _divdiff_exp(z, 1j * lam, t)
    d_minus = _divdiff_exp(z, -1j * lam, t)
    pc = 0.5 * (d_plus + d_minus)
    ps = (d_plus - d_minus) / 2j
    if scalar:
        return pc[0], ps[0]
    return pc, ps


def phi_cos_scalar(spec: PhiSpec, z):
    """Scalar ``phi_cos`` for the frequency and time in ``spec``."""
    return phi_pair_scalar(spec.lam, spec.t, z)[0]


def phi_sin_scalar(spec: PhiSpec, z):
    """Scalar ``phi_sin`` for the frequency and time in ``spec``."""
    return phi_pair_scalar(spec.lam, spec.t, z)[1]


def _phi_pair_augmented(spec: PhiSpec, a: np.ndarray):
    # exp(t [[A, I, 0], [0, 0, -lam I], [0, lam I, 0]]) has (1,2) block
    # [phi_cos(A), -phi_sin(A)]; no resolvent is involved.
    n = a.shape[0]
    big = np.zeros((3 * n, 3 * n))
    big[:n, :n] = a
    big[:n, n:2 * n] = np.eye(n)
    big[n:2 * n, 2 * n:] = -spec.lam * np.eye(n)
    big[2 * n:, n:2 * n] = spec.lam * np.eye(n)
    e = expm(big, spec.t)
    return e[:n, n:2 * n], -e[:n, 2 * n:]


def phi_pair_matrix(spec: PhiSpec, a, expta=None, eig=None, eigenvalues=None):
    """Return ``(phi_cos(a), phi_sin(a))`` for a real square matrix.

    Parameters
    ----------
    spec : PhiSpec
    a : (n, n) array_like
    expta : ndarray, optional
        Precomputed ``exp(t a)``; shared across frequencies by callers.
    eig : tuple (w, V), optional
        Eigendecomposition ``a = V diag(w) V^{-1}``; switches to spectral calculus.
    eigenvalues : ndarray, optional
        Spectrum of ``a`` used for the near-eigenvalue check (computed if omitted).
    """
    a = as_matrix(a, "a", square=True)
    n = a.shape[0]
    lam, t = spec.lam, spec.t
    if eig is not None:
        w, v = eig
        pc, ps = phi_pair_scalar(lam, t, w)
        vinv = np.linalg.inv(v)
        return (np.real((v * pc) @ vinv), np.real((v * ps) @ vinv))
    if eigenvalues is None:
        eigenvalues = np.linalg.eigvals(a) if n else np.zeros(0)
    tol = EIG_GAP_RTOL * max(1.0, np.linalg.norm(a) if n else 0.0)
    if n and np.min(np.abs(eigenvalues - 1j * lam)) < tol:
        warnings.warn(
            f"i*{lam:.6g} is within {tol:.1e} of the spectrum; "
            "evaluating phi through the augmented exponential instead of the resolvent",
            PhiAccuracyWarning, stacklevel=2)
        return _phi_pair_augmented(spec, a)
    if expta is None:
        expta = expm(a, t)
    ident = np.eye(n)
    # (A - i lam I)^{-1} commutes with e^{tA}
    r = np.linalg.solve(a - 1j * lam * ident, expta - np.exp(1j * lam * t) * ident)
    return r.real.copy(), r.imag.copy()


def phi_cos_matrix(spec: PhiSpec, a, expta=None, eig=None, eigenvalues=None) -> np.ndarray:
    """Matrix ``phi_cos(a)``; see :func:`phi_pair_matrix`."""
    return phi_pair_matrix(spec, a, expta=expta, eig=eig, eigenvalues=eigenvalues)[0]


def phi_sin_matrix(spec: PhiSpec, a, expta=None, eig=None, eigenvalues=None) -> np.ndarray:
    """Matrix ``phi_sin(a)``; see :func:`phi_pair_matrix`."""
    return phi_pair_matrix(spec, a, expta=expta, eig=eig, eigenvalues=eigenvalues)[1]


def phi_norm_bound(spec: PhiSpec, a) -> float:
    """Bound ``(1 + e^{t mu(a)}) / d(i lam, F(a))`` on both phi matrix 2-norms."""
    a = as_matrix(a, "a", square=True)
    d = fov_distance(a, spec.lam)
    if d <= 0.0:
        raise BoundUnavailable(
            f"i*{spec.lam:.6g} lies in the numerical range; the norm bound is unavailable")
    try:
        grow = math.exp(spec.t * log_norm(a))
    except OverflowError as exc:
        raise DomainError("e^{t mu(a)} overflows") from exc
    return (1.0 + grow) / d
