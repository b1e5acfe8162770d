"""Dense linear-algebra kernels.

Matrix exponential (scaling and squaring with Padé approximants), real Schur
decomposition, a Bartels--Stewart Sylvester solver with reusable
factorizations, and numerical-range (field of values) utilities.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import lapack
from scipy.optimize import minimize_scalar

from .errors import DimensionError, DomainError, NumericalError, SingularityError, ValidationError

__all__ = [
    "as_matrix",
    "expm",
    "SchurForm",
    "real_schur",
    "SylvesterSolver",
    "solve_sylvester",
    "log_norm",
    "FovEstimate",
    "fov_estimate",
    "fov_distance",
    "sector_candidates",
    "sector_fit",
    "sectorial_resolvent_bound",
]


def as_matrix(a, name: str = "a", square: bool = False) -> np.ndarray:
    """Validate ``a`` as a finite real 2-D array and return it as float64."""
    arr = np.asarray(a)
    if np.iscomplexobj(arr):
        raise ValidationError(f"{name} must be real, got dtype {arr.dtype}")
    arr = np.atleast_2d(arr.astype(np.float64, copy=False))
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


# ---------------------------------------------------------------------------
# Matrix exponential
# ---------------------------------------------------------------------------

# Higham (2005), Table 2.3: largest 1-norm for which the degree-m Padé
# approximant meets double precision backward error.
_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_PADE_COEFFS = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}


def _pade_uv(a: np.ndarray, m: int):
    b = _PADE_COEFFS[m]
    ident = np.eye(a.shape[0], dtype=a.dtype)
    a2 = a @ a
    if m == 13:
        a4 = a2 @ a2
        a6 = a2 @ a4
        u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
                 + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
        v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
             + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
        return u, v
    powers = [ident, a2]
    for _ in range(2, (m + 1) // 2):
        powers.append(powers[-1] @ a2)
    u = sum(b[2 * j + 1] * powers[j] for j in range(len(powers)))
    v = sum(b[2 * j] * powers[j] for j in range(len(powers)))
    return a @ u, v


def expm(a, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``exp(t*a)``.

    Scaling and squaring with a Padé approximant of degree 3, 5, 7, 9 or 13
    picked from the 1-norm of ``t*a`` (Higham 2005).

    Parameters
    ----------
    a : (n, n) array_like
        Real square matrix.
    t : float
        Scalar multiplier.

    Returns
    -------
    (n, n) ndarray
    """
    a = as_matrix(a, "a", square=True)
    if not math.isfinite(t):
        raise ValidationError(f"t must be finite, got {t!r}")
    n = a.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    ta = t * a
    norm1 = np.linalg.norm(ta, 1)
    if norm1 == 0.0:
        return np.eye(n)
    for m in (3, 5, 7, 9):
        if norm1 <= _THETA[m]:
            u, v = _pade_uv(ta, m)
            return np.linalg.solve(v - u, v + u)
    s = max(0, int(math.ceil(math.log2(norm1 / _THETA[13]))))
    u, v = _pade_uv(ta / 2.0**s, 13)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


# ---------------------------------------------------------------------------
# Real Schur form and Sylvester equations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SchurForm:
    """Real Schur decomposition ``a = q @ tmat @ q.T``."""

    q: np.ndarray
    tmat: np.ndarray

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues read off the 1x1 and 2x2 diagonal blocks."""
        t = self.tmat
        n = t.shape[0]
        out = []
        i = 0
        while i < n:
            if i + 1 < n and t[i + 1, i] != 0.0:
                out.extend(np.linalg.eigvals(t[i:i + 2, i:i + 2]))
                i += 2
            else:
                out.append(complex(t[i, i]))
                i += 1
        return np.asarray(out, dtype=complex)

    def reconstruct(self) -> np.ndarray:
        return self.q @ self.tmat @ self.q.T


def real_schur(a) -> SchurForm:
    """Real Schur form of a square matrix (LAPACK ``dgees``)."""
    a = as_matrix(a, "a", square=True)
    try:
        tmat, q = scipy.linalg.schur(a, output="real")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(
            f"real Schur iteration failed for {a.shape} matrix "
            f"(norm {np.linalg.norm(a):.3e}): {exc}") from exc
    return SchurForm(q=q, tmat=tmat)


class SylvesterSolver:
    """Bartels--Stewart solver for ``l @ x - x @ c = q`` with cached Schur forms.

    Both coefficient matrices are reduced once; each call to :meth:`solve`
    costs two basis changes and one quasi-triangular solve.
    """

    gap_rtol = 1e-12

    def __init__(self, l, c, schur_l: SchurForm | None = None, schur_c: SchurForm | None = None):
        self.l = as_matrix(l, "l", square=True)
        self.c = as_matrix(c, "c", square=True)
        self.schur_l = schur_l or real_schur(self.l)
        self.schur_c = schur_c or real_schur(self.c)
        self.min_gap, self.closest_pair = self._spectral_gap()
        scale = np.linalg.norm(self.l) + np.linalg.norm(self.c)
        if self.min_gap < self.gap_rtol * max(scale, np.finfo(float).tiny):
            lam, mu = self.closest_pair
            raise SingularityError(
                f"spectra of l and c (nearly) intersect: eigenvalue {lam:.6g} of l and "
                f"{mu:.6g} of c are {self.min_gap:.3e} apart "
                f"(threshold {self.gap_rtol:.0e} * {scale:.3e})")

    def _spectral_gap(self):
        el = self.schur_l.eigenvalues()
        ec = self.schur_c.eigenvalues()
        if el.size == 0 or ec.size == 0:
            return math.inf, (np.nan, np.nan)
        gaps = np.abs(el[:, None] - ec[None, :])
        i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        return float(gaps[i, j]), (el[i], ec[j])

    def solve(self, q) -> np.ndarray:
        q = as_matrix(q, "q")
        n, m = self.l.shape[0], self.c.shape[0]
        if q.shape != (n, m):
            raise DimensionError(f"q must have shape {(n, m)}, got {q.shape}")
        if n == 0 or m == 0:
            return np.zeros((n, m))
        ql, qc = self.schur_l.q, self.schur_c.q
        f = ql.T @ q @ qc
        y, scale, info = lapack.dtrsyl(self.schur_l.tmat, self.schur_c.tmat, f, isgn=-1)
        if info < 0:
            raise NumericalError(f"dtrsyl rejected argument {-info}")
        return ql @ (y / scale) @ qc.T

    def residual(self, x, q) -> float:
        """Frobenius residual of ``l x - x c - q``."""
        return float(np.linalg.norm(self.l @ x - x @ self.c - q))


def solve_sylvester(l, c, q) -> np.ndarray:
    """Solve ``l @ x - x @ c = q`` for ``x``.

    Raises
    ------
    SingularityError
        If ``l`` and ``c`` share an eigenvalue up to a relative gap of
        ``1e-12 * (||l||_F + ||c||_F)``.
    """
    return SylvesterSolver(l, c).solve(q)


# ---------------------------------------------------------------------------
# Numerical range
# ---------------------------------------------------------------------------

def log_norm(a) -> float:
    """Logarithmic 2-norm: largest eigenvalue of the symmetric part of ``a``."""
    a = as_matrix(a, "a", square=True)
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[-1])


def _support(a: np.ndarray, theta: float):
    """Largest eigenpair of the Hermitian part of ``exp(i*theta) * a``."""
    rot = np.exp(1j * theta)
    h = 0.5 * (rot * a + np.conj(rot) * a.T)
    w, v = np.linalg.eigh(h)
    return w[-1], v[:, -1]


@dataclass(frozen=True)
class FovEstimate:
    """Sampled description of the numerical range ``F(a)``.

    For every sampled angle ``theta_j`` the numerical range lies in the half
    plane ``Re(exp(i theta_j) z) <= support[j]``; ``boundary[j]`` is a point of
    ``F(a)`` on that supporting line.
    """

    mu: float
    boundary: np.ndarray
    angles: int
    thetas: np.ndarray = field(repr=False)
    support: np.ndarray = field(repr=False)

    def outer_polygon(self) -> np.ndarray:
        """Vertices of the intersection of the sampled supporting half planes."""
        th, h = self.thetas, self.support
        th2, h2 = np.roll(th, -1), np.roll(h, -1)
        # Re(e^{i th} z) = x cos th - y sin th
        det = -np.cos(th) * np.sin(th2) + np.sin(th) * np.cos(th2)
        x = (-h * np.sin(th2) + h2 * np.sin(th)) / det
        y = (np.cos(th) * h2 - np.cos(th2) * h) / det
        return x + 1j * y


def fov_estimate(a, angles: int = 64) -> FovEstimate:
    """Sample the boundary of the numerical range with ``angles`` rotations."""
    a = as_matrix(a, "a", square=True)
    if angles < 3:
        raise DomainError("need at least 3 rotation angles")
    thetas = 2.0 * np.pi * np.arange(angles) / angles
    support = np.empty(angles)
    boundary = np.empty(angles, dtype=complex)
    for j, th in enumerate(thetas):
        support[j], v = _support(a, th)
        boundary[j] = np.vdot(v, a @ v)
    return FovEstimate(mu=log_norm(a), boundary=boundary, angles=angles,
                       thetas=thetas, support=support)


def fov_distance(a, lam: float, angles: int = 64) -> float:
    """Lower bound on the distance from ``1j*lam`` to the numerical range of ``a``.

    Every supporting half plane ``Re(exp(i theta) z) <= h(theta)`` contains
    ``F(a)``, so the distance from the point to any of them is a lower bound.
    The best of ``angles`` equispaced rotations is refined by a bounded scalar
    search over ``theta``; at the optimum the bound is attained. Returns 0
    when the point is (numerically) inside ``F(a)``.
    """
    a = as_matrix(a, "a", square=True)
    if not math.isfinite(lam):
        raise ValidationError("lam must be finite")
    if a.shape[0] == 0:
        raise DimensionError("empty matrix has no numerical range")

    def gap(theta):
        # Re(e^{i theta} * i lam) = -lam sin(theta)
        return -lam * math.sin(theta) - _support(a, theta)[0]

    thetas = 2.0 * np.pi * np.arange(angles) / angles
    gaps = np.array([gap(th) for th in thetas])
    j = int(np.argmax(gaps))
    best = gaps[j]
    step = 2.0 * np.pi / angles
    res = minimize_scalar(lambda th: -gap(th), bounds=(thetas[j] - step, thetas[j] + step),
                          method="bounded", options={"xatol": 1e-12})
    if res.success:
        best = max(best, -res.fun)
    return max(0.0, float(best))


def sectorial_resolvent_bound(lam: float, alpha: float, gamma: float) -> float:
    """Upper bound ``1/(|lam| cos(alpha) - gamma sin(alpha))`` on ``1/d(i lam, F(L))``.

    Valid for ``L`` sectorial with half-angle ``alpha`` and vertex ``gamma``.
    """
    if not 0.0 <= alpha < 0.5 * math.pi:
        raise DomainError(f"alpha must lie in [0, pi/2), got {alpha!r}")
    denom = abs(lam) * math.cos(alpha) - gamma * math.sin(alpha)
    if not denom > 0.0:
        raise DomainError(
            f"|lam| cos(alpha) - gamma sin(alpha) = {denom:.6g} is not positive "
            f"(lam={lam}, alpha={alpha}, gamma={gamma})")
    return 1.0 / denom


def _sector_angle(vertices: np.ndarray, gamma: float) -> float:
    shifted = gamma - vertices  # = -(w - gamma)
    if np.any(shifted.real <= 0.0):
        return 0.5 * math.pi
    return float(np.max(np.abs(np.arctan2(shifted.imag, shifted.real))))


def sector_candidates(fov: FovEstimate) -> list[tuple[float, float]]:
    """Valid ``(alpha, gamma)`` sector descriptions of the sampled numerical range.

    The sector is checked against the outer polygon, which contains ``F``, so
    every returned pair is a genuine sector containing the numerical range.
    """
    verts = fov.outer_polygon()
    width = max(float(np.ptp(verts.real)), float(np.ptp(verts.imag)), 1e-12)
    base = max(fov.mu, 0.0)
    gammas = [base + s * width for s in (1e-3, 1e-2, 3e-2, 0.1, 0.3, 1.0, 3.0, 10.0)]
    if fov.mu < 0.0:
        gammas.insert(0, 0.0)
    out = []
    for g in gammas:
        alpha = _sector_angle(verts, g)
        if alpha < 0.5 * math.pi:
            out.append((alpha, g))
    return out


def sector_fit(a, lam_ref: float, angles: int = 64) -> tuple[float, float]:
    """Sector ``(alpha, gamma)`` maximizing ``|lam_ref| cos(alpha) - gamma sin(alpha)``."""
    fov = a if isinstance(a, FovEstimate) else fov_estimate(a, angles)
    cands = sector_candidates(fov)
    if not cands:
        raise DomainError("numerical range is not contained in any tested sector")
    return max(cands, key=lambda ag: abs(lam_ref) * math.cos(ag[0]) - ag[1] * math.sin(ag[0]))
