"""Karhunen--Loeve bases for Brownian motion and the Brownian bridge.

On ``[0, T]`` both processes expand as::

    sqrt(2/T) * sum_k Z_k sin(lam_k t) / lam_k

with ``lam_k = (k - 1/2) pi / T`` (Wiener) or ``lam_k = k pi / T`` (bridge).

Gaussian coefficients come from keyed counter-based streams: the value at
(seed, sample index, position) never depends on how samples are batched.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, ValidationError

__all__ = [
    "BasisKind",
    "KlBasis",
    "GaussianDraw",
    "BLOCK_SIZE",
    "standard_normals",
    "draw_gaussians",
    "kl_frequencies",
    "kl_path",
    "kl_path_batch",
]

# Samples sharing one Philox key. Sample j is column j % BLOCK_SIZE of the
# block keyed (seed, j // BLOCK_SIZE); rows are generated in order, so a
# longer draw extends a shorter one.
BLOCK_SIZE = 64


class BasisKind(str, enum.Enum):
    WIENER = "wiener"
    BRIDGE = "bridge"


@dataclass(frozen=True)
class KlBasis:
    """Frequency rule and horizon of a Karhunen--Loeve expansion."""

    kind: BasisKind = BasisKind.WIENER
    horizon: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise ValidationError(f"horizon must be positive, got {self.horizon!r}")

    @property
    def amplitude(self) -> float:
        return math.sqrt(2.0 / self.horizon)

    @property
    def offset(self) -> float:
        """``delta`` in ``lam_k = (k - delta) pi / T``."""
        return 0.5 if self.kind is BasisKind.WIENER else 0.0

    def frequencies(self, m: int, start: int = 1) -> np.ndarray:
        """``lam_k`` for ``k = start, ..., start + m - 1``."""
        k = np.arange(start, start + m, dtype=float)
        return (k - self.offset) * (math.pi / self.horizon)


def kl_frequencies(basis: KlBasis, m: int) -> np.ndarray:
    """First ``m`` frequencies of ``basis``."""
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    return basis.frequencies(m)


def _check_seed(seed) -> int:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValidationError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return seed


def _block(seed: int, block: int, rows: int) -> np.ndarray:
    key = np.array([seed, block], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.standard_normal((rows, BLOCK_SIZE))


def standard_normals(seed: int, start: int, count: int, m: int, n: int) -> np.ndarray:
    """Standard normals for samples ``start .. start+count-1``, shape ``(count, m, n)``."""
    seed = _check_seed(seed)
    if start < 0 or count < 0 or m < 0 or n < 0:
        raise ValidationError("start, count, m and n must be nonnegative")
    rows = m * n
    out = np.empty((count, rows))
    if count == 0 or rows == 0:
        return out.reshape(count, m, n)
    stop = start + count
    for b in range(start // BLOCK_SIZE, (stop - 1) // BLOCK_SIZE + 1):
        lo = max(start, b * BLOCK_SIZE)
        hi = min(stop, (b + 1) * BLOCK_SIZE)
        blk = _block(seed, b, rows)
        out[lo - start:hi - start] = blk[:, lo - b * BLOCK_SIZE:hi - b * BLOCK_SIZE].T
    return out.reshape(count, m, n)


@dataclass(frozen=True)
class GaussianDraw:
    """Coefficients ``Z_1..Z_m`` of one realization; ``z`` has shape ``(m, n)``."""

    seed: int
    index: int
    z: np.ndarray

    @property
    def m(self) -> int:
        return self.z.shape[0]

    @property
    def n(self) -> int:
        return self.z.shape[1]


def draw_gaussians(seed: int, m: int, n: int, index: int = 0) -> GaussianDraw:
    """Reproducible draw for sample ``index`` of the stream keyed by ``seed``."""
    if m < 0 or n < 1:
        raise ValidationError(f"need m >= 0 and n >= 1, got m={m}, n={n}")
    z = standard_normals(seed, index, 1, m, n)[0]
    z.setflags(write=False)
    return GaussianDraw(seed=int(seed), index=int(index), z=z)


def kl_path_batch(basis: KlBasis, z: np.ndarray, t: float) -> np.ndarray:
    """Truncated expansion at time ``t`` for coefficient stacks ``z`` of shape ``(..., m, n)``."""
    if not 0.0 <= t <= basis.horizon * (1.0 + 1e-14):
        raise DomainError(f"t={t} outside [0, {basis.horizon}]")
    z = np.asarray(z, dtype=float)
    lam = basis.frequencies(z.shape[-2])
    w = basis.amplitude * np.sin(lam * t) / lam
    return np.einsum("...kn,k->...n", z, w)


def kl_path(basis: KlBasis, draw: GaussianDraw, t: float) -> np.ndarray:
    """Truncated Karhunen--Loeve path of ``draw`` at time ``t``."""
    if draw.z.ndim != 2:
        raise DimensionError("draw.z must have shape (m, n)")
    return kl_path_batch(basis, draw.z, t)
