"""Cross-section eigenpairs of the rectangular waveguide.

The Neumann family ``u_mn = C cos(m pi x1/a) cos(n pi x2/b)`` generates the
M-modes and the Dirichlet family ``v_mn = C sin(m pi x1/a) sin(n pi x2/b)``
generates the N-modes. Both are L2-orthonormal on (0, a) x (0, b).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

CUTOFF_RTOL = 1e-9


class CutoffError(ValueError):
    """Raised when the wavenumber sits on a cut-off of a retained mode."""


class Family(enum.Enum):
    NEUMANN = "M"
    DIRICHLET = "N"


@dataclass(frozen=True)
class CrossSection:
    a: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"cross-section sides must be positive, got a={self.a}, b={self.b}")

    @property
    def area(self) -> float:
        return self.a * self.b

    def contains(self, xhat, tol: float = 0.0) -> bool:
        x1, x2 = xhat[0], xhat[1]
        return -tol <= x1 <= self.a + tol and -tol <= x2 <= self.b + tol


@dataclass(frozen=True, order=True)
class ModeIndex:
    family: Family = field(compare=False)
    m: int
    n: int

    def __post_init__(self):
        if self.m < 0 or self.n < 0:
            raise ValueError(f"mode indices must be non-negative: {self}")
        if self.family is Family.NEUMANN and self.m == 0 and self.n == 0:
            raise ValueError("the constant Neumann eigenfunction (0, 0) carries no mode")
        if self.family is Family.DIRICHLET and (self.m < 1 or self.n < 1):
            raise ValueError(f"Dirichlet indices must both be >= 1: {self}")

    @property
    def order(self) -> int:
        return max(self.m, self.n)


@dataclass(frozen=True)
class ScalarEigenpair:
    index: ModeIndex
    lambda_sq: float
    norm_const: float

    @property
    def lam(self) -> float:
        return math.sqrt(self.lambda_sq)


@dataclass(frozen=True)
class AxialConstant:
    value: complex
    propagating: bool


def neumann_norm(m, n, a: float, b: float):
    """Closed-form L2 normalisation of cos(m pi x/a) cos(n pi y/b).

    Works elementwise on integer arrays.
    """
    m = np.asarray(m)
    n = np.asarray(n)
    return np.sqrt((2.0 - (m == 0)) * (2.0 - (n == 0)) / (a * b))


def dirichlet_norm(a: float, b: float) -> float:
    return 2.0 / math.sqrt(a * b)


def eigenvalue(cs: CrossSection, m, n):
    return np.pi**2 * ((np.asarray(m) / cs.a) ** 2 + (np.asarray(n) / cs.b) ** 2)


def eigenpair(cs: CrossSection, idx: ModeIndex) -> ScalarEigenpair:
    lam2 = float(eigenvalue(cs, idx.m, idx.n))
    if idx.family is Family.NEUMANN:
        c = float(neumann_norm(idx.m, idx.n, cs.a, cs.b))
    else:
        c = dirichlet_norm(cs.a, cs.b)
    return ScalarEigenpair(idx, lam2, c)


def eval_scalar(cs: CrossSection, pair: ScalarEigenpair, xhat) -> np.ndarray:
    """Value of the normalised eigenfunction at ``xhat`` (shape (..., 2))."""
    xhat = np.asarray(xhat, dtype=float)
    p = np.pi * pair.index.m / cs.a
    q = np.pi * pair.index.n / cs.b
    x1, x2 = xhat[..., 0], xhat[..., 1]
    if pair.index.family is Family.NEUMANN:
        return pair.norm_const * np.cos(p * x1) * np.cos(q * x2)
    return pair.norm_const * np.sin(p * x1) * np.sin(q * x2)


def eval_scalar_gradient(cs: CrossSection, pair: ScalarEigenpair, xhat) -> np.ndarray:
    """Surface gradient of the eigenfunction, shape (..., 2)."""
    xhat = np.asarray(xhat, dtype=float)
    p = np.pi * pair.index.m / cs.a
    q = np.pi * pair.index.n / cs.b
    x1, x2 = xhat[..., 0], xhat[..., 1]
    c = pair.norm_const
    if pair.index.family is Family.NEUMANN:
        g1 = -c * p * np.sin(p * x1) * np.cos(q * x2)
        g2 = -c * q * np.cos(p * x1) * np.sin(q * x2)
    else:
        g1 = c * p * np.cos(p * x1) * np.sin(q * x2)
        g2 = c * q * np.sin(p * x1) * np.cos(q * x2)
    return np.stack([g1, g2], axis=-1)


def eval_scalar_laplacian(cs: CrossSection, pair: ScalarEigenpair, xhat) -> np.ndarray:
    """Analytic surface Laplacian (sum of the two second derivatives)."""
    xhat = np.asarray(xhat, dtype=float)
    p = np.pi * pair.index.m / cs.a
    q = np.pi * pair.index.n / cs.b
    x1, x2 = xhat[..., 0], xhat[..., 1]
    c = pair.norm_const
    if pair.index.family is Family.NEUMANN:
        base = np.cos(p * x1) * np.cos(q * x2)
    else:
        base = np.sin(p * x1) * np.sin(q * x2)
    return -(p * p + q * q) * c * base


def axial_constant(k: float, lambda_sq) -> AxialConstant:
    """sqrt(k^2 - lambda^2) on the branch with Re >= 0 and Im >= 0."""
    d = k * k - lambda_sq
    if abs(d) < CUTOFF_RTOL * k * k:
        raise CutoffError(f"k={k} is at the cut-off lambda^2={lambda_sq}")
    if d > 0:
        return AxialConstant(complex(math.sqrt(d), 0.0), True)
    return AxialConstant(complex(0.0, math.sqrt(-d)), False)


def axial_constants(k: float, lambda_sq) -> np.ndarray:
    """Vectorised :func:`axial_constant`; returns the complex values only."""
    lambda_sq = np.asarray(lambda_sq, dtype=float)
    d = k * k - lambda_sq
    if np.any(np.abs(d) < CUTOFF_RTOL * k * k):
        bad = lambda_sq[np.abs(d) < CUTOFF_RTOL * k * k]
        raise CutoffError(f"k={k} is at the cut-off of lambda^2={bad.tolist()}")
    return np.where(d > 0, np.sqrt(np.abs(d)) + 0j, 1j * np.sqrt(np.abs(d)))


def _family_indices(family: Family, max_order: int):
    lo = 1 if family is Family.DIRICHLET else 0
    for m in range(lo, max_order + 1):
        for n in range(lo, max_order + 1):
            if family is Family.NEUMANN and m == 0 and n == 0:
                continue
            yield m, n


def enumerate_modes(cs: CrossSection, family: Family, count: int) -> list[ScalarEigenpair]:
    """The ``count`` smallest eigenpairs, ties broken by (m, n)."""
    if count < 1:
        raise ValueError("count must be >= 1")
    # grow the index box until it certainly holds the count smallest
    order = 1
    while True:
        cand = sorted(
            (float(eigenvalue(cs, m, n)), m, n) for m, n in _family_indices(family, order)
        )
        if len(cand) >= count:
            bound = np.pi**2 * ((order + 1) / max(cs.a, cs.b)) ** 2
            if cand[count - 1][0] < bound:
                break
        order *= 2
    return [eigenpair(cs, ModeIndex(family, m, n)) for _, m, n in cand[:count]]


def count_propagating(cs: CrossSection, k: float, family: Family) -> int:
    """Number of modes of ``family`` whose eigenvalue lies below k^2."""
    mmax = int(math.floor(k * cs.a / math.pi)) + 1
    nmax = int(math.floor(k * cs.b / math.pi)) + 1
    lo = 1 if family is Family.DIRICHLET else 0
    m, n = np.meshgrid(np.arange(lo, mmax + 1), np.arange(lo, nmax + 1), indexing="ij")
    lam2 = eigenvalue(cs, m, n)
    if np.any(np.abs(k * k - lam2) < CUTOFF_RTOL * k * k):
        raise CutoffError(f"k={k} is a cut-off wavenumber")
    keep = lam2 < k * k
    if family is Family.NEUMANN:
        keep &= ~((m == 0) & (n == 0))
    return int(keep.sum())


def max_propagating_order(cs: CrossSection, k: float) -> int:
    """Highest Fourier index (max(m, n)) among propagating modes of either family."""
    best = 0
    for fam in Family:
        for m, n in _family_indices(fam, int(k * max(cs.a, cs.b) / math.pi) + 1):
            if float(eigenvalue(cs, m, n)) < k * k:
                best = max(best, m, n)
    return best
