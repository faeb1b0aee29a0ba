"""Vector waveguide modes, tangential-trace coefficients and the modal DtN map.

Every scalar eigenfunction ``phi`` with axial constant ``beta`` generates two
divergence-free fields from the potential ``A = phi(xhat) exp(i beta x3) e3``::

    M = curl A            = (d2 phi, -d1 phi, 0) exp(i beta x3)
    N = curl curl A / k   = (i beta d1 phi, i beta d2 phi, lambda^2 phi) exp(i beta x3) / k

with ``curl M = k N`` and ``curl N = k M``. The physical M-modes use Neumann
eigenfunctions, the N-modes Dirichlet ones; the PEC condition then holds by
construction.

Tangential traces on a cross-section are expanded either in the ``"div"``
basis ``{grad u_m, curl v_n}`` (which is where ``e3 x E`` lives) or in the
``"curl"`` basis ``{curl u_m, grad v_n}`` (where the DtN output lives).
Here ``curl phi = (d2 phi, -d1 phi)`` is the surface vector curl.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .spectra import (
    AxialConstant,
    CrossSection,
    CutoffError,
    Family,
    ScalarEigenpair,
    axial_constant,
    eval_scalar,
    eval_scalar_gradient,
)


class Direction(enum.Enum):
    PLUS = 1
    MINUS = -1


class TraceSpace(enum.Enum):
    HDIV = "Hdiv^-1/2"
    HCURL = "Hcurl^-1/2"
    HT = "H^t_T"


class Side(enum.Enum):
    PLUS = 1
    MINUS = -1


@dataclass(frozen=True)
class VectorMode:
    """A cross-section eigenpair lifted to a 3-D field travelling along +/-x3."""

    cs: CrossSection
    pair: ScalarEigenpair
    axial: AxialConstant
    k: float
    direction: Direction = Direction.PLUS

    @classmethod
    def build(cls, cs, pair, k, direction=Direction.PLUS) -> "VectorMode":
        return cls(cs, pair, axial_constant(k, pair.lambda_sq), k, direction)

    @property
    def beta(self) -> complex:
        return self.direction.value * self.axial.value

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        phi = eval_scalar(self.cs, self.pair, x[..., :2])
        grad = eval_scalar_gradient(self.cs, self.pair, x[..., :2])
        phase = np.exp(1j * self.beta * x[..., 2])
        return phi, grad, phase

    def m_field(self, x) -> np.ndarray:
        _, grad, phase = self._parts(x)
        zero = np.zeros_like(phase)
        return np.stack([grad[..., 1] * phase, -grad[..., 0] * phase, zero], axis=-1)

    def n_field(self, x) -> np.ndarray:
        phi, grad, phase = self._parts(x)
        ib = 1j * self.beta
        return (
            np.stack(
                [ib * grad[..., 0] * phase, ib * grad[..., 1] * phase, self.pair.lambda_sq * phi * phase],
                axis=-1,
            )
            / self.k
        )

    def curl_m(self, x) -> np.ndarray:
        return self.k * self.n_field(x)

    def curl_n(self, x) -> np.ndarray:
        return self.k * self.m_field(x)

    def field(self, x) -> np.ndarray:
        """The physical mode: M for the Neumann family, N for the Dirichlet family."""
        if self.pair.index.family is Family.NEUMANN:
            return self.m_field(x)
        return self.n_field(x)

    def curl(self, x) -> np.ndarray:
        if self.pair.index.family is Family.NEUMANN:
            return self.curl_m(x)
        return self.curl_n(x)


def eval_M(mode: VectorMode, x) -> np.ndarray:
    return mode.m_field(x)


def eval_N(mode: VectorMode, x) -> np.ndarray:
    return mode.n_field(x)


def curl_M(mode: VectorMode, x) -> np.ndarray:
    return mode.curl_m(x)


def curl_N(mode: VectorMode, x) -> np.ndarray:
    return mode.curl_n(x)


def surface_curl(g: np.ndarray) -> np.ndarray:
    """Surface vector curl from a surface gradient: (d2 phi, -d1 phi)."""
    return np.stack([g[..., 1], -g[..., 0]], axis=-1)


@dataclass(frozen=True)
class TraceCoefficients:
    """Coefficients of a tangential field on a cross-section.

    ``alpha`` multiplies the Neumann-generated basis fields and ``beta`` the
    Dirichlet-generated ones, in the order of ``m_modes`` / ``n_modes``.
    """

    m_modes: tuple
    n_modes: tuple
    alpha: np.ndarray
    beta: np.ndarray
    basis: str = "div"

    def __post_init__(self):
        if self.basis not in ("div", "curl"):
            raise ValueError(f"unknown trace basis {self.basis!r}")
        if len(self.alpha) != len(self.m_modes) or len(self.beta) != len(self.n_modes):
            raise ValueError("coefficient lengths must match the truncation")

    @property
    def truncation(self) -> tuple[int, int]:
        return len(self.m_modes), len(self.n_modes)

    @classmethod
    def zeros(cls, m_modes, n_modes, basis="div") -> "TraceCoefficients":
        return cls(tuple(m_modes), tuple(n_modes), np.zeros(len(m_modes), complex),
                   np.zeros(len(n_modes), complex), basis)

    def evaluate(self, cs: CrossSection, xhat) -> np.ndarray:
        """Tangential field (first two components) at surface points ``xhat``."""
        xhat = np.asarray(xhat, dtype=float)
        out = np.zeros(xhat.shape[:-1] + (2,), dtype=complex)
        for a, pair in zip(self.alpha, self.m_modes):
            g = eval_scalar_gradient(cs, pair, xhat)
            out += a * (g if self.basis == "div" else surface_curl(g))
        for b, pair in zip(self.beta, self.n_modes):
            g = eval_scalar_gradient(cs, pair, xhat)
            out += b * (surface_curl(g) if self.basis == "div" else g)
        return out


def trace_norm(c: TraceCoefficients, space: TraceSpace, t: float = 0.0) -> float:
    """Modal trace-space norm.

    ``lambda_m`` and ``mu_n`` are the square roots of the stored eigenvalues.
    """
    lam = np.sqrt([p.lambda_sq for p in c.m_modes])
    mu = np.sqrt([p.lambda_sq for p in c.n_modes])
    a2 = np.abs(c.alpha) ** 2
    b2 = np.abs(c.beta) ** 2
    if space is TraceSpace.HCURL:
        s = np.sum(a2 * lam) + np.sum(b2 * mu**3)
    elif space is TraceSpace.HDIV:
        s = np.sum(a2 * lam**3) + np.sum(b2 * mu)
    else:
        p = 2.0 * (t + 1.0)
        s = np.sum(a2 * lam**p) + np.sum(b2 * mu**p)
    return float(np.sqrt(s))


def dtn_apply(c: TraceCoefficients, side: Side, k: float) -> TraceCoefficients:
    """Apply the modal DtN map to ``e3 x U`` given in the ``"div"`` basis.

    Returns ``e3 x curl U`` in the ``"curl"`` basis: the coefficient of
    ``curl u_m`` is ``-i h_m alpha_m`` and that of ``grad v_n`` is
    ``i k^2 beta_n / g_n`` (signs of h, g flipped on the minus side).
    """
    if c.basis != "div":
        raise ValueError("dtn_apply expects coefficients in the 'div' basis")
    s = side.value
    h = np.array([axial_constant(k, p.lambda_sq).value for p in c.m_modes], dtype=complex)
    g = np.array([axial_constant(k, p.lambda_sq).value for p in c.n_modes], dtype=complex)
    if np.any(h == 0) or np.any(g == 0):
        raise CutoffError("DtN undefined at a cut-off")
    alpha = -1j * s * h * c.alpha
    beta = 1j * k * k * c.beta / (s * g) if len(g) else np.zeros(0, complex)
    return TraceCoefficients(c.m_modes, c.n_modes, alpha, beta, "curl")


def blocked_solution_amplitudes(c: TraceCoefficients, k: float, s: float, side: Side = Side.PLUS):
    """Modal amplitudes (A_m, B_n) of the outgoing blocked-waveguide solution
    whose trace ``e3 x U`` on the plane x3 = s is ``c``."""
    sg = side.value
    h = np.array([axial_constant(k, p.lambda_sq).value for p in c.m_modes], dtype=complex) * sg
    g = np.array([axial_constant(k, p.lambda_sq).value for p in c.n_modes], dtype=complex) * sg
    A = c.alpha * np.exp(-1j * h * s)
    B = c.beta * np.exp(-1j * g * s) * k / (-1j * g) if len(g) else np.zeros(0, complex)
    return A, B


def gauss_legendre_rect(cs: CrossSection, n1: int, n2: int | None = None):
    """Tensor Gauss-Legendre nodes (P, 2) and weights (P,) on (0, a) x (0, b)."""
    n2 = n1 if n2 is None else n2
    t1, w1 = np.polynomial.legendre.leggauss(n1)
    t2, w2 = np.polynomial.legendre.leggauss(n2)
    x1 = 0.5 * cs.a * (t1 + 1.0)
    x2 = 0.5 * cs.b * (t2 + 1.0)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    W = np.outer(0.5 * cs.a * w1, 0.5 * cs.b * w2)
    return np.stack([X1.ravel(), X2.ravel()], axis=-1), W.ravel()


def project_trace(
    field_sampler: Callable[[np.ndarray], np.ndarray],
    cs: CrossSection,
    m_modes,
    n_modes,
    basis: str = "div",
    order: int | None = None,
) -> TraceCoefficients:
    """Project a tangential field onto the orthogonal modal basis by quadrature.

    ``field_sampler`` maps surface points (P, 2) to tangential vectors (P, 2)
    (a third component, if present, is ignored).
    """
    m_modes, n_modes = tuple(m_modes), tuple(n_modes)
    if order is None:
        top = max([p.index.order for p in m_modes + n_modes] + [1])
        order = 2 * top + 8
    pts, w = gauss_legendre_rect(cs, order)
    f = np.asarray(field_sampler(pts))[..., :2]
    alpha = np.empty(len(m_modes), complex)
    beta = np.empty(len(n_modes), complex)
    for i, pair in enumerate(m_modes):
        g = eval_scalar_gradient(cs, pair, pts)
        e = g if basis == "div" else surface_curl(g)
        alpha[i] = np.sum(w[:, None] * f * e) / pair.lambda_sq
    for i, pair in enumerate(n_modes):
        g = eval_scalar_gradient(cs, pair, pts)
        e = surface_curl(g) if basis == "div" else g
        beta[i] = np.sum(w[:, None] * f * e) / pair.lambda_sq
    return TraceCoefficients(m_modes, n_modes, alpha, beta, basis)
