"""Dyadic Green's functions of the PEC rectangular waveguide and of free space.

For ``curl curl G - k^2 G = delta I`` the waveguide dyadic, for x3 != y3, is::

    G(x, y) = sum_m c_m M_m^s(x) M_m^-s(y)^T + sum_n d_n N_n^s(x) N_n^-s(y)^T

with ``s = sign(x3 - y3)``, ``M^s`` / ``N^s`` the modes travelling in the
direction ``s``, and ``c_m = i / (2 h_m lambda_m^2)``,
``d_n = i / (2 g_n mu_n^2)``. The coefficients follow from the jump of the
1-D modal amplitude across the source plane. At x3 = y3 the series needs the
singular term ``-e3 e3 delta / k^2``, which only matters for box averages.

The same engine evaluates point values and averages over axis-aligned boxes
(zero widths give points). Averages of trigonometric factors are point
values times ``sinc`` weights, and the axial factor ``exp(i beta |x3-y3|)``
is averaged in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectra import (
    CrossSection,
    CutoffError,
    axial_constants,
    max_propagating_order,
    neumann_norm,
    dirichlet_norm,
)
from . import static

DEFAULT_FLOOR = 0.05


class SeparationError(ValueError):
    """Raised when a modal series is requested too close to the source plane."""


def default_order(cs: CrossSection, k: float) -> int:
    return max(7, max_propagating_order(cs, k) + 4)


# ---------------------------------------------------------------------------
# coefficient tables


def derive_modal_coefficients(cs: CrossSection, k: float, order: int):
    """Tables of (c_mn, d_mn) on the (order+1)^2 index grid.

    Entries outside a family (Neumann (0,0), Dirichlet with a zero index) are 0.
    """
    m = np.arange(order + 1)[:, None]
    n = np.arange(order + 1)[None, :]
    lam2 = np.pi**2 * ((m / cs.a) ** 2 + (n / cs.b) ** 2)
    lam2_safe = np.where(lam2 > 0, lam2, 1.0)
    beta = axial_constants(k, lam2_safe)
    c = 1j / (2.0 * beta * lam2_safe)
    d = c.copy()
    c = np.where((m == 0) & (n == 0), 0.0, c)
    d = np.where((m == 0) | (n == 0), 0.0, d)
    return c, d


@dataclass(frozen=True)
class AxisSamples:
    """Centres and widths along one axis; width 0 means a point sample."""

    centers: np.ndarray
    widths: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "centers", np.atleast_1d(np.asarray(self.centers, dtype=float)))
        object.__setattr__(self, "widths", np.atleast_1d(np.asarray(self.widths, dtype=float)))
        if self.centers.shape != self.widths.shape:
            raise ValueError("centers and widths must have the same length")
        if np.any(self.widths < 0):
            raise ValueError("widths must be non-negative")

    @classmethod
    def points(cls, x) -> "AxisSamples":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x, np.zeros_like(x))

    @classmethod
    def cells(cls, lo: float, hi: float, n: int) -> "AxisSamples":
        h = (hi - lo) / n
        return cls(lo + h * (np.arange(n) + 0.5), np.full(n, h))

    def __len__(self):
        return self.centers.size


@dataclass(frozen=True)
class TensorSet:
    """Tensor product of samples along x1, x2, x3 (points or boxes)."""

    x1: AxisSamples
    x2: AxisSamples
    x3: AxisSamples

    @property
    def shape(self):
        return len(self.x1), len(self.x2), len(self.x3)

    @property
    def size(self):
        return len(self.x1) * len(self.x2) * len(self.x3)

    def centers(self) -> np.ndarray:
        """Centres (N, 3), x1 fastest."""
        X3, X2, X1 = np.meshgrid(self.x3.centers, self.x2.centers, self.x1.centers, indexing="ij")
        return np.stack([X1.ravel(), X2.ravel(), X3.ravel()], axis=-1)

    @classmethod
    def single(cls, x) -> "TensorSet":
        x = np.asarray(x, dtype=float)
        return cls(AxisSamples.points(x[0]), AxisSamples.points(x[1]), AxisSamples.points(x[2]))


def _sinc(z):
    z = np.asarray(z)
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 - z * z / 6.0, np.sin(zs) / zs)


def _phi1(z):
    """(exp(z) - 1) / z, stable near 0."""
    small = np.abs(z) < 1e-8
    zs = np.where(small, 1.0, z)
    return np.where(small, 1.0 + z / 2.0, np.expm1(zs) / zs)


def _phi2(z):
    """(exp(z) - 1 - z) / z^2, stable near 0."""
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    series = 0.5 + z / 6.0 + z**2 / 24.0 + z**3 / 120.0 + z**4 / 720.0
    return np.where(small, series, (np.expm1(zs) - zs) / zs**2)


def axial_average(beta, co: float, wo: float, cs_: float, ws: float, tol: float = 1e-12):
    """Averages of exp(i beta |s-t|) and sign(s-t) exp(i beta |s-t|).

    ``s`` ranges over [co - wo/2, co + wo/2] and ``t`` over [cs - ws/2, cs + ws/2].
    The intervals must coincide or be disjoint (touching allowed).
    """
    beta = np.asarray(beta)
    if wo > 0 and abs(wo - ws) <= tol * wo and abs(co - cs_) <= tol * max(wo, 1.0):
        E = 2.0 * _phi2(1j * beta * wo)
        return E, np.zeros_like(E)
    lo_o, hi_o = co - wo / 2, co + wo / 2
    lo_s, hi_s = cs_ - ws / 2, cs_ + ws / 2
    scale = tol * max(wo, ws, 1.0)
    if lo_o >= hi_s - scale:
        sign, dz = 1.0, co - cs_
    elif hi_o <= lo_s + scale:
        sign, dz = -1.0, cs_ - co
    else:
        raise SeparationError("axial intervals overlap partially")
    gap = max(dz - 0.5 * (wo + ws), 0.0)
    E = np.exp(1j * beta * gap) * _phi1(1j * beta * wo) * _phi1(1j * beta * ws)
    return E, sign * E


@dataclass
class _Transverse:
    """Box-averaged cos/sin factors, shape (order+1, n)."""

    C: np.ndarray
    S: np.ndarray


def _transverse(axis: AxisSamples, wavenums: np.ndarray) -> _Transverse:
    arg = wavenums[:, None] * axis.centers[None, :]
    w = _sinc(0.5 * wavenums[:, None] * axis.widths[None, :])
    return _Transverse(np.cos(arg) * w, np.sin(arg) * w)


# which transverse factors each field component carries: (x1-factor, x2-factor)
_COMP_FACTORS = {0: ("C", "S"), 1: ("S", "C"), 2: ("S", "S")}


@dataclass
class GreensEvaluator:
    """Truncated modal representation of the waveguide dyadic.

    ``order`` is the highest Fourier index kept in each direction.
    """

    cs: CrossSection
    k: float
    order: int | None = None
    floor: float = DEFAULT_FLOOR
    _tables: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.order is None:
            self.order = default_order(self.cs, self.k)
        self._tables = self._build(self.order)

    def _build(self, order: int) -> dict:
        cs, k = self.cs, self.k
        p = np.pi * np.arange(order + 1) / cs.a
        q = np.pi * np.arange(order + 1) / cs.b
        lam2 = p[:, None] ** 2 + q[None, :] ** 2
        c, d = derive_modal_coefficients(cs, k, order)
        beta = axial_constants(k, np.where(lam2 > 0, lam2, 1.0))
        mi = np.arange(order + 1)
        nc2 = neumann_norm(mi[:, None], mi[None, :], cs.a, cs.b) ** 2
        nd2 = dirichlet_norm(cs.a, cs.b) ** 2
        return dict(p=p, q=q, lam2=lam2, c=c, d=d, beta=beta, nc2=nc2, nd2=nd2,
                    lam=np.sqrt(lam2))

    @property
    def truncation(self) -> tuple[int, int]:
        o = self.order
        return (o + 1) ** 2 - 1, o * o

    @property
    def coefficients(self):
        return self._tables["c"], self._tables["d"]

    # -- weights --------------------------------------------------------------

    def _weights(self, E, S, static_part: bool = False, tables=None):
        """Per-mode weights W[(a, b)] on the (m, n) grid for each component pair."""
        t = self._tables if tables is None else tables
        p, q = t["p"][:, None], t["q"][None, :]
        k2 = self.k**2
        g = t["beta"]
        lam2 = t["lam2"]
        lam2s = np.where(lam2 > 0, lam2, 1.0)
        nmask = t["d"] != 0
        W = {}
        if not static_part:
            cM = t["c"] * t["nc2"] * E
            W[(0, 0)] = cM * q * q
            W[(0, 1)] = -cM * p * q
            W[(1, 0)] = -cM * p * q
            W[(1, 1)] = cM * p * p
        if static_part:
            # k -> 0 limit of k^2 times the N-mode terms, evaluated with beta = i mu
            Es, Ss = E, S
            lam = np.where(nmask, t["lam"], 1.0)
            tt = np.where(nmask, -1.0 / (2.0 * lam), 0.0) * Es
            tz = np.where(nmask, -0.5, 0.0) * Ss
            zt = np.where(nmask, 0.5, 0.0) * Ss
            zz = np.where(nmask, 0.5 * lam, 0.0) * Es
        else:
            tt = np.where(nmask, 1j * g / (2 * lam2s), 0.0) * E
            tz = np.where(nmask, -0.5, 0.0) * S
            zt = np.where(nmask, 0.5, 0.0) * S
            zz = np.where(nmask, 1j * lam2 / (2 * g), 0.0) * E
        nd2 = t["nd2"] / k2
        tt, tz, zt, zz = tt * nd2, tz * nd2, zt * nd2, zz * nd2
        for key, val in (
            ((0, 0), tt * p * p),
            ((0, 1), tt * p * q),
            ((1, 0), tt * p * q),
            ((1, 1), tt * q * q),
            ((0, 2), tz * p * np.ones_like(q)),
            ((1, 2), tz * q * np.ones_like(p)),
            ((2, 0), zt * p * np.ones_like(q)),
            ((2, 1), zt * q * np.ones_like(p)),
            ((2, 2), zz),
        ):
            W[key] = W.get(key, 0) + val
        return W

    # -- engine ---------------------------------------------------------------

    def _contract(self, W, To1, To2, Ts1, Ts2):
        """G[a, b] blocks of shape (n1o, n1s, n2o, n2s)."""
        out = {}
        for (a, b), w in W.items():
            fo1, fo2 = _COMP_FACTORS[a]
            fs1, fs2 = _COMP_FACTORS[b]
            A1 = getattr(To1, fo1)
            B1 = getattr(Ts1, fs1)
            A2 = getattr(To2, fo2)
            B2 = getattr(Ts2, fs2)
            # T[i, j, n] = sum_m A1[m, i] B1[m, j] w[m, n]
            X = (A1[:, :, None] * B1[:, None, :]).reshape(A1.shape[0], -1)
            T = X.T @ w
            Y = (A2[:, :, None] * B2[:, None, :]).reshape(A2.shape[0], -1)
            G = T @ Y
            out[(a, b)] = G.reshape(A1.shape[1], B1.shape[1], A2.shape[1], B2.shape[1])
        return out

    def tensor_kernel(self, obs: TensorSet, src: TensorSet, check_floor: bool = True) -> np.ndarray:
        """Averaged dyadic between every obs and src sample.

        Returns (No, Ns, 3, 3), samples ordered x1-fastest.
        """
        t = self._tables
        To1, To2 = _transverse(obs.x1, t["p"]), _transverse(obs.x2, t["q"])
        Ts1, Ts2 = _transverse(src.x1, t["p"]), _transverse(src.x2, t["q"])
        n1o, n2o, n3o = obs.shape
        n1s, n2s, n3s = src.shape
        out = np.zeros((n3o, n2o, n1o, n3s, n2s, n1s, 3, 3), dtype=complex)
        for io in range(n3o):
            co, wo = obs.x3.centers[io], obs.x3.widths[io]
            for js in range(n3s):
                cs_, ws = src.x3.centers[js], src.x3.widths[js]
                if check_floor and wo == 0 and ws == 0:
                    self._check_sep(co - cs_)
                E, S = axial_average(t["beta"], co, wo, cs_, ws)
                blocks = self._contract(self._weights(E, S), To1, To2, Ts1, Ts2)
                for (a, b), G in blocks.items():
                    # G indexed (i1, j1, i2, j2) -> (i2, i1, j2, j1)
                    out[io, :, :, js, :, :, a, b] = G.transpose(2, 0, 3, 1)
        return out.reshape(n3o * n2o * n1o, n3s * n2s * n1s, 3, 3)

    def _check_sep(self, dz: float):
        if abs(dz) < self.floor * max(self.cs.a, self.cs.b):
            raise SeparationError(
                f"|x3 - y3| = {abs(dz):.3g} is below the separation floor "
                f"{self.floor * max(self.cs.a, self.cs.b):.3g}"
            )

    # -- point evaluation -----------------------------------------------------

    def dyadic(self, x, y) -> np.ndarray:
        """G_e(x, y) for single points (3,) -> (3, 3)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        self._check_sep(x[2] - y[2])
        return self.tensor_kernel(TensorSet.single(x), TensorSet.single(y))[0, 0]

    # -- near (box-box) kernel with static subtraction -----------------------

    def near_box_kernel(self, o1: AxisSamples, o2: AxisSamples, s1: AxisSamples, s2: AxisSamples,
                        co: float, cs_: float, width3: float, order: int, lattice: int = 2):
        """Box-box averaged dyadic for one pair of axial layers of equal width.

        The N-mode series has its k -> 0 part removed mode by mode and the
        removed part is added back in closed form from wall images, which
        also accounts for the singular ``-e3 e3 delta / k^2`` term.
        Returns (n1o, n1s, n2o, n2s, 3, 3).
        """
        tables = self._tables if order == self.order else self._build(order)
        To1, To2 = _transverse(o1, tables["p"]), _transverse(o2, tables["q"])
        Ts1, Ts2 = _transverse(s1, tables["p"]), _transverse(s2, tables["q"])
        E, S = axial_average(tables["beta"], co, width3, cs_, width3)
        E0, S0 = axial_average(1j * tables["lam"], co, width3, cs_, width3)
        W = self._weights(E, S, tables=tables)
        W0 = self._weights(E0, S0, static_part=True, tables=tables)
        for key, w0 in W0.items():
            W[key] = W[key] - w0
        blocks = self._contract(W, To1, To2, Ts1, Ts2)
        out = np.zeros((len(o1), len(s1), len(o2), len(s2), 3, 3), dtype=complex)
        for (a, b), G in blocks.items():
            out[..., a, b] = G
        widths = np.array([o1.widths[0], o2.widths[0], width3])
        st = static.static_box_kernel(self.cs, o1.centers, o2.centers, s1.centers, s2.centers,
                                      co - cs_, widths, lattice)
        return out + st / self.k**2


def incident_field(ev: GreensEvaluator, x, y, p) -> np.ndarray:
    """Field at x of a point dipole p at y: G_e(x, y) p."""
    p = np.asarray(p, dtype=float)
    if not np.any(p):
        raise ValueError("polarisation must be nonzero")
    return ev.dyadic(x, y) @ p


def eval_waveguide_dyadic(ev: GreensEvaluator, x, y) -> np.ndarray:
    return ev.dyadic(x, y)


# ---------------------------------------------------------------------------
# free space


def helmholtz_fundamental(k: float, x, y) -> complex:
    r = float(np.linalg.norm(np.asarray(x, float) - np.asarray(y, float)))
    if r == 0.0:
        raise ValueError("fundamental solution is singular at x = y")
    return np.exp(1j * k * r) / (4.0 * np.pi * r)


def eval_freespace_dyadic(k: float, x, y) -> np.ndarray:
    """Phi I + Hess(Phi) / k^2 with the closed-form Hessian."""
    d = np.asarray(x, float) - np.asarray(y, float)
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise ValueError("free-space dyadic is singular at x = y")
    rh = d / r
    phi = np.exp(1j * k * r) / (4.0 * np.pi * r)
    kr = k * r
    a = 1.0 + 1j / kr - 1.0 / kr**2
    b = -1.0 - 3j / kr + 3.0 / kr**2
    return phi * (a * np.eye(3) + b * np.outer(rh, rh))
