"""Linear sampling: near-field equation, regularised solvers, indicator scan."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .forward import NU0_CROSS, MultistaticData, TransducerArray
from .greens import AxisSamples, GreensEvaluator, TensorSet
from .spectra import CrossSection, Family, count_propagating

CHUNK = 64  # sampling points per work item; fixed so results ignore thread count


@dataclass(frozen=True)
class NearFieldMatrix:
    matrix: np.ndarray
    weights: np.ndarray
    k: float
    r: float
    eta: float = 0.0
    seed: int = 0
    tangential: bool = True

    @property
    def shape(self):
        return self.matrix.shape


def assemble(d: MultistaticData, array: TransducerArray) -> NearFieldMatrix:
    """Weight the source columns by the quadrature weights.

    Receiver components are rotated by ``e3 x`` unless the data already are
    tangential or the raw mode is requested.
    """
    P = array.size
    if d.entries.shape != (3 * P, 3 * P):
        raise ValueError(f"data shape {d.entries.shape} does not match an array of {P} points")
    if d.P != P:
        raise ValueError(f"data were recorded with P={d.P}, array has {P} points")
    M = d.entries
    if not d.tangential:
        M = np.kron(np.eye(P), NU0_CROSS) @ M
    w = np.repeat(array.weights, 3)
    return NearFieldMatrix(M * w[None, :], array.weights, d.k, d.r, d.eta, d.seed, True)


def raw_matrix(d: MultistaticData, array: TransducerArray) -> NearFieldMatrix:
    """Column-weighted data without tangential rotation (``tangential=raw``)."""
    w = np.repeat(array.weights, 3)
    return NearFieldMatrix(d.entries * w[None, :], array.weights, d.k, d.r, d.eta, d.seed, False)


def rhs_block(ev: GreensEvaluator, array: TransducerArray, z: TensorSet, tangential: bool = True) -> np.ndarray:
    """Right-hand sides for all sampling points and polarisations: (3P, Nz, 3)."""
    K = ev.tensor_kernel(array.tensor(), z)  # (P, Nz, 3, 3): G(x_i, z)
    if tangential:
        K = np.einsum("ab,pzbq->pzaq", NU0_CROSS, K)
    P, nz = K.shape[:2]
    return K.transpose(0, 2, 1, 3).reshape(3 * P, nz, 3)


def rhs(ev: GreensEvaluator, z, q, array: TransducerArray, tangential: bool = True) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if not np.any(q):
        raise ValueError("polarisation must be nonzero")
    return rhs_block(ev, array, TensorSet.single(z), tangential)[:, 0, :] @ q


# ---------------------------------------------------------------------------
# solvers


@dataclass(frozen=True)
class SVD:
    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray

    @classmethod
    def of(cls, m) -> "SVD":
        A = m.matrix if isinstance(m, NearFieldMatrix) else np.asarray(m)
        U, s, Vh = np.linalg.svd(A)
        return cls(U, s, Vh)

    def filtered(self, f: np.ndarray, b: np.ndarray) -> np.ndarray:
        """V diag(f) U^H b for a vector or a matrix of right-hand sides."""
        b = np.asarray(b)
        coef = self.U.conj().T @ b
        coef = f.reshape((-1,) + (1,) * (b.ndim - 1)) * coef
        return self.Vh.conj().T @ coef


def _matrix(m):
    return m.matrix if isinstance(m, NearFieldMatrix) else np.asarray(m)


def tsvd_filter(svd: SVD, rank: int):
    if not 1 <= rank <= svd.s.size:
        raise ValueError(f"rank must be in [1, {svd.s.size}], got {rank}")
    cutoff = svd.s[0] * max(svd.U.shape[0], svd.Vh.shape[0]) * np.finfo(float).eps
    eff = int(min(rank, np.count_nonzero(svd.s > cutoff)))
    f = np.zeros_like(svd.s)
    f[:eff] = 1.0 / svd.s[:eff]
    return f, eff


def tikhonov_filter(svd: SVD, alpha: float):
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return svd.s / (svd.s**2 + alpha**2)


def solve_tsvd(m, b, rank: int, svd: SVD | None = None):
    """Truncated SVD solution; returns (g, residual, effective rank)."""
    svd = svd or SVD.of(m)
    f, eff = tsvd_filter(svd, rank)
    g = svd.filtered(f, np.asarray(b))
    return g, float(np.linalg.norm(_matrix(m) @ g - b)), eff


def solve_tikhonov(m, b, alpha: float, svd: SVD | None = None):
    svd = svd or SVD.of(m)
    g = svd.filtered(tikhonov_filter(svd, alpha), np.asarray(b))
    return g, float(np.linalg.norm(_matrix(m) @ g - b))


@dataclass
class GLSMResult:
    g: np.ndarray
    trace: list
    iterations: int
    status: str


def glsm_objective(A, b, g, alpha, delta):
    """||A g - b||^2 + alpha^2 sqrt(|<A g, g>|^2 + delta^2), columnwise."""
    Ag = A @ g
    z = np.sum(np.conj(g) * Ag, axis=0)
    r = Ag - b
    return np.sum(np.abs(r) ** 2, axis=0).real + alpha**2 * np.sqrt(np.abs(z) ** 2 + delta**2)


def _glsm_grad(A, AH, b, g, alpha, delta):
    Ag = A @ g
    z = np.sum(np.conj(g) * Ag, axis=0)
    phi = np.sqrt(np.abs(z) ** 2 + delta**2)
    grad = 2.0 * (AH @ (Ag - b)) + alpha**2 * (np.conj(z) * Ag + z * (AH @ g)) / phi
    return grad


def solve_glsm_batch(m, B, alpha: float, delta=None, max_iters: int = 200, tol=None,
                     svd: SVD | None = None, armijo: float = 1e-4):
    """GLSM for several right-hand sides (columns of B) at once.

    Gradient descent on (Re g, Im g) with Barzilai-Borwein trial steps and
    Armijo backtracking, started from the Tikhonov solution. Returns
    (G, traces (iters+1, ncols), status per column).
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    A = _matrix(m)
    AH = A.conj().T
    B = np.asarray(B, dtype=complex)
    single = B.ndim == 1
    if single:
        B = B[:, None]
    bnorm2 = np.sum(np.abs(B) ** 2, axis=0)
    if delta is None:
        delta = 1e-8 * bnorm2
    delta = np.broadcast_to(np.asarray(delta, dtype=float), bnorm2.shape).copy()
    delta = np.where(delta > 0, delta, 1.0)  # only zero columns, which stay inactive
    svd = svd or SVD.of(A)
    G = svd.filtered(tikhonov_filter(svd, alpha), B)
    G = np.where(bnorm2[None, :] > 0, G, 0.0)
    if tol is None:
        tol = 1e-8 * np.maximum(np.sqrt(np.sum(np.abs(AH @ B) ** 2, axis=0)), 1e-300)
    tol = np.broadcast_to(np.asarray(tol, dtype=float), bnorm2.shape)
    f = glsm_objective(A, B, G, alpha, delta)
    grad = _glsm_grad(A, AH, B, G, alpha, delta)
    gnorm2 = np.sum(np.abs(grad) ** 2, axis=0)
    # first trial step from the quadratic model along the gradient
    Agr = A @ grad
    step = gnorm2 / np.maximum(2.0 * np.sum(np.abs(Agr) ** 2, axis=0) + alpha**2 * np.sqrt(gnorm2), 1e-300)
    active = (np.sqrt(gnorm2) > tol) & (bnorm2 > 0)
    status = np.where(active, "max_iters", "converged").astype(object)
    traces = [f.copy()]
    it = 0
    for it in range(1, max_iters + 1):
        if not active.any():
            it -= 1
            break
        idx = np.flatnonzero(active)
        t = step[idx].copy()
        g0, gr, f0, n2 = G[:, idx], grad[:, idx], f[idx], gnorm2[idx]
        accepted = np.zeros(idx.size, bool)
        Gnew = g0.copy()
        fnew = f0.copy()
        for _ in range(60):
            todo = ~accepted
            if not todo.any():
                break
            trial = g0[:, todo] - t[todo] * gr[:, todo]
            ft = glsm_objective(A, B[:, idx[todo]], trial, alpha, delta[idx[todo]])
            ok = ft <= f0[todo] - armijo * t[todo] * n2[todo]
            sub = np.flatnonzero(todo)
            Gnew[:, sub[ok]] = trial[:, ok]
            fnew[sub[ok]] = ft[ok]
            accepted[sub[ok]] = True
            t[sub[~ok]] *= 0.5
        stalled = ~accepted
        G[:, idx] = Gnew
        f[idx] = fnew
        newgrad = _glsm_grad(A, AH, B[:, idx], Gnew, alpha, delta[idx])
        # Barzilai-Borwein guess for the next step
        s_ = Gnew - g0
        y_ = newgrad - gr
        sy = np.real(np.sum(np.conj(s_) * y_, axis=0))
        ss = np.real(np.sum(np.conj(s_) * s_, axis=0))
        bb = np.where(sy > 0, ss / np.where(sy > 0, sy, 1.0), 2.0 * t)
        step[idx] = np.where(accepted, bb, t)
        grad[:, idx] = newgrad
        gnorm2[idx] = np.sum(np.abs(newgrad) ** 2, axis=0)
        done = np.sqrt(gnorm2[idx]) <= tol[idx]
        status[idx[done]] = "converged"
        status[idx[stalled & ~done]] = "stalled"
        active[idx[done | stalled]] = False
        traces.append(f.copy())
    traces = np.array(traces)
    if single:
        return G[:, 0], traces[:, 0], status[0]
    return G, traces, status


def solve_glsm(m, b, alpha: float, delta=None, max_iters: int = 200, tol=None) -> GLSMResult:
    g, trace, status = solve_glsm_batch(m, b, alpha, delta, max_iters, tol)
    return GLSMResult(g, list(np.asarray(trace, dtype=float)), len(trace) - 1, str(status))


# ---------------------------------------------------------------------------
# indicator


def indicator(norms) -> float:
    """psi = 1 / mean of the three solution norms; inf when all vanish."""
    norms = np.asarray(norms, dtype=float)
    mean = float(np.mean(norms))
    if mean == 0.0:
        return math.inf
    return 1.0 / mean


@dataclass(frozen=True)
class RegConfig:
    method: str = "tsvd"
    rank: int | None = None
    alpha: float | None = None
    delta: float | None = None
    max_iters: int = 200
    tol: float | None = None
    relative: bool = False  # alpha in units of the largest singular value

    def __post_init__(self):
        if self.method not in ("tsvd", "tikhonov", "glsm"):
            raise ValueError(f"unknown regularisation method {self.method!r}")
        if self.method == "tsvd" and self.rank is not None and self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.method in ("tikhonov", "glsm") and not (self.alpha is not None and self.alpha > 0):
            raise ValueError("alpha must be positive")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")


def default_rank(cs: CrossSection, k: float, extra: int = 13) -> int:
    return count_propagating(cs, k, Family.NEUMANN) + extra


@dataclass(frozen=True)
class SamplingGrid:
    lo: tuple
    hi: tuple
    dims: tuple
    buffer: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        object.__setattr__(self, "dims", tuple(int(v) for v in self.dims))
        if len(self.dims) != 3 or min(self.dims) < 1:
            raise ValueError("sampling dims must be three positive integers")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise ValueError("sampling box has hi < lo")

    def validate(self, cs: CrossSection, r: float, floor: float = 0.0):
        b = self.buffer
        if self.lo[0] < b or self.lo[1] < b or self.hi[0] > cs.a - b or self.hi[1] > cs.b - b:
            raise ValueError(f"sampling grid must stay {b} away from the waveguide wall")
        if self.lo[2] - r <= max(b, floor):
            raise ValueError("sampling grid is too close to the transducer plane")

    def axis(self, i) -> np.ndarray:
        n = self.dims[i]
        if n == 1:
            return np.array([0.5 * (self.lo[i] + self.hi[i])])
        return np.linspace(self.lo[i], self.hi[i], n)

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(h - l) / max(n - 1, 1) for l, h, n in zip(self.lo, self.hi, self.dims)])

    def tensor(self) -> TensorSet:
        return TensorSet(*(AxisSamples.points(self.axis(i)) for i in range(3)))

    @property
    def points(self) -> np.ndarray:
        return self.tensor().centers()


@dataclass
class IndicatorField:
    grid: SamplingGrid
    psi: np.ndarray
    valid: np.ndarray
    norms: np.ndarray
    reg: dict = field(default_factory=dict)

    @property
    def points(self):
        return self.grid.points


def _solve_chunk(m, svd, reg: RegConfig, rank, Bc):
    """Solution norms (n, 3) for right-hand sides Bc (3P, n, 3)."""
    nz = Bc.shape[1]
    flat = Bc.reshape(Bc.shape[0], -1)
    if reg.method == "tsvd":
        f, _ = tsvd_filter(svd, rank)
        G = svd.filtered(f, flat)
    elif reg.method == "tikhonov":
        G = svd.filtered(tikhonov_filter(svd, reg.alpha), flat)
    else:
        G, _, _ = solve_glsm_batch(m, flat, reg.alpha, reg.delta, reg.max_iters, reg.tol, svd=svd)
    return np.linalg.norm(G, axis=0).reshape(nz, 3)


def scan(m: NearFieldMatrix, ev: GreensEvaluator, grid: SamplingGrid, reg: RegConfig,
         array: TransducerArray, threads: int = 1) -> IndicatorField:
    """Indicator psi(z) over the sampling grid for the three unit polarisations."""
    svd = SVD.of(m)
    if not svd.s[0] > 0:
        nz = grid.tensor().size
        rec = {k: v for k, v in asdict(reg).items() if v is not None}
        return IndicatorField(grid, np.full(nz, np.inf), np.zeros(nz, bool), np.zeros((nz, 3)), rec)
    if reg.relative and reg.alpha is not None:
        reg = replace(reg, alpha=reg.alpha * float(svd.s[0]), relative=False)
    rank = reg.rank if reg.rank is not None else default_rank(ev.cs, ev.k)
    rank = min(rank, svd.s.size)
    B = rhs_block(ev, array, grid.tensor(), m.tangential)
    nz = B.shape[1]
    chunks = [slice(i, min(i + CHUNK, nz)) for i in range(0, nz, CHUNK)]
    work = lambda sl: _solve_chunk(m, svd, reg, rank, B[:, sl])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(sl) for sl in chunks]
    norms = np.concatenate(parts, axis=0) if parts else np.zeros((0, 3))
    mean = norms.mean(axis=1)
    valid = np.isfinite(mean) & (mean > 0)
    with np.errstate(divide="ignore"):
        psi = np.where(valid, 1.0 / np.where(valid, mean, 1.0), np.inf)
    rec = {k: v for k, v in asdict(reg).items() if v is not None}
    if reg.method == "tsvd":
        rec["rank"] = int(rank)
    return IndicatorField(grid, psi, valid, norms, rec)


def iso_level(fld: IndicatorField, C: float) -> float:
    if not 0.0 < C < 1.0:
        raise ValueError("C must lie in (0, 1)")
    vals = fld.psi[fld.valid]
    if vals.size == 0:
        raise ValueError("indicator field has no valid values")
    lo, hi = float(vals.min()), float(vals.max())
    return C * (hi - lo) + lo


# ---------------------------------------------------------------------------
# output


def write_indicator_csv(path, fld: IndicatorField) -> None:
    pts = fld.points
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("z1,z2,z3,psi,valid\n")
        for p, v, ok in zip(pts, fld.psi, fld.valid):
            fh.write(f"{p[0]!r},{p[1]!r},{p[2]!r},{float(v)!r},{int(bool(ok))}\n")


def sidecar(fld: IndicatorField, levels, extra=None) -> dict:
    iso = {}
    for C in levels:
        try:
            iso[repr(float(C))] = iso_level(fld, C)
        except ValueError:
            iso[repr(float(C))] = None
    out = {
        "dims": list(fld.grid.dims),
        "lo": list(fld.grid.lo),
        "hi": list(fld.grid.hi),
        "reg": fld.reg,
        "iso_levels": iso,
        "n_valid": int(fld.valid.sum()),
    }
    if extra:
        out.update(extra)
    return out


def write_sidecar(path, fld: IndicatorField, levels, extra=None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(sidecar(fld, levels, extra), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_vtk(path, fld: IndicatorField) -> None:
    g = fld.grid
    sp = g.spacing
    vals = np.where(fld.valid, fld.psi, 0.0)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# vtk DataFile Version 3.0\nindicator\nASCII\nDATASET STRUCTURED_POINTS\n")
        fh.write(f"DIMENSIONS {g.dims[0]} {g.dims[1]} {g.dims[2]}\n")
        fh.write(f"ORIGIN {g.axis(0)[0]!r} {g.axis(1)[0]!r} {g.axis(2)[0]!r}\n")
        fh.write(f"SPACING {sp[0]!r} {sp[1]!r} {sp[2]!r}\n")
        fh.write(f"POINT_DATA {vals.size}\nSCALARS psi double 1\nLOOKUP_TABLE default\n")
        for v in vals:
            fh.write(f"{float(v)!r}\n")
