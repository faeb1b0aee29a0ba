"""Synthetic multistatic data from a volume integral (Lippmann-Schwinger) solver.

The total field ``w`` inside the scatterer solves

    w(x) = w_inc(x) + k^2 int_D (eps(y) - 1) G_e(x, y) w(y) dy.

It is discretised with piecewise-constant voxels and Galerkin cell averages:
``Gbar[i, j]`` is the mean of ``G_e`` over cell i times cell j. The averaged
kernel is symmetric, so the discrete scattered field obeys reciprocity
exactly. Transducer fields are the point-to-cell averages of the same kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from .greens import AxisSamples, GreensEvaluator, SeparationError, TensorSet
from .scatterer import VoxelGrid
from .spectra import CrossSection

# e3 x u = (-u2, u1, 0), applied per receiver
NU0_CROSS = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class TransducerArray:
    """Tensor Gauss-Legendre points on the plane x3 = r (x1 fastest)."""

    cs: CrossSection
    r: float
    nodes1: np.ndarray
    nodes2: np.ndarray
    weights1: np.ndarray
    weights2: np.ndarray

    @property
    def size(self) -> int:
        return self.nodes1.size * self.nodes2.size

    @property
    def points(self) -> np.ndarray:
        return self.tensor().centers()

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.weights2, self.weights1).ravel()

    def tensor(self) -> TensorSet:
        return TensorSet(AxisSamples.points(self.nodes1), AxisSamples.points(self.nodes2),
                         AxisSamples.points([self.r]))


def make_array(cs: CrossSection, r: float, n_per_side: int) -> TransducerArray:
    if n_per_side < 1:
        raise ValueError("n_per_side must be >= 1")
    t, w = np.polynomial.legendre.leggauss(n_per_side)
    return TransducerArray(
        cs, float(r),
        0.5 * cs.a * (t + 1.0), 0.5 * cs.b * (t + 1.0),
        0.5 * cs.a * w, 0.5 * cs.b * w,
    )


def _check_clear(ev: GreensEvaluator, v: VoxelGrid, x3) -> None:
    floor = ev.floor * max(ev.cs.a, ev.cs.b)
    lo, hi = v.bbox.lo[2], v.bbox.hi[2]
    for z in np.atleast_1d(x3):
        gap = max(lo - z, z - hi)
        if gap < floor:
            raise SeparationError(
                f"plane x3={z:.6g} is within {floor:.3g} of the scatterer box [{lo:.6g}, {hi:.6g}]"
            )


def default_near_order(ev: GreensEvaluator, v: VoxelGrid) -> int:
    """Fourier order for the cell-cell kernel: about 1.5 modes per cell width."""
    return max(ev.order, int(math.ceil(1.5 / float(np.min(v.spacing[:2])))))


def cell_kernel(ev: GreensEvaluator, v: VoxelGrid, near_order: int | None = None,
                lattice: int = 2) -> np.ndarray:
    """Galerkin averages Gbar (Nc, 3, Nc, 3) over the support cells."""
    order = default_near_order(ev, v) if near_order is None else near_order
    axes = v.axes()
    n1, n2, n3 = v.dims
    sup = v.support
    i1, i2, i3 = sup % n1, (sup // n1) % n2, sup // (n1 * n2)
    nc = sup.size
    out = np.zeros((nc, 3, nc, 3), dtype=complex)
    layers = [np.flatnonzero(i3 == l) for l in range(n3)]
    c3, w3 = axes.x3.centers, float(axes.x3.widths[0])
    for delta in range(n3):
        pairs = [(l + delta, l) for l in range(n3 - delta) if layers[l + delta].size and layers[l].size]
        if not pairs:
            continue
        K = ev.near_box_kernel(axes.x1, axes.x2, axes.x1, axes.x2, c3[delta], c3[0], w3, order, lattice)
        for lo_, ls in pairs:
            ro, rs = layers[lo_], layers[ls]
            blk = K[i1[ro][:, None], i1[rs][None, :], i2[ro][:, None], i2[rs][None, :]]
            out[np.ix_(ro, range(3), rs, range(3))] = blk.transpose(0, 2, 1, 3)
            if delta:
                out[np.ix_(rs, range(3), ro, range(3))] = blk.transpose(1, 3, 0, 2)
    return out


def point_cell_kernel(ev: GreensEvaluator, v: VoxelGrid, obs: TensorSet) -> np.ndarray:
    """Cell-averaged G_e(x, .) for points x in ``obs``: (P, Nc, 3, 3)."""
    _check_clear(ev, v, obs.x3.centers)
    K = ev.tensor_kernel(obs, v.axes(), check_floor=False)
    return K[:, v.support]


@dataclass
class LSSystem:
    """Discrete Lippmann-Schwinger operator ``I - k^2 Gbar diag(chi vol)``."""

    grid: VoxelGrid
    k: float
    gbar: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    matrix: np.ndarray = field(repr=False)
    _lu: tuple = field(default=None, repr=False)

    @property
    def n_cells(self) -> int:
        return self.chi.size

    @property
    def weights(self) -> np.ndarray:
        """Per-unknown chi * volume, (3 Nc,)."""
        return np.repeat(self.chi * self.grid.cell_volume, 3)

    def factor(self):
        if self._lu is None:
            with np.errstate(all="ignore"):
                self._lu = scipy.linalg.lu_factor(self.matrix, check_finite=True)
            piv = np.abs(np.diag(self._lu[0]))
            if piv.size and piv.min() <= 1e-14 * piv.max():
                raise SolverError(f"Lippmann-Schwinger matrix is singular (pivot ratio {piv.min() / piv.max():.2e})")
        return self._lu

    def solve(self, rhs: np.ndarray):
        """Solve for one or several right-hand sides (3 Nc,) or (3 Nc, m)."""
        w = scipy.linalg.lu_solve(self.factor(), rhs)
        res = np.linalg.norm(self.matrix @ w - rhs) / max(np.linalg.norm(rhs), 1e-300)
        return w, float(res)

    def condition_estimate(self) -> float:
        return float(np.linalg.cond(self.matrix))


def assemble_ls_system(ev: GreensEvaluator, v: VoxelGrid, near_order: int | None = None) -> LSSystem:
    chi = v.cell_eps[v.support] - 1.0
    g = cell_kernel(ev, v, near_order)
    n = 3 * chi.size
    G = g.reshape(n, n)
    A = np.eye(n, dtype=complex) - ev.k**2 * G * np.repeat(chi * v.cell_volume, 3)[None, :]
    return LSSystem(v, ev.k, G, chi, A)


@dataclass
class LSSolution:
    system: LSSystem
    total: np.ndarray  # (Nc, 3)
    incident: np.ndarray  # (Nc, 3)
    residual: float


def _as_cell_field(v: VoxelGrid, incident) -> np.ndarray:
    if callable(incident):
        vals = np.asarray(incident(v.cell_centers[v.support]), dtype=complex)
    else:
        vals = np.asarray(incident, dtype=complex)
    vals = vals.reshape(v.support.size, 3)
    if not np.all(np.isfinite(vals)):
        raise SolverError("incident field is not finite on the support cells")
    return vals


def solve_lippmann_schwinger(ev: GreensEvaluator, v: VoxelGrid | LSSystem, incident) -> LSSolution:
    """Total field on the support cells.

    ``incident`` is either an array (Nc, 3) of cell values or a callable
    mapping cell centres (Nc, 3) to field values.
    """
    system = v if isinstance(v, LSSystem) else assemble_ls_system(ev, v)
    grid = system.grid
    if grid.support.size == 0:
        raise SolverError("the scatterer has no support cells")
    wi = _as_cell_field(grid, incident)
    w, res = system.solve(wi.ravel())
    return LSSolution(system, w.reshape(-1, 3), wi, res)


def point_source_incident(ev: GreensEvaluator, v: VoxelGrid, y, p) -> np.ndarray:
    """Cell averages of G_e(., y) p on the support cells: (Nc, 3)."""
    p = np.asarray(p, dtype=float)
    if not np.any(p):
        raise ValueError("polarisation must be nonzero")
    K = point_cell_kernel(ev, v, TensorSet.single(y))[0]  # averages of G(y, x)
    return np.einsum("cst,s->ct", K, p)


def _radiate(ev: GreensEvaluator, grid: VoxelGrid, field_cells: np.ndarray, x_out) -> np.ndarray:
    x_out = np.asarray(x_out, dtype=float)
    K = point_cell_kernel(ev, grid, TensorSet.single(x_out))[0]
    chi = grid.cell_eps[grid.support] - 1.0
    return ev.k**2 * grid.cell_volume * np.einsum("cab,c,cb->a", K, chi, field_cells)


def born_scatter(ev: GreensEvaluator, v: VoxelGrid, incident, x_out) -> np.ndarray:
    """Single-scattering field at ``x_out``."""
    if v.support.size == 0:
        return np.zeros(3, dtype=complex)
    return _radiate(ev, v, _as_cell_field(v, incident), x_out)


def scattered_at(ev: GreensEvaluator, sol: LSSolution, x_out) -> np.ndarray:
    return _radiate(ev, sol.system.grid, sol.total, x_out)


# ---------------------------------------------------------------------------
# multistatic data


@dataclass(frozen=True)
class MultistaticData:
    """Entry ((i, q), (j, s)) is component q of the received field at x_i
    due to a unit dipole e_s at y_j (after e3 x when ``tangential``)."""

    entries: np.ndarray
    k: float
    r: float
    P: int
    eta: float = 0.0
    seed: int = 0
    tangential: bool = True

    def __post_init__(self):
        if self.entries.shape != (3 * self.P, 3 * self.P):
            raise ValueError(f"entries must be {(3 * self.P,) * 2}, got {self.entries.shape}")


def transfer_matrices(ev: GreensEvaluator, v: VoxelGrid, array: TransducerArray):
    """B (3P, 3Nc): cell averages mapping cell dipoles to receiver fields."""
    K = point_cell_kernel(ev, v, array.tensor())  # (P, Nc, 3, 3)
    P, nc = K.shape[:2]
    return K.transpose(0, 2, 1, 3).reshape(3 * P, 3 * nc)


def synthesize_near_field(ev: GreensEvaluator, v: VoxelGrid, array: TransducerArray,
                          born: bool = False, tangential: bool = True,
                          near_order: int | None = None, system: LSSystem | None = None,
                          ) -> MultistaticData:
    """Scattered field for every (source point, polarisation), at every receiver."""
    P = array.size
    _check_clear(ev, v, [array.r])
    if v.support.size == 0:
        U = np.zeros((3 * P, 3 * P), dtype=complex)
    else:
        B = transfer_matrices(ev, v, array)
        winc = B.T  # incident cell averages, one column per (j, s)
        if born:
            W = winc
        else:
            system = system or assemble_ls_system(ev, v, near_order)
            W, res = system.solve(winc)
            if not np.isfinite(res) or res > 1e-6:
                raise SolverError(f"Lippmann-Schwinger residual too large: {res:.2e}")
        chi = v.cell_eps[v.support] - 1.0
        U = ev.k**2 * B @ (np.repeat(chi * v.cell_volume, 3)[:, None] * W)
    if tangential:
        U = np.kron(np.eye(P), NU0_CROSS) @ U
    return MultistaticData(U, ev.k, array.r, P, tangential=tangential)


def add_noise(d: MultistaticData, eta: float, seed: int) -> MultistaticData:
    """Multiplicative noise N_ij (1 + eta xi_ij) with xi ~ U(-1, 1).

    The generator is Philox (counter-based, 64-bit) keyed by ``seed``.
    """
    if eta < 0:
        raise ValueError("eta must be non-negative")
    rng = np.random.Generator(np.random.Philox(int(seed)))
    xi = rng.uniform(-1.0, 1.0, size=d.entries.shape)
    noisy = d.entries * (1.0 + eta * xi) if eta > 0 else d.entries.copy()
    return replace(d, entries=noisy, eta=float(eta), seed=int(seed))


# ---------------------------------------------------------------------------
# NFM v1 text format


class FormatError(ValueError):
    pass


def _fmt(x: float) -> str:
    return repr(float(x))


def format_nfm(d: MultistaticData) -> str:
    R, C = d.entries.shape
    head = (f"NFM v1 rows={R} cols={C} k={_fmt(d.k)} r={_fmt(d.r)} P={d.P} "
            f"eta={_fmt(d.eta)} seed={d.seed}")
    lines = [head]
    for row in d.entries:
        lines.append(";".join(f"{_fmt(z.real)} {_fmt(z.imag)}" for z in row))
    return "\n".join(lines) + "\n"


def write_nfm(path, d: MultistaticData) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_nfm(d))


def parse_nfm(text: str, tangential: bool = True) -> MultistaticData:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("line 1: empty file")
    head = lines[0].split(" ")
    if head[:2] != ["NFM", "v1"]:
        raise FormatError("line 1: missing 'NFM v1' header")
    meta = {}
    for tok in head[2:]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise FormatError(f"line 1: malformed header field {tok!r}")
        meta[key] = val
    need = ("rows", "cols", "k", "r", "P", "eta", "seed")
    missing = [n for n in need if n not in meta]
    if missing:
        raise FormatError(f"line 1: missing header fields {missing}")
    try:
        R, C, P = int(meta["rows"]), int(meta["cols"]), int(meta["P"])
        k, r, eta = float(meta["k"]), float(meta["r"]), float(meta["eta"])
        seed = int(meta["seed"])
    except ValueError as exc:
        raise FormatError(f"line 1: {exc}") from None
    if len(lines) - 1 != R:
        raise FormatError(f"line {len(lines) + 1}: expected {R} data rows, found {len(lines) - 1}")
    out = np.empty((R, C), dtype=complex)
    for i, line in enumerate(lines[1:]):
        cells = line.split(";")
        if len(cells) != C:
            raise FormatError(f"line {i + 2}: expected {C} entries, found {len(cells)}")
        for j, cell in enumerate(cells):
            parts = cell.split(" ")
            if len(parts) != 2:
                raise FormatError(f"line {i + 2}, column {j + 1}: expected '<re> <im>'")
            try:
                out[i, j] = complex(float(parts[0]), float(parts[1]))
            except ValueError:
                raise FormatError(f"line {i + 2}, column {j + 1}: bad number {cell!r}") from None
    try:
        return MultistaticData(out, k, r, P, eta, seed, tangential)
    except ValueError as exc:
        raise FormatError(f"line 1: {exc}") from None


def read_nfm(path, tangential: bool = True) -> MultistaticData:
    with open(path, encoding="utf-8") as fh:
        return parse_nfm(fh.read(), tangential)
