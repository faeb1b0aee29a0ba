"""Penetrable obstacle: union of dielectric spheres, rasterised to voxels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .greens import AxisSamples, TensorSet
from .spectra import CrossSection


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Sphere:
    center: tuple
    radius: float
    epsilon: complex

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "epsilon", complex(self.epsilon))
        if len(self.center) != 3:
            raise GeometryError("sphere centre must have 3 coordinates")
        if not self.radius > 0:
            raise GeometryError(f"sphere radius must be positive, got {self.radius}")
        if self.epsilon.imag < 0:
            raise GeometryError("Im(epsilon) must be >= 0 (passive medium)")
        if not self.epsilon.real > 0:
            raise GeometryError("Re(epsilon) must be positive")

    def lower(self) -> np.ndarray:
        return np.asarray(self.center) - self.radius

    def upper(self) -> np.ndarray:
        return np.asarray(self.center) + self.radius

    def contains(self, pts) -> np.ndarray:
        d = np.asarray(pts, dtype=float) - np.asarray(self.center)
        return np.einsum("...i,...i->...", d, d) < self.radius**2


@dataclass(frozen=True)
class Geometry:
    shapes: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))

    @property
    def empty(self) -> bool:
        return len(self.shapes) == 0

    def bounds(self):
        if self.empty:
            raise GeometryError("empty geometry has no bounds")
        lo = np.min([s.lower() for s in self.shapes], axis=0)
        hi = np.max([s.upper() for s in self.shapes], axis=0)
        return lo, hi

    def validate(self, cs: CrossSection, window=(-np.inf, np.inf), eps_bounds=(0.0, np.inf)):
        """Check that every sphere sits strictly inside the guide and window."""
        for i, s in enumerate(self.shapes):
            lo, hi = s.lower(), s.upper()
            if lo[0] <= 0 or lo[1] <= 0 or hi[0] >= cs.a or hi[1] >= cs.b:
                raise GeometryError(f"shape {i} touches or crosses the waveguide wall")
            if lo[2] <= window[0] or hi[2] >= window[1]:
                raise GeometryError(f"shape {i} leaves the axial window {tuple(window)}")
            if not eps_bounds[0] < s.epsilon.real < eps_bounds[1]:
                raise GeometryError(f"shape {i}: Re(epsilon) outside {tuple(eps_bounds)}")


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise GeometryError(f"degenerate box {self.lo} -> {self.hi}")

    def contains_box(self, lo, hi, tol=1e-12) -> bool:
        return all(self.lo[i] - tol <= lo[i] and hi[i] <= self.hi[i] + tol for i in range(3))


@dataclass(frozen=True)
class VoxelGrid:
    bbox: Box
    dims: tuple
    cell_eps: np.ndarray = field(repr=False)

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.bbox.hi) - np.asarray(self.bbox.lo)) / np.asarray(self.dims)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> TensorSet:
        lo, hi = self.bbox.lo, self.bbox.hi
        return TensorSet(*(AxisSamples.cells(lo[i], hi[i], self.dims[i]) for i in range(3)))

    @property
    def cell_centers(self) -> np.ndarray:
        return self.axes().centers()

    @property
    def support(self) -> np.ndarray:
        """Flat (x1-fastest) indices of cells with epsilon != 1."""
        return np.flatnonzero(self.cell_eps != 1.0)


def rasterize(g: Geometry, bbox: Box, dims) -> VoxelGrid:
    """Voxel permittivity by cell-centre membership; later shapes win."""
    dims = tuple(int(n) for n in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise GeometryError(f"dims must be three positive integers, got {dims}")
    for i, s in enumerate(g.shapes):
        if not bbox.contains_box(s.lower(), s.upper()):
            raise GeometryError(f"shape {i} is not contained in the voxel box")
    grid = VoxelGrid(bbox, dims, np.ones(int(np.prod(dims)), dtype=complex))
    centers = grid.cell_centers
    eps = grid.cell_eps
    for s in g.shapes:
        eps[s.contains(centers)] = s.epsilon
    return grid


def tight_box(g: Geometry, pad: float = 0.0) -> Box:
    lo, hi = g.bounds()
    return Box(tuple(lo - pad), tuple(hi + pad))


@dataclass(frozen=True)
class ContrastCell:
    center: np.ndarray
    volume: float
    contrast: complex


def contrast_cells(v: VoxelGrid) -> list[ContrastCell]:
    centers = v.cell_centers
    vol = v.cell_volume
    return [ContrastCell(centers[i], vol, complex(v.cell_eps[i] - 1.0)) for i in v.support]
