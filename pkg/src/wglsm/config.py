"""Run configuration: an INI file read with :mod:`configparser`.

Sections and keys (lengths in units of the waveguide width)::

    [waveguide]   a, b, k, order (optional), floor
    [array]       r, n_per_side
    [scatterer]   voxel_dims, bbox = auto | x0 y0 z0 x1 y1 z1, pad, window, eps_min, eps_max
    [sphere.NAME] center, radius, epsilon        (one section per sphere, file order)
    [noise]       eta, seed
    [inversion]   method = tsvd|tikhonov|glsm, rank, rank_extra, alpha, relative_alpha,
                  delta, max_iters, tol, tangential = nu0|raw
    [sampling]    lo, hi, dims, buffer
    [output]      nfm, indicator, sidecar, vtk, iso_levels

Vectors are whitespace-separated numbers; complex numbers use Python syntax
(``4+0.5j``).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .greens import DEFAULT_FLOOR, GreensEvaluator
from .lsm import RegConfig, SamplingGrid
from .scatterer import Box, Geometry, GeometryError, Sphere, tight_box
from .spectra import CrossSection, CutoffError, Family, count_propagating


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


@dataclass(frozen=True)
class WaveguideConfig:
    a: float = 1.0
    b: float = 1.0
    k: float = 12.0
    order: int | None = None
    floor: float = DEFAULT_FLOOR


@dataclass(frozen=True)
class ArrayConfig:
    r: float = -3.0
    n_per_side: int = 6


@dataclass(frozen=True)
class ScattererConfig:
    spheres: tuple = ()
    voxel_dims: tuple = (12, 12, 12)
    bbox: tuple | None = None
    pad: float = 0.005
    window: tuple = (-1.0, 1.0)
    eps_bounds: tuple = (0.0, 100.0)
    names: tuple = ()  # section name of each sphere, for error messages


@dataclass(frozen=True)
class NoiseConfig:
    eta: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class InversionConfig:
    method: str = "tsvd"
    rank: int | None = None
    rank_extra: int = 13
    alpha: float | None = None
    relative_alpha: bool = False
    delta: float | None = None
    max_iters: int = 200
    tol: float | None = None
    tangential: str = "nu0"


@dataclass(frozen=True)
class SamplingConfig:
    lo: tuple = (0.1, 0.1, -0.5)
    hi: tuple = (0.9, 0.9, 0.5)
    dims: tuple = (12, 12, 12)
    buffer: float = 0.05


@dataclass(frozen=True)
class OutputConfig:
    nfm: str = "data.nfm"
    indicator: str = "indicator.csv"
    sidecar: str = "indicator.json"
    vtk: str | None = None
    iso_levels: tuple = (0.3,)


@dataclass(frozen=True)
class RunConfig:
    waveguide: WaveguideConfig = field(default_factory=WaveguideConfig)
    array: ArrayConfig = field(default_factory=ArrayConfig)
    scatterer: ScattererConfig = field(default_factory=ScattererConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    inversion: InversionConfig = field(default_factory=InversionConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # -- derived objects ------------------------------------------------------

    @property
    def cross_section(self) -> CrossSection:
        return CrossSection(self.waveguide.a, self.waveguide.b)

    def evaluator(self) -> GreensEvaluator:
        w = self.waveguide
        return GreensEvaluator(self.cross_section, w.k, w.order, w.floor)

    def geometry(self) -> Geometry:
        return Geometry(self.scatterer.spheres)

    def voxel_box(self) -> Box | None:
        s = self.scatterer
        if s.bbox is not None:
            return Box(s.bbox[:3], s.bbox[3:])
        g = self.geometry()
        return None if g.empty else tight_box(g, s.pad)

    def grid(self) -> SamplingGrid:
        s = self.sampling
        return SamplingGrid(s.lo, s.hi, s.dims, s.buffer)

    def reg(self) -> RegConfig:
        inv = self.inversion
        rank = inv.rank
        if inv.method == "tsvd" and rank is None:
            rank = count_propagating(self.cross_section, self.waveguide.k, Family.NEUMANN) + inv.rank_extra
        return RegConfig(inv.method, rank, inv.alpha, inv.delta, inv.max_iters, inv.tol, inv.relative_alpha)

    def validate(self) -> "RunConfig":
        w = self.waveguide
        try:
            cs = self.cross_section
        except ValueError as exc:
            raise ConfigError(f"[waveguide] a/b: {exc}") from None
        if not w.k > 0:
            raise ConfigError("[waveguide] k: must be positive")
        try:
            for fam in Family:
                count_propagating(cs, w.k, fam)
        except CutoffError as exc:
            raise ConfigError(f"[waveguide] k: {exc}") from None
        if w.order is not None and w.order < 1:
            raise ConfigError("[waveguide] order: must be >= 1")
        if not w.floor > 0:
            raise ConfigError("[waveguide] floor: must be positive")
        if self.array.n_per_side < 1:
            raise ConfigError("[array] n_per_side: must be >= 1")
        sc = self.scatterer
        if len(sc.voxel_dims) != 3 or min(sc.voxel_dims) < 1:
            raise ConfigError("[scatterer] voxel_dims: need three positive integers")
        for i, sph in enumerate(sc.spheres):
            where = f"[{sc.names[i]}]" if i < len(sc.names) else f"[scatterer] sphere {i}"
            try:
                Geometry((sph,)).validate(cs, sc.window, sc.eps_bounds)
            except GeometryError as exc:
                raise ConfigError(f"{where} {str(exc).removeprefix('shape 0').lstrip(': ')}") from None
        try:
            box = self.voxel_box()
        except GeometryError as exc:
            raise ConfigError(f"[scatterer] {exc}") from None
        floor = w.floor * max(w.a, w.b)
        if box is not None:
            if box.lo[2] - self.array.r < floor:
                raise ConfigError("[array] r: the transducer plane must lie below the scatterer box")
            for i, s in enumerate(sc.spheres):
                if not box.contains_box(s.lower(), s.upper()):
                    raise ConfigError(f"[scatterer] bbox: does not contain sphere {i}")
        if self.noise.eta < 0:
            raise ConfigError("[noise] eta: must be non-negative")
        if not 0 <= self.noise.seed < 2**64:
            raise ConfigError("[noise] seed: must be an unsigned 64-bit integer")
        inv = self.inversion
        if inv.method not in ("tsvd", "tikhonov", "glsm"):
            raise ConfigError(f"[inversion] method: unknown method {inv.method!r}")
        if inv.tangential not in ("nu0", "raw"):
            raise ConfigError("[inversion] tangential: must be 'nu0' or 'raw'")
        try:
            reg = self.reg()
        except ValueError as exc:
            raise ConfigError(f"[inversion] {exc}") from None
        if reg.method == "tsvd" and reg.rank > 3 * self.array.n_per_side**2:
            raise ConfigError(f"[inversion] rank: {reg.rank} exceeds 3P = {3 * self.array.n_per_side**2}")
        try:
            self.grid().validate(cs, self.array.r, floor)
        except ValueError as exc:
            raise ConfigError(f"[sampling] {exc}") from None
        for C in self.output.iso_levels:
            if not 0 < C < 1:
                raise ConfigError("[output] iso_levels: every C must lie in (0, 1)")
        return self


# ---------------------------------------------------------------------------
# parsing


def _vec(path, text, n=None, kind=float):
    try:
        vals = tuple(kind(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{path}: cannot parse {text!r}") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{path}: expected {n} values, got {len(vals)}")
    return vals


def _get(sec, key, path, kind, default):
    if key not in sec:
        return default
    raw = sec[key].strip()
    if kind is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{path}: expected a boolean, got {raw!r}")
    if raw.lower() in ("", "none", "auto") and default is None:
        return None
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{path}: cannot parse {raw!r} as {kind.__name__}") from None


_KNOWN = {
    "waveguide": {"a", "b", "k", "order", "floor"},
    "array": {"r", "n_per_side"},
    "scatterer": {"voxel_dims", "bbox", "pad", "window", "eps_min", "eps_max"},
    "noise": {"eta", "seed"},
    "inversion": {"method", "rank", "rank_extra", "alpha", "relative_alpha", "delta",
                  "max_iters", "tol", "tangential"},
    "sampling": {"lo", "hi", "dims", "buffer"},
    "output": {"nfm", "indicator", "sidecar", "vtk", "iso_levels"},
}
_SPHERE_KEYS = {"center", "radius", "epsilon"}


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config: {exc}") from None
    for name in cp.sections():
        keys = _KNOWN.get(name, _SPHERE_KEYS if name.startswith("sphere.") else None)
        if keys is None:
            raise ConfigError(f"[{name}]: unknown section")
        for key in cp[name]:
            if key not in keys:
                raise ConfigError(f"[{name}] {key}: unknown key")
    sec = lambda n: cp[n] if cp.has_section(n) else {}

    s = sec("waveguide")
    d = WaveguideConfig()
    wg = WaveguideConfig(
        _get(s, "a", "[waveguide] a", float, d.a),
        _get(s, "b", "[waveguide] b", float, d.b),
        _get(s, "k", "[waveguide] k", float, d.k),
        _get(s, "order", "[waveguide] order", int, None),
        _get(s, "floor", "[waveguide] floor", float, d.floor),
    )
    s = sec("array")
    d = ArrayConfig()
    arr = ArrayConfig(_get(s, "r", "[array] r", float, d.r),
                      _get(s, "n_per_side", "[array] n_per_side", int, d.n_per_side))

    spheres, names = [], []
    for name in cp.sections():
        if not name.startswith("sphere."):
            continue
        s = cp[name]
        for key in _SPHERE_KEYS:
            if key not in s:
                raise ConfigError(f"[{name}] {key}: missing")
        try:
            eps = complex(s["epsilon"].replace(" ", ""))
        except ValueError:
            raise ConfigError(f"[{name}] epsilon: cannot parse {s['epsilon']!r}") from None
        try:
            spheres.append(Sphere(_vec(f"[{name}] center", s["center"], 3),
                                  _get(s, "radius", f"[{name}] radius", float, None), eps))
        except GeometryError as exc:
            raise ConfigError(f"[{name}] {exc}") from None
        names.append(name)
    s = sec("scatterer")
    d = ScattererConfig()
    bbox = None
    if "bbox" in s and s["bbox"].strip().lower() != "auto":
        bbox = _vec("[scatterer] bbox", s["bbox"], 6)
    sc = ScattererConfig(
        tuple(spheres),
        _vec("[scatterer] voxel_dims", s["voxel_dims"], 3, int) if "voxel_dims" in s else d.voxel_dims,
        bbox,
        _get(s, "pad", "[scatterer] pad", float, d.pad),
        _vec("[scatterer] window", s["window"], 2) if "window" in s else d.window,
        (_get(s, "eps_min", "[scatterer] eps_min", float, d.eps_bounds[0]),
         _get(s, "eps_max", "[scatterer] eps_max", float, d.eps_bounds[1])),
        tuple(names),
    )
    s = sec("noise")
    nz = NoiseConfig(_get(s, "eta", "[noise] eta", float, 0.0), _get(s, "seed", "[noise] seed", int, 0))
    s = sec("inversion")
    d = InversionConfig()
    inv = InversionConfig(
        _get(s, "method", "[inversion] method", str, d.method).lower(),
        _get(s, "rank", "[inversion] rank", int, None),
        _get(s, "rank_extra", "[inversion] rank_extra", int, d.rank_extra),
        _get(s, "alpha", "[inversion] alpha", float, None),
        _get(s, "relative_alpha", "[inversion] relative_alpha", bool, d.relative_alpha),
        _get(s, "delta", "[inversion] delta", float, None),
        _get(s, "max_iters", "[inversion] max_iters", int, d.max_iters),
        _get(s, "tol", "[inversion] tol", float, None),
        _get(s, "tangential", "[inversion] tangential", str, d.tangential).lower(),
    )
    s = sec("sampling")
    d = SamplingConfig()
    smp = SamplingConfig(
        _vec("[sampling] lo", s["lo"], 3) if "lo" in s else d.lo,
        _vec("[sampling] hi", s["hi"], 3) if "hi" in s else d.hi,
        _vec("[sampling] dims", s["dims"], 3, int) if "dims" in s else d.dims,
        _get(s, "buffer", "[sampling] buffer", float, d.buffer),
    )
    s = sec("output")
    d = OutputConfig()
    out = OutputConfig(
        _get(s, "nfm", "[output] nfm", str, d.nfm),
        _get(s, "indicator", "[output] indicator", str, d.indicator),
        _get(s, "sidecar", "[output] sidecar", str, d.sidecar),
        _get(s, "vtk", "[output] vtk", str, None),
        _vec("[output] iso_levels", s["iso_levels"]) if "iso_levels" in s else d.iso_levels,
    )
    return RunConfig(wg, arr, sc, nz, inv, smp, out)


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    return parse_config(text)
