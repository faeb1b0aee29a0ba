"""Command line driver: ``simulate``, ``invert`` and ``pipeline``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .forward import (FormatError, MultistaticData, SolverError, add_noise, make_array,
                      read_nfm, synthesize_near_field, write_nfm)
from .greens import SeparationError
from .lsm import assemble, raw_matrix, scan, write_indicator_csv, write_sidecar, write_vtk
from .scatterer import rasterize
from .spectra import CutoffError

log = logging.getLogger("wglsm")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class NumericFailure(RuntimeError):
    pass


def _path(out_dir, name):
    return name if os.path.isabs(name) else os.path.join(out_dir, name)


def cmd_simulate(cfg: RunConfig, out_dir: str) -> str:
    t0 = time.perf_counter()
    ev = cfg.evaluator()
    arr = make_array(cfg.cross_section, cfg.array.r, cfg.array.n_per_side)
    geom = cfg.geometry()
    tangential = cfg.inversion.tangential == "nu0"
    if geom.empty:
        P = arr.size
        data = MultistaticData(np.zeros((3 * P, 3 * P), complex), ev.k, arr.r, P, tangential=tangential)
    else:
        grid = rasterize(geom, cfg.voxel_box(), cfg.scatterer.voxel_dims)
        log.info("voxels: %d support cells", grid.support.size)
        data = synthesize_near_field(ev, grid, arr, tangential=tangential)
    data = add_noise(data, cfg.noise.eta, cfg.noise.seed)
    path = _path(out_dir, cfg.output.nfm)
    write_nfm(path, data)
    log.info("wrote %s (%dx%d) in %.1f s", path, *data.entries.shape, time.perf_counter() - t0)
    return path


def cmd_invert(cfg: RunConfig, out_dir: str, nfm_path: str | None = None, threads: int = 1):
    t0 = time.perf_counter()
    tangential = cfg.inversion.tangential == "nu0"
    path = nfm_path or _path(out_dir, cfg.output.nfm)
    try:
        data = read_nfm(path, tangential=tangential)
    except OSError as exc:
        raise ConfigError(f"nfm: cannot read {path}: {exc}") from None
    except FormatError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data.k != cfg.waveguide.k:
        raise ConfigError(f"{path}: k={data.k!r} does not match [waveguide] k={cfg.waveguide.k!r}")
    if data.r != cfg.array.r:
        raise ConfigError(f"{path}: r={data.r!r} does not match [array] r={cfg.array.r!r}")
    arr = make_array(cfg.cross_section, cfg.array.r, cfg.array.n_per_side)
    if data.P != arr.size:
        raise ConfigError(f"{path}: P={data.P} does not match [array] n_per_side={cfg.array.n_per_side}")
    ev = cfg.evaluator()
    m = assemble(data, arr) if tangential else raw_matrix(data, arr)
    fld = scan(m, ev, cfg.grid(), cfg.reg(), arr, threads=threads)
    csv = _path(out_dir, cfg.output.indicator)
    write_indicator_csv(csv, fld)
    meta = {"k": cfg.waveguide.k, "r": cfg.array.r, "P": data.P, "eta": data.eta, "seed": data.seed,
            "tangential": cfg.inversion.tangential}
    write_sidecar(_path(out_dir, cfg.output.sidecar), fld, cfg.output.iso_levels, meta)
    if cfg.output.vtk:
        write_vtk(_path(out_dir, cfg.output.vtk), fld)
    log.info("wrote %s in %.1f s", csv, time.perf_counter() - t0)
    if not fld.valid.any():
        raise NumericFailure("every sampling point is degenerate (zero data?)")
    return fld


def cmd_pipeline(cfg: RunConfig, out_dir: str, threads: int = 1):
    path = cmd_simulate(cfg, out_dir)
    return cmd_invert(cfg, out_dir, path, threads)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wglsm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "invert", "pipeline"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--seed", type=int, default=None, help="overrides [noise] seed")
        s.add_argument("--out", default=".")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "invert":
            s.add_argument("--nfm", default=None, help="data file (default: [output] nfm in --out)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, noise=replace(cfg.noise, seed=args.seed))
        cfg.validate()
        os.makedirs(args.out, exist_ok=True)
        if args.command == "simulate":
            cmd_simulate(cfg, args.out)
        elif args.command == "invert":
            cmd_invert(cfg, args.out, args.nfm, args.threads)
        else:
            cmd_pipeline(cfg, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"warning: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SolverError, SeparationError, CutoffError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
