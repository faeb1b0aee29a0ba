"""Print the singular values of the near-field matrix for a configuration.

Usage: python scripts/singular_values.py configs/desk_sphere.ini [--count 40]
"""

import argparse

import numpy as np

from wglsm.forward import add_noise, make_array, synthesize_near_field
from wglsm.config import load_config
from wglsm.lsm import assemble
from wglsm.scatterer import rasterize
from wglsm.spectra import Family, count_propagating


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config")
    ap.add_argument("--count", type=int, default=40)
    args = ap.parse_args()
    cfg = load_config(args.config).validate()
    ev = cfg.evaluator()
    arr = make_array(cfg.cross_section, cfg.array.r, cfg.array.n_per_side)
    grid = rasterize(cfg.geometry(), cfg.voxel_box(), cfg.scatterer.voxel_dims)
    d = add_noise(synthesize_near_field(ev, grid, arr), cfg.noise.eta, cfg.noise.seed)
    s = np.linalg.svd(assemble(d, arr).matrix, compute_uv=False)
    nm = count_propagating(cfg.cross_section, ev.k, Family.NEUMANN)
    nn = count_propagating(cfg.cross_section, ev.k, Family.DIRICHLET)
    print(f"k={ev.k}: {nm} propagating M modes, {nn} propagating N modes")
    for i, v in enumerate(s[: args.count], 1):
        print(f"{i:4d} {v:12.5e} {v / s[0]:10.3e}")


if __name__ == "__main__":
    main()
