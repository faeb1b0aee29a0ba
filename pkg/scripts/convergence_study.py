"""Voxel refinement study: relative change of synthesized data as the grid is refined.

Usage: python scripts/convergence_study.py [--k 10] [--eps 4+0.5j] [--dims 6 8 10 12 16]
"""

import argparse
import time

import numpy as np

from wglsm.forward import make_array, synthesize_near_field
from wglsm.greens import GreensEvaluator
from wglsm.scatterer import Geometry, Sphere, rasterize, tight_box
from wglsm.spectra import CrossSection


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=float, default=10.0)
    ap.add_argument("--eps", type=complex, default=4 + 0.5j)
    ap.add_argument("--radius", type=float, default=0.15)
    ap.add_argument("--dims", type=int, nargs="+", default=[6, 8, 10, 12, 16])
    args = ap.parse_args()
    cs = CrossSection()
    ev = GreensEvaluator(cs, args.k)
    g = Geometry([Sphere((0.5, 0.6, 0.0), args.radius, args.eps)])
    arr = make_array(cs, -3.0, 4)
    prev = None
    print(f"{'n':>4} {'cells':>6} {'time':>7} {'|N|':>12} {'rel change':>11}")
    for n in args.dims:
        v = rasterize(g, tight_box(g, 0.005), (n, n, n))
        t0 = time.perf_counter()
        N = synthesize_near_field(ev, v, arr).entries
        dt = time.perf_counter() - t0
        change = "" if prev is None else f"{np.linalg.norm(N - prev) / np.linalg.norm(N):11.3e}"
        print(f"{n:4d} {v.support.size:6d} {dt:6.1f}s {np.linalg.norm(N):12.5e} {change}")
        prev = N


if __name__ == "__main__":
    main()
