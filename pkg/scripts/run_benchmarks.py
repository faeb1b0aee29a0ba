"""Run the k = 20 / 25 configurations and summarise each indicator field.

Usage: python scripts/run_benchmarks.py [--out runs] [--threads N] [config ...]
"""

import argparse
import glob
import os
import time

import numpy as np

from wglsm.cli import cmd_pipeline
from wglsm.config import load_config
from wglsm.lsm import iso_level


def summarise(cfg, fld):
    best = fld.points[np.argmax(np.where(fld.valid, fld.psi, -np.inf))]
    lines = [f"  argmax psi at {np.round(best, 3).tolist()}"]
    for s in cfg.scatterer.spheres:
        d = np.linalg.norm(best - np.asarray(s.center))
        lines.append(f"  sphere at {s.center} r={s.radius}: distance {d:.3f}")
    for C in cfg.output.iso_levels:
        lvl = iso_level(fld, C)
        lines.append(f"  C={C}: level {lvl:.4g}, {int(np.sum(fld.psi >= lvl))} points above")
    return "\n".join(lines)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*")
    ap.add_argument("--out", default="runs")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    paths = args.configs or sorted(glob.glob(os.path.join(os.path.dirname(__file__), "..", "configs", "benchmark_*.ini")))
    for path in paths:
        cfg = load_config(path).validate()
        name = os.path.splitext(os.path.basename(path))[0]
        out = os.path.join(args.out, name)
        os.makedirs(out, exist_ok=True)
        t0 = time.perf_counter()
        fld = cmd_pipeline(cfg, out, args.threads)
        print(f"{name}: {time.perf_counter() - t0:.1f}s -> {out}")
        print(summarise(cfg, fld))


if __name__ == "__main__":
    main()
