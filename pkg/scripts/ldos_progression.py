"""Parametric kernel across the perturbative, Wigner and semicircle regimes.

Writes results/ldos_progression.tsv with one row per step size: survival,
core width, energy spread, kurtosis and the regime label.
"""
import argparse
from pathlib import Path

import numpy as np

from qchaoslab.model import WignerSpec, build_wigner
from qchaoslab.spectra import classify_profile, critical_scales, parametric_kernel
from qchaoslab.tables import write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=2000)
    ap.add_argument("--b", type=int, default=16)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/ldos_progression.tsv")
    a = ap.parse_args()
    spec = WignerSpec(N=a.N, b=a.b, seed=a.seed)
    m = build_wigner(spec)
    sc = critical_scales(spec)
    steps = np.geomspace(0.1 * sc.dx_c, 10 * sc.dx_prt, 12)
    rows = {"dx": [], "dx_over_dx_c": [], "survival": [], "gamma_levels": [], "dE": [], "kurtosis": [], "label": []}
    for dx in steps:
        # the semicircle end needs a margin set by its radius, not the generic rule
        p = parametric_kernel(m, 0.0, dx, reference_window=0.1, margin=min(500, a.N // 2 - a.N // 20 - 1))
        rows["dx"].append(dx)
        rows["dx_over_dx_c"].append(dx / sc.dx_c)
        rows["survival"].append(p.survival)
        rows["gamma_levels"].append(p.gamma_levels)
        rows["dE"].append(p.dE)
        rows["kurtosis"].append(p.kurtosis())
        rows["label"].append(classify_profile(p, sc))
        print(f"dx/dx_c={dx / sc.dx_c:8.2f}  P(0)={p.survival:.3f}  Gamma={p.gamma_levels:4d}  {rows['label'][-1]}")
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    write_table(a.out, rows, {"N": a.N, "b": a.b, "seed": a.seed, "dx_c": sc.dx_c, "dx_prt": sc.dx_prt})


if __name__ == "__main__":
    main()
