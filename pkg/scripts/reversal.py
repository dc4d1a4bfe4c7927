"""Driving reversal of a triangular excursion: residual spreading vs sweep rate.

Writes results/reversal.tsv with dE at the turning point, dE after the
return and their ratio, for rates spanning the adiabatic and
non-perturbative thresholds.
"""
import argparse
from pathlib import Path

import numpy as np

from qchaoslab.dynamics import Triangle, driving_reversal_run
from qchaoslab.model import WignerSpec, build_wigner
from qchaoslab.regimes import velocity_regimes
from qchaoslab.spectra import critical_scales, reference_states
from qchaoslab.tables import write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=400)
    ap.add_argument("--b", type=int, default=16)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out", default="results/reversal.tsv")
    a = ap.parse_args()
    spec = WignerSpec(N=a.N, b=a.b, seed=a.seed)
    m = build_wigner(spec)
    sc = critical_scales(spec)
    th = velocity_regimes(sc)
    A = 3 * sc.dx_prt
    ms = reference_states(m.N, 0.1, count=10)
    V = np.geomspace(th.V_adiabatic / 3, 4 * th.V_nonpert, 8)
    rows = {"V": [], "V_over_V_nonpert": [], "dE_T": [], "dE_2T": [], "ratio": []}
    for v in V:
        r = driving_reversal_run(m, Triangle(A, 2 * A / v), ms)
        for k, val in zip(rows, (v, v / th.V_nonpert, r.dE_T, r.dE_2T, r.ratio)):
            rows[k].append(val)
        print(f"V/V_nonpert={v / th.V_nonpert:8.4f}  dE(T)={r.dE_T:8.3f}  dE(2T)={r.dE_2T:8.3f}  ratio={r.ratio:.3f}")
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    write_table(a.out, rows, {"N": a.N, "b": a.b, "seed": a.seed, "A": A, "V_nonpert": th.V_nonpert,
                              "V_adiabatic": th.V_adiabatic})


if __name__ == "__main__":
    main()
