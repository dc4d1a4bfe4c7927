"""Force spectra of Sinai billiards: generic bump vs dilation, strong vs weak chaos.

Writes results/billiard_spectra.tsv (omega in units of 2 pi / tau_col).
"""
import argparse
import math
from pathlib import Path

import numpy as np

from qchaoslab.billiard import BilliardSystem, BumpField, DilationField, evolve_billiard, force_spectrum, lyapunov, random_initial
from qchaoslab.tables import write_table


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--events", type=int, default=300_000)
    ap.add_argument("--segments", type=int, default=512)
    ap.add_argument("--out", default="results/billiard_spectra.tsv")
    a = ap.parse_args()
    cols = {}
    for R in (0.35, 0.1):
        system = BilliardSystem(discs=((0.5, 0.5, R),))
        ini = random_initial(system, np.random.default_rng(1))
        ser = evolve_billiard(system, ini, n_events=a.events)
        tau_col = ser.T / len(ser)
        Ts = ser.T / a.segments
        w = np.linspace(2 * math.pi / Ts, 5 * 2 * math.pi / tau_col, 200)
        cols.setdefault("omega_col", w * tau_col / (2 * math.pi))
        cols[f"bump_R{R}"] = force_spectrum(ser, BumpField(0, 0.2, 0.35), w, n_segments=a.segments).Ct
        cols[f"dilation_R{R}"] = force_spectrum(ser, DilationField(), w, n_segments=a.segments).Ct
        lam = lyapunov(system, ini, T=300.0)
        print(f"R={R}: tau_col={tau_col:.4f}  lyapunov={lam.exponent:.3f} +- {lam.stderr:.3f}")
    Path(a.out).parent.mkdir(parents=True, exist_ok=True)
    write_table(a.out, cols, {"events": a.events, "segments": a.segments})


if __name__ == "__main__":
    main()
