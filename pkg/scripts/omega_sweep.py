"""D_E / D_Kubo against driving frequency for a weak and a strong amplitude.

Uses the CLI sweep machinery; each amplitude gets its own directory under
results/omega_sweep/ with a summary.tsv (columns D_E, kubo, ...).
"""
import argparse

from qchaoslab.cli import sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=1000)
    ap.add_argument("--b", type=int, default=16)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="results/omega_sweep")
    a = ap.parse_args()
    omegas = [f"{w} omega_cl" for w in (0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.2, 1.5, 2.0, 3.0)]
    for A in ("0.2 A_prt", "5 A_prt"):
        cfg = {"kind": "diffusion", "seed": 1, "model": {"N": a.N, "b": a.b},
               "params": {"A": A, "t_max": "60 tau_cl", "fit_from": "15 tau_cl", "n_ref": 8}}
        ms = sweep(cfg, "params.Omega", omegas, f"{a.out}/A_{A.split()[0]}", workers=a.workers)
        for w, m in zip(omegas, ms):
            s = m["summary"]
            print(f"A={A:10s} Omega={w:14s} D_E={s['D_E']} kubo={s['kubo']:.4g}")


if __name__ == "__main__":
    main()
