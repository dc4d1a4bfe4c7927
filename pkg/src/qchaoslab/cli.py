"""Command line runner.

    qchaoslab <kind> --config run.yaml --out results/ [--seed N]
    qchaoslab sweep --config run.yaml --out sweep/ --param params.A --values "0.5 A_prt" "1 A_prt"
    qchaoslab validate --config run.yaml
    qchaoslab reproduce --manifest results/manifest.json --out rerun/

Exit status: 0 success, 2 usage error, 3 unknown experiment kind,
4 invalid configuration or spec, 5 numerical failure (unreachable tolerance),
6 reproduction mismatch.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from . import experiments as ex
from .billiard import EnergyBudgetError, ResolutionError
from .dynamics import NumericalError
from .model import SpecError
from .spectra import WindowError
from .tables import write_table

EXIT_OK, EXIT_USAGE, EXIT_UNKNOWN_KIND, EXIT_INVALID, EXIT_NUMERICAL, EXIT_MISMATCH = 0, 2, 3, 4, 5, 6


def load_config(path) -> dict:
    text = Path(path).read_text()
    cfg = yaml.safe_load(text)
    if not isinstance(cfg, dict):
        raise ex.ConfigError(f"{path}: top level must be a mapping")
    return cfg


def _sweep_one(args):
    cfg, out, seed = args
    m = ex.run(cfg, out, seed)
    return m


def sweep(cfg: dict, param: str, values, out_dir, seed_policy: str = "fixed", workers: int = 1,
          seed_override=None) -> list:
    """One run per value in isolated subdirectories plus summary.tsv; returns the manifests."""
    base = ex.expand_config(cfg, seed_override)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for i, v in enumerate(values):
        c = ex.set_path(base, param, v)
        seed = base["seed"] if seed_policy == "fixed" else base["seed"] + i
        jobs.append((c, out / f"run_{i:03d}", seed))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            manifests = list(pool.map(_sweep_one, jobs))
    else:
        manifests = [_sweep_one(j) for j in jobs]
    keys = sorted({k for m in manifests for k in m["summary"]})
    cols = {"index": list(range(len(values))), param: [str(v) for v in values],
            "seed": [m["config"]["seed"] for m in manifests]}
    for k in keys:
        cols[k] = [m["summary"].get(k, "nan") for m in manifests]
    write_table(out / "summary.tsv", cols, {"param": param, "seed_policy": seed_policy})
    return manifests


def build_parser():
    p = argparse.ArgumentParser(prog="qchaoslab", description="driven quantum chaos experiments")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--config", required=True, help="YAML run configuration (or a manifest.json)")
        if out:
            sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--workers", type=int, default=1, help="parallel workers (sweeps)")
        sp.add_argument("-v", "--verbose", action="store_true")

    for kind in ex.KINDS:
        common(sub.add_parser(kind, help=f"run a {kind} experiment"))
    sp = sub.add_parser("run", help="run the experiment kind named in the config")
    common(sp)
    sp = sub.add_parser("sweep", help="one run per value of a numeric config field")
    common(sp)
    sp.add_argument("--param", required=True, help="dotted path, e.g. params.A")
    sp.add_argument("--values", nargs="+", required=True, help="values; '<number> <scale>' strings allowed")
    sp.add_argument("--seed-policy", choices=("fixed", "per-value"), default="fixed")
    sp = sub.add_parser("validate", help="check a configuration without running")
    common(sp, out=False)
    sp = sub.add_parser("reproduce", help="re-run a manifest and compare output digests")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    return p


def _value(v: str):
    try:
        return float(v) if any(c in v for c in ".eE") else int(v)
    except ValueError:
        return v


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
    try:
        if args.command == "reproduce":
            ok, m = ex.reproduce(args.manifest, args.out)
            print(json.dumps({"reproduced": ok, "outputs": m["outputs"]}, indent=2))
            return EXIT_OK if ok else EXIT_MISMATCH
        cfg = load_config(args.config)
        if args.command in ex.KINDS:
            if cfg.get("kind", args.command) != args.command:
                raise ex.ConfigError(f"config kind {cfg.get('kind')!r} does not match subcommand {args.command!r}")
            cfg = dict(cfg, kind=args.command) if "config" not in cfg else cfg
        if args.command == "validate":
            full = ex.expand_config(cfg, args.seed)
            print(yaml.safe_dump(full, sort_keys=True))
            return EXIT_OK
        if args.command == "sweep":
            ms = sweep(cfg, args.param, [_value(v) for v in args.values], args.out, args.seed_policy, args.workers,
                       args.seed)
            print(f"{len(ms)} runs written to {args.out}")
            return EXIT_OK
        m = ex.run(cfg, args.out, args.seed)
        print(json.dumps(m["summary"], indent=2, default=str))
        return EXIT_OK
    except ex.UnknownKind as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNKNOWN_KIND
    except (NumericalError, EnergyBudgetError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ex.ConfigError, SpecError, WindowError, ResolutionError, ValueError, KeyError, TypeError,
            yaml.YAMLError, FileNotFoundError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
