"""Config-driven experiments: expansion of defaults, execution, table output, manifests."""
from __future__ import annotations

import copy
import json
import math
import platform
import re
import time
from pathlib import Path

import numpy as np

from . import __version__
from .billiard import (BilliardSystem, BumpField, DilationField, TranslationField, ZeroField, classical_spectrum,
                       evolve_billiard, force_spectrum, microcanonical_sample, random_initial, twodw_trajectory)
from .dynamics import (Composed, Linear, RectPulse, Sinusoidal, StepControl, Triangle, eigenstates, fidelity,
                       measures, propagate, spreading_profile_t)
from .lrt import estimate_DE_from_run, kubo_diffusion, lrt_spreading
from .model import SpecError, TwoDWellSpec, WignerSpec, build_wigner, twodw_eigensystem, wigner_correlation
from .regimes import regime_diagram
from .spectra import band_profile, bin_average, critical_scales, parametric_kernel, reference_states
from .tables import sha256_file, write_table

SCHEMA_VERSION = 1
KINDS = ("ldos", "wavepacket", "fidelity", "diffusion", "billiard-spectrum", "bandprofile-2dw", "regimes")


class ConfigError(ValueError):
    """Invalid run configuration (bad field, bad value)."""


class UnknownKind(ConfigError):
    pass


WIGNER_DEFAULTS = {"N": 400, "b": 8, "delta": 0.5, "sigma": 1.0, "hbar": 1.0, "sign_randomized": False}

DEFAULTS = {
    "ldos": {"x0": 0.0, "dx": "1 dx_c", "reference_fraction": 0.2},
    "wavepacket": {"A": "0.3 dx_prt", "t_max": "3 tau_cl", "n_t": 31, "n_ref": 20, "reference_fraction": 0.2},
    "fidelity": {
        "scheme_A": {"type": "rect", "A": "1 dx_c", "T": "4 tau_cl"},
        "scheme_B": {"type": "rect", "A": 0.0, "T": "4 tau_cl"},
        "n_t": 21,
        "n_ref": 10,
        "reference_fraction": 0.2,
    },
    "diffusion": {"A": "0.2 A_prt", "Omega": "0.3 omega_cl", "t_max": "100 tau_cl", "fit_from": "20 tau_cl", "n_ref": 20,
                  "reference_fraction": 0.25},
    "billiard-spectrum": {"W": 1.0, "H": 1.0, "discs": [[0.5, 0.5, 0.35]], "mass": 1.0, "E": 0.5,
                          "n_events": 200000, "field": {"type": "bump", "boundary": 0, "s_lo": 0.2, "s_hi": 0.35},
                          "n_segments": 256, "n_omega": 200, "omega_max_col": 5.0},
    "bandprofile-2dw": {"M": 110, "hbar": 0.04, "E": 3.0, "half_width": 0.2, "bin_width": 0.2, "omega_max": 10.0,
                        "n_traj": 200, "T": 2000.0, "segment_length": 200.0},
    "regimes": {"A_grid": {"lo": "0.05 A_c", "hi": "20 A_prt", "n": 25},
                "Omega_grid": {"lo": "0.05 omega_cl", "hi": "5 omega_cl", "n": 25}},
}

_QTY = re.compile(r"^\s*([-+0-9.eE]+)\s*\*?\s*([A-Za-z_]+)?\s*$")


def scale_table(model_cfg: dict) -> dict:
    spec = WignerSpec(**{k: model_cfg[k] for k in WIGNER_DEFAULTS}, seed=0)
    sc = critical_scales(spec)
    return {"dx_c": sc.dx_c, "dx_prt": sc.dx_prt, "A_c": sc.dx_c, "A_prt": sc.dx_prt, "tau_cl": sc.tau_cl,
            "omega_cl": sc.omega_cl, "Delta_b": sc.delta_b}


def quantity(v, scales: dict) -> float:
    """Number, or a string '<number> <scale>' with scale one of the derived scales."""
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    m = _QTY.match(str(v))
    if not m:
        raise ConfigError(f"cannot parse quantity {v!r}")
    num = float(m.group(1))
    unit = m.group(2)
    if unit is None:
        return num
    if unit not in scales:
        raise ConfigError(f"unknown scale {unit!r} in {v!r}; known: {sorted(scales)}")
    return num * scales[unit]


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def expand_config(cfg: dict, seed_override=None) -> dict:
    """Fill every default so the manifest holds a complete, explicit configuration."""
    if "config" in cfg and "outputs" in cfg:  # a manifest: re-run its config
        cfg = cfg["config"]
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a mapping")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise UnknownKind(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
    schema = cfg.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema version {schema}")
    seed = cfg.get("seed") if seed_override is None else seed_override
    if seed is None:
        raise ConfigError("seed is required")
    out = {"schema": SCHEMA_VERSION, "kind": kind, "seed": int(seed)}
    out["model"] = _merge(WIGNER_DEFAULTS, cfg.get("model"))
    out["params"] = _merge(DEFAULTS[kind], cfg.get("params"))
    unknown = set(cfg) - {"schema", "kind", "seed", "model", "params", "output"}
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    validate_config(out)
    return out


def validate_config(cfg: dict) -> None:
    try:
        WignerSpec(**{k: cfg["model"][k] for k in WIGNER_DEFAULTS}, seed=cfg["seed"])
    except TypeError as e:
        raise ConfigError(str(e)) from e
    extra = set(cfg["model"]) - set(WIGNER_DEFAULTS)
    if extra:
        raise ConfigError(f"unknown model keys {sorted(extra)}")
    extra = set(cfg["params"]) - set(DEFAULTS[cfg["kind"]])
    if extra:
        raise ConfigError(f"unknown params for {cfg['kind']}: {sorted(extra)}")
    sc = scale_table(cfg["model"])
    for k, v in cfg["params"].items():
        if isinstance(v, str):
            quantity(v, sc)


def set_path(cfg: dict, path: str, value) -> dict:
    """Copy of ``cfg`` with the dotted ``path`` (e.g. 'params.A') set to ``value``."""
    out = copy.deepcopy(cfg)
    node = out
    keys = path.split(".")
    for k in keys[:-1]:
        if k not in node or not isinstance(node[k], dict):
            raise ConfigError(f"no such config section {path!r}")
        node = node[k]
    if keys[-1] not in node:
        raise ConfigError(f"no such config field {path!r}")
    if isinstance(node[keys[-1]], (dict, list)):
        raise ConfigError(f"{path!r} does not address a numeric field")
    node[keys[-1]] = value
    return out


# ---------------------------------------------------------------------------


def _model(cfg):
    m = cfg["model"]
    return build_wigner(WignerSpec(**{k: m[k] for k in WIGNER_DEFAULTS}, seed=cfg["seed"]))


def _header(cfg, extra=None):
    h = {"kind": cfg["kind"], "seed": cfg["seed"], "scales": scale_table(cfg["model"]),
         "fourier_convention": "Ct(w) = int C(t) exp(i w t) dt"}
    h.update(extra or {})
    return h


def _scheme(d, sc):
    t = d["type"]
    if t == "rect":
        return RectPulse(quantity(d["A"], sc), quantity(d["T"], sc))
    if t == "triangle":
        return Triangle(quantity(d["A"], sc), quantity(d["T"], sc))
    if t == "linear":
        return Linear(quantity(d["V"], sc), quantity(d["T"], sc))
    if t == "sinusoidal":
        return Sinusoidal(quantity(d["A"], sc), quantity(d["Omega"], sc), float(d["cycles"]))
    if t == "composed":
        return Composed(tuple(_scheme(p, sc) for p in d["parts"]))
    raise ConfigError(f"unknown scheme type {t!r}")


def _ref(cfg, model, n_ref, margin=0):
    return reference_states(model.N, cfg["params"]["reference_fraction"], margin, count=n_ref)


def run_ldos(cfg, out: Path) -> dict:
    p = cfg["params"]
    sc = scale_table(cfg["model"])
    model = _model(cfg)
    prof = parametric_kernel(model, quantity(p["x0"], sc), quantity(p["x0"], sc) + quantity(p["dx"], sc),
                             reference_window=p["reference_fraction"])
    files = {}
    files["profile.tsv"] = write_table(out / "profile.tsv", {"r": prof.r, "P": prof.P},
                                       _header(cfg, {"n_ref": prof.n_ref, "norm_defect": abs(prof.P.sum() - 1)}))
    summary = {"survival": prof.survival, "gamma": prof.gamma, "dE": prof.dE, "kurtosis": prof.kurtosis(),
               "norm_defect": abs(float(prof.P.sum()) - 1.0)}
    return {"files": files, "summary": summary}


def run_wavepacket(cfg, out: Path) -> dict:
    """Rectangular pulse of amplitude A; energies read in the x = 0 basis (pulse ending at t)."""
    p = cfg["params"]
    sc = scale_table(cfg["model"])
    model = _model(cfg)
    A, tmax = quantity(p["A"], sc), quantity(p["t_max"], sc)
    ms = _ref(cfg, model, p["n_ref"])
    t = np.linspace(0, tmax, int(p["n_t"]))
    traj = propagate(model, RectPulse(A, tmax * (1 + 1e-12) + 1e-15), eigenstates(model, ms), t, ms=ms)
    prof = spreading_profile_t(traj, model, basis="initial")
    meas = measures(prof, t)
    pair = wigner_correlation(model.spec, t)
    lrt = lrt_spreading(pair, A, t)
    defect = np.array([abs(pp.P.sum() - 1) for pp in prof])
    files = {"measures.tsv": write_table(out / "measures.tsv", {
        "t": t, "survival": meas.survival, "gamma": meas.gamma, "dE": meas.dE, "dE_lrt": lrt, "norm_defect": defect},
        _header(cfg, {"A": A}))}
    return {"files": files, "summary": {"dE_final": float(meas.dE[-1]), "norm_defect": float(defect.max())}}


def run_fidelity(cfg, out: Path) -> dict:
    p = cfg["params"]
    sc = scale_table(cfg["model"])
    model = _model(cfg)
    sA, sB = _scheme(p["scheme_A"], sc), _scheme(p["scheme_B"], sc)
    ms = _ref(cfg, model, p["n_ref"])
    t = np.linspace(0, sA.horizon, int(p["n_t"]))
    F = fidelity(model, sA, sB, eigenstates(model, ms), t)
    absF = np.abs(F.F).mean(axis=1)
    files = {"fidelity.tsv": write_table(out / "fidelity.tsv", {
        "t": t, "absF": absF, "F2": F.probability, "absF_min": np.abs(F.F).min(axis=1)}, _header(cfg))}
    return {"files": files, "summary": {"absF_final": float(absF[-1]), "norm_defect": 0.0}}


def run_diffusion(cfg, out: Path) -> dict:
    p = cfg["params"]
    sc = scale_table(cfg["model"])
    model = _model(cfg)
    A, W = quantity(p["A"], sc), quantity(p["Omega"], sc)
    tmax = quantity(p["t_max"], sc)
    half = math.pi / W
    n_half = max(2, int(math.ceil(tmax / half)))
    t = np.arange(n_half + 1) * half  # x = 0 at every half period
    scheme = Sinusoidal(A, W, n_half / 2)
    ms = _ref(cfg, model, p["n_ref"])
    traj = propagate(model, scheme, eigenstates(model, ms), t, ms=ms)
    prof = spreading_profile_t(traj, model, basis="instantaneous")
    meas = measures(prof, t)
    fit = estimate_DE_from_run(t, meas.dE, (quantity(p["fit_from"], sc), t[-1]))
    pair = wigner_correlation(model.spec, [0.0, 1.0])
    kubo = kubo_diffusion(pair, W, scheme.rms_rate) if W <= pair.omega.max() else 0.0
    defect = np.array([abs(pp.P.sum() - 1) for pp in prof])
    files = {"spreading.tsv": write_table(out / "spreading.tsv", {
        "t": t, "dE": meas.dE, "dE2": meas.dE**2, "norm_defect": defect}, _header(cfg, {"A": A, "Omega": W}))}
    summary = {"D_E": fit.D_E, "D_E_err": fit.stderr, "r2": fit.r2, "diffusive": fit.diffusive, "kubo": kubo,
               "A": A, "Omega": W, "norm_defect": float(defect.max())}
    return {"files": files, "summary": summary}


def _field(d):
    t = d.get("type", "bump")
    if t == "bump":
        return BumpField(int(d["boundary"]), float(d["s_lo"]), float(d["s_hi"]))
    if t == "dilation":
        return DilationField(tuple(d.get("center", (0.5, 0.5))))
    if t == "translation":
        return TranslationField(tuple(d.get("direction", (1.0, 0.0))))
    if t == "zero":
        return ZeroField()
    raise ConfigError(f"unknown deformation field {t!r}")


def run_billiard_spectrum(cfg, out: Path) -> dict:
    p = cfg["params"]
    system = BilliardSystem(p["W"], p["H"], tuple(tuple(d) for d in p["discs"]), p["mass"], p["E"])
    rng = np.random.default_rng(cfg["seed"])
    ser = evolve_billiard(system, random_initial(system, rng), n_events=int(p["n_events"]))
    tau_col = ser.T / len(ser)
    Ts = ser.T / p["n_segments"]
    wmax = p["omega_max_col"] * 2 * math.pi / tau_col
    omega = np.concatenate([[0.0], np.linspace(2 * math.pi / Ts, wmax, int(p["n_omega"]))])
    pair = force_spectrum(ser, _field(p["field"]), omega, system.mass, int(p["n_segments"]))
    files = {"spectrum.tsv": write_table(out / "spectrum.tsv", {"omega": pair.omega, "Ct": pair.Ct},
                                         _header(cfg, {"tau_col": tau_col, "n_events": len(ser)}))}
    return {"files": files, "summary": {"tau_col": tau_col, "speed_defect": ser.speed_defect,
                                        "grazing": ser.grazing}}


def run_bandprofile_2dw(cfg, out: Path) -> dict:
    p = cfg["params"]
    E, hw = float(p["E"]), float(p["half_width"])
    es = twodw_eigensystem(TwoDWellSpec(M=int(p["M"]), hbar=float(p["hbar"]), energy_window=(E - hw, E + hw)))
    D = es.mean_spacing(E - hw, E + hw)
    rows = np.flatnonzero((es.energies >= E - hw) & (es.energies <= E + hw))
    bp = band_profile(es.W, es.energies, hbar=es.hbar, delta=D, bin_width=float(p["bin_width"]),
                      omega_max=float(p["omega_max"]), rows=rows)
    q0, p0 = microcanonical_sample(E, int(p["n_traj"]), seed=cfg["seed"])
    tr = twodw_trajectory(q0, p0, T=float(p["T"]))
    pair = classical_spectrum(tr, float(p["segment_length"]))
    cl = bin_average(pair, np.minimum(bp.omega, pair.omega.max()), float(p["bin_width"]))
    quantum = 2 * math.pi * es.hbar / D * bp.mean_sq
    files = {"bandprofile.tsv": write_table(out / "bandprofile.tsv", {
        "omega": bp.omega, "quantum": quantum, "classical": cl, "counts": bp.counts},
        _header(cfg, {"Delta": D, "retained_states": es.N, "energy_drift": tr.energy_drift}))}
    return {"files": files, "summary": {"retained_states": es.N, "Delta": D, "energy_drift": tr.energy_drift}}


def run_regimes(cfg, out: Path) -> dict:
    p = cfg["params"]
    sc = scale_table(cfg["model"])
    spec = WignerSpec(**{k: cfg["model"][k] for k in WIGNER_DEFAULTS}, seed=cfg["seed"])
    g = p["A_grid"]
    A = np.geomspace(quantity(g["lo"], sc), quantity(g["hi"], sc), int(g["n"]))
    g = p["Omega_grid"]
    W = np.geomspace(quantity(g["lo"], sc), quantity(g["hi"], sc), int(g["n"]))
    rep = regime_diagram(critical_scales(spec), A, W)
    rows = list(rep.rows())
    files = {"diagram.tsv": write_table(out / "diagram.tsv", {
        "A": [r[0] for r in rows], "Omega": [r[1] for r in rows], "label": [r[2] for r in rows]},
        _header(cfg, {"V_nonpert": rep.V_nonpert, "V_adiabatic": rep.V_adiabatic}))}
    counts = {lab: sum(r[2] == lab for r in rows) for lab in ("adiabatic", "QM-resonance", "LRT", "non-perturbative")}
    return {"files": files, "summary": counts}


RUNNERS = {
    "ldos": run_ldos,
    "wavepacket": run_wavepacket,
    "fidelity": run_fidelity,
    "diffusion": run_diffusion,
    "billiard-spectrum": run_billiard_spectrum,
    "bandprofile-2dw": run_bandprofile_2dw,
    "regimes": run_regimes,
}


def run(cfg: dict, out_dir, seed_override=None) -> dict:
    """Execute one experiment; write tables and manifest.json into ``out_dir``; return the manifest."""
    cfg = expand_config(cfg, seed_override)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    res = RUNNERS[cfg["kind"]](cfg, out)
    wall = time.time() - t0
    outputs = {name: sha256_file(out / name) for name in res["files"]}
    manifest = {
        "config": cfg,
        "artifact_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "derived_scales": scale_table(cfg["model"]),
        "wall_clock_s": wall,
        "outputs": outputs,
        "summary": _plain(res["summary"]),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def _plain(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer, np.bool_)):
            v = v.item()
        if isinstance(v, float) and not math.isfinite(v):
            v = str(v)
        out[k] = v
    return out


def reproduce(manifest_path, out_dir) -> tuple[bool, dict]:
    """Re-run a manifest's config into ``out_dir`` and compare digests."""
    old = json.loads(Path(manifest_path).read_text())
    new = run(old["config"], out_dir)
    return new["outputs"] == old["outputs"], new
