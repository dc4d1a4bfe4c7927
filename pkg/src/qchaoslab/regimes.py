"""Closed-form regime calculators.

Every "much larger / much smaller" boundary is realized as an equality line
with order-unity constants set to 1. Geometric prefactors are exposed as
optional multipliers (default 1).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .spectra import ParametricScales


@dataclass(frozen=True)
class VelocityThresholds:
    V_nonpert: float
    V_adiabatic: float


def velocity_regimes(scales: ParametricScales) -> VelocityThresholds:
    """V_nonpert = dx_prt / tau_cl and V_adiabatic = b^(-3/2) V_nonpert."""
    vn = scales.dx_prt / scales.tau_cl
    return VelocityThresholds(vn, vn / scales.b**1.5)


@dataclass(frozen=True)
class PhysicalParams:
    L: float
    L_col: float
    L_perp: float
    hbar: float
    m: float
    v_E: float
    d: int = 2
    e: float = 1.0
    wall_area: float | None = None
    box_volume: float | None = None
    lambda_E: float | None = None

    def __post_init__(self):
        for k in ("L", "L_col", "L_perp", "hbar", "m", "v_E", "e"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        if self.d not in (2, 3):
            raise ValueError("dimension d must be 2 or 3")
        lam = 2 * math.pi * self.hbar / (self.m * self.v_E)
        if self.lambda_E is not None and abs(self.lambda_E - lam) > 1e-10 * lam:
            raise ValueError(f"lambda_E={self.lambda_E} inconsistent with 2 pi hbar/(m v_E) = {lam}")

    @property
    def wavelength(self) -> float:
        return 2 * math.pi * self.hbar / (self.m * self.v_E)

    @property
    def tau_col(self) -> float:
        return self.L_col / self.v_E

    @classmethod
    def from_wavelength(cls, lambda_E, hbar=1.0, m=1.0, **kw):
        """Choose v_E so that 2 pi hbar/(m v_E) equals ``lambda_E``."""
        v = 2 * math.pi * hbar / (m * lambda_E)
        return cls(hbar=hbar, m=m, v_E=v, lambda_E=lambda_E, **kw)


def ring_estimators(p: PhysicalParams, geometric_factor: float = 1.0) -> dict:
    """EMF-driven ring: b, dx_prt, e*V_nonpert, e*V_adiabatic."""
    g = geometric_factor * p.L / p.L_col
    lam = p.wavelength
    return {
        "b": g * (p.L_perp / lam) ** (p.d - 1),
        "dx_prt": g * p.hbar / p.e,
        "eV_nonpert": g * p.hbar / p.tau_col,
        "eV_adiabatic": (lam / p.L) ** 1.5 * p.hbar / p.tau_col,
    }


def box_estimators(p: PhysicalParams, rel_tol: float = 0.01) -> dict:
    """Moving-wall box: b, dx_prt = lambda_E, V_nonpert, V_adiabatic.

    b is computed from the wall area; when the box volume is also given the
    second expression V_box/(L_col lambda^(d-1)) is compared and a warning is
    issued if they disagree by more than ``rel_tol``.
    """
    lam = p.wavelength
    if p.wall_area is None and p.box_volume is None:
        raise ValueError("box estimators need wall_area or box_volume")
    b_area = p.wall_area / lam ** (p.d - 1) if p.wall_area is not None else None
    b_vol = p.box_volume / (p.L_col * lam ** (p.d - 1)) if p.box_volume is not None else None
    if b_area is not None and b_vol is not None and abs(b_area - b_vol) > rel_tol * max(b_area, b_vol):
        warnings.warn(f"inconsistent box geometry: b from area {b_area:.6g}, from volume {b_vol:.6g}", RuntimeWarning)
    b = b_area if b_area is not None else b_vol
    vn = p.hbar / (p.m * p.L_col)
    return {"b": b, "dx_prt": lam, "V_nonpert": vn, "V_adiabatic": b**-1.5 * vn}


@dataclass(frozen=True)
class Dephasing:
    tau_phi: float
    regime: str


def dephasing_time(p: PhysicalParams, V: float, regime_hint: str | None = None) -> Dephasing:
    """Dephasing time for a moving-wall perturbation with rate V.

    non-perturbative (V >= V_nonpert): tau_phi = tau_col.
    adiabatic (V <= V_adiabatic or V = 0): infinite, "Born-Oppenheimer order".
    otherwise: tau_phi = (L_col lambda_E^2 / (v_E V^2))^(1/3).
    """
    if V < 0:
        raise ValueError("V must be non-negative")
    lam = p.wavelength
    if regime_hint is None:
        if V == 0:
            regime_hint = "adiabatic"
        else:
            est = box_estimators(p) if (p.wall_area or p.box_volume) else None
            if est is not None and V >= est["V_nonpert"]:
                regime_hint = "non-perturbative"
            elif est is not None and V <= est["V_adiabatic"]:
                regime_hint = "adiabatic"
            else:
                regime_hint = "perturbative"
    if regime_hint == "non-perturbative":
        return Dephasing(p.L_col / p.v_E, regime_hint)
    if regime_hint == "adiabatic" or V == 0:
        return Dephasing(math.inf, "adiabatic (Born-Oppenheimer order)")
    return Dephasing((p.L_col * lam**2 / (p.v_E * V**2)) ** (1 / 3), "perturbative")


LABELS = ("adiabatic", "QM-resonance", "LRT", "non-perturbative")


@dataclass
class RegimeReport:
    b: float
    dx_prt: float
    A_c: float
    omega_cl: float
    V_nonpert: float
    V_adiabatic: float
    A: np.ndarray
    Omega: np.ndarray
    labels: np.ndarray  # (len(A), len(Omega)) strings

    def rows(self):
        for i, a in enumerate(self.A):
            for j, w in enumerate(self.Omega):
                yield float(a), float(w), str(self.labels[i, j])


def classify_point(A: float, Omega: float, scales: ParametricScales) -> str:
    th = velocity_regimes(scales)
    A_c, A_prt, w_cl = scales.dx_c, scales.dx_prt, scales.omega_cl
    V = Omega * A / math.sqrt(2)
    if V > th.V_nonpert or (Omega > w_cl and A > A_prt):
        return "non-perturbative"
    if A < A_c:
        return "QM-resonance"
    if V < th.V_adiabatic:
        return "adiabatic"
    return "LRT"


def regime_diagram(scales: ParametricScales, A_grid, Omega_grid) -> RegimeReport:
    """Label every (A, Omega) point of the periodic-driving plane."""
    A = np.asarray(A_grid, dtype=float)
    W = np.asarray(Omega_grid, dtype=float)
    if np.any(A <= 0) or np.any(W <= 0):
        raise ValueError("grids must be positive")
    th = velocity_regimes(scales)
    lab = np.array([[classify_point(a, w, scales) for w in W] for a in A], dtype=object)
    return RegimeReport(scales.b, scales.dx_prt, scales.dx_c, scales.omega_cl, th.V_nonpert, th.V_adiabatic, A, W, lab)
