"""Linear response baselines built from a correlation function and its spectrum.

Fourier convention used everywhere in the package:

    Ct(omega) = integral C(tau) exp(i omega tau) dtau
    C(tau)    = (1/2pi) integral Ct(omega) exp(-i omega tau) domega

All correlations are real and even, so both sides are stored on
non-negative grids only and the transforms reduce to cosine integrals.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

CONVENTION = "Ct(w) = int C(t) exp(i w t) dt"


class AliasingError(ValueError):
    """Input does not decay inside the represented grid."""


@dataclass
class SpectralPair:
    tau: np.ndarray
    C: np.ndarray
    omega: np.ndarray
    Ct: np.ndarray
    convention: str = CONVENTION

    @property
    def C0(self) -> float:
        return float(np.interp(0.0, np.abs(self.tau), self.C)) if len(self.tau) else math.nan

    def C_at(self, t) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=float))
        order = np.argsort(np.abs(self.tau))
        return np.interp(t, np.abs(self.tau)[order], self.C[order])

    def Ct_at(self, w) -> np.ndarray:
        w = np.abs(np.asarray(w, dtype=float))
        if np.any(w > self.omega.max() * (1 + 1e-12)):
            raise ValueError(f"frequency {w.max()} outside represented grid [0, {self.omega.max()}]")
        return np.interp(w, self.omega, self.Ct)

    def sum_rule(self) -> float:
        """(1/2pi) * integral over all omega of Ct, using evenness."""
        return float(trapezoid(self.Ct, self.omega) / math.pi)

    @property
    def consistent(self) -> bool:
        """Power spectrum non-negative and C(0) within 2% of the spectral sum rule."""
        if len(self.Ct) == 0 or len(self.C) == 0:
            return False
        scale = max(abs(self.C0), np.abs(self.Ct).max() * 1e-300, 1e-300)
        ok_sign = bool(np.all(self.Ct >= -1e-9 * max(np.abs(self.Ct).max(), 1e-300)))
        return ok_sign and abs(self.sum_rule() - self.C0) <= 0.02 * scale + 1e-300


def _cos_transform(x, y, k, weight):
    """weight * integral_0^xmax y(x) cos(k x) dx, trapezoid, evaluated for every k."""
    x = np.asarray(x, dtype=float)
    w = np.full(len(x), 0.0)
    dx = np.diff(x)
    w[:-1] += dx / 2
    w[1:] += dx / 2
    out = np.empty(len(k))
    chunk = max(1, 2_000_000 // max(len(x), 1))
    for i in range(0, len(k), chunk):
        kk = np.asarray(k[i : i + chunk])
        out[i : i + chunk] = np.cos(np.outer(kk, x)) @ (w * y)
    return weight * out


def _check_decay(y, name):
    y = np.asarray(y, dtype=float)
    peak = np.abs(y).max() if len(y) else 0.0
    if peak == 0.0:
        return
    tail = np.abs(y[-max(1, len(y) // 20) :]).max()
    if tail > 0.05 * peak:
        raise AliasingError(
            f"{name} does not decay on the grid (tail/peak = {tail / peak:.3g}); extend the grid"
        )


def fourier_pair(tau=None, C=None, omega=None, Ct=None, check_decay: bool = True) -> SpectralPair:
    """Complete a pair from either the correlation or the spectrum side.

    Grids are non-negative and start at 0. If only one side is given the other
    is computed on a matching default grid (omega up to pi/dtau, or tau up to
    pi/domega).
    """
    if C is not None:
        tau = np.asarray(tau, dtype=float)
        C = np.asarray(C, dtype=float)
        if tau[0] != 0 or np.any(np.diff(tau) <= 0):
            raise ValueError("tau grid must start at 0 and increase")
        if check_decay:
            _check_decay(C, "C(tau)")
        if omega is None:
            dtau = np.min(np.diff(tau))
            omega = np.linspace(0.0, math.pi / dtau, len(tau))
        omega = np.asarray(omega, dtype=float)
        Ct = _cos_transform(tau, C, omega, 2.0)
        return SpectralPair(tau=tau, C=C, omega=omega, Ct=Ct)
    if Ct is not None:
        omega = np.asarray(omega, dtype=float)
        Ct = np.asarray(Ct, dtype=float)
        if omega[0] != 0 or np.any(np.diff(omega) <= 0):
            raise ValueError("omega grid must start at 0 and increase")
        if check_decay:
            _check_decay(Ct, "Ct(omega)")
        if tau is None:
            dw = np.min(np.diff(omega))
            tau = np.linspace(0.0, math.pi / dw, len(omega))
        tau = np.asarray(tau, dtype=float)
        C = _cos_transform(omega, Ct, tau, 1.0 / math.pi)
        return SpectralPair(tau=tau, C=C, omega=omega, Ct=Ct)
    raise ValueError("give either (tau, C) or (omega, Ct)")


def lrt_spreading(pair: SpectralPair, A: float, t) -> np.ndarray:
    """delta E(t) = A * sqrt(2 (C(0) - C(t)))."""
    t = np.asarray(t, dtype=float)
    diff = pair.C0 - pair.C_at(t)
    if np.any(diff < 0):
        if np.any(diff < -1e-9 * abs(pair.C0)):
            warnings.warn(f"C(t) exceeds C(0) by up to {-diff.min():.3g}; clamped to 0", RuntimeWarning)
        diff = np.maximum(diff, 0.0)
    return abs(A) * np.sqrt(2.0 * diff)


def kubo_diffusion(pair: SpectralPair, Omega: float, V: float) -> float:
    """D_E = Ct(Omega) V^2 / 2. For linear driving use Omega = 0."""
    return 0.5 * float(pair.Ct_at(Omega)) * V**2


def sinusoid_rms_rate(A: float, Omega: float) -> float:
    return Omega * A / math.sqrt(2)


@dataclass
class EnergyDistribution:
    E: np.ndarray
    g: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        self.E = np.asarray(self.E, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if np.any(self.g <= 0):
            raise ValueError("density of states must be positive on the grid")
        norm = trapezoid(self.rho, self.E)
        if abs(norm - 1) > 1e-6:
            raise ValueError(f"occupation not normalized: integral = {norm}")

    @classmethod
    def normalized(cls, E, g, rho):
        E = np.asarray(E, dtype=float)
        rho = np.asarray(rho, dtype=float)
        return cls(E, g, rho / trapezoid(rho, E))

    @classmethod
    def canonical(cls, E, g, kT):
        g = np.asarray(g, dtype=float)
        return cls.normalized(E, g, g * np.exp(-(np.asarray(E) - np.min(E)) / kT))


def dissipation_rate(dist: EnergyDistribution, D_E, flux_tol: float = 1e-3) -> float:
    """d<H>/dt = -integral g D_E d/dE (rho/g) dE.

    The boundary term of the partial integration is assumed to vanish; when
    it is larger than ``flux_tol`` relative to the result a warning reports it.
    """
    D = np.broadcast_to(np.asarray(D_E, dtype=float), dist.E.shape)
    if np.any(D < 0):
        raise ValueError("D_E must be non-negative")
    ratio = dist.rho / dist.g
    dr = np.gradient(ratio, dist.E)
    integrand = dist.g * D * dr
    rate = -float(trapezoid(integrand, dist.E))
    flux = dist.E * integrand
    boundary = float(abs(flux[-1] - flux[0]))
    if boundary > flux_tol * max(abs(rate), 1e-300) and boundary > 1e-14:
        warnings.warn(f"non-vanishing boundary flux {boundary:.3g} (rate {rate:.3g})", RuntimeWarning)
    return rate


def mu_coefficient(pair: SpectralPair, Omega: float, convention: str = "microcanonical", kT: float | None = None) -> float:
    """Dissipation coefficient mu(Omega), with d<H>/dt = mu V^2.

    microcanonical (default): mu = Ct(Omega)/2, the Kubo coefficient itself.
    canonical: mu = Ct(Omega)/(2 kT), the thermal fluctuation-dissipation form.
    """
    c = float(pair.Ct_at(Omega))
    if convention == "microcanonical":
        return 0.5 * c
    if convention == "canonical":
        if not kT or kT <= 0:
            raise ValueError("canonical convention needs kT > 0")
        return c / (2.0 * kT)
    raise ValueError(f"unknown convention {convention!r}")


@dataclass
class DiffusionFit:
    D_E: float
    stderr: float
    r2: float
    slope_ratio: float
    n_points: int
    diffusive: bool
    reason: str = ""


def estimate_DE_from_run(t, dE, window=None, min_r2: float = 0.9, ratio_band=(0.5, 2.0)) -> DiffusionFit:
    """Fit dE^2 = 2 D_E t + c by least squares inside ``window``.

    The fit is flagged non-diffusive when R^2 < min_r2 or when the slopes of
    the two window halves differ by more than ``ratio_band`` (this catches
    ballistic t^2 growth, which a straight line still fits with high R^2).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(dE, dtype=float) ** 2
    if window is not None:
        sel = (t >= window[0]) & (t <= window[1])
        t, y = t[sel], y[sel]
    if len(t) < 4:
        return DiffusionFit(math.nan, math.nan, math.nan, math.nan, len(t), False, "fewer than 4 points")
    p, cov = np.polyfit(t, y, 1, cov=True)
    res = y - np.polyval(p, t)
    sst = ((y - y.mean()) ** 2).sum()
    r2 = 1.0 - (res**2).sum() / sst if sst > 0 else (1.0 if (res**2).sum() == 0 else 0.0)
    half = len(t) // 2
    s1 = np.polyfit(t[: half + 1], y[: half + 1], 1)[0]
    s2 = np.polyfit(t[half:], y[half:], 1)[0]
    ratio = s2 / s1 if s1 != 0 else math.inf
    reason = ""
    if r2 < min_r2:
        reason = f"R^2 = {r2:.3f} < {min_r2}"
    elif not (ratio_band[0] <= ratio <= ratio_band[1]):
        reason = f"half-window slope ratio {ratio:.3g} outside {ratio_band}"
    D = p[0] / 2
    err = math.sqrt(max(cov[0, 0], 0.0)) / 2
    if reason:
        return DiffusionFit(math.nan, math.nan, r2, ratio, len(t), False, reason)
    return DiffusionFit(D, err, r2, ratio, len(t), True)
