"""Diagonalization, parametric kernels (LDOS), band profiles and parametric scales."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp


class WindowError(ValueError):
    """Reference window too close to the spectral edge."""


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    vectors: np.ndarray
    provenance: dict = field(default_factory=dict)


def _dense(H):
    return H.toarray() if sp.issparse(H) else np.asarray(H, dtype=float)


def diagonalize(H, window=None, check: bool = True, provenance: dict | None = None) -> Spectrum:
    """Eigendecomposition of a real symmetric matrix.

    ``window`` is an optional (lo, hi) index range (inclusive) of eigenpairs.
    With ``check`` the orthonormality and residual contracts are verified.
    """
    H = _dense(H)
    if H.shape[0] != H.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    scale = max(np.abs(H).max(), 1e-300)
    if np.abs(H - H.T).max() > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    if window is None:
        w, V = np.linalg.eigh(H)
    else:
        w, V = sla.eigh(H, subset_by_index=[int(window[0]), int(window[1])])
    if check:
        k = V.shape[1]
        ortho = np.abs(V.T @ V - np.eye(k)).max()
        if ortho > 1e-10:
            raise ArithmeticError(f"orthonormality residual {ortho:.3g} > 1e-10")
        norm = np.linalg.norm(H, 2) if H.shape[0] <= 600 else np.abs(H).sum(1).max()
        res = np.linalg.norm(H @ V - V * w, axis=0).max()
        if res > 1e-9 * max(norm, 1e-300):
            raise ArithmeticError(f"eigen residual {res:.3g} exceeds 1e-9*|H|")
    return Spectrum(w, V, dict(provenance or {}))


@dataclass
class SpreadingProfile:
    r: np.ndarray
    P: np.ndarray
    delta: float
    n_ref: int = 1

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=int)
        self.P = np.asarray(self.P, dtype=float)
        if len(self.r) and np.any(np.diff(self.r) != 1):
            raise ValueError("offsets must be contiguous")
        if np.any(self.P < -1e-15):
            raise ValueError("negative probability")
        if abs(self.P.sum() - 1.0) > 1e-8:
            raise ValueError(f"profile not normalized: sum = {self.P.sum()!r}")

    @classmethod
    def delta_profile(cls, delta: float):
        return cls(np.array([0]), np.array([1.0]), delta)

    def moment(self, k: int) -> float:
        return float((self.r.astype(float) ** k * self.P).sum())

    @property
    def survival(self) -> float:
        i = np.searchsorted(self.r, 0)
        return float(self.P[i]) if i < len(self.r) and self.r[i] == 0 else 0.0

    @property
    def dE(self) -> float:
        """delta E = Delta * sqrt(sum r^2 P)."""
        return self.delta * math.sqrt(max(self.moment(2), 0.0))

    def core(self):
        """Smallest set {r*-k..r*+k} around the maximum r* holding >= 50% probability.

        Returns (k, levels) with levels = 2k+1.
        """
        i0 = int(np.argmax(self.P))
        c = np.concatenate([[0.0], np.cumsum(self.P)])
        n = len(self.P)
        for k in range(n):
            lo, hi = max(i0 - k, 0), min(i0 + k, n - 1)
            if c[hi + 1] - c[lo] >= 0.5 - 1e-12:
                return k, 2 * k + 1
        return n, 2 * n + 1

    @property
    def gamma(self) -> float:
        """50% width in energy units: 2k*Delta (zero for a single-level core)."""
        return 2 * self.core()[0] * self.delta

    @property
    def gamma_levels(self) -> int:
        return self.core()[1]

    def kurtosis(self) -> float:
        """Fourth-moment ratio m4/m2^2 about the mean; nan for a single-level profile."""
        mu = self.moment(1)
        d = self.r - mu
        m2 = (d**2 * self.P).sum()
        m4 = (d**4 * self.P).sum()
        return float(m4 / m2**2) if m2 > 0 else math.nan


def profile_from_rows(P_nm: np.ndarray, ms, delta: float) -> SpreadingProfile:
    """Average rows P(n|m) (shape len(ms) x N, n = level index) into P(r), r = n - m."""
    P_nm = np.asarray(P_nm)
    ms = np.asarray(ms, dtype=int)
    N = P_nm.shape[1]
    rmin, rmax = -int(ms.max()), N - 1 - int(ms.min())
    acc = np.zeros(rmax - rmin + 1)
    for row, m in zip(P_nm, ms):
        acc[-m - rmin : -m - rmin + N] += row
    acc /= len(ms)
    nz = np.flatnonzero(acc > 0)
    if len(nz) == 0:
        raise ValueError("empty profile")
    lo, hi = min(nz[0], -rmin), max(nz[-1], -rmin)
    r = np.arange(rmin, rmax + 1)[lo : hi + 1]
    P = acc[lo : hi + 1]
    return SpreadingProfile(r, P, delta, len(ms))


def default_edge_margin(b: int, dx: float, dx_c: float, sigma: float, delta: float) -> int:
    """Levels to exclude at each spectral edge before choosing reference states.

    2b plus four times the expected profile width; the width is the Wigner-regime
    core estimate (dx/dx_c)^2 levels but never more than the spread
    |dx|*sigma*sqrt(2b)/Delta given by the variance identity.
    """
    core = (dx / dx_c) ** 2
    spread = abs(dx) * sigma * math.sqrt(2 * b) / delta
    return int(math.ceil(2 * b + 4 * min(core, spread)))


def reference_states(N: int, fraction: float = 0.2, margin: int = 0, count: int | None = None):
    """Reference indices: ``fraction`` of levels centred mid-spectrum, optionally thinned to ``count``."""
    width = max(1, int(round(fraction * N)))
    lo = N // 2 - width // 2
    hi = lo + width - 1
    if lo < margin or hi > N - 1 - margin:
        raise WindowError(
            f"reference window [{lo}, {hi}] violates edge margin {margin} for N={N}; "
            f"increase N to at least {2 * margin + width} or narrow the window"
        )
    ms = np.arange(lo, hi + 1)
    if count is not None and count < len(ms):
        ms = ms[np.linspace(0, len(ms) - 1, count).round().astype(int)]
    return ms


def parametric_kernel(model, x0: float, x: float, reference_window=None, margin: int | None = None) -> SpreadingProfile:
    """P(n|m) = |<n(x)|m(x0)>|^2 averaged over reference states m, as P(r).

    ``reference_window`` is a fraction of N (default 0.2) or an explicit array of
    level indices. States are labelled by the rank of their eigenvalue.
    """
    N = model.N
    spec = getattr(model, "spec", None)
    if margin is None:
        if spec is not None and hasattr(spec, "b"):
            margin = default_edge_margin(spec.b, x - x0, model.dx_c, spec.sigma, spec.delta)
        else:
            margin = 0
    if reference_window is None or np.isscalar(reference_window):
        frac = 0.2 if reference_window is None else float(reference_window)
        ms = reference_states(N, frac, margin)
    else:
        ms = np.asarray(reference_window, dtype=int)
        if ms.min() < margin or ms.max() > N - 1 - margin:
            raise WindowError(f"reference states within {margin} levels of the spectral edge")
    if x == x0:
        P = np.zeros((len(ms), N))
        P[np.arange(len(ms)), ms] = 1.0
        return profile_from_rows(P, ms, model.delta)
    s1 = diagonalize(model.hamiltonian(x), check=False)
    if x0 == 0 and hasattr(model, "E") and np.all(np.diff(model.E) > 0):
        # H(0) = diag(E) with sorted E: its eigenbasis is the working basis
        P = s1.vectors[ms, :] ** 2
    else:
        s0 = diagonalize(model.hamiltonian(x0), check=False)
        P = ((s1.vectors.T @ s0.vectors[:, ms]) ** 2).T
    return profile_from_rows(P, ms, model.delta)


@dataclass
class BandProfile:
    omega: np.ndarray  # bin centres
    mean_sq: np.ndarray  # nan marks empty bins
    counts: np.ndarray
    prediction: np.ndarray | None = None  # (Delta / 2 pi hbar) Ct(omega)

    @property
    def gaps(self) -> np.ndarray:
        return np.flatnonzero(self.counts == 0)


def band_profile(B, energies=None, hbar: float = 1.0, delta: float | None = None, bin_width: float | None = None,
                 omega_max: float | None = None, rows=None, classical=None) -> BandProfile:
    """Mean |B_nm|^2 binned by omega = (E_n - E_m)/hbar >= 0.

    ``B`` must be expressed in the eigenbasis with eigenvalues ``energies``
    (default: equispaced levels with spacing ``delta``). ``rows`` restricts the
    reference index m. Bins default to one level spacing. If a classical
    SpectralPair is supplied the semiclassical prediction (Delta/2 pi hbar) Ct,
    averaged over each bin, is returned alongside.
    """
    Bd = _dense(B)
    N = Bd.shape[0]
    if energies is None:
        if delta is None:
            delta = 1.0
        energies = np.arange(N) * delta
    energies = np.asarray(energies, dtype=float)
    if delta is None:
        delta = (energies.max() - energies.min()) / max(N - 1, 1)
    if bin_width is None:
        bin_width = delta / hbar
    rows = np.arange(N) if rows is None else np.asarray(rows, dtype=int)
    w = (energies[None, :] - energies[rows, None]) / hbar
    b2 = Bd[rows, :] ** 2
    sel = w > -0.5 * bin_width
    sel[np.arange(len(rows)), rows] = False
    w, b2 = np.abs(w[sel]), b2[sel]
    if omega_max is None:
        omega_max = w.max() if len(w) else bin_width
    nb = int(math.floor(omega_max / bin_width + 0.5)) + 1
    idx = np.floor(w / bin_width + 0.5).astype(int)
    keep = idx < nb
    counts = np.bincount(idx[keep], minlength=nb)
    sums = np.bincount(idx[keep], weights=b2[keep], minlength=nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    centres = np.arange(nb) * bin_width
    pred = None
    if classical is not None:
        inside = centres <= classical.omega.max()
        pred = np.full(nb, np.nan)
        pred[inside] = delta / (2 * math.pi * hbar) * bin_average(classical, centres[inside], bin_width)
    return BandProfile(centres, mean, counts, pred)


def bin_average(pair, centres, width: float) -> np.ndarray:
    """Mean of pair.Ct over [c - width/2, c + width/2) for each centre, so a sampled
    spectrum is compared with a binned one at the same resolution. Falls back to
    interpolation where a bin holds no spectral sample."""
    centres = np.asarray(centres, dtype=float)
    lo = np.searchsorted(pair.omega, centres - 0.5 * width)
    hi = np.searchsorted(pair.omega, centres + 0.5 * width)
    cs = np.concatenate([[0.0], np.cumsum(pair.Ct)])
    n = hi - lo
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (cs[hi] - cs[lo]) / n
    empty = n == 0
    out[empty] = pair.Ct_at(centres[empty])
    return out


@dataclass(frozen=True)
class ParametricScales:
    dx_c: float
    dx_prt: float
    delta_b: float
    tau_cl: float

    @property
    def b(self) -> float:
        return (self.dx_prt / self.dx_c) ** 2

    @property
    def omega_cl(self) -> float:
        """Band-edge frequency 1/tau_cl = Delta_b/hbar."""
        return 1.0 / self.tau_cl


def critical_scales(spec) -> ParametricScales:
    dx_c = spec.delta / spec.sigma
    return ParametricScales(
        dx_c=dx_c,
        dx_prt=math.sqrt(spec.b) * dx_c,
        delta_b=spec.b * spec.delta,
        tau_cl=spec.hbar / (spec.b * spec.delta),
    )


REGIMES = ("standard-perturbative", "core-tail", "non-perturbative", "crossover")


def classify_profile(profile: SpreadingProfile, scales: ParametricScales, factor: float = 3.0) -> str:
    """Label a profile by comparing its core width and spread with Delta and Delta_b.

    ``factor`` realizes "much smaller than"; "of the order or larger" means at
    least 1/2 of the reference value. Core width is counted in levels
    (2k+1) times Delta so a one-level core is standard-perturbative.
    """
    d = profile.delta
    levels = profile.gamma_levels
    gam = levels * d
    dE = profile.dE
    db = scales.delta_b
    if levels <= 2:
        return "standard-perturbative"
    if gam * factor <= dE and dE * factor <= db:
        return "core-tail"
    if dE >= 0.5 * db and gam >= 0.5 * db and dE >= gam / factor:
        return "non-perturbative"
    return "crossover"
