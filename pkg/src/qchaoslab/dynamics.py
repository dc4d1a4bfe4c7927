"""Time evolution under a driving scheme x(t) and the spreading measures.

Models are any object with ``E`` (levels of H(0), which is diagonal in the
working basis), ``B`` (perturbation, sparse or dense), ``hbar``, ``delta``,
``dx_c`` and ``tau_cl``; both WignerModel and ParametricFamily qualify.

The propagator freezes x at the midpoint of each sub-step and applies the
exact exponential of the frozen Hamiltonian, either by a Chebyshev expansion
(any segment) or from a cached eigendecomposition (constant-x segments).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import jv

from .spectra import SpreadingProfile, diagonalize, profile_from_rows


class NumericalError(RuntimeError):
    """A numerical budget (steps, norm drift) could not be met."""


# ---------------------------------------------------------------------------
# driving schemes


@dataclass(frozen=True)
class Linear:
    V: float
    T: float

    @property
    def horizon(self):
        return self.T

    def x(self, t):
        return self.V * np.asarray(t, dtype=float)

    def rate(self, t0, t1):
        return abs(self.V)

    def breakpoints(self):
        return ()


@dataclass(frozen=True)
class RectPulse:
    """x = A on (0, T), zero at t = 0 and again from T on."""

    A: float
    T: float

    @property
    def horizon(self):
        return self.T

    def x(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t > 0) & (t < self.T), self.A, 0.0)

    def rate(self, t0, t1):
        return 0.0

    def breakpoints(self):
        return (0.0, self.T)


@dataclass(frozen=True)
class Triangle:
    """Linear rise to A at T/2 and linear return to 0 at T."""

    A: float
    T: float

    @property
    def horizon(self):
        return self.T

    def x(self, t):
        t = np.asarray(t, dtype=float)
        h = self.T / 2
        up = self.A * t / h
        down = self.A * (self.T - t) / h
        return np.where(t <= h, up, np.where(t <= self.T, down, 0.0))

    def rate(self, t0, t1):
        return 2 * abs(self.A) / self.T

    def breakpoints(self):
        return (self.T / 2,)


@dataclass(frozen=True)
class Sinusoidal:
    A: float
    Omega: float
    cycles: float

    @property
    def horizon(self):
        return self.cycles * 2 * math.pi / self.Omega

    @property
    def rms_rate(self):
        """V = Omega A / sqrt(2)."""
        return self.Omega * abs(self.A) / math.sqrt(2)

    def x(self, t):
        return self.A * np.sin(self.Omega * np.asarray(t, dtype=float))

    def rate(self, t0, t1):
        return abs(self.A) * self.Omega

    def breakpoints(self):
        return ()


@dataclass(frozen=True)
class Composed:
    """Parts played one after the other; each part runs on its own clock."""

    parts: tuple

    @property
    def horizon(self):
        return sum(p.horizon for p in self.parts)

    def _offsets(self):
        return np.concatenate([[0.0], np.cumsum([p.horizon for p in self.parts])])

    def x(self, t):
        t = np.asarray(t, dtype=float)
        off = self._offsets()
        out = np.zeros_like(t)
        for i, p in enumerate(self.parts):
            last = i == len(self.parts) - 1
            sel = (t >= off[i]) & ((t < off[i + 1]) | last)
            if i == 0:
                sel |= t < 0
            out = np.where(sel, p.x(t - off[i]), out)
        return out

    def rate(self, t0, t1):
        off = self._offsets()
        r = 0.0
        for i, p in enumerate(self.parts):
            if off[i] < t1 and off[i + 1] > t0:
                r = max(r, p.rate(max(t0, off[i]) - off[i], min(t1, off[i + 1]) - off[i]))
        return r

    def breakpoints(self):
        off = self._offsets()
        pts = list(off[1:-1])
        for i, p in enumerate(self.parts):
            pts += [off[i] + b for b in p.breakpoints()]
        return tuple(sorted(set(pts)))


@dataclass(frozen=True)
class Mirrored:
    """Path of ``scheme`` traversed backwards: x(t) = scheme.x(T - t)."""

    scheme: object

    @property
    def horizon(self):
        return self.scheme.horizon

    def x(self, t):
        return self.scheme.x(self.scheme.horizon - np.asarray(t, dtype=float))

    def rate(self, t0, t1):
        T = self.scheme.horizon
        return self.scheme.rate(T - t1, T - t0)

    def breakpoints(self):
        T = self.scheme.horizon
        return tuple(T - b for b in self.scheme.breakpoints())


def driving_reversal(forward):
    """Composed scheme: ``forward`` on [0, T] followed by its reversal on [T, 2T].

    A rectangular pulse is undone by the opposite pulse -A; any other path by
    retracing it (a ramp becomes a triangle). Returns (scheme, T).
    """
    if isinstance(forward, RectPulse):
        return Composed((forward, RectPulse(-forward.A, forward.T))), forward.T
    if isinstance(forward, Triangle):
        # the triangle already is a ramp followed by its retrace
        half = forward.T / 2
        return forward, half
    return Composed((forward, Mirrored(forward))), forward.horizon


@dataclass(frozen=True)
class TimeReversal:
    """U = U[scheme_B]^-1 U[scheme_A] (the echo construction)."""

    scheme_A: object
    scheme_B: object

    @property
    def horizon(self):
        return self.scheme_A.horizon


# ---------------------------------------------------------------------------
# propagator


@dataclass
class StepControl:
    dx_max: float | None = None  # default dx_c / 10
    dt_max: float | None = None  # default tau_cl / 20
    max_steps: int = 2_000_000
    norm_tol: float = 1e-8
    eigen_route_max_N: int = 3000  # constant segments use a cached eigh below this size

    def resolve(self, model):
        dx = self.dx_max if self.dx_max is not None else model.dx_c / 10
        dt = self.dt_max if self.dt_max is not None else model.tau_cl / 20
        return dx, dt


class _Operator:
    def __init__(self, model):
        self.model = model
        self.E = np.asarray(model.E, dtype=float)
        B = model.B
        self.B = B.tocsr() if sp.issparse(B) else np.asarray(B, dtype=float)
        absB = abs(self.B) if sp.issparse(self.B) else np.abs(self.B)
        self.bmax = float(np.asarray(absB.sum(axis=1)).max())
        self.hbar = model.hbar
        self._eig = {}

    def eig(self, x):
        key = float(x)
        if key not in self._eig:
            if len(self._eig) > 4:
                self._eig.clear()
            s = diagonalize(self.model.hamiltonian(key), check=False)
            self._eig[key] = (s.eigenvalues, s.vectors)
        return self._eig[key]

    def expm_eig(self, x, psi, dt, sign=-1):
        w, V = self.eig(x)
        return V @ (np.exp(sign * 1j * w * dt / self.hbar)[:, None] * (V.T @ psi))

    def expm_cheb(self, x, psi, dt, sign=-1):
        """exp(sign * i H(x) dt / hbar) psi by Chebyshev expansion with Gershgorin bounds."""
        E, B = self.E, self.B
        lo = E.min() - abs(x) * self.bmax
        hi = E.max() + abs(x) * self.bmax
        c = 0.5 * (hi + lo)
        h = max(0.5 * (hi - lo), 1e-300)
        Ec = (E - c)[:, None] / h
        xs = x / h

        def Hs(v):
            return Ec * v + xs * (B @ v)

        a = h * dt / self.hbar
        K = int(a + 6 * a ** (1 / 3) + 16)
        coef = jv(np.arange(K + 1), a)
        ph = sign * 1j  # (-i)^k for forward, (+i)^k for backward
        p0 = psi
        p1 = Hs(psi)
        out = coef[0] * p0 + 2 * ph * coef[1] * p1
        fac = ph
        for k in range(2, K + 1):
            p2 = 2 * Hs(p1) - p0
            fac *= ph
            out += 2 * fac * coef[k] * p2
            p0, p1 = p1, p2
            if k > a and abs(coef[k]) < 1e-17:
                break
        return np.exp(sign * 1j * c * dt / self.hbar) * out


def _segments(scheme, t0, t1, bps):
    pts = [t0] + [b for b in bps if t0 < b < t1] + [t1]
    return list(zip(pts[:-1], pts[1:]))


def _constant(scheme, a, b):
    return scheme.rate(a, b) == 0.0


def _evolve(op, scheme, psi, t0, t1, ctrl: StepControl, inverse=False):
    """Evolve psi from t0 to t1 (t1 > t0). With ``inverse`` apply the adjoint."""
    dx_max, dt_max = ctrl.resolve(op.model)
    segs = _segments(scheme, t0, t1, scheme.breakpoints())
    plan = []
    for a, b in segs:
        L = b - a
        if L <= 0:
            continue
        const = _constant(scheme, a, b)
        if const and op.model.N <= ctrl.eigen_route_max_N:
            plan.append((a, b, 1, "eig"))
            continue
        n = math.ceil(L / dt_max) if dt_max else 1
        rate = scheme.rate(a, b)
        if rate > 0 and dx_max:
            n = max(n, math.ceil(rate * L / dx_max))
        plan.append((a, b, max(n, 1), "cheb"))
    if sum(p[2] for p in plan) > ctrl.max_steps:
        need = sum(p[2] for p in plan)
        raise NumericalError(f"step budget: {need} sub-steps needed, max_steps = {ctrl.max_steps}")
    if inverse:
        plan = plan[::-1]
    sign = 1 if inverse else -1
    for a, b, n, route in plan:
        h = (b - a) / n
        mids = a + (np.arange(n) + 0.5) * h
        if inverse:
            mids = mids[::-1]
        xs = scheme.x(mids)
        for xm in np.atleast_1d(xs):
            if route == "eig":
                psi = op.expm_eig(float(xm), psi, h, sign)
            else:
                psi = op.expm_cheb(float(xm), psi, h, sign)
    return psi


@dataclass
class StateTrajectory:
    t: np.ndarray
    states: list  # N x k arrays, one per time
    basis: str  # representation of the stored vectors
    norms: np.ndarray  # (len(t), k)
    scheme: object = None
    ms: np.ndarray | None = None


def eigenstates(model, ms) -> np.ndarray:
    """Columns e_m: eigenstates of H(0) in the working basis."""
    ms = np.atleast_1d(np.asarray(ms, dtype=int))
    psi = np.zeros((model.N, len(ms)), dtype=complex)
    psi[ms, np.arange(len(ms))] = 1.0
    return psi


def propagate(model, scheme, psi0, t_grid, control: StepControl | None = None, ms=None) -> StateTrajectory:
    """States U(t) psi0 at every t in ``t_grid`` (increasing, starting >= 0)."""
    ctrl = control or StepControl()
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be non-negative and increasing")
    psi = np.array(psi0, dtype=complex)
    if psi.ndim == 1:
        psi = psi[:, None]
    n0 = np.linalg.norm(psi, axis=0)
    if np.any(np.abs(n0 - 1) > 1e-12):
        raise ValueError("initial state not normalized")
    op = _Operator(model)
    out, norms = [], []
    t = 0.0
    if isinstance(scheme, TimeReversal):
        # forward with A to t, then backward with B from t to 0: each output time needs its own echo
        for tt in t_grid:
            phi = _evolve(op, scheme.scheme_A, psi, 0.0, tt, ctrl) if tt > 0 else psi
            phi = _evolve(op, scheme.scheme_B, phi, 0.0, tt, ctrl, inverse=True) if tt > 0 else phi
            out.append(phi)
            norms.append(np.linalg.norm(phi, axis=0))
    else:
        for tt in t_grid:
            if tt > t:
                psi = _evolve(op, scheme, psi, t, tt, ctrl)
                t = tt
            out.append(psi.copy())
            norms.append(np.linalg.norm(psi, axis=0))
    norms = np.array(norms)
    drift = np.abs(norms - 1).max()
    if drift > ctrl.norm_tol:
        raise NumericalError(f"norm drift {drift:.3g} exceeds {ctrl.norm_tol}")
    return StateTrajectory(t_grid, out, "H(0) eigenbasis", norms, scheme, None if ms is None else np.asarray(ms))


# ---------------------------------------------------------------------------
# spreading profiles and measures


def spreading_profile_t(traj: StateTrajectory, model, basis: str = "instantaneous", ms=None):
    """P_t(n|m) averaged over the prepared states, one SpreadingProfile per time.

    ``basis="instantaneous"`` projects on eigenstates of H(x(t)); ``"initial"``
    keeps the H(0) basis, i.e. energies measured after x is switched back to 0.
    """
    ms = traj.ms if ms is None else np.asarray(ms)
    if ms is None:
        raise ValueError("reference indices ms are required")
    op = _Operator(model)
    profiles = []
    for tt, psi in zip(traj.t, traj.states):
        if basis == "initial" or traj.scheme is None or isinstance(traj.scheme, TimeReversal):
            amp = psi
        elif basis == "instantaneous":
            x = float(traj.scheme.x(tt))
            if x == 0.0:
                amp = psi
            else:
                _, V = op.eig(x)
                amp = V.T @ psi
        else:
            raise ValueError(f"unknown basis {basis!r}")
        P = (np.abs(amp) ** 2).T
        profiles.append(profile_from_rows(P, ms, model.delta))
    return profiles


@dataclass
class TimeSeriesMeasures:
    t: np.ndarray
    survival: np.ndarray
    gamma: np.ndarray
    dE: np.ndarray

    def rows(self):
        return np.column_stack([self.t, self.survival, self.gamma, self.dE])


def measures(profiles, t) -> TimeSeriesMeasures:
    return TimeSeriesMeasures(
        t=np.asarray(t, dtype=float),
        survival=np.array([p.survival for p in profiles]),
        gamma=np.array([p.gamma for p in profiles]),
        dE=np.array([p.dE for p in profiles]),
    )


# ---------------------------------------------------------------------------
# survival amplitude and fidelity


@dataclass
class AmplitudeSeries:
    t: np.ndarray
    F: np.ndarray  # (len(t), k)

    @property
    def probability(self) -> np.ndarray:
        """Ensemble-averaged |F|^2."""
        return (np.abs(self.F) ** 2).mean(axis=1)


def survival_amplitude(model, A: float, ms, t_grid, direct_check: bool = False, tol: float = 1e-6) -> AmplitudeSeries:
    """F(t) = <m|exp(-i H(A) t/hbar)|m> via the LDOS of |m> in the H(A) eigenbasis.

    With ``direct_check`` the amplitudes are recomputed by propagation and the
    two routes are required to agree within ``tol`` in |F|.
    """
    ms = np.atleast_1d(np.asarray(ms, dtype=int))
    t = np.asarray(t_grid, dtype=float)
    s = diagonalize(model.hamiltonian(A), check=False)
    w = s.eigenvalues
    ldos = s.vectors[ms, :] ** 2  # (k, n)
    phase = np.exp(-1j * np.outer(t, w) / model.hbar)  # (t, n)
    F = phase @ ldos.T
    if direct_check:
        T = t.max() * (1 + 1e-9) + 1e-12
        traj = propagate(model, RectPulse(A, T), eigenstates(model, ms), t, StepControl(eigen_route_max_N=0))
        Fd = np.array([psi[ms, np.arange(len(ms))] for psi in traj.states])
        err = np.abs(np.abs(Fd) - np.abs(F)).max()
        if err > tol:
            raise NumericalError(f"spectral and direct survival amplitudes differ by {err:.3g}")
    return AmplitudeSeries(t, F)


def fidelity(model, scheme_A, scheme_B, psi0, t_grid, control: StepControl | None = None) -> AmplitudeSeries:
    """F(t) = <U_B(t) psi0 | U_A(t) psi0> from two forward propagations."""
    hA, hB = scheme_A.horizon, scheme_B.horizon
    if abs(hA - hB) > 1e-12 * max(abs(hA), abs(hB), 1.0):
        raise ValueError(f"scheme horizons differ: {hA} vs {hB}")
    ta = propagate(model, scheme_A, psi0, t_grid, control)
    tb = propagate(model, scheme_B, psi0, t_grid, control)
    F = np.array([np.einsum("nk,nk->k", b.conj(), a) for a, b in zip(ta.states, tb.states)])
    return AmplitudeSeries(np.asarray(t_grid, dtype=float), F)


@dataclass
class ReversalResult:
    measures: TimeSeriesMeasures
    T: float
    dE_T: float
    dE_2T: float

    @property
    def ratio(self) -> float:
        return self.dE_2T / self.dE_T if self.dE_T > 0 else math.inf


def driving_reversal_run(model, pulse, ms, n_out: int = 41, control: StepControl | None = None) -> ReversalResult:
    """Evolve with U[x_rev] U[x] and report the residual spreading at 2T.

    Spreading is measured in the H(0) basis (the x(0) energy shell) so that
    an adiabatic excursion shows a large dE at the turning point T and little
    at 2T.
    """
    scheme, T = driving_reversal(pulse)
    ms = np.atleast_1d(np.asarray(ms, dtype=int))
    t = np.unique(np.concatenate([np.linspace(0, 2 * T, n_out), [T, 2 * T]]))
    traj = propagate(model, scheme, eigenstates(model, ms), t, control, ms=ms)
    prof = spreading_profile_t(traj, model, basis="initial")
    m = measures(prof, t)
    iT = int(np.argmin(np.abs(t - T)))
    return ReversalResult(m, T, float(m.dE[iT]), float(m.dE[-1]))
