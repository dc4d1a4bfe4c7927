"""Classical baselines: Sinai-type billiards and the 2DW flow.

The billiard is a W x H rectangle with disc scatterers. Motion is event
driven: free flight to the next boundary, specular reflection there. A
boundary deformation field D(s) turns the collision record into the impulse
train F(t) = sum_j 2 m v_perp,j D(s_j) delta(t - t_j).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .lrt import SpectralPair, fourier_pair

log = logging.getLogger(__name__)

WALLS = ("bottom", "right", "top", "left")
_WALL_NORMALS = np.array([(0.0, -1.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)])


@dataclass(frozen=True)
class BilliardSystem:
    W: float = 1.0
    H: float = 1.0
    discs: tuple = ((0.5, 0.5, 0.35),)  # (cx, cy, R)
    mass: float = 1.0
    E: float = 0.5

    def __post_init__(self):
        if not (self.W > 0 and self.H > 0 and self.mass > 0 and self.E > 0):
            raise ValueError("W, H, mass and E must be positive")
        for i, (cx, cy, R) in enumerate(self.discs):
            if not (R > 0 and cx - R > 0 and cx + R < self.W and cy - R > 0 and cy + R < self.H):
                raise ValueError(f"disc {i} is not strictly inside the rectangle")
            for j in range(i):
                dx, dy = cx - self.discs[j][0], cy - self.discs[j][1]
                if math.hypot(dx, dy) <= R + self.discs[j][2]:
                    raise ValueError(f"discs {j} and {i} overlap")

    @property
    def speed(self) -> float:
        return math.sqrt(2 * self.E / self.mass)

    @property
    def area(self) -> float:
        return self.W * self.H - sum(math.pi * R * R for _, _, R in self.discs)

    @property
    def perimeter(self) -> float:
        return 2 * (self.W + self.H) + sum(2 * math.pi * R for _, _, R in self.discs)

    def mean_free_path(self) -> float:
        """Boltzmann-type estimate pi * area / perimeter for a 2D billiard."""
        return math.pi * self.area / self.perimeter

    def with_speed(self, v: float) -> "BilliardSystem":
        return BilliardSystem(self.W, self.H, self.discs, self.mass, 0.5 * self.mass * v * v)

    def inside(self, x, y) -> bool:
        if not (0 < x < self.W and 0 < y < self.H):
            return False
        return all((x - cx) ** 2 + (y - cy) ** 2 > R * R for cx, cy, R in self.discs)

    def arc_length(self, boundary: int, x: float, y: float) -> float:
        W, H = self.W, self.H
        if boundary == 0:
            return x
        if boundary == 1:
            return W + y
        if boundary == 2:
            return W + H + (W - x)
        if boundary == 3:
            return 2 * W + H + (H - y)
        s = 2 * (W + H)
        for k in range(boundary - 4):
            s += 2 * math.pi * self.discs[k][2]
        cx, cy, R = self.discs[boundary - 4]
        return s + R * (math.atan2(y - cy, x - cx) % (2 * math.pi))


@dataclass
class CollisionSeries:
    t: np.ndarray
    s: np.ndarray
    v_perp: np.ndarray
    boundary: np.ndarray  # 0..3 walls (bottom, right, top, left), 4+k disc k
    pos: np.ndarray  # (n, 2)
    normal: np.ndarray  # (n, 2) outward normal of the billiard domain
    T: float
    speed_defect: float = 0.0  # max per-event |(|v'| - |v|)| / |v|
    grazing: int = 0
    final_state: tuple = ()

    def __len__(self):
        return len(self.t)


def random_initial(system: BilliardSystem, rng) -> tuple:
    v = system.speed
    while True:
        x, y = rng.uniform(0, system.W), rng.uniform(0, system.H)
        if system.inside(x, y):
            th = rng.uniform(0, 2 * math.pi)
            return (x, y, v * math.cos(th), v * math.sin(th))


def _next_event(system, x, y, vx, vy):
    """Time and boundary id of the next collision from (x, y) with velocity (vx, vy)."""
    W, H = system.W, system.H
    tmin, hit = math.inf, -1
    if vx > 0:
        tmin, hit = (W - x) / vx, 1
    elif vx < 0:
        tmin, hit = -x / vx, 3
    if vy > 0:
        t = (H - y) / vy
        if t < tmin:
            tmin, hit = t, 2
    elif vy < 0:
        t = -y / vy
        if t < tmin:
            tmin, hit = t, 0
    v2 = vx * vx + vy * vy
    for k, (cx, cy, R) in enumerate(system.discs):
        dx, dy = x - cx, y - cy
        b = dx * vx + dy * vy
        if b >= 0:
            continue
        c = dx * dx + dy * dy - R * R
        disc = b * b - v2 * c
        if disc <= 0:
            continue
        t = c / (-b + math.sqrt(disc))  # smaller root, stable form
        if t < tmin:
            tmin, hit = t, 4 + k
    return max(tmin, 0.0), hit


def _reflect(system, x, y, vx, vy, hit):
    """Specular reflection; returns new velocity, v_perp and the domain outward normal."""
    if hit < 4:
        nx, ny = _WALL_NORMALS[hit]
        if hit in (1, 3):
            return -vx, vy, abs(vx), nx, ny
        return vx, -vy, abs(vy), nx, ny
    cx, cy, R = system.discs[hit - 4]
    ux, uy = x - cx, y - cy
    r = math.hypot(ux, uy)
    ux, uy = ux / r, uy / r  # points into the domain
    vn = vx * ux + vy * uy
    return vx - 2 * vn * ux, vy - 2 * vn * uy, -vn, -ux, -uy


def _run(system, state, T=None, n_events=None, record=True, grazing_tol=1e-9):
    x, y, vx, vy = state
    v0 = math.hypot(vx, vy)
    t = 0.0
    ts, ss, vps, bs, ps, ns = [], [], [], [], [], []
    defect = 0.0
    grazing = 0
    count = 0
    while True:
        dt, hit = _next_event(system, x, y, vx, vy)
        if hit < 0:
            raise ValueError("particle at rest")
        if T is not None and t + dt > T:
            rem = T - t
            x, y, t = x + vx * rem, y + vy * rem, T
            break
        t += dt
        x, y = x + vx * dt, y + vy * dt
        # corner: both walls reached simultaneously
        nvx, nvy, vp, nx, ny = _reflect(system, x, y, vx, vy, hit)
        if hit < 4:
            x = min(max(x, 0.0), system.W)
            y = min(max(y, 0.0), system.H)
        if vp < grazing_tol * v0:
            grazing += 1
            log.info("grazing collision at t=%g on boundary %d; nudged", t, hit)
            x -= nx * 1e-12 * system.W
            y -= ny * 1e-12 * system.W
            continue
        v_old = math.hypot(vx, vy)
        vx, vy = nvx, nvy
        defect = max(defect, abs(math.hypot(vx, vy) - v_old) / v_old)
        if record:
            ts.append(t)
            ss.append(system.arc_length(hit, x, y))
            vps.append(vp)
            bs.append(hit)
            ps.append((x, y))
            ns.append((nx, ny))
        count += 1
        if n_events is not None and count >= n_events:
            break
    return (x, y, vx, vy), t, (ts, ss, vps, bs, ps, ns), defect, grazing


def evolve_billiard(system: BilliardSystem, initial, T=None, n_events=None) -> CollisionSeries:
    """Event-driven evolution for a duration T or until ``n_events`` collisions."""
    x, y, vx, vy = initial
    if not system.inside(x, y):
        raise ValueError("initial point outside the billiard domain")
    v = math.hypot(vx, vy)
    if abs(v - system.speed) > 1e-9 * system.speed:
        vx, vy = vx * system.speed / v, vy * system.speed / v
    if T is None and n_events is None:
        raise ValueError("give T or n_events")
    final, t_end, rec, defect, grazing = _run(system, (x, y, vx, vy), T, n_events)
    ts, ss, vps, bs, ps, ns = rec
    return CollisionSeries(
        t=np.array(ts), s=np.array(ss), v_perp=np.array(vps), boundary=np.array(bs, dtype=int),
        pos=np.array(ps).reshape(-1, 2), normal=np.array(ns).reshape(-1, 2), T=t_end,
        speed_defect=defect, grazing=grazing, final_state=final,
    )


def mean_collision_time(series: CollisionSeries) -> float:
    return series.T / max(len(series), 1)


@dataclass
class LyapunovEstimate:
    exponent: float
    stderr: float
    n_renorm: int
    chaotic: bool


def lyapunov(system: BilliardSystem, initial, T: float, d0: float = 1e-9, d_max: float = 1e-5,
             fit_from: float = 0.5, seed=0) -> LyapunovEstimate:
    """Two-trajectory (Benettin) estimate of the largest Lyapunov exponent.

    The partner is compared with the reference after each collision of both,
    with the partner extrapolated along its free flight to the reference time,
    so the two are never compared across a reflection one of them has not had
    yet. Phase-space distance combines position and velocity direction,
    d^2 = |dr|^2 + L^2 |d(v/|v|)|^2 with L = W. The partner is pulled back to
    d0 whenever d exceeds ``d_max``. The exponent is the slope of the
    accumulated log-stretch against time over the last ``1 - fit_from`` of the
    run; integrable motion (linear separation) then gives a slope that decays
    like 1/T. Times scale with 1/v, hence the exponent scales exactly with the
    speed.
    """
    x, y, vx, vy = initial
    if not system.inside(x, y):
        raise ValueError("initial point outside the billiard domain")
    rng = np.random.default_rng(seed)
    v = system.speed
    L = system.W
    a = np.array([x, y, vx, vy]) / np.array([1, 1, math.hypot(vx, vy), math.hypot(vx, vy)])

    def perturb(base, d):
        for _ in range(1000):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            th = math.atan2(base[3], base[2]) + d * u[2] / L
            p = np.array([base[0] + d * u[0], base[1] + d * u[1], math.cos(th), math.sin(th)])
            if system.inside(p[0], p[1]):
                return p
        raise ValueError("cannot place the partner trajectory inside the domain")

    def dist(p, q):
        return math.sqrt((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 + L * L * ((p[2] - q[2]) ** 2 + (p[3] - q[3]) ** 2))

    def step(s):
        # one collision (or the end of the run), unit-speed state in, unit-speed state and elapsed time out
        f, dt = _run(system, (s[0], s[1], s[2] * v, s[3] * v), n_events=1, record=False)[:2]
        return np.array([f[0], f[1], f[2] / v, f[3] / v]), dt

    b = perturb(a, d0)
    ta = tb = 0.0
    total = 0.0
    times, stretch, chunk_logs = [0.0], [0.0], []
    while ta < T:
        a, dt = step(a)
        ta += dt
        b, dt = step(b)
        tb += dt
        # synchronize the partner on its free flight
        bs = b.copy()
        bs[:2] += bs[2:] * v * (ta - tb)
        d = dist(a, bs)
        times.append(ta)
        stretch.append(total + math.log(d / d0))
        if d > d_max:
            g = math.log(d / d0)
            total += g
            chunk_logs.append(g)
            nb = a + (bs - a) * (d0 / d)
            th = math.atan2(nb[3], nb[2])
            nb[2], nb[3] = math.cos(th), math.sin(th)
            b = nb if system.inside(nb[0], nb[1]) else perturb(a, d0)
            tb = ta
    times, stretch = np.array(times), np.array(stretch)
    sel = times >= fit_from * times[-1]
    if sel.sum() < 3:
        raise ValueError("run too short: fewer than three collisions in the fit window")
    (lam, _), cov = np.polyfit(times[sel], stretch[sel], 1, cov=True)
    # successive collisions are strongly correlated, so scale the fit error by the sample count
    err = math.sqrt(cov[0, 0] * sel.sum())
    chaotic = bool(lam > 3 * err and lam > 0.01 * v / L)
    if not chaotic:
        log.info("exponent %g consistent with zero (stderr %g): non-chaotic geometry", lam, err)
    return LyapunovEstimate(float(lam), float(err), len(chunk_logs), chaotic)


# ---------------------------------------------------------------------------
# deformation fields: D(event) per unit x, normal displacement of the boundary


@dataclass(frozen=True)
class DilationField:
    """Uniform dilation about ``center``: D = n_out . (r - center)."""

    center: tuple = (0.5, 0.5)

    def __call__(self, series: CollisionSeries, system=None) -> np.ndarray:
        r = series.pos - np.asarray(self.center)
        return (series.normal * r).sum(1)


@dataclass(frozen=True)
class TranslationField:
    """Rigid translation of the whole boundary along ``direction``: D = n_out . e."""

    direction: tuple = (1.0, 0.0)

    def __call__(self, series: CollisionSeries, system=None) -> np.ndarray:
        e = np.asarray(self.direction, dtype=float)
        return series.normal @ (e / np.linalg.norm(e))


@dataclass(frozen=True)
class BumpField:
    """Localized smooth bump sin^2 on boundary ``boundary`` between arc lengths s_lo and s_hi."""

    boundary: int = 0
    s_lo: float = 0.1
    s_hi: float = 0.4

    def __call__(self, series: CollisionSeries, system=None) -> np.ndarray:
        u = (series.s - self.s_lo) / (self.s_hi - self.s_lo)
        on = (series.boundary == self.boundary) & (u >= 0) & (u <= 1)
        return np.where(on, np.sin(math.pi * u) ** 2, 0.0)


@dataclass(frozen=True)
class ZeroField:
    def __call__(self, series: CollisionSeries, system=None) -> np.ndarray:
        return np.zeros(len(series))


class ResolutionError(ValueError):
    pass


def impulse_weights(series: CollisionSeries, field, mass: float = 1.0) -> np.ndarray:
    return 2.0 * mass * series.v_perp * field(series)


def force_spectrum(series: CollisionSeries, field, omega, mass: float = 1.0, n_segments: int = 32,
                   min_events_per_segment: int = 20) -> SpectralPair:
    """Segment-averaged periodogram of the impulse train, Ct(omega) = <|X_seg(omega)|^2> / T_seg.

    X_seg is the exact transform of the mean-subtracted delta train on a
    segment (rectangular window). The correlation side comes from the
    inverse transform on the same grid.
    """
    omega = np.asarray(omega, dtype=float)
    Ts = series.T / n_segments
    pos = omega[omega > 0]
    if len(pos) and Ts < 2 * math.pi / pos.min():
        raise ResolutionError(
            f"segments of length {Ts:.3g} cannot resolve omega={pos.min():.3g}; "
            f"need total duration >= {n_segments * 2 * math.pi / pos.min():.3g}"
        )
    if len(series) < n_segments * min_events_per_segment:
        raise ResolutionError(
            f"{len(series)} events is too few for {n_segments} segments; "
            f"need ~{n_segments * min_events_per_segment} (longer duration)"
        )
    w = impulse_weights(series, field, mass)
    mean = w.sum() / series.T
    Ct = np.zeros(len(omega))
    seg = np.minimum((series.t / Ts).astype(int), n_segments - 1)
    # transform of the constant mean over [0, Ts]
    with np.errstate(invalid="ignore", divide="ignore"):
        box = np.where(omega == 0, Ts, (np.exp(1j * omega * Ts) - 1) / (1j * np.where(omega == 0, 1, omega)))
    for k in range(n_segments):
        sel = (seg == k) & (w != 0)
        tk = series.t[sel] - k * Ts
        wk = w[sel]
        X = np.zeros(len(omega), dtype=complex)
        for i in range(0, len(tk), 4096):
            X += np.exp(1j * np.outer(omega, tk[i : i + 4096])) @ wk[i : i + 4096]
        X -= mean * box
        Ct += np.abs(X) ** 2 / Ts
    Ct /= n_segments
    if omega[0] == 0:
        pair = fourier_pair(omega=omega, Ct=Ct, check_decay=False)
    else:
        pair = SpectralPair(tau=np.array([]), C=np.array([]), omega=omega, Ct=Ct)
    return pair


def wall_formula(N: float, m: float, v_E: float, volume: float, wall_area: float) -> float:
    """mu = (N / V_box) m v_E A_walls."""
    return N / volume * m * v_E * wall_area


def drude_formula(N: float, area: float, charge: float, m: float, tau_col: float, Omega: float) -> float:
    """mu(Omega) = (N / A) (e^2 tau_col / m) / (1 + (tau_col Omega)^2)."""
    return N / area * charge**2 * tau_col / m / (1.0 + (tau_col * Omega) ** 2)


# ---------------------------------------------------------------------------
# 2DW classical flow, H = (p1^2 + p2^2 + q1^2 + q2^2)/2 + (1 + x) q1^2 q2^2

_Y1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_Y0 = -(2.0 ** (1.0 / 3.0)) * _Y1
YOSHIDA = (_Y1, _Y0, _Y1)


def twodw_energy(q, p, x=0.0):
    q1, q2 = q[..., 0], q[..., 1]
    return 0.5 * (p**2).sum(-1) + 0.5 * (q1**2 + q2**2) + (1 + x) * q1**2 * q2**2


def twodw_potential(q1, q2, x=0.0):
    return 0.5 * (q1**2 + q2**2) + (1 + x) * q1**2 * q2**2


def _force(q, x):
    q1, q2 = q[..., 0], q[..., 1]
    c = 2 * (1 + x)
    return np.stack([-q1 - c * q1 * q2**2, -q2 - c * q2 * q1**2], axis=-1)


def yoshida_step(q, p, dt, x=0.0):
    """Fourth-order composition of kick-drift-kick leapfrog (time reversible, symplectic)."""
    for c in YOSHIDA:
        h = c * dt
        p = p + 0.5 * h * _force(q, x)
        q = q + h * p
        p = p + 0.5 * h * _force(q, x)
    return q, p


def microcanonical_sample(E: float, n: int, seed=0, x: float = 0.0):
    """Points on the energy shell: q uniform in V(q) < E, momentum direction uniform."""
    rng = np.random.default_rng(seed)
    qmax = math.sqrt(2 * E)
    qs = []
    while sum(len(a) for a in qs) < n:
        q = rng.uniform(-qmax, qmax, size=(4 * n, 2))
        ok = twodw_potential(q[:, 0], q[:, 1], x) < E
        qs.append(q[ok])
    q = np.concatenate(qs)[:n]
    pm = np.sqrt(2 * (E - twodw_potential(q[:, 0], q[:, 1], x)))
    th = rng.uniform(0, 2 * math.pi, n)
    p = np.stack([pm * np.cos(th), pm * np.sin(th)], axis=-1)
    return q, p


def twodw_lyapunov(q0, p0, T: float = 300.0, x: float = 0.0, dt: float = 0.01, d0: float = 1e-8,
                   check_every: float = 1.0, seed=0) -> np.ndarray:
    """Finite-time largest Lyapunov exponent for each member of an ensemble of 2DW initial conditions.

    Benettin pairs in the full phase space (q, p), renormalized to ``d0`` every
    ``check_every``. At E = 3 the flow has a mixed phase space: regular
    members give values near zero (a slow 1/T decay), chaotic ones a clearly
    positive exponent, so the result can be used to split an ensemble.
    """
    q0 = np.atleast_2d(np.asarray(q0, dtype=float))
    p0 = np.atleast_2d(np.asarray(p0, dtype=float))
    rng = np.random.default_rng(seed)
    u = rng.normal(size=q0.shape + (2,))
    u /= np.linalg.norm(u.reshape(len(q0), -1), axis=1)[:, None, None]
    qa, pa = q0.copy(), p0.copy()
    qb, pb = q0 + d0 * u[..., 0], p0 + d0 * u[..., 1]
    stride = max(1, int(round(check_every / dt)))
    h = check_every / stride
    n_checks = max(1, int(round(T / check_every)))
    total = np.zeros(len(q0))
    for _ in range(n_checks):
        for _ in range(stride):
            qa, pa = yoshida_step(qa, pa, h, x)
            qb, pb = yoshida_step(qb, pb, h, x)
        d = np.sqrt(((qb - qa) ** 2).sum(1) + ((pb - pa) ** 2).sum(1))
        total += np.log(d / d0)
        qb = qa + (qb - qa) * (d0 / d)[:, None]
        pb = pa + (pb - pa) * (d0 / d)[:, None]
    return total / (n_checks * check_every)


@dataclass
class TwoDWellTrajectory:
    t: np.ndarray
    q: np.ndarray  # (len(t), ..., 2)
    p: np.ndarray
    energy: np.ndarray
    F: np.ndarray  # -q1^2 q2^2
    dt: float
    x: float = 0.0

    @property
    def energy_drift(self) -> float:
        e0 = self.energy[0]
        return float(np.abs((self.energy - e0) / e0).max())


class EnergyBudgetError(RuntimeError):
    pass


def twodw_trajectory(q0, p0, T: float, x: float = 0.0, dt: float = 0.02, sample_every: float = 0.1,
                     tol: float = 1e-8, max_refine: int = 6) -> TwoDWellTrajectory:
    """Integrate Hamilton's equations; dt is halved until the relative energy drift is below ``tol``.

    ``q0`` and ``p0`` may carry leading batch dimensions (an ensemble).
    """
    q0 = np.asarray(q0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    e0 = twodw_energy(q0, p0, x)
    if np.any(e0 <= 0):
        raise ValueError("energy must be positive")
    for attempt in range(max_refine + 1):
        stride = max(1, int(round(sample_every / dt)))
        h = sample_every / stride
        n_samples = int(round(T / sample_every)) + 1
        q, p = q0.copy(), p0.copy()
        Q = np.empty((n_samples,) + q.shape)
        Pm = np.empty_like(Q)
        Q[0], Pm[0] = q, p
        for i in range(1, n_samples):
            for _ in range(stride):
                q, p = yoshida_step(q, p, h, x)
            Q[i], Pm[i] = q, p
        En = twodw_energy(Q, Pm, x)
        drift = np.abs((En - e0) / e0).max()
        if drift <= tol:
            t = np.arange(n_samples) * sample_every
            F = -Q[..., 0] ** 2 * Q[..., 1] ** 2
            return TwoDWellTrajectory(t, Q, Pm, En, F, h, x)
        dt = h / 2
    raise EnergyBudgetError(f"energy drift {drift:.3g} > {tol} after {max_refine} refinements (dt={h:.3g})")


def classical_spectrum(traj: TwoDWellTrajectory, segment_length: float = 200.0) -> SpectralPair:
    """Ct(omega) of F(t) = -q1^2 q2^2, Welch-averaged over segments and ensemble members.

    With the package convention, Ct = S/2 where S is the one-sided PSD in
    ordinary frequency (so that (1/2pi) * integral over all omega equals var F).
    """
    ds = traj.t[1] - traj.t[0]
    F = traj.F.reshape(len(traj.t), -1)
    nper = min(int(round(segment_length / ds)), len(traj.t))
    f, S = signal.welch(F, fs=1.0 / ds, window="boxcar", nperseg=nper, noverlap=0, detrend="constant",
                        scaling="density", axis=0)
    S = S.mean(axis=1)
    omega = 2 * math.pi * f
    Ct = S / 2.0
    # the one-sided density doubles all bins except zero and Nyquist
    Ct[0] *= 2.0
    if nper % 2 == 0:
        Ct[-1] *= 2.0
    return fourier_pair(omega=omega, Ct=Ct, check_decay=False)
