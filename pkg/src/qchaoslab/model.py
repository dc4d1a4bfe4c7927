"""Hamiltonian families: the banded Wigner model and the 2D anharmonic well.

Both families are linear in the deformation parameter, H(x) = H0 + x*B.
The Wigner model is generated directly in the eigenbasis of H0, the 2DW
model is assembled in a product oscillator basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.sparse as sp


class SpecError(ValueError):
    """Raised when a model specification violates its invariants."""


# ---------------------------------------------------------------------------
# Wigner banded random matrix model


@dataclass(frozen=True)
class WignerSpec:
    N: int
    b: int
    delta: float = 0.5
    sigma: float = 1.0
    hbar: float = 1.0
    seed: int = 0
    sign_randomized: bool = False

    def __post_init__(self):
        if self.b < 1:
            raise SpecError(f"bandwidth b must be >= 1, got {self.b}")
        if self.N < 2 * self.b + 1:
            raise SpecError(f"need N >= 2b+1, got N={self.N}, b={self.b}")
        for name in ("delta", "sigma", "hbar"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise SpecError(f"{name} must be positive and finite, got {v}")
        if not (0 <= int(self.seed) < 2**64):
            raise SpecError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def tau_cl(self) -> float:
        return self.hbar / (self.b * self.delta)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class WignerModel:
    """H(x) = diag(E) + x*B with E_n = n*delta and B banded, symmetric, zero diagonal."""

    spec: WignerSpec
    E: np.ndarray
    B: sp.csr_matrix

    @property
    def N(self) -> int:
        return self.spec.N

    @property
    def hbar(self) -> float:
        return self.spec.hbar

    @property
    def delta(self) -> float:
        return self.spec.delta

    @property
    def dx_c(self) -> float:
        return self.spec.delta / self.spec.sigma

    @property
    def tau_cl(self) -> float:
        return self.spec.tau_cl

    def hamiltonian(self, x: float) -> np.ndarray:
        """Dense H(x)."""
        return np.diag(self.E) + x * self.B.toarray()

    def band_values(self) -> np.ndarray:
        """Packed upper band: row r-1 holds the r-th superdiagonal, zero padded to length N."""
        N, b = self.spec.N, self.spec.b
        out = np.zeros((b, N))
        for r in range(1, b + 1):
            out[r - 1, : N - r] = self.B.diagonal(r)
        return out


def _band_matrix(N: int, packed: np.ndarray) -> sp.csr_matrix:
    b = packed.shape[0]
    diags, offs = [], []
    for r in range(1, b + 1):
        v = packed[r - 1, : N - r]
        diags += [v, v]
        offs += [r, -r]
    return sp.diags(diags, offs, shape=(N, N), format="csr")


def build_wigner(spec: WignerSpec) -> WignerModel:
    """Draw the Wigner model for ``spec``; deterministic for a fixed seed.

    Each in-band upper-triangle element is an independent N(0, sigma^2) draw,
    the lower triangle mirrors it. The diagonal of B is zero: a random diagonal
    would only shift levels.
    """
    N, b = spec.N, spec.b
    ss = np.random.SeedSequence(int(spec.seed))
    draw_seq, sign_seq = ss.spawn(2)
    rng = np.random.default_rng(draw_seq)
    packed = np.zeros((b, N))
    for r in range(1, b + 1):
        packed[r - 1, : N - r] = rng.normal(0.0, spec.sigma, N - r)
    model = WignerModel(spec=spec, E=np.arange(N) * spec.delta, B=_band_matrix(N, packed))
    if spec.sign_randomized:
        model = sign_randomize(model, int(sign_seq.generate_state(1, dtype=np.uint64)[0]))
        model.spec = spec
    return model


def sign_randomize(model: WignerModel, seed) -> WignerModel:
    """Flip the sign of every independent upper-band element with probability 1/2."""
    rng = np.random.default_rng(seed)
    packed = model.band_values()
    signs = rng.choice([-1.0, 1.0], size=packed.shape)
    new_spec = WignerSpec(**{**model.spec.to_dict(), "sign_randomized": True})
    return WignerModel(spec=new_spec, E=model.E.copy(), B=_band_matrix(model.N, packed * signs))


def wigner_correlation(spec: WignerSpec, tau, convention: str = "band", n_omega: int = 1025):
    """Correlation C(tau) of the Wigner model and its box-shaped power spectrum.

    ``convention="band"`` (default) normalizes C(0) = 2*b*sigma^2, which is the
    value fixed by the band profile relation (flat sigma^2 on both sides of the
    diagonal). ``convention="literal"`` uses C(0) = b*sigma^2.
    """
    from .lrt import SpectralPair

    tau = np.asarray(tau, dtype=float)
    if convention == "band":
        c0 = 2 * spec.b * spec.sigma**2
    elif convention == "literal":
        c0 = spec.b * spec.sigma**2
    else:
        raise ValueError(f"unknown convention {convention!r}")
    tcl = spec.tau_cl
    C = c0 * np.sinc(tau / tcl / np.pi)
    w_edge = 1.0 / tcl
    omega = np.linspace(0.0, 2.0 * w_edge, n_omega)
    # box of height pi*tau_cl*C(0), so that (1/2pi) * integral over omega = C(0)
    Ct = np.where(omega < w_edge, math.pi * tcl * c0, 0.0)
    Ct[np.isclose(omega, w_edge)] = 0.5 * math.pi * tcl * c0
    return SpectralPair(tau=tau, C=C, omega=omega, Ct=Ct)


def save_wigner(model: WignerModel, path) -> None:
    """Store dimension, band and packed band values (npz)."""
    np.savez(path, format_version=1, spec=np.array(repr(model.spec.to_dict())), packed=model.band_values())


def load_wigner(path) -> WignerModel:
    import ast

    with np.load(path) as z:
        spec = WignerSpec(**ast.literal_eval(str(z["spec"])))
        packed = z["packed"]
    return WignerModel(spec=spec, E=np.arange(spec.N) * spec.delta, B=_band_matrix(spec.N, packed))


# ---------------------------------------------------------------------------
# 2D anharmonic well, H = (P1^2 + P2^2 + Q1^2 + Q2^2)/2 + (1 + x) Q1^2 Q2^2


@dataclass(frozen=True)
class TwoDWellSpec:
    M: int
    hbar: float
    x: float = 0.0
    energy_window: tuple = (0.0, math.inf)

    def __post_init__(self):
        if self.M < 2:
            raise SpecError(f"basis cutoff M must be >= 2, got {self.M}")
        if not self.hbar > 0:
            raise SpecError(f"hbar must be positive, got {self.hbar}")


@dataclass
class SparseHamiltonian:
    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    labels: np.ndarray  # (dim, 2) quanta (n1, n2)

    def tocsr(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.dim, self.dim))

    @property
    def entries(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.vals.tolist()))


def q2_elements(n: np.ndarray, hbar: float):
    """<n|Q^2|n> and <n+2|Q^2|n> of a unit-mass unit-frequency oscillator."""
    n = np.asarray(n, dtype=float)
    return hbar * (2 * n + 1) / 2, hbar * np.sqrt((n + 1) * (n + 2)) / 2


def twodw_basis(M: int) -> np.ndarray:
    return np.array([(n1, n - n1) for n in range(M + 1) for n1 in range(n + 1)], dtype=int)


def build_2dw(spec: TwoDWellSpec):
    """Return (H0, W) as SparseHamiltonians; H(x) = H0 + x*W.

    H0 already contains the unperturbed quartic coupling Q1^2 Q2^2 (x = 0).
    """
    labels = twodw_basis(spec.M)
    dim = len(labels)
    index = {tuple(l): i for i, l in enumerate(labels)}
    hb = spec.hbar
    lo, hi = spec.energy_window
    # the harmonic part bounds H from below, so a window above the top oscillator
    # shell cannot be represented (a sharper check happens after diagonalization)
    if math.isfinite(hi) and hi >= hb * (spec.M + 1):
        raise SpecError(
            f"cutoff M={spec.M} too small for energy window top {hi}: "
            f"need M > {int(math.ceil(hi / hb - 1))}"
        )
    # one-dimensional Q^2 couplings: offsets 0 and +-2
    rows, cols, vals = [], [], []
    for i, (n1, n2) in enumerate(labels):
        d1, u1 = q2_elements(n1, hb)
        d2, u2 = q2_elements(n2, hb)
        m1 = {0: d1, 2: u1}
        m2 = {0: d2, 2: u2}
        if n1 >= 2:
            m1[-2] = q2_elements(n1 - 2, hb)[1]
        if n2 >= 2:
            m2[-2] = q2_elements(n2 - 2, hb)[1]
        for a, va in m1.items():
            for c, vc in m2.items():
                j = index.get((n1 + a, n2 + c))
                if j is not None:
                    rows.append(i)
                    cols.append(j)
                    vals.append(float(va * vc))
    rows = np.array(rows)
    cols = np.array(cols)
    vals = np.array(vals)
    W = SparseHamiltonian(dim, rows, cols, vals, labels)
    diag = hb * (labels.sum(1) + 1.0)
    h0 = sp.diags(diag) + W.tocsr() * (1.0 + spec.x)
    h0 = sp.coo_matrix(h0)
    H0 = SparseHamiltonian(dim, h0.row, h0.col, h0.data, labels)
    return H0, W


def parity_blocks(labels: np.ndarray):
    """Index arrays of the four (n1 mod 2, n2 mod 2) sectors, which H0 and W do not mix."""
    key = 2 * (labels[:, 0] % 2) + labels[:, 1] % 2
    return [np.flatnonzero(key == k) for k in range(4)]


@dataclass
class ParametricFamily:
    """Generic H(x) = diag(E) + x*B given in the eigenbasis of H(0).

    Used for the 2DW model after diagonalization, so that the propagator and
    spreading measures treat it exactly like a Wigner model. ``dx_c`` and
    ``tau_cl`` are the step-control scales (estimate them from the band profile).
    """

    E: np.ndarray
    B: object  # dense ndarray or scipy sparse
    hbar: float
    delta: float
    dx_c: float
    tau_cl: float

    @property
    def N(self) -> int:
        return len(self.E)

    def hamiltonian(self, x: float) -> np.ndarray:
        B = self.B.toarray() if sp.issparse(self.B) else np.asarray(self.B)
        return np.diag(self.E) + x * B


@dataclass
class TwoDWellEigensystem:
    energies: np.ndarray  # retained eigenvalues of H0, ascending
    W: np.ndarray  # perturbation in the retained eigenbasis (dense, block structured)
    sector: np.ndarray  # parity sector of each retained state
    hbar: float

    @property
    def N(self) -> int:
        return len(self.energies)

    def mean_spacing(self, lo: float, hi: float) -> float:
        n = np.count_nonzero((self.energies >= lo) & (self.energies <= hi))
        if n < 2:
            raise ValueError(f"fewer than 2 levels in [{lo}, {hi}]")
        return (hi - lo) / n


def twodw_eigensystem(spec: TwoDWellSpec, keep_fraction: float = 0.5) -> TwoDWellEigensystem:
    """Diagonalize H0 sector by sector and express W in the retained eigenbasis.

    Only the lowest ``keep_fraction`` of each parity sector's spectrum is kept,
    to stay clear of truncation artifacts near the basis cutoff. The requested
    energy window must lie below the highest retained level.
    """
    H0, W = build_2dw(spec)
    h0 = H0.tocsr()
    w = W.tocsr()
    parts = []
    for k, idx in enumerate(parity_blocks(H0.labels)):
        if len(idx) == 0:
            continue
        hb = h0[idx][:, idx].toarray()
        ev, V = np.linalg.eigh(hb)
        nk = max(1, int(len(idx) * keep_fraction))
        ev, V = ev[:nk], V[:, :nk]
        wb = V.T @ (w[idx][:, idx] @ V)
        parts.append((ev, wb, k))
    energies = np.concatenate([p[0] for p in parts])
    sector = np.concatenate([np.full(len(p[0]), p[2]) for p in parts])
    Wfull = np.zeros((len(energies), len(energies)))
    off = 0
    for ev, wb, _ in parts:
        n = len(ev)
        Wfull[off : off + n, off : off + n] = wb
        off += n
    order = np.argsort(energies, kind="stable")
    energies = energies[order]
    Wfull = Wfull[np.ix_(order, order)]
    top = min(p[0][-1] for p in parts)
    lo, hi = spec.energy_window
    if math.isfinite(hi) and hi > top:
        raise SpecError(
            f"energy window top {hi} exceeds the highest reliably retained level {top:.4g}; increase M"
        )
    return TwoDWellEigensystem(energies, Wfull, sector[order], spec.hbar)
