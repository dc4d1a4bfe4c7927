import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qchaoslab.model import (SpecError, TwoDWellSpec, WignerSpec, build_2dw, build_wigner, load_wigner,
                             q2_elements, save_wigner, sign_randomize, twodw_eigensystem, wigner_correlation)
from qchaoslab.spectra import band_profile


def test_small_model_layout():
    m = build_wigner(WignerSpec(N=5, b=1, delta=0.5, sigma=1.0))
    assert np.array_equal(m.E, [0, 0.5, 1.0, 1.5, 2.0])
    B = m.B.toarray()
    assert np.all(np.diag(B) == 0)
    assert np.all(B[np.abs(np.subtract.outer(range(5), range(5))) > 1] == 0)
    assert np.all(B[np.abs(np.subtract.outer(range(5), range(5))) == 1] != 0)


def test_in_band_variance():
    m = build_wigner(WignerSpec(N=1000, b=16, delta=0.5, sigma=1.0, seed=7))
    vals = m.band_values()
    inband = np.concatenate([vals[r - 1, : 1000 - r] for r in range(1, 17)])
    assert abs(inband.var() - 1.0) < 0.05


def test_determinism():
    s = WignerSpec(N=300, b=10, seed=123)
    a, b = build_wigner(s), build_wigner(s)
    assert (a.B != b.B).nnz == 0
    assert a.B.toarray().tobytes() == b.B.toarray().tobytes()


@pytest.mark.parametrize("kw", [dict(N=10, b=5), dict(N=10, b=0), dict(N=50, b=3, delta=0.0),
                                dict(N=50, b=3, sigma=-1.0), dict(N=50, b=3, hbar=float("inf")),
                                dict(N=50, b=3, seed=-1)])
def test_invalid_specs_rejected(kw):
    with pytest.raises(SpecError):
        WignerSpec(**kw)


@settings(max_examples=25, deadline=None)
@given(N=st.integers(3, 80), b=st.integers(1, 6), seed=st.integers(0, 2**32),
       delta=st.floats(0.1, 3.0), sigma=st.floats(0.1, 3.0))
def test_model_invariants(N, b, seed, delta, sigma):
    if N < 2 * b + 1:
        with pytest.raises(SpecError):
            WignerSpec(N=N, b=b)
        return
    m = build_wigner(WignerSpec(N=N, b=b, delta=delta, sigma=sigma, seed=seed))
    B = m.B.toarray()
    assert np.array_equal(B, B.T)
    off = np.abs(np.subtract.outer(np.arange(N), np.arange(N)))
    assert np.all(B[(off > b) | (off == 0)] == 0)
    assert np.allclose(np.diff(m.E), delta, rtol=0, atol=1e-12)
    assert m.tau_cl > 0 and math.isfinite(m.tau_cl)


def test_sign_randomize_properties(small_model):
    r = sign_randomize(small_model, seed=5)
    A, B = small_model.B.toarray(), r.B.toarray()
    assert np.array_equal(np.abs(A), np.abs(B))
    assert np.array_equal(B, B.T)
    up = np.triu(A, 1) != 0
    flipped = np.mean(np.sign(A[up]) != np.sign(B[up]))
    assert 0.4 <= flipped <= 0.6
    pa = band_profile(A, delta=small_model.delta)
    pb = band_profile(B, delta=small_model.delta)
    assert np.array_equal(pa.mean_sq, pb.mean_sq, equal_nan=True)


def test_sign_randomized_spec_flag():
    m = build_wigner(WignerSpec(N=100, b=4, seed=2, sign_randomized=True))
    plain = build_wigner(WignerSpec(N=100, b=4, seed=2))
    assert m.spec.sign_randomized
    assert np.array_equal(np.abs(m.B.toarray()), np.abs(plain.B.toarray()))
    assert not np.array_equal(m.B.toarray(), plain.B.toarray())


def test_wigner_correlation_examples():
    spec = WignerSpec(N=100, b=16, delta=0.5, sigma=1.0)
    assert spec.tau_cl == 0.125
    lit = wigner_correlation(spec, [0.0, math.pi * spec.tau_cl], convention="literal")
    assert lit.C[0] == 16.0
    assert abs(lit.C[1]) < 1e-12
    band = wigner_correlation(spec, [0.0])
    assert band.C[0] == 32.0


def test_wigner_pair_consistent():
    spec = WignerSpec(N=100, b=16)
    pair = wigner_correlation(spec, np.linspace(0, 1, 11), n_omega=4001)
    assert pair.consistent
    assert abs(pair.sum_rule() - pair.C0) < 1e-3 * pair.C0


def test_band_profile_flat_matches_correlation():
    # ensemble band profile is flat at sigma^2 in band; the spectrum is the matching box
    spec = WignerSpec(N=2000, b=10, sigma=1.3, seed=4)
    m = build_wigner(spec)
    prof = band_profile(m.B, delta=spec.delta, hbar=spec.hbar)
    inband = prof.mean_sq[1 : spec.b + 1]
    assert np.allclose(inband, spec.sigma**2, rtol=0.1)
    assert np.all(prof.mean_sq[spec.b + 1 :][prof.counts[spec.b + 1 :] > 0] == 0)
    pair = wigner_correlation(spec, [0.0])
    w = np.arange(1, spec.b) * spec.delta / spec.hbar
    pred = spec.delta / (2 * math.pi * spec.hbar) * pair.Ct_at(w)
    assert np.allclose(pred, spec.sigma**2)


def test_save_load_roundtrip(tmp_path, small_model):
    p = tmp_path / "m.npz"
    save_wigner(small_model, p)
    back = load_wigner(p)
    assert back.spec == small_model.spec
    assert np.array_equal(back.B.toarray(), small_model.B.toarray())


def test_q2_ground_element():
    d, _ = q2_elements(0, 1.0)
    assert d == 0.5


def test_2dw_selection_rule_and_symmetry():
    H0, W = build_2dw(TwoDWellSpec(M=12, hbar=0.5))
    for H in (H0, W):
        A = H.tocsr().toarray()
        assert np.allclose(A, A.T, atol=1e-14)
        assert np.all(np.isfinite(A))
    lab = W.labels
    for r, c, v in W.entries:
        d1, d2 = abs(lab[r, 0] - lab[c, 0]), abs(lab[r, 1] - lab[c, 1])
        assert d1 in (0, 2) and d2 in (0, 2)
    index = {tuple(l): i for i, l in enumerate(lab)}
    Wd = W.tocsr().toarray()
    i = index[(1, 2)]
    assert Wd[index[(3, 4)], i] != 0
    assert Wd[index[(2, 2)], i] == 0


def test_2dw_ground_state_approaches_classical_minimum():
    e0 = [twodw_eigensystem(TwoDWellSpec(M=30, hbar=h)).energies[0] for h in (0.4, 0.2, 0.1, 0.05)]
    assert all(a > b for a, b in zip(e0, e0[1:]))
    assert e0[-1] < 0.06


def test_2dw_window_beyond_cutoff_rejected():
    with pytest.raises(SpecError):
        build_2dw(TwoDWellSpec(M=10, hbar=0.1, energy_window=(0.5, 2.0)))
    with pytest.raises(SpecError):
        twodw_eigensystem(TwoDWellSpec(M=20, hbar=0.1, energy_window=(0.5, 1.9)))
