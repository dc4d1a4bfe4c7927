import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qchaoslab.model import WignerSpec, build_wigner, sign_randomize
from qchaoslab.spectra import (SpreadingProfile, WindowError, band_profile, classify_profile, critical_scales,
                               default_edge_margin, diagonalize, parametric_kernel, profile_from_rows,
                               reference_states)


def test_diagonal_input():
    d = np.array([3.0, -1.0, 2.0])
    s = diagonalize(np.diag(d))
    assert np.array_equal(s.eigenvalues, np.sort(d))
    assert np.allclose(np.abs(s.vectors), np.eye(3)[:, [1, 2, 0]])


def test_two_level_gap():
    s_, D = 0.7, 0.5
    s = diagonalize(np.array([[0.0, s_], [s_, D]]))
    assert math.isclose(s.eigenvalues[1] - s.eigenvalues[0], math.sqrt(D**2 + 4 * s_**2), rel_tol=1e-14)


def test_nonsymmetric_rejected():
    with pytest.raises(ValueError):
        diagonalize(np.array([[0.0, 1.0], [0.0, 1.0]]))


def test_orthonormality_and_window(small_model):
    H = small_model.hamiltonian(1.3)
    s = diagonalize(H, window=(50, 80))
    assert s.vectors.shape == (200, 31)
    assert np.abs(s.vectors.T @ s.vectors - np.eye(31)).max() <= 1e-10
    assert np.all(np.diff(s.eigenvalues) >= 0)


def test_x0_spectrum_is_E(small_model):
    s = diagonalize(small_model.hamiltonian(0.0))
    assert np.array_equal(s.eigenvalues, small_model.E)


def test_zero_step_kernel_is_delta(small_model):
    p = parametric_kernel(small_model, 0.3, 0.3)
    assert np.array_equal(p.r, [0]) and p.P[0] == 1.0


def test_small_step_keeps_survival(model_b16):
    sc = critical_scales(model_b16.spec)
    p = parametric_kernel(model_b16, 0.0, 0.1 * sc.dx_c)
    assert p.survival >= 0.9


def test_kernel_general_route_matches_manual(small_model):
    ms = reference_states(small_model.N, 0.2)
    p = parametric_kernel(small_model, 0.4, 1.2)
    s0 = np.linalg.eigh(small_model.hamiltonian(0.4))[1]
    s1 = np.linalg.eigh(small_model.hamiltonian(1.2))[1]
    P = ((s1.T @ s0[:, ms]) ** 2).T
    ref = profile_from_rows(P, ms, small_model.delta)
    assert np.array_equal(p.r, ref.r)
    np.testing.assert_allclose(p.P, ref.P, atol=1e-12)


@settings(max_examples=12, deadline=None)
@given(seed=st.integers(0, 10_000), dx=st.floats(0.05, 8.0), x0=st.sampled_from([0.0, 0.7]))
def test_exact_variance_identity(seed, dx, x0):
    m = build_wigner(WignerSpec(N=120, b=4, seed=seed))
    ms = np.arange(40, 80)
    s0 = diagonalize(m.hamiltonian(x0), check=False)
    s1 = diagonalize(m.hamiltonian(x0 + dx), check=False)
    B = m.B.toarray()
    P = (s1.vectors.T @ s0.vectors[:, ms]) ** 2  # P[n, j] for reference m = ms[j]
    lhs = ((s1.eigenvalues[:, None] - s0.eigenvalues[ms][None, :]) ** 2 * P).sum(0)
    Bm = s0.vectors[:, ms].T @ B @ s0.vectors  # B in the x0 eigenbasis
    rhs = dx**2 * (Bm**2).sum(1)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-6)


def test_profile_symmetry():
    acc = 0
    for seed in range(8):
        m = build_wigner(WignerSpec(N=400, b=8, seed=seed))
        p = parametric_kernel(m, 0.0, 1.0, reference_window=0.4)
        acc = acc + p.P[np.abs(p.r) <= 10] if seed else p.P[np.abs(p.r) <= 10]
    P = acc / 8
    assert np.abs(P - P[::-1]).max() < 0.1 * P.max()


def test_window_too_close_to_edge(small_model):
    with pytest.raises(WindowError):
        parametric_kernel(small_model, 0.0, 10.0, reference_window=0.9)
    with pytest.raises(WindowError):
        parametric_kernel(small_model, 0.0, 1.0, reference_window=np.array([2, 3]))


def test_edge_margin_rule():
    # 2b + 4 (dx/dx_c)^2, capped by the variance-identity spread
    assert default_edge_margin(8, 1.0, 0.5, 1.0, 0.5) == 16 + 16
    assert default_edge_margin(8, 50.0, 0.5, 1.0, 0.5) == 16 + 4 * 400


def test_reference_states_centre():
    ms = reference_states(1000, 0.2)
    assert len(ms) == 200 and ms[0] == 400 and ms[-1] == 599
    assert len(reference_states(1000, 0.2, count=10)) == 10


def test_profile_validation():
    with pytest.raises(ValueError):
        SpreadingProfile([0, 2], [0.5, 0.5], 1.0)
    with pytest.raises(ValueError):
        SpreadingProfile([0, 1], [0.5, 0.4], 1.0)
    with pytest.raises(ValueError):
        SpreadingProfile([0, 1], [1.5, -0.5], 1.0)


def test_uniform_three_level_measures():
    p = SpreadingProfile([-1, 0, 1], [1 / 3] * 3, 0.5)
    assert p.dE == pytest.approx(0.5 * math.sqrt(2 / 3), rel=1e-14)
    assert p.survival == pytest.approx(1 / 3)
    d = SpreadingProfile.delta_profile(0.5)
    assert (d.survival, d.gamma, d.dE, d.gamma_levels) == (1.0, 0.0, 0.0, 1)


def test_profile_from_rows_alignment():
    P = np.zeros((2, 6))
    P[0, 2], P[0, 3] = 0.75, 0.25
    P[1, 3], P[1, 4] = 0.75, 0.25
    p = profile_from_rows(P, [2, 3], 1.0)
    assert np.array_equal(p.r, [0, 1]) and np.allclose(p.P, [0.75, 0.25])


def test_band_profile_wigner_and_zero(small_model):
    bp = band_profile(small_model.B, delta=small_model.delta)
    b = small_model.spec.b
    assert np.all(bp.mean_sq[1 : b + 1] > 0.5)
    assert np.all(bp.mean_sq[b + 1 :] == 0)
    zero = band_profile(np.zeros((20, 20)), delta=0.5)
    assert np.all(zero.mean_sq[zero.counts > 0] == 0)


def test_band_profile_gaps_not_zeros():
    E = np.array([0.0, 0.1, 5.0])
    B = np.ones((3, 3)) - np.eye(3)
    bp = band_profile(B, energies=E, delta=0.1, omega_max=6.0)
    assert len(bp.gaps) > 0
    assert np.all(np.isnan(bp.mean_sq[bp.gaps]))


def test_band_profile_sign_invariance(small_model):
    a = band_profile(small_model.B, delta=small_model.delta)
    b = band_profile(sign_randomize(small_model, 9).B, delta=small_model.delta)
    assert np.array_equal(a.mean_sq, b.mean_sq, equal_nan=True)


def test_critical_scales_examples():
    sc = critical_scales(WignerSpec(N=100, b=16, delta=0.5, sigma=1.0))
    assert sc.dx_c == 0.5 and sc.dx_prt == 2.0 and sc.tau_cl == 0.125 and sc.delta_b == 8.0


@settings(max_examples=30)
@given(b=st.integers(1, 500), delta=st.floats(0.01, 10), sigma=st.floats(0.01, 10))
def test_prt_over_c_is_sqrt_b(b, delta, sigma):
    sc = critical_scales(WignerSpec(N=2 * b + 1, b=b, delta=delta, sigma=sigma))
    assert sc.dx_prt / sc.dx_c == pytest.approx(math.sqrt(b), rel=1e-14)


def test_classify_synthetic_profiles():
    sc = critical_scales(WignerSpec(N=2000, b=400))
    assert classify_profile(SpreadingProfile.delta_profile(0.5), sc) == "standard-perturbative"
    # Lorentzian with a three-level core, chopped at half the band
    r = np.arange(-200, 201)
    P = 1 / (r**2 + 1.0)
    prof = SpreadingProfile(r, P / P.sum(), 0.5)
    assert prof.gamma_levels == 3
    assert classify_profile(prof, sc) == "core-tail"
    # semicircle of radius 2 Delta_b
    b = 16
    sc = critical_scales(WignerSpec(N=2000, b=b))
    R = 2 * b
    r = np.arange(-R, R + 1)
    P = np.sqrt(1 - (r / R) ** 2)
    assert classify_profile(SpreadingProfile(r, P / P.sum(), 0.5), sc) == "non-perturbative"
    # a flat profile a few levels wide meets no criterion
    r = np.arange(-3, 4)
    assert classify_profile(SpreadingProfile(r, np.full(7, 1 / 7), 0.5), sc) == "crossover"


def test_kernel_in_wigner_regime_is_core_tail():
    m = build_wigner(WignerSpec(N=1536, b=256, seed=1))
    sc = critical_scales(m.spec)
    p = parametric_kernel(m, 0.0, 1.0 * sc.dx_c)
    assert classify_profile(p, sc) == "core-tail"
