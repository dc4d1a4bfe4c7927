import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qchaoslab.billiard import (BilliardSystem, BumpField, DilationField, EnergyBudgetError, ResolutionError,
                                TranslationField, ZeroField, classical_spectrum, drude_formula, evolve_billiard,
                                force_spectrum, impulse_weights, lyapunov, mean_collision_time,
                                microcanonical_sample, random_initial, twodw_energy, twodw_lyapunov, twodw_trajectory,
                                wall_formula)

SINAI = BilliardSystem()
EMPTY = BilliardSystem(discs=())


@pytest.fixture(scope="module")
def sinai_series():
    ini = random_initial(SINAI, np.random.default_rng(1))
    return evolve_billiard(SINAI, ini, n_events=100_000), ini


def test_geometry_validation():
    with pytest.raises(ValueError):
        BilliardSystem(discs=((0.5, 0.5, 0.6),))
    with pytest.raises(ValueError):
        BilliardSystem(discs=((0.3, 0.5, 0.2), (0.6, 0.5, 0.2)))
    with pytest.raises(ValueError):
        evolve_billiard(SINAI, (0.5, 0.5, 1.0, 0.0), n_events=10)


def test_axis_aligned_period():
    v = EMPTY.speed
    s = evolve_billiard(EMPTY, (0.3, 0.4, v, 0.0), n_events=20)
    right = s.t[s.boundary == 1]
    np.testing.assert_allclose(np.diff(right), 2 * EMPTY.W / v, rtol=1e-12)
    assert set(s.boundary) == {1, 3}


def test_head_on_disc_retraces():
    v = SINAI.speed
    s = evolve_billiard(SINAI, (0.05, 0.5, v, 0.0), n_events=10)
    assert set(s.boundary) == {3, 4}
    np.testing.assert_allclose(s.pos[:, 1], 0.5, atol=1e-12)
    np.testing.assert_allclose(s.pos[s.boundary == 4, 0], 0.15, atol=1e-12)


def test_event_invariants(sinai_series):
    s, _ = sinai_series
    assert s.speed_defect <= 1e-12
    assert np.all(np.diff(s.t) > 0)
    assert np.all(s.v_perp > 0)


def test_mean_free_path(sinai_series):
    s, _ = sinai_series
    mfp = SINAI.speed * mean_collision_time(s)
    assert abs(mfp / SINAI.mean_free_path() - 1) < 0.1


def test_lyapunov_examples():
    ini = (0.2, 0.13, 0.6, 0.8)
    empty = lyapunov(EMPTY, ini, T=300.0)
    assert empty.exponent <= 0.01 * EMPTY.speed / EMPTY.W
    assert not empty.chaotic
    big = lyapunov(SINAI, ini, T=300.0)
    small = lyapunov(BilliardSystem(discs=((0.5, 0.5, 0.1),)), ini, T=300.0)
    assert big.chaotic and big.exponent > small.exponent > 0
    fast = lyapunov(SINAI.with_speed(2 * SINAI.speed), ini, T=150.0)
    assert fast.exponent / big.exponent == pytest.approx(2.0, rel=0.01)


def test_zero_field_and_resolution(sinai_series):
    s, _ = sinai_series
    w = np.linspace(0, 20, 21)
    assert np.all(force_spectrum(s, ZeroField(), w).Ct == 0)
    with pytest.raises(ResolutionError):
        force_spectrum(s, BumpField(), np.array([1e-4]), n_segments=32)
    with pytest.raises(ResolutionError):
        force_spectrum(s, BumpField(), w, n_segments=20_000)


def test_spectrum_nonnegative_and_sum_rule(sinai_series):
    s, _ = sinai_series
    f = BumpField(0, 0.2, 0.35)
    dt = 0.02
    om = np.linspace(0, math.pi / dt, 800)
    pair = force_spectrum(s, f, om)
    assert np.all(pair.Ct >= 0)
    nb = int(s.T / dt)
    idx = np.minimum((s.t / dt).astype(int), nb - 1)
    binned = np.bincount(idx, weights=impulse_weights(s, f), minlength=nb) / dt
    assert pair.sum_rule() == pytest.approx(binned.var(), rel=0.05)


def test_speed_rescaling(sinai_series):
    s1, ini = sinai_series
    lam = 2.0
    fast = SINAI.with_speed(lam * SINAI.speed)
    s2 = evolve_billiard(fast, (ini[0], ini[1], lam * ini[2], lam * ini[3]), n_events=len(s1))
    f = BumpField(0, 0.2, 0.35)
    w = np.linspace(0.5, 60, 50)
    c1 = force_spectrum(s1, f, w).Ct
    c2 = force_spectrum(s2, f, lam * w).Ct
    np.testing.assert_allclose(c2, lam**3 * c1, rtol=0.1)
    assert lam * w[np.argmax(c1)] == pytest.approx(lam * w[np.argmax(c2 / lam**3)])


def test_fields_on_known_points():
    from qchaoslab.billiard import CollisionSeries

    pos = np.array([[0.5, 0.0], [1.0, 0.5], [0.5, 0.85]])
    nrm = np.array([[0.0, -1.0], [1.0, 0.0], [0.0, -1.0]])  # last: disc top, domain normal points into the disc
    s = CollisionSeries(np.array([1.0, 2.0, 3.0]), np.array([0.25, 1.5, 4.0]), np.ones(3), np.array([0, 1, 4]),
                        pos, nrm, 3.0)
    np.testing.assert_allclose(DilationField()(s), [0.5, 0.5, -0.35])
    np.testing.assert_allclose(TranslationField((1.0, 0.0))(s), [0.0, 1.0, 0.0])
    assert BumpField(0, 0.2, 0.3)(s)[0] == pytest.approx(1.0)
    assert np.all(BumpField(0, 0.2, 0.3)(s)[1:] == 0)


def test_wall_formula_examples():
    assert wall_formula(1, 1, 1, 1, 1) == 1
    assert wall_formula(1, 1, 2, 1, 1) == 2 * wall_formula(1, 1, 1, 1, 1)
    assert wall_formula(1, 1, 2, 4, 2) == 1


@settings(max_examples=30)
@given(Om=st.floats(0, 100), tau=st.floats(0.01, 10))
def test_drude_formula(Om, tau):
    mu0 = drude_formula(3, 2, 1.5, 0.7, tau, 0.0)
    assert mu0 == pytest.approx(3 / 2 * 1.5**2 * tau / 0.7)
    assert drude_formula(3, 2, 1.5, 0.7, tau, 1 / tau) == pytest.approx(mu0 / 2)
    assert drude_formula(3, 2, 1.5, 0.7, tau, Om) == drude_formula(3, 2, 1.5, 0.7, tau, -Om)


def test_twodw_axis_motion_is_harmonic():
    tr = twodw_trajectory(np.array([1.5, 0.0]), np.array([0.3, 0.0]), T=50.0)
    assert np.all(tr.F == 0)
    assert np.abs(tr.q[:, 1]).max() == 0
    np.testing.assert_allclose(tr.q[:, 0], 1.5 * np.cos(tr.t) + 0.3 * np.sin(tr.t), atol=1e-7)


def test_twodw_energy_and_reversal():
    q0, p0 = microcanonical_sample(3.0, 4, seed=2)
    assert np.allclose(twodw_energy(q0, p0), 3.0)
    tr = twodw_trajectory(q0, p0, T=10.0)
    assert tr.energy_drift <= 1e-8
    back = twodw_trajectory(tr.q[-1], -tr.p[-1], T=10.0, dt=tr.dt)
    assert np.abs(back.q[-1] - q0).max() <= 1e-6


def test_twodw_energy_budget():
    q0, p0 = microcanonical_sample(3.0, 2, seed=1)
    with pytest.raises(EnergyBudgetError):
        twodw_trajectory(q0, p0, T=20.0, dt=0.1, sample_every=0.1, tol=1e-14, max_refine=1)


def test_twodw_lyapunov_splits_mixed_phase_space():
    # motion along an axis is a periodic orbit; the E = 3 shell also holds chaotic members
    axis = twodw_lyapunov(np.array([[1.5, 0.0]]), np.array([[0.3, 0.0]]))
    assert axis[0] < 0.02
    q0, p0 = microcanonical_sample(3.0, 40, seed=3)
    lam = twodw_lyapunov(q0, p0)
    assert np.sum(lam > 0.2) >= 20
    # a clean gap separates the two populations
    assert not np.any((lam > 0.1) & (lam < 0.2))


def _line_share(pair):
    band = (pair.omega > 0.2) & (pair.omega < 8.0)
    return pair.Ct[band].max() / pair.Ct[band].sum()


def test_twodw_chaotic_spectrum_is_continuous():
    q0, p0 = microcanonical_sample(3.0, 40, seed=3)
    chaotic = twodw_lyapunov(q0, p0) > 0.1
    tr = twodw_trajectory(q0[chaotic], p0[chaotic], T=400.0)
    pair = classical_spectrum(tr, segment_length=100.0)
    assert pair.consistent
    Ct = pair.Ct[(pair.omega > 0.2) & (pair.omega < 8.0)]
    # no holes between neighbours, unlike the line spectrum of regular members
    assert np.all(Ct[1:-1] > 0.1 * np.minimum(Ct[:-2], Ct[2:]))
    assert pair.sum_rule() == pytest.approx(tr.F.var(), rel=0.05)
    reg = twodw_trajectory(q0[~chaotic], p0[~chaotic], T=400.0)
    assert _line_share(classical_spectrum(reg, segment_length=100.0)) > 3 * _line_share(pair)
