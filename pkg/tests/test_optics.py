import math

import numpy as np
import pytest

from ppwitness.core import apc_preset, cm1_to_radfs
from ppwitness.model import assemble, build_space, exciton_structure
from ppwitness.optics import (
    Pulse,
    PulsePair,
    field_at,
    make_pulse_pairs,
    omega_amplitude,
    perturbative_signal,
    perturbative_signal_full,
    pi_factor,
    spectral_amplitude,
)
from ppwitness.protocol import random_rotation_matrix

Z = np.array([0.0, 0.0, 1.0])


def pulse(omega=16000.0, t0=0.0, sigma=50.0, eta=1e-4, phi=0.0, pol=Z):
    return Pulse(omega_cm1=omega, t_center=t0, sigma_t=sigma, polarization=pol, eta=eta, phi=phi)


@pytest.fixture(scope="module")
def electronic_structure():
    p = apc_preset().replace(g_a=0.0, g_b=0.0)
    return exciton_structure(assemble(p, build_space(0)))


def test_field_peak_value_rwa_off():
    p = pulse(t0=0.0)
    assert field_at(p, 0.0, rwa=False) == pytest.approx(2.0, abs=1e-12)
    assert field_at(p, 0.0, rwa=True) == pytest.approx(1.0, abs=1e-12)


def test_field_gaussian_tail():
    p = pulse(t0=0.0, sigma=10.0)
    env = abs(field_at(p, 50.0, rwa=True))
    assert env == pytest.approx(math.exp(-12.5), rel=1e-9)


def test_field_phase_flip_negates():
    p0 = pulse(phi=0.0)
    p1 = pulse(phi=math.pi)
    for t in (-13.0, 0.0, 7.7):
        assert field_at(p1, t, rwa=False) == pytest.approx(-field_at(p0, t, rwa=False), abs=1e-12)


def test_spectral_amplitude_peak_and_detuning():
    p = pulse(omega=16000.0, sigma=103.0, eta=2e-4)
    peak = abs(spectral_amplitude(p, 16000.0))
    assert peak == pytest.approx(2e-4 * 103.0 * math.sqrt(2 * math.pi), rel=1e-12)
    # detuning with Delta * sigma_t = 3 (internal units) suppresses by e^{-4.5}
    delta = 3.0 / 103.0 / cm1_to_radfs(1.0)
    val = abs(spectral_amplitude(p, 16000.0 + delta))
    assert val / peak == pytest.approx(math.exp(-4.5), rel=1e-9)


def test_parseval():
    p = pulse(omega=16000.0, sigma=30.0, eta=3e-4, t0=200.0)
    t = np.linspace(-400.0, 800.0, 200001)
    e_t = p.eta * np.exp(-((t - p.t_center) ** 2) / (2 * p.sigma_t**2))
    lhs = np.trapezoid(np.abs(e_t) ** 2, t)
    w0 = cm1_to_radfs(p.omega_cm1)
    w = np.linspace(w0 - 1.0, w0 + 1.0, 200001)
    from ppwitness.core import radfs_to_cm1

    e_w = np.array([spectral_amplitude(p, radfs_to_cm1(x)) for x in w[:: len(w) // 2001]])
    # quadrature on a coarser grid for speed; integrand is smooth Gaussian
    wc = w[:: len(w) // 2001]
    rhs = np.trapezoid(np.abs(e_w) ** 2, wc) / (2 * math.pi)
    assert rhs == pytest.approx(lhs, rel=1e-9)


def test_omega_amplitude_dark_transition():
    p = pulse(pol=Z)
    mu = np.array([1.0, 0.0, 0.0])
    assert omega_amplitude(p, mu, 16000.0) == 0.0


def test_omega_amplitude_linear_in_eta():
    mu = np.array([0.3, 0.0, 0.95])
    a1 = omega_amplitude(pulse(eta=1e-4), mu, 16000.0)
    a2 = omega_amplitude(pulse(eta=2e-4), mu, 16000.0)
    assert a2 == pytest.approx(2.0 * a1, rel=1e-12)


def test_pi_factor_resonant_aligned_value():
    # Pi = (mu eta / hbar)^2 up to the FT normalization (sigma sqrt(2 pi))^2
    mu = 0.8 * Z
    p = pulse(omega=15000.0, sigma=40.0, eta=5e-4)
    expected = (0.8 * 5e-4 * 40.0 * math.sqrt(2 * math.pi)) ** 2
    assert pi_factor(p, mu, 15000.0, "spectral") == pytest.approx(expected, rel=1e-12)
    assert pi_factor(p, mu, 15000.0, "resonant") == pytest.approx(expected, rel=1e-12)
    # detuned: spectral suppressed, resonant unchanged
    assert pi_factor(p, mu, 15500.0, "spectral") < expected
    assert pi_factor(p, mu, 15500.0, "resonant") == pytest.approx(expected, rel=1e-12)


def test_pi_factors_nonnegative_random():
    rng = np.random.default_rng(3)
    for _ in range(200):
        mu = rng.normal(size=3)
        pol = rng.normal(size=3)
        pol /= np.linalg.norm(pol)
        p = pulse(omega=rng.uniform(14000, 17000), pol=pol)
        assert pi_factor(p, mu, rng.uniform(14000, 17000)) >= 0.0


def test_pulse_pair_overlap_guard():
    pump = pulse(t0=0.0, sigma=50.0)
    probe = pulse(t0=100.0, sigma=50.0)
    with pytest.raises(ValueError):
        PulsePair(pump=pump, probe=probe, label=("+", "+"), require_isolated=True)
    PulsePair(pump=pump, probe=probe, label=("+", "+"))  # relaxed by default


def test_dark_probe_zero_signal(electronic_structure):
    st = electronic_structure
    pairs = make_pulse_pairs(st, sigma_t=50.0, eta=1e-4, tau=600.0, e_pump=Z, e_probe=Z)
    pair = pairs[("+", "+")]
    # make the probe dark by pointing its polarization perpendicular to every dipole
    dark = Pulse(
        omega_cm1=pair.probe.omega_cm1,
        t_center=pair.probe.t_center,
        sigma_t=50.0,
        polarization=np.array([0.0, 1.0, 0.0]),
        eta=1e-4,
    )
    dark_pair = PulsePair(pump=pair.pump, probe=dark, label=("+", "+"))
    s = perturbative_signal(dark_pair, st, np.array([1.0, 0.0, 0.0, 1.0]))
    assert s == 0.0


def test_signal_identity_chi_substitution(electronic_structure):
    # chi = identity, pump and probe both targeting alpha:
    # S = Pi_fa' Pi_ag - Pi_ga' Pi_ag - (Pi_ga' + Pi_gb') (Pi_ag + Pi_bg) ... direct substitution
    st = electronic_structure
    pairs = make_pulse_pairs(st, sigma_t=50.0, eta=1e-4, tau=600.0, e_pump=Z, e_probe=Z)
    pair = pairs[("-", "-")]
    chi = np.array([1.0, 0.0, 0.0, 1.0])
    from ppwitness.optics import signal_components

    esa, se, gsb = signal_components(pair, st, chi)
    a = [
        pi_factor(pair.pump, st.dipole("g-alpha"), st.transition_energy_cm1("g-alpha")),
        pi_factor(pair.pump, st.dipole("g-beta"), st.transition_energy_cm1("g-beta")),
    ]
    b = [
        pi_factor(pair.probe, st.dipole("g-alpha"), st.transition_energy_cm1("g-alpha")),
        pi_factor(pair.probe, st.dipole("g-beta"), st.transition_energy_cm1("g-beta")),
    ]
    c = [
        pi_factor(pair.probe, st.dipole("alpha-f"), st.transition_energy_cm1("alpha-f")),
        pi_factor(pair.probe, st.dipole("beta-f"), st.transition_energy_cm1("beta-f")),
    ]
    assert esa == pytest.approx(c[0] * a[0] + c[1] * a[1], rel=1e-12)
    assert se == pytest.approx(-(b[0] * a[0] + b[1] * a[1]), rel=1e-12)
    assert gsb == pytest.approx(-(b[0] + b[1]) * (a[0] + a[1]), rel=1e-12)


def test_full_form_reduces_to_population_form(electronic_structure):
    st = electronic_structure
    rng = np.random.default_rng(11)
    pairs = make_pulse_pairs(st, sigma_t=60.0, eta=2e-4, tau=700.0, e_pump=Z, e_probe=Z)
    for label in pairs:
        for _ in range(20):
            diag = rng.uniform(0.0, 1.0, size=4)
            chi_full = np.zeros((4, 4))
            # population-diagonal: only (ii),(pp) entries
            for qi, q in enumerate((0, 3)):
                for pi_, p in enumerate((0, 3)):
                    chi_full[q, p] = diag[2 * qi + pi_]
            s_red = perturbative_signal(pairs[label], st, diag)
            s_full = perturbative_signal_full(pairs[label], st, chi_full)
            assert s_full == pytest.approx(s_red, abs=1e-12 + 1e-9 * abs(s_red))


def test_signal_invariant_under_global_rotation(electronic_structure):
    st = electronic_structure
    rng = np.random.default_rng(5)
    chi = rng.uniform(0, 1, size=4)
    rot = random_rotation_matrix(rng)
    p = st.params
    e_pump = Z
    e_probe = np.array([math.sin(0.9553), 0.0, math.cos(0.9553)])
    pairs = make_pulse_pairs(st, 50.0, 1e-4, 500.0, e_pump, e_probe)
    s0 = {k: perturbative_signal(v, st, chi) for k, v in pairs.items()}

    from dataclasses import replace

    p_rot = p.with_dipoles(rot @ p.mu_a, rot @ p.mu_b)
    st_rot = replace(st, params=p_rot)
    pairs_rot = make_pulse_pairs(st_rot, 50.0, 1e-4, 500.0, rot @ e_pump, rot @ e_probe)
    for k in pairs:
        s1 = perturbative_signal(pairs_rot[k], st_rot, chi)
        assert s1 == pytest.approx(s0[k], rel=1e-10)
