import math

import numpy as np
import pytest

from ppwitness.core import apc_preset
from ppwitness.dynamics import (
    FieldSet,
    PropagationPlan,
    check_dt,
    exact_propagator,
    propagate,
    propagate_batch,
)
from ppwitness.model import assemble, build_space, exciton_structure
from ppwitness.optics import Pulse


@pytest.fixture(scope="module")
def apc_ham():
    return assemble(apc_preset(), build_space(2))


def random_state(d, rng):
    psi = rng.normal(size=d) + 1j * rng.normal(size=d)
    return psi / np.linalg.norm(psi)


def test_exact_propagator_identity_at_t0(apc_ham):
    u = exact_propagator(apc_ham, 0.0)
    np.testing.assert_allclose(u, np.eye(apc_ham.space.d), atol=1e-12)


def test_exact_propagator_diagonal_hamiltonian():
    p = apc_preset().replace(J=0.0, g_a=0.0, g_b=0.0)
    ham = assemble(p, build_space(1))
    t = 37.5
    u = exact_propagator(ham, t)
    expected = np.diag(np.exp(-1j * np.diag(ham.h_total) * t))
    np.testing.assert_allclose(u, expected, atol=1e-10)


def test_exact_propagator_unitarity_1000fs(apc_ham):
    u = exact_propagator(apc_ham, 1000.0)
    np.testing.assert_allclose(u @ u.conj().T, np.eye(apc_ham.space.d), atol=1e-10)


def test_zero_field_matches_spectral_oracle(apc_ham):
    rng = np.random.default_rng(7)
    psi = random_state(apc_ham.space.d, rng)
    plan = PropagationPlan(dt=0.5, t_start=0.0, t_end=500.0, frame="lab")
    times, states = propagate(psi, apc_ham, [], plan)
    u = exact_propagator(apc_ham, 500.0)
    np.testing.assert_allclose(states[-1], u @ psi, atol=1e-8)
    norms = np.linalg.norm(states, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-8


def test_ground_state_is_stationary(apc_ham):
    sp = apc_ham.space
    psi = np.zeros(sp.d, dtype=complex)
    psi[sp.index("g", 0, 0)] = 1.0
    plan = PropagationPlan(dt=1.0, t_start=0.0, t_end=200.0)
    _, states = propagate(psi, apc_ham, [], plan)
    overlap = abs(np.vdot(psi, states[-1]))
    assert overlap == pytest.approx(1.0, abs=1e-10)


def _probe_pulse(structure, eta, sigma_t=20.0, phi=0.0):
    return Pulse(
        omega_cm1=structure.transition_energy_cm1("g-alpha"),
        t_center=5 * sigma_t,
        sigma_t=sigma_t,
        polarization=np.array([0.0, 0.0, 1.0]),
        eta=eta,
        phi=phi,
    )


def test_field_trajectory_linear_in_eta(apc_ham):
    structure = exciton_structure(apc_ham)
    sp = apc_ham.space
    psi = np.zeros(sp.d, dtype=complex)
    psi[sp.index("g", 0, 0)] = 1.0
    plan = PropagationPlan(dt=0.1, t_start=0.0, t_end=220.0, frame="lab")
    _, free = propagate(psi, apc_ham, [], plan)

    def deviation(eta):
        _, states = propagate(psi, apc_ham, [_probe_pulse(structure, eta)], plan)
        return np.linalg.norm(states - free)

    eta0 = 1e-6
    d1 = deviation(eta0)
    d2 = deviation(2 * eta0)
    assert d2 / d1 == pytest.approx(2.0, rel=5e-3)


def test_timestep_halving_order(apc_ham):
    structure = exciton_structure(apc_ham)
    sp = apc_ham.space
    psi = np.zeros(sp.d, dtype=complex)
    psi[sp.index("g", 0, 0)] = 1.0
    pulse = _probe_pulse(structure, eta=2e-4, sigma_t=20.0)

    def final_state(dt):
        plan = PropagationPlan(dt=dt, t_start=0.0, t_end=200.0, frame="lab")
        _, states = propagate(psi, apc_ham, [pulse], plan)
        return states[-1]

    ref = final_state(0.0125)
    e1 = np.linalg.norm(final_state(0.1) - ref)
    e2 = np.linalg.norm(final_state(0.05) - ref)
    order = math.log2(e1 / e2)
    assert abs(order - 2.0) < 0.5


def test_propagation_is_deterministic(apc_ham):
    structure = exciton_structure(apc_ham)
    sp = apc_ham.space
    psi = np.zeros(sp.d, dtype=complex)
    psi[sp.index("g", 0, 0)] = 1.0
    plan = PropagationPlan(dt=0.1, t_start=0.0, t_end=150.0, frame="lab")
    pulse = _probe_pulse(structure, eta=1e-4)
    _, a = propagate(psi, apc_ham, [pulse], plan)
    _, b = propagate(psi, apc_ham, [pulse], plan)
    assert np.array_equal(a, b)


def test_rotating_frame_matches_lab(apc_ham):
    structure = exciton_structure(apc_ham)
    sp = apc_ham.space
    psi = np.zeros(sp.d, dtype=complex)
    psi[sp.index("g", 0, 0)] = 1.0
    pulse = _probe_pulse(structure, eta=2e-4, sigma_t=15.0)
    plan_lab = PropagationPlan(dt=0.01, t_start=0.0, t_end=150.0, frame="lab")
    plan_rot = PropagationPlan(dt=0.01, t_start=0.0, t_end=150.0, frame="rotating")
    _, lab = propagate(psi, apc_ham, [pulse], plan_lab)
    _, rot = propagate(psi, apc_ham, [pulse], plan_rot)
    assert np.linalg.norm(lab[-1] - rot[-1]) < 1e-6


def test_dt_invariant_enforced(apc_ham):
    structure = exciton_structure(apc_ham)
    pulse = _probe_pulse(structure, eta=1e-4)
    plan = PropagationPlan(dt=1.0, t_start=0.0, t_end=100.0, frame="lab")
    with pytest.raises(ValueError, match="retained frequency"):
        check_dt(plan, [pulse])
    # rotating frame removes the carrier, so dt = 1.0 fs is allowed
    check_dt(
        PropagationPlan(dt=1.0, t_start=0.0, t_end=100.0, frame="rotating"), [pulse]
    )


def test_batch_propagation_matches_single(apc_ham):
    structure = exciton_structure(apc_ham)
    sp = apc_ham.space
    psi = np.zeros(sp.d, dtype=complex)
    psi[sp.index("g", 0, 0)] = 1.0
    pulse_a = _probe_pulse(structure, eta=1e-4)
    pulse_b = _probe_pulse(structure, eta=3e-4, phi=math.pi)
    plan = PropagationPlan(dt=0.1, t_start=0.0, t_end=150.0, frame="lab")
    fields = FieldSet.from_pulses(
        [[pulse_a], [pulse_b]], [apc_ham.params, apc_ham.params]
    )
    batch0 = np.stack([psi, psi], axis=1)
    final, _ = propagate_batch(apc_ham, batch0, fields, plan)
    _, sa = propagate(psi, apc_ham, [pulse_a], plan)
    _, sb = propagate(psi, apc_ham, [pulse_b], plan)
    np.testing.assert_allclose(final[:, 0], sa[-1], atol=1e-12)
    np.testing.assert_allclose(final[:, 1], sb[-1], atol=1e-12)
