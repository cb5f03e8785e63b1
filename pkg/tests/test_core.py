import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ppwitness.core import (
    CM1_TO_RADFS,
    DimerParams,
    apc_preset,
    cm1_to_radfs,
    coupling_ratio,
    dipole_angle,
    radfs_to_cm1,
)


def test_conversion_constant_value():
    assert CM1_TO_RADFS == pytest.approx(1.8836515e-4, rel=1e-7)


@given(st.floats(min_value=1e-6, max_value=1e6))
def test_unit_round_trip(x):
    assert radfs_to_cm1(cm1_to_radfs(x)) == pytest.approx(x, rel=1e-12)


def test_apc_preset_table_values():
    p = apc_preset()
    assert p.eps_a == 15300.0
    assert p.eps_b == 16200.0
    assert p.J == -162.0
    assert p.omega_a == 800.0
    assert p.omega_b == 1500.0
    assert p.g_a == 0.1
    assert p.g_b == 0.15
    assert p.delta_E == 0.0


def test_apc_preset_dipoles_unit_and_40_degrees():
    p = apc_preset()
    assert np.linalg.norm(p.mu_a) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(p.mu_b) == pytest.approx(1.0, abs=1e-12)
    assert dipole_angle(p.mu_a, p.mu_b) == pytest.approx(40.0, abs=1e-9)


def test_huang_rhys_is_derived():
    p = apc_preset()
    assert p.huang_rhys("b") == pytest.approx(0.01125, abs=1e-15)
    assert p.huang_rhys("a") == pytest.approx(0.1**2 / 2.0, abs=1e-15)


def test_coupling_ratio_apc():
    r = coupling_ratio(apc_preset())
    assert r == pytest.approx(0.1409, abs=1e-4)


def test_coupling_ratio_zero_and_unity():
    p = apc_preset()
    assert coupling_ratio(p.replace(J=0.0)) == 0.0
    q = p.replace(J=-1150.0, omega_a=800.0, omega_b=1500.0)
    assert coupling_ratio(q) == pytest.approx(1.0, abs=1e-15)


def test_coupling_ratio_uses_magnitude_of_j():
    p = apc_preset()
    assert coupling_ratio(p.replace(J=162.0)) == coupling_ratio(p)


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        DimerParams(1.0, 2.0, 0.1, omega_a=-1.0, omega_b=1.0, g_a=0, g_b=0)
    with pytest.raises(ValueError):
        DimerParams(1.0, 2.0, 0.1, omega_a=1.0, omega_b=1.0, g_a=0, g_b=0,
                    mu_a=np.zeros(3), mu_b=np.ones(3))


def test_params_dipoles_are_immutable():
    p = apc_preset()
    with pytest.raises(ValueError):
        p.mu_a[0] = 5.0
