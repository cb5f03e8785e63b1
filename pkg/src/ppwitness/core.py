"""Units, physical constants and model parameters shared by all modules.

Conventions
-----------
- Energies cross the public API in wavenumbers (cm^-1) and are converted to
  angular frequencies (rad/fs) internally, with hbar = 1.  ``cm1_to_radfs``
  and ``radfs_to_cm1`` are the only crossing points.
- Time is in femtoseconds everywhere.
- Transition dipoles are 3-vectors in arbitrary dipole units (only relative
  orientations and the pulse amplitude matter for the signal shapes).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

# 1 cm^-1 expressed as an angular frequency in rad/fs:
# 2*pi * c * 100 m^-1, with c = 2.99792458e8 m/s and 1 fs = 1e-15 s.
SPEED_OF_LIGHT_CM_FS = 2.99792458e-5  # cm per fs
CM1_TO_RADFS = 2.0 * math.pi * SPEED_OF_LIGHT_CM_FS  # ~1.8836515e-4 rad/fs

# Pulse width quoted alongside the APC parameters.  Only the temporal width
# is used; the spectral figure is inconsistent with a transform-limited
# Gaussian of that duration and is kept for reference only.
APC_PULSE_SIGMA_T_FS = 103.0
APC_PULSE_SIGMA_REPORTED_CM1 = 322.0

MAGIC_ANGLE_RAD = math.acos(1.0 / math.sqrt(3.0))  # ~54.7356 deg


def cm1_to_radfs(x):
    """Convert energy in cm^-1 to angular frequency in rad/fs (hbar = 1)."""
    return np.asarray(x, dtype=float) * CM1_TO_RADFS if np.ndim(x) else float(x) * CM1_TO_RADFS


def radfs_to_cm1(x):
    """Convert angular frequency in rad/fs back to cm^-1."""
    return np.asarray(x, dtype=float) / CM1_TO_RADFS if np.ndim(x) else float(x) / CM1_TO_RADFS


@dataclass(frozen=True)
class UnitSystem:
    """Fixed internal unit system: hbar = 1, time in fs, energy in rad/fs."""

    cm1_to_radfs: float = CM1_TO_RADFS
    time_unit: str = "fs"
    hbar: float = 1.0


UNITS = UnitSystem()


def _as_dipole(v, name):
    arr = np.array(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {arr.shape}")
    if not np.linalg.norm(arr) > 0.0:
        raise ValueError(f"{name} must be nonzero")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class DimerParams:
    """Site-basis parameters of the vibronic dimer.

    All energies in cm^-1.  ``J`` may be negative.  ``delta_E`` is the
    biexciton shift applied to the doubly excited electronic state.
    """

    eps_a: float
    eps_b: float
    J: float
    omega_a: float
    omega_b: float
    g_a: float
    g_b: float
    delta_E: float = 0.0
    mu_a: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    mu_b: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if not (self.omega_a > 0.0 and self.omega_b > 0.0):
            raise ValueError("phonon frequencies must be positive")
        object.__setattr__(self, "mu_a", _as_dipole(self.mu_a, "mu_a"))
        object.__setattr__(self, "mu_b", _as_dipole(self.mu_b, "mu_b"))

    def huang_rhys(self, site):
        """Huang-Rhys parameter S = g^2 / 2 for site 'a' or 'b' (derived, never stored)."""
        g = {"a": self.g_a, "b": self.g_b}[site]
        return g * g / 2.0

    def with_dipoles(self, mu_a, mu_b) -> "DimerParams":
        """Copy with replaced site dipoles (used for orientation sampling)."""
        return replace(self, mu_a=np.array(mu_a, dtype=float), mu_b=np.array(mu_b, dtype=float))

    def replace(self, **kwargs) -> "DimerParams":
        return replace(self, **kwargs)


def apc_preset() -> DimerParams:
    """Phycoerythrobilin dimer (APC) parameters.

    Site dipoles are unit length with a 40 degree enclosed angle; mu_a is
    along z and mu_b lies in the x-z plane.
    """
    angle = math.radians(40.0)
    return DimerParams(
        eps_a=15300.0,
        eps_b=16200.0,
        J=-162.0,
        omega_a=800.0,
        omega_b=1500.0,
        g_a=0.1,
        g_b=0.15,
        delta_E=0.0,
        mu_a=np.array([0.0, 0.0, 1.0]),
        mu_b=np.array([math.sin(angle), 0.0, math.cos(angle)]),
    )


def coupling_ratio(params: DimerParams) -> float:
    """Electronic-to-vibrational spacing ratio r = 2|J| / (omega_a + omega_b).

    The magnitude of J is used so r >= 0 (the APC preset has J < 0 but is
    quoted at r = 0.14).
    """
    wsum = params.omega_a + params.omega_b
    if wsum <= 0.0:
        raise ValueError("omega_a + omega_b must be positive")
    return 2.0 * abs(params.J) / wsum


def dipole_angle(u, v) -> float:
    """Angle between two dipole vectors, in degrees."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(np.clip(c, -1.0, 1.0)))
