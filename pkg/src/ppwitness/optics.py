"""Pulses, spectral amplitudes, transition probability factors and the
first-order pump-probe signal expressions.

Fourier convention: Etilde(omega) = integral E(t) exp(i omega t) dt applied to
the co-rotating pulse E(t) = eta G(t) exp(-i(omega_n t + phi)), which gives

    Etilde(omega) = eta sigma_t sqrt(2 pi)
                    * exp(-(omega - omega_n)^2 sigma_t^2 / 2)
                    * exp(i (omega - omega_n) t_n) exp(-i phi).

|Etilde(omega_ij) mu_ij.e / hbar|^2 is then exactly the first-order transition
probability of the split-step propagator, so signals simulated by the TDSE
and the Pi-factor expressions share one normalization.

Two Pi-factor models are provided: 'spectral' keeps the Gaussian detuning
weight (the physical model); 'resonant' drops it, treating every
polarization-allowed transition as resonantly driven.  The resonant model is
the idealization under which perfectly selective pulse sets make the
inversion matrix exactly singular, biexciton shift included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .core import cm1_to_radfs

PI_MODELS = ("spectral", "resonant")
PAIR_LABELS = (("+", "+"), ("+", "-"), ("-", "+"), ("-", "-"))


@dataclass(frozen=True, eq=False)
class Pulse:
    """Gaussian pulse: carrier omega (cm^-1), center t_n (fs), width sigma_t
    (fs), unit polarization, amplitude eta (interaction energy per dipole
    unit, rad/fs here), carrier phase phi (rad)."""

    omega_cm1: float
    t_center: float
    sigma_t: float
    polarization: np.ndarray
    eta: float
    phi: float = 0.0

    def __post_init__(self):
        if self.sigma_t <= 0.0:
            raise ValueError("sigma_t must be positive")
        if self.eta < 0.0:
            raise ValueError("eta must be >= 0")
        pol = np.array(self.polarization, dtype=float)
        norm = np.linalg.norm(pol)
        if not math.isclose(norm, 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise ValueError("polarization must be a unit vector")
        pol.flags.writeable = False
        object.__setattr__(self, "polarization", pol)

    def with_phase(self, phi: float) -> "Pulse":
        return replace(self, phi=phi)

    def with_eta(self, eta: float) -> "Pulse":
        return replace(self, eta=eta)

    def with_center(self, t_center: float) -> "Pulse":
        return replace(self, t_center=t_center)


@dataclass(frozen=True, eq=False)
class PulsePair:
    """Pump-probe pulse pair with label (pump sign, probe sign)."""

    pump: Pulse
    probe: Pulse
    label: tuple[str, str]
    require_isolated: bool = False

    def __post_init__(self):
        if self.tau <= 0.0 and self.require_isolated:
            raise ValueError("pump must precede probe")
        if self.require_isolated and self.tau <= 5.0 * (self.pump.sigma_t + self.probe.sigma_t):
            raise ValueError("pulses overlap at the 5-sigma level")

    @property
    def tau(self) -> float:
        return self.probe.t_center - self.pump.t_center


def field_at(pulse: Pulse, t: float, rwa: bool = True) -> complex:
    """Scalar envelope-times-carrier of the pulse at time t (eta and
    polarization excluded).  RWA keeps only the co-rotating exponential."""
    omega = cm1_to_radfs(pulse.omega_cm1)
    env = np.exp(-((t - pulse.t_center) ** 2) / (2.0 * pulse.sigma_t**2))
    if rwa:
        return env * np.exp(-1j * (omega * t + pulse.phi))
    return env * (np.exp(-1j * (omega * t + pulse.phi)) + np.exp(1j * (omega * t + pulse.phi)))


def spectral_amplitude(pulse: Pulse, omega_cm1: float) -> complex:
    """Etilde(omega) under the documented convention (includes eta)."""
    omega = cm1_to_radfs(omega_cm1)
    omega_n = cm1_to_radfs(pulse.omega_cm1)
    det = omega - omega_n
    mag = pulse.eta * pulse.sigma_t * math.sqrt(2.0 * math.pi) * np.exp(
        -(det**2) * pulse.sigma_t**2 / 2.0
    )
    return mag * np.exp(1j * det * pulse.t_center) * np.exp(-1j * pulse.phi)


def omega_amplitude(pulse: Pulse, mu_ij, omega_ij_cm1: float) -> complex:
    """Transition probability amplitude Omega = Etilde(omega_ij) mu_ij.e / hbar."""
    return spectral_amplitude(pulse, omega_ij_cm1) * float(
        np.dot(np.asarray(mu_ij, dtype=float), pulse.polarization)
    )


def pi_factor(pulse: Pulse, mu_ij, omega_ij_cm1: float, model: str = "spectral") -> float:
    """Pi = |Omega|^2, the one-pulse transition probability for the line.

    model='resonant' drops the Gaussian detuning weight (Pi depends on the
    polarization projection and pulse strength only).
    """
    if model not in PI_MODELS:
        raise ValueError(f"unknown Pi model {model!r}")
    proj = float(np.dot(np.asarray(mu_ij, dtype=float), pulse.polarization))
    peak = pulse.eta * pulse.sigma_t * math.sqrt(2.0 * math.pi)
    if model == "resonant":
        return (peak * proj) ** 2
    omega = cm1_to_radfs(omega_ij_cm1)
    omega_n = cm1_to_radfs(pulse.omega_cm1)
    weight = np.exp(-((omega - omega_n) ** 2) * pulse.sigma_t**2)
    return (peak * proj) ** 2 * float(weight)


def _pi_table(pulse: Pulse, structure, model: str):
    """Pump factors A_p, stimulated-emission factors B_q, ESA factors C_q."""
    a = np.array(
        [
            pi_factor(pulse, structure.dipole("g-alpha"), structure.transition_energy_cm1("g-alpha"), model),
            pi_factor(pulse, structure.dipole("g-beta"), structure.transition_energy_cm1("g-beta"), model),
        ]
    )
    c = np.array(
        [
            pi_factor(pulse, structure.dipole("alpha-f"), structure.transition_energy_cm1("alpha-f"), model),
            pi_factor(pulse, structure.dipole("beta-f"), structure.transition_energy_cm1("beta-f"), model),
        ]
    )
    return a, a.copy(), c


def signal_components(pair: PulsePair, structure, chi_vec, model: str = "spectral"):
    """(S_ESA, S_SE, S_GSB) of the reduced population-only expressions.

    chi_vec is (chi_aaaa, chi_aabb, chi_bbaa, chi_bbbb); columns of the
    4-vector are ordered (q, p) = (a,a), (a,b), (b,a), (b,b).
    """
    chi = np.asarray(chi_vec, dtype=float)
    a_pump, _, _ = _pi_table(pair.pump, structure, model)
    _, b_probe, c_probe = _pi_table(pair.probe, structure, model)
    chi_qp = chi.reshape(2, 2)  # [q, p]
    esa = float(np.einsum("q,p,qp->", c_probe, a_pump, chi_qp))
    se = -float(np.einsum("q,p,qp->", b_probe, a_pump, chi_qp))
    gsb = -float(np.sum(b_probe) * np.sum(a_pump))
    return esa, se, gsb


def perturbative_signal(pair: PulsePair, structure, chi, model: str = "spectral") -> float:
    """Reduced first-order pump-probe signal S = S_ESA + S_SE + S_GSB.

    chi may be a ReducedChi (with .vec) or a plain 4-vector at the pair's
    delay.  ESA enters positive, SE and GSB negative.
    """
    chi_vec = chi.vec if hasattr(chi, "vec") else np.asarray(chi, dtype=float)
    esa, se, gsb = signal_components(pair, structure, chi_vec, model)
    return esa + se + gsb


def perturbative_signal_full(pair: PulsePair, structure, chi_full: np.ndarray) -> float:
    """Full 16-element form of the signal for validation.

    chi_full is a 4x4 process tensor on vectorized 1EM density matrices with
    index order (aa, ab, ba, bb).  Dipole phases are real in this model, so
    conjugate-pulse amplitudes are complex conjugates.
    """
    dip = {
        "a": structure.dipole("g-alpha"),
        "b": structure.dipole("g-beta"),
    }
    dip_f = {
        "a": structure.dipole("alpha-f"),
        "b": structure.dipole("beta-f"),
    }
    w_g = {
        "a": structure.transition_energy_cm1("g-alpha"),
        "b": structure.transition_energy_cm1("g-beta"),
    }
    w_f = {
        "a": structure.transition_energy_cm1("alpha-f"),
        "b": structure.transition_energy_cm1("beta-f"),
    }
    states = ("a", "b")
    idx = {("a", "a"): 0, ("a", "b"): 1, ("b", "a"): 2, ("b", "b"): 3}

    om_pump_up = {p: omega_amplitude(pair.pump, dip[p], w_g[p]) for p in states}
    om_probe_up = {p: omega_amplitude(pair.probe, dip[p], w_g[p]) for p in states}
    om_probe_f = {p: omega_amplitude(pair.probe, dip_f[p], w_f[p]) for p in states}

    chi_full = np.asarray(chi_full, dtype=complex)
    s_esa = 0.0 + 0.0j
    s_se = 0.0 + 0.0j
    for i in states:
        for j in states:
            for q in states:
                for p in states:
                    chi_el = chi_full[idx[(i, j)], idx[(q, p)]]
                    pump_w = om_pump_up[q] * np.conj(om_pump_up[p])
                    s_esa += np.conj(om_probe_f[j]) * om_probe_f[i] * pump_w * chi_el
                    s_se += -np.conj(om_probe_up[i]) * om_probe_up[j] * pump_w * chi_el
    s_gsb = 0.0 + 0.0j
    for i in states:
        for p in states:
            s_gsb += -abs(om_probe_up[i]) ** 2 * abs(om_pump_up[p]) ** 2
    return float((s_esa + s_se + s_gsb).real)


def resonant_pulses(
    structure,
    sigma_t: float,
    eta: float,
    e_plus,
    e_minus,
    t_center: float = 0.0,
    carriers: tuple[float, float] | None = None,
):
    """The '+' and '-' pulses targeting the vibrationless g->beta and g->alpha
    transitions, as a dict keyed by sign label.  carriers=(plus, minus) in
    cm^-1 overrides the auto-resonant choice."""
    omega_plus, omega_minus = carriers if carriers is not None else (
        structure.transition_energy_cm1("g-beta"),
        structure.transition_energy_cm1("g-alpha"),
    )
    return {
        "+": Pulse(
            omega_cm1=omega_plus,
            t_center=t_center,
            sigma_t=sigma_t,
            polarization=e_plus,
            eta=eta,
        ),
        "-": Pulse(
            omega_cm1=omega_minus,
            t_center=t_center,
            sigma_t=sigma_t,
            polarization=e_minus,
            eta=eta,
        ),
    }


def make_pulse_pairs(
    structure,
    sigma_t: float,
    eta: float,
    tau: float,
    e_pump,
    e_probe,
    t_pump: float | None = None,
    carriers: tuple[float, float] | None = None,
) -> dict[tuple[str, str], PulsePair]:
    """The four pump-probe pairs (pump sign, probe sign) at delay tau.

    Pump is centered 5 sigma after t=0 unless t_pump is given; the probe
    center is t_pump + tau.  Pump polarization e_pump, probe e_probe.
    """
    if t_pump is None:
        t_pump = 5.0 * sigma_t
    pumps = resonant_pulses(structure, sigma_t, eta, e_pump, e_pump, t_center=t_pump, carriers=carriers)
    probes = resonant_pulses(
        structure, sigma_t, eta, e_probe, e_probe, t_center=t_pump + tau, carriers=carriers
    )
    return {
        (sp, sq): PulsePair(pump=pumps[sp], probe=probes[sq], label=(sp, sq))
        for (sp, sq) in PAIR_LABELS
    }
