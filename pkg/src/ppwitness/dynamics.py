"""Time propagation: exact spectral propagator and a unitary split-step integrator.

The time-dependent Hamiltonian is H(t) = H_total + W(t) with the light-matter
term purely electronic, W(t) = w(t) (x) I_phonon.  One step of length dt is

    psi <- exp(-i H0 dt/2) exp(-i W(t+dt/2) dt) exp(-i H0 dt/2) psi

Both factors are exactly unitary: the free half-step comes from the spectral
decomposition of H0, and the field factor is the exponential of a 4x4
Hermitian electronic matrix applied blockwise.  With zero field the scheme
reduces to the exact propagator.

Frames: 'lab' integrates the RWA (or full-carrier) field as given; 'rotating'
is the interaction picture w.r.t. omega_ref * N_exc, which is exact under the
RWA because N_exc commutes with H0.  Manifold populations are identical in
both frames; returned state trajectories are always in the lab frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import cm1_to_radfs
from .model import HilbertSpace, VibronicHamiltonian
from .optics import Pulse

NORM_DRIFT_FAIL = 1e-6


class IntegratorError(RuntimeError):
    """Norm drift exceeded the failure threshold (dt too large)."""


@dataclass(frozen=True)
class PropagationPlan:
    """Step size, window and frame for one propagation."""

    dt: float
    t_start: float
    t_end: float
    frame: str = "lab"  # 'lab' | 'rotating'
    rwa: bool = True
    omega_ref_cm1: float | None = None  # rotating-frame reference; default: mean carrier

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_end < self.t_start:
            raise ValueError("t_end must be >= t_start")
        if self.frame not in ("lab", "rotating"):
            raise ValueError("frame must be 'lab' or 'rotating'")

    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps() + 1)


def check_dt(plan: PropagationPlan, pulses) -> None:
    """Enforce dt <= (1/20) * 2*pi / omega_max for the retained carriers.

    omega_max is the largest field frequency surviving in the chosen frame:
    the carrier itself in the lab frame, the carrier-reference detuning in
    the rotating frame.  Zero-field propagation is exact at any dt.
    """
    if not pulses:
        return
    carriers = np.array([cm1_to_radfs(p.omega_cm1) for p in pulses])
    if plan.frame == "rotating":
        ref = _omega_ref(plan, pulses)
        retained = np.abs(carriers - ref)
    else:
        retained = np.abs(carriers)
    omega_max = float(np.max(retained))
    if omega_max > 0.0 and plan.dt > (2.0 * math.pi / omega_max) / 20.0:
        raise ValueError(
            f"dt={plan.dt} fs does not resolve the fastest retained frequency "
            f"{omega_max:.4g} rad/fs (limit {(2.0 * math.pi / omega_max) / 20.0:.4g} fs)"
        )


def _omega_ref(plan: PropagationPlan, pulses) -> float:
    if plan.omega_ref_cm1 is not None:
        return cm1_to_radfs(plan.omega_ref_cm1)
    if not pulses:
        return 0.0
    return float(np.mean([cm1_to_radfs(p.omega_cm1) for p in pulses]))


def exact_propagator(ham: VibronicHamiltonian, t: float) -> np.ndarray:
    """U = exp(-i H_total t), computed from the spectral decomposition."""
    evals, evecs = ham.eigensystem
    phases = np.exp(-1j * evals * t)
    return (evecs * phases[np.newaxis, :]) @ evecs.conj().T


@dataclass(frozen=True, eq=False)
class FieldSet:
    """Per-trajectory pulse data for a batch (all arrays shaped (B, n_pulses)).

    c_a, c_b are the site-dipole projections mu_a.e_n, mu_b.e_n of each pulse,
    which is all the propagator needs of polarization and orientation.
    """

    omega: np.ndarray  # carrier, rad/fs
    t_center: np.ndarray
    sigma_t: np.ndarray
    eta: np.ndarray
    phi: np.ndarray
    c_a: np.ndarray
    c_b: np.ndarray

    @property
    def batch(self) -> int:
        return self.omega.shape[0]

    @staticmethod
    def from_pulses(pulse_rows, params_rows) -> "FieldSet":
        """Build from a list of pulse lists; row k uses params_rows[k] dipoles."""
        n_b = len(pulse_rows)
        n_p = max(len(r) for r in pulse_rows)
        shape = (n_b, n_p)
        omega = np.zeros(shape)
        t_center = np.zeros(shape)
        sigma_t = np.ones(shape)
        eta = np.zeros(shape)
        phi = np.zeros(shape)
        c_a = np.zeros(shape)
        c_b = np.zeros(shape)
        for k, (row, par) in enumerate(zip(pulse_rows, params_rows)):
            for n, p in enumerate(row):
                omega[k, n] = cm1_to_radfs(p.omega_cm1)
                t_center[k, n] = p.t_center
                sigma_t[k, n] = p.sigma_t
                eta[k, n] = p.eta
                phi[k, n] = p.phi
                c_a[k, n] = float(np.dot(par.mu_a, p.polarization))
                c_b[k, n] = float(np.dot(par.mu_b, p.polarization))
        return FieldSet(omega, t_center, sigma_t, eta, phi, c_a, c_b)


def _field_scalars(fields: FieldSet, t: float, rwa: bool, omega_ref: float):
    """Per-column electronic coupling amplitudes (u_a, u_b) at time t.

    RWA on: u_i = -sum_n eta_n G_n(t) exp(-i((omega_n - omega_ref) t + phi_n)) c_{n,i}
    RWA off: the full carrier 2 cos(omega_n t + phi_n) is kept (lab frame only).
    """
    env = fields.eta * np.exp(-((t - fields.t_center) ** 2) / (2.0 * fields.sigma_t**2))
    if rwa:
        carrier = np.exp(-1j * ((fields.omega - omega_ref) * t + fields.phi))
    else:
        carrier = 2.0 * np.cos(fields.omega * t + fields.phi)
    z = -env * carrier
    u_a = np.sum(z * fields.c_a, axis=1)
    u_b = np.sum(z * fields.c_b, axis=1)
    return u_a, u_b


def _field_exponentials(u_a: np.ndarray, u_b: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i W dt) for the electronic field matrix, batched, shape (B, 4, 4).

    W = u_a A_a^dag + u_b A_b^dag + h.c. couples (g, f) to (a, b) only.
    Batched eigendecomposition keeps the factor exactly unitary.
    """
    n_b = u_a.shape[0]
    w = np.zeros((n_b, 4, 4), dtype=complex)
    # raising part: a<-g: u_a ; b<-g: u_b ; f<-b: u_a ; f<-a: u_b
    w[:, 1, 0] = u_a
    w[:, 2, 0] = u_b
    w[:, 3, 2] = u_a
    w[:, 3, 1] = u_b
    w += np.conj(np.swapaxes(w, 1, 2))
    evals, evecs = np.linalg.eigh(w)
    phase = np.exp(-1j * evals * dt)
    return np.einsum("bij,bj,bkj->bik", evecs, phase, np.conj(evecs))


class PopulationRecorder:
    """Collects ground- and 2EM-manifold populations at requested step indices."""

    def __init__(self, space: HilbertSpace, record_steps, batch: int):
        self.slice_g = space.electronic_slice("g")
        self.slice_f = space.electronic_slice("f")
        self.record_steps = sorted(set(int(k) for k in record_steps))
        self._want = set(self.record_steps)
        self.p_g = np.zeros((len(self.record_steps), batch))
        self.p_f = np.zeros((len(self.record_steps), batch))
        self.norms = np.zeros((len(self.record_steps), batch))
        self._pos = {k: i for i, k in enumerate(self.record_steps)}

    def wants(self, step: int) -> bool:
        return step in self._want

    def record(self, step: int, psi: np.ndarray) -> None:
        i = self._pos[step]
        self.p_g[i] = np.sum(np.abs(psi[self.slice_g]) ** 2, axis=0)
        self.p_f[i] = np.sum(np.abs(psi[self.slice_f]) ** 2, axis=0)
        self.norms[i] = np.sum(np.abs(psi) ** 2, axis=0)


def propagate_batch(
    ham: VibronicHamiltonian,
    psi0: np.ndarray,
    fields: FieldSet | None,
    plan: PropagationPlan,
    recorder: PopulationRecorder | None = None,
    store_states: bool = False,
):
    """Propagate a batch of states (columns of psi0, shape (d, B)).

    Returns (psi_final, states) with states of shape (n_steps+1, d, B) when
    store_states is set (lab frame), else None.  Populations are recorded via
    the optional recorder (frame-independent).
    """
    evals, evecs = ham.eigensystem
    nv2 = ham.space.n_vib**2
    omega_ref = 0.0
    if fields is not None and plan.frame == "rotating":
        active = fields.eta > 0
        omega_ref = float(np.mean(fields.omega[active])) if np.any(active) else 0.0
        if plan.omega_ref_cm1 is not None:
            omega_ref = cm1_to_radfs(plan.omega_ref_cm1)

    if omega_ref:
        # N_exc commutes with H0, so the rotating-frame H0 shares eigenvectors
        # with eigenvalues shifted by omega_ref times the manifold number.
        shifted = evals - omega_ref * np.einsum(
            "i,ij->j", ham.space.n_exc_diagonal, np.abs(evecs) ** 2
        )
    else:
        shifted = evals
    dt = plan.dt
    e_half = (evecs * np.exp(-1j * shifted * dt / 2.0)[np.newaxis, :]) @ evecs.conj().T
    e_full = e_half @ e_half

    psi = np.array(psi0, dtype=complex)
    single = psi.ndim == 1
    if single:
        psi = psi[:, np.newaxis]
    n_steps = plan.n_steps()
    times = plan.times()

    states = None
    n_exc_col = ham.space.n_exc_diagonal[:, np.newaxis]
    if store_states:
        states = np.empty((n_steps + 1, psi.shape[0], psi.shape[1]), dtype=complex)

    def lab_frame(p, t):
        if omega_ref:
            return p * np.exp(-1j * omega_ref * n_exc_col * t)
        return p

    if store_states:
        states[0] = lab_frame(psi, times[0])
    if recorder is not None and recorder.wants(0):
        recorder.record(0, psi)

    zero_field = fields is None or not np.any(fields.eta > 0)

    # Strang: half free step, then [field(t_mid); full free step] per step,
    # with the trailing half step folded back at record points.
    e_minus_half = None
    psi = e_half @ psi
    for k in range(n_steps):
        t_mid = times[k] + 0.5 * dt
        if not zero_field:
            u_a, u_b = _field_scalars(fields, t_mid, plan.rwa, omega_ref)
            if np.any(u_a) or np.any(u_b):
                x = _field_exponentials(u_a, u_b, dt)  # (B,4,4)
                psi_blocks = psi.reshape(4, nv2, psi.shape[1])
                psi = np.einsum("bij,jnb->inb", x, psi_blocks).reshape(psi.shape)
        psi = e_full @ psi if k < n_steps - 1 else e_half @ psi
        step = k + 1
        at_grid = step == n_steps
        if (recorder is not None and recorder.wants(step)) or store_states:
            if at_grid:
                psi_grid = psi
            else:
                if e_minus_half is None:
                    e_minus_half = (
                        evecs * np.exp(+1j * shifted * dt / 2.0)[np.newaxis, :]
                    ) @ evecs.conj().T
                psi_grid = e_minus_half @ psi
            if recorder is not None and recorder.wants(step):
                recorder.record(step, psi_grid)
            if store_states:
                states[step] = lab_frame(psi_grid, times[step])

    norms = np.sqrt(np.sum(np.abs(psi) ** 2, axis=0))
    drift = np.max(np.abs(norms - np.sqrt(np.sum(np.abs(psi0.reshape(psi.shape[0], -1)) ** 2, axis=0))))
    if drift > NORM_DRIFT_FAIL:
        raise IntegratorError(f"norm drift {drift:.3e} exceeds {NORM_DRIFT_FAIL:.0e}")

    if single:
        psi = psi[:, 0]
        if states is not None:
            states = states[:, :, 0]
    return psi, states


def propagate(
    psi: np.ndarray,
    ham: VibronicHamiltonian,
    pulses: list[Pulse],
    plan: PropagationPlan,
) -> tuple[np.ndarray, np.ndarray]:
    """Propagate one normalized state; returns (times, states (n_t, d)).

    The trajectory is sampled at every step in the lab frame.  Zero-field
    propagation reproduces exp(-i H t) psi to round-off by construction.
    """
    check_dt(plan, pulses)
    fields = None
    if pulses:
        fields = FieldSet.from_pulses([list(pulses)], [ham.params])
    _, states = propagate_batch(ham, np.asarray(psi, dtype=complex), fields, plan, store_states=True)
    return plan.times(), states
