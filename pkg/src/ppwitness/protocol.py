"""The experimental engine: direct TDSE pump-probe simulation with phase
cycling and reference subtraction, inversion-matrix construction, recovery of
the reduced process tensor, orientation-ensemble averaging, and the
three-delay witness protocol.

Signal bookkeeping
------------------
Each run integrates the population-flux combination over the whole window,
S_raw = [P_g(0) - P_g(T)] + [P_f(T) - P_f(0)]  (net absorption minus net
emission).  The excited-state signal of a pulse pair is the phase-averaged
S_raw minus the probe-only and pump-only references.  For pulses separated by
5 sigma this equals integrating the probe-window flux and subtracting the
probe-only response; the pump-only reference additionally removes the pump's
own absorption when the pulses overlap (small tau).

Ensemble averaging
------------------
Orientation samples, pulse pairs and carrier phases form one batch of state
columns propagated together; signals are averaged over orientations first and
the averaged 4x4 system is inverted (the inversion matrix is averaged over
the same samples, so S = M chi - G holds sample-exactly in the weak-field
limit).  A counter-based RNG (Philox) keyed by (seed, sample) makes every
sample stream independent and the result bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import MAGIC_ANGLE_RAD, DimerParams, coupling_ratio
from .dynamics import FieldSet, PopulationRecorder, PropagationPlan, check_dt, propagate_batch
from .model import HilbertSpace, VibronicHamiltonian, assemble, build_space, exciton_structure
from .optics import PAIR_LABELS, Pulse, PulsePair, make_pulse_pairs, pi_factor, resonant_pulses
from .process import ReducedChi, WitnessPoint, theoretical_chi_curve, witness_wb

DEFAULT_KAPPA_MAX = 1e6
DEFAULT_BOOTSTRAP = 200
DEFAULT_ORIENTATIONS = 2000


class IllConditionedError(RuntimeError):
    def __init__(self, kappa):
        super().__init__(f"inversion matrix condition number {kappa:.3e} above threshold")
        self.kappa = kappa


# --- orientation sampling ----------------------------------------------------


def random_rotation_matrix(rng: np.random.Generator) -> np.ndarray:
    """Uniform SO(3) rotation from a normalized Gaussian quaternion."""
    q = rng.normal(size=4)
    q = q / np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def orientation_rotations(seed, n_samples: int, fixed_identity: bool = False):
    """Deterministic per-sample rotations from independent Philox streams."""
    if fixed_identity:
        return [np.eye(3) for _ in range(n_samples)]
    root = np.random.SeedSequence(seed)
    children = root.spawn(n_samples)
    return [random_rotation_matrix(np.random.Generator(np.random.Philox(c))) for c in children]


def magic_angle_probe_polarization(e_pump) -> np.ndarray:
    """A unit vector at the magic angle from e_pump (in a fixed plane)."""
    e_pump = np.asarray(e_pump, dtype=float)
    e_pump = e_pump / np.linalg.norm(e_pump)
    helper = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(helper, e_pump)) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    perp = helper - np.dot(helper, e_pump) * e_pump
    perp /= np.linalg.norm(perp)
    return math.cos(MAGIC_ANGLE_RAD) * e_pump + math.sin(MAGIC_ANGLE_RAD) * perp


# --- single-run simulation ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class SignalRecord:
    """Time-resolved fluxes and integrated signal for one configuration."""

    label: tuple
    phase: float
    orientation_id: int
    times: np.ndarray
    flux_absorption: np.ndarray  # -dP_g/dt
    flux_emission: np.ndarray  # -dP_f/dt
    signal: float
    window_start: float = 0.0

    def _check_grid(self, other: "SignalRecord"):
        if self.times.shape != other.times.shape or not np.allclose(self.times, other.times):
            raise ValueError("records are on different time grids")


def _signal_from_populations(p_g, p_f, start: int = 0) -> float:
    return (p_g[start] - p_g[-1]) + (p_f[-1] - p_f[start])


def default_plan(pair_or_pulses, dt: float | None = None, frame: str = "rotating", rwa: bool = True) -> PropagationPlan:
    """Window [0, last pulse + 5 sigma]; dt defaults 0.1 fs lab / 0.5 fs rotating."""
    pulses = list(pair_or_pulses) if not isinstance(pair_or_pulses, PulsePair) else [
        pair_or_pulses.pump,
        pair_or_pulses.probe,
    ]
    t_end = max((p.t_center + 5.0 * p.sigma_t for p in pulses), default=0.0)
    if dt is None:
        dt = 0.1 if frame == "lab" else 0.5
    return PropagationPlan(dt=dt, t_start=0.0, t_end=t_end, frame=frame, rwa=rwa)


def simulate_pair(
    pair: PulsePair,
    params: DimerParams,
    space: HilbertSpace,
    plan: PropagationPlan | None = None,
    orientation_id: int = 0,
) -> SignalRecord:
    """Integrate the TDSE for one pulse pair from the true ground state.

    Fluxes are recorded at every step; the integrated signal is the
    whole-window absorption-minus-emission population bookkeeping.
    """
    ham = assemble(params, space)
    pulses = [pair.pump, pair.probe]
    if plan is None:
        plan = default_plan(pair)
    check_dt(plan, [p for p in pulses if p.eta > 0])
    psi0 = np.zeros(space.d, dtype=complex)
    psi0[space.index("g", 0, 0)] = 1.0
    n_steps = plan.n_steps()
    recorder = PopulationRecorder(space, range(n_steps + 1), batch=1)
    fields = FieldSet.from_pulses([pulses], [params])
    propagate_batch(ham, psi0[:, np.newaxis], fields, plan, recorder=recorder)
    p_g = recorder.p_g[:, 0]
    p_f = recorder.p_f[:, 0]
    times = plan.times()
    flux_abs = -np.gradient(p_g, plan.dt)
    flux_emi = -np.gradient(p_f, plan.dt)
    # probe window: midpoint of the two pulse centers to the end of the run
    window_start = 0.5 * (pair.pump.t_center + pair.probe.t_center)
    start_idx = min(max(int(round((window_start - plan.t_start) / plan.dt)), 0), n_steps)
    return SignalRecord(
        label=pair.label,
        phase=pair.probe.phi,
        orientation_id=orientation_id,
        times=times,
        flux_absorption=flux_abs,
        flux_emission=flux_emi,
        signal=_signal_from_populations(p_g, p_f, start_idx),
        window_start=times[start_idx],
    )


def phase_average(rec_0: SignalRecord, rec_pi: SignalRecord) -> SignalRecord:
    """Mean of two records that differ only in the probe carrier phase."""
    rec_0._check_grid(rec_pi)
    if rec_0.label != rec_pi.label:
        raise ValueError("records belong to different pulse pairs")
    return SignalRecord(
        label=rec_0.label,
        phase=float("nan"),
        orientation_id=rec_0.orientation_id,
        times=rec_0.times,
        flux_absorption=0.5 * (rec_0.flux_absorption + rec_pi.flux_absorption),
        flux_emission=0.5 * (rec_0.flux_emission + rec_pi.flux_emission),
        signal=0.5 * (rec_0.signal + rec_pi.signal),
        window_start=rec_0.window_start,
    )


def probe_only_subtract(full: SignalRecord, probe_only: SignalRecord) -> SignalRecord:
    """Pointwise flux and signal difference (the excited-state signal)."""
    full._check_grid(probe_only)
    return SignalRecord(
        label=full.label,
        phase=full.phase,
        orientation_id=full.orientation_id,
        times=full.times,
        flux_absorption=full.flux_absorption - probe_only.flux_absorption,
        flux_emission=full.flux_emission - probe_only.flux_emission,
        signal=full.signal - probe_only.signal,
        window_start=full.window_start,
    )


# --- inversion ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class InversionSystem:
    """S = M chi - G for the four pulse pairs, with conditioning report."""

    m: np.ndarray
    g: np.ndarray
    kappa: float
    det: float
    pair_labels: tuple = PAIR_LABELS

    @property
    def det_scale_relative(self) -> float:
        scale = np.linalg.norm(self.m, ord=2)
        return abs(self.det) / scale**4 if scale > 0 else 0.0


def _pi_factors_for_sign(pulse: Pulse, structure, model: str):
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
    return a, c


def isotropic_pi_factor(pulse: Pulse, mu_ij, omega_ij_cm1: float, model: str = "spectral") -> float:
    """Orientation average of the Pi factor: <(mu.e)^2> = |mu|^2 / 3.

    Exact for a uniformly random molecular orientation; at the magic angle
    the average of pump-probe Pi products factorizes into these averages.
    """
    mu = np.asarray(mu_ij, dtype=float)
    aligned = np.linalg.norm(mu) * pulse.polarization / math.sqrt(3.0)
    return pi_factor(pulse, aligned, omega_ij_cm1, model)


def inversion_from_structure_isotropic(
    pairs, structure, pi_model: str = "spectral"
) -> tuple[np.ndarray, np.ndarray]:
    """(M, G) built from isotropically averaged Pi factors (closed form)."""
    m = np.zeros((4, 4))
    g = np.zeros(4)
    for row, label in enumerate(PAIR_LABELS):
        pair = pairs[label]
        a_pump = np.array(
            [
                isotropic_pi_factor(pair.pump, structure.dipole(w), structure.transition_energy_cm1(w), pi_model)
                for w in ("g-alpha", "g-beta")
            ]
        )
        b_probe = np.array(
            [
                isotropic_pi_factor(pair.probe, structure.dipole(w), structure.transition_energy_cm1(w), pi_model)
                for w in ("g-alpha", "g-beta")
            ]
        )
        c_probe = np.array(
            [
                isotropic_pi_factor(pair.probe, structure.dipole(w), structure.transition_energy_cm1(w), pi_model)
                for w in ("alpha-f", "beta-f")
            ]
        )
        d_probe = c_probe - b_probe
        for q in range(2):
            for p in range(2):
                m[row, 2 * q + p] = d_probe[q] * a_pump[p]
        g[row] = np.sum(b_probe) * np.sum(a_pump)
    return m, g


def inversion_from_pairs(pairs, structure, pi_model: str = "spectral") -> tuple[np.ndarray, np.ndarray]:
    """(M, G) rows ordered as PAIR_LABELS; columns (q,p) in chi vector order."""
    m = np.zeros((4, 4))
    g = np.zeros(4)
    for row, label in enumerate(PAIR_LABELS):
        pair = pairs[label]
        a_pump, _ = _pi_factors_for_sign(pair.pump, structure, pi_model)
        b_probe, c_probe = _pi_factors_for_sign(pair.probe, structure, pi_model)
        d_probe = c_probe - b_probe
        # column index (q, p) -> 2*q + p
        for q in range(2):
            for p in range(2):
                m[row, 2 * q + p] = d_probe[q] * a_pump[p]
        g[row] = np.sum(b_probe) * np.sum(a_pump)
    return m, g


def build_inversion(pairs, structure, pi_model: str = "spectral") -> InversionSystem:
    """Construct the 4x4 inversion system; singularity is reported, not thrown."""
    m, g = inversion_from_pairs(pairs, structure, pi_model)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        kappa = float(np.linalg.cond(m, 2))
    det = float(np.linalg.det(m))
    return InversionSystem(m=m, g=g, kappa=kappa, det=det)


def recover_chi(
    signals, system: InversionSystem, tau: float, kappa_max: float = DEFAULT_KAPPA_MAX
):
    """chi = M^-1 (S + G); raises IllConditionedError above the kappa threshold.

    Returns (ReducedChi, residual) with residual = ||M chi - (S + G)||_2.
    """
    if not np.isfinite(system.kappa) or system.kappa > kappa_max:
        raise IllConditionedError(system.kappa)
    s = np.asarray(signals, dtype=float)
    rhs = s + system.g
    chi = np.linalg.solve(system.m, rhs)
    residual = float(np.linalg.norm(system.m @ chi - rhs))
    return ReducedChi.from_vec(tau, chi), residual


def polarization_selective_pairs(
    structure, sigma_t: float, eta: float, tau: float, orthogonality_tol: float = 1e-9
) -> dict:
    """Single-dimer pulse pairs with each polarization along one exciton dipole.

    Requires orthogonal 1EM transition dipoles (homodimer or orthogonal site
    dipoles); the '+' pulse is polarized along the g->beta dipole and '-'
    along g->alpha, each resonant with its own transition.
    """
    mu_a = structure.dipole("g-alpha")
    mu_b = structure.dipole("g-beta")
    if abs(np.dot(mu_a, mu_b)) > orthogonality_tol * np.linalg.norm(mu_a) * np.linalg.norm(mu_b):
        raise ValueError("exciton transition dipoles are not orthogonal")
    e_minus = mu_a / np.linalg.norm(mu_a)
    e_plus = mu_b / np.linalg.norm(mu_b)
    t_pump = 5.0 * sigma_t
    pumps = resonant_pulses(structure, sigma_t, eta, e_plus, e_minus, t_center=t_pump)
    probes = resonant_pulses(structure, sigma_t, eta, e_plus, e_minus, t_center=t_pump + tau)
    return {
        (sp, sq): PulsePair(pump=pumps[sp], probe=probes[sq], label=(sp, sq))
        for (sp, sq) in PAIR_LABELS
    }


# --- ensemble pipeline -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    """Everything the ensemble pipeline needs besides the delay grid."""

    params: DimerParams
    n_phon: int
    sigma_t: float
    eta: float
    n_orientations: int = DEFAULT_ORIENTATIONS
    seed: int = 0
    dt: float | None = None
    frame: str = "rotating"
    rwa: bool = True
    pi_model: str = "spectral"
    e_pump: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    fixed_orientation: bool = False
    bootstrap: int = DEFAULT_BOOTSTRAP
    kappa_max: float = DEFAULT_KAPPA_MAX
    carriers: tuple | None = None  # (plus_cm1, minus_cm1) overriding auto-resonance
    recovery: str = "per_orientation"  # 'per_orientation' | 'averaged'
    average_mode: str = "empirical"  # M, G of the averaged system: 'empirical' | 'isotropic'
    sample_kappa_max: float = 300.0  # per-orientation rejection threshold

    @property
    def e_probe(self) -> np.ndarray:
        return magic_angle_probe_polarization(self.e_pump)


@dataclass(frozen=True, eq=False)
class EnsembleResult:
    """Per-delay mean and bootstrap standard deviation of the chi entries."""

    taus: np.ndarray
    mean: np.ndarray  # (n_tau, 4)
    std: np.ndarray  # (n_tau, 4)
    n_samples: int
    n_kept: int
    seed: int
    kappa: float
    residuals: np.ndarray
    s_mean: np.ndarray  # (n_tau, 4) averaged signals

    def chi(self, i: int) -> ReducedChi:
        return ReducedChi.from_vec(self.taus[i], self.mean[i])


def weak_field_eta(structure, sigma_t: float, depletion: float = 0.01) -> float:
    """Pulse amplitude giving at most `depletion` ground-state loss per pulse."""
    mu_max = max(
        np.linalg.norm(structure.dipole("g-alpha")), np.linalg.norm(structure.dipole("g-beta"))
    )
    return math.sqrt(depletion) / (sigma_t * math.sqrt(2.0 * math.pi) * mu_max)


def _rotated_params(params: DimerParams, rot: np.ndarray) -> DimerParams:
    return params.with_dipoles(rot @ params.mu_a, rot @ params.mu_b)


def _sample_inversions(structure, rotations, cfg: ProtocolConfig):
    """Per-sample (M_k, G_k); delay-independent (Pi factors ignore centers)."""
    pairs_proto = make_pulse_pairs(
        structure, cfg.sigma_t, cfg.eta, tau=1.0, e_pump=cfg.e_pump, e_probe=cfg.e_probe,
        carriers=cfg.carriers,
    )
    n = len(rotations)
    m_all = np.empty((n, 4, 4))
    g_all = np.empty((n, 4))
    for k, rot in enumerate(rotations):
        st_k = replace(structure, params=_rotated_params(cfg.params, rot))
        m_all[k], g_all[k] = inversion_from_pairs(pairs_proto, st_k, cfg.pi_model)
    return m_all, g_all


def _reference_signals(ham, structure, cfg: ProtocolConfig, rotations, taus):
    """Windowed probe-only and pump-only reference signals per (sample, sign, tau).

    Each reference is a lone-pulse run on a fixed [0, 10 sigma] grid; the
    per-delay probe window starts tau/2 before the probe center (tau/2 after
    the pump center for the pump-only reference), matching the full run's
    window clipping exactly.  Populations are constant outside the pulse, so
    window times are clamped onto the reference grid without error.
    """
    space = ham.space
    sigma = cfg.sigma_t
    dt = cfg.dt if cfg.dt is not None else (0.1 if cfg.frame == "lab" else 0.5)
    t_end = 10.0 * sigma
    plan = PropagationPlan(dt=dt, t_start=0.0, t_end=t_end, frame=cfg.frame, rwa=cfg.rwa)
    probe_p = resonant_pulses(
        structure, sigma, cfg.eta, cfg.e_probe, cfg.e_probe, t_center=5 * sigma, carriers=cfg.carriers
    )
    pump_p = resonant_pulses(
        structure, sigma, cfg.eta, cfg.e_pump, cfg.e_pump, t_center=5 * sigma, carriers=cfg.carriers
    )
    kinds = [("probe", "+"), ("probe", "-"), ("pump", "+"), ("pump", "-")]
    pulse_rows, params_rows = [], []
    for rot in rotations:
        par = _rotated_params(cfg.params, rot)
        for kind, sign in kinds:
            pulse_rows.append([probe_p[sign] if kind == "probe" else pump_p[sign]])
            params_rows.append(par)
    fields = FieldSet.from_pulses(pulse_rows, params_rows)
    check_dt(plan, [probe_p["+"], probe_p["-"], pump_p["+"], pump_p["-"]])
    batch = len(pulse_rows)
    psi0 = np.zeros((space.d, batch), dtype=complex)
    psi0[space.index("g", 0, 0), :] = 1.0

    n_steps = plan.n_steps()

    def step_of(t):
        return min(max(int(round(t / dt)), 0), n_steps)

    probe_steps = {float(tau): step_of(5 * sigma - tau / 2.0) for tau in taus}
    pump_steps = {float(tau): step_of(5 * sigma + tau / 2.0) for tau in taus}
    wanted = sorted(set(probe_steps.values()) | set(pump_steps.values()) | {n_steps})
    recorder = PopulationRecorder(space, wanted, batch)
    propagate_batch(ham, psi0, fields, plan, recorder=recorder)
    pos = {s: i for i, s in enumerate(recorder.record_steps)}

    def window_value(start_step):
        i0, i1 = pos[start_step], pos[n_steps]
        s = (recorder.p_g[i0] - recorder.p_g[i1]) + (recorder.p_f[i1] - recorder.p_f[i0])
        return s.reshape(len(rotations), 4)

    probe_ref = {}
    pump_ref = {}
    for tau in taus:
        s_probe = window_value(probe_steps[float(tau)])
        s_pump = window_value(pump_steps[float(tau)])
        probe_ref[float(tau)] = {"+": s_probe[:, 0], "-": s_probe[:, 1]}
        pump_ref[float(tau)] = {"+": s_pump[:, 2], "-": s_pump[:, 3]}
    return probe_ref, pump_ref


def _delay_signals(ham, structure, cfg: ProtocolConfig, rotations, tau: float):
    """Phase-averaged probe-window signals per (sample, pair) at one delay.

    The integration window runs from the midpoint of the two pulse centers
    to 5 sigma past the probe (the full pulse for separated pulses, the
    trailing half at overlap).
    """
    space = ham.space
    sigma = cfg.sigma_t
    t_pump = 5.0 * sigma
    t_end = t_pump + tau + 5.0 * sigma
    dt = cfg.dt if cfg.dt is not None else (0.1 if cfg.frame == "lab" else 0.5)
    plan = PropagationPlan(dt=dt, t_start=0.0, t_end=t_end, frame=cfg.frame, rwa=cfg.rwa)
    pairs = make_pulse_pairs(
        structure, sigma, cfg.eta, tau, e_pump=cfg.e_pump, e_probe=cfg.e_probe, t_pump=t_pump,
        carriers=cfg.carriers,
    )
    check_dt(plan, [pairs[PAIR_LABELS[0]].pump, pairs[PAIR_LABELS[0]].probe])
    pulse_rows, params_rows = [], []
    for rot in rotations:
        par = _rotated_params(cfg.params, rot)
        for label in PAIR_LABELS:
            pair = pairs[label]
            for phi in (0.0, math.pi):
                pulse_rows.append([pair.pump, pair.probe.with_phase(phi)])
                params_rows.append(par)
    fields = FieldSet.from_pulses(pulse_rows, params_rows)
    batch = len(pulse_rows)
    psi0 = np.zeros((space.d, batch), dtype=complex)
    psi0[space.index("g", 0, 0), :] = 1.0
    window_start = int(round((t_pump + tau / 2.0) / dt))
    recorder = PopulationRecorder(space, [window_start, plan.n_steps()], batch)
    propagate_batch(ham, psi0, fields, plan, recorder=recorder)
    s_raw = (recorder.p_g[0] - recorder.p_g[-1]) + (recorder.p_f[-1] - recorder.p_f[0])
    s_raw = s_raw.reshape(len(rotations), 4, 2)
    return s_raw.mean(axis=2)  # phase average


def ensemble_signals(cfg: ProtocolConfig, taus) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sample excited-state signals S[k, pair] for each delay.

    Returns (signals (n_tau, N, 4), m_all (N, 4, 4), g_all (N, 4)).
    """
    taus = np.asarray(taus, dtype=float)
    space = build_space(cfg.n_phon)
    ham = assemble(cfg.params, space)
    structure = exciton_structure(ham)
    rotations = orientation_rotations(cfg.seed, cfg.n_orientations, cfg.fixed_orientation)
    m_all, g_all = _sample_inversions(structure, rotations, cfg)
    probe_ref, pump_ref = _reference_signals(ham, structure, cfg, rotations, taus)
    out = np.empty((len(taus), len(rotations), 4))
    for it, tau in enumerate(taus):
        s_avg = _delay_signals(ham, structure, cfg, rotations, float(tau))
        for ip, (sp, sq) in enumerate(PAIR_LABELS):
            out[it, :, ip] = s_avg[:, ip] - probe_ref[float(tau)][sq] - pump_ref[float(tau)][sp]
    return out, m_all, g_all


def _isotropic_system(cfg: ProtocolConfig, structure) -> tuple[np.ndarray, np.ndarray]:
    pairs = make_pulse_pairs(
        structure, cfg.sigma_t, cfg.eta, tau=1.0, e_pump=cfg.e_pump, e_probe=cfg.e_probe,
        carriers=cfg.carriers,
    )
    return inversion_from_structure_isotropic(pairs, structure, cfg.pi_model)


def _averaged_system(cfg: ProtocolConfig, m_all, g_all) -> InversionSystem:
    if cfg.average_mode == "isotropic":
        space = build_space(cfg.n_phon)
        structure = exciton_structure(assemble(cfg.params, space))
        m_bar, g_bar = _isotropic_system(cfg, structure)
    elif cfg.average_mode == "empirical":
        m_bar = m_all.mean(axis=0)
        g_bar = g_all.mean(axis=0)
    else:
        raise ValueError(f"unknown average_mode {cfg.average_mode!r}")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        kappa = float(np.linalg.cond(m_bar, 2))
    return InversionSystem(m=m_bar, g=g_bar, kappa=kappa, det=float(np.linalg.det(m_bar)))


def ensemble_average(cfg: ProtocolConfig, taus) -> EnsembleResult:
    """Recover the reduced process tensor from the orientation ensemble.

    recovery='per_orientation' (default) inverts each sample's
    well-conditioned 4x4 system, rejects samples whose condition number
    exceeds sample_kappa_max (near-dark geometries), and averages the
    recovered chi vectors; bootstrap over retained samples gives the
    standard deviations.

    recovery='averaged' averages signals first and inverts one system built
    per average_mode ('empirical' per-sample mean or 'isotropic' closed-form
    Pi averages).  For APC at the magic angle the averaged matrix is
    near-singular (condition number ~200), which makes this estimator
    noise-fragile; it is kept as the comparison mode.
    """
    taus = np.asarray(taus, dtype=float)
    signals, m_all, g_all = ensemble_signals(cfg, taus)
    n = signals.shape[1]
    system = _averaged_system(cfg, m_all, g_all)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((cfg.seed, 0xB007))))

    if cfg.recovery == "per_orientation":
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            kappas = np.array([np.linalg.cond(m) for m in m_all])
        keep = np.nonzero(np.isfinite(kappas) & (kappas < cfg.sample_kappa_max))[0]
        if len(keep) == 0:
            raise IllConditionedError(float(np.min(kappas)))
        rhs = signals[:, keep, :] + g_all[np.newaxis, keep, :]  # (n_tau, n_keep, 4)
        chis = np.linalg.solve(m_all[np.newaxis, keep], rhs[..., np.newaxis])[..., 0]
        mean = chis.mean(axis=1)
        n_kept = len(keep)
        boots = np.empty((cfg.bootstrap, len(taus), 4))
        for b in range(cfg.bootstrap):
            idx = rng.integers(0, n_kept, size=n_kept)
            boots[b] = chis[:, idx, :].mean(axis=1)
        std = boots.std(axis=0, ddof=1) if cfg.bootstrap > 1 else np.zeros_like(mean)
        residuals = np.array(
            [float(np.linalg.norm(system.m @ mean[it] - (signals[it].mean(axis=0) + system.g)))
             for it in range(len(taus))]
        )
    elif cfg.recovery == "averaged":
        mean = np.empty((len(taus), 4))
        residuals = np.empty(len(taus))
        for it, tau in enumerate(taus):
            chi, res = recover_chi(signals[it].mean(axis=0), system, float(tau), cfg.kappa_max)
            mean[it] = chi.vec
            residuals[it] = res
        n_kept = n
        boots = np.empty((cfg.bootstrap, len(taus), 4))
        fixed_system = cfg.average_mode == "isotropic"
        for b in range(cfg.bootstrap):
            idx = rng.integers(0, n, size=n)
            if fixed_system:
                m_b, g_b = system.m, system.g
            else:
                m_b = m_all[idx].mean(axis=0)
                g_b = g_all[idx].mean(axis=0)
            for it in range(len(taus)):
                rhs = signals[it][idx].mean(axis=0) + g_b
                boots[b, it] = np.linalg.solve(m_b, rhs)
        std = boots.std(axis=0, ddof=1) if cfg.bootstrap > 1 else np.zeros_like(mean)
    else:
        raise ValueError(f"unknown recovery mode {cfg.recovery!r}")

    return EnsembleResult(
        taus=taus,
        mean=mean,
        std=std,
        n_samples=n,
        n_kept=n_kept,
        seed=cfg.seed,
        kappa=system.kappa,
        residuals=residuals,
        s_mean=signals.mean(axis=1),
    )


# --- witness protocol and r sweep -------------------------------------------


@dataclass(frozen=True, eq=False)
class WitnessProtocolResult:
    point_sim: WitnessPoint
    point_theory: WitnessPoint
    chi_sim: tuple
    chi_theory: tuple
    n_experiments: int
    ensemble: EnsembleResult


def run_witness_protocol(cfg: ProtocolConfig, T1: float, T2: float) -> WitnessProtocolResult:
    """Simulate the 12-experiment witness protocol (4 pairs x 3 delays) and
    evaluate the witness from recovered and oracle chi side by side."""
    if T1 <= 0.0 or T2 <= 0.0:
        raise ValueError("T1 and T2 must be positive")
    taus = np.array([T1, T2, T1 + T2])
    result = ensemble_average(cfg, taus)
    chi_sim = tuple(result.chi(i) for i in range(3))
    space = build_space(cfg.n_phon)
    theo = theoretical_chi_curve(cfg.params, space, taus)
    chi_theory = tuple(ReducedChi.from_vec(t, v) for t, v in zip(taus, theo))
    return WitnessProtocolResult(
        point_sim=witness_wb(chi_sim[0], chi_sim[1], chi_sim[2]),
        point_theory=witness_wb(chi_theory[0], chi_theory[1], chi_theory[2]),
        chi_sim=chi_sim,
        chi_theory=chi_theory,
        n_experiments=4 * 3,
        ensemble=result,
    )


def sigma_deviation(times, chi_theory: np.ndarray, chi_sim: np.ndarray, t0: float, t1: float) -> float:
    """sigma = int |chi_theo - chi_sim|^2 dt / int |chi_theo|^2 dt over [t0, t1]."""
    times = np.asarray(times, dtype=float)
    if t1 <= t0:
        raise ValueError("empty integration window")
    mask = (times >= t0) & (times <= t1)
    if np.count_nonzero(mask) < 2:
        raise ValueError("integration window contains fewer than two grid points")
    t = times[mask]
    diff = np.sum((np.asarray(chi_theory)[mask] - np.asarray(chi_sim)[mask]) ** 2, axis=1)
    norm = np.sum(np.asarray(chi_theory)[mask] ** 2, axis=1)
    denominator = np.trapezoid(norm, t)
    return float(np.trapezoid(diff, t) / denominator)


def r_sweep(
    base: DimerParams,
    j_values,
    window: tuple[float, float],
    cfg: ProtocolConfig,
    n_times: int = 13,
) -> list[tuple[float, float]]:
    """(r, sigma) for each electronic coupling J on a 1-phonon-per-site space."""
    t0, t1 = window
    if t1 <= t0 or t0 < 0.0:
        raise ValueError("invalid time window")
    times = np.linspace(t0, t1, n_times)
    out = []
    for j in j_values:
        params_j = base.replace(J=float(j))
        cfg_j = replace(cfg, params=params_j, n_phon=1)
        space = build_space(1)
        theo = theoretical_chi_curve(params_j, space, times)
        sim = ensemble_average(cfg_j, times)
        out.append((coupling_ratio(params_j), sigma_deviation(times, theo, sim.mean, t0, t1)))
    return out
