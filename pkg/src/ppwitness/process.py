"""Process-tensor mathematics: the exact-dynamics oracle for the reduced
population-to-population elements, the temporal-coherence witness, the
coherence measure and the Born-violation-corrected bound.

The reduced process tensor at delay tau is the 4-vector
(chi_aaaa, chi_aabb, chi_bbaa, chi_bbbb) with chi_qqpp the probability of
measuring exciton branch q after preparing branch p.  The oracle prepares
the vibrationless 1EM electronic eigenstate of a branch tensor both phonon
vacua, evolves it exactly, and reads total electronic-branch populations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DimerParams
from .model import HilbertSpace, VibronicHamiltonian, assemble, exciton_structure

TRACE_TOL = 1e-6
RANGE_TOL = 1e-6
DELAY_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class ReducedChi:
    """Population-to-population process-tensor elements at one delay (fs)."""

    tau: float
    aaaa: float
    aabb: float
    bbaa: float
    bbbb: float

    @property
    def vec(self) -> np.ndarray:
        return np.array([self.aaaa, self.aabb, self.bbaa, self.bbbb])

    @staticmethod
    def from_vec(tau: float, vec) -> "ReducedChi":
        v = np.asarray(vec, dtype=float)
        return ReducedChi(tau=float(tau), aaaa=v[0], aabb=v[1], bbaa=v[2], bbbb=v[3])

    @staticmethod
    def identity(tau: float = 0.0) -> "ReducedChi":
        return ReducedChi(tau=tau, aaaa=1.0, aabb=0.0, bbaa=0.0, bbbb=1.0)

    def check_oracle_contracts(self) -> None:
        """Trace preservation and range bounds for oracle-produced values."""
        if abs(self.aaaa + self.bbaa - 1.0) > TRACE_TOL or abs(self.aabb + self.bbbb - 1.0) > TRACE_TOL:
            raise ValueError("trace preservation violated")
        for v in self.vec:
            if not (-RANGE_TOL <= v <= 1.0 + RANGE_TOL):
                raise ValueError("entry outside [0, 1] beyond tolerance")


@dataclass(frozen=True)
class WitnessPoint:
    """Witness value at interruption time T1 with continuation T2."""

    T1: float
    T2: float
    value: float
    signed: float

    @property
    def tau(self) -> float:
        return self.T1 + self.T2


def theoretical_chi_curve(params: DimerParams, space: HilbertSpace, times) -> np.ndarray:
    """Oracle chi vectors on a time grid, shape (n_times, 4).

    For each prepared branch p the initial state is the uncoupled electronic
    eigenstate of p tensor both phonon vacua (0 K); evolution is exact and
    chi_qqpp(t) is the electronic population of branch q summed over phonons.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0.0):
        raise ValueError("delay times must be >= 0")
    ham = assemble(params, space)
    structure = exciton_structure(ham)
    evals, evecs = ham.eigensystem
    nv2 = space.n_vib**2

    def initial(branch_vec):
        psi = np.zeros(space.d, dtype=complex)
        psi[space.index("a", 0, 0)] = branch_vec[0]
        psi[space.index("b", 0, 0)] = branch_vec[1]
        return psi

    out = np.empty((len(times), 4))
    coeff_a = evecs[space.electronic_slice("a")]  # (nv2, d) rows of eigvecs
    coeff_b = evecs[space.electronic_slice("b")]
    for col, branch_vec in ((0, structure.elec_alpha), (1, structure.elec_beta)):
        psi0 = initial(branch_vec)
        amps = evecs.conj().T @ psi0  # eigenbasis amplitudes
        phases = np.exp(-1j * np.outer(times, evals)) * amps[np.newaxis, :]
        # site amplitudes at each time: (n_t, nv2)
        a_t = phases @ coeff_a.T
        b_t = phases @ coeff_b.T
        va, vb = structure.elec_alpha, structure.elec_beta
        pop_alpha = np.sum(np.abs(va[0] * a_t + va[1] * b_t) ** 2, axis=1)
        pop_beta = np.sum(np.abs(vb[0] * a_t + vb[1] * b_t) ** 2, axis=1)
        if col == 0:
            out[:, 0] = pop_alpha  # chi_aaaa
            out[:, 2] = pop_beta  # chi_bbaa
        else:
            out[:, 1] = pop_alpha  # chi_aabb
            out[:, 3] = pop_beta  # chi_bbbb
    return out


def theoretical_chi(params: DimerParams, space: HilbertSpace, times) -> list[ReducedChi]:
    curve = theoretical_chi_curve(params, space, times)
    return [ReducedChi.from_vec(t, row) for t, row in zip(np.asarray(times, dtype=float), curve)]


def witness_wb(chi_T1: ReducedChi, chi_T2: ReducedChi, chi_tau: ReducedChi) -> WitnessPoint:
    """Two-time witness from population-to-population elements at T1, T2, tau.

    W = |chi_aaaa(tau) + chi_aaaa(T1)(1 - chi_aaaa(T2))
         + (1 - chi_aaaa(T1)) chi_bbbb(T2) - 1|
    """
    if abs(chi_tau.tau - (chi_T1.tau + chi_T2.tau)) > DELAY_MATCH_TOL:
        raise ValueError("delays do not satisfy tau = T1 + T2")
    signed = (
        chi_tau.aaaa
        + chi_T1.aaaa * (1.0 - chi_T2.aaaa)
        + (1.0 - chi_T1.aaaa) * chi_T2.bbbb
        - 1.0
    )
    return WitnessPoint(T1=chi_T1.tau, T2=chi_T2.tau, value=abs(signed), signed=signed)


def _check_rho(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise ValueError("rho must be 2x2")
    if not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise ValueError("rho must be Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-9:
        raise ValueError("rho must have unit trace")
    if np.min(np.linalg.eigvalsh(rho)) < -1e-10:
        raise ValueError("rho must be positive semidefinite")
    return rho


def witness_general(
    chi_tau: np.ndarray,
    chi_T1: np.ndarray,
    chi_T2: np.ndarray,
    rho: np.ndarray,
    measure: int = 0,
) -> float:
    """Full double-sum witness from 16-element process tensors.

    Tensors are 4x4 matrices acting on vectorized 2x2 density matrices with
    index order (aa, ab, ba, bb); measure selects the projector branch
    (0 = alpha, 1 = beta).  Reduces to witness_wb for rho = |alpha><alpha|
    and trace-preserving input.
    """
    rho = _check_rho(rho)
    chi_tau = np.asarray(chi_tau, dtype=complex)
    chi_T1 = np.asarray(chi_T1, dtype=complex)
    chi_T2 = np.asarray(chi_T2, dtype=complex)
    if measure not in (0, 1):
        raise ValueError("measure must be 0 (alpha) or 1 (beta)")
    ii = 0 if measure == 0 else 3
    rho_vec = rho.reshape(-1)  # order aa, ab, ba, bb
    direct = chi_tau[ii] @ rho_vec
    interrupted = 0.0 + 0.0j
    for pp in (0, 3):
        interrupted += chi_T2[ii, pp] * (chi_T1[pp] @ rho_vec)
    return float(abs(direct - interrupted))


def coherence_measure(rho: np.ndarray) -> float:
    """R = (1/2) * trace norm of (rho - diag(rho)) for a density matrix."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("rho must be square")
    if not np.allclose(rho, rho.conj().T, atol=1e-10):
        raise ValueError("rho must be Hermitian")
    off = rho - np.diag(np.diag(rho))
    return 0.5 * float(np.sum(np.linalg.svd(off, compute_uv=False)))


def coherence_lower_bound(
    wb: float, gamma_trace_norm: float, bath_drift_trace_norm: float
) -> float:
    """Lower bound on the coherence measure allowing Born-approximation
    violations: 2 (W - ||gamma_SB|| - ||bath drift||), clamped at zero."""
    if min(wb, gamma_trace_norm, bath_drift_trace_norm) < 0.0:
        raise ValueError("inputs must be >= 0")
    return max(0.0, 2.0 * (wb - gamma_trace_norm - bath_drift_trace_norm))


# --- partial-trace utilities on the full joint state -------------------------


def electronic_rdm(psi: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """4x4 electronic reduced density matrix of a pure joint state."""
    nv2 = space.n_vib**2
    blocks = np.asarray(psi, dtype=complex).reshape(4, nv2)
    return blocks @ blocks.conj().T


def phonon_rdm(psi: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """Phonon reduced density matrix (dimension n_vib^2) of a pure joint state."""
    nv2 = space.n_vib**2
    blocks = np.asarray(psi, dtype=complex).reshape(4, nv2)
    return blocks.T @ blocks.conj()


def trace_norm(x: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(x, dtype=complex), compute_uv=False)))


def gamma_sb_trace_norm(psi: np.ndarray, space: HilbertSpace) -> float:
    """||rho_SB - rho_S (x) rho_B||_tr for a pure joint state."""
    psi = np.asarray(psi, dtype=complex)
    rho_sb = np.outer(psi, psi.conj())
    rho_s = electronic_rdm(psi, space)
    rho_b = phonon_rdm(psi, space)
    return trace_norm(rho_sb - np.kron(rho_s, rho_b))


def bath_drift_trace_norm(psi_now: np.ndarray, rho_b_ref: np.ndarray, space: HilbertSpace) -> float:
    """||tr_S rho_SB(now) - rho_B(ref)||_tr."""
    return trace_norm(phonon_rdm(psi_now, space) - np.asarray(rho_b_ref, dtype=complex))


def classical_hopping_chi(tau: float, rate: float) -> ReducedChi:
    """Symmetric two-state Markov hopping at rate k (zero-witness family)."""
    stay = 0.5 * (1.0 + np.exp(-2.0 * rate * tau))
    return ReducedChi(tau=tau, aaaa=stay, aabb=1.0 - stay, bbaa=1.0 - stay, bbbb=stay)
