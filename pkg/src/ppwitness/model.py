"""Truncated vibronic Hilbert space, Frenkel-Holstein Hamiltonian, exciton structure.

Basis: electronic label in {g, a, b, f} tensor two truncated phonon ladders,
flat index = elec * (n_phon+1)^2 + n1 * (n_phon+1) + n2.  The Hamiltonian is
assembled in internal units (rad/fs); the electronic excitation number
operator N_exc (g:0, a,b:1, f:2) commutes with it, so eigenstates split into
ground / 1EM / 2EM manifolds.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import DimerParams, cm1_to_radfs, radfs_to_cm1

ELECTRONIC_LABELS = ("g", "a", "b", "f")
N_EXC = {"g": 0, "a": 1, "b": 1, "f": 2}

DEFAULT_MEMORY_CAP_BYTES = 2 << 30  # 2 GiB for one dense d x d complex matrix


class ResourceError(RuntimeError):
    """Requested basis would exceed the dense-matrix memory cap."""


class AmbiguityError(RuntimeError):
    """Eigenstate classification cannot be decided (degeneracy)."""


def hilbert_dimension(n_sites: int, n_phon: int) -> int:
    """d = n_sites^2 * (n_phon+1)^n_sites (dimension formula, any site count)."""
    return n_sites**2 * (n_phon + 1) ** n_sites


@dataclass(frozen=True)
class HilbertSpace:
    """Index map for the dimer: 4 electronic states x two phonon ladders."""

    n_phon: int
    n_sites: int = 2

    @property
    def n_vib(self) -> int:
        return self.n_phon + 1

    @property
    def d(self) -> int:
        return hilbert_dimension(self.n_sites, self.n_phon)

    def index(self, label: str, n1: int, n2: int) -> int:
        if label not in ELECTRONIC_LABELS:
            raise KeyError(f"unknown electronic label {label!r}")
        if not (0 <= n1 <= self.n_phon and 0 <= n2 <= self.n_phon):
            raise IndexError("phonon occupancy out of range")
        nv = self.n_vib
        return ELECTRONIC_LABELS.index(label) * nv * nv + n1 * nv + n2

    def unpack(self, idx: int):
        nv = self.n_vib
        elec, rem = divmod(idx, nv * nv)
        n1, n2 = divmod(rem, nv)
        return ELECTRONIC_LABELS[elec], n1, n2

    def electronic_slice(self, label: str) -> slice:
        nv2 = self.n_vib * self.n_vib
        k = ELECTRONIC_LABELS.index(label)
        return slice(k * nv2, (k + 1) * nv2)

    @cached_property
    def n_exc_diagonal(self) -> np.ndarray:
        """Electronic excitation number per basis state."""
        nv2 = self.n_vib * self.n_vib
        return np.repeat([N_EXC[l] for l in ELECTRONIC_LABELS], nv2).astype(float)


def build_space(n_phon: int, memory_cap_bytes: int = DEFAULT_MEMORY_CAP_BYTES) -> HilbertSpace:
    if n_phon < 0:
        raise ValueError("n_phon must be >= 0")
    d = hilbert_dimension(2, n_phon)
    if 16 * d * d > memory_cap_bytes:
        raise ResourceError(
            f"d={d} needs {16 * d * d / 2**20:.0f} MiB per dense matrix, "
            f"cap is {memory_cap_bytes / 2**20:.0f} MiB"
        )
    return HilbertSpace(n_phon=n_phon)


def _ladder(n_vib: int) -> np.ndarray:
    """Truncated harmonic-oscillator creation operator b^dagger."""
    op = np.zeros((n_vib, n_vib))
    for n in range(n_vib - 1):
        op[n + 1, n] = np.sqrt(n + 1.0)
    return op


def _elec_matrix(entries) -> np.ndarray:
    m = np.zeros((4, 4))
    for (to, frm), val in entries.items():
        m[ELECTRONIC_LABELS.index(to), ELECTRONIC_LABELS.index(frm)] = val
    return m


def electronic_lowering(site: str) -> np.ndarray:
    """4x4 matrix of the exciton annihilation operator a_site in {g,a,b,f}."""
    if site == "a":
        return _elec_matrix({("g", "a"): 1.0, ("b", "f"): 1.0})
    if site == "b":
        return _elec_matrix({("g", "b"): 1.0, ("a", "f"): 1.0})
    raise KeyError(site)


def dipole_operator(space: HilbertSpace, mu_a, mu_b) -> np.ndarray:
    """Dipole operator sum_i mu_i (a_i^dag + a_i), shape (3, d, d)."""
    nv2 = space.n_vib * space.n_vib
    ident = np.eye(nv2)
    out = np.zeros((3, space.d, space.d))
    for mu, site in ((np.asarray(mu_a), "a"), (np.asarray(mu_b), "b")):
        low = electronic_lowering(site)
        op = np.kron(low + low.T, ident)
        for k in range(3):
            out[k] += mu[k] * op
    return out


@dataclass(frozen=True, eq=False)
class VibronicHamiltonian:
    """Assembled Frenkel-Holstein Hamiltonian, all blocks in rad/fs."""

    space: HilbertSpace
    params: DimerParams
    h_s: np.ndarray
    h_b: np.ndarray
    h_sb: np.ndarray

    @cached_property
    def h_total(self) -> np.ndarray:
        return self.h_s + self.h_b + self.h_sb

    @cached_property
    def eigensystem(self):
        """Eigen-decomposition with deterministic ordering and phase fixing."""
        evals, evecs = np.linalg.eigh(self.h_total)
        order = np.argsort(evals, kind="stable")
        evals = evals[order]
        evecs = evecs[:, order]
        # fix each eigenvector's phase: largest-magnitude component real positive
        lead = np.argmax(np.abs(evecs), axis=0)
        lead_vals = evecs[lead, np.arange(evecs.shape[1])]
        phases = lead_vals / np.abs(lead_vals)
        evecs = evecs * np.conj(phases)[np.newaxis, :]
        return evals, evecs


def assemble(params: DimerParams, space: HilbertSpace) -> VibronicHamiltonian:
    """Build H_S, H_B and H_SB on the truncated product basis.

    The |f> electronic energy is eps_a + eps_b + delta_E (uniform shift of
    the whole block).  Ladder matrix elements above the phonon cap are
    dropped (hard truncation).
    """
    nv = space.n_vib
    nv2 = nv * nv
    ident_vib = np.eye(nv)
    ident_vv = np.eye(nv2)

    eps_a = cm1_to_radfs(params.eps_a)
    eps_b = cm1_to_radfs(params.eps_b)
    j = cm1_to_radfs(params.J)
    w_a = cm1_to_radfs(params.omega_a)
    w_b = cm1_to_radfs(params.omega_b)
    d_e = cm1_to_radfs(params.delta_E)

    elec_hs = _elec_matrix(
        {
            ("a", "a"): eps_a,
            ("b", "b"): eps_b,
            ("f", "f"): eps_a + eps_b + d_e,
            ("a", "b"): j,
            ("b", "a"): j,
        }
    )
    h_s = np.kron(elec_hs, ident_vv)

    bdag = _ladder(nv)
    num = bdag @ bdag.T
    h_vib = w_a * np.kron(num + 0.5 * ident_vib, ident_vib) + w_b * np.kron(
        ident_vib, num + 0.5 * ident_vib
    )
    h_b = np.kron(np.eye(4), h_vib)

    # site excitation-number diagonals n_a = diag(0,1,0,1), n_b = diag(0,0,1,1)
    n_a = np.diag([0.0, 1.0, 0.0, 1.0])
    n_b = np.diag([0.0, 0.0, 1.0, 1.0])
    coord = bdag + bdag.T
    h_sb = -w_a * params.g_a * np.kron(n_a, np.kron(coord, ident_vib)) - w_b * params.g_b * np.kron(
        n_b, np.kron(ident_vib, coord)
    )

    return VibronicHamiltonian(
        space=space,
        params=params,
        h_s=h_s.astype(complex),
        h_b=h_b.astype(complex),
        h_sb=h_sb.astype(complex),
    )


def electronic_eigenvectors(params: DimerParams):
    """Uncoupled 1EM reference: eigenpairs of [[eps_a, J], [J, eps_b]].

    Returns (e_alpha, e_beta, v_alpha, v_beta) with alpha the lower branch.
    The alpha vector has its larger component positive and beta is fixed to
    (-alpha_b, alpha_a), so mu_ga . mu_gb = (alpha_a^2 - alpha_b^2)(mu_a . mu_b).
    """
    h = np.array([[params.eps_a, params.J], [params.J, params.eps_b]])
    evals, evecs = np.linalg.eigh(h)
    v_alpha = evecs[:, 0]
    if abs(v_alpha[0]) >= abs(v_alpha[1]):
        if v_alpha[0] < 0:
            v_alpha = -v_alpha
    elif v_alpha[1] < 0:
        v_alpha = -v_alpha
    v_beta = np.array([-v_alpha[1], v_alpha[0]])
    return evals[0], evals[1], v_alpha, v_beta


@dataclass(frozen=True, eq=False)
class ExcitonStructure:
    """Eigen-decomposition of H_total with manifold and branch bookkeeping.

    Energies are stored in rad/fs; transition energies (cm^-1) are measured
    from the vibrationless ground eigenstate.  Dipole site coefficients give
    mu_trans = c_a * mu_a + c_b * mu_b, so orientation enters transition
    dipoles only through the site dipole vectors.
    """

    space: HilbertSpace
    params: DimerParams
    evals: np.ndarray
    evecs: np.ndarray
    manifold: np.ndarray  # 0 / 1 / 2 per eigenstate
    branch: np.ndarray  # 0 (alpha) / 1 (beta) for 1EM states, -1 otherwise
    ground_index: int
    alpha_index: int
    beta_index: int
    f_index: int
    elec_alpha: np.ndarray
    elec_beta: np.ndarray

    # site coefficients (c_a, c_b) of the four vibrationless transitions
    coef_g_alpha: np.ndarray = None
    coef_g_beta: np.ndarray = None
    coef_alpha_f: np.ndarray = None
    coef_beta_f: np.ndarray = None

    def transition_energy_cm1(self, which: str) -> float:
        """Vibrationless transition energy: 'g-alpha', 'g-beta', 'alpha-f', 'beta-f'."""
        e = {
            "g-alpha": self.evals[self.alpha_index] - self.evals[self.ground_index],
            "g-beta": self.evals[self.beta_index] - self.evals[self.ground_index],
            "alpha-f": self.evals[self.f_index] - self.evals[self.alpha_index],
            "beta-f": self.evals[self.f_index] - self.evals[self.beta_index],
        }[which]
        return radfs_to_cm1(e)

    def dipole(self, which: str) -> np.ndarray:
        """Transition dipole 3-vector for the current site dipoles."""
        c = {
            "g-alpha": self.coef_g_alpha,
            "g-beta": self.coef_g_beta,
            "alpha-f": self.coef_alpha_f,
            "beta-f": self.coef_beta_f,
        }[which]
        return c[0] * self.params.mu_a + c[1] * self.params.mu_b

    def branch_projector_populations(self, psi: np.ndarray) -> np.ndarray:
        """(P_alpha, P_beta): electronic-branch populations summed over phonons."""
        nv2 = self.space.n_vib**2
        amp_a = psi[self.space.electronic_slice("a")]
        amp_b = psi[self.space.electronic_slice("b")]
        site = np.stack([amp_a, amp_b])  # (2, nv2)
        am = self.elec_alpha @ site
        bm = self.elec_beta @ site
        return np.array([np.sum(np.abs(am) ** 2), np.sum(np.abs(bm) ** 2)])


def _site_coeffs_g_to_x(space: HilbertSpace, vec_x: np.ndarray, ground: np.ndarray):
    """(c_a, c_b) with <x| mu_hat |G> = c_a mu_a + c_b mu_b for G in the ground manifold."""
    nv2 = space.n_vib**2
    g_amp = ground[space.electronic_slice("g")]
    c_a = np.vdot(vec_x[space.electronic_slice("a")], g_amp)
    c_b = np.vdot(vec_x[space.electronic_slice("b")], g_amp)
    return np.array([c_a.real, c_b.real])


def _site_coeffs_x_to_f(space: HilbertSpace, vec_f: np.ndarray, vec_x: np.ndarray):
    """(c_a, c_b) with <f| mu_hat |x> = c_a mu_a + c_b mu_b for x in the 1EM."""
    f_amp = vec_f[space.electronic_slice("f")]
    # a_a^dag maps (b, n) -> (f, n); a_b^dag maps (a, n) -> (f, n)
    c_a = np.vdot(f_amp, vec_x[space.electronic_slice("b")])
    c_b = np.vdot(f_amp, vec_x[space.electronic_slice("a")])
    return np.array([c_a.real, c_b.real])


DEGENERACY_TOL_CM1 = 1e-9


def exciton_structure(ham: VibronicHamiltonian) -> ExcitonStructure:
    """Diagonalize, partition into manifolds, identify vibrationless states.

    Branch membership within the 1EM is decided by >50% overlap with the
    uncoupled electronic eigenvectors; the vibrationless state of a branch is
    its minimum-energy member.
    """
    space = ham.space
    params = ham.params
    evals, evecs = ham.eigensystem

    n_diag = space.n_exc_diagonal
    n_exp = np.einsum("i,ij->j", n_diag, np.abs(evecs) ** 2)
    manifold = np.rint(n_exp).astype(int)
    if not np.allclose(n_exp, manifold, atol=1e-9):
        raise AmbiguityError("eigenstates do not have sharp electronic excitation number")

    _, _, v_alpha, v_beta = electronic_eigenvectors(params)

    branch = np.full(space.d, -1, dtype=int)
    one_em = np.nonzero(manifold == 1)[0]
    amp_a = evecs[space.electronic_slice("a")][:, one_em]
    amp_b = evecs[space.electronic_slice("b")][:, one_em]
    site = np.stack([amp_a, amp_b])  # (2, nv2, n1em)
    w_alpha = np.sum(np.abs(np.einsum("i,ikj->kj", v_alpha, site)) ** 2, axis=0)
    w_beta = np.sum(np.abs(np.einsum("i,ikj->kj", v_beta, site)) ** 2, axis=0)
    branch[one_em] = np.where(w_alpha > w_beta, 0, 1)

    ground_index = int(np.nonzero(manifold == 0)[0][0])
    alpha_members = one_em[branch[one_em] == 0]
    beta_members = one_em[branch[one_em] == 1]
    if len(alpha_members) == 0 or len(beta_members) == 0:
        raise AmbiguityError("branch classification left one branch empty")
    alpha_index = int(alpha_members[np.argmin(evals[alpha_members])])
    beta_index = int(beta_members[np.argmin(evals[beta_members])])
    if radfs_to_cm1(abs(evals[alpha_index] - evals[beta_index])) < DEGENERACY_TOL_CM1:
        raise AmbiguityError(
            "alpha- and beta-branch vibrationless states are degenerate; "
            "branch assignment would be arbitrary"
        )
    f_candidates = np.nonzero(manifold == 2)[0]
    f_index = int(f_candidates[np.argmin(evals[f_candidates])])

    ground = evecs[:, ground_index]
    structure = ExcitonStructure(
        space=space,
        params=params,
        evals=evals,
        evecs=evecs,
        manifold=manifold,
        branch=branch,
        ground_index=ground_index,
        alpha_index=alpha_index,
        beta_index=beta_index,
        f_index=f_index,
        elec_alpha=v_alpha,
        elec_beta=v_beta,
        coef_g_alpha=_site_coeffs_g_to_x(space, evecs[:, alpha_index], ground),
        coef_g_beta=_site_coeffs_g_to_x(space, evecs[:, beta_index], ground),
        coef_alpha_f=_site_coeffs_x_to_f(space, evecs[:, f_index], evecs[:, alpha_index]),
        coef_beta_f=_site_coeffs_x_to_f(space, evecs[:, f_index], evecs[:, beta_index]),
    )
    return structure
