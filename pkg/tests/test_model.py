import math

import numpy as np
import pytest

from ppwitness.core import apc_preset, cm1_to_radfs
from ppwitness.model import (
    AmbiguityError,
    ResourceError,
    assemble,
    build_space,
    dipole_operator,
    electronic_eigenvectors,
    exciton_structure,
    hilbert_dimension,
)


def electronic_1em_oracle(params):
    """Analytic 2x2 diagonalization: mean -/+ sqrt(((eps_b-eps_a)/2)^2 + J^2)."""
    mean = 0.5 * (params.eps_a + params.eps_b)
    half = math.sqrt(((params.eps_b - params.eps_a) / 2.0) ** 2 + params.J**2)
    return mean - half, mean + half


def test_dimension_formula():
    assert hilbert_dimension(2, 4) == 100
    assert hilbert_dimension(7, 9) == int(4.9e8)
    assert hilbert_dimension(2, 0) == 4


def test_build_space_dimension_and_cap():
    assert build_space(4).d == 100
    assert build_space(0).d == 4
    with pytest.raises(ResourceError):
        build_space(1000)


def test_index_map_is_bijective():
    sp = build_space(3)
    seen = set()
    for label in ("g", "a", "b", "f"):
        for n1 in range(sp.n_vib):
            for n2 in range(sp.n_vib):
                idx = sp.index(label, n1, n2)
                assert sp.unpack(idx) == (label, n1, n2)
                seen.add(idx)
    assert seen == set(range(sp.d))


def test_hamiltonian_hermitian_and_block_structure():
    p = apc_preset()
    sp = build_space(2)
    ham = assemble(p, sp)
    for block in (ham.h_s, ham.h_b, ham.h_sb, ham.h_total):
        assert np.max(np.abs(block - block.conj().T)) < 1e-12
    # H_S couples only electronic labels: diagonal in phonon occupancies
    for i in range(sp.d):
        for j in range(sp.d):
            li, n1i, n2i = sp.unpack(i)
            lj, n1j, n2j = sp.unpack(j)
            if (n1i, n2i) != (n1j, n2j):
                assert ham.h_s[i, j] == 0.0
            if li != lj:
                assert ham.h_b[i, j] == 0.0


def test_uncoupled_limit_h_sb_zero_and_diagonal():
    p = apc_preset().replace(g_a=0.0, g_b=0.0)
    ham = assemble(p, build_space(2))
    assert np.max(np.abs(ham.h_sb)) == 0.0
    q = p.replace(J=0.0)
    ham2 = assemble(q, build_space(2))
    off = ham2.h_total - np.diag(np.diag(ham2.h_total))
    assert np.max(np.abs(off)) == 0.0


def test_commutes_with_excitation_number():
    p = apc_preset()
    sp = build_space(3)
    ham = assemble(p, sp)
    n_op = np.diag(sp.n_exc_diagonal)
    comm = ham.h_total @ n_op - n_op @ ham.h_total
    assert np.max(np.abs(comm)) < 1e-10


def test_eigen_residuals():
    p = apc_preset()
    ham = assemble(p, build_space(3))
    evals, evecs = ham.eigensystem
    h = ham.h_total
    res = h @ evecs - evecs * evals[np.newaxis, :]
    assert np.max(np.linalg.norm(res, axis=0)) < 1e-9 * np.linalg.norm(h)


def test_1em_electronic_eigenvalues_match_2x2_oracle():
    p = apc_preset().replace(g_a=0.0, g_b=0.0)
    ham = assemble(p, build_space(2))
    st = exciton_structure(ham)
    lo, hi = electronic_1em_oracle(p)
    assert st.transition_energy_cm1("g-alpha") == pytest.approx(lo, abs=1e-8)
    assert st.transition_energy_cm1("g-beta") == pytest.approx(hi, abs=1e-8)
    # quoted APC values
    assert lo == pytest.approx(15271.7, abs=0.05)
    assert hi == pytest.approx(16228.3, abs=0.05)


def test_biexciton_shift_moves_f_block_only():
    p = apc_preset().replace(g_a=0.0, g_b=0.0)
    sp = build_space(1)
    st0 = exciton_structure(assemble(p, sp))
    st1 = exciton_structure(assemble(p.replace(delta_E=50.0), sp))
    assert st1.transition_energy_cm1("g-alpha") == pytest.approx(
        st0.transition_energy_cm1("g-alpha"), abs=1e-9
    )
    assert st1.transition_energy_cm1("alpha-f") == pytest.approx(
        st0.transition_energy_cm1("alpha-f") + 50.0, abs=1e-8
    )


def test_exciton_dipole_orthogonality_homodimer():
    p = apc_preset().replace(eps_a=15000.0, eps_b=15000.0)
    st = exciton_structure(assemble(p.replace(g_a=0.0, g_b=0.0), build_space(1)))
    assert abs(np.dot(st.dipole("g-alpha"), st.dipole("g-beta"))) < 1e-10


def test_exciton_dipole_orthogonality_perpendicular_sites():
    p = apc_preset().with_dipoles([0.0, 0.0, 1.0], [1.0, 0.0, 0.0])
    st = exciton_structure(assemble(p.replace(g_a=0.0, g_b=0.0), build_space(1)))
    assert abs(np.dot(st.dipole("g-alpha"), st.dipole("g-beta"))) < 1e-10


def test_exciton_dipole_dot_product_rule():
    # mu_ga . mu_gb = (alpha_a^2 - alpha_b^2)(mu_a . mu_b) for unit site dipoles
    p = apc_preset().replace(g_a=0.0, g_b=0.0)
    st = exciton_structure(assemble(p, build_space(0)))
    alpha = st.elec_alpha
    expected = (alpha[0] ** 2 - alpha[1] ** 2) * float(np.dot(p.mu_a, p.mu_b))
    got = float(np.dot(st.dipole("g-alpha"), st.dipole("g-beta")))
    assert got == pytest.approx(expected, abs=1e-12)


def test_dipole_sum_rule_uncoupled():
    p = apc_preset().replace(g_a=0.0, g_b=0.0)
    st = exciton_structure(assemble(p, build_space(1)))
    total = np.linalg.norm(st.dipole("g-alpha")) ** 2 + np.linalg.norm(st.dipole("g-beta")) ** 2
    assert total == pytest.approx(
        np.linalg.norm(p.mu_a) ** 2 + np.linalg.norm(p.mu_b) ** 2, abs=1e-10
    )


def test_site_equality_in_uncoupled_electronic_limit():
    # J = 0, g = 0: mu_{g alpha} = mu_a = mu_{beta f} and mu_{g beta} = mu_b = mu_{alpha f}
    p = apc_preset().replace(J=0.0, g_a=0.0, g_b=0.0)
    st = exciton_structure(assemble(p, build_space(1)))
    np.testing.assert_allclose(st.dipole("g-alpha"), p.mu_a, atol=1e-10)
    np.testing.assert_allclose(st.dipole("beta-f"), p.mu_a, atol=1e-10)
    np.testing.assert_allclose(st.dipole("g-beta"), p.mu_b, atol=1e-10)
    np.testing.assert_allclose(st.dipole("alpha-f"), p.mu_b, atol=1e-10)


def test_degenerate_branches_raise():
    p = apc_preset().replace(eps_a=15000.0, eps_b=15000.0, J=0.0, g_a=0.0, g_b=0.0)
    with pytest.raises(AmbiguityError):
        exciton_structure(assemble(p, build_space(0)))


def test_manifold_partition_counts():
    sp = build_space(2)
    st = exciton_structure(assemble(apc_preset(), sp))
    nv2 = sp.n_vib**2
    assert np.count_nonzero(st.manifold == 0) == nv2
    assert np.count_nonzero(st.manifold == 1) == 2 * nv2
    assert np.count_nonzero(st.manifold == 2) == nv2


def test_dipole_operator_matches_structure_dipoles():
    p = apc_preset()
    sp = build_space(2)
    ham = assemble(p, sp)
    st = exciton_structure(ham)
    evals, evecs = ham.eigensystem
    mu_op = dipole_operator(sp, p.mu_a, p.mu_b)
    ground = evecs[:, st.ground_index]
    alpha = evecs[:, st.alpha_index]
    direct = np.array([alpha.conj() @ mu_op[k] @ ground for k in range(3)]).real
    np.testing.assert_allclose(direct, st.dipole("g-alpha"), atol=1e-10)
    f_state = evecs[:, st.f_index]
    direct_f = np.array([f_state.conj() @ mu_op[k] @ alpha for k in range(3)]).real
    np.testing.assert_allclose(direct_f, st.dipole("alpha-f"), atol=1e-10)
