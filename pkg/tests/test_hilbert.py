import numpy as np
import pytest
from scipy.linalg import expm

import twobox.hilbert as hb
from twobox.hilbert import SystemDims

from conftest import random_density


def padded_expm_displacement(dim, beta, margin=None):
    """Oracle: exponentiate the generator in a large enough space, crop back.

    The cropped block converges to the exact infinite-space matrix elements
    once the padding comfortably exceeds the displaced support.
    """
    if margin is None:
        margin = int(np.ceil(abs(beta) ** 2 + 8 * abs(beta))) + 20
    return hb.displacement(dim + margin, beta, "expm").data[:dim, :dim]


class TestFockAndCoherent:
    def test_vacuum(self):
        v = hb.fock_state(12, 0)
        assert v.amplitudes[0] == 1.0
        assert abs(v.norm - 1) < 1e-12

    def test_number_expectation(self):
        v = hb.fock_state(12, 3)
        assert abs(hb.expectation(v, hb.number(12)) - 3.0) < 1e-12

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            hb.fock_state(12, 12)
        with pytest.raises(ValueError):
            hb.fock_state(12, -1)

    def test_coherent_vacuum(self):
        c = hb.coherent_state(12, 0.0)
        assert abs(c.amplitudes[0] - 1.0) < 1e-12
        assert c.discarded_weight == 0.0

    def test_coherent_truncation_weight(self):
        c = hb.coherent_state(12, 1.92)
        assert 0 < c.discarded_weight < 1e-3
        assert abs(c.norm - 1.0) < 1e-12
        # mean photon number of the untruncated distribution
        raw = hb.coherent_state(12, 1.92, renormalize=False)
        n = np.arange(12)
        nbar_kept = float(np.sum(n * np.abs(raw.amplitudes) ** 2))
        assert abs(nbar_kept - 1.92 ** 2) < 0.02  # within the truncated tail

    def test_coherent_matches_displaced_vacuum(self):
        dim = 16
        vac = np.zeros(dim)
        vac[0] = 1.0
        d = hb.displacement(dim, 0.9 - 0.4j, "expm").data @ vac
        c = hb.coherent_state(dim, 0.9 - 0.4j)
        assert abs(abs(np.vdot(c.amplitudes, d)) - 1.0) < 1e-9

    def test_truncation_guard_warns(self):
        with pytest.warns(hb.TruncationWarning):
            hb.coherent_state(6, 3.0)


class TestTwoModeCat:
    def test_parity_eigenstate(self, dims12):
        pj = hb.joint_parity_operator(dims12)
        for phase, sign in ((0.0, 1.0), (np.pi, -1.0)):
            psi = hb.two_mode_cat(dims12, 1.92, 1.92, phase)
            resid = pj.data @ psi.amplitudes - sign * psi.amplitudes
            assert np.abs(resid).max() < 1e-10

    def test_zero_amplitude_even_is_vacuum(self, dims12):
        psi = hb.two_mode_cat(dims12, 0.0, 0.0, 0.0)
        assert abs(psi.amplitudes[dims12.index(0, 0, 0)] - 1.0) < 1e-12

    def test_degenerate_raises(self, dims12):
        with pytest.raises(ValueError):
            hb.two_mode_cat(dims12, 0.0, 0.0, np.pi)

    def test_general_amplitudes_and_phase(self):
        dims = SystemDims(14, 14)
        psi = hb.two_mode_cat(dims, 1.881, 1.922, -0.1)
        assert abs(psi.norm - 1.0) < 1e-12
        assert psi.discarded_weight < 2e-3
        # joint parity expectation from the branch-overlap closed form
        s = np.exp(-2 * (1.881 ** 2 + 1.922 ** 2))
        expected = (s + np.cos(-0.1)) / (1 + s * np.cos(-0.1))
        pj = hb.joint_parity_operator(dims)
        assert abs(np.real(hb.expectation(psi, pj)) - expected) < 1e-9


class TestSingleModeOperators:
    def test_parity_on_fock(self):
        p = hb.parity(12)
        v = hb.fock_state(12, 3)
        assert np.allclose(p.data @ v.amplitudes, -v.amplitudes)

    def test_commutator_truncation_edge(self):
        a = hb.annihilation(12).data
        comm = a @ a.conj().T - a.conj().T @ a
        assert np.allclose(comm[:11, :11], np.eye(12)[:11, :11], atol=1e-12)
        assert abs(comm[11, 11] + 11) < 1e-12  # last basis state breaks the identity

    def test_parity_is_exp_of_number(self):
        p = hb.parity(12).data
        e = expm(1j * np.pi * hb.number(12).data)
        assert np.abs(p - e).max() < 1e-12

    def test_hermitian_and_unitary_flags(self):
        assert hb.number(8).is_hermitian()
        assert hb.parity(8).is_hermitian()
        assert hb.parity(8).is_unitary()
        assert hb.displacement(8, 0.5).is_unitary()
        assert not hb.annihilation(8).is_hermitian()


class TestDisplacement:
    def test_vacuum_matrix_element(self):
        for beta in (0.4, 1.2 - 0.8j):
            for method in ("expm", "analytic"):
                d = hb.displacement(16, beta, method)
                assert abs(d.data[0, 0] - np.exp(-abs(beta) ** 2 / 2)) < 1e-10

    def test_methods_agree_against_padded_oracle(self):
        # analytic elements are exact; expm converges given enough padding
        dim = 20
        for beta in (0.5, 1.5 + 0.7j, 3.0, -2.5j, 2.9 * np.exp(0.3j)):
            da = hb.displacement(dim, beta, "analytic").data
            de = padded_expm_displacement(dim, beta)
            assert np.abs(da - de).max() < 1e-8

    def test_methods_agree_same_dim_away_from_edge(self):
        # for modest amplitudes the truncated expm already matches analytic
        # on the low-photon block
        dim = 20
        for beta in (0.5, 1.0, -0.7j):
            da = hb.displacement(dim, beta, "analytic").data
            de = hb.displacement(dim, beta, "expm").data
            assert np.abs(da - de)[:10, :10].max() < 1e-8

    def test_parity_conjugation(self):
        dim = 18
        p = hb.parity(dim).data
        for method in ("expm", "analytic"):
            for beta in (0.8, 1.3 - 0.4j):
                d = hb.displacement(dim, beta, method).data
                dneg = hb.displacement(dim, -beta, method).data
                assert np.abs(p @ d @ p - dneg).max() < 1e-10

    def test_composition_phase_law(self, rng):
        # D(b1) D(b2) = exp(i Im(b1 conj(b2))) D(b1 + b2) away from the edge
        dim = 40
        for _ in range(6):
            b1 = complex(*rng.normal(0, 0.8, 2))
            b2 = complex(*rng.normal(0, 0.8, 2))
            if abs(b1) + abs(b2) > 3.0:
                continue
            lhs = hb.displacement(dim, b1, "expm").data @ hb.displacement(dim, b2, "expm").data
            rhs = np.exp(1j * np.imag(b1 * np.conjugate(b2))) * \
                hb.displacement(dim, b1 + b2, "expm").data
            assert np.abs(lhs - rhs)[:12, :12].max() < 1e-8


class TestDisplacedParityKernel:
    def test_zero_displacement_is_parity(self):
        k = hb.displaced_parity_matrix(14, 0.0)
        assert np.abs(k.data - hb.parity(14).data).max() < 1e-14

    def test_corner_element(self):
        for beta in (0.5, 1.1 + 0.3j):
            k = hb.displaced_parity_matrix(16, beta)
            assert abs(k.data[0, 0] - np.exp(-2 * abs(beta) ** 2)) < 1e-12

    def test_same_dim_brute_force_conjugation(self):
        # expm route: D P D^dag equals D(2b) P exactly on the truncated space
        dim = 20
        for beta in (0.4 + 0.3j, 1.7, 3.0):
            d = hb.displacement(dim, beta, "expm").data
            brute = d @ hb.parity(dim).data @ d.conj().T
            k = hb.displaced_parity_matrix(dim, beta, "expm").data
            assert np.abs(k - brute).max() < 1e-8

    def test_analytic_vs_padded_brute_force(self):
        dim = 20
        p_big = hb.parity(100).data
        for beta in (0.4 + 0.3j, 1.7, 3.0):
            d = hb.displacement(100, beta, "expm").data
            brute = (d @ p_big @ d.conj().T)[:dim, :dim]
            k = hb.displaced_parity_matrix(dim, beta, "analytic").data
            assert np.abs(k - brute).max() < 1e-8

    def test_hermitian(self):
        k = hb.displaced_parity_matrix(16, 0.8 - 0.2j)
        assert k.is_hermitian(1e-10)


class TestEmbedTensorTrace:
    def test_joint_parity_factorizes(self, dims12):
        pa = hb.embed(hb.parity(12), "a", dims12)
        pb = hb.embed(hb.parity(12), "b", dims12)
        pj = hb.joint_parity_operator(dims12)
        assert np.abs((pa @ pb).data - pj.data).max() == 0.0

    def test_embeds_commute_across_modes(self, dims12):
        na = hb.embed(hb.number(12), "a", dims12)
        db = hb.embed(hb.displacement(12, 0.7), "b", dims12)
        assert np.abs((na @ db).data - (db @ na).data).max() < 1e-12

    def test_tensor_identity(self):
        eye = hb.tensor(hb.identity(3), hb.identity(4), hb.identity(3))
        assert np.abs(eye.data - np.eye(36)).max() == 0.0

    def test_embed_dim_mismatch(self, dims12):
        with pytest.raises(ValueError):
            hb.embed(hb.parity(5), "a", dims12)

    def test_index_convention(self):
        dims = SystemDims(4, 5, 3)
        assert dims.index(2, 3, 1) == (2 * 5 + 3) * 3 + 1
        na = hb.embed(hb.number(4), "a", dims)
        assert na.data[dims.index(2, 3, 1), dims.index(2, 3, 1)] == 2.0

    def test_partial_trace_product_state(self, rng):
        dims = SystemDims(6, 5)
        va = rng.normal(size=6) + 1j * rng.normal(size=6)
        va /= np.linalg.norm(va)
        vb = rng.normal(size=5) + 1j * rng.normal(size=5)
        vb /= np.linalg.norm(vb)
        q = np.zeros(3)
        q[1] = 1.0
        psi = hb.StateVector(np.kron(np.kron(va, vb), q), dims.factors, dims.labels)
        ra = hb.partial_trace(psi.to_density(), "a")
        assert np.abs(ra.data - np.outer(va, va.conj())).max() < 1e-12

    def test_partial_trace_preserves_trace_and_positivity(self, rng):
        dims = SystemDims(5, 4)
        for _ in range(5):
            rho = random_density(dims, rng)
            for keep in ("a", "b", ("a", "b"), ("b", "ancilla")):
                red = hb.partial_trace(rho, keep)
                assert abs(np.trace(red.data) - 1.0) < 1e-9
                assert np.linalg.eigvalsh(red.data).min() > -1e-9

    def test_partial_trace_empty_keep(self, dims12, rng):
        with pytest.raises(ValueError):
            hb.partial_trace(random_density(dims12, rng), ())

    def test_reduced_cat_parity_and_purity(self, dims12):
        # Gram-matrix oracle: in the {|a>, |-a>} basis the reduced state is
        # M = N^2 [[1, -s],[-s, 1]] with Gram G = [[1, s],[s, 1]], s = e^{-2a^2},
        # so M G = I/2 exactly: purity 1/2 and parity 0 for the odd cat.
        psi = hb.two_mode_cat(dims12, 1.92, 1.92, np.pi)
        ra = hb.partial_trace(psi.to_density(), "a")
        assert abs(np.real(hb.expectation(ra, hb.parity(12)))) < 0.01
        assert abs(hb.purity(ra) - 0.5) < 1e-3


class TestScalarMaps:
    def test_fidelity_identical(self, dims12):
        psi = hb.two_mode_cat(dims12, 1.5, 1.5, 0.0)
        assert abs(hb.fidelity(psi, psi.to_density()) - 1.0) < 1e-12
        assert abs(hb.fidelity(psi, psi) - 1.0) < 1e-12

    def test_purity_maximally_mixed(self):
        d = 9
        mm = hb.DensityMatrix(np.eye(d) / d, (d,))
        assert abs(hb.purity(mm) - 1.0 / d) < 1e-12

    def test_joint_parity_of_even_cat(self, dims12):
        psi = hb.two_mode_cat(dims12, 1.92, 1.92, 0.0)
        assert abs(np.real(hb.expectation(psi, hb.joint_parity_operator(dims12))) - 1.0) < 1e-10

    def test_mixed_fidelity_reduces_to_pure_formula(self, dims12, rng):
        psi = hb.two_mode_cat(dims12, 1.2, 1.2, np.pi)
        rho = random_density(dims12, rng, rank=6)
        f_pure = hb.fidelity(psi, rho)
        f_mixed = hb.fidelity(psi.to_density(), rho)
        assert abs(f_pure - f_mixed) < 1e-8

    def test_dim_mismatch_raises(self, dims12):
        psi = hb.two_mode_cat(dims12, 1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            hb.expectation(psi, hb.parity(12))


class TestImmutability:
    def test_arrays_frozen(self, dims12):
        psi = hb.two_mode_cat(dims12, 1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            psi.amplitudes[0] = 0.0
        op = hb.parity(8)
        with pytest.raises(ValueError):
            op.data[0, 0] = 5.0
