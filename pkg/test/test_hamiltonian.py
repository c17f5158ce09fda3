import os
import tempfile
import unittest

import numpy as np

from spintypicality.core import StateVector, renormalize
from spintypicality.errors import CapabilityError, ConfigError, DimensionError
from spintypicality.hamiltonian import (
    AnisotropyKind,
    Coupling,
    CouplingNetwork,
    apply_hamiltonian,
    build_chain,
    build_ladder,
    build_star,
    energy_expectation,
    hamiltonian_matrix,
    hamiltonian_second_moment,
    load_edge_list,
    local_second_moment,
    save_edge_list,
    sector_hamiltonian,
)
from spintypicality.helpers import popcounts

SZ = np.diag([0.5, -0.5])
SP = np.array([[0.0, 1.0], [0.0, 0.0]])
SM = SP.T


def _site_operator(op, site, m_sites):
    # little endian: site 0 is the least significant bit, so it is the last kron factor
    up_first = np.array([[0.0, 1.0], [1.0, 0.0]])
    local = up_first @ op @ up_first
    result = np.eye(1)
    for k in reversed(range(m_sites)):
        result = np.kron(result, local if k == site else np.eye(2))
    return result


def _reference_matrix(net):
    h = np.zeros((net.dim, net.dim), dtype=complex)
    for c in net.couplings:
        zi, zj = _site_operator(SZ, c.i, net.m_sites), _site_operator(SZ, c.j, net.m_sites)
        pi, pj = _site_operator(SP, c.i, net.m_sites), _site_operator(SP, c.j, net.m_sites)
        mi, mj = _site_operator(SM, c.i, net.m_sites), _site_operator(SM, c.j, net.m_sites)
        h += c.a * zi @ zj + 0.5 * c.b * (pi @ mj + mi @ pj)
    return h


class TestNetworks(unittest.TestCase):
    def test_ladder_couplings(self):
        net = build_ladder(14, 1.0, 0.1)
        self.assertEqual(len(net), 19)
        pairs = {(c.i, c.j): c.b for c in net.couplings}
        self.assertEqual(pairs[(0, 1)], 1.0)
        self.assertEqual(pairs[(7, 8)], 1.0)
        self.assertEqual(pairs[(0, 7)], 0.1)
        self.assertNotIn((6, 7), pairs)
        self.assertTrue(all(c.a == 0.0 for c in net.couplings))

    def test_ladder_rejects_odd(self):
        with self.assertRaises(ConfigError):
            build_ladder(7, 1.0, 0.1)

    def test_star_reproducible(self):
        a = build_star(4, 1.0, 11)
        b = build_star(4, 1.0, 11)
        self.assertEqual(len(a), 6)
        self.assertEqual(a, b)
        for c in a.couplings:
            self.assertEqual(c.a, -2.0 * c.b)
        self.assertNotEqual(a, build_star(4, 1.0, 12))

    def test_star_rejects_sigma(self):
        with self.assertRaises(ConfigError):
            build_star(4, 0.0, 1)

    def test_star_moments(self):
        draws = np.concatenate([[c.b for c in build_star(6, 1.0, s).couplings] for s in range(2000)])
        self.assertLess(abs(draws.mean()), 5 / np.sqrt(draws.size))
        self.assertLess(abs(draws.var() - 1.0), 5 * np.sqrt(2.0 / draws.size))

    def test_second_moments(self):
        self.assertAlmostEqual(local_second_moment(14, 1.0), 29.25)
        self.assertAlmostEqual(hamiltonian_second_moment(14, 1.0), 7 * 29.25)

    def test_rejects_duplicate_and_bad_sites(self):
        with self.assertRaises(ConfigError):
            CouplingNetwork(3, (Coupling(0, 1, 0, 1), Coupling(0, 1, 0, 1)))
        with self.assertRaises(ConfigError):
            CouplingNetwork(2, (Coupling(0, 2, 0, 1),))
        with self.assertRaises(ConfigError):
            Coupling(1, 1, 0.0, 1.0)

    def test_anisotropy(self):
        self.assertEqual(AnisotropyKind.DIPOLAR.coefficients(1.0), (-2.0, 1.0))
        net = build_chain(3, 2.0, AnisotropyKind.ISING)
        self.assertEqual(net.b_max, 1.0)


class TestApply(unittest.TestCase):
    def setUp(self):
        np.random.seed(42)
        self.net = build_star(5, 1.0, 3)
        self.psi = renormalize(np.random.randn(32) + 1j * np.random.randn(32))

    def test_matches_kron_reference(self):
        np.testing.assert_allclose(hamiltonian_matrix(self.net), _reference_matrix(self.net).real, atol=1e-12)

    def test_apply_matches_matrix(self):
        expected = hamiltonian_matrix(self.net) @ self.psi.amplitudes
        np.testing.assert_allclose(apply_hamiltonian(self.net, self.psi), expected, atol=1e-12)

    def test_apply_is_linear(self):
        phi = renormalize(np.random.randn(32) + 1j * np.random.randn(32))
        combined = apply_hamiltonian(self.net, 2.0 * self.psi.amplitudes + 1j * phi.amplitudes)
        separate = 2.0 * apply_hamiltonian(self.net, self.psi) + 1j * apply_hamiltonian(self.net, phi)
        np.testing.assert_allclose(combined, separate, atol=1e-12)

    def test_hermitian(self):
        phi = renormalize(np.random.randn(32) + 1j * np.random.randn(32))
        left = np.vdot(phi.amplitudes, apply_hamiltonian(self.net, self.psi))
        right = np.vdot(apply_hamiltonian(self.net, phi), self.psi.amplitudes)
        self.assertAlmostEqual(left, right, places=12)

    def test_conserves_sectors(self):
        counts = popcounts(5)
        amplitudes = np.zeros(32, dtype=complex)
        amplitudes[counts == 2] = 1.0
        out = apply_hamiltonian(self.net, renormalize(amplitudes))
        self.assertTrue(np.all(out[counts != 2] == 0))

    def test_conserves_sectors_per_config(self):
        for net in (build_star(6, 1.0, 8), build_ladder(6, 1.0, 0.4), build_chain(5, 1.0, AnisotropyKind.DIPOLAR)):
            counts = popcounts(net.m_sites)
            for bits in range(net.dim):
                amplitudes = np.zeros(net.dim, dtype=complex)
                amplitudes[bits] = 1.0
                out = apply_hamiltonian(net, amplitudes)
                self.assertTrue(np.all(counts[np.flatnonzero(out)] == counts[bits]), f"{net.label} config {bits}")

    def test_two_site_xy(self):
        net = build_chain(2, 1.0)
        amplitudes = np.zeros(4, dtype=complex)
        amplitudes[0b01] = 1.0
        out = apply_hamiltonian(net, StateVector(amplitudes))
        np.testing.assert_allclose(out, [0, 0, 0.5, 0])

    def test_energy_expectation(self):
        expected = np.vdot(self.psi.amplitudes, hamiltonian_matrix(self.net) @ self.psi.amplitudes).real
        self.assertAlmostEqual(energy_expectation(self.net, self.psi), expected, places=12)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionError):
            apply_hamiltonian(self.net, np.ones(16))

    def test_dense_cap(self):
        with self.assertRaises(CapabilityError):
            hamiltonian_matrix(build_chain(13, 1.0))

    def test_sector_block(self):
        counts = popcounts(5)
        configs = np.flatnonzero(counts == 2)
        block = sector_hamiltonian(self.net, configs).toarray()
        full = hamiltonian_matrix(self.net)
        np.testing.assert_allclose(block, full[np.ix_(configs, configs)], atol=1e-12)

    def test_sector_not_closed(self):
        with self.assertRaises(DimensionError):
            sector_hamiltonian(build_chain(2, 1.0), np.array([1]))


class TestEdgeList(unittest.TestCase):
    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.dir.cleanup()

    def _write(self, text):
        path = os.path.join(self.dir.name, "net.txt")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
        return path

    def test_save_load(self):
        net = build_star(4, 1.0, 5)
        path = os.path.join(self.dir.name, "star.txt")
        save_edge_list(net, path)
        loaded = load_edge_list(path)
        self.assertEqual(loaded.couplings, net.couplings)
        self.assertEqual(loaded.m_sites, 4)

    def test_swapped_pair(self):
        net = load_edge_list(self._write("M 3\n2 0 0.0 1.0\n# comment\n1 2 0.5 0.0\n"))
        self.assertEqual([(c.i, c.j) for c in net.couplings], [(0, 2), (1, 2)])

    def test_no_edges(self):
        net = load_edge_list(self._write("M 3\n"))
        self.assertEqual(len(net), 0)

    def test_bad_files(self):
        with self.assertRaises(ConfigError):
            load_edge_list(self._write("3\n0 1 0 1\n"))
        with self.assertRaises(ConfigError):
            load_edge_list(self._write("M 3\n0 3 0 1\n"))
        with self.assertRaises(ConfigError):
            load_edge_list(self._write("M 3\n1 1 0 1\n"))


if __name__ == "__main__":
    unittest.main()
