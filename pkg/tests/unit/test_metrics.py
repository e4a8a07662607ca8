import math
import unittest

import numpy as np

from ppbs_cz_system.analysis.corrections import bisect_overlap
from ppbs_cz_system.analysis.metrics import (
    TruthTable,
    average_gate_fidelity,
    concurrence,
    linear_entropy,
    mean_off_diagonal,
    mutual_fidelity_matrix,
    process_fidelity,
    set_summary,
    state_fidelity,
    tangle,
    truth_table,
)
from ppbs_cz_system.analysis.tomography import chi_from_operator, chi_ideal_cz
from ppbs_cz_system.core.errors import DomainError
from ppbs_cz_system.core.qubit_states import (
    apply_local,
    ket,
    maximally_mixed,
    normalize,
    projector,
    werner_state,
)
from ppbs_cz_system.optics.gate_circuits import build_ppbs_cz

PHI_PLUS = projector(normalize(ket("HH") + ket("VV")))


def _random_unitary(rng):
    q, r = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
    return q * (np.diag(r) / np.abs(np.diag(r)))


class TestProcessFidelity(unittest.TestCase):
    def test_identity_against_cz(self):
        chi_identity = chi_from_operator(np.eye(4))
        self.assertAlmostEqual(process_fidelity(chi_identity, chi_ideal_cz()), 0.25, places=12)

    def test_ideal_against_itself(self):
        self.assertAlmostEqual(process_fidelity(chi_ideal_cz(), chi_ideal_cz()), 1.0, places=12)

    def test_average_gate_fidelity(self):
        self.assertAlmostEqual(average_gate_fidelity(0.746), 0.7968, places=12)
        self.assertAlmostEqual(average_gate_fidelity(0.840), 0.872, places=12)
        self.assertAlmostEqual(average_gate_fidelity(0.0), 0.2, places=12)
        self.assertAlmostEqual(average_gate_fidelity(1.0), 1.0)
        with self.assertRaises(DomainError):
            average_gate_fidelity(1.5)

    def test_rejects_unphysical_chi(self):
        with self.assertRaises(DomainError):
            process_fidelity(np.eye(16), chi_ideal_cz())


class TestStateMetrics(unittest.TestCase):
    def test_werner_state(self):
        rho = werner_state(0.5)
        self.assertAlmostEqual(state_fidelity(rho, PHI_PLUS), 0.625, places=10)
        self.assertAlmostEqual(tangle(rho), 0.0625, places=10)
        self.assertAlmostEqual(linear_entropy(rho), 0.75, places=10)

    def test_mixed_fidelity_is_symmetric(self):
        a, b = werner_state(0.5), maximally_mixed()
        expected = (0.5 * (math.sqrt(0.625) + 3 * math.sqrt(0.125))) ** 2
        self.assertAlmostEqual(state_fidelity(a, b), expected, places=10)
        self.assertAlmostEqual(state_fidelity(b, a), expected, places=10)

    def test_limits(self):
        self.assertAlmostEqual(concurrence(PHI_PLUS), 1.0, places=10)
        self.assertAlmostEqual(concurrence(projector(ket("HD"))), 0.0, places=10)
        self.assertAlmostEqual(linear_entropy(PHI_PLUS), 0.0, places=12)
        self.assertAlmostEqual(linear_entropy(maximally_mixed()), 1.0, places=12)
        self.assertAlmostEqual(state_fidelity(PHI_PLUS, PHI_PLUS), 1.0, places=12)

    def test_local_unitaries_leave_entanglement_unchanged(self):
        rng = np.random.default_rng(50)
        psi = normalize(rng.normal(size=4) + 1j * rng.normal(size=4))
        for rho in (werner_state(0.7), 0.6 * projector(psi) + 0.4 * maximally_mixed()):
            t, s = tangle(rho), linear_entropy(rho)
            for _ in range(50):
                rotated = apply_local(rho, _random_unitary(rng), _random_unitary(rng))
                self.assertAlmostEqual(tangle(rotated), t, places=10)
                self.assertAlmostEqual(linear_entropy(rotated), s, places=10)

    def test_rejects_non_density_matrix(self):
        with self.assertRaises(DomainError):
            tangle(np.eye(4))
        with self.assertRaises(DomainError):
            state_fidelity(np.diag([1.5, -0.5, 0, 0]), PHI_PLUS)


class TestSetMetrics(unittest.TestCase):
    def test_mutual_fidelity_of_orthogonal_states(self):
        states = [projector(ket(label)) for label in ("HH", "HV", "VH", "VV")]
        mutual = mutual_fidelity_matrix(states)
        np.testing.assert_allclose(mutual, np.eye(4), atol=1e-12)
        self.assertAlmostEqual(mean_off_diagonal(mutual), 0.0)
        with self.assertRaises(DomainError):
            mutual_fidelity_matrix(states[:1])

    def test_set_summary(self):
        summary = set_summary([PHI_PLUS, werner_state(0.5)], [PHI_PLUS, PHI_PLUS])
        self.assertEqual(summary.count, 2)
        self.assertAlmostEqual(summary.mean_fidelity, (1.0 + 0.625) / 2, places=10)
        self.assertAlmostEqual(summary.mean_tangle, (1.0 + 0.0625) / 2, places=10)
        self.assertIsNone(set_summary([PHI_PLUS]).mean_fidelity)
        with self.assertRaises(DomainError):
            set_summary([PHI_PLUS], [PHI_PLUS, PHI_PLUS])


class TestTruthTable(unittest.TestCase):
    def test_full_overlap_is_permutation(self):
        table = truth_table(build_ppbs_cz())
        np.testing.assert_allclose(table.probabilities, np.eye(4), atol=1e-10)
        self.assertAlmostEqual(table.mean_diagonal, 1.0, places=10)
        for p in table.success_probabilities:
            self.assertAlmostEqual(p, 1.0 / 9.0, places=12)

    def test_distinguishable_photons(self):
        table = truth_table(build_ppbs_cz(overlap=0.0))
        self.assertLessEqual(table.mean_diagonal, 0.5)
        self.assertAlmostEqual(table.mean_diagonal, 0.25, places=10)

    def test_orderings_across_overlap(self):
        tables = {v: truth_table(build_ppbs_cz(overlap=v)) for v in (0.0, 0.8, 1.0)}
        diagonal = {v: t.mean_diagonal for v, t in tables.items()}
        self.assertLess(diagonal[0.0], diagonal[0.8])
        self.assertLess(diagonal[0.8], diagonal[1.0])
        mutual = {v: mean_off_diagonal(mutual_fidelity_matrix(t.output_states)) for v, t in tables.items()}
        self.assertAlmostEqual(mutual[1.0], 0.0, places=8)
        self.assertGreater(mutual[0.8], 0.0)
        self.assertLess(mutual[0.8], mutual[0.0])

    def test_operating_point(self):
        def mean_diagonal(v):
            return truth_table(build_ppbs_cz(overlap=v)).mean_diagonal

        v = bisect_overlap(mean_diagonal, 0.78)
        self.assertGreater(v, 0.0)
        self.assertLess(v, 1.0)
        self.assertAlmostEqual(mean_diagonal(v), 0.78, delta=0.005)

    def test_as_dict(self):
        table = truth_table(build_ppbs_cz())
        rows = table.as_dict()
        self.assertEqual(set(rows), {"psi'+", "psi'-", "phi'+", "phi'-"})
        self.assertAlmostEqual(rows["phi'+"]["DA"], 1.0, places=10)

    def test_validation(self):
        with self.assertRaises(DomainError):
            TruthTable(np.full((4, 4), 0.5), ("a", "b", "c", "d"))
        with self.assertRaises(DomainError):
            TruthTable(np.eye(3), ("a", "b", "c"))


if __name__ == '__main__':
    unittest.main()
