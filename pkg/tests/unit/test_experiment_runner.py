import glob
import os
import time
import unittest

import pytest

import numpy as np

import ppbs_cz_system
from ppbs_cz_system.control.experiment_runner import STREAM_COUNTS, ExperimentRunner, build_gate, run
from ppbs_cz_system.core.errors import ConfigError, NullPostselectionError
from ppbs_cz_system.core.qubit_states import to_logical_order
from ppbs_cz_system.optics.gate_circuits import Architecture
from ppbs_cz_system.settings.experiment_config import ExperimentConfig
from ppbs_cz_system.utils.run_profiler import RunProfiler


class TestBuildGate(unittest.TestCase):
    def test_architectures(self):
        self.assertEqual(build_gate(ExperimentConfig()).architecture, Architecture.PPBS)
        config = ExperimentConfig(architecture="interferometric", eta=[0.3, 0.3, 0.3])
        self.assertEqual(build_gate(config).architecture, Architecture.INTERFEROMETRIC)

    def test_interferometric_needs_equal_reflectivities(self):
        config = ExperimentConfig(architecture="interferometric", eta=[0.28, 0.28, 0.29])
        with self.assertRaises(ConfigError):
            build_gate(config)

    def test_replacements(self):
        gate = build_gate(ExperimentConfig(), overlap=0.4, eta=[0.3, 0.3, 0.3])
        self.assertEqual(gate.overlap, 0.4)
        self.assertEqual(gate.reflectivities, (0.3, 0.3, 0.3))


class TestProcessPipeline(unittest.TestCase):
    def test_noiseless_ideal_gate(self):
        bundle = run(ExperimentConfig(pipeline="process_tomography"))
        self.assertGreater(bundle.metrics["process_fidelity"], 0.9999)
        self.assertAlmostEqual(bundle.metrics["chi_II"], 0.25, places=5)
        self.assertAlmostEqual(bundle.metrics["success_probability"], 1.0 / 9.0, places=12)
        self.assertAlmostEqual(bundle.metrics["process_fidelity_direct"], 1.0, places=10)
        self.assertIn("chi_bars", bundle.tables)
        self.assertEqual(bundle.provenance["pipeline"], "process_tomography")

    def test_pulsed_reflectivities_unoptimized(self):
        bundle = run(ExperimentConfig(pipeline="process_tomography", eta=[0.28, 0.28, 0.29]))
        self.assertAlmostEqual(bundle.metrics["process_fidelity"], 0.955, delta=0.005)

    def test_null_postselection(self):
        config = ExperimentConfig(pipeline="process_tomography", eta=[0.5, 0.5, 0.5])
        with self.assertRaises(NullPostselectionError):
            run(config)

    @pytest.mark.slow
    def test_simulated_counts_with_bootstrap(self):
        config = ExperimentConfig(pipeline="process_tomography", counts=1e4, seed=1,
                                  settings_set="minimal16", n_resamples=2)
        bundle = run(config)
        self.assertGreater(bundle.metrics["process_fidelity"], 0.9)
        self.assertEqual(len(bundle.tables["counts"]["rows"]), 16 * 16)
        self.assertIn("process_fidelity", bundle.errors)
        self.assertIn("average_gate_fidelity", bundle.errors)

    @pytest.mark.slow
    def test_minimal_and_overcomplete_settings_agree_at_high_counts(self):
        for settings_set in ("minimal16", "overcomplete36"):
            config = ExperimentConfig(pipeline="process_tomography", counts=1e7, seed=1, settings_set=settings_set)
            bundle = run(config)
            self.assertGreater(bundle.metrics["process_fidelity"], 0.999, settings_set)

    def test_count_records_carry_seed_and_stream(self):
        config = ExperimentConfig(pipeline="process_tomography", counts=500, seed=5).validate()
        runner = ExperimentRunner(config)
        _, outputs, probs = runner._gate_outputs(build_gate(config))
        records = runner._measured_outputs(outputs, probs)
        flat = [r for group in records for r in group]
        self.assertEqual({r.rng_seed for r in flat}, {5})
        self.assertEqual({r.rng_stream for r in flat}, {STREAM_COUNTS})


class TestStatePipeline(unittest.TestCase):
    def test_noiseless_source(self):
        config = ExperimentConfig(pipeline="state_tomography", source_phase=-2.094,
                                  source_metadata={"preset": "cw"})
        bundle = run(config)
        self.assertGreater(bundle.metrics["state_fidelity"], 0.9999)
        self.assertGreater(bundle.metrics["tangle"], 0.999)
        self.assertGreater(bundle.metrics["compensation_fidelity"], 1 - 1e-8)
        self.assertLess(bundle.metrics["fidelity_phi_plus"], 0.5)
        self.assertEqual(bundle.provenance["source"]["photon_wavelength"], "702.2 nm")
        self.assertIn("likelihood_history", bundle.tables)
        self.assertEqual(len(bundle.tables["compensation_waveplates"]["rows"]), 3)

    def test_density_matrix_in_logical_order(self):
        bundle = run(ExperimentConfig(pipeline="state_tomography"))
        np.testing.assert_allclose(bundle.matrices["rho_logical"], to_logical_order(bundle.matrices["rho"]))
        bars = bundle.tables["rho_logical_bars"]["rows"]
        self.assertEqual(len(bars), 16)
        self.assertEqual(bars[0][:2], ["00", "00"])
        self.assertEqual(bars[-1][:2], ["11", "11"])

    def test_explicit_source_skips_compensation(self):
        real = [[0.25, 0, 0, 0], [0, 0.25, 0, 0], [0, 0, 0.25, 0], [0, 0, 0, 0.25]]
        config = ExperimentConfig(pipeline="state_tomography", source_state={"real": real})
        bundle = run(config)
        self.assertNotIn("compensation_fidelity", bundle.metrics)
        self.assertGreater(bundle.metrics["linear_entropy"], 0.95)


class TestBellPipeline(unittest.TestCase):
    def test_reduced_overlap_with_counts(self):
        config = ExperimentConfig(pipeline="bell_analysis", overlap=0.8, counts=1000, seed=11)
        bundle = run(config)
        self.assertLess(bundle.metrics["truth_table_mean_diagonal"], 1.0)
        self.assertGreater(bundle.metrics["truth_table_mean_diagonal"], 0.25)
        self.assertEqual(len(bundle.tables["truth_table"]["rows"]), 4)
        self.assertEqual(len(bundle.tables["truth_table_heatmap"]["rows"]), 16)
        self.assertIn("truth_table_counts", bundle.tables)
        self.assertIn("fitted_phase_control", bundle.metrics)

    def test_tables_label_inputs_and_logical_outcomes(self):
        bundle = run(ExperimentConfig(pipeline="bell_analysis"))
        inputs = [row[0] for row in bundle.tables["truth_table"]["rows"]]
        mutual = bundle.tables["mutual_fidelity"]
        self.assertEqual(mutual["columns"], ["input"] + inputs)
        self.assertEqual([row[0] for row in mutual["rows"]], inputs)
        logical = bundle.tables["truth_table_logical"]
        self.assertEqual(logical["columns"], ["input", "++", "-+", "+-", "--"])
        self.assertEqual(logical["rows"], bundle.tables["truth_table"]["rows"])
        heat = {(row[1], row[2]) for row in bundle.tables["truth_table_heatmap"]["rows"]}
        self.assertIn(("AD", "-+"), heat)

    def test_same_seed_same_bundle(self):
        config = dict(pipeline="bell_analysis", overlap=0.8, counts=1000, seed=11)
        first = run(ExperimentConfig(**config)).to_dict()
        second = run(ExperimentConfig(**config)).to_dict()
        self.assertEqual(first, second)


class TestSweepPipeline(unittest.TestCase):
    def test_overlap_sweep(self):
        config = ExperimentConfig(pipeline="sweep",
                                  sweep={"parameter": "overlap", "start": 0.0, "stop": 1.0, "step": 0.25})
        bundle = run(config)
        rows = bundle.tables["sweep"]["rows"]
        self.assertEqual(len(rows), 5)
        self.assertEqual(bundle.metrics["sweep_points"], 5.0)
        for row in rows:
            value, chi_ii, hom = row[0], row[3], row[6]
            self.assertAlmostEqual(chi_ii, (5 - 4 * value) / (8 - 4 * value), places=10)
            self.assertAlmostEqual(hom, (1 - value) / 2, places=10)
        self.assertAlmostEqual(bundle.metrics["overlap_at_chi_II_target"], 0.828, delta=0.005)
        self.assertIn("overlap_at_truth_table_target", bundle.metrics)

    def test_eleven_point_overlap_sweep(self):
        config = ExperimentConfig(pipeline="sweep",
                                  sweep={"parameter": "overlap", "start": 0.0, "stop": 1.0, "step": 0.1})
        rows = run(config).tables["sweep"]["rows"]
        self.assertEqual(len(rows), 11)
        f_p = [row[1] for row in rows]
        chi_ii = [row[3] for row in rows]
        for before, after in zip(f_p, f_p[1:]):
            self.assertGreaterEqual(after, before - 1e-12)
        for before, after in zip(chi_ii, chi_ii[1:]):
            self.assertLessEqual(after, before + 1e-12)
        self.assertTrue(all(c > 0.25 for c in chi_ii[:-1]))
        self.assertAlmostEqual(f_p[-1], 1.0, places=10)

    def test_empty_sweep(self):
        config = ExperimentConfig(pipeline="sweep",
                                  sweep={"parameter": "overlap", "start": 0.9, "stop": 0.1, "step": 0.1})
        bundle = run(config)
        self.assertEqual(bundle.tables["sweep"]["rows"], [])
        self.assertEqual(bundle.metrics["sweep_points"], 0.0)

    def test_eta_sweep(self):
        config = ExperimentConfig(pipeline="sweep",
                                  sweep={"parameter": "eta", "start": 0.3, "stop": 0.35, "step": 0.05})
        bundle = run(config)
        self.assertEqual(len(bundle.tables["sweep"]["rows"]), 2)
        self.assertNotIn("overlap_at_chi_II_target", bundle.metrics)


@pytest.mark.slow
class TestCorrectionPipeline(unittest.TestCase):
    def test_corrections_do_not_lower_fidelity(self):
        config = ExperimentConfig(pipeline="correction_optimization", eta=[0.28, 0.28, 0.29],
                                  seed=2005, restarts=2)
        bundle = ExperimentRunner(config, profiler=RunProfiler(enabled=False)).run()
        self.assertGreaterEqual(bundle.metrics["process_fidelity_corrected"],
                                bundle.metrics["process_fidelity"])
        self.assertEqual(len(bundle.tables["correction_angles"]["rows"]), 4)
        self.assertEqual(len(bundle.tables["correction_restarts"]["rows"]), 2)
        self.assertIn("chi_corrected", bundle.matrices)


@pytest.mark.slow
class TestShippedConfigs(unittest.TestCase):
    def test_each_config_runs_within_a_minute(self):
        config_dir = os.path.join(os.path.dirname(ppbs_cz_system.__file__), "config")
        paths = sorted(glob.glob(os.path.join(config_dir, "*.json")))
        self.assertTrue(paths)
        for path in paths:
            start = time.perf_counter()
            bundle = ExperimentRunner(ExperimentConfig.load(path), profiler=RunProfiler(enabled=False)).run()
            elapsed = time.perf_counter() - start
            self.assertTrue(bundle.metrics, os.path.basename(path))
            self.assertLess(elapsed, 60.0, os.path.basename(path))


if __name__ == '__main__':
    unittest.main()
