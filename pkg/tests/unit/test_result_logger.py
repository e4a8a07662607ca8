import json
import os
import shutil
import tempfile
import unittest

import numpy as np

from ppbs_cz_system import __version__
from ppbs_cz_system.analysis.metrics import process_fidelity
from ppbs_cz_system.analysis.tomography import BootstrapResult, chi_ideal_cz
from ppbs_cz_system.core.errors import ResultIOError
from ppbs_cz_system.data.result_logger import (
    ResultBundle,
    ResultLogger,
    matrix_rows,
    provenance,
    recompute_metrics,
    verify,
)
from ppbs_cz_system.optics.gate_circuits import build_ppbs_cz, process_chi


def _process_bundle():
    chi = process_chi(build_ppbs_cz(0.28, 0.28, 0.29))
    ideal = chi_ideal_cz()
    bundle = ResultBundle(name="process tomography", config={"seed": 5},
                          provenance=provenance(5, "process_tomography"))
    bundle.add_matrix("chi", chi)
    bundle.add_matrix("chi_ideal", ideal)
    bundle.metrics["process_fidelity"] = process_fidelity(chi, ideal)
    bundle.metrics["chi_II"] = float(chi[0, 0].real)
    bundle.add_table("restarts", ["restart", "value"], [[0, 0.5], [1, 0.75]])
    bundle.add_error("process_fidelity", BootstrapResult.from_values([0.95, 0.96, 0.97]))
    return bundle


class TestResultLogger(unittest.TestCase):
    def setUp(self):
        self.test_dir = tempfile.mkdtemp()
        self.logger = ResultLogger(out_dir=self.test_dir)

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_text_format_writes_one_bundle(self):
        written = self.logger.emit(_process_bundle(), "text")
        self.assertEqual(written, [os.path.join(self.test_dir, "process_tomography.json")])
        with open(written[0], "r") as f:
            raw = json.load(f)
        self.assertEqual(raw["format"], "ppbs-cz-result")
        self.assertEqual(raw["provenance"]["version"], __version__)
        self.assertNotIn("timestamp", raw["provenance"])

    def test_bundle_reloads_exactly(self):
        bundle = _process_bundle()
        path = self.logger.emit(bundle, "text")[0]
        loaded = ResultLogger.load(path)
        np.testing.assert_array_equal(loaded.matrices["chi"], bundle.matrices["chi"])
        self.assertEqual(loaded.metrics, bundle.metrics)
        self.assertEqual(loaded.tables["restarts"]["rows"], [[0, 0.5], [1, 0.75]])
        self.assertEqual(loaded.errors["process_fidelity"]["resamples"], 3)

    def test_table_format_writes_csvs(self):
        written = self.logger.emit(_process_bundle(), "table")
        names = sorted(os.path.basename(p) for p in written)
        self.assertEqual(names, [
            "process_tomography.json",
            "process_tomography_chi.csv",
            "process_tomography_chi_ideal.csv",
            "process_tomography_metrics.csv",
            "process_tomography_restarts.csv",
        ])
        meta, header, rows = ResultLogger.load_csv_with_metadata(
            os.path.join(self.test_dir, "process_tomography_chi.csv"))
        self.assertEqual(meta["content"], "matrix chi")
        self.assertEqual(meta["shape"], [16, 16])
        self.assertEqual(meta["seed"], 5)
        self.assertEqual(header, ["row", "column", "real", "imag"])
        self.assertEqual(len(rows), 256)

    def test_metrics_csv_carries_error_bars(self):
        self.logger.emit(_process_bundle(), "table")
        _, header, rows = ResultLogger.load_csv_with_metadata(
            os.path.join(self.test_dir, "process_tomography_metrics.csv"))
        self.assertEqual(header[:3], ["metric", "value", "std"])
        by_name = {row[0]: row for row in rows}
        self.assertAlmostEqual(float(by_name["process_fidelity"][2]), 0.01)
        self.assertEqual(by_name["chi_II"][2], "")

    def test_unknown_format(self):
        with self.assertRaises(ValueError):
            self.logger.emit(_process_bundle(), "xml")

    def test_unwritable_folder(self):
        blocker = os.path.join(self.test_dir, "blocker")
        with open(blocker, "w") as f:
            f.write("x")
        with self.assertRaises(ResultIOError) as ctx:
            ResultLogger(out_dir=blocker).emit(_process_bundle(), "text")
        self.assertEqual(ctx.exception.path, blocker)

    def test_load_errors(self):
        with self.assertRaises(ResultIOError):
            ResultLogger.load(os.path.join(self.test_dir, "missing.json"))
        path = os.path.join(self.test_dir, "other.json")
        with open(path, "w") as f:
            json.dump({"format": "something-else"}, f)
        with self.assertRaises(ResultIOError):
            ResultLogger.load(path)


class TestVerify(unittest.TestCase):
    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def test_consistent_bundle_verifies(self):
        path = ResultLogger(self.test_dir).emit(_process_bundle(), "text")[0]
        report = verify(path)
        self.assertTrue(report.ok)
        self.assertEqual(set(report.checked), {"process_fidelity", "chi_II"})

    def test_tampered_metric_is_reported(self):
        bundle = _process_bundle()
        bundle.metrics["process_fidelity"] += 0.01
        path = ResultLogger(self.test_dir).emit(bundle, "text")[0]
        report = verify(path)
        self.assertFalse(report.ok)
        self.assertEqual(list(report.mismatches), ["process_fidelity"])

    def test_only_stored_metrics_are_recomputed(self):
        bundle = _process_bundle()
        del bundle.metrics["chi_II"]
        self.assertEqual(set(recompute_metrics(bundle)), {"process_fidelity"})


class TestHelpers(unittest.TestCase):
    def test_provenance_stamp(self):
        self.assertNotIn("timestamp", provenance(1, "sweep"))
        self.assertIn("timestamp", provenance(1, "sweep", stamp=True))

    def test_matrix_rows(self):
        rows = matrix_rows(np.array([[1, 2j], [3, 4]]), ["a", "b"], ["x", "y"])
        self.assertEqual(rows[1], ["a", "y", 0.0, 2.0])
        self.assertEqual(len(rows), 4)


if __name__ == '__main__':
    unittest.main()
