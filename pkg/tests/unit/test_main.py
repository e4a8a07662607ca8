import json
import os
import shutil
import tempfile
import unittest

from ppbs_cz_system.core.errors import (
    EXIT_CONFIG,
    EXIT_DOMAIN,
    EXIT_IO,
    EXIT_NULL_POSTSELECTION,
    EXIT_SUCCESS,
    ConfigError,
    DomainError,
    NullPostselectionError,
    ResultIOError,
    error_kind,
    exit_code_for,
)
from ppbs_cz_system.main import RUN_LOG_NAME, main


class TestExitCodes(unittest.TestCase):
    def test_mapping(self):
        self.assertEqual(exit_code_for(NullPostselectionError("x")), EXIT_NULL_POSTSELECTION)
        self.assertEqual(exit_code_for(ConfigError("x")), EXIT_CONFIG)
        self.assertEqual(exit_code_for(DomainError("x")), EXIT_DOMAIN)
        self.assertEqual(exit_code_for(ResultIOError("out", "denied")), EXIT_IO)
        self.assertEqual(exit_code_for(PermissionError("x")), EXIT_IO)
        self.assertEqual(exit_code_for(ValueError("x")), EXIT_DOMAIN)

    def test_kinds(self):
        self.assertEqual(error_kind(NullPostselectionError("x")), "null post-selection")
        self.assertEqual(error_kind(ConfigError("x")), "config")
        self.assertEqual(str(ResultIOError("out/a.json", "denied")), "out/a.json: denied")


class TestMain(unittest.TestCase):
    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir)

    def _run(self, *args):
        return main(list(args))

    def test_process_tomography_writes_bundle_and_log(self):
        code = self._run("tomo-process", "--out", self.test_dir)
        self.assertEqual(code, EXIT_SUCCESS)
        self.assertTrue(os.path.exists(os.path.join(self.test_dir, "process_tomography.json")))
        with open(os.path.join(self.test_dir, RUN_LOG_NAME), "r", encoding="utf-8") as f:
            self.assertIn("[RUN] Pipeline process_tomography", f.read())

    def test_table_format(self):
        code = self._run("tomo-process", "--out", self.test_dir, "--format", "table", "--no-log")
        self.assertEqual(code, EXIT_SUCCESS)
        self.assertTrue(os.path.exists(os.path.join(self.test_dir, "process_tomography_metrics.csv")))
        self.assertFalse(os.path.exists(os.path.join(self.test_dir, RUN_LOG_NAME)))

    def test_null_postselection_exit_code(self):
        code = self._run("tomo-process", "--eta", "0.5,0.5,0.5", "--out", self.test_dir, "--no-log")
        self.assertEqual(code, EXIT_NULL_POSTSELECTION)

    def test_config_errors(self):
        self.assertEqual(self._run("tomo-process", "--eta", "0.3,0.3", "--no-log"), EXIT_CONFIG)
        self.assertEqual(self._run("tomo-process", "--counts", "100", "--no-log"), EXIT_CONFIG)
        self.assertEqual(self._run("tomo-process", "--overlap", "1.5", "--no-log"), EXIT_CONFIG)
        self.assertEqual(self._run("tomo-process", "--config", os.path.join(self.test_dir, "nope.json")),
                         EXIT_CONFIG)
        self.assertEqual(self._run("teleport"), EXIT_CONFIG)

    def test_io_error_exit_code(self):
        blocker = os.path.join(self.test_dir, "blocker")
        with open(blocker, "w") as f:
            f.write("x")
        self.assertEqual(self._run("tomo-process", "--out", blocker, "--no-log"), EXIT_IO)

    def test_verify(self):
        self._run("tomo-process", "--out", self.test_dir, "--no-log")
        path = os.path.join(self.test_dir, "process_tomography.json")
        self.assertEqual(self._run("verify", path), EXIT_SUCCESS)

        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        raw["metrics"]["process_fidelity"] -= 0.1
        with open(path, "w", encoding="utf-8") as f:
            json.dump(raw, f)
        self.assertEqual(self._run("verify", path), EXIT_DOMAIN)
        self.assertEqual(self._run("verify", os.path.join(self.test_dir, "missing.json")), EXIT_IO)

    def test_config_file_with_seed_override(self):
        config = os.path.join(self.test_dir, "bell.json")
        with open(config, "w", encoding="utf-8") as f:
            json.dump({"pipeline": "bell_analysis", "overlap": 0.9, "counts": 100}, f)
        out = os.path.join(self.test_dir, "out")
        self.assertEqual(self._run("simulate", "--config", config, "--no-log"), EXIT_CONFIG)
        self.assertEqual(self._run("simulate", "--config", config, "--seed", "4", "--out", out, "--no-log"),
                         EXIT_SUCCESS)
        self.assertTrue(os.path.exists(os.path.join(out, "bell_analysis.json")))


if __name__ == '__main__':
    unittest.main()
