import json
import os
import tempfile
import unittest

from blockry import config

config.IN_TEST = True


class TestConfig(unittest.TestCase):
    def test_in_test_varset(self):
        self.assertTrue(config.IN_TEST)
        self.assertEqual(os.path.basename(config.BASE_CONFIG_DIR), "blockry_test")
        self.assertTrue(os.path.isfile(os.path.join(config.BASE_CONFIG_DIR, "config.json")))

    def test_numerics_defaults(self):
        self.assertEqual(config.numerics("breakdown_tol"), 1e-12)
        self.assertEqual(config.numerics("breakdown_tol", 1e-8), 1e-8)
        self.assertEqual(config.numerics("rank_tol_factor"), 1.0)
        self.assertEqual(config.numerics("replacement_retries"), 3)

    def test_solver_defaults(self):
        self.assertEqual(config.solver_default("max_iterations"), 100)
        self.assertEqual(config.solver_default("tolerance"), 1e-10)

    def test_load_fills_missing_keys(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "config.json")
            with open(path, "w") as f:
                json.dump({"numerics": {"breakdown_tol": 1e-9}}, f)
            previous = config.CONFIG
            try:
                config.load_config(path)
                self.assertEqual(config.numerics("breakdown_tol"), 1e-9)
                self.assertEqual(config.numerics("intersection_tol"), 1e-8)
                with open(path) as f:
                    written = json.load(f)
                self.assertIn("solver", written)
                self.assertTrue(os.path.isfile(path + ".bu"))
            finally:
                config.CONFIG = previous

    def test_load_falls_back_to_backup(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "config.json")
            with open(path, "w") as f:
                f.write("{broken")
            with open(path + ".bu", "w") as f:
                json.dump({"solver": {"max_iterations": 60}}, f)
            previous = config.CONFIG
            try:
                config.load_config(path)
                self.assertEqual(config.solver_default("max_iterations"), 60)
            finally:
                config.CONFIG = previous

    def test_data_dir_environment(self):
        previous = os.environ.get("BLOCKRY_DATA")
        os.environ["BLOCKRY_DATA"] = "/tmp/blockry-matrices"
        try:
            self.assertEqual(config.data_dir(), "/tmp/blockry-matrices")
        finally:
            if previous is None:
                del os.environ["BLOCKRY_DATA"]
            else:
                os.environ["BLOCKRY_DATA"] = previous
