import unittest

from blockry import config
from blockry.utils.data import deep_fill_dict

config.IN_TEST = True


class TestDeepFillDict(unittest.TestCase):
    def test_deep_fill_basic(self):
        """Missing keys are added."""
        target = {"a": 1}
        source = {"b": 2}
        expected = {"a": 1, "b": 2}
        self.assertEqual(deep_fill_dict(target, source), expected)
        self.assertEqual(target, expected)

    def test_deep_fill_not_inplace(self):
        """A copy is completed when inplace is false."""
        target = {}
        source = {"solver": {"max_iterations": [100]}}
        result = deep_fill_dict(target, source, inplace=False, overwrite_existing=True)
        self.assertEqual(result, {"solver": {"max_iterations": [100]}})
        self.assertEqual(target, {})
        result["solver"]["max_iterations"].append(1)
        self.assertEqual(source["solver"]["max_iterations"], [100])

    def test_deep_fill_overwrite(self):
        """Existing keys are only replaced with overwrite_existing."""
        target = {"a": 1}
        source = {"a": 2}
        deep_fill_dict(target, source, True)
        self.assertEqual(target, {"a": 2})
        target = {"a": 1}
        deep_fill_dict(target, source, False)
        self.assertEqual(target, {"a": 1})
        self.assertEqual(source, {"a": 2})

    def test_deep_fill_nested(self):
        """Nested sections are merged key by key."""
        target = {"numerics": {"breakdown_tol": 1e-8}}
        source = {"numerics": {"breakdown_tol": 1e-12, "rank_tol_factor": 1.0}, "output": {}}
        expected = {"numerics": {"breakdown_tol": 1e-8, "rank_tol_factor": 1.0}, "output": {}}
        self.assertEqual(deep_fill_dict(target, source), expected)

    def test_non_dict_target_value(self):
        """A scalar in the target blocks merging unless overwritten."""
        target = {"numerics": 3}
        source = {"numerics": {"breakdown_tol": 1e-12}}
        self.assertEqual(deep_fill_dict(target, source, inplace=False), {"numerics": 3})
        self.assertEqual(
            deep_fill_dict(target, source, overwrite_existing=True),
            {"numerics": {"breakdown_tol": 1e-12}},
        )


if __name__ == "__main__":
    unittest.main()
