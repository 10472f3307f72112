import unittest

from blockry import config
from blockry.utils.functions import run_in_processes

config.IN_TEST = True


class TestRunInProcesses(unittest.TestCase):
    def test_results_keep_input_order(self):
        self.assertEqual(run_in_processes(abs, [-3, 2, -1], max_workers=2), [3, 2, 1])

    def test_local_function(self):
        offset = 10

        def shifted(x):
            return x + offset

        self.assertEqual(run_in_processes(shifted, [1, 2]), [11, 12])

    def test_empty(self):
        self.assertEqual(run_in_processes(abs, []), [])
