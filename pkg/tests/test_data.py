import unittest

from blockry import DataEnum, ExperimentName, StagnationCase, config

config.IN_TEST = True


class TestDataEnum(unittest.TestCase):
    def test_enum(self):
        class TestEnum(DataEnum):
            A = 1
            B = 2
            C = 3

        self.assertEqual(TestEnum.A.value, 1)
        self.assertEqual(TestEnum.interfere("A"), TestEnum.A)
        self.assertEqual(TestEnum.interfere(1), TestEnum.A)
        self.assertEqual(TestEnum.interfere(TestEnum.A), TestEnum.A)
        self.assertEqual(TestEnum.v("A"), 1)
        self.assertEqual(TestEnum.v(1), 1)
        self.assertEqual(TestEnum.v(TestEnum.A), 1)

        with self.assertRaises(ValueError):
            TestEnum.interfere("X")
        with self.assertRaises(ValueError):
            TestEnum.interfere(4)

    def test_experiment_names(self):
        self.assertIs(ExperimentName.interfere("total-stag"), ExperimentName.TOTAL_STAG)
        self.assertIs(ExperimentName.interfere("SHERMAN4_MIXED"), ExperimentName.SHERMAN4_MIXED)
        self.assertIs(
            ExperimentName.interfere("ExperimentName.PARTIAL_STAG"), ExperimentName.PARTIAL_STAG
        )
        self.assertEqual([e.value for e in ExperimentName], ["total-stag", "partial-stag", "sherman4-mixed"])

    def test_stagnation_case(self):
        self.assertEqual(StagnationCase.v("TOTAL_STAGNATION"), "TotalStagnation")
        self.assertIs(StagnationCase.interfere("FomExists"), StagnationCase.FOM_EXISTS)
