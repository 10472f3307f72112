import os
import unittest
from unittest import mock

import numpy as np

from blockry import config
from blockry.arnoldi import (
    DenseOperator,
    initialize,
    orthonormality_defect,
    relation_residual,
    step,
)
from blockry.data import StagnationCase
from blockry.diagnostics import (
    analyze,
    angles_vs_constraint_space,
    classify,
    constraint_angle_deviation,
    hessenberg_rank_structure,
    initial_residual_sines,
    intersection_dim,
    stagnated_columns,
    verify_breakdown_gap,
    verify_nilpotent_split,
    verify_orthogonal_transform_properties,
    verify_trig_relation,
)
from blockry.exceptions import ContractError, SingularRelationError
from blockry.kernels import numerical_rank, sign_equivalent
from blockry.problems import (
    partial_stagnation_problem,
    sherman4_mixed_problem,
    total_stagnation_problem,
)
from blockry.solvers import (
    advance_factorization,
    gmres_solution_at,
    iterate_pair,
    solve,
    start_factorization,
)

config.IN_TEST = True

DATA = os.path.join(os.path.dirname(__file__), "data")


def factor(operator, b, steps):
    state = initialize(operator, b)
    fact = start_factorization(state)
    history = [(state, fact)]
    for _ in range(steps):
        state, _ = step(state)
        fact = advance_factorization(fact, state.column_block(state.iteration))
        history.append((state, fact))
    return history


def random_problem(n=16, size=2, seed=31, symmetric=False, shift=3.0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    if symmetric:
        a = a + a.T
    return DenseOperator(a + shift * np.eye(n)), rng.standard_normal((n, size))


def explicit_residual(state, fact, j):
    x = gmres_solution_at(state, fact, j)
    return state.rhs - state.operator.apply(x)


class TestTotalStagnation(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        problem = total_stagnation_problem()
        cls.history = factor(problem.operator, problem.b, 49)

    def test_plateau_classification(self):
        state, fact = self.history[40]
        report = classify(state, fact, 40)
        self.assertEqual(report.rank_r, 0)
        self.assertEqual(report.case, StagnationCase.TOTAL_STAGNATION)
        self.assertEqual(report.stagnated_columns, (0, 1, 2, 3))
        self.assertEqual(report.intersection_dim, 0)
        self.assertEqual(report.breakdown_p, 0)
        np.testing.assert_allclose(report.cs.sines, np.ones(4), atol=1e-12)
        np.testing.assert_allclose(
            report.principal_angles_vs_constraint, np.full(4, np.pi / 2), atol=1e-12
        )

    def test_plateau_blocks(self):
        _, fact = self.history[40]
        blk = fact.at(40)
        np.testing.assert_allclose(blk.c, np.zeros((4, 4)), atol=1e-12)
        np.testing.assert_allclose(np.abs(blk.n), np.eye(4), atol=1e-12)
        np.testing.assert_allclose(blk.n_hat, np.zeros((4, 4)), atol=1e-12)
        np.testing.assert_allclose(np.abs(blk.c_hat), np.eye(4), atol=1e-12)
        np.testing.assert_allclose(blk.c_hat, blk.c_tilde, atol=1e-12)

    def test_initial_sines_on_plateau(self):
        _, fact = self.history[40]
        np.testing.assert_allclose(initial_residual_sines(fact, 40), np.ones(4), atol=1e-12)

    def test_partial_contribution_at_convergence_of_one_column(self):
        state, fact = self.history[49]
        report = classify(state, fact, 49)
        self.assertEqual(report.rank_r, 1)
        self.assertEqual(report.case, StagnationCase.PARTIAL_CONTRIBUTION)
        self.assertEqual(report.intersection_dim, 1)
        self.assertEqual(report.stagnated_columns, (0, 2, 3))
        self.assertEqual(report.breakdown_p, 1)

    def test_transform_properties(self):
        _, fact = self.history[40]
        props = verify_orthogonal_transform_properties(fact, 40)
        self.assertEqual(props.rank_r, 0)
        self.assertTrue(props.q11_rank_matches)
        self.assertLess(props.q12_residual, 1e-12)

    def test_relation_needs_full_rank(self):
        state, fact = self.history[40]
        pair = iterate_pair(state, fact)
        with self.assertRaises(SingularRelationError):
            verify_trig_relation(pair, gmres_solution_at(state, fact, 39), fact)
        with self.assertRaises(SingularRelationError):
            verify_breakdown_gap(state, pair, fact)


class TestPartialStagnation(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        problem = partial_stagnation_problem()
        cls.history = factor(problem.operator, problem.b, 11)

    def test_total_stagnation_before_breakdown(self):
        for j in range(1, 6):
            state, fact = self.history[j]
            blk = fact.at(j)
            np.testing.assert_allclose(blk.c, np.zeros((2, 2)), atol=1e-12)
            np.testing.assert_allclose(blk.n_hat, np.zeros((2, 2)), atol=1e-12)
            self.assertEqual(classify(state, fact, j).case, StagnationCase.TOTAL_STAGNATION)

    def test_breakdown_iteration(self):
        state, fact = self.history[6]
        blk = fact.at(6)
        self.assertTrue(sign_equivalent(blk.c, [[0.0, 0.0], [1.0, 0.0]]))
        self.assertTrue(sign_equivalent(blk.n_hat, [[0.0, 1.0], [0.0, 0.0]]))

        report = classify(state, fact, 6)
        self.assertEqual(report.rank_r, 1)
        self.assertEqual(report.case, StagnationCase.PARTIAL_CONTRIBUTION)
        self.assertEqual(report.stagnated_columns, (1,))
        self.assertEqual(report.breakdown_p, 1)
        self.assertEqual(intersection_dim(state, fact, 6), 1)

    def test_rank_structure(self):
        _, fact = self.history[6]
        structure = hessenberg_rank_structure(fact, 6)
        self.assertEqual(structure.rank_r, 1)
        self.assertEqual(structure.y1.shape, (10, 2))
        blk = fact.at(6)
        np.testing.assert_allclose(structure.m_hat @ structure.y2, blk.h_hat, atol=1e-12)
        np.testing.assert_allclose(fact.r(5) @ structure.y1, blk.z, atol=1e-12)

    def test_after_breakdown_with_default_seed(self):
        # depends on the replacement vector drawn at iteration 6
        state, fact = self.history[11]
        blk = fact.at(11)
        reference = float(np.linalg.norm(fact.s0, 2))
        self.assertTrue(sign_equivalent(blk.c, [[0.0, 0.078], [0.0, 0.239]], tol=5e-3))
        np.testing.assert_allclose(
            np.sort(np.abs(np.diag(blk.n_hat))), [0.257, 0.405], atol=5e-3
        )
        self.assertEqual(blk.rank_r, 2)
        self.assertFalse(iterate_pair(state, fact).fom_is_generalized)

        # the converged first column leaves C~_11 singular, so C_11 = Q11 C~_11
        # keeps rank 1 although N^_11 is nonsingular
        residual = explicit_residual(state, fact, 10)
        self.assertEqual(numerical_rank(residual, 1e3, reference), 1)
        self.assertEqual(numerical_rank(blk.c_tilde, 1e3, reference), 1)
        self.assertEqual(numerical_rank(blk.c, 1e3, reference), 1)
        self.assertEqual(stagnated_columns(fact, 11), (0,))


class TestRankIdentities(unittest.TestCase):
    def assert_ranks(self, history, iterations):
        for j in iterations:
            state, fact = history[j]
            blk = fact.at(j)
            reference = float(np.linalg.norm(fact.s0, 2))
            residual = explicit_residual(state, fact, j - 1)
            c_tilde_rank = numerical_rank(blk.c_tilde, 1e3, reference)
            self.assertEqual(c_tilde_rank, numerical_rank(residual, 1e3, reference))
            self.assertEqual(c_tilde_rank, fact.block_size)
            self.assertEqual(numerical_rank(blk.c, 1e3, reference), blk.rank_r)

    def test_random(self):
        operator, b = random_problem(seed=39)
        self.assert_ranks(factor(operator, b, 5), range(1, 6))

    def test_total_stagnation(self):
        problem = total_stagnation_problem()
        self.assert_ranks(factor(problem.operator, problem.b, 12), range(1, 13))

    def test_partial_stagnation(self):
        problem = partial_stagnation_problem()
        history = factor(problem.operator, problem.b, 6)
        self.assert_ranks(history, range(1, 7))
        self.assertEqual(history[6][1].at(6).rank_r, 1)


def sweep_problems():
    rng = np.random.default_rng(2024)
    for seed in range(20):
        n = int(rng.integers(15, 41))
        size = int(rng.integers(1, 4))
        operator, b = random_problem(n, size, 100 + seed, shift=2 * np.sqrt(n) + 1)
        yield f"random-{seed}", operator, b, min(5, n // size - 1)
    problem = total_stagnation_problem()
    yield "total-stag", problem.operator, problem.b, 45
    problem = partial_stagnation_problem()
    yield "partial-stag", problem.operator, problem.b, 6


class TestSeededSweep(unittest.TestCase):
    def test_identities_hold(self):
        for label, operator, b, steps in sweep_problems():
            with self.subTest(problem=label):
                history = factor(operator, b, steps)
                for j in range(1, steps + 1):
                    state, fact = history[j]
                    report = classify(state, fact, j)
                    if not state.breakdown_before(j):
                        self.assertEqual(report.intersection_dim, report.rank_r, f"j={j}")
                        if report.rank_r == fact.block_size:
                            pair = iterate_pair(state, fact)
                            x_prev = gmres_solution_at(state, fact, j - 1)
                            self.assertLessEqual(verify_trig_relation(pair, x_prev, fact), 1e-8)
                    deviation = constraint_angle_deviation(state, fact, j)
                    if deviation is not None:
                        self.assertLessEqual(deviation, 1e-8, f"j={j}")
                state, _ = history[steps]
                self.assertLessEqual(relation_residual(state), 1e-10)
                self.assertLessEqual(orthonormality_defect(state), 1e-10)


class TestRelations(unittest.TestCase):
    def test_trig_relation(self):
        operator, b = random_problem()
        history = factor(operator, b, 5)
        for j in range(1, 6):
            state, fact = history[j]
            pair = iterate_pair(state, fact)
            x_prev = gmres_solution_at(state, fact, j - 1)
            self.assertLess(verify_trig_relation(pair, x_prev, fact), 1e-8)

    def test_scalar_trig_relation(self):
        operator, b = random_problem(n=10, size=1, seed=32, symmetric=True)
        history = factor(operator, b, 4)
        for j in range(1, 5):
            state, fact = history[j]
            pair = iterate_pair(state, fact)
            blk = fact.at(j)
            c = blk.q11[0, 0]
            x_prev = gmres_solution_at(state, fact, j - 1)
            np.testing.assert_allclose(
                pair.x_gmres, c**2 * pair.x_fom + (1 - c**2) * x_prev, atol=1e-8
            )
            self.assertLess(verify_trig_relation(pair, x_prev, fact), 1e-8)

    def test_gap_after_breakdown(self):
        rng = np.random.default_rng(33)
        operator = DenseOperator(rng.standard_normal((12, 12)) + 3 * np.eye(12))
        u = rng.standard_normal(12)
        b = np.column_stack([u, operator.apply(u)])
        history = factor(operator, b, 4)
        state, _ = history[4]
        self.assertEqual(state.breakdown_log[0].iteration, 1)
        self.assertEqual(state.breakdown_log[0].p, 1)
        for j in range(2, 5):
            state, fact = history[j]
            pair = iterate_pair(state, fact)
            self.assertTrue(state.breakdown_before(j))
            self.assertLess(verify_breakdown_gap(state, pair, fact), 1e-8)

            diag = analyze(state, fact, pair)
            self.assertIsNone(diag.trig_residual)
            self.assertLess(diag.gap_residual, 1e-8)

    def test_gap_without_breakdown(self):
        operator, b = random_problem(seed=34)
        history = factor(operator, b, 3)
        state, fact = history[3]
        self.assertLess(verify_breakdown_gap(state, iterate_pair(state, fact), fact), 1e-8)

    def test_nilpotent_split(self):
        operator, b = random_problem(seed=35)
        history = factor(operator, b, 5)
        for j in range(2, 6):
            state, fact = history[j]
            self.assertLess(verify_nilpotent_split(state, fact, j), 1e-8)
        state, fact = history[5]
        with self.assertRaises(ContractError):
            verify_nilpotent_split(state, fact, 1)

    def test_pair_without_fom(self):
        operator, b = random_problem(seed=36)
        state, fact = factor(operator, b, 2)[-1]
        pair = iterate_pair(state, fact, with_fom=False)
        with self.assertRaises(ContractError):
            verify_trig_relation(pair, gmres_solution_at(state, fact, 1), fact)


class TestAngles(unittest.TestCase):
    def setUp(self):
        self.operator, self.b = random_problem(seed=37)
        self.history = factor(self.operator, self.b, 5)

    def test_cs_cosines_match_principal_angles(self):
        for j in range(1, 6):
            state, fact = self.history[j]
            deviation = constraint_angle_deviation(state, fact, j)
            self.assertLessEqual(deviation, 1e-8)
            angles = angles_vs_constraint_space(state, fact, j)
            self.assertEqual(angles.shape, (2,))
            self.assertTrue(np.all(np.diff(angles) >= 0))

    def test_initial_sines_decrease(self):
        previous = None
        for j in range(1, 6):
            _, fact = self.history[j]
            sines = initial_residual_sines(fact, j)
            self.assertTrue(np.all(np.diff(sines) <= 1e-15))
            if previous is not None:
                self.assertTrue(np.all(sines <= previous + 1e-12))
            previous = sines

    def test_initial_sines_match_residual_reduction(self):
        operator, b = random_problem(n=10, size=1, seed=38)
        history = factor(operator, b, 4)
        for j in range(1, 5):
            state, fact = history[j]
            pair = iterate_pair(state, fact, with_fom=False)
            sines = initial_residual_sines(fact, j)
            self.assertAlmostEqual(sines[0], pair.gmres_relative[0], places=10)

    def test_fom_exists(self):
        state, fact = self.history[3]
        report = classify(state, fact, 3)
        self.assertEqual(report.case, StagnationCase.FOM_EXISTS)
        self.assertEqual(report.rank_r, 2)
        self.assertEqual(report.intersection_dim, 2)
        self.assertEqual(report.stagnated_columns, ())
        self.assertEqual(stagnated_columns(fact, 3), ())

    def test_transform_properties(self):
        for j in range(1, 6):
            _, fact = self.history[j]
            props = verify_orthogonal_transform_properties(fact, j)
            self.assertLess(props.q12_residual, 1e-10)
            self.assertEqual(props.q12_rank, 2)
            self.assertTrue(props.q11_rank_matches)

    def test_analyze(self):
        state, fact = self.history[4]
        pair = iterate_pair(state, fact)
        diag = analyze(state, fact, pair)
        self.assertEqual(diag.report.iteration, 4)
        self.assertLess(diag.trig_residual, 1e-8)
        self.assertIsNone(diag.gap_residual)
        self.assertLess(diag.nilpotent_residual, 1e-8)
        self.assertLessEqual(diag.angle_deviation, 1e-8)
        self.assertEqual(diag.notes, ())

        quick = analyze(state, fact, pair, verify=False)
        self.assertIsNone(quick.trig_residual)
        self.assertIsNone(quick.nilpotent_residual)

    def test_iteration_bounds(self):
        state, fact = self.history[2]
        with self.assertRaises(ContractError):
            classify(state, fact, 3)
        with self.assertRaises(ContractError):
            initial_residual_sines(fact, 0)


class TestShermanStandIn(unittest.TestCase):
    def test_stagnation_after_the_dense_block_is_solved(self):
        problem = sherman4_mixed_problem(
            os.path.join(DATA, "sherman4_standin.mtx"),
            os.path.join(DATA, "sherman4_standin_rhs1.mtx"),
        )
        self.assertEqual(problem.n, 212)
        self.assertEqual(problem.block_size, 2)
        sines, generalized = [], []
        # near-singular diagonal blocks count as singular 1e4 times above rounding level
        with mock.patch.dict(config.CONFIG["numerics"], {"rank_tol_factor": 1e4}):
            for snap in solve(problem.operator, problem.b, max_iterations=80):
                report = classify(snap.state, snap.fact, snap.j)
                sines.append(report.cs.sines)
                generalized.append(snap.pair.fom_is_generalized)
        self.assertEqual(len(sines), 80)
        self.assertLess(sines[0].min() ** 2, 0.5)
        self.assertGreater(max(s.max() for s in sines[1:]) ** 2, 0.99)
        # both squared sines approach 1 once only the shift block is left
        self.assertGreater(min(s.min() for s in sines[-10:]) ** 2, 0.99)
        self.assertFalse(generalized[0])
        self.assertTrue(any(generalized[10:]))
