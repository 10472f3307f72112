import csv
import io
import json
import logging
import os
import tempfile
import unittest

import numpy as np

from blockry import config
from blockry._logging import set_log_level
from blockry.cli import (
    EXIT_BUDGET,
    EXIT_CONVERGED,
    EXIT_ERROR,
    RunConfig,
    _reproduce_one,
    build_parser,
    csv_header,
    execute,
    inspect,
    main,
    replay,
    run,
)
from blockry.cli.records import format_float
from blockry.exceptions import ContractError
from blockry.problems import write_matrix_market

config.IN_TEST = True


class TestRunConfig(unittest.TestCase):
    def test_defaults(self):
        cfg = RunConfig(problem="partial-stag")
        self.assertEqual(cfg.max_iterations, config.solver_default("max_iterations"))
        self.assertEqual(cfg.tolerance, config.solver_default("tolerance"))
        self.assertFalse(cfg.with_diagnostics)
        self.assertTrue(RunConfig(problem="partial-stag", verify=True).with_diagnostics)
        self.assertEqual(os.path.basename(cfg.resolved_output_dir), "partial-stag")

    def test_validation(self):
        with self.assertRaises(ContractError):
            RunConfig(problem="partial-stag", max_iterations=0)
        with self.assertRaises(ContractError):
            RunConfig(problem="partial-stag", tolerance=-1.0)
        with self.assertRaises(ContractError):
            RunConfig(problem="partial-stag", block_size=0)


class TestCsvFormat(unittest.TestCase):
    def test_header(self):
        self.assertEqual(
            csv_header(2),
            [
                "j",
                "gmres_res_1",
                "gmres_res_2",
                "fom_res_1",
                "fom_res_2",
                "fom_generalized",
                "rank_r",
                "case",
                "stagnated",
                "sin_1",
                "sin_2",
                "cos_1",
                "cos_2",
                "angle_1",
                "angle_2",
                "init_sin_1",
                "init_sin_2",
                "breakdown_p",
                "trig_residual",
                "gap_residual",
                "nilpotent_residual",
                "angle_deviation",
            ],
        )

    def test_float_format(self):
        self.assertEqual(format_float(1.0), "1.0000000000000000e+00")
        self.assertEqual(format_float(None), "")
        self.assertEqual(float(format_float(0.1)), 0.1)


class TestRun(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.out = self.tmp.name

    def tearDown(self):
        self.tmp.cleanup()
        set_log_level(logging.INFO)

    def read_rows(self):
        with open(os.path.join(self.out, "iterations.csv"), newline="") as f:
            return list(csv.reader(f))

    def test_partial_stagnation_run(self):
        cfg = RunConfig(
            problem="partial-stag",
            output_dir=self.out,
            emit_fom=True,
            verify=True,
            progress=False,
        )
        self.assertEqual(run(cfg), EXIT_CONVERGED)
        for name in ("iterations.csv", "summary.txt", "summary.json", "plot.gp"):
            self.assertTrue(os.path.isfile(os.path.join(self.out, name)), name)

        rows = self.read_rows()
        self.assertEqual(rows[0], csv_header(2))
        self.assertEqual(len(rows), 16)
        for row in rows[1:]:
            self.assertEqual(len(row), len(rows[0]))
        at6 = dict(zip(rows[0], rows[6]))
        self.assertEqual(at6["j"], "6")
        self.assertEqual(at6["rank_r"], "1")
        self.assertEqual(at6["case"], "PartialContribution")
        self.assertEqual(at6["stagnated"], "2")
        self.assertEqual(at6["breakdown_p"], "1")
        self.assertLess(float(at6["gmres_res_1"]), 1e-10)
        at3 = dict(zip(rows[0], rows[3]))
        self.assertEqual(at3["case"], "TotalStagnation")
        self.assertEqual(at3["stagnated"], "1;2")
        self.assertEqual(at3["fom_generalized"], "1")

        with open(os.path.join(self.out, "summary.json")) as f:
            summary = json.load(f)
        self.assertTrue(summary["converged"])
        self.assertEqual(summary["column_convergence"], [6, 15])
        self.assertEqual(summary["breakdowns"][0]["iteration"], 6)
        self.assertLess(summary["max_verification_residual"], 1e-6)

        with open(os.path.join(self.out, "summary.txt")) as f:
            text = f.read()
        self.assertIn("column 1: converged at iteration 6", text)
        self.assertIn("breakdown at iteration 6: p=1, columns 2", text)

    def test_budget_exit_code(self):
        cfg = RunConfig(
            problem="total-stag", output_dir=self.out, max_iterations=10, plot=False, progress=False
        )
        self.assertEqual(run(cfg), EXIT_BUDGET)
        self.assertFalse(os.path.exists(os.path.join(self.out, "plot.gp")))
        rows = self.read_rows()
        self.assertEqual(len(rows), 11)
        first = dict(zip(rows[0], rows[1]))
        self.assertAlmostEqual(float(first["gmres_res_1"]), 1.0, places=12)
        self.assertEqual(first["fom_res_1"], "")
        self.assertEqual(first["rank_r"], "")

    def test_exhausted_space_converges(self):
        rng = np.random.default_rng(31)
        path = os.path.join(self.out, "odd.mtx")
        with open(path, "w") as f:
            write_matrix_market(rng.standard_normal((7, 7)) + 3 * np.eye(7), f)
        cfg = RunConfig(
            problem=path, block_size=2, output_dir=self.out, verify=True, plot=False, progress=False
        )
        result = execute(cfg)
        self.assertTrue(result.converged)
        self.assertTrue(result.exhausted)
        self.assertEqual([record.j for record in result.records], [1, 2, 3, 4])
        self.assertEqual(run(cfg), EXIT_CONVERGED)

    def test_execute_collects_records(self):
        result = execute(RunConfig(problem="partial-stag", diagnostics=True, progress=False))
        self.assertTrue(result.converged)
        self.assertEqual(result.exit_code, EXIT_CONVERGED)
        self.assertEqual(len(result.records), 15)
        self.assertTrue(result.exhausted)
        self.assertIsNone(result.records[0].fom_res)
        self.assertIsNotNone(result.records[0].sines)
        self.assertIsNone(result.max_verification_residual)

    def test_main_run(self):
        code = main(["-q", "run", "partial-stag", "--out", self.out, "--diagnostics"])
        self.assertEqual(code, EXIT_CONVERGED)
        self.assertTrue(os.path.isfile(os.path.join(self.out, "iterations.csv")))

    def test_main_missing_file(self):
        code = main(["-q", "run", os.path.join(self.out, "missing.mtx"), "--out", self.out])
        self.assertEqual(code, EXIT_ERROR)

    def test_invalid_arguments(self):
        with self.assertRaises(SystemExit) as ctx:
            main(["run"])
        self.assertEqual(ctx.exception.code, EXIT_ERROR)
        with self.assertRaises(SystemExit) as ctx:
            main(["run", "partial-stag", "--max-iter", "many"])
        self.assertEqual(ctx.exception.code, EXIT_ERROR)
        self.assertEqual(main(["-q", "run", "partial-stag", "--max-iter", "0"]), EXIT_ERROR)

    def test_missing_sherman_is_skipped(self):
        cfg = RunConfig(
            problem="sherman4-mixed",
            matrix=os.path.join(self.out, "sherman4.mtx"),
            output_dir=self.out,
            progress=False,
        )
        problem, code, message = _reproduce_one(cfg)
        self.assertEqual(problem, "sherman4-mixed")
        self.assertEqual(code, EXIT_CONVERGED)
        self.assertTrue(message.startswith("skipped"))


class TestInspect(unittest.TestCase):
    def setUp(self):
        self.cfg = RunConfig(problem="partial-stag", progress=False)

    def tearDown(self):
        set_log_level(logging.INFO)

    def test_text_output(self):
        stream = io.StringIO()
        self.assertEqual(inspect(self.cfg, 6, stream=stream), 0)
        text = stream.getvalue()
        self.assertIn("iteration 6: rank r = 1, case PartialContribution", text)
        self.assertIn("stagnated columns: 2", text)
        for name in ("c_tilde_6", "c_6", "c_hat_6", "n_6", "n_hat_6"):
            self.assertIn(f"{name} =", text)
            self.assertIn(f"{name} (canonical signs) =", text)

    def test_json_output(self):
        stream = io.StringIO()
        inspect(self.cfg, 6, as_json=True, stream=stream)
        data = json.loads(stream.getvalue())
        self.assertEqual(data["rank_r"], 1)
        self.assertEqual(data["case"], "PartialContribution")
        self.assertEqual(data["stagnated_columns"], [1])
        np.testing.assert_allclose(data["canonical"]["c"], [[0.0, 0.0], [1.0, 0.0]], atol=1e-12)
        np.testing.assert_allclose(data["canonical"]["n_hat"], [[0.0, 1.0], [0.0, 0.0]], atol=1e-12)

    def test_beyond_run_length(self):
        with self.assertRaises(ContractError):
            replay(self.cfg, 20)
        self.assertEqual(main(["-q", "inspect", "partial-stag", "--at", "20"]), EXIT_ERROR)

    def test_parser(self):
        args = build_parser().parse_args(["inspect", "total-stag", "--at", "40", "--json"])
        self.assertEqual(args.command, "inspect")
        self.assertEqual(args.at, 40)
        self.assertTrue(args.json)
