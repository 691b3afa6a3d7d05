# test/test_e2e.py
#
# End to End tests, complete command line runs into temporary directories. These are slow.
#
import test
import contextlib
import io
import os
import tempfile
import unittest
from logging import DEBUG

import numpy as np
import pandas as pd

from r2connectedness.cli import EXIT_FAILURE, EXIT_OK, run
from r2connectedness.dynamics import EngineSpec, rolling_connectedness
from r2connectedness.entry_points import setup_logging
from r2connectedness.netgraph import parse_graph_json
from r2connectedness.panel import compute_log_returns, load_price_panel
from r2connectedness.stats import correlation_matrix, significance_mask
from r2connectedness.tasks import RUN_COMPLETED, RUN_FAILED, read_manifest


def run_quietly(argv):
    """ Run the command line and return the exit status with whatever went to stderr. """
    stderr = io.StringIO()
    with contextlib.redirect_stderr(stderr), contextlib.redirect_stdout(io.StringIO()):
        status = run(argv)
    return status, stderr.getvalue()


class TestCommandLine(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        setup_logging(DEBUG)
        cls.tmp = tempfile.TemporaryDirectory()
        cls.sim_dir = os.path.join(cls.tmp.name, "sim")
        status, errors = run_quietly(["simulate", "--output-dir", cls.sim_dir, "--seed", "3", "--n-series", "4",
                                      "--n-obs", "400", "--coupling", "1:2:0.4",
                                      "--series", "BRs", "USs", "ZAm", "CNc"])
        assert status == EXIT_OK, errors
        cls.prices = os.path.join(cls.sim_dir, "simulated.csv")

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def output_dir(self, name):
        return os.path.join(self.tmp.name, name)

    def test_simulate(self):
        manifest = read_manifest(self.sim_dir)
        self.assertEqual(manifest.status, RUN_COMPLETED)
        self.assertEqual(manifest.outputs, ["simulated.csv"])
        self.assertEqual(manifest.config["seed"], 3)
        panel = load_price_panel(self.prices)
        self.assertEqual(panel.T, 401)
        self.assertEqual(panel.labels, ("BRs", "USs", "ZAm", "CNc"))

    def test_simulate_same_seed_same_file(self):
        out = self.output_dir("sim_again")
        status, errors = run_quietly(["simulate", "--output-dir", out, "--seed", "3", "--n-series", "4",
                                      "--n-obs", "400", "--coupling", "1:2:0.4",
                                      "--series", "BRs", "USs", "ZAm", "CNc"])
        self.assertEqual(status, EXIT_OK, errors)
        with open(self.prices, "rb") as first, open(os.path.join(out, "simulated.csv"), "rb") as second:
            self.assertEqual(first.read(), second.read())

    def test_simulate_unstable(self):
        out = self.output_dir("unstable")
        status, errors = run_quietly(["simulate", "--output-dir", out, "--persistence", "1.0"])
        self.assertEqual(status, EXIT_FAILURE)
        self.assertIn("not stable", errors)
        self.assertEqual(read_manifest(out).status, RUN_FAILED)

    def test_stats(self):
        out = self.output_dir("stats")
        status, errors = run_quietly(["stats", "--input", self.prices, "--output-dir", out])
        self.assertEqual(status, EXIT_OK, errors)
        frame = pd.read_csv(os.path.join(out, "stats.csv"))
        self.assertEqual(list(frame["series"]), ["BRs", "USs", "ZAm", "CNc"])
        self.assertEqual(read_manifest(out).status, RUN_COMPLETED)

    def test_corr_blanks_insignificant_cells(self):
        out = self.output_dir("corr")
        status, errors = run_quietly(["corr", "--input", self.prices, "--output-dir", out, "--mask-level", "0.05"])
        self.assertEqual(status, EXIT_OK, errors)
        frame = pd.read_csv(os.path.join(out, "corr_pearson.csv"), index_col=0)
        expected = significance_mask(correlation_matrix(compute_log_returns(load_price_panel(self.prices))), 0.05)
        np.testing.assert_array_equal(frame.isna().to_numpy(), np.ma.getmaskarray(expected))
        np.testing.assert_array_equal(np.diag(frame.to_numpy()), np.ones(4))

    def test_connect(self):
        out = self.output_dir("connect")
        status, errors = run_quietly(["connect", "--input", self.prices, "--output-dir", out,
                                      "--window", "150", "--step", "25"])
        self.assertEqual(status, EXIT_OK, errors)
        frame = pd.read_csv(os.path.join(out, "table_r2.csv"), keep_default_na=False)
        self.assertEqual(list(frame.columns)[1:], ["BRs", "USs", "ZAm", "CNc", "FROM"])
        self.assertIn("NET", list(frame.iloc[:, 0]))
        manifest = read_manifest(out)
        self.assertEqual(manifest.config["window"], 150)
        self.assertTrue(any("pearson" in note for note in manifest.notes))

    def test_rolling_is_thread_independent(self):
        outputs = []
        for threads in ("1", "8"):
            out = self.output_dir(f"rolling{threads}")
            status, errors = run_quietly(["rolling", "--input", self.prices, "--output-dir", out,
                                          "--window", "120", "--step", "20", "--threads", threads])
            self.assertEqual(status, EXIT_OK, errors)
            with open(os.path.join(out, "rolling_r2.csv"), "rb") as f:
                outputs.append(f.read())
        self.assertEqual(outputs[0], outputs[1])
        manifest = read_manifest(self.output_dir("rolling8"))
        self.assertEqual(manifest.outputs, ["rolling_r2.csv", "rolling_r2_average.csv"])
        self.assertEqual([marker["date"] for marker in manifest.annotations], ["2022-02-24", "2023-03-18"])

    def test_rolling_quantile_var_records_convergence(self):
        out = self.output_dir("rolling_qvar")
        status, errors = run_quietly(["rolling", "--input", self.prices, "--output-dir", out, "--engine", "qvar",
                                      "--tau", "0.5", "--window", "120", "--step", "40"])
        self.assertEqual(status, EXIT_OK, errors)
        expected = rolling_connectedness(compute_log_returns(load_price_panel(self.prices)), 120,
                                         EngineSpec(method="qvar", tau=0.5), step=40).metadata["non_converged"]
        manifest = read_manifest(out)
        self.assertEqual(manifest.non_converged, expected)
        self.assertEqual(manifest.non_converged_windows, len(expected))

    def test_invalid_window(self):
        status, errors = run_quietly(["connect", "--input", self.prices, "--output-dir", self.output_dir("bad"),
                                      "--window", "0"])
        self.assertEqual(status, EXIT_FAILURE)
        self.assertTrue(errors.startswith("error:"))
        self.assertIn("window", errors)

    def test_missing_input(self):
        out = self.output_dir("missing")
        status, errors = run_quietly(["connect", "--output-dir", out])
        self.assertEqual(status, EXIT_FAILURE)
        self.assertIn("error: an input price file is required", errors)
        manifest = read_manifest(out)
        self.assertEqual(manifest.status, RUN_FAILED)
        self.assertIn("input", manifest.error)

    def test_unknown_flag(self):
        status, _ = run_quietly(["connect", "--no-such-flag"])
        self.assertEqual(status, EXIT_FAILURE)

    def test_network_json(self):
        out = self.output_dir("network")
        status, errors = run_quietly(["network", "--input", self.prices, "--output-dir", out, "--window", "150",
                                      "--step", "25", "--split", "overall", "--threshold", "0.5"])
        self.assertEqual(status, EXIT_OK, errors)
        with open(os.path.join(out, "network_overall.json"), encoding="utf-8") as f:
            network = parse_graph_json(f.read())
        self.assertEqual(network.threshold, 0.5)
        self.assertIn(("BRs", "USs"), {(edge.source, edge.target) for edge in network.edges})

    def test_split_with_custom_breakpoint(self):
        out = self.output_dir("split")
        status, errors = run_quietly(["split", "--input", self.prices, "--output-dir", out,
                                      "--breakpoints", "2021-06-01"])
        self.assertEqual(status, EXIT_OK, errors)
        first = pd.read_csv(os.path.join(out, "segment_segment1.csv"))
        second = pd.read_csv(os.path.join(out, "segment_segment2.csv"))
        self.assertEqual(len(first) + len(second), 400)
        self.assertLess(first["date"].iloc[-1], "2021-06-01")
        self.assertGreaterEqual(second["date"].iloc[0], "2021-06-01")

    def test_config_file_precedence(self):
        config = os.path.join(self.tmp.name, "run.toml")
        with open(config, "w", encoding="utf-8") as f:
            f.write('window = 120\nstep = 40\nsystem = "pair"\n\n[systems]\npair = ["USs", "BRs"]\n')
        out = self.output_dir("configured")
        status, errors = run_quietly(["connect", "--config", config, "--input", self.prices, "--output-dir", out])
        self.assertEqual(status, EXIT_OK, errors)
        manifest = read_manifest(out)
        self.assertEqual(manifest.config["window"], 120)
        frame = pd.read_csv(os.path.join(out, "table_r2.csv"), keep_default_na=False)
        self.assertEqual(list(frame.columns)[1:3], ["USs", "BRs"])

        out = self.output_dir("overridden")
        status, errors = run_quietly(["connect", "--config", config, "--input", self.prices, "--output-dir", out,
                                      "--window", "100"])
        self.assertEqual(status, EXIT_OK, errors)
        self.assertEqual(read_manifest(out).config["window"], 100)
        self.assertEqual(read_manifest(out).config["step"], 40)

    def test_unknown_config_key(self):
        config = os.path.join(self.tmp.name, "typo.toml")
        with open(config, "w", encoding="utf-8") as f:
            f.write("windw = 120\n")
        status, errors = run_quietly(["connect", "--config", config, "--input", self.prices,
                                      "--output-dir", self.output_dir("typo")])
        self.assertEqual(status, EXIT_FAILURE)
        self.assertIn("windw", errors)


if __name__ == "__main__":
    unittest.main()
