import io
import json
import os
import tempfile
import unittest
from unittest import mock

import pandas as pd

import bergman_p1
import bergman_p2
import capstone_cli
import cauchy
import potential
from capstone_cli import ConfigError, emit, main, parse_config, run
from capstone_defaults import DEFAULTS
from convergence import NonConvergenceError
from potential import PolarityVerdict


def capacity_config(**overrides):
    config = {
        "command": "capacity",
        "set": {"type": "disc", "center": [0, 0], "radius": 1},
        "n": 256,
        "seed": 1,
    }
    config.update(overrides)
    return config


def encode(config):
    return json.dumps(config).encode()


class ParseConfigTest(unittest.TestCase):
    def test_capacity_config_resolves_defaults(self):
        job = parse_config(encode(capacity_config()))
        self.assertIsInstance(job, capstone_cli.CapacityJob)
        self.assertEqual(job.seed, 1)
        self.assertEqual(job.tol, 1e-8)

    def test_unknown_command(self):
        with self.assertRaisesRegex(ConfigError, "unknown command"):
            parse_config(b'{"command":"fly"}')

    def test_missing_set_is_named(self):
        config = capacity_config()
        del config["set"]
        with self.assertRaisesRegex(ConfigError, "set"):
            parse_config(encode(config))

    def test_extra_fields_are_rejected(self):
        with self.assertRaisesRegex(ConfigError, "colour"):
            parse_config(encode(capacity_config(colour="red")))

    def test_malformed_json(self):
        with self.assertRaisesRegex(ConfigError, "malformed JSON"):
            parse_config(b"{command: capacity")

    def test_invalid_set_is_reported(self):
        bad = capacity_config(set={"type": "disc", "center": [0, 0], "radius": -1})
        with self.assertRaisesRegex(ConfigError, "radius must be positive"):
            parse_config(encode(bad))

    def test_nonpositive_tolerance(self):
        with self.assertRaisesRegex(ConfigError, "tol"):
            parse_config(encode(capacity_config(tol=0)))


class RunTest(unittest.TestCase):
    def test_capacity_of_unit_disc(self):
        report = run(parse_config(encode(capacity_config())))
        self.assertAlmostEqual(report["results"]["capacity"], 1.0, delta=0.02)
        self.assertEqual(report["results"]["tol"], 1e-8)
        self.assertEqual(report["config"]["set"]["radius"], 1)
        self.assertEqual(report["config"]["tol"], 1e-8)
        self.assertEqual(report["version"], capstone_cli.__version__)

    def test_dim_p2_for_k_zero(self):
        report = run(parse_config(b'{"command": "dim-p2", "k": 0}'))
        self.assertEqual(report["results"]["dimension"], 6)
        self.assertEqual(report["config"]["seed"], 0)

    def test_dim_p1_over_point_set(self):
        config = {"command": "dim-p1", "k": 2, "set": {"type": "point_set", "points": [[0, 0], [1, 0]]}}
        report = run(parse_config(encode(config)))
        self.assertEqual(report["results"]["dimension"], {"finite": 3})
        self.assertEqual(report["warnings"], [])

    def test_results_are_deterministic(self):
        text = encode(capacity_config(n=64))
        first = run(parse_config(text))
        second = run(parse_config(text))
        self.assertEqual(first["results"], second["results"])
        self.assertEqual(first["config"], second["config"])

    def test_module_errors_carry_the_command(self):
        config = {
            "command": "equilibrium",
            "set": {"type": "point_set", "points": [[0, 0], [1, 0]]},
            "n": 8,
        }
        with self.assertRaisesRegex(ConfigError, "equilibrium: .*cardinality"):
            run(parse_config(encode(config)))


class EchoTest(unittest.TestCase):
    disc = {"type": "disc", "center": [0, 0], "radius": 1}

    def test_capacity_echoes_iteration_budget(self):
        config = capacity_config(n=64, max_iter=30000)
        with mock.patch(
            "potential.equilibrium_with_details", wraps=potential.equilibrium_with_details
        ) as solver:
            report = run(parse_config(encode(config)))
        self.assertEqual(report["config"]["max_iter"], 30000)
        self.assertEqual(solver.call_args.args[4], 30000)
        default = parse_config(encode(capacity_config()))
        self.assertEqual(default.max_iter, DEFAULTS["equilibrium_max_iter"])

    def test_polarity_results_carry_tolerance(self):
        verdict = PolarityVerdict(0.9, (0.91, 0.9, 0.9), "nonpolar", 1e-6)
        config = capacity_config(command="polarity", tol=1e-7, stability=0.1)
        with mock.patch("potential.classify_polarity", return_value=verdict) as classify:
            report = run(parse_config(encode(config)))
        self.assertEqual(report["results"]["tol"], 1e-7)
        self.assertEqual(report["results"]["stability"], 0.1)
        self.assertEqual(report["config"]["schedule"], [64, 128, 256])
        self.assertEqual(report["config"]["threshold"], 1e-6)
        self.assertEqual(classify.call_args.args[1:], (1e-6, (64, 128, 256), 1e-7, 1, 0.1))

    def test_dim_p1_echoes_polarity_and_grid(self):
        config = {
            "command": "dim-p1",
            "k": 2,
            "set": {"type": "point_set", "points": [[0, 0], [1, 0]]},
            "riesz_cells": 32,
        }
        with mock.patch("bergman_p1.dimension_report", wraps=bergman_p1.dimension_report) as call:
            report = run(parse_config(encode(config)))
        echoed = report["config"]
        self.assertEqual(echoed["schedule"], list(DEFAULTS["polarity_schedule"]))
        self.assertEqual(echoed["tol"], DEFAULTS["equilibrium_tol"])
        self.assertEqual(echoed["stability"], DEFAULTS["polarity_stability"])
        self.assertEqual(echoed["riesz_inner_exponent"], -6)
        self.assertEqual(echoed["riesz_outer_exponent"], 20)
        self.assertEqual(echoed["riesz_cells"], 32)
        self.assertEqual(echoed["riesz_decay_shells"], 3)
        grid = call.call_args.args[7]
        self.assertEqual(grid, bergman_p1.RieszGrid(cells=32))
        self.assertEqual(call.call_args.args[5], (64, 128, 256))

    def test_dim_p1_rejects_empty_shell_range(self):
        config = {
            "command": "dim-p1",
            "k": 0,
            "set": self.disc,
            "riesz_inner_exponent": 4,
            "riesz_outer_exponent": 4,
        }
        with self.assertRaisesRegex(ConfigError, "riesz_outer_exponent"):
            parse_config(encode(config))

    def test_dim_p2_echoes_shell_budget(self):
        with mock.patch("bergman_p2.omega_k_report", return_value={"k": 0}) as call:
            report = run(parse_config(b'{"command": "dim-p2", "k": 0, "shells": 12}'))
        echoed = report["config"]
        self.assertEqual(echoed["shells"], 12)
        self.assertEqual(echoed["r_max"], DEFAULTS["shell_r_max"])
        self.assertEqual(echoed["nodes"], DEFAULTS["shell_gauss_nodes"])
        self.assertEqual(echoed["critical_margin"], DEFAULTS["critical_margin"])
        self.assertEqual(echoed["decay_shells"], DEFAULTS["shell_decay_shells"])
        self.assertEqual(call.call_args.args, (0, bergman_p2.ShellBudget(shells=12)))

    def test_cross_validation_uses_the_configured_budget(self):
        config = b'{"command": "dim-p2", "k": 0, "verdicts": false, "cross_validate": true, "nodes": 16}'
        with mock.patch("bergman_p2.cross_validate", return_value={"rows": []}) as call:
            run(parse_config(config))
        self.assertEqual(call.call_args.kwargs["budget"], bergman_p2.ShellBudget(nodes=16))

    def test_wiegerinck_echoes_boost_settings(self):
        config = {
            "command": "wiegerinck",
            "e1": self.disc,
            "e2": {"type": "disc", "center": [5, 0], "radius": 1},
            "k": 0,
            "boost_attempts": 5,
        }
        with mock.patch("cauchy.wiegerinck_sequence", return_value=[]) as call:
            report = run(parse_config(encode(config)))
        echoed = report["config"]
        self.assertEqual(echoed["anchor_radius_factor"], DEFAULTS["anchor_radius_factor"])
        self.assertEqual(echoed["extra_orders"], DEFAULTS["laurent_extra_orders"])
        self.assertEqual(echoed["boost_attempts"], 5)
        self.assertEqual(echoed["null_ratio"], DEFAULTS["null_space_ratio"])
        self.assertEqual(echoed["coefficient_tol"], DEFAULTS["boost_coefficient_tol"])
        self.assertEqual(echoed["area_grid"], DEFAULTS["area_grid"])
        self.assertEqual(call.call_args.args[-1], cauchy.BoostSettings(attempts=5))

    def test_witness_echoes_construction_parameters(self):
        psi = mock.Mock(recipe={"R": 1.0, "R_outer": 40.0, "energy": 0.0}, bound=1.05, exclusion_radius=0.0)
        config = {"command": "witness", "set": self.disc, "seed": 2, "band": 0.02, "tol": 1e-7}
        with (
            mock.patch("bergman_p1.witness_psi_star", return_value=psi) as build,
            mock.patch("bergman_p1.verify_witness_bounds", return_value={}) as verify,
        ):
            report = run(parse_config(encode(config)))
        echoed = report["config"]
        for key in ("outer_factor", "bound_slack", "floor", "samples"):
            self.assertEqual(echoed[key], DEFAULTS[f"witness_{key}"])
        self.assertEqual(echoed["band"], 0.02)
        self.assertEqual(echoed["schedule"], list(DEFAULTS["polarity_schedule"]))
        self.assertEqual(echoed["stability"], DEFAULTS["polarity_stability"])
        expected = bergman_p1.WitnessParameters(seed=2, tol=1e-7)
        self.assertEqual(build.call_args.kwargs["params"], expected)
        self.assertEqual(
            verify.call_args.args, (psi, 1.0, DEFAULTS["witness_samples"], 2, 0.02, DEFAULTS["witness_floor"])
        )


class EmitTest(unittest.TestCase):
    def test_json_round_trips(self):
        report = run(parse_config(encode(capacity_config(n=64))))
        decoded = json.loads(emit(report, "json"))
        self.assertEqual(decoded["results"], report["results"])
        self.assertEqual(decoded["config"], report["config"])

    def test_equilibrium_table_has_one_row_per_support_point(self):
        config = {"command": "equilibrium", "set": {"type": "segment", "a": [-1, 0], "b": [1, 0]}, "n": 64}
        report = run(parse_config(encode(config)))
        text = emit(report, "csv-tables").decode()
        self.assertTrue(text.startswith("# table: support\n"))
        frame = pd.read_csv(io.StringIO(text.split("\n", 1)[1]))
        self.assertEqual(len(frame), 64)
        self.assertAlmostEqual(frame["weight"].sum(), 1.0, places=10)

    def test_empty_diagnostics_are_still_valid(self):
        report = {
            "version": capstone_cli.__version__,
            "config": {"command": "capacity"},
            "results": {"capacity": 0.0},
            "diagnostics": {},
            "warnings": [],
        }
        self.assertEqual(json.loads(emit(report, "json"))["diagnostics"], {})
        self.assertIn("capacity", emit(report, "csv-tables").decode())
        self.assertTrue(emit(report, "pdf").startswith(b"%PDF"))

    def test_pdf_output(self):
        report = run(parse_config(b'{"command": "dim-p2", "k": 1, "verdicts": false}'))
        self.assertTrue(emit(report, "pdf").startswith(b"%PDF"))


class MainTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, payload) -> str:
        path = os.path.join(self.tmp.name, "job.json")
        with open(path, "w") as handle:
            handle.write(payload if isinstance(payload, str) else json.dumps(payload))
        return path

    def test_success_writes_report(self):
        out = os.path.join(self.tmp.name, "report.json")
        code = main([self.write(capacity_config(n=64)), "--out", out])
        self.assertEqual(code, 0)
        with open(out) as handle:
            self.assertIn("capacity", json.load(handle)["results"])

    def test_config_error_exit_code(self):
        self.assertEqual(main([self.write({"command": "fly"})]), 2)
        self.assertEqual(main([os.path.join(self.tmp.name, "missing.json")]), 2)

    def test_non_convergence_exit_code(self):
        error = NonConvergenceError("gap too large", iterations=10, residual=1e-3)
        with mock.patch("potential.equilibrium_with_details", side_effect=error):
            self.assertEqual(main([self.write(capacity_config())]), 3)

    def test_inconclusive_exit_code(self):
        verdict = PolarityVerdict(2e-6, (1e-3, 1e-4, 2e-6), "inconclusive", 1e-6)
        out = os.path.join(self.tmp.name, "report.json")
        with mock.patch("potential.classify_polarity", return_value=verdict):
            code = main([self.write(capacity_config(command="polarity")), "--out", out])
        self.assertEqual(code, 4)
        with open(out) as handle:
            self.assertTrue(json.load(handle)["warnings"])


if __name__ == "__main__":
    unittest.main()
