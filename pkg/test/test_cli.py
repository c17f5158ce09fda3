import json
import os
import tempfile
import unittest
import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd

from spintypicality.cli import EXIT_CAPABILITY, EXIT_CONFIG, EXIT_OK, EXIT_OUTPUT, main, run
from spintypicality.config import PRESETS, preset, validate, with_master_seed
from spintypicality.errors import ConfigError, DimensionError
from spintypicality.experiments import PolarizationTrace, TimeGrid
from spintypicality.output import checksum, emit_csv, emit_svg_plot, read_csv_traces


def _compare_document():
    return {
        "mode": "compare",
        "system": {"topology": "ladder", "M": 6, "b_x": 1.0, "b_y": 0.1},
        "initial": {"kind": "entangled", "site": 0, "n_realizations": 1, "master_seed": 4},
        "propagator": {"kind": "exact"},
        "grid": {"t_max": 10.0, "n_samples": 21},
        "output": {"csv": "trace.csv", "svg": "trace.svg", "manifest": "manifest.json"},
    }


class TestValidate(unittest.TestCase):
    def _errors(self, document):
        with self.assertRaises(ConfigError) as context:
            validate(document)
        return context.exception.errors

    def test_odd_ladder(self):
        document = _compare_document()
        document["system"]["M"] = 7
        self.assertTrue(any(e.startswith("system.M") for e in self._errors(document)))

    def test_star_sigma(self):
        document = {"system": {"topology": "star", "M": 6, "sigma": 0.0}}
        self.assertTrue(any(e.startswith("system.sigma") for e in self._errors(document)))

    def test_unknown_keys(self):
        document = _compare_document()
        document["grid"]["tmax"] = 3
        document["extra"] = 1
        errors = self._errors(document)
        self.assertIn("grid.tmax: unknown key", errors)
        self.assertIn("extra: unknown key", errors)

    def test_errors_are_aggregated(self):
        document = _compare_document()
        document["system"]["M"] = 7
        document["initial"]["kind"] = "mixed"
        document["grid"]["n_samples"] = 1
        self.assertGreaterEqual(len(self._errors(document)), 3)

    def test_trotter_default_dt(self):
        document = _compare_document()
        document["propagator"] = {"kind": "trotter"}
        config = validate(document)
        self.assertAlmostEqual(config.propagator.dt, 0.02)

    def test_defaults(self):
        config = validate({"system": {"topology": "star", "M": 5, "sigma": 1.0}, "initial": {"site": 2}})
        self.assertEqual(config.mode, "compare")
        self.assertEqual(config.observed_site, 2)
        self.assertEqual(config.propagator.kind, "exact")
        self.assertEqual(config.grid.n_samples, 400)
        self.assertAlmostEqual(config.grid.t_max, 10.0 / 3.0)
        self.assertEqual(config.output.csv, "trace.csv")
        self.assertIsNone(config.output.svg)

    def test_large_default_propagator(self):
        config = validate({"mode": "pure", "system": {"topology": "ladder", "M": 14}})
        self.assertEqual(config.propagator.kind, "trotter")

    def test_include_oracle_must_be_boolean(self):
        document = _compare_document()
        document["initial"]["include_oracle"] = "false"
        self.assertTrue(any(e.startswith("initial.include_oracle") for e in self._errors(document)))
        document["initial"]["include_oracle"] = False
        self.assertFalse(validate(document).initial.include_oracle)

    def test_round_trip(self):
        config = validate(_compare_document())
        self.assertEqual(validate(config.to_dict()), config)

    def test_presets(self):
        for name in PRESETS:
            config = validate(preset(name))
            self.assertEqual(config.system.m_sites, 14)
            self.assertEqual(config.mode, "typicality")
            self.assertNotIn("kind", preset(name)["initial"])
        fig3a = validate(preset("fig3a"))
        self.assertEqual(fig3a.initial.n_realizations, 630)
        self.assertAlmostEqual(fig3a.system.b_y / fig3a.system.b_x, 0.1)
        with self.assertRaises(ConfigError):
            preset("fig9")

    def test_seed_override(self):
        document = with_master_seed(_compare_document(), 77)
        self.assertEqual(validate(document).initial.master_seed, 77)
        self.assertEqual(_compare_document()["initial"]["master_seed"], 4)


class TestOutput(unittest.TestCase):
    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()
        self.grid = TimeGrid(1.0, 2)

    def tearDown(self):
        self.dir.cleanup()

    def test_two_samples_three_lines(self):
        path = emit_csv([PolarizationTrace(self.grid, [1.0, 0.25], "P_ens")], os.path.join(self.dir.name, "a.csv"))
        with open(path, "rb") as handle:
            content = handle.read()
        self.assertEqual(content, b"t,P_ens\n0,1\n1,0.25\n")

    def test_grid_mismatch(self):
        other = PolarizationTrace(TimeGrid(2.0, 2), [1.0, 0.0], "b")
        with self.assertRaises(DimensionError):
            emit_csv([PolarizationTrace(self.grid, [1.0, 0.0], "a"), other], os.path.join(self.dir.name, "b.csv"))

    def test_read_back(self):
        np.random.seed(42)
        grid = TimeGrid(5.0, 30)
        values = np.random.uniform(-1, 1, 30)
        path = emit_csv([PolarizationTrace(grid, values, "P_pure")], os.path.join(self.dir.name, "c.csv"))
        (trace,) = read_csv_traces(path)
        self.assertEqual(trace.label, "P_pure")
        np.testing.assert_allclose(trace.values, values, rtol=0, atol=1e-12)

    def test_svg(self):
        grid = TimeGrid(5.0, 30)
        series = [
            PolarizationTrace(grid, np.cos(grid.times), "P_ens"),
            PolarizationTrace(grid, np.cos(grid.times) * 0.9, "P_pure"),
        ]
        path = emit_svg_plot(series, os.path.join(self.dir.name, "plot.svg"), "1/b_x")
        root = ET.parse(path).getroot()
        self.assertTrue(root.tag.endswith("svg"))
        ids = {element.get("id") for element in root.iter()}
        self.assertIn("P_ens", ids)
        self.assertIn("P_pure", ids)
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
        self.assertIn("t [1/b_x]", text)
        self.assertIn("P(t)", text)


class TestRun(unittest.TestCase):
    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.dir.cleanup()

    def test_compare_columns(self):
        manifest = run(validate(_compare_document()), self.dir.name)
        frame = pd.read_csv(os.path.join(self.dir.name, "trace.csv"))
        self.assertEqual(list(frame.columns), ["t", "P_ens", "P_pure", "residual"])
        self.assertEqual(len(frame), 21)
        self.assertTrue(os.path.exists(os.path.join(self.dir.name, "trace.svg")))
        self.assertEqual(set(manifest.checksums), {"trace.csv", "trace.svg"})
        with open(os.path.join(self.dir.name, "manifest.json"), encoding="utf-8") as handle:
            written = json.load(handle)
        draws = [d for d in written["random_draws"] if d["purpose"] == "phases"]
        self.assertEqual(draws[0]["count_per_seed"], 32)
        self.assertEqual(written["config"]["initial"]["master_seed"], 4)

    def test_deterministic(self):
        config = validate(_compare_document())
        first = run(config, os.path.join(self.dir.name, "one"), threads=1)
        second = run(config, os.path.join(self.dir.name, "two"), threads=2)
        self.assertEqual(first.checksums["trace.csv"], second.checksums["trace.csv"])

    def test_typicality_mode(self):
        document = _compare_document()
        document["mode"] = "typicality"
        document["initial"]["n_realizations"] = 3
        document["initial"]["include_oracle"] = True
        document["output"] = {"csv": "fig.csv"}
        run(validate(document), self.dir.name)
        frame = pd.read_csv(os.path.join(self.dir.name, "fig.csv"))
        self.assertEqual(list(frame.columns), ["t", "P_ent_1", "P_prod_1", "P_prod_3", "P_ens"])

    def test_typicality_single_realization(self):
        document = preset("fig3b")
        document["system"]["M"] = 6
        document["propagator"] = {"kind": "exact"}
        document["grid"] = {"t_max": 2.0, "n_samples": 11}
        document["output"] = {"csv": "fig3b.csv", "svg": "fig3b.svg", "manifest": "fig3b_manifest.json"}
        manifest = run(validate(document), self.dir.name)
        frame = pd.read_csv(os.path.join(self.dir.name, "fig3b.csv"))
        self.assertEqual(list(frame.columns), ["t", "P_ent_1", "P_prod_1"])
        self.assertEqual(set(manifest.statistics), {"P_ent_1", "P_prod_1"})
        phases = [d["trace"] for d in manifest.random_draws if d["purpose"] == "phases"]
        self.assertEqual(phases, ["P_ent_1", "P_prod_1"])

    def test_star_network_draws_recorded(self):
        document = {
            "mode": "pure",
            "system": {"topology": "star", "M": 5, "sigma": 1.0, "network_seed": 3},
            "grid": {"t_max": 2.0, "n_samples": 5},
        }
        manifest = run(validate(document), self.dir.name)
        network = [d for d in manifest.random_draws if d["purpose"] == "network"]
        self.assertEqual(network[0]["seed"], 3)
        self.assertEqual(network[0]["draws"], 10)


class TestMain(unittest.TestCase):
    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.dir.cleanup()

    def _config(self, document):
        path = os.path.join(self.dir.name, "config.json")
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(document, handle)
        return path

    def test_run(self):
        path = self._config(_compare_document())
        out = os.path.join(self.dir.name, "out")
        self.assertEqual(main(["run", "--config", path, "--out-dir", out, "--seed", "9"]), EXIT_OK)
        with open(os.path.join(out, "manifest.json"), encoding="utf-8") as handle:
            self.assertEqual(json.load(handle)["config"]["initial"]["master_seed"], 9)

    def test_config_error(self):
        document = _compare_document()
        document["system"]["M"] = 5
        self.assertEqual(main(["validate", "--config", self._config(document)]), EXIT_CONFIG)

    def test_invalid_json(self):
        path = os.path.join(self.dir.name, "broken.json")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("{not json")
        self.assertEqual(main(["validate", "--config", path]), EXIT_CONFIG)

    def test_capability_error(self):
        document = _compare_document()
        document["mode"] = "oracle"
        document["system"]["M"] = 14
        path = self._config(document)
        self.assertEqual(main(["run", "--config", path, "--out-dir", self.dir.name]), EXIT_CAPABILITY)

    def test_output_error(self):
        blocker = os.path.join(self.dir.name, "blocker")
        with open(blocker, "w", encoding="utf-8") as handle:
            handle.write("")
        document = _compare_document()
        document["grid"] = {"t_max": 1.0, "n_samples": 3}
        path = self._config(document)
        out = os.path.join(blocker, "sub")
        self.assertEqual(main(["run", "--config", path, "--out-dir", out]), EXIT_OUTPUT)

    def test_presets_and_plot(self):
        self.assertEqual(main(["presets"]), EXIT_OK)
        grid = TimeGrid(3.0, 10)
        csv = emit_csv([PolarizationTrace(grid, np.cos(grid.times), "P_ens")], os.path.join(self.dir.name, "p.csv"))
        self.assertEqual(main(["plot", str(csv)]), EXIT_OK)
        svg = os.path.join(self.dir.name, "p.svg")
        self.assertTrue(os.path.exists(svg))
        self.assertEqual(len(checksum(svg)), 64)


if __name__ == "__main__":
    unittest.main()
