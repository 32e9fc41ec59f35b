"""Config parsing and the command-line entry point."""
import csv
import json

import numpy as np
import pytest

from cli.builtins import BUILTINS
from cli.experiment import ConfigError, parse_config, load_config, TOP_LEVEL_KEYS, KIND_KEYS, SECTION_KEYS, SYSTEM_KINDS
from cli.utils import to_jsonable, dumps
from config.settings import CONFIG_SCHEMA_PATH
from main import main

CHEM_DECL = {
    "kind": "chem",
    "S": [[1, -1, 0], [0, -1, 1]],
    "rates": ["k1", "k2*x1*x2", "k3"],
    "constants": {"k1": 1.0, "k2": 0.5, "k3": 1.0},
    "x0": [1.0, 1.0],
    "labels": ["X", "Y"],
}

OU_DECL = {"kind": "ou", "A": [0.0, 0.0], "B": [[-1.0, 0.5], [0.3, -2.0]], "sigma": [[1.0, 0.0], [0.0, 1.0]]}


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestParseConfig:
    def test_builtin(self):
        config = parse_config({"system": {"kind": "builtin", "name": "two-signatures"}})
        assert config.companion is not None
        assert config.intervention is not None
        assert config.times == (config.grid.horizon,)

    def test_ou(self):
        config = parse_config({"system": OU_DECL, "intervention": {"target": "x1", "value": 2.0},
                               "grid": {"horizon": 1.0, "delta": 0.125}, "n_paths": 50, "seed": 3})
        assert config.ou_model is not None
        assert config.system.p == 2 and config.grid.n_steps == 8
        assert (config.n_paths, config.seed) == (50, 3)
        assert config.intervention.target == 0

    def test_chem(self):
        config = parse_config({"system": CHEM_DECL})
        assert config.system.labels == ("X", "Y")

    def test_expression_with_driver(self):
        doc = {
            "system": {"kind": "expression", "coefficients": [["1", "x1"]], "x0": [0.0]},
            "driver": {"alpha": [1.0, 0.0], "cov": [[0.0, 0.0], [0.0, 1.0]],
                       "jumps": [{"rate": 0.5, "location": [0.0, 1.0]}]},
        }
        config = parse_config(doc)
        assert config.system.driver.dim == 2
        assert config.system.driver.rates.tolist() == [0.5]

    def test_gaussian_initial(self):
        decl = dict(OU_DECL, initial={"mean": [0.0, 1.0], "cov": [[1.0, 0.0], [0.0, 2.0]]})
        config = parse_config({"system": decl})
        np.testing.assert_array_equal(config.system.initial.mean, [0.0, 1.0])

    def test_overrides(self):
        doc = {"system": OU_DECL, "grid": {"horizon": 1.0, "delta": 0.125}, "n_paths": 50}
        config = parse_config(doc, {"paths": 7, "delta": 0.25, "seed": None, "alpha": 0.05})
        assert config.n_paths == 7
        assert config.grid.delta == 0.25
        assert config.alpha == 0.05

    @pytest.mark.parametrize("doc", [
        {"system": OU_DECL, "extra": 1},
        {"grid": {"horizon": 1.0, "delta": 0.1}},
        {"system": {"kind": "spline"}},
        {"system": {"kind": "builtin", "name": "nope"}},
        {"system": OU_DECL, "grid": {"horizon": 1.0, "delta": 0.3}},
        {"system": OU_DECL, "test": {"alpha": 1.5}},
        {"system": OU_DECL, "test": {"times": [0.33]}},
        {"system": OU_DECL, "intervention": {"target": "x9", "value": 1.0}},
        {"system": OU_DECL, "intervention": {"target": "x1", "value": "x1 + 1"}},
        {"system": OU_DECL, "n_paths": 0},
        {"system": {"kind": "expression", "coefficients": [["x1 +"]], "x0": [0.0]}},
        {"system": {"kind": "expression", "coefficients": [["x1"]]}},
        {"system": {"kind": "ou", "B": [[-1.0]], "sigma": [[float("nan")]]}},
        {"system": {"kind": "expression", "coefficients": [["x1", "1"]], "x0": [0.0]},
         "driver": {"alpha": [0.0, 0.0], "jumps": [{"rate": 1.0}]}},
    ])
    def test_invalid(self, doc):
        with pytest.raises(ConfigError):
            parse_config(doc)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"system": ')
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(str(tmp_path / "absent.json"))


class TestSchema:
    @pytest.fixture(scope="class")
    def schema(self):
        with open(CONFIG_SCHEMA_PATH) as fh:
            return json.load(fh)

    def test_top_level(self, schema):
        assert set(schema["properties"]) == TOP_LEVEL_KEYS
        assert schema["required"] == ["system"]

    @pytest.mark.parametrize("kind", SYSTEM_KINDS)
    def test_system_kinds(self, schema, kind):
        definition = schema["definitions"][f"{kind}_system"]
        assert set(definition["properties"]) == KIND_KEYS[kind]
        assert definition["properties"]["kind"]["const"] == kind
        assert {"$ref": f"#/definitions/{kind}_system"} in schema["definitions"]["system"]["oneOf"]

    @pytest.mark.parametrize("section", sorted(SECTION_KEYS))
    def test_sections(self, schema, section):
        assert set(schema["definitions"][section]["properties"]) == SECTION_KEYS[section]

    def test_builtin_names(self, schema):
        assert set(schema["definitions"]["builtin_system"]["properties"]["name"]["enum"]) == set(BUILTINS)

    @pytest.mark.parametrize("section", ["grid", "intervention", "test"])
    def test_unknown_section_key(self, section):
        doc = {"system": OU_DECL, section: {"bogus": 1}}
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config(doc)

    def test_unknown_system_key(self):
        with pytest.raises(ConfigError, match="unknown keys"):
            parse_config({"system": dict(CHEM_DECL, B=[[1.0]])})


class TestJson:
    def test_non_finite_to_null(self):
        assert to_jsonable({"a": np.array([1.0, np.nan, np.inf]), "b": np.float64(2.5)}) == \
               {"a": [1.0, None, None], "b": 2.5}

    def test_dumps_round_trips_floats(self):
        x = 0.1 + 0.2
        assert json.loads(dumps({"x": x}))["x"] == x


class TestMain:
    def test_simulate(self, tmp_path):
        config = write_config(tmp_path, {"system": OU_DECL, "grid": {"horizon": 0.5, "delta": 0.125},
                                         "n_paths": 4, "seed": 1})
        out = tmp_path / "out"
        assert main(["simulate", "--config", config, "--out", str(out)]) == 0
        with open(out / "paths.csv") as fh:
            rows = list(csv.reader(fh))
        assert len(rows) == 1 + 4 * 5
        assert json.loads((out / "simulation.json").read_text())["n_paths"] == 4

    def test_paths_override(self, tmp_path):
        config = write_config(tmp_path, {"system": OU_DECL, "grid": {"horizon": 0.5, "delta": 0.125}})
        out = tmp_path / "out"
        assert main(["simulate", "--config", config, "--out", str(out), "--paths", "2", "--seed", "9"]) == 0
        summary = json.loads((out / "simulation.json").read_text())
        assert (summary["n_paths"], summary["seed"]) == (2, 9)

    def test_signature(self, tmp_path):
        config = write_config(tmp_path, {"system": {"kind": "builtin", "name": "chem"}})
        out = tmp_path / "out"
        assert main(["signature", "--config", config, "--out", str(out)]) == 0
        dot = (out / "signature.dot").read_text()
        assert dot.startswith("digraph")
        assert sum(" -> " in line for line in dot.splitlines()) == 4
        assert len(json.loads((out / "signature.json").read_text())["edges"]) == 4

    def test_intervene(self, tmp_path, capsys):
        config = write_config(tmp_path, {"system": OU_DECL, "intervention": {"target": "x1", "value": 2.0}})
        out = tmp_path / "out"
        assert main(["intervene", "--config", config, "--out", str(out)]) == 0
        assert '"intervention"' in capsys.readouterr().out
        assert (out / "intervened.json").exists()
        assert not (out / "intervened_paths.csv").exists()

    def test_check_commute(self, tmp_path):
        config = write_config(tmp_path, {"system": CHEM_DECL, "intervention": {"target": "Y", "value": 1.0},
                                         "grid": {"horizon": 0.25, "delta": 2.0 ** -6}, "n_paths": 10})
        out = tmp_path / "out"
        assert main(["check-commute", "--config", config, "--out", str(out)]) == 0
        assert json.loads((out / "commutation.json").read_text())["passed"]

    def test_check_commute_expression(self, tmp_path):
        config = write_config(tmp_path, {"system": OU_DECL, "intervention": {"target": "x1", "value": "2*x2"},
                                         "grid": {"horizon": 0.25, "delta": 2.0 ** -6}, "n_paths": 10})
        out = tmp_path / "out"
        assert main(["check-commute", "--config", config, "--out", str(out)]) == 0
        report = json.loads((out / "commutation.json").read_text())
        assert report["passed"] and not report["lagged"]

    def test_same_config_same_bytes(self, tmp_path):
        doc = {"system": {"kind": "expression", "coefficients": [["1", "x1"]], "x0": [0.5]},
               "driver": {"alpha": [1.0, 0.0], "cov": [[0.0, 0.0], [0.0, 1.0]],
                          "jumps": [{"rate": 2.0, "location": [0.0, 0.5]}]},
               "grid": {"horizon": 0.5, "delta": 0.0625}, "n_paths": 8, "seed": 11}
        config = write_config(tmp_path, doc)
        runs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["simulate", "--config", config, "--out", str(out)]) == 0
            runs.append(((out / "simulation.json").read_bytes(), (out / "paths.csv").read_bytes()))
        assert runs[0] == runs[1]

    def test_generator(self, tmp_path):
        config = write_config(tmp_path, {"system": OU_DECL})
        out = tmp_path / "out"
        assert main(["generator", "--config", config, "--out", str(out)]) == 0
        points = json.loads((out / "generator.json").read_text())["points"]
        assert points and all(abs(v["D"] - v["E"]) < 1e-9 for row in points for v in row["values"])

    def test_config_error_exit_code(self, tmp_path):
        config = write_config(tmp_path, {"system": {"kind": "spline"}})
        assert main(["simulate", "--config", config, "--out", str(tmp_path / "out")]) == 1

    def test_missing_config(self, tmp_path):
        assert main(["simulate", "--out", str(tmp_path / "out")]) == 1

    def test_missing_intervention(self, tmp_path):
        config = write_config(tmp_path, {"system": OU_DECL})
        assert main(["check-commute", "--config", config, "--out", str(tmp_path / "out")]) == 1

    def test_runtime_error_exit_code(self, tmp_path):
        decl = {"kind": "expression", "coefficients": [["x2"], ["1"]], "x0": [0.0, 0.0], "declared_signature": []}
        config = write_config(tmp_path, {"system": decl})
        assert main(["signature", "--config", config, "--out", str(tmp_path / "out")]) == 2

    def test_demo_needs_name(self):
        assert main(["demo"]) == 1

    def test_unknown_demo(self, tmp_path):
        assert main(["demo", "lorenz", "--out", str(tmp_path / "out")]) == 1

    def test_chem_demo(self, tmp_path):
        out = tmp_path / "out"
        assert main(["demo", "chem", "--out", str(out), "--paths", "20", "--delta", "0.0625"]) == 0
        assert (out / "euler_sem.dot").exists()
        summary = json.loads((out / "demo_chem.json").read_text())
        assert summary["commutation"]["passed"]

    def test_ito_demo(self, tmp_path):
        out = tmp_path / "out"
        assert main(["demo", "ito-counterexample", "--out", str(out), "--paths", "50"]) == 0
        report = json.loads((out / "demo_ito-counterexample.json").read_text())
        assert report["contradiction"]

    @pytest.mark.slow
    def test_two_signatures_demo(self, tmp_path):
        out = tmp_path / "out"
        assert main(["demo", "two-signatures", "--out", str(out), "--paths", "2000", "--delta", "0.00390625"]) == 0
        report = json.loads((out / "identifiability.json").read_text())
        assert report["verdict"] == "consistent with equality"
        signatures = report["details"]["signatures"]
        assert signatures["two-signatures"] != signatures["two-signatures-tilde"]
        assert report["details"]["max_diffusion_distance"] <= 1e-12
