import json

import numpy as np
import pytest

from ratsplan import ConfigError, StateMetric, build_bridge, dump_nsmdp, generate_lc_nsmdp, load_nsmdp
from ratsplan.cli import main
from ratsplan.domains import BridgeSpec


class TestDomainDocuments:
    @pytest.mark.parametrize("metric", ["discrete", "manhattan"])
    def test_bridge_round_trip(self, metric):
        m = build_bridge(BridgeSpec(epsilon=0.5, metric=metric))
        back = load_nsmdp(json.loads(json.dumps(dump_nsmdp(m))))
        np.testing.assert_array_equal(back.transitions, m.transitions)
        np.testing.assert_array_equal(back.rewards, m.rewards)
        np.testing.assert_array_equal(back.metric.values, m.metric.values)
        assert back.states.names == m.states.names
        assert back.lipschitz_p == m.lipschitz_p

    def test_explicit_metric_round_trip(self):
        metric = StateMetric.explicit([[0, 1, 2], [1, 0, 1.5], [2, 1.5, 0]])
        m = generate_lc_nsmdp(3, 2, 3, 0.1, 0.1, metric, np.random.default_rng(0))
        back = load_nsmdp(dump_nsmdp(m))
        np.testing.assert_array_equal(back.metric.values, metric.values)

    def test_builtin_reference(self):
        m = load_nsmdp({"builtin": "bridge", "epsilon": 1.0})
        ref = build_bridge(BridgeSpec(epsilon=1.0))
        np.testing.assert_array_equal(m.transitions, ref.transitions)

    @pytest.mark.parametrize(
        "doc,path",
        [
            ({"schema": "nsmdp-v2"}, "schema"),
            ({"builtin": "bridge", "epsilon": 3}, "builtin"),
            ({"states": ["a"], "terminal": [False], "actions": ["x"], "metric": "hamming"}, "metric"),
            ({"states": ["a"], "terminal": [False], "actions": ["x"], "metric": "manhattan"}, "metric"),
        ],
    )
    def test_errors(self, doc, path):
        with pytest.raises(ConfigError) as info:
            load_nsmdp(doc)
        assert info.value.path == path

    def test_bad_tables(self):
        doc = dump_nsmdp(generate_lc_nsmdp(2, 1, 2, 0.1, 0.1, rng=np.random.default_rng(0)))
        doc["transitions"][0][0][0] = [0.9, 0.9]
        with pytest.raises(ConfigError, match="sums"):
            load_nsmdp(doc)


class TestCommands:
    def test_run_json_and_csv(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        assert main(["run", "--episodes", "5", "--dmax", "3", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["episodes"] == 5 and len(doc["returns"]) == 5
        assert main(["run", "--episodes", "3", "--algo", "dp-snapshot", "--format", "csv"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "episode,steps,return"

    def test_repeated_invocations_are_byte_identical(self, tmp_path):
        paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
        for p in paths:
            main(["run", "--episodes", "25", "--epsilon", "0.5", "--dmax", "4", "--format", "csv", "--out", str(p)])
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_sweep_writes_files(self, tmp_path):
        assert main(["sweep", "--episodes", "4", "--dmax", "3", "--epsilon", "0", "1", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "summary.csv").read_text().count("\n") == 1 + 2 * 3
        assert (tmp_path / "returns.csv").read_text().count("\n") == 1 + 2 * 3 * 4

    def test_export_and_reload(self, tmp_path):
        out = tmp_path / "bridge.json"
        assert main(["export-domain", "--epsilon", "0.25", "--metric", "manhattan", "--out", str(out)]) == 0
        m = load_nsmdp(out)
        assert m.metric.kind == "manhattan-grid" and m.horizon == 30
        assert main(["run", "--domain", str(out), "--start", "14", "--episodes", "2", "--dmax", "2"]) == 0

    def test_config_error_exit_code(self, capsys):
        assert main(["run", "--episodes", "0"]) == 2
        assert "config.episodes" in capsys.readouterr().err
        assert main(["run", "--domain", "/no/such/file.json"]) == 2

    def test_argument_error_exit_code(self):
        with pytest.raises(SystemExit) as info:
            main(["run", "--algo", "mcts"])
        assert info.value.code == 2

    def test_validate_passes(self, capsys):
        assert main(["validate"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines and all(line.startswith("PASS") for line in lines)

    def test_validate_failure_exit_code(self, monkeypatch, capsys):
        import ratsplan.validation as validation

        failing = [validation.CheckResult("broken", False, "forced", 0.0)]
        monkeypatch.setattr(validation, "run_validation", lambda seed, quick: failing)
        assert main(["validate"]) == 3
        assert capsys.readouterr().out.startswith("FAIL")
