"""Command-line front door: config validation, outputs, exit codes, determinism."""

import csv
import json
import math

import numpy as np
import pytest

from cdptradeoff import Channel, DivergenceKind, error_rate, push_forward
from cdptradeoff.cli import (
    EXIT_AUDIT_FAIL,
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    EXIT_SIZE,
    build_instance,
    load_config,
    main,
)

CANONICAL = {
    "source": {"prior1": 0.5, "class1": [0.8, 0.2], "class2": [0.2, 0.8]},
    "degrade": {"type": "bsc", "flip": 0.1},
    "distortion": {"type": "hamming"},
    "divergence": {"name": "total_variation"},
    "classifier": {"type": "indices", "indices": [0]},
    "d_grid": [0.1, 0.2, 0.3],
    "p_grid": [0.0, 0.2],
    "mode": "both",
    "seed": 42,
}


def write_config(tmp_path, overrides=None, drop=None, name="config.json"):
    raw = json.loads(json.dumps(CANONICAL))
    for key, value in (overrides or {}).items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key].update(value)
        else:
            raw[key] = value
    for key in drop or ():
        raw.pop(key, None)
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


class TestConfigParsing:
    def test_canonical_round_trip(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg.mode == "both"
        assert cfg.seed == 42
        assert cfg.d_grid == (0.1, 0.2, 0.3)
        assert cfg.instance.source.prior1 == 0.5

    def test_inf_strings_in_grids(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"d_grid": ["inf"], "p_grid": ["inf"]}))
        assert cfg.d_grid == (math.inf,)
        assert cfg.p_grid == (math.inf,)

    def test_bayes_classifier_default(self, tmp_path):
        cfg = load_config(write_config(tmp_path, drop=["classifier"]))
        # For this source the Bayes region on the restored alphabet is {0}.
        assert cfg.instance.classifier.indices == (0,)

    def test_rows_degradation(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"degrade": {"type": "rows", "rows": [[0.7, 0.3], [0.1, 0.9]]}}))
        np.testing.assert_allclose(cfg.instance.degrade.matrix, [[0.7, 0.3], [0.1, 0.9]])

    def test_renyi_divergence_with_alpha(self, tmp_path):
        cfg = load_config(write_config(tmp_path, {"divergence": {"name": "renyi", "alpha": 2.0}}))
        assert cfg.instance.divergence.alpha == 2.0

    def test_build_instance_rejects_missing_field(self):
        with pytest.raises(Exception) as err:
            build_instance({"source": {"prior1": 0.5, "class1": [1.0, 0.0]}})
        assert "class2" in str(err.value)


class TestExitCodes:
    def test_missing_config_file_is_io_error(self, capsys):
        assert main(["sweep", "--config", "/nonexistent/nope.json"]) == EXIT_IO

    def test_invalid_json_is_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        assert main(["sweep", "--config", str(path)]) == EXIT_CONFIG

    def test_broken_channel_rows_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"degrade": {"type": "rows", "rows": [[0.9, 0.2], [0.1, 0.9]]}})
        assert main(["sweep", "--config", cfg]) == EXIT_CONFIG

    def test_bad_mode_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"mode": "sideways"})
        assert main(["sweep", "--config", cfg]) == EXIT_CONFIG

    def test_unknown_divergence_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"divergence": {"name": "wasserstein"}})
        assert main(["sweep", "--config", cfg]) == EXIT_CONFIG

    def test_bad_seed_rejected(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"seed": -1})
        assert main(["sweep", "--config", cfg]) == EXIT_CONFIG

    def test_audit_validates_config_before_running(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"degrade": {"type": "rows", "rows": [[0.9, 0.2], [0.1, 0.9]]}})
        assert main(["audit", "--config", cfg, "--trials", "1"]) == EXIT_CONFIG

    def test_probe_size_cap_is_size_error(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"d_grid": [0.3], "p_grid": [0.2]})
        assert main(["probe-scdp-convexity", "--config", cfg, "--oracle-step", "0.0002"]) == EXIT_SIZE


class TestSweep:
    def test_csv_shape_and_header(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out.csv"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
        rows = list(csv.reader(out.read_text().splitlines()))
        assert rows[0] == ["mode", "D", "P", "value", "status", "achieved_D", "achieved_P", "iterations"]
        # 3 distortion budgets x 2 perception budgets x 2 modes.
        assert len(rows) == 1 + 12
        modes = {r[0] for r in rows[1:]}
        assert modes == {"cdp", "scdp"}

    def test_values_parse_and_order(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out.csv"
        main(["sweep", "--config", cfg, "--out", str(out)])
        rows = list(csv.DictReader(out.read_text().splitlines()))
        by_key = {(r["mode"], r["D"], r["P"]): r for r in rows}
        for (mode, d, p), r in by_key.items():
            if r["status"] == "Optimal":
                v = float(r["value"])
                assert 0.0 <= v <= 1.0
                if mode == "cdp":
                    s = by_key[("scdp", d, p)]
                    if s["status"] == "Optimal":
                        assert float(s["value"]) <= v + 1e-8

    def test_infeasible_cells_have_empty_value(self, tmp_path):
        cfg = write_config(tmp_path, {"d_grid": [0.01, 0.2]})
        out = tmp_path / "out.csv"
        assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
        rows = list(csv.DictReader(out.read_text().splitlines()))
        infeasible = [r for r in rows if r["status"] == "Infeasible"]
        assert infeasible
        assert all(r["value"] == "" for r in infeasible)

    def test_dump_kernels_replay(self, tmp_path):
        cfg = write_config(tmp_path, {"mode": "cdp"})
        out = tmp_path / "out.csv"
        dump = tmp_path / "kernels.json"
        main(["sweep", "--config", cfg, "--out", str(out), "--dump-kernels", str(dump)])
        payload = json.loads(dump.read_text())
        run = load_config(cfg)
        csv_rows = {
            (r["mode"], float(r["D"]), float(r["P"])): r
            for r in csv.DictReader(out.read_text().splitlines())
        }
        checked = 0
        for cell in payload["cells"]:
            if cell["kernel"] is None:
                continue
            K = Channel(run.instance.degrade.output, run.instance.restore_alphabet, np.array(cell["kernel"]))
            restored = push_forward(run.instance.degraded, K)
            replayed = error_rate(restored, run.instance.classifier)
            reported = float(csv_rows[(cell["mode"], cell["D"], cell["P"])]["value"])
            assert replayed == pytest.approx(reported, abs=1e-10)
            checked += 1
        assert checked >= 4

    def test_stdout_when_out_is_dash(self, tmp_path, capsys):
        cfg = write_config(tmp_path, {"d_grid": [0.2], "p_grid": [0.2], "mode": "cdp"})
        assert main(["sweep", "--config", cfg, "--out", "-"]) == EXIT_OK
        captured = capsys.readouterr()
        assert captured.out.startswith("mode,D,P,value")


class TestAudit:
    def test_audit_passes_and_reports(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "report.json"
        code = main(["audit", "--config", cfg, "--trials", "30", "--out", str(out)])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["passed"] is True
        assert report["seed"] == 42
        names = {r["name"] for r in report["results"]}
        assert len(names) >= 5
        for r in report["results"]:
            assert set(r) >= {"name", "passed", "trials", "worst", "tolerance"}

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "report.json"
        main(["audit", "--config", cfg, "--seed", "7", "--trials", "10", "--out", str(out)])
        assert json.loads(out.read_text())["seed"] == 7


class TestProbe:
    def test_schema_and_exit(self, tmp_path):
        cfg = write_config(tmp_path, {"d_grid": [0.1, 0.2, 0.3], "p_grid": [0.2]})
        out = tmp_path / "probe.json"
        assert main(["probe-scdp-convexity", "--config", cfg, "--oracle-step", "0.1", "--out", str(out)]) == EXIT_OK
        payload = json.loads(out.read_text())
        assert set(payload) >= {"grid", "violations", "max_violation", "lipschitz_slack"}
        assert payload["grid"]["D"] == [0.1, 0.2, 0.3]

    def test_single_point_grid_has_no_triples(self, tmp_path):
        cfg = write_config(tmp_path, {"d_grid": [0.2], "p_grid": [0.2]})
        out = tmp_path / "probe.json"
        assert main(["probe-scdp-convexity", "--config", cfg, "--oracle-step", "0.1", "--out", str(out)]) == EXIT_OK
        payload = json.loads(out.read_text())
        assert payload["violations"] == []
        assert payload["max_violation"] == 0.0


class TestDeterminism:
    def test_sweep_outputs_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["sweep", "--config", cfg, "--out", str(a)])
        main(["sweep", "--config", cfg, "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_audit_outputs_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        main(["audit", "--config", cfg, "--trials", "20", "--out", str(a)])
        main(["audit", "--config", cfg, "--trials", "20", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()
