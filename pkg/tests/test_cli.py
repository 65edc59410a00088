import json

import numpy as np
import pytest

from photonperiod import read_events
from photonperiod.cli import main


def base_config(**overrides):
    doc = {
        "phase": {"f": 5.0},
        "profile": {"eta": 1.0, "coeffs": [[0.5, 0.0]]},
        "template": {"amps_sq": [1.0]},
        "model": {"mu": 100.0, "theta": 0.5, "T": 100.0},
        "densities": {
            "geometry": {
                "R": 5.0,
                "rho": 1.0 / (2.0 * np.pi),
                "alpha_rate": 1.0,
                "sigma": 1.0,
            }
        },
    }
    doc.update(overrides)
    return doc


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSimulate:
    def test_deterministic_output(self, tmp_path, capsys):
        cfg = write_config(tmp_path, base_config())
        out1, out2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        code1, stdout1, _ = run(capsys, ["simulate", "--config", cfg,
                                         "--out", out1, "--seed", "3"])
        code2, _, _ = run(capsys, ["simulate", "--config", cfg,
                                   "--out", out2, "--seed", "3"])
        assert code1 == code2 == 0
        with open(out1, "rb") as f1, open(out2, "rb") as f2:
            assert f1.read() == f2.read()
        doc = json.loads(stdout1)
        assert doc["out"] == out1
        assert doc["theta"] == 0.5
        assert abs(doc["n_events"] - doc["mu0_T"]) < 5 * np.sqrt(doc["mu0_T"])

    def test_different_seeds_differ(self, tmp_path, capsys):
        cfg = write_config(tmp_path, base_config())
        out1, out2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        run(capsys, ["simulate", "--config", cfg, "--out", out1, "--seed", "1"])
        run(capsys, ["simulate", "--config", cfg, "--out", out2, "--seed", "2"])
        with open(out1, "rb") as f1, open(out2, "rb") as f2:
            assert f1.read() != f2.read()


class TestConfigErrors:
    def test_invalid_theta_names_field(self, tmp_path, capsys):
        doc = base_config()
        doc["model"]["theta"] = 1.5
        cfg = write_config(tmp_path, doc)
        code, _, err = run(capsys, ["simulate", "--config", cfg,
                                    "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "model.theta" in err

    def test_malformed_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code, _, err = run(capsys, ["simulate", "--config", str(path),
                                    "--out", str(tmp_path / "x.csv")])
        assert code == 2
        assert "line" in err

    def test_missing_events_file(self, tmp_path, capsys):
        cfg = write_config(tmp_path, base_config())
        code, _, err = run(capsys, ["detect", "--config", cfg,
                                    "--events", str(tmp_path / "missing.csv")])
        assert code == 1


class TestDetect:
    def _simulated(self, tmp_path, capsys, doc=None, seed=5):
        cfg = write_config(tmp_path, doc or base_config())
        events = str(tmp_path / "events.csv")
        code, _, _ = run(capsys, ["simulate", "--config", cfg,
                                  "--out", events, "--seed", str(seed)])
        assert code == 0
        return cfg, events

    def test_strong_source_detected(self, tmp_path, capsys):
        cfg, events = self._simulated(tmp_path, capsys)
        code, out, _ = run(capsys, ["detect", "--config", cfg,
                                    "--events", events])
        assert code == 0
        doc = json.loads(out)
        assert doc["p_value"] < 1e-6
        assert doc["qt"] > 0
        assert doc["sum_w2"] == doc["n_events"]  # unit weights

    def test_optimal_weight_resolves_theta_mle(self, tmp_path, capsys):
        doc = base_config(weight={"kind": "optimal"})
        cfg, events = self._simulated(tmp_path, capsys, doc)
        code, out, err = run(capsys, ["detect", "--config", cfg,
                                      "--events", events])
        assert code == 0
        assert "theta MLE" in err
        res = json.loads(out)
        assert 0.3 < res["theta_used"] < 0.7
        assert res["p_value"] < 1e-6

    def test_precomputed_weights_pass_through(self, tmp_path, capsys):
        cfg, events = self._simulated(tmp_path, capsys)
        ev, _ = read_events(events)
        rng = np.random.default_rng(0)
        w = rng.uniform(0.2, 1.0, len(ev))
        from photonperiod import write_events
        weighted = str(tmp_path / "weighted.csv")
        write_events(weighted, ev, weights=w)
        cfg2 = write_config(tmp_path, base_config(weight={"kind": "precomputed"}),
                            name="cfg2.json")
        code, out, _ = run(capsys, ["detect", "--config", cfg2,
                                    "--events", weighted])
        assert code == 0
        doc = json.loads(out)
        assert doc["sum_w2"] == pytest.approx(float(np.sum(w * w)), rel=1e-12)

    def test_precomputed_without_column_fails(self, tmp_path, capsys):
        cfg, events = self._simulated(tmp_path, capsys)
        cfg2 = write_config(tmp_path, base_config(weight={"kind": "precomputed"}),
                            name="cfg2.json")
        code, _, err = run(capsys, ["detect", "--config", cfg2,
                                    "--events", events])
        assert code == 2
        assert "weight" in err


class TestScanCommand:
    def test_finds_injected_frequency(self, tmp_path, capsys):
        doc = base_config(scan={"f_lo": 4.99, "f_hi": 5.01,
                                "oversample": 5, "m": 2})
        doc["template"] = {"amps_sq": [1.0, 0.2]}
        cfg = write_config(tmp_path, doc)
        events = str(tmp_path / "events.csv")
        run(capsys, ["simulate", "--config", cfg, "--out", events, "--seed", "6"])
        table = str(tmp_path / "scan.csv")
        code, out, _ = run(capsys, ["scan", "--config", cfg,
                                    "--events", events, "--out", table])
        assert code == 0
        best = json.loads(out)
        assert abs(best["f"] - 5.0) < 0.01
        assert best["p_value"] < 1e-10
        lines = open(table).read().strip().splitlines()
        assert lines[0] == "f,fdot,qt,p_value"
        assert len(lines) - 1 == best["trials"]


class TestPowerCommand:
    def test_single_harmonic_efficiency_table(self, tmp_path, capsys):
        cfg = write_config(tmp_path, base_config())
        table = str(tmp_path / "eff.csv")
        code, out, _ = run(capsys, ["power", "--config", cfg, "--out", table])
        assert code == 0
        pred = json.loads(out)
        assert pred["snr"] > 0
        assert pred["efficiency_w"] == 1.0
        rows = [line.split(",") for line in
                open(table).read().strip().splitlines()[1:]]
        pct = {int(m): float(v) for m, v in rows}
        # single-harmonic source: a Z-test with m harmonics keeps 1/sqrt(m)
        assert pct[1] == pytest.approx(100.0, abs=0.01)
        assert pct[2] == pytest.approx(70.71, abs=0.01)
        assert pct[3] == pytest.approx(57.74, abs=0.01)

    def test_weighted_prediction_uses_efficiency(self, tmp_path, capsys):
        doc = base_config(weight={"kind": "optimal", "theta": 0.5})
        cfg = write_config(tmp_path, doc)
        code, out, _ = run(capsys, ["power", "--config", cfg])
        assert code == 0
        pred = json.loads(out)
        assert pred["efficiency_w"] > 1.0


class TestCalibrateCommand:
    def test_report_fields(self, tmp_path, capsys):
        doc = base_config()
        doc["model"] = {"mu": 50.0, "theta": 0.3, "T": 20.0}
        doc["template"] = {"amps_sq": [1.0, 1.0]}
        cfg = write_config(tmp_path, doc)
        code, out, _ = run(capsys, ["calibrate", "--config", cfg,
                                    "--replicates", "60", "--seed", "9"])
        assert code == 0
        rep = json.loads(out)
        assert rep["replicates"] == 60
        assert len(rep["per_harmonic"]) == 2
        for row in rep["per_harmonic"]:
            assert row["mean"] == pytest.approx(2.0, abs=0.6)
            assert row["ks_p_chi2_2dof"] > 1e-4
        assert rep["p_value_ks_uniform_p"] > 1e-4

    def test_multiprocess_matches_single(self, tmp_path, capsys):
        doc = base_config()
        doc["model"] = {"mu": 50.0, "theta": 0.3, "T": 20.0}
        cfg = write_config(tmp_path, doc)
        code1, out1, _ = run(capsys, ["calibrate", "--config", cfg,
                                      "--replicates", "20", "--seed", "4"])
        code2, out2, _ = run(capsys, ["calibrate", "--config", cfg,
                                      "--replicates", "20", "--seed", "4",
                                      "--threads", "2"])
        assert code1 == code2 == 0
        assert json.loads(out1)["qt_mean"] == pytest.approx(
            json.loads(out2)["qt_mean"], rel=1e-12)
