import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from coreg.cli import main

GOOD_CONFIG = """
[graph]
adjacency = 0,0,0; 1,0,0; 0,1,0
directed = true

[exosystem]
S = 0,-1; 1,0
w0 = 1,0

[plant.1]
A = 0,1; -1,-1
B = 0; 1
C = 1,0
P = 0,0; 1,0

[plant.2]
A = 0,1; -2,-1
B = 0; 1
C = 1,1
P = 0,1; 0,0

[design]
h = 0.1
"""

UNCONTROLLABLE_CONFIG = """
[graph]
adjacency = 0,0; 1,0
directed = true

[exosystem]
S = 0,-1; 1,0

[plant.1]
A = 2,0; 0,0.5
B = 0; 1
C = 1,0
P = 0,0; 0,0
Q = 0,0

[design]
h = 0.1
"""


class TestCertify:
    def test_example41_passes(self, tmp_path):
        rc = main(["certify", "--scenario", "example41",
                   "--out", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "certificate.json").read_text())
        assert doc["verdict"] == "pass"
        assert abs(doc["rho_eta"] - 0.9) < 1e-6
        assert doc["mu"] == 0.1 and doc["h"] == 0.1
        assert doc["assumptions"] == {"A1": True, "A2": True, "A3": True,
                                      "A4": True}

    def test_excessive_mu_fails_with_exit_2(self, tmp_path):
        rc = main(["certify", "--scenario", "example41", "--mu", "1.0",
                   "--out", str(tmp_path)])
        assert rc == 2
        doc = json.loads((tmp_path / "certificate.json").read_text())
        assert doc["verdict"] == "fail"
        assert abs(doc["rho_eta"] - 2.0) < 1e-6

    def test_malformed_config_exits_1_with_line(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(GOOD_CONFIG.replace("A = 0,1; -1,-1",
                                           "A = 0,1; -1,-1,4"))
        rc = main(["certify", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 1
        err = capsys.readouterr().err
        assert "line" in err

    def test_non_square_plant_exits_1(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(GOOD_CONFIG.replace("A = 0,1; -1,-1\nB = 0; 1",
                                           "A = 0,1,3; -1,-1,2\nB = 0; 1"))
        rc = main(["certify", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 1

    def test_config_scenario_certifies(self, tmp_path):
        cfg = tmp_path / "net.cfg"
        cfg.write_text(GOOD_CONFIG)
        rc = main(["certify", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 0

    def test_reference_gains_unavailable_is_input_error(self, tmp_path,
                                                        capsys):
        cfg = tmp_path / "net.cfg"
        cfg.write_text(GOOD_CONFIG)
        rc = main(["certify", "--config", str(cfg), "--k1", "paper",
                   "--out", str(tmp_path)])
        assert rc == 1
        assert "reference" in capsys.readouterr().err

    def test_missing_config_file_is_input_error(self, tmp_path):
        rc = main(["certify", "--config", str(tmp_path / "nope.cfg"),
                   "--out", str(tmp_path)])
        assert rc == 1

    def test_microgrid_rejected(self, tmp_path, capsys):
        rc = main(["certify", "--scenario", "microgrid",
                   "--out", str(tmp_path)])
        assert rc == 1
        assert "simulate" in capsys.readouterr().err
        assert main(["design", "--scenario", "microgrid",
                     "--out", str(tmp_path)]) == 1

    def test_sampling_period_override(self, tmp_path):
        rc = main(["certify", "--scenario", "example41", "--h", "0.05",
                   "--out", str(tmp_path)])
        doc = json.loads((tmp_path / "certificate.json").read_text())
        assert doc["h"] == 0.05
        assert rc in (0, 2)  # verdict depends on the reference gains at h


class TestDesign:
    def test_synthesized_gains_pass(self, tmp_path):
        rc = main(["design", "--scenario", "example41", "--k1", "synthesize",
                   "--out", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "design.json").read_text())
        assert doc["certificate"]["verdict"] == "pass"
        assert doc["k1_source"] == "synthesize"
        assert len(doc["k1"]) == 4 and len(doc["pi"]) == 4
        # K2 = -K1 Pi
        k1 = np.array(doc["k1"][0])
        k2 = np.array(doc["k2"][0])
        pi = np.array(doc["pi"][0])
        assert np.abs(k2 + k1 @ pi).max() == 0.0

    def test_reference_gains_are_passed_through(self, tmp_path):
        rc = main(["design", "--scenario", "example41", "--k1", "paper",
                   "--out", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "design.json").read_text())
        assert doc["k1"][0] == [[-8.9637, -10.3322, -10.7802]]

    def test_unstabilizable_plant_exits_2_naming_agent(self, tmp_path,
                                                       capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(UNCONTROLLABLE_CONFIG)
        rc = main(["design", "--config", str(cfg), "--k1", "synthesize",
                   "--out", str(tmp_path)])
        assert rc == 2
        assert "agent1" in capsys.readouterr().err.replace("agent 1", "agent1")

    def test_failing_mu_exits_2(self, tmp_path):
        rc = main(["design", "--scenario", "example41", "--mu", "1.0",
                   "--out", str(tmp_path)])
        assert rc == 2
        doc = json.loads((tmp_path / "certificate.json").read_text())
        assert doc["verdict"] == "fail"


class TestSimulate:
    def test_example41_run(self, tmp_path):
        rc = main(["simulate", "--scenario", "example41", "-T", "30",
                   "--out", str(tmp_path)])
        assert rc == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["final_max_error"] <= 1e-2
        assert not metrics["diverged"]
        trace_lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert trace_lines[0] == "t,phase,agent,component,value"
        errors_lines = (tmp_path / "errors.csv").read_text().splitlines()
        assert errors_lines[0] == "t,e1,e2,e3,e4"

    def test_forced_unstable_run_exits_3(self, tmp_path):
        rc = main(["simulate", "--scenario", "example41", "--mu", "1.0",
                   "--force", "-T", "30", "--out", str(tmp_path)])
        assert rc == 3
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["diverged"]
        assert (tmp_path / "trace.csv").stat().st_size > 0

    def test_unstable_without_force_exits_2(self, tmp_path):
        rc = main(["simulate", "--scenario", "example41", "--mu", "1.0",
                   "-T", "30", "--out", str(tmp_path)])
        assert rc == 2
        assert not (tmp_path / "trace.csv").exists()

    def test_deterministic_outputs(self, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        for out in (out_a, out_b):
            rc = main(["simulate", "--scenario", "example41", "-T", "5",
                       "--substeps", "3", "--out", str(out)])
            assert rc == 0
        assert (out_a / "trace.csv").read_bytes() \
            == (out_b / "trace.csv").read_bytes()
        assert (out_a / "errors.csv").read_bytes() \
            == (out_b / "errors.csv").read_bytes()

    def test_microgrid_run(self, tmp_path):
        rc = main(["simulate", "--scenario", "microgrid", "-T", "5",
                   "--out", str(tmp_path)])
        assert rc == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["p_main_final"] == 850.0
        for name in ("microgrid.csv", "incremental_cost.csv",
                     "power_tracking.csv", "frequency.csv"):
            assert (tmp_path / name).exists()
        head = (tmp_path / "power_tracking.csv").read_text().splitlines()
        assert head[0] == "t,p_main,sum_p_r"

    def test_microgrid_long_run_reaches_dispatch_optimum(self, tmp_path):
        rc = main(["simulate", "--scenario", "microgrid", "-T", "36000",
                   "--out", str(tmp_path)])
        assert rc == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["lambda_spread"] <= 1e-6
        assert abs(metrics["sum_p_r_final"] - 850.0) <= 1e-6
        assert metrics["max_abs_domega_final"] <= 1e-3

    def test_config_scenario_simulates(self, tmp_path):
        cfg = tmp_path / "net.cfg"
        cfg.write_text(GOOD_CONFIG)
        rc = main(["simulate", "--config", str(cfg), "-T", "10",
                   "--out", str(tmp_path)])
        assert rc == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["final_max_error"] < 1.0
        # two agents with different output labels in errors.csv
        head = (tmp_path / "errors.csv").read_text().splitlines()[0]
        assert head == "t,e1,e2"


class TestEntryPoint:
    def test_module_invocation(self, tmp_path):
        src = Path(__file__).resolve().parent.parent / "src"
        env = dict(os.environ)
        env["PYTHONPATH"] = str(src) + os.pathsep + env.get("PYTHONPATH", "")
        proc = subprocess.run(
            [sys.executable, "-m", "coreg", "certify", "--scenario",
             "example41", "--out", str(tmp_path)],
            capture_output=True, text=True, env=env)
        assert proc.returncode == 0
        assert (tmp_path / "certificate.json").exists()

    def test_shipped_example_config(self, tmp_path):
        cfg = Path(__file__).resolve().parent.parent / "docs" / "example41.cfg"
        rc = main(["certify", "--config", str(cfg), "--out", str(tmp_path)])
        assert rc == 0
        doc = json.loads((tmp_path / "certificate.json").read_text())
        assert doc["verdict"] == "pass"
        assert abs(doc["rho_eta"] - 0.9) < 1e-6
