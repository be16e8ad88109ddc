"""CLI subcommands: exit codes, determinism, file outputs."""

import hashlib
import json

import numpy as np
import pytest
import yaml

from torusdiff.cli import main
from torusdiff.sde import ground_truth, load_trajectory


def run(argv):
    return main(argv)


class TestSimulateCommand:
    def test_step_count(self, tmp_path):
        out = tmp_path / "traj.npz"
        rc = run(["simulate", "--truth", "B1", "--T", "1", "--dt", "1e-3",
                  "--seed", "7", "--out", str(out)])
        assert rc == 0
        traj = load_trajectory(str(out), potential=ground_truth("B1"))
        assert traj.n_steps == 1000

    def test_rerun_identical_file(self, tmp_path):
        a, b = tmp_path / "a.npz", tmp_path / "b.npz"
        argv = ["simulate", "--truth", "B2", "--T", "0.5", "--dt", "1e-3",
                "--seed", "3", "--out"]
        assert run(argv + [str(a)]) == 0
        assert run(argv + [str(b)]) == 0
        ha = hashlib.sha256(a.read_bytes()).hexdigest()
        hb = hashlib.sha256(b.read_bytes()).hexdigest()
        assert ha == hb

    def test_zero_dt_is_usage_error(self, tmp_path):
        rc = run(["simulate", "--truth", "B1", "--T", "1", "--dt", "0",
                  "--seed", "1", "--out", str(tmp_path / "x.npz")])
        assert rc == 1  # runtime validation of numeric arguments

    def test_unknown_flag_exits_2(self, tmp_path):
        rc = run(["simulate", "--nope", "1"])
        assert rc == 2


class TestPosteriorCommand:
    def test_writes_summaries(self, tmp_path):
        traj = tmp_path / "traj.npz"
        run(["simulate", "--truth", "B1", "--T", "2", "--dt", "1e-3",
             "--seed", "5", "--out", str(traj)])
        out = tmp_path / "post"
        rc = run(["posterior", "--traj", str(traj), "--K", "2",
                  "--prior-plain-weights", "--out-dir", str(out)])
        assert rc == 0
        assert (out / "posterior_mean.json").exists()
        assert (out / "posterior_mean_grid.csv").exists()
        assert (out / "posterior_cov_diag.csv").exists()
        assert (out / "manifest.json").exists()

    def test_missing_trajectory_is_error(self, tmp_path):
        rc = run(["posterior", "--traj", str(tmp_path / "none.npz"),
                  "--out-dir", str(tmp_path / "o")])
        assert rc == 1


class TestFunctionalsCommand:
    def test_samples_written(self, tmp_path):
        traj = tmp_path / "traj.npz"
        run(["simulate", "--truth", "B1", "--T", "2", "--dt", "1e-3",
             "--seed", "6", "--out", str(traj)])
        out = tmp_path / "samples.csv"
        rc = run(["functionals", "--traj", str(traj), "--K", "2",
                  "--prior-plain-weights",
                  "--functional", '{"kind": "power_B", "q": 2}',
                  "--M", "50", "--seed", "1", "--out", str(out)])
        assert rc == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 52  # schema + header + 50 values
        vals = [float(v) for v in lines[2:]]
        assert all(np.isfinite(vals))


class TestEfficiencyCommand:
    def test_analytic_value_in_json(self, tmp_path):
        # uniform measure with a cosine load: V = 1/(4 pi^2)
        out = tmp_path / "eff.json"
        field = tmp_path / "zero.json"
        from torusdiff.fields import FourierField, save_field

        save_field(FourierField.zero(2, 2), field)
        weight = {"dim": 2, "cutoff": 1,
                  "coeffs": [[[1, 0], float(np.sqrt(2) / 2), 0.0],
                             [[-1, 0], float(np.sqrt(2) / 2), 0.0]]}
        spec = json.dumps({"kind": "linear_mu", "weight": weight})
        rc = run(["efficiency", "--truth", "custom", "--field", str(field),
                  "--functional", spec, "--K-G", "6", "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        # linear_mu at B0 = 0: psi = 2 (phi - int phi) = 2 a, so V = 4/(4 pi^2)
        assert payload["V"] == pytest.approx(4.0 / (4 * np.pi**2), rel=1e-8)
        assert payload["K_G"] == 6
        assert "residual" in payload

    def test_linear_B_oracle(self, tmp_path):
        out = tmp_path / "eff.json"
        field = tmp_path / "zero.json"
        from torusdiff.fields import FourierField, save_field

        save_field(FourierField.zero(2, 2), field)
        weight = {"dim": 2, "cutoff": 1,
                  "coeffs": [[[1, 0], float(np.sqrt(2) / 2), 0.0],
                             [[-1, 0], float(np.sqrt(2) / 2), 0.0]]}
        spec = json.dumps({"kind": "linear_B", "weight": weight})
        rc = run(["efficiency", "--truth", "custom", "--field", str(field),
                  "--functional", spec, "--K-G", "6", "--out", str(out)])
        assert rc == 0
        payload = json.loads(out.read_text())
        assert payload["V"] == pytest.approx(1.0 / (4 * np.pi**2), rel=1e-8)


class TestExperimentCommand:
    def test_toy_config_completes(self, tmp_path):
        cfg = {
            "truths": ["B1"], "horizons": [1.0], "dt": 1e-3,
            "replications": 2, "posterior_samples": 20, "cutoff": 2,
            "prior_angular": False, "master_seed": 1,
            "output_dir": str(tmp_path / "res"),
        }
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump(cfg))
        rc = run(["experiment", "--config", str(cfg_path)])
        assert rc == 0
        assert (tmp_path / "res" / "rows.csv").exists()
        assert (tmp_path / "res" / "table1.csv").exists()
        assert (tmp_path / "res" / "plots.gp").exists()
        assert (tmp_path / "res" / "manifest.json").exists()

    def test_preset_with_config_override(self, tmp_path):
        cfg = {"preset": "desk", "truths": ["B1"], "horizons": [1.0],
               "replications": 1, "posterior_samples": 10,
               "output_dir": str(tmp_path / "r")}
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump(cfg))
        assert run(["experiment", "--config", str(cfg_path)]) == 0

    def test_bad_preset_usage_error(self, tmp_path):
        cfg_path = tmp_path / "cfg.yaml"
        cfg_path.write_text(yaml.safe_dump({"preset": "galactic"}))
        assert run(["experiment", "--config", str(cfg_path)]) == 2


class TestValidateCommand:
    def test_clean_checkout_passes(self):
        assert run(["validate"]) == 0
