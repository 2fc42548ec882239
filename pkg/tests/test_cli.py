import json
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

import gpl.metrics
from gpl.cli import ConfigError, main, parse_config
from gpl.graph import heterophily_ratio
from gpl.synth import load_dataset

SMALL_CFG = """\
# tiny budget for test runs
outer_epochs = 2
k_inner = 5
clf_steps_per_epoch = 60
warmup_steps = 20
"""


@pytest.fixture
def cfg_file(tmp_path):
    p = tmp_path / "train.cfg"
    p.write_text(SMALL_CFG)
    return str(p)


@pytest.fixture
def dataset(tmp_path):
    out = tmp_path / "data"
    rc = main(["synth", "--n", "120", "--h", "0.4", "--avg-degree", "6",
               "--out", str(out)])
    assert rc == 0
    return str(out)


class TestSynth:
    def test_writes_loadable_dataset(self, dataset):
        g = load_dataset(dataset)
        assert g.n == 120
        assert abs(heterophily_ratio(g) - 0.4) < 0.01

    def test_file_names(self, dataset, tmp_path):
        for name in ("edges.tsv", "features.csv", "labels.txt"):
            assert (tmp_path / "data" / name).exists()

    def test_multiple_h_values(self, tmp_path):
        out = tmp_path / "multi"
        rc = main(["synth", "--n", "80", "--h", "0.2,0.6", "--avg-degree", "6",
                   "--out", str(out)])
        assert rc == 0
        assert abs(heterophily_ratio(load_dataset(out / "h0.2")) - 0.2) < 0.02
        assert abs(heterophily_ratio(load_dataset(out / "h0.6")) - 0.6) < 0.02

    def test_bad_h_exits_nonzero(self, tmp_path, capsys):
        rc = main(["synth", "--n", "40", "--h", "1.5", "--out",
                   str(tmp_path / "x")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestRewire:
    def test_hits_target(self, dataset, tmp_path):
        out = tmp_path / "rewired"
        rc = main(["rewire", "--data", dataset, "--target-h", "0.7",
                   "--out", str(out)])
        assert rc == 0
        g = load_dataset(out)
        assert abs(heterophily_ratio(g) - 0.7) < 0.02
        # rewiring permutes endpoints, never the node set or labels
        orig = load_dataset(dataset)
        assert np.array_equal(g.labels, orig.labels)
        assert g.m == orig.m


class TestTrain:
    def test_gpl_outputs(self, dataset, cfg_file, tmp_path):
        out = tmp_path / "run"
        rc = main(["train", "--data", dataset, "--config", cfg_file,
                   "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert set(summary) == {
            "f1", "pi_hat", "pi_true", "prior_error", "mean_weight_homo",
            "mean_weight_hetero", "epochs", "seed",
        }
        assert 0.0 <= summary["f1"] <= 1.0
        assert summary["epochs"] == 2
        assert summary["prior_error"] == pytest.approx(
            abs(summary["pi_hat"] - summary["pi_true"]))
        trace = (out / "trace.csv").read_text().splitlines()
        assert len(trace) == 1 + summary["epochs"]
        assert (out / "classifier.txt").exists()

    def test_baseline_unit_weights(self, dataset, cfg_file, tmp_path):
        out = tmp_path / "base"
        rc = main(["train", "--data", dataset, "--method", "baseline",
                   "--config", cfg_file, "--out", str(out)])
        assert rc == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["mean_weight_homo"] == 1.0
        assert summary["mean_weight_hetero"] == 1.0

    def test_repeat_runs_byte_identical(self, dataset, cfg_file, tmp_path):
        blobs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["train", "--data", dataset, "--config", cfg_file,
                         "--out", str(out)]) == 0
            blobs.append(((out / "trace.csv").read_bytes(),
                          (out / "summary.json").read_bytes(),
                          (out / "classifier.txt").read_bytes()))
        assert blobs[0] == blobs[1]

    def test_seed_override(self, dataset, cfg_file, tmp_path):
        outs = {}
        for seed in (0, 3):
            out = tmp_path / f"s{seed}"
            assert main(["train", "--data", dataset, "--config", cfg_file,
                         "--seed", str(seed), "--out", str(out)]) == 0
            outs[seed] = json.loads((out / "summary.json").read_text())
        assert outs[3]["seed"] == 3
        assert outs[0]["pi_hat"] != outs[3]["pi_hat"]

    def test_missing_dataset_exits_nonzero(self, tmp_path, capsys):
        rc = main(["train", "--data", str(tmp_path / "nope"),
                   "--out", str(tmp_path / "r")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestConfigFile:
    def test_parses_types_and_comments(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("outer_epochs = 4  # comment\nlr_mask = 0.5\n"
                     "lr_schedule = invsqrt\n\n# full-line comment\n")
        out = parse_config(p)
        assert out == {"outer_epochs": 4, "lr_mask": 0.5,
                       "lr_schedule": "invsqrt"}

    def test_unknown_key_named_with_line(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("outer_epochs = 4\nlearning_rate = 0.1\n")
        with pytest.raises(ConfigError, match=r"2: unknown config key: learning_rate"):
            parse_config(p)

    def test_bad_value(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("outer_epochs = four\n")
        with pytest.raises(ConfigError, match="bad value"):
            parse_config(p)

    def test_missing_equals(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("outer_epochs 4\n")
        with pytest.raises(ConfigError, match="key = value"):
            parse_config(p)

    def test_cli_reports_config_error(self, dataset, tmp_path, capsys):
        p = tmp_path / "c.cfg"
        p.write_text("bogus = 1\n")
        rc = main(["train", "--data", dataset, "--config", str(p),
                   "--out", str(tmp_path / "r")])
        assert rc == 1
        assert "bogus" in capsys.readouterr().err


class TestEstimatePrior:
    def write_scores(self, tmp_path, rng):
        from conftest import separable_score_mixture
        sp_, su_ = separable_score_mixture(rng, 400, 0.25)
        pos = tmp_path / "pos.txt"
        unl = tmp_path / "unl.txt"
        pos.write_text("\n".join(f"{v:.9f}" for v in sp_))
        unl.write_text("\n".join(f"{v:.9f}" for v in su_))
        return str(pos), str(unl)

    def test_prints_estimate(self, tmp_path, capsys):
        pos, unl = self.write_scores(tmp_path, np.random.default_rng(0))
        rc = main(["estimate-prior", "--pos", pos, "--unlabeled", unl])
        assert rc == 0
        lines = capsys.readouterr().out.splitlines()
        pi_hat = float(lines[0].split("=")[1])
        assert abs(pi_hat - 0.25) <= 0.1
        assert lines[1].startswith("c_star=")
        assert lines[2] == "c,q_u,q_p,ratio,admissible"

    def test_curve_file(self, tmp_path, capsys):
        pos, unl = self.write_scores(tmp_path, np.random.default_rng(1))
        curve = tmp_path / "curve.csv"
        rc = main(["estimate-prior", "--pos", pos, "--unlabeled", unl,
                   "--q-floor", "0.1", "--curve-out", str(curve)])
        assert rc == 0
        rows = curve.read_text().splitlines()
        assert rows[0] == "c,q_u,q_p,ratio,admissible"
        assert len(rows) > 10
        # admissible column respects the floor
        for r in rows[1:]:
            c, qu, qp, ratio, adm = r.split(",")
            assert (int(adm) == 1) == (float(qp) >= 0.1)

    def test_bad_score_file(self, tmp_path, capsys):
        pos = tmp_path / "pos.txt"
        pos.write_text("0.5 2.5")
        rc = main(["estimate-prior", "--pos", str(pos), "--unlabeled", str(pos)])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestSweep:
    def run_sweep(self, tmp_path, cfg_file, out_name, monkeypatch, threads):
        monkeypatch.setenv("GPL_THREADS", str(threads))
        out = tmp_path / out_name
        rc = main(["sweep", "--var", "rp", "--values", "0.3,0.6",
                   "--seeds", "0,1", "--method", "gpl", "--n", "120",
                   "--avg-degree", "6", "--config", cfg_file,
                   "--out", str(out)])
        assert rc == 0
        return out

    def test_grid_shape(self, tmp_path, cfg_file, monkeypatch):
        out = self.run_sweep(tmp_path, cfg_file, "sw", monkeypatch, 1)
        runs = (out / "runs.csv").read_text().splitlines()
        assert len(runs) == 1 + 2 * 2  # values x seeds, one method
        agg = (out / "aggregate.csv").read_text().splitlines()
        assert len(agg) == 1 + 2
        assert runs[0].split(",")[:4] == ["var", "value", "seed", "method"]

    def test_thread_count_does_not_change_results(self, tmp_path, cfg_file,
                                                  monkeypatch):
        seq = self.run_sweep(tmp_path, cfg_file, "sw1", monkeypatch, 1)
        par = self.run_sweep(tmp_path, cfg_file, "sw4", monkeypatch, 4)
        assert (seq / "runs.csv").read_bytes() == (par / "runs.csv").read_bytes()
        assert (seq / "aggregate.csv").read_bytes() == (par / "aggregate.csv").read_bytes()

    def test_single_value_rejected(self, tmp_path, cfg_file, capsys):
        rc = main(["sweep", "--var", "h", "--values", "0.3", "--seeds", "0",
                   "--config", cfg_file, "--out", str(tmp_path / "x")])
        assert rc == 1
        assert "two values" in capsys.readouterr().err

    def test_duplicate_seeds_rejected(self, tmp_path, cfg_file, capsys):
        rc = main(["sweep", "--var", "h", "--values", "0.2,0.4",
                   "--seeds", "1,1", "--config", cfg_file,
                   "--out", str(tmp_path / "x")])
        assert rc == 1
        assert "distinct" in capsys.readouterr().err


class TestValidate:
    def test_suite_passes(self, capsys):
        rc = main(["validate"])
        out = capsys.readouterr().out.splitlines()
        assert rc == 0
        assert out[0] == "check,instances,value,threshold,pass"
        names = {r.split(",")[0] for r in out[1:]}
        assert {"belief_row_sums", "influence_sum_identity",
                "irreducibility_homophilic", "irreducibility_gap"} <= names
        assert all(r.split(",")[-1] == "1" for r in out[1:])

    def test_broken_normalization_detected(self, monkeypatch, capsys):
        # drop the row normalization: conservation must catch it and the
        # command must exit nonzero
        real = gpl.metrics.propagation_operator

        def unnormalized(g, mask):
            op = real(g, mask).tocsr(copy=True)
            rows = op.sum(axis=1).A.ravel()
            scale = sp.diags(np.where(rows > 0, 1.0 + 0.25 * rows, 1.0))
            return (scale @ op).tocsr()

        monkeypatch.setattr(gpl.metrics, "propagation_operator", unnormalized)
        rc = main(["validate"])
        captured = capsys.readouterr()
        assert rc == 1
        assert "validation FAILED" in captured.err
        rows = {r.split(",")[0]: r.split(",")[-1]
                for r in captured.out.splitlines()[1:]}
        assert rows["belief_row_sums"] == "0"


class TestEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "gpl", "--help"],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0
        for sub in ("synth", "rewire", "train", "estimate-prior", "sweep",
                    "validate"):
            assert sub in proc.stdout
