"""
Tests for the otalign command line interface.
"""

import json

import numpy as np
import pytest

from otalign import cli
from otalign.config import reset_settings
from otalign.core.alignment import ot_loss
from otalign.io.formats import plan_from_dict, seq_file_dict
from otalign.monitoring import TrainingLog

SMALL_TRAIN = {
    "train": {
        "steps": 4,
        "teacher_steps": 5,
        "dataset_size": 4,
        "batch": 2,
        "num_merges": 6,
        "sinkhorn_max_iters": 200,
    }
}


def run(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def last_json(out):
    return json.loads(out.strip().splitlines()[-1])


class TestSinkhornCommand:
    """Test `otalign sinkhorn`"""

    def test_single_entry(self, capsys, write_json):
        code, out, _ = run(capsys, ["sinkhorn", write_json("c.json", [[0.3]])])
        data = last_json(out)
        assert code == 0
        assert data["cost"] == 0.3
        assert data["plan"] == [[1.0]]

    def test_constant_cost(self, capsys, write_json):
        code, out, _ = run(capsys, ["sinkhorn", write_json("c.json", [[0.5, 0.5], [0.5, 0.5]])])
        assert code == 0
        assert last_json(out)["cost"] == pytest.approx(0.5, abs=1e-12)

    def test_two_by_three(self, capsys, write_json):
        path = write_json("c.json", {"cost": [[0, 1, 1], [1, 1, 0]]})
        code, out, _ = run(capsys, ["sinkhorn", path, "--lambda", "200"])
        data = last_json(out)
        assert code == 0
        assert data["cost"] == pytest.approx(1 / 3, abs=0.01)
        plan = plan_from_dict(data)
        np.testing.assert_allclose(plan.plan.sum(axis=1), 0.5, atol=1e-6)

    def test_explicit_marginals(self, capsys, write_json):
        path = write_json("c.json", {"cost": [[0, 1], [1, 0]], "alpha": [0.25, 0.75], "beta": [0.5, 0.5]})
        code, out, _ = run(capsys, ["sinkhorn", path])
        plan = np.array(last_json(out)["plan"])
        assert code == 0
        np.testing.assert_allclose(plan.sum(axis=1), [0.25, 0.75], atol=1e-6)

    def test_not_converged_exit_code(self, capsys, write_json):
        path = write_json("c.json", [[1.0, 2.0], [2.0, 1.0]])
        code, out, _ = run(capsys, ["sinkhorn", path, "--lambda", "1000", "--no-log-domain"])
        assert code == 2
        assert last_json(out)["converged"] is False

    def test_byte_identical_output(self, capsys, write_json):
        path = write_json("c.json", [[0.1, 0.7, 0.3], [0.9, 0.2, 0.4]])
        _, first, _ = run(capsys, ["sinkhorn", path])
        _, second, _ = run(capsys, ["sinkhorn", path])
        assert first == second

    def test_config_file_and_flag_precedence(self, capsys, write_json):
        cost = write_json("c.json", [[0.1, 0.7], [0.9, 0.2]])
        config = write_json("run.json", {"sinkhorn": {"lambda": 5.0, "tol": 1e-8}})
        _, out, _ = run(capsys, ["sinkhorn", cost, "--config", config])
        from_file = last_json(out)
        _, out, _ = run(capsys, ["sinkhorn", cost, "--config", config, "--lambda", "80"])
        from_flag = last_json(out)
        assert from_file["cost"] > from_flag["cost"]

    def test_malformed_json(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[[0.1, 0.2")
        code, out, err = run(capsys, ["sinkhorn", str(path)])
        assert code == 1
        assert out == ""
        assert "error:" in err

    def test_ragged_rows(self, capsys, write_json):
        code, _, err = run(capsys, ["sinkhorn", write_json("c.json", [[0.1, 0.2], [0.3]])])
        assert code == 1
        assert "[1]" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, ["sinkhorn", str(tmp_path / "absent.json")])
        assert code == 1

    def test_unknown_config_key(self, capsys, write_json):
        cost = write_json("c.json", [[0.1]])
        config = write_json("run.json", {"sinkhorn": {"lamda": 5.0}})
        code, _, err = run(capsys, ["sinkhorn", cost, "--config", config])
        assert code == 1
        assert "lamda" in err


class TestOracleCommand:
    """Test `otalign oracle`"""

    def test_zero_cost(self, capsys, write_json):
        code, out, _ = run(capsys, ["oracle", write_json("c.json", np.zeros((3, 2)).tolist())])
        assert code == 0
        assert last_json(out)["cost"] == 0.0

    @pytest.mark.parametrize("method", ["flow", "lp", "permutation"])
    def test_methods_agree(self, capsys, write_json, method):
        path = write_json("c.json", [[0.4, 0.1, 0.8], [0.3, 0.9, 0.2], [0.5, 0.6, 0.7]])
        code, out, _ = run(capsys, ["oracle", path, "--method", method])
        assert code == 0
        assert last_json(out)["cost"] == pytest.approx((0.1 + 0.2 + 0.5) / 3, abs=1e-9)

    def test_permutation_rejects_rectangular(self, capsys, write_json):
        code, _, _ = run(capsys, ["oracle", write_json("c.json", [[0.1, 0.2]]), "--method", "permutation"])
        assert code == 1


class TestAlignCommand:
    """Test `otalign align`"""

    def test_single_layer_matches_library(self, capsys, write_json, rng):
        x = rng.normal(size=(3, 2))
        y = rng.normal(size=(4, 2))
        code, out, _ = run(
            capsys,
            ["align", write_json("s.json", seq_file_dict("s", x)), write_json("t.json", seq_file_dict("t", y))],
        )
        data = last_json(out)
        expected, _ = ot_loss(x, y)
        assert code == 0
        assert data["loss"] == pytest.approx(expected, abs=1e-12)
        assert data["hid_loss"] is None
        assert data["config"]["lambda"] == 50.0

    def test_width_mismatch_needs_projection(self, capsys, write_json):
        s = write_json("s.json", [[1.0, 0.0]])
        t = write_json("t.json", [[1.0, 0.0, 2.0]])
        code, _, _ = run(capsys, ["align", s, t])
        assert code == 1
        code, out, _ = run(capsys, ["align", s, t, "--proj", "3"])
        assert code == 0
        assert last_json(out)["emb_projected"] is True

    def test_config_projection_seed(self, capsys, write_json, rng):
        s = write_json("s.json", rng.normal(size=(3, 2)).tolist())
        t = write_json("t.json", rng.normal(size=(4, 5)).tolist())
        losses = {}
        for seed in (3, 4):
            config = write_json(f"r{seed}.json", {"objective": {"projection_seed": seed}})
            code, out, _ = run(capsys, ["align", s, t, "--config", config])
            assert code == 0
            assert last_json(out)["emb_projected"] is True
            losses[seed] = last_json(out)["loss"]
        assert losses[3] != losses[4]

        _, out, _ = run(capsys, ["align", s, t, "--proj", "3"])
        assert last_json(out)["loss"] == losses[3]

        _, out, _ = run(capsys, ["align", s, t, "--config", write_json("r.json", {}), "--proj", "4"])
        assert last_json(out)["loss"] == losses[4]

    def test_layer_mode(self, capsys, write_json, rng):
        paths = [write_json(f"{k}.json", rng.normal(size=(3 if k[0] == "s" else 5, 2)).tolist())
                 for k in ("se", "te", "sh", "th")]
        code, out, _ = run(
            capsys,
            ["align", paths[0], paths[1], "--student-hidden", paths[2], "--teacher-hidden", paths[3]],
        )
        data = last_json(out)
        assert code == 0
        assert data["loss"] == pytest.approx(data["emb_loss"] + data["hid_loss"], abs=1e-12)

    def test_hidden_files_come_in_pairs(self, capsys, write_json):
        s = write_json("s.json", [[1.0]])
        code, _, _ = run(capsys, ["align", s, s, "--student-hidden", s])
        assert code == 1


class TestCcotCommand:
    """Test `otalign ccot`"""

    def test_breakdown(self, capsys, write_json, random_quad):
        quad = {
            key: {
                "embeddings": getattr(random_quad, key).embeddings.tolist(),
                "hiddens": getattr(random_quad, key).hiddens.tolist(),
            }
            for key in ("s_raw", "s_cot", "t_raw", "t_cot")
        }
        code, out, _ = run(capsys, ["ccot", write_json("q.json", quad)])
        data = last_json(out)
        assert code == 0
        assert data["ccot"] == pytest.approx(data["cst"] + data["crc"], abs=1e-12)
        assert data["ot_kd"] <= data["ccot"] + 1e-12
        assert data["converged"] is True

    def test_missing_bundle(self, capsys, write_json):
        code, _, err = run(capsys, ["ccot", write_json("q.json", {"s_raw": {}})])
        assert code == 1
        assert "s_raw" in err


class TestCheckgradCommand:
    """Test `otalign checkgrad`"""

    def test_random_instance_passes(self, capsys):
        code, out, _ = run(capsys, ["checkgrad"])
        data = last_json(out)
        assert code == 0
        assert data["pass"] is True
        assert data["entries_checked"] == 12

    def test_env_seed_changes_instance(self, capsys, monkeypatch):
        _, first, _ = run(capsys, ["checkgrad", "--seed", "1"])
        monkeypatch.setenv("OTALIGN_SEED", "7")
        reset_settings()
        _, second, _ = run(capsys, ["checkgrad", "--seed", "1"])
        _, third, _ = run(capsys, ["checkgrad", "--seed", "2"])
        assert first != second
        assert second == third


class TestTokenizeCommand:
    """Test `otalign tokenize`"""

    def test_char(self, capsys):
        code, out, _ = run(capsys, ["tokenize", "ab<sep>"])
        data = last_json(out)
        assert code == 0
        assert data["symbols"] == ["a", "b", "<sep>"]
        assert data["round_trip"] is True

    def test_out_of_alphabet(self, capsys):
        code, _, _ = run(capsys, ["tokenize", "ABC"])
        assert code == 1


class TestTrainCommand:
    """Test `otalign train`"""

    def test_alpha_zero_records(self, capsys, write_json):
        config = write_json("run.json", SMALL_TRAIN)
        code, out, _ = run(capsys, ["train", "--config", config, "--alpha", "0"])
        lines = [json.loads(line) for line in out.strip().splitlines()]
        assert code == 0
        assert len(lines) == 5
        assert lines[0]["kd"] is None and lines[0]["ccot"] is None
        assert lines[-1]["summary"]["steps"] == 4
        assert lines[-1]["summary"]["config"]["alpha"] == 0.0

    def test_deterministic_stream(self, capsys, write_json):
        config = write_json("run.json", SMALL_TRAIN)
        _, first, _ = run(capsys, ["train", "--config", config])
        _, second, _ = run(capsys, ["train", "--config", config])
        assert first == second
        assert json.loads(first.splitlines()[0])["ccot"] is not None

    def test_summary_and_records_files(self, capsys, write_json, tmp_path):
        config = write_json("run.json", SMALL_TRAIN)
        records = tmp_path / "records.jsonl"
        summary = tmp_path / "summary.json"
        code, _, _ = run(
            capsys,
            ["train", "--config", config, "--ablation", "sft", "--records", str(records), "--summary", str(summary)],
        )
        assert code == 0
        assert len(records.read_text().splitlines()) == 4
        assert json.loads(summary.read_text())["config"]["use_cot_data"] is False

    def test_invalid_override(self, capsys, write_json):
        config = write_json("run.json", SMALL_TRAIN)
        code, _, _ = run(capsys, ["train", "--config", config, "--alpha", "2"])
        assert code == 1

    def test_divergence_exit_code(self, capsys, monkeypatch):
        monkeypatch.setattr(cli, "train_run", lambda cfg, monitor=None, cache=None: TrainingLog(
            summary={"aborted": True}, aborted=True, abort_step=2))
        code, out, err = run(capsys, ["train", "--steps", "3"])
        assert code == 3
        assert "diverged" in err
        assert last_json(out)["summary"]["aborted"] is True
