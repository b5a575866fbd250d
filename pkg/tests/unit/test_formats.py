"""
Tests for JSON input files, canonical output and run configuration files.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from otalign.core.transport import sinkhorn, uniform_measure
from otalign.exceptions import ConfigurationError, InputFileError
from otalign.io.formats import (
    canonical_json,
    load_bundle_file,
    load_cost_file,
    load_quad_file,
    load_seq_file,
    plan_from_dict,
    seq_file_dict,
)
from otalign.io.run_config import load_run_config, make_projections, parse_run_config


class TestCanonicalJson:
    """Test deterministic serialization"""

    def test_full_precision(self):
        assert canonical_json(0.1) == "0.10000000000000001"
        assert json.loads(canonical_json(1 / 3)) == 1 / 3

    def test_integral_floats_keep_a_point(self):
        assert canonical_json([1.0, 2]) == "[1.0, 2]"

    def test_non_finite_is_null(self):
        assert canonical_json({"a": float("nan"), "b": float("inf")}) == '{"a": null, "b": null}'

    def test_numpy_values(self):
        assert canonical_json({"ok": np.bool_(True), "x": np.arange(2.0)}) == '{"ok": true, "x": [0.0, 1.0]}'

    def test_unknown_type(self):
        with pytest.raises(TypeError):
            canonical_json(object())


class TestSeqFiles:
    """Test SeqFile and cost file loading"""

    def test_seq_file(self, write_json):
        path = write_json("s.json", seq_file_dict("student", np.ones((2, 3))))
        name, matrix = load_seq_file(path)
        assert name == "student"
        assert matrix.shape == (2, 3)

    def test_bare_list(self, write_json):
        _, matrix = load_seq_file(write_json("s.json", [[1, 2], [3, 4]]))
        np.testing.assert_array_equal(matrix, [[1.0, 2.0], [3.0, 4.0]])

    def test_declared_shape_checked(self, write_json):
        path = write_json("s.json", {"name": "x", "rows": 3, "cols": 1, "data": [[1.0], [2.0]]})
        with pytest.raises(InputFileError, match="rows"):
            load_seq_file(path)

    @pytest.mark.parametrize("data", [[], [[]], [[1.0, "a"]], [[1.0, True]], "abc"])
    def test_invalid_data(self, write_json, data):
        with pytest.raises(InputFileError):
            load_seq_file(write_json("s.json", data))

    def test_missing_data_key(self, write_json):
        with pytest.raises(InputFileError, match="data"):
            load_seq_file(write_json("s.json", {"name": "x"}))

    def test_cost_with_marginals(self, write_json):
        problem = load_cost_file(write_json("c.json", {"cost": [[0, 1]], "beta": [0.25, 0.75]}))
        assert problem.alpha is None
        np.testing.assert_allclose(problem.beta.weights, [0.25, 0.75])

    def test_marginal_length_checked(self, write_json):
        with pytest.raises(InputFileError, match="alpha"):
            load_cost_file(write_json("c.json", {"cost": [[0, 1]], "alpha": [0.5, 0.5]}))

    def test_marginal_must_sum_to_one(self, write_json):
        with pytest.raises(InputFileError):
            load_cost_file(write_json("c.json", {"cost": [[0, 1]], "beta": [0.5, 0.6]}))


class TestBundleFiles:
    """Test BundleFile and QuadFile loading"""

    def test_bundle(self, write_json):
        path = write_json("b.json", {"label": "s", "embeddings": [[1.0, 2.0]], "hiddens": [[0.5]]})
        bundle = load_bundle_file(path)
        assert bundle.length == 1
        assert bundle.label == "s"

    def test_bundle_row_mismatch(self, write_json):
        path = write_json("b.json", {"embeddings": [[1.0], [2.0]], "hiddens": [[0.5]]})
        with pytest.raises(InputFileError):
            load_bundle_file(path)

    def test_quad_with_projections(self, write_json):
        bundle = {"embeddings": [[1.0, 0.0]], "hiddens": [[0.5]]}
        teacher = {"embeddings": [[1.0, 0.0, 1.0]], "hiddens": [[0.5]]}
        path = write_json(
            "q.json",
            {
                "s_raw": bundle, "s_cot": bundle, "t_raw": teacher, "t_cot": teacher,
                "projections": {"embedding": np.eye(3, 2).tolist()},
            },
        )
        quad, proj = load_quad_file(path)
        assert quad.t_cot.embeddings.shape == (1, 3)
        assert proj.embedding.weights.shape == (3, 2)
        assert proj.hidden is None

    def test_quad_missing_member(self, write_json):
        bundle = {"embeddings": [[1.0]], "hiddens": [[0.5]]}
        with pytest.raises(InputFileError, match="t_cot"):
            load_quad_file(write_json("q.json", {"s_raw": bundle, "s_cot": bundle, "t_raw": bundle}))


class TestPlanFromDict:
    """Test re-reading emitted plans"""

    def test_sinkhorn_output_is_feasible(self, rng):
        result = sinkhorn(rng.uniform(size=(3, 4)), uniform_measure(3), uniform_measure(4))
        plan = plan_from_dict(json.loads(canonical_json(result.to_dict())))
        np.testing.assert_array_equal(plan.plan, result.plan)
        assert plan.marginal_err <= 1e-6

    def test_infeasible_plan(self):
        with pytest.raises(InputFileError, match="marginals"):
            plan_from_dict({"plan": [[0.5, 0.5], [0.0, 0.0]]})

    def test_negative_entries(self):
        with pytest.raises(InputFileError, match="negative"):
            plan_from_dict({"plan": [[0.75, -0.25], [-0.25, 0.75]]})


class TestRunConfig:
    """Test RunConfig files and precedence"""

    def test_defaults(self):
        cfg = load_run_config(None)
        assert cfg.sinkhorn_config().lam == 50.0
        assert cfg.train_config().steps == 2000

    def test_file_then_overrides(self, write_json):
        cfg = load_run_config(write_json("r.json", {"sinkhorn": {"lambda": 10.0, "tol": 1e-6}}))
        sk = cfg.sinkhorn_config({"lam": 30.0, "tol": None})
        assert sk.lam == 30.0
        assert sk.tol == 1e-6

    def test_sinkhorn_section_feeds_training(self):
        cfg = parse_run_config({"sinkhorn": {"lambda": 20.0}, "train": {"steps": 7, "proj_lr": 0.5}})
        train = cfg.train_config({"alpha": 0.1})
        assert (train.lam, train.steps, train.alpha, train.proj_lr) == (20.0, 7, 0.1, 0.5)

    def test_env_seed_wins(self):
        cfg = parse_run_config({"train": {"seed": 3}, "objective": {"projection_seed": 5}})
        assert cfg.train_config({"seed": 4}, env_seed=9).seed == 9
        assert cfg.projection_seed(env_seed=9) == 9
        assert cfg.projection_seed() == 5

    def test_objective_section(self):
        obj = parse_run_config({"objective": {"alpha": 0.3, "layers": "hidden", "projection_seed": 1}}).objective_config()
        assert obj.alpha == 0.3
        assert obj.layers == "hidden"

    @pytest.mark.parametrize(
        "data",
        [{"sinkhorn": {"lamda": 1.0}}, {"train": {"transform": "sort"}}, {"extra": {}}, [1, 2]],
    )
    def test_rejected(self, data):
        with pytest.raises(ConfigurationError):
            parse_run_config(data)

    def test_invalid_value_reaches_library_check(self):
        with pytest.raises(ConfigurationError):
            parse_run_config({"train": {"alpha": 3.0}}).train_config()

    def test_make_projections(self):
        proj = make_projections((5, 3), (4, 4), seed=2)
        assert proj.embedding.weights.shape == (5, 3)
        assert proj.hidden is None
        again = make_projections((5, 3), (6, 4), seed=2)
        np.testing.assert_array_equal(proj.embedding.weights, again.embedding.weights)
        assert again.hidden.seed == 3

    def test_shipped_default_config(self):
        path = Path(__file__).resolve().parents[2] / "configs" / "default_run.json"
        cfg = load_run_config(path)
        assert cfg.train_config().steps == 2000
        assert cfg.sinkhorn_config().lam == 50.0
