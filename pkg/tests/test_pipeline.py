import json

import pandas as pd
import pytest

from arithmetic.field import GlobalField
from exceptions import BudgetExceeded, SpecError
from pipeline.experiment import ExperimentSpec, load_spec, report_hash, run_experiment
from pipeline.generators import GeneratorKind, GeneratorSpec, generate_set

Q = GlobalField.rational()

SQUARES = {"kind": "polynomial-image", "polynomials": [[0, 0, 1]]}


def _small_spec(**overrides):
    data = {
        "name": "small",
        "N": 1000,
        "generator": {"kind": "random-uniform", "size": 30},
        "stages": ["audit", "reconstruct"],
        "expect": {"outcome": "Small", "audit_holds": True},
    }
    data.update(overrides)
    return ExperimentSpec.model_validate(data)


class TestGenerators:
    """Test cases for point set generators."""

    def test_polynomial_image(self):
        """Test the squares of 1..10 under N = 100."""
        S = generate_set(GeneratorSpec.model_validate(SQUARES), Q, 100, 2)
        assert len(S) == 10
        assert (10, 100) in S.points

    def test_polynomial_image_symmetric(self):
        """Test the squares of -10..10 under N = 100."""
        S = generate_set(GeneratorSpec.model_validate({**SQUARES, "symmetric": True}), Q, 100, 2)
        assert len(S) == 21

    def test_polynomial_image_function_field(self):
        """Test x -> x^2 over F_2(T) with N = 16."""
        F2 = GlobalField.function_field(2)
        spec = GeneratorSpec(kind=GeneratorKind.POLYNOMIAL_IMAGE, polynomials=[[[0], [0], [1]]])
        S = generate_set(spec, F2, 16, 2)
        # nonzero x of degree at most 2
        assert len(S) == 7

    def test_polynomial_count_must_match(self):
        """Test that d - 1 polynomials are required."""
        with pytest.raises(SpecError):
            generate_set(GeneratorSpec.model_validate(SQUARES), Q, 100, 3)

    def test_random_uniform_is_seeded(self):
        """Test that the seed fixes the drawn points."""
        spec = GeneratorSpec(kind=GeneratorKind.RANDOM_UNIFORM, size=50)
        first = generate_set(spec, Q, 100, 2, seed=3)
        second = generate_set(spec, Q, 100, 2, seed=3)
        assert len(first) == 50
        assert first.points == second.points

    def test_random_uniform_dense_box(self):
        """Test drawing most of a small box."""
        S = generate_set(GeneratorSpec(kind=GeneratorKind.RANDOM_UNIFORM, size=8), Q, 1, 2)
        assert len(S) == 8

    def test_random_uniform_too_many(self):
        """Test that a box of nine points cannot give ten."""
        with pytest.raises(BudgetExceeded):
            generate_set(GeneratorSpec(kind=GeneratorKind.RANDOM_UNIFORM, size=10), Q, 1, 2)

    def test_union(self):
        """Test y = x^2 and y = 2x sharing the point (2, 4)."""
        spec = GeneratorSpec.model_validate({
            "kind": "union",
            "parts": [{**SQUARES, "x_bound": 10}, {"kind": "polynomial-image", "polynomials": [[0, 2]],
                                                   "x_bound": 10}],
        })
        assert len(generate_set(spec, Q, 100, 2)) == 19

    def test_file(self, tmp_path):
        """Test reading points from a JSON file."""
        path = tmp_path / "points.json"
        path.write_text(json.dumps({"points": [[1, 2], [3, 4]]}))
        S = generate_set(GeneratorSpec(kind=GeneratorKind.FILE, path=str(path)), Q, 10, 2)
        assert S.points == [(1, 2), (3, 4)]

    def test_file_with_duplicates(self, tmp_path):
        """Test that repeated points are a spec error."""
        path = tmp_path / "points.json"
        path.write_text(json.dumps([[1, 2], [1, 2]]))
        with pytest.raises(SpecError):
            generate_set(GeneratorSpec(kind=GeneratorKind.FILE, path=str(path)), Q, 10, 2)

    def test_missing_file(self, tmp_path):
        """Test an unreadable point file."""
        spec = GeneratorSpec(kind=GeneratorKind.FILE, path=str(tmp_path / "missing.json"))
        with pytest.raises(SpecError):
            generate_set(spec, Q, 10, 2)


class TestExperiment:
    """Test cases for experiment runs and reports."""

    def test_small_experiment(self, tmp_path):
        """Test a passing run and its output files."""
        report = run_experiment(_small_spec(), tmp_path)
        assert report["passed"]
        assert report["input"]["size"] == 30
        assert report["stages"]["reconstruct"]["kind"] == "Small"
        assert (tmp_path / "report.json").exists()
        assert (tmp_path / "events.jsonl").read_text().count("\n") >= 5
        audit = pd.read_csv(tmp_path / "tables" / "audit.csv")
        # Q = floor(1000^(1/8)) = 2
        assert list(audit["norm"]) == [2]
        assert (tmp_path / "tables" / "occupancy.csv").exists()

    def test_report_hash_is_deterministic(self, tmp_path):
        """Test that reruns of one spec give one hash."""
        first = run_experiment(_small_spec(), tmp_path / "a")
        second = run_experiment(_small_spec(), tmp_path / "b")
        assert first["report_hash"] == second["report_hash"]
        assert report_hash(first) == first["report_hash"]

    def test_failed_expectation(self, tmp_path):
        """Test that an unmet expectation fails the run."""
        report = run_experiment(_small_spec(expect={"outcome": "Structured"}), tmp_path)
        assert not report["passed"]
        assert report["checks"][0]["actual"] == "Small"

    def test_parabola_experiment(self, tmp_path):
        """Test a structured run on y = x^2 + 3x + 1."""
        spec = ExperimentSpec.model_validate({
            "name": "parabola",
            "N": 1003001,
            "mode": "pragmatic",
            "generator": {"kind": "polynomial-image", "polynomials": [[1, 3, 1]], "symmetric": True,
                          "x_bound": 1000},
            "expect": {"outcome": "Structured", "min_fraction": 0.9, "max_degree": 2, "audit_holds": True},
        })
        report = run_experiment(spec, tmp_path)
        assert report["passed"], report["checks"]
        saved = json.loads((tmp_path / "report.json").read_text())
        assert saved["report_hash"] == report["report_hash"]

    def test_stage_failure(self, tmp_path):
        """Test that a domain error stops the run with a failure block."""
        path = tmp_path / "points.json"
        path.write_text(json.dumps([[1, 1]]))
        spec = _small_spec(N=2, generator={"kind": "file", "path": str(path)})
        report = run_experiment(spec, tmp_path / "out")
        assert report["failure"]["stage"] == "audit"
        assert report["failure"]["error"] == "BoundTooSmall"
        assert not report["passed"]

    def test_load_spec(self, tmp_path):
        """Test reading a spec file."""
        path = tmp_path / "spec.json"
        path.write_text(json.dumps({"N": 100, "generator": SQUARES}))
        spec = load_spec(path)
        assert spec.params().Q == 1

    @pytest.mark.parametrize("content", ["{not json", json.dumps({"N": 100}),
                                         json.dumps({"N": 100, "field": "R", "generator": SQUARES}),
                                         json.dumps({"N": 100, "d": 2, "k": 2, "generator": SQUARES}),
                                         json.dumps({"N": "1/0", "generator": SQUARES})])
    def test_load_spec_errors(self, tmp_path, content):
        """Test malformed spec files."""
        path = tmp_path / "spec.json"
        path.write_text(content)
        with pytest.raises(SpecError):
            load_spec(path)
