"""
End-to-end tests for the wrenchlab command line
"""

import csv
import io
import json
import logging

import numpy as np
import pytest

import src.cli as cli
import src.linprog as lp_module
from src.cli import EXIT_ERROR, EXIT_NOT_FORCE_CLOSURE, EXIT_OK, main
from tests.helpers.grasp_factory import (
    contact_spec_document,
    cross_polytope,
    ring_grasp,
    shifted_set,
    synth_problem_document,
    write_json,
    write_wrench_csv,
)


FAST_PONG = {"n_dirs": 6, "quad_nodes": 8}


@pytest.fixture(autouse=True)
def isolated_cli(temp_settings):
    """Temporary settings file and a restored root logger around every run."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cross_csv(tmp_path):
    return str(write_wrench_csv(tmp_path / "cross.csv", cross_polytope().points))


@pytest.fixture
def ring_json(tmp_path):
    contacts, model = ring_grasp(n_fingers=3)
    return str(write_json(tmp_path / "ring.json", contact_spec_document(contacts, model, pong=FAST_PONG)))


@pytest.fixture
def synth_json(tmp_path):
    doc = synth_problem_document(field={"kind": "constant", "value": 1e-3}, pong=FAST_PONG)
    return str(write_json(tmp_path / "problem.json", doc))


class TestGlobal:

    def test_no_command(self, capsys):
        code, out, err = run(capsys)
        assert code == EXIT_ERROR
        assert out == ""
        assert "usage" in err

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0


class TestMetrics:

    def test_cross_polytope_csv(self, capsys, cross_csv):
        code, out, _ = run(capsys, "metrics", cross_csv)
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["force_closure"] is True
        assert doc["epsilon"] == pytest.approx(0.4082483, abs=1e-7)
        assert doc["delta"] == pytest.approx(0.4082483, abs=1e-7)
        assert doc["l_star"] == pytest.approx(1.0 / 12.0, abs=1e-9)
        assert doc["l_star_normalized"] == pytest.approx(1.0, abs=1e-9)
        assert doc["bound_holds"] is True
        assert out.endswith("}\n")

    def test_not_force_closure_exit_code(self, capsys, tmp_path):
        path = write_wrench_csv(tmp_path / "shifted.csv", shifted_set().points)
        code, out, _ = run(capsys, "metrics", str(path))
        assert code == EXIT_NOT_FORCE_CLOSURE
        doc = json.loads(out)
        assert doc["force_closure"] is False
        assert doc["epsilon"] is None

    def test_identical_bytes(self, capsys, cross_csv):
        _, first, _ = run(capsys, "metrics", cross_csv)
        _, second, _ = run(capsys, "metrics", cross_csv)
        assert first == second

    def test_missing_file(self, capsys, tmp_path):
        code, out, err = run(capsys, "metrics", str(tmp_path / "nope.json"))
        assert code == EXIT_ERROR
        assert out == ""
        assert "cannot read" in err

    def test_malformed_csv(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("fx,fy,fz,tx,ty,tz\n1,2,3,4,5,x\n", encoding="utf-8")
        code, out, err = run(capsys, "metrics", str(path))
        assert code == EXIT_ERROR
        assert "non-numeric" in err

    def test_contact_spec_with_pong_and_mc(self, capsys, ring_json):
        code, out, _ = run(capsys, "metrics", ring_json, "--pong", "--mc", "1000", "--seed", "3")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert 0.0 < doc["L_FC"] <= 1.0
        assert doc["mc_estimate"]["n_samples"] == 1000
        assert doc["n_w"] == 12

    def test_csv_with_pong_warns(self, capsys, cross_csv):
        code, out, _ = run(capsys, "metrics", cross_csv, "--pong")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert "L_FC" not in doc
        assert any("contact spec" in w for w in doc["warnings"])


class TestVerify:

    def test_zero_trials_is_a_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "bound", "--trials", "0"])
        assert exc.value.code == 2

    def test_unknown_theorem(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "riemann"])
        assert exc.value.code == 2

    @pytest.mark.parametrize("theorem", ["containment", "ball", "bound", "duality"])
    def test_small_corpus_passes(self, capsys, theorem):
        code, out, _ = run(capsys, "verify", theorem, "--trials", "5", "--seed", "11")
        doc = json.loads(out)
        assert code == EXIT_OK
        assert doc["theorem"] == theorem
        assert (doc["passed"], doc["failed"], doc["errors"]) == (5, 0, 0)
        assert doc["counterexample"] is None

    def test_fixed_wrench_count(self, capsys):
        code, out, _ = run(capsys, "verify", "duality", "--trials", "3", "--n-w", "12")
        assert code == EXIT_OK
        assert json.loads(out)["passed"] == 3

    def test_pong_against_monte_carlo(self, capsys, temp_settings):
        temp_settings.set("pong", "n_dirs", 6)
        temp_settings.set("pong", "quad_nodes", 8)
        temp_settings.save()
        code, out, _ = run(capsys, "verify", "pong", "--trials", "2", "--mc", "1000")
        assert code == EXIT_OK
        assert json.loads(out)["passed"] == 2

    def test_deterministic(self, capsys):
        _, first, _ = run(capsys, "verify", "bound", "--trials", "3", "--seed", "5")
        _, second, _ = run(capsys, "verify", "bound", "--trials", "3", "--seed", "5")
        assert first == second

    def test_failure_reports_counterexample(self, capsys, monkeypatch):
        monkeypatch.setitem(cli.THEOREMS, "bound", lambda seed, rng, args: (False, {"why": "forced"}))
        code, out, _ = run(capsys, "verify", "bound", "--trials", "2")
        doc = json.loads(out)
        assert code == EXIT_ERROR
        assert doc["failed"] == 2
        assert doc["counterexample"]["why"] == "forced"
        assert doc["counterexample"]["trial"] == 0

    def test_trial_errors_fail_the_run(self, capsys, monkeypatch):
        def broken(seed, rng, args):
            raise ValueError("broken trial")

        monkeypatch.setitem(cli.THEOREMS, "duality", broken)
        code, out, _ = run(capsys, "verify", "duality", "--trials", "1")
        assert code == EXIT_ERROR
        assert json.loads(out)["errors"] == 1

    def test_trials_from_settings(self, capsys, temp_settings):
        temp_settings.set("verify", "trials", 2)
        temp_settings.save()
        _, out, _ = run(capsys, "verify", "duality")
        assert json.loads(out)["trials"] == 2

    @pytest.mark.slow
    @pytest.mark.parametrize("theorem", ["containment", "ball"])
    def test_acceptance_corpus(self, capsys, theorem):
        code, out, _ = run(capsys, "verify", theorem, "--trials", "1000", "--seed", "0")
        assert code == EXIT_OK
        assert json.loads(out)["failed"] == 0

    @pytest.mark.slow
    def test_acceptance_bound_corpus(self, capsys):
        code, out, _ = run(capsys, "verify", "bound", "--trials", "500", "--seed", "0")
        assert code == EXIT_OK
        assert json.loads(out)["passed"] == 500


class TestPong:

    def test_without_monte_carlo(self, capsys, ring_json):
        code, out, _ = run(capsys, "pong", ring_json, "--mc", "0")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert "mc_estimate" not in doc
        assert doc["mean_force_closure"] is True
        assert len(doc["fingers"]) == 3
        assert len(doc["fingers"][0]["thetas"]) == FAST_PONG["n_dirs"]
        assert doc["L_FC"] == pytest.approx(np.prod([f["integral"] for f in doc["fingers"]]))
        assert doc["warnings"] == []

    def test_with_monte_carlo(self, capsys, ring_json):
        code, out, _ = run(capsys, "pong", ring_json, "--mc", "1000", "--seed", "2")
        doc = json.loads(out)
        assert code == EXIT_OK
        assert doc["L_FC"] <= doc["mc_estimate"]["p_hat"] + 3 * doc["mc_estimate"]["std_err"]

    def test_mc_section_in_document(self, capsys, tmp_path):
        contacts, model = ring_grasp(n_fingers=3)
        path = write_json(tmp_path / "p.json", contact_spec_document(contacts, model, pong=FAST_PONG, mc=1000))
        _, out, _ = run(capsys, "pong", str(path))
        assert json.loads(out)["mc_estimate"]["n_samples"] == 1000

    def test_not_force_closure(self, capsys, tmp_path):
        contacts, model = ring_grasp(n_fingers=2)
        path = write_json(tmp_path / "two.json", contact_spec_document(contacts, model, pong=FAST_PONG))
        code, out, _ = run(capsys, "pong", str(path), "--mc", "0")
        doc = json.loads(out)
        assert code == EXIT_OK
        assert doc["L_FC"] == 0.0
        assert any("not force closure" in w for w in doc["warnings"])

    def test_bad_pong_section(self, capsys, tmp_path):
        contacts, model = ring_grasp(n_fingers=3)
        path = write_json(tmp_path / "bad.json", contact_spec_document(contacts, model, pong={"n_dirs": 1}))
        code, out, err = run(capsys, "pong", str(path), "--mc", "0")
        assert code == EXIT_ERROR
        assert out == ""

    def test_identical_bytes(self, capsys, ring_json):
        _, first, _ = run(capsys, "pong", ring_json, "--mc", "0")
        _, second, _ = run(capsys, "pong", ring_json, "--mc", "0")
        assert first == second


class TestSynth:

    def test_single_run(self, capsys, synth_json):
        code, out, _ = run(capsys, "synth", synth_json, "--seed", "1", "--max-iters", "1")
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["seed"] == 1
        assert doc["objective"] == "lfc"
        assert len(doc["contacts"]) == 3
        assert doc["metric_value"] > 0.0

    def test_sweep_of_one_matches_single_run(self, capsys, synth_json):
        _, single, _ = run(capsys, "synth", synth_json, "--seed", "4", "--max-iters", "1")
        _, table, _ = run(capsys, "synth", synth_json, "--seed", "4", "--max-iters", "1", "--sweep", "1", "--mc", "0")
        contacts = json.loads(single)["contacts"]
        row = next(csv.DictReader(io.StringIO(table)))
        swept = [[float(row[f"x{i}_{axis}"]) for axis in "xyz"] for i in range(3)]
        assert swept == contacts
        assert row["seed"] == "4"

    def test_sweep_to_file(self, capsys, synth_json, tmp_path):
        out_path = tmp_path / "runs" / "sweep.csv"
        args = ("synth", synth_json, "--sweep", "2", "--max-iters", "1", "--mc", "0", "--out", str(out_path))
        code, out, _ = run(capsys, *args)
        assert code == EXIT_OK
        assert out == ""
        first = out_path.read_bytes()
        assert len(first.decode("utf-8").splitlines()) == 3

        run(capsys, *args)
        assert out_path.read_bytes() == first

    def test_problem_wrapper(self, capsys, tmp_path):
        doc = {"schema": 1, "problem": synth_problem_document(field={"kind": "constant", "value": 1e-3},
                                                             pong=FAST_PONG)}
        path = write_json(tmp_path / "wrapped.json", doc)
        code, _, _ = run(capsys, "synth", str(path), "--max-iters", "1")
        assert code == EXIT_OK

    def test_invalid_problem(self, capsys, tmp_path):
        path = write_json(tmp_path / "bad.json", {"schema": 1, "field": {"kind": "polar"}})
        code, out, err = run(capsys, "synth", str(path))
        assert code == EXIT_ERROR
        assert "surface" in err


def test_bench(capsys):
    code, out, _ = run(capsys, "bench", "--instances", "1", "--dirs", "3", "--workers", "1")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["lps"] == 3 * 3 * 4
    assert doc["workers"] == 1


class TestSettingsWiring:

    def test_tol_feas_reaches_the_solver(self, capsys, cross_csv, temp_settings, monkeypatch):
        monkeypatch.setattr(lp_module, "_default_tol_feas", lp_module.TOL_FEAS)
        temp_settings.set("lp", "tol_feas", 1e-6)
        assert temp_settings.save()
        code, _, _ = run(capsys, "metrics", cross_csv)
        assert code == EXIT_OK
        assert lp_module.default_tol_feas() == 1e-6

    def test_min_separation_default(self, temp_settings):
        temp_settings.set("synth", "min_separation", 0.03)
        doc = synth_problem_document(field={"kind": "constant", "value": 1e-3}, pong=FAST_PONG)
        assert cli._synth_problem(doc, temp_settings).min_separation == 0.03
        assert cli._synth_problem({"problem": doc}, temp_settings).min_separation == 0.03

    def test_document_separation_wins(self, temp_settings):
        temp_settings.set("synth", "min_separation", 0.03)
        doc = synth_problem_document(min_separation=0.01)
        assert cli._synth_problem(doc, temp_settings).min_separation == 0.01
        assert "min_separation" not in synth_problem_document()
