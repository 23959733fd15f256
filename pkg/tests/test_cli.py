"""Command-line surface: document shape, exit codes, file outputs, and
byte-level determinism of emitted JSON."""

import contextlib
import csv
import io
import json
import warnings

import numpy as np
import pytest

import spinmix
from spinmix.cli import main
from spinmix.config import ExperimentConfig
from spinmix.graphs import read_edgelist


def run_cli(args):
    """In-process invocation; returns (exit_code, stdout_text)."""
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rc = main([str(a) for a in args])
    return rc, buf.getvalue()


def run_json(args):
    rc, out = run_cli(args)
    return rc, json.loads(out)


# ------------------------------------------------------------------ documents

def test_document_envelope_and_sha():
    rc, doc = run_json(["oracle", "--gen", "sbm:8,3,0", "--seed", "5",
                        "--beta", "0.2"])
    assert rc == 0
    assert doc["schema"] == 1
    assert doc["version"] == spinmix.__version__
    cfg = ExperimentConfig.from_dict(doc["config"])
    assert doc["config_sha256"] == cfg.sha256()


def test_oracle_output_is_byte_identical(tmp_path):
    args = ["oracle", "--gen", "sbm:8,3,0.5", "--seed", "5", "--beta", "0.2"]
    rc1, out1 = run_cli(args + ["--out", tmp_path / "a"])
    rc2, out2 = run_cli(args + ["--out", tmp_path / "b"])
    assert rc1 == rc2 == 0
    assert out1 == out2
    fa = (tmp_path / "a" / "oracle.json").read_bytes()
    fb = (tmp_path / "b" / "oracle.json").read_bytes()
    assert fa == fb


def test_oracle_payload_fields():
    rc, doc = run_json(["oracle", "--gen", "sbm:6,3,0", "--seed", "2",
                        "--beta", "0.3", "--field", "0.5", "--mlsi"])
    assert rc == 0
    assert doc["n"] == 6
    assert isinstance(doc["logZ"], float)
    assert len(doc["marginals"]) == 6
    assert len(doc["covariance"]) == 6
    assert 0.0 < doc["spectral_gap"] <= 1.0
    assert doc["mlsi_upper"] > 0.0
    assert doc["mixing_time_bound"] > 0.0


# ------------------------------------------------------------------ generate

def test_generate_writes_edges_and_labels(tmp_path):
    rc, doc = run_json(["generate", "--gen", "sbm:300,4,0.8", "--seed", "11",
                        "--stem", "g", "--out", tmp_path])
    assert rc == 0
    g = read_edgelist(tmp_path / "g.edges")
    assert g.n == doc["n"] == 300
    assert g.m == doc["m"]
    labels = np.loadtxt(tmp_path / "g.labels")
    assert labels.shape == (300,)
    assert set(np.unique(labels)) <= {-1.0, 1.0}
    assert (tmp_path / "g.json").exists()
    assert 0 < doc["negative_edges"] < doc["m"]


def test_generate_plus_signs(tmp_path):
    rc, doc = run_json(["generate", "--gen", "er:200,3", "--seed", "4",
                        "--signs", "plus", "--out", tmp_path])
    assert rc == 0
    assert doc["negative_edges"] == 0


# ----------------------------------------------------------------- decompose

def test_decompose_schema(tmp_path):
    rc, doc = run_json(["decompose", "--gen", "er:2000,5", "--seed", "3",
                        "--epsilon", "0.5", "--out", tmp_path])
    assert rc == 0
    for key in ("ell_histogram", "bulk_max_degree", "components",
                "sum_sq_nontrivial", "delta_observed", "certificate",
                "near_forest", "cluster", "boundary_size"):
        assert key in doc, key
    assert doc["bulk_max_degree"] <= doc["D"]
    assert doc["certificate"]["valid"]
    assert doc["ell_histogram"]["0"] > 0
    for comp in doc["components"]:
        assert set(comp) == {"size", "excess", "diameter"}
    assert doc["bulk_edges"] + doc["excised_edges"] == doc["m"]
    assert (tmp_path / "decompose.json").exists()


def test_decompose_roundtrip_through_file(tmp_path):
    run_cli(["generate", "--gen", "er:500,3", "--seed", "8", "--stem", "g",
             "--out", tmp_path])
    rc_gen, doc_gen = run_json(["decompose", "--gen", "er:500,3", "--seed", "8",
                                "--epsilon", "0.5"])
    rc_file, doc_file = run_json(["decompose", "--input", tmp_path / "g.edges",
                                  "--d", "3", "--seed", "8",
                                  "--epsilon", "0.5"])
    assert rc_gen == rc_file == 0
    # same graph on disk and regenerated: identical structural verdicts
    for key in ("m", "bulk_max_degree", "excised_edges", "delta_observed",
                "ell_histogram", "sum_sq_nontrivial"):
        assert doc_gen[key] == doc_file[key], key


def test_decompose_forced_delta_fails_certificate():
    rc, doc = run_json(["decompose", "--gen", "er:800,5", "--seed", "3",
                        "--epsilon", "0.5", "--delta", "1.0"])
    assert rc == 2
    assert doc["hard_failures"]
    assert not doc["certificate"]["valid"]


def test_decompose_strict_epsilon_floor():
    rc, doc = run_json(["decompose", "--gen", "er:200,5", "--seed", "3",
                        "--epsilon", "0.5", "--strict"])
    assert rc == 2
    assert any("floor" in w for w in doc["hard_failures"])


def test_decompose_needs_exactly_one_source():
    rc, _ = run_cli(["decompose", "--seed", "1", "--epsilon", "0.5"])
    assert rc == 1
    rc, _ = run_cli(["decompose", "--gen", "er:10,2", "--input", "x.edges",
                     "--seed", "1", "--epsilon", "0.5"])
    assert rc == 1


# -------------------------------------------------------------------- sample

def test_sample_trajectory_csv(tmp_path):
    rc, doc = run_json(["sample", "--model", "sbm:50,3,0", "--seed", "4",
                        "--beta", "0.3", "--steps", "400", "--chains", "2",
                        "--stride", "100", "--observe", "mag,energy",
                        "--out", tmp_path])
    assert rc == 0
    assert doc["recorded_points"] == 2 * 5  # steps 0,100,...,400 per chain
    with open(tmp_path / "trajectory.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["chain", "step", "mag", "energy"]
    assert len(rows) == 1 + 10
    steps = [int(r[1]) for r in rows[1:6]]
    assert steps == [0, 100, 200, 300, 400]
    mags = [float(r[2]) for r in rows[1:]]
    assert all(-1.0 <= v <= 1.0 for v in mags)


def test_sample_overlap_requires_labels(tmp_path):
    run_cli(["generate", "--gen", "er:40,3", "--seed", "2", "--stem", "g",
             "--out", tmp_path])
    rc, _ = run_cli(["sample", "--model", tmp_path / "g.edges", "--seed", "2",
                     "--beta", "0.2", "--steps", "50", "--observe", "overlap"])
    assert rc == 1


def test_sample_rejects_unknown_observer():
    rc, _ = run_cli(["sample", "--model", "sbm:10,2,0", "--seed", "1",
                     "--beta", "0.1", "--steps", "10", "--observe", "wat"])
    assert rc == 1


# ------------------------------------------------------------------- spectra

def test_spectra_bulk_check_shape():
    rc, doc = run_json(["spectra", "--gen", "er:2000,5", "--seed", "7",
                        "--what", "bulk", "--epsilon", "0.5"])
    assert rc == 0
    for key in ("value", "bound", "pass", "iterations", "converged"):
        assert key in doc, key
    assert doc["value"] <= doc["bound"]
    assert doc["bulk_status"] in ("pass", "warn")


def test_spectra_bethe_on_generated_tree(tmp_path):
    # a path graph is a tree; feed it through the file input
    edges = "\n".join(f"{i} {i + 1} 1.0" for i in range(30))
    p = tmp_path / "path.edges"
    p.write_text(f"31 30\n{edges}\n")
    rc, doc = run_json(["spectra", "--input", p, "--what", "bethe",
                        "--t", "0.4", "--seed", "1"])
    assert rc == 0
    assert doc["pass"] and doc["value"] <= 1e-8
    assert doc["min_eigenvalue"] > 0.0
    rc2, doc2 = run_json(["spectra", "--input", p,
                          "--what", "nonbacktracking", "--seed", "1"])
    assert rc2 == 0
    assert doc2["value"] == 30  # longest arc walk along the path


def test_spectra_distance_norms():
    rc, doc = run_json(["spectra", "--gen", "er:1000,5", "--seed", "9",
                        "--what", "distance", "--epsilon", "0.5"])
    assert rc == 0
    assert doc["hard_failures"] == []


# ------------------------------------------------------------------ localize

def test_localize_exact_payload(tmp_path):
    rc, doc = run_json(["localize", "--model", "sbm:8,3,0", "--seed", "3",
                        "--beta", "0.1", "--delta", "0.02",
                        "--t-grid", "0,0.5,1", "--probes", "2",
                        "--draws", "60000", "--paths", "400",
                        "--sde-steps", "100", "--out", tmp_path])
    assert rc == 0
    assert doc["hard_failures"] == []
    assert doc["mode"] == "exact"
    assert doc["hs_covariance_residual"] <= doc["hs_tolerance"]
    assert doc["mixture"]["passed"]
    assert doc["mixture_residual"] < 0.01
    assert doc["martingale"]["deviation"] <= doc["martingale"]["tolerance"]
    assert doc["control_matrix"]["condition_ok"]
    assert doc["control_matrix"]["min_eigenvalue"] > 0.0
    assert set(doc["per_t"]) == {"0.0", "0.5", "1.0"}
    for rec in doc["per_t"].values():
        assert rec["psd_pass"] and rec["norm"] >= 0.0
    assert doc["path"]["psd_all_pass"]
    assert (tmp_path / "localize.json").exists()


def test_localize_control_matrix_file(tmp_path):
    C = 2.0 * np.eye(8)
    cpath = tmp_path / "control.txt"
    np.savetxt(cpath, C)
    rc, doc = run_json(["localize", "--model", "sbm:8,3,0", "--seed", "3",
                        "--beta", "0.1", "--delta", "0.02", "--control", cpath,
                        "--t-grid", "0,1", "--probes", "1",
                        "--draws", "60000", "--paths", "300",
                        "--sde-steps", "100"])
    assert rc == 0
    assert doc["control_file"] == str(cpath)
    assert "c_shift" not in doc


def test_localize_mc_mode_skips_oracle_checks():
    rc, doc = run_json(["localize", "--model", "sbm:30,3,0", "--seed", "6",
                        "--beta", "0.1", "--delta", "0.02", "--mode", "mc",
                        "--t-grid", "0,1", "--probes", "1"])
    assert rc == 0
    assert doc["mixture_residual"] is None
    assert doc["note"].startswith("oracle checks skipped")
    assert doc["path"]["mode"] == "mc"


def test_localize_size_cap():
    rc, _ = run_cli(["localize", "--model", "sbm:30,3,0", "--seed", "1",
                     "--beta", "0.1"])
    assert rc == 1  # exact mode refuses n > 20


# -------------------------------------------------------------------- report

def test_report_quick_suite(tmp_path):
    rc, doc = run_json(["report", "--suite", "quick", "--seed", "9",
                        "--out", tmp_path])
    assert rc == 0
    assert doc["hard_failures"] == []
    for name in ("report.json", "mixing_curves.csv", "tails.csv",
                 "components.csv"):
        assert (tmp_path / name).exists(), name
    assert doc["decomposition_stats"]["certificate"]["valid"]
    assert doc["spectral_verdicts"]["bulk_status"] in ("pass", "warn")
    assert doc["mixing"]["runs"]["fast"]["all_mixed"]
    assert doc["mixing"]["contrast_ok"]


# --------------------------------------------------------- common exit codes

def test_unknown_command_and_flags_are_usage_errors():
    assert run_cli(["frobnicate"])[0] == 1
    assert run_cli(["oracle", "--gen", "sbm:4,2,0", "--seed", "1",
                    "--beta", "0.1", "--wat"])[0] == 1
    assert run_cli(["oracle", "--gen", "ring:4", "--seed", "1",
                    "--beta", "0.1"])[0] == 1  # bad generator spec


def test_out_dir_env_fallback_and_flag_precedence(tmp_path, monkeypatch):
    envdir = tmp_path / "envout"
    flagdir = tmp_path / "flagout"
    monkeypatch.setenv("SPINMIX_OUT_DIR", str(envdir))
    rc, _ = run_cli(["oracle", "--gen", "sbm:6,3,0", "--seed", "1",
                     "--beta", "0.1"])
    assert rc == 0
    assert (envdir / "oracle.json").exists()
    rc, _ = run_cli(["oracle", "--gen", "sbm:6,3,0", "--seed", "1",
                     "--beta", "0.1", "--out", flagdir])
    assert rc == 0
    assert (flagdir / "oracle.json").exists()
    assert not (envdir / "oracle.json").read_text() == ""  # untouched, still there
    monkeypatch.delenv("SPINMIX_OUT_DIR")
    rc, _ = run_cli(["oracle", "--gen", "sbm:6,3,0", "--seed", "1",
                     "--beta", "0.1"])
    assert rc == 0  # stdout only, no directory required
