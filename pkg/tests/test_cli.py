"""Command-line front-end tests: exit codes, artifact determinism, report
shapes, and the scenario-file schema."""

import csv
import json
import math
from pathlib import Path

import pytest

from nflfed import cli

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def write(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=1), encoding="utf-8")
    return str(path)


def federation_doc(**overrides):
    doc = {
        "schema_version": "1",
        "kind": "federation",
        "topology": {"kind": "hfl", "clients": 2},
        "model": {"kind": "linear-regression", "dim": 3},
        "data": {"kind": "regression", "num_samples": 32, "dim": 3},
        "mechanism": {"kind": "randomization", "sigma_eps": 0.05},
        "rounds": 3,
        "lr": 0.1,
        "master_seed": 11,
        "holdout": 32,
    }
    doc.update(overrides)
    return doc


def discrete_doc(**overrides):
    doc = {
        "schema_version": "1",
        "kind": "discrete",
        "clients": [
            {
                "prior": {"atoms": [0, 1], "mass": [0.5, 0.5]},
                "release": [
                    [0, {"atoms": [-1.0, 0.0, 1.0], "mass": [0.7, 0.2, 0.1]}],
                    [1, {"atoms": [-1.0, 0.0, 1.0], "mass": [0.1, 0.2, 0.7]}],
                ],
                "true_data": 0,
            }
        ],
        "channel": {"kind": "identity"},
        "utility": {"kind": "quadratic", "center": -1.0},
        "cost": {"kind": "code-length", "client": 0, "datum": 0},
        "dims": {"m": 1, "sigmas": [0.5], "half_width": 1.0},
    }
    doc.update(overrides)
    return doc


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    return header, [dict(zip(header, row)) for row in rows[1:]]


# ---------------------------------------------------------------------------
# exit-code contract
# ---------------------------------------------------------------------------


def test_missing_mechanism_names_the_field(tmp_path, capsys):
    doc = federation_doc()
    del doc["mechanism"]
    code = cli.main(["simulate", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)])
    assert code == 2
    assert "mechanism" in capsys.readouterr().err


def test_unreadable_and_invalid_files(tmp_path, capsys):
    assert cli.main(["simulate", "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert cli.main(["simulate", "--scenario", str(bad), "--out", str(tmp_path)]) == 2
    capsys.readouterr()


def test_schema_version_and_kind_checked(tmp_path, capsys):
    assert (
        cli.main([
            "simulate", "--scenario",
            write(tmp_path, federation_doc(schema_version="2")),
            "--out", str(tmp_path),
        ])
        == 2
    )
    assert (
        cli.main([
            "simulate", "--scenario",
            write(tmp_path, discrete_doc(), "d.json"),
            "--out", str(tmp_path),
        ])
        == 2
    )
    err = capsys.readouterr().err
    assert "schema_version" in err and "kind" in err


def test_bad_field_values_exit_2(tmp_path, capsys):
    doc = federation_doc(mechanism={"kind": "randomization", "sigma_eps": -1.0})
    assert cli.main(["simulate", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)]) == 2
    assert "sigma_eps" in capsys.readouterr().err
    doc = federation_doc(mechanism={"kind": "teleport"})
    assert cli.main(["simulate", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)]) == 2
    assert "mechanism.kind" in capsys.readouterr().err


def test_runtime_failure_exits_3(tmp_path, capsys):
    doc = federation_doc(rounds=90, lr=50.0)
    code = cli.main(["simulate", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)])
    assert code == 3
    assert "loss" in capsys.readouterr().err


def test_infeasible_grid_exits_3(tmp_path, capsys):
    doc = discrete_doc(
        optimize={"grid": [{"kind": "identity"}], "chi": 0.0}
    )
    code = cli.main(["optimize", "--scenario", write(tmp_path, doc), "--out", str(tmp_path)])
    assert code == 3
    capsys.readouterr()


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def test_simulate_reruns_are_byte_identical(tmp_path):
    scenario = write(tmp_path, federation_doc())
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--scenario", scenario, "--out", str(a)]) == 0
    assert cli.main(["simulate", "--scenario", scenario, "--out", str(b)]) == 0
    assert (a / "trace.json").read_bytes() == (b / "trace.json").read_bytes()
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()


def test_seed_override_changes_content_not_schema(tmp_path):
    scenario = write(tmp_path, federation_doc())
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--scenario", scenario, "--out", str(a)]) == 0
    assert cli.main(["simulate", "--scenario", scenario, "--out", str(b), "--seed", "999"]) == 0
    da = json.loads((a / "trace.json").read_text())
    db = json.loads((b / "trace.json").read_text())
    assert da["final_state"] != db["final_state"]
    assert set(da) == set(db)
    assert set(da["rounds"][0]) == set(db["rounds"][0])
    assert set(da["rounds"][0]["messages"][0]) == set(db["rounds"][0]["messages"][0])


def test_simulate_artifacts_and_manifest(tmp_path):
    scenario = write(tmp_path, federation_doc())
    out = tmp_path / "out"
    assert cli.main(["simulate", "--scenario", scenario, "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["schema_version"] == "1"
    assert manifest["command"] == "simulate"
    assert sorted(manifest["outputs"]) == ["trace.csv", "trace.json"]
    assert len(manifest["config_hash"]) == 64
    trace = json.loads((out / "trace.json").read_text())
    assert trace["schema_version"] == "1"
    assert len(trace["rounds"]) == 3
    header, rows = read_csv(out / "trace.csv")
    assert header == ["round", "train_loss", "holdout_loss", "messages", "bits"]
    assert len(rows) == 3


def test_config_hash_ignores_formatting(tmp_path):
    doc = federation_doc()
    a = write(tmp_path, doc, "a.json")
    pretty = tmp_path / "b.json"
    pretty.write_text(json.dumps(doc, indent=4, sort_keys=True), encoding="utf-8")
    out_a, out_b = tmp_path / "oa", tmp_path / "ob"
    assert cli.main(["simulate", "--scenario", a, "--out", str(out_a)]) == 0
    assert cli.main(["simulate", "--scenario", str(pretty), "--out", str(out_b)]) == 0
    ha = json.loads((out_a / "manifest.json").read_text())["config_hash"]
    hb = json.loads((out_b / "manifest.json").read_text())["config_hash"]
    assert ha == hb


def test_format_flag_selects_artifacts(tmp_path):
    scenario = write(tmp_path, federation_doc())
    oj, oc = tmp_path / "j", tmp_path / "c"
    assert cli.main(["simulate", "--scenario", scenario, "--out", str(oj), "--format", "json"]) == 0
    assert (oj / "trace.json").exists() and not (oj / "trace.csv").exists()
    assert cli.main(["simulate", "--scenario", scenario, "--out", str(oc), "--format", "csv"]) == 0
    assert (oc / "trace.csv").exists() and not (oc / "trace.json").exists()
    assert (oc / "manifest.json").exists()


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def test_bounds_compression_sweep_rows_and_monotonicity(tmp_path):
    sweep = [
        {"kind": "compression", "rho": [round(0.1 * i, 1)]} for i in range(1, 11)
    ]
    doc = discrete_doc(sweep=sweep)
    out = tmp_path / "out"
    assert cli.main(["bounds", "--scenario", write(tmp_path, doc), "--out", str(out)]) == 0
    header, rows = read_csv(out / "bounds.csv")
    assert len(rows) == 10
    bounds = [float(r["bound_privacy"]) for r in rows]
    assert all(b2 >= b1 for b1, b2 in zip(bounds, bounds[1:]))


def test_bounds_identity_and_sharing_rows(tmp_path):
    doc = discrete_doc(
        sweep=[
            {"kind": "identity"},
            {"kind": "secret-sharing", "num_shares": 2, "b": [1.0], "r": [1.0]},
        ]
    )
    out = tmp_path / "out"
    assert cli.main(["bounds", "--scenario", write(tmp_path, doc), "--out", str(out)]) == 0
    header, rows = read_csv(out / "bounds.csv")
    identity, sharing = rows
    assert float(identity["bound_utility"]) == 0.0
    assert float(identity["bound_efficiency"]) == 0.0
    assert sharing["bound_efficiency"] == "NA"
    doc_json = json.loads((out / "bounds.json").read_text())
    assert doc_json["rows"][1]["report"]["mechanism_bounds"]["efficiency"]["status"] == "NotApplicable"


def test_bounds_randomization_sweep_rechannels(tmp_path):
    doc = discrete_doc(
        sweep=[
            {"kind": "randomization", "sigma_eps": 0.3},
            {"kind": "randomization", "sigma_eps": 1.5},
        ]
    )
    out = tmp_path / "out"
    assert cli.main(["bounds", "--scenario", write(tmp_path, doc), "--out", str(out)]) == 0
    _, rows = read_csv(out / "bounds.csv")
    # heavier channel noise leaks less: measured epsilon_p must drop
    assert float(rows[1]["epsilon_p"]) < float(rows[0]["epsilon_p"])


def test_bounds_needs_discrete_scenario(tmp_path, capsys):
    code = cli.main([
        "bounds", "--scenario", write(tmp_path, federation_doc()), "--out", str(tmp_path),
    ])
    assert code == 2
    assert "kind" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# attack
# ---------------------------------------------------------------------------


def vfl_doc(sigma=None, **overrides):
    mech = {"kind": "identity"} if sigma is None else {"kind": "randomization", "sigma_eps": sigma}
    doc = {
        "schema_version": "1",
        "kind": "federation",
        "topology": {"kind": "vfl", "split_dim": 3, "top_hidden": None},
        "model": {"kind": "softmax-linear", "dim": 6, "num_classes": 10},
        "data": {"kind": "classification", "num_samples": 150, "dim": 6, "num_classes": 10},
        "mechanism": mech,
        "rounds": 2,
        "lr": 0.2,
        "master_seed": 404,
        "holdout": 64,
        "attack": {"kind": "direct-label-inference"},
    }
    doc.update(overrides)
    return doc


def test_attack_unprotected_recovers_everything(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["attack", "--scenario", write(tmp_path, vfl_doc()), "--out", str(out)]) == 0
    doc = json.loads((out / "attack.json").read_text())
    assert doc["overall"]["success_rate"] == 1.0
    assert all(r["success_rate"] == 1.0 for r in doc["rounds"])
    assert doc["epsilon_p_estimate"] > 0.5
    header, rows = read_csv(out / "attack.csv")
    assert header == ["round", "success_rate", "correct", "total"]
    assert len(rows) == 2


def test_attack_heavy_noise_breaks_recovery(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["attack", "--scenario", write(tmp_path, vfl_doc(sigma=10.0)), "--out", str(out)]) == 0
    doc = json.loads((out / "attack.json").read_text())
    clean_out = tmp_path / "clean"
    cli.main(["attack", "--scenario", write(tmp_path, vfl_doc(), "c.json"), "--out", str(clean_out)])
    clean = json.loads((clean_out / "attack.json").read_text())
    assert doc["overall"]["success_rate"] < 0.5
    assert doc["epsilon_p_estimate"] < clean["epsilon_p_estimate"]


def test_attack_norm_scoring_runs(tmp_path):
    doc = vfl_doc(
        topology={"kind": "vfl", "split_dim": 3, "top_hidden": 4},
        model={"kind": "softmax-linear", "dim": 6, "num_classes": 2},
        data={
            "kind": "classification", "num_samples": 150, "dim": 6,
            "num_classes": 2, "class_balance": [0.85, 0.15],
        },
        attack={"kind": "norm-scoring", "labels_known_fraction": 0.2},
    )
    out = tmp_path / "out"
    assert cli.main(["attack", "--scenario", write(tmp_path, doc), "--out", str(out)]) == 0
    report = json.loads((out / "attack.json").read_text())
    assert 0.0 <= report["overall"]["success_rate"] <= 1.0
    assert report["attack"]["labels_known_fraction"] == 0.2


def test_attack_config_errors(tmp_path, capsys):
    assert cli.main([
        "attack", "--scenario",
        write(tmp_path, vfl_doc(attack={"kind": "tea-leaves"})),
        "--out", str(tmp_path),
    ]) == 2
    assert "attack.kind" in capsys.readouterr().err
    assert cli.main([
        "attack", "--scenario",
        write(tmp_path, federation_doc(attack={"kind": "direct-label-inference"}), "h.json"),
        "--out", str(tmp_path),
    ]) == 2
    assert "vertical" in capsys.readouterr().err
    split = vfl_doc(topology={"kind": "vfl", "split_dim": 3, "top_hidden": 4})
    split["model"] = {"kind": "softmax-linear", "dim": 6, "num_classes": 2}
    split["data"]["num_classes"] = 2
    assert cli.main([
        "attack", "--scenario", write(tmp_path, split, "s.json"), "--out", str(tmp_path),
    ]) == 2
    assert "partial-logit-sum" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# verify-nfl and optimize
# ---------------------------------------------------------------------------


def test_verify_nfl_identity_equality(tmp_path):
    out = tmp_path / "out"
    assert cli.main([
        "verify-nfl", "--scenario", write(tmp_path, discrete_doc()), "--out", str(out),
    ]) == 0
    doc = json.loads((out / "nfl.json").read_text())
    assert doc["violated"] == []
    for check in doc["checks"]:
        assert check["satisfied"] is True
        assert abs(check["margin"]) <= 1e-9
    for key in ("epsilon_p", "epsilon_u", "epsilon_e"):
        assert doc["measured"][key]["stderr"] == 0.0
    assert any("exact enumeration" in n for n in doc["notes"])
    header, rows = read_csv(out / "nfl.csv")
    assert rows[0]["violated"] == ""
    assert rows[0]["replicates"] == "20"


def test_verify_nfl_randomized_channel_holds(tmp_path):
    doc = discrete_doc(channel={"kind": "randomization", "sigma_eps": 0.8})
    out = tmp_path / "out"
    assert cli.main(["verify-nfl", "--scenario", write(tmp_path, doc), "--out", str(out)]) == 0
    report = json.loads((out / "nfl.json").read_text())
    assert report["violated"] == []
    checked = [c for c in report["checks"] if c["status"] == "checked"]
    assert checked and all(c["satisfied"] for c in checked)


def test_optimize_matches_library_search(tmp_path):
    grid = [{"kind": "identity"}] + [
        {"kind": "randomization", "sigma_eps": 0.25 * i} for i in range(1, 8)
    ]
    doc = discrete_doc(
        channel={"kind": "randomization", "sigma_eps": 0.8},
        optimize={"grid": grid, "eta_u": 1.0, "eta_e": 1.0, "chi": 0.12},
    )
    out = tmp_path / "out"
    assert cli.main(["optimize", "--scenario", write(tmp_path, doc), "--out", str(out)]) == 0
    report = json.loads((out / "optimize.json").read_text())
    feasible = [e for e in report["evaluations"] if e["feasible"]]
    assert feasible and len(feasible) < len(grid)
    best = min(feasible, key=lambda e: e["objective"])
    assert report["best_index"] == best["index"]
    assert math.isclose(report["objective"], best["objective"], rel_tol=1e-9)
    header, rows = read_csv(out / "optimize.csv")
    assert sum(1 for r in rows if r["best"] == "true") == 1


# ---------------------------------------------------------------------------
# bundled scenarios stay valid
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "name,command",
    [
        ("hfl_small.json", "simulate"),
        ("hfl_secret_sharing.json", "simulate"),
        ("hfl_paillier.json", "simulate"),
        ("vfl_label_attack.json", "attack"),
        ("discrete_nfl.json", "bounds"),
        ("discrete_nfl.json", "verify-nfl"),
        ("discrete_nfl.json", "optimize"),
    ],
)
def test_bundled_scenarios_run(tmp_path, name, command):
    assert cli.main([
        command, "--scenario", str(SCENARIOS / name), "--out", str(tmp_path),
    ]) == 0
    assert (tmp_path / "manifest.json").exists()
