"""Command-line surface: every subcommand, every exit-code class.

Exit codes are the contract: 0 success, 1 failed check or refused
operation, 2 usage, config, or IO fault. One module-scoped workspace is
built entirely through the CLI so the commands are tested against each
other's outputs, not against internals.
"""

import io
import json
from types import SimpleNamespace

import numpy as np
import pytest

from dbomkit.canonical import digest
from dbomkit.cli import main
from dbomkit.envelope import measurement_digest

from conftest import make_train_config_doc


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return SimpleNamespace(code=code, out=captured.out, err=captured.err)


@pytest.fixture(scope="module")
def cliws(tmp_path_factory, dataset_rows):
    """dataset -> cas init -> train --allow -> infer --allow, all via argv."""
    root = tmp_path_factory.mktemp("cliws")
    csv = root / "data.csv"
    authority = root / "authority"
    config = root / "train.json"
    ibom = root / "ibom.envelope.json"
    features_file = root / "features.json"

    assert main(["dataset", "--out", str(csv)]) == 0
    assert main(["cas", "init", "--authority-dir", str(authority)]) == 0

    config.write_text(json.dumps(make_train_config_doc(csv, root / "out")))
    assert main([
        "train", "--config", str(config), "--authority-dir", str(authority), "--allow",
    ]) == 0

    model = root / "out" / "model.json"
    tbom = root / "out" / "tbom.envelope.json"
    assert model.exists() and tbom.exists()

    _, features = dataset_rows[0]
    features_file.write_text(json.dumps(features))
    assert main([
        "infer",
        "--model", str(model),
        "--tbom", str(tbom),
        "--authority-dir", str(authority),
        "--input", str(features_file),
        "--out", str(ibom),
        "--allow",
    ]) == 0
    assert ibom.exists()

    return SimpleNamespace(
        root=root, csv=csv, authority=authority, config=config,
        model=model, tbom=tbom, ibom=ibom, features_file=features_file,
    )


# -- dataset / cas ------------------------------------------------------------


def test_dataset_json_output(tmp_path, capsys):
    out = tmp_path / "d.csv"
    r = run_cli(capsys, "dataset", "--out", str(out), "--json")
    assert r.code == 0
    doc = json.loads(r.out)
    assert doc["digest"] == digest(out.read_bytes()).hex


def test_cas_init_refuses_to_clobber(tmp_path, capsys):
    d = tmp_path / "authority"
    assert run_cli(capsys, "cas", "init", "--authority-dir", str(d)).code == 0
    r = run_cli(capsys, "cas", "init", "--authority-dir", str(d))
    assert r.code == 2
    assert "already present" in r.err


def test_cas_measure_matches_library(cliws, capsys):
    r = run_cli(capsys, "cas", "measure", "--config", str(cliws.config), "--pipeline-id", "training")
    assert r.code == 0
    expected = measurement_digest(cliws.config.read_bytes(), "training")
    assert r.out.strip() == expected.hex


def test_cas_allow_needs_a_measurement_source(cliws, capsys):
    r = run_cli(capsys, "cas", "allow", "--authority-dir", str(cliws.authority))
    assert r.code == 2
    assert "--measurement or --config" in r.err


def test_cas_issue_reports_role(cliws, capsys):
    r = run_cli(
        capsys, "cas", "issue", "--authority-dir", str(cliws.authority),
        "--config", str(cliws.config), "--pipeline-id", "training",
        "--role", "auditor", "--json",
    )
    assert r.code == 0
    doc = json.loads(r.out)
    assert doc["role_identity"] == "auditor"
    assert len(doc["keyid"]) == 16


def test_cas_issue_refuses_unlisted_measurement(cliws, capsys):
    r = run_cli(
        capsys, "cas", "issue", "--authority-dir", str(cliws.authority),
        "--measurement", "ab" * 32,
    )
    assert r.code == 1
    assert "refused" in r.err


# -- train ----------------------------------------------------------------


def test_train_refused_without_allowlisting(tmp_path, cliws, capsys):
    authority = tmp_path / "fresh-authority"
    assert main(["cas", "init", "--authority-dir", str(authority)]) == 0
    capsys.readouterr()
    r = run_cli(capsys, "train", "--config", str(cliws.config), "--authority-dir", str(authority))
    assert r.code == 1
    assert "refused" in r.err
    assert not (tmp_path / "out").exists()


def test_train_json_reports_metrics(cliws, tmp_path, capsys, dataset_rows):
    config = tmp_path / "fast.json"
    config.write_text(json.dumps(make_train_config_doc(cliws.csv, tmp_path / "out", epochs=2)))
    r = run_cli(
        capsys, "train", "--config", str(config),
        "--authority-dir", str(cliws.authority), "--allow", "--json",
    )
    assert r.code == 0
    doc = json.loads(r.out)
    assert set(doc) >= {"model_path", "tbom_path", "keyid", "cv_mean_accuracy", "final_test_accuracy"}


def test_train_missing_config_is_usage_error(cliws, capsys):
    r = run_cli(capsys, "train", "--config", "/nonexistent.json", "--authority-dir", str(cliws.authority))
    assert r.code == 2


def test_train_divergence_is_a_check_failure(cliws, tmp_path, capsys):
    config = tmp_path / "diverge.json"
    config.write_text(
        json.dumps(make_train_config_doc(cliws.csv, tmp_path / "out", learning_rate=1e8, l2_lambda=1e8, epochs=60))
    )
    with np.errstate(all="ignore"):
        r = run_cli(
            capsys, "train", "--config", str(config),
            "--authority-dir", str(cliws.authority), "--allow",
        )
    assert r.code == 1
    assert "non-finite loss" in r.err


# -- verify ----------------------------------------------------------------


def test_verify_pass_and_json(cliws, capsys):
    r = run_cli(capsys, "verify", "--envelope", str(cliws.tbom), "--registry", str(cliws.authority))
    assert r.code == 0
    assert "result: PASS" in r.out
    j = run_cli(capsys, "verify", "--envelope", str(cliws.tbom), "--registry", str(cliws.authority), "--json")
    doc = json.loads(j.out)
    assert doc["pass"] is True and doc["signature_valid"] is True


def test_verify_tampered_record_fails(cliws, tmp_path, capsys):
    doc = json.loads(cliws.tbom.read_bytes())
    import base64

    payload = json.loads(base64.b64decode(doc["payload"]))
    payload["performance_metrics"]["final_test"]["accuracy"] = "0.999999999"
    from dbomkit.canonical import canonicalize

    doc["payload"] = base64.b64encode(canonicalize(payload)).decode()
    forged = tmp_path / "forged.json"
    forged.write_text(json.dumps(doc))
    r = run_cli(capsys, "verify", "--envelope", str(forged), "--registry", str(cliws.authority))
    assert r.code == 1
    assert "result: FAIL" in r.out


def test_verify_missing_registry_is_usage_error(cliws, tmp_path, capsys):
    r = run_cli(capsys, "verify", "--envelope", str(cliws.tbom), "--registry", str(tmp_path / "nope"))
    assert r.code == 2


# -- infer ----------------------------------------------------------------


def test_infer_from_stdin(cliws, tmp_path, capsys, monkeypatch, dataset_rows):
    _, features = dataset_rows[1]
    monkeypatch.setattr(
        "sys.stdin", SimpleNamespace(buffer=io.BytesIO(json.dumps(features).encode()))
    )
    out = tmp_path / "ibom.json"
    r = run_cli(
        capsys, "infer", "--model", str(cliws.model), "--tbom", str(cliws.tbom),
        "--authority-dir", str(cliws.authority), "--input", "-", "--out", str(out), "--json",
    )
    assert r.code == 0
    doc = json.loads(r.out)
    assert doc["decision"] in {"edible", "poisonous"}
    assert out.exists()


def test_infer_rejects_unknown_symbol(cliws, tmp_path, capsys, dataset_rows):
    _, features = dataset_rows[0]
    bad = dict(features)
    bad["odor"] = "Z"
    bad_file = tmp_path / "bad.json"
    bad_file.write_text(json.dumps(bad))
    r = run_cli(
        capsys, "infer", "--model", str(cliws.model), "--tbom", str(cliws.tbom),
        "--authority-dir", str(cliws.authority), "--input", str(bad_file),
        "--out", str(tmp_path / "x.json"),
    )
    assert r.code == 2
    assert not (tmp_path / "x.json").exists()


def test_infer_rejects_non_object_input(cliws, tmp_path, capsys):
    bad_file = tmp_path / "bad.json"
    bad_file.write_text("[1, 2]")
    r = run_cli(
        capsys, "infer", "--model", str(cliws.model), "--tbom", str(cliws.tbom),
        "--authority-dir", str(cliws.authority), "--input", str(bad_file),
        "--out", str(tmp_path / "x.json"),
    )
    assert r.code == 2


def test_infer_refuses_tampered_model(cliws, tmp_path, capsys, dataset_rows):
    raw = bytearray(cliws.model.read_bytes())
    at = raw.index(b"weights") + 20
    raw[at] = ord("9") if raw[at] != ord("9") else ord("8")
    bad_model = tmp_path / "model.json"
    bad_model.write_bytes(bytes(raw))
    r = run_cli(
        capsys, "infer", "--model", str(bad_model), "--tbom", str(cliws.tbom),
        "--authority-dir", str(cliws.authority), "--input", str(cliws.features_file),
        "--out", str(tmp_path / "x.json"),
    )
    assert r.code == 1
    assert "does not match" in r.err
    assert not (tmp_path / "x.json").exists()


def test_infer_refuses_unverifiable_tbom(cliws, tmp_path, capsys):
    foreign = tmp_path / "foreign-authority"
    assert main(["cas", "init", "--authority-dir", str(foreign)]) == 0
    capsys.readouterr()
    r = run_cli(
        capsys, "infer", "--model", str(cliws.model), "--tbom", str(cliws.tbom),
        "--authority-dir", str(foreign), "--input", str(cliws.features_file),
        "--out", str(tmp_path / "x.json"), "--allow",
    )
    assert r.code == 1
    assert "refusing" in r.err


# -- chain ----------------------------------------------------------------


def test_chain_pass(cliws, capsys):
    r = run_cli(
        capsys, "chain", "--ibom", str(cliws.ibom), "--tbom", str(cliws.tbom),
        "--registry", str(cliws.authority),
    )
    assert r.code == 0
    assert "result: PASS" in r.out


def test_chain_rejects_foreign_pair(cliws, tmp_path, capsys):
    config = tmp_path / "second.json"
    config.write_text(json.dumps(make_train_config_doc(cliws.csv, tmp_path / "out", seed=7, epochs=2)))
    assert main([
        "train", "--config", str(config), "--authority-dir", str(cliws.authority), "--allow",
    ]) == 0
    capsys.readouterr()
    other_tbom = tmp_path / "out" / "tbom.envelope.json"
    r = run_cli(
        capsys, "chain", "--ibom", str(cliws.ibom), "--tbom", str(other_tbom),
        "--registry", str(cliws.authority), "--json",
    )
    assert r.code == 1
    doc = json.loads(r.out)
    assert doc["pass"] is False and "does not match" in doc["reason"]


def test_chain_requires_verified_inputs(cliws, tmp_path, capsys):
    garbage = tmp_path / "garbage.json"
    garbage.write_text("{}")
    r = run_cli(
        capsys, "chain", "--ibom", str(garbage), "--tbom", str(cliws.tbom),
        "--registry", str(cliws.authority),
    )
    assert r.code == 1
    assert "failed verification" in r.err


# -- comply ----------------------------------------------------------------


def test_comply_pass_fail_and_syntax(cliws, tmp_path, capsys):
    good = tmp_path / "good.rules"
    good.write_text("performance_metrics.final_test.accuracy >= 0.95\nmeasurement.hex exists\n")
    r = run_cli(
        capsys, "comply", "--envelope", str(cliws.tbom), "--rules", str(good),
        "--registry", str(cliws.authority),
    )
    assert r.code == 0
    assert "rules checked: 2" in r.out

    strict = tmp_path / "strict.rules"
    strict.write_text("performance_metrics.final_test.accuracy >= 0.999\n")
    r = run_cli(
        capsys, "comply", "--envelope", str(cliws.tbom), "--rules", str(strict),
        "--registry", str(cliws.authority), "--json",
    )
    assert r.code == 1
    doc = json.loads(r.out)
    assert doc["pass"] is False and len(doc["violations"]) == 1

    broken = tmp_path / "broken.rules"
    broken.write_text("a.b ~= 1\n")
    r = run_cli(
        capsys, "comply", "--envelope", str(cliws.tbom), "--rules", str(broken),
        "--registry", str(cliws.authority),
    )
    assert r.code == 2
    assert "line 1" in r.err


def test_comply_refuses_unverified_record(cliws, tmp_path, capsys):
    rules = tmp_path / "any.rules"
    rules.write_text("measurement.hex exists\n")
    garbage = tmp_path / "garbage.bin"
    garbage.write_bytes(b"junk")
    r = run_cli(
        capsys, "comply", "--envelope", str(garbage), "--rules", str(rules),
        "--registry", str(cliws.authority),
    )
    assert r.code == 1
    assert "compliance not evaluated" in r.err


# -- vigilance ----------------------------------------------------------------


def test_vigilance_submit_and_scan_flow(cliws, tmp_path, capsys):
    log = tmp_path / "log.jsonl"
    r = run_cli(
        capsys, "vigilance", "submit", "--log", str(log),
        "--envelope", str(cliws.tbom), "--registry", str(cliws.authority), "--json",
    )
    assert r.code == 0
    assert json.loads(r.out) == {"sequence": 1, "accepted": True, "duplicate": False}

    again = run_cli(
        capsys, "vigilance", "submit", "--log", str(log),
        "--envelope", str(cliws.tbom), "--registry", str(cliws.authority),
    )
    assert again.code == 0
    assert "duplicate: true" in again.out

    garbage = tmp_path / "junk.bin"
    garbage.write_bytes(b"junk")
    rejected = run_cli(
        capsys, "vigilance", "submit", "--log", str(log),
        "--envelope", str(garbage), "--registry", str(cliws.authority),
    )
    assert rejected.code == 1

    scan = run_cli(capsys, "vigilance", "scan", "--log", str(log), "--json")
    assert scan.code == 1  # the rejected entry is a finding
    findings = json.loads(scan.out)["findings"]
    assert [f["kind"] for f in findings] == ["invalid_report"]


def test_vigilance_scan_clean_log_exits_zero(cliws, tmp_path, capsys):
    log = tmp_path / "log.jsonl"
    assert main([
        "vigilance", "submit", "--log", str(log),
        "--envelope", str(cliws.tbom), "--registry", str(cliws.authority),
    ]) == 0
    capsys.readouterr()
    r = run_cli(capsys, "vigilance", "scan", "--log", str(log))
    assert r.code == 0
    assert "findings: 0" in r.out


def test_vigilance_scan_policy_flags(cliws, tmp_path, capsys):
    # craft a log directly: two healthy trainings 0.015 apart
    import base64

    from dbomkit.canonical import canonicalize

    def entry(seq, accuracy):
        payload = {
            "project_metadata": {"name": "p"},
            "performance_metrics": {"final_test": {"accuracy": accuracy}},
        }
        return json.dumps({
            "sequence": seq, "accepted": True, "duplicate": False,
            "payload_digest": f"{seq:064x}", "kind": "tbom", "keyid": "k",
            "failures": [], "submitted_at": "2026-01-01T00:00:00.000Z",
            "envelope": {"payload": base64.b64encode(canonicalize(payload)).decode()},
        })

    log = tmp_path / "log.jsonl"
    log.write_text(entry(1, "0.970000000") + "\n" + entry(2, "0.955000000") + "\n")
    assert run_cli(capsys, "vigilance", "scan", "--log", str(log)).code == 0
    tighter = run_cli(capsys, "vigilance", "scan", "--log", str(log), "--drift-threshold", "0.01")
    assert tighter.code == 1
    assert "accuracy_drift" in tighter.out


def test_corrupt_log_is_an_io_class_error(cliws, tmp_path, capsys):
    log = tmp_path / "log.jsonl"
    log.write_text("not json\n")
    r = run_cli(capsys, "vigilance", "scan", "--log", str(log))
    assert r.code == 2
