"""Integrity, chain, and compliance checks.

The rule engine is checked two ways: a frozen truth table over comparator
edge cases, and randomized agreement with a brute-force oracle that
re-implements the grammar semantics directly.
"""

import json
import random
from decimal import Decimal

import pytest

from dbomkit.canonical import canonicalize
from dbomkit.checkers import (
    ChainReport,
    Rule,
    chain_check,
    compile_rules,
    compliance_check,
    integrity_check,
    resolve_path,
    rule_satisfied,
)
from dbomkit.envelope import Envelope, KeyAuthority, KeyRegistry
from dbomkit.errors import RuleSyntaxError

from conftest import run_full_training


@pytest.fixture(scope="module")
def registry(workspace):
    return KeyRegistry([workspace.result.key_record, workspace.serving_record])


# -- integrity ----------------------------------------------------------------


def test_integrity_passes_on_shipped_record(workspace, registry):
    report = integrity_check(workspace.result.tbom_path, registry)
    assert report.passed
    assert report.schema_valid and report.signature_valid
    assert report.keyid_used == workspace.result.key_record.keyid
    assert report.kind == "tbom"
    assert report.failures == ()
    doc = report.to_doc()
    assert doc["pass"] is True and doc["failures"] == []


def test_integrity_accepts_many_source_shapes(workspace, registry):
    raw = workspace.result.tbom_path.read_bytes()
    for source in (raw, json.loads(raw), Envelope.from_bytes(raw), str(workspace.result.tbom_path)):
        assert integrity_check(source, registry).passed


def test_well_signed_malformed_payload_reports_both_truths(workspace, registry):
    """Sign a gutted record with a legitimate key: signature_valid must be
    True while schema_valid is False. The stages never mask each other."""
    gutted = json.loads(json.dumps(workspace.tbom))
    del gutted["performance_metrics"]
    envelope = workspace.authority.sign(canonicalize(gutted), workspace.handle)
    report = integrity_check(envelope, registry)
    assert report.signature_valid is True
    assert report.schema_valid is False
    assert not report.passed
    assert any(f["stage"] == "schema" for f in report.failures)


def test_valid_schema_with_unknown_key_reports_key_stage(workspace):
    report = integrity_check(workspace.result.tbom_path, KeyRegistry([]))
    assert report.schema_valid is True
    assert report.signature_valid is False
    assert report.keyid_used is None
    assert [f["stage"] for f in report.failures] == ["key"]


def test_tampered_payload_reports_signature_stage(workspace, registry):
    doc = json.loads(workspace.result.tbom_path.read_bytes())
    payload = json.loads(Envelope.from_doc(doc).payload)
    payload["project_metadata"]["name"] = "renamed"
    import base64

    doc["payload"] = base64.b64encode(canonicalize(payload)).decode()
    report = integrity_check(doc, registry)
    assert report.schema_valid is True  # still a well-formed record
    assert report.signature_valid is False
    assert any(f["stage"] == "signature" for f in report.failures)


def test_garbage_reports_parse_stage(registry, tmp_path):
    report = integrity_check(b"not json at all", registry)
    assert not report.passed
    assert [f["stage"] for f in report.failures] == ["parse"]
    missing = integrity_check(tmp_path / "nothing.json", registry)
    assert [f["stage"] for f in missing.failures] == ["parse"]


def test_non_bom_payload_fails_schema(workspace, registry):
    envelope = workspace.authority.sign(canonicalize({"hello": 1}), workspace.handle)
    report = integrity_check(envelope, registry)
    assert report.signature_valid is True
    assert report.schema_valid is False
    assert report.kind is None


# -- chain --------------------------------------------------------------------


def test_chain_passes_for_descendant(workspace, inference_run):
    assert chain_check(inference_run.ibom, workspace.tbom) == ChainReport(passed=True)


def test_chain_passes_with_key_binding(workspace, inference_run):
    report = chain_check(inference_run.ibom, workspace.tbom, workspace.result.key_record)
    assert report.passed


def test_chain_rejects_foreign_training_record(workspace, inference_run, tmp_path, dataset_csv):
    other_root = tmp_path / "other"
    other_root.mkdir()
    other = run_full_training(dataset_csv, other_root, seed=99, epochs=5)
    report = chain_check(inference_run.ibom, other.result.tbom)
    assert not report.passed
    assert "does not match" in report.reason


def test_chain_rejects_mutated_training_record(workspace, inference_run):
    mutated = json.loads(json.dumps(workspace.tbom))
    mutated["performance_metrics"]["cv"]["mean_accuracy"] = "0.999999999"
    report = chain_check(inference_run.ibom, mutated)
    assert not report.passed


def test_chain_rejects_measurement_mismatch(workspace, inference_run):
    # the serving key is bound to the serving measurement, not the
    # training one, so binding it to this record must fail
    report = chain_check(inference_run.ibom, workspace.tbom, workspace.serving_record)
    assert not report.passed
    assert "measurement" in report.reason


def test_chain_rejects_linkless_inference_record(workspace, inference_run):
    gutted = json.loads(json.dumps(inference_run.ibom))
    del gutted["inference_identification"]["tbom_link"]
    report = chain_check(gutted, workspace.tbom)
    assert not report.passed
    assert "link" in report.reason


# -- rule grammar -------------------------------------------------------------


def test_compile_full_grammar():
    text = """
# threshold floor
performance_metrics.final_test.accuracy >= 0.95
project_metadata.name == mushroom-screen   # trailing comment
data_summary.total_samples > 8000
measurement.hex exists
training_methodology.cv_folds != 4
"""
    ruleset = compile_rules(text)
    assert len(ruleset) == 5
    assert ruleset.rules[0].line_number == 3
    assert ruleset.rules[0].numeric == Decimal("0.95")
    assert ruleset.rules[1].literal == "mushroom-screen"
    assert ruleset.rules[3].comparator == "exists"


@pytest.mark.parametrize(
    "line, fragment",
    [
        ("a.b", "PATH COMPARATOR"),
        ("a.b ~= 3", "unknown comparator"),
        ("a.b exists 1", "takes no literal"),
        ("a.b ==", "needs a literal"),
        ("a.b >= fast", "numeric literal"),
    ],
)
def test_compile_rejections_carry_line_numbers(line, fragment):
    with pytest.raises(RuleSyntaxError, match=fragment) as err:
        compile_rules("# header\n" + line + "\n")
    assert "line 2" in str(err.value)


def test_empty_ruleset_is_vacuously_compliant(workspace):
    report = compliance_check(workspace.tbom, compile_rules("# only comments\n\n"))
    assert report.passed
    assert report.violations == ()


# -- comparator semantics ------------------------------------------------------

DOC = {
    "text": "0.95",
    "number": 10,
    "flag": True,
    "name": "alpha",
    "nested": {"list": [5, {"x": "y"}]},
    "zero": 0,
}

TRUTH_TABLE = [
    ("text >= 0.95", True),       # decimal text compares numerically
    ("text >= 0.950001", False),
    ("text < 1", True),
    ("number == 10", True),
    ("number == 10.0", True),     # numeric equality, not textual
    ("number != 10.0", False),
    ("text == 0.9500", True),     # numeric view wins when both sides numeric
    ("name == alpha", True),
    ("name != alpha", False),
    ("name == beta", False),
    ("name >= 1", False),         # non-numeric value under ordered comparator
    ("flag == 1", False),         # booleans are not numbers here
    ("flag exists", True),
    ("nested.list.0 == 5", True),
    ("nested.list.1.x == y", True),
    ("nested.list.2 exists", False),
    ("absent exists", False),
    ("absent == 3", False),       # missing path fails every comparator
    ("absent != 3", False),
    ("absent <= 3", False),
    ("zero == 0", True),
    ("number == alpha", False),   # non-numeric literal vs numeric value
    ("number != alpha", True),
]


@pytest.mark.parametrize("line, expected", TRUTH_TABLE)
def test_comparator_truth_table(line, expected):
    ruleset = compile_rules(line)
    assert rule_satisfied(ruleset.rules[0], DOC) is expected


def test_violations_name_rule_and_observed(workspace):
    rules = compile_rules(
        "performance_metrics.final_test.accuracy >= 0.99\nabsent.path exists\n"
    )
    report = compliance_check(workspace.tbom, rules)
    assert not report.passed
    assert len(report.violations) == 2
    first, second = report.violations
    assert first["rule"].startswith("performance_metrics.final_test.accuracy")
    assert first["observed"] == workspace.tbom["performance_metrics"]["final_test"]["accuracy"]
    assert second["observed"] == "missing"


def test_passing_policy_over_shipped_record(workspace):
    rules = compile_rules(
        """
performance_metrics.final_test.accuracy >= 0.95
performance_metrics.cv.mean_accuracy >= 0.95
data_summary.total_samples == 8124
project_metadata.role_identity == model-provider
measurement.hex exists
training_methodology.hyperparameters.seed == 42
"""
    )
    report = compliance_check(workspace.tbom, rules)
    assert report.passed, report.violations


# -- brute-force oracle agreement ----------------------------------------


def _oracle(rule: Rule, document) -> bool:
    """Independent re-statement of the comparator semantics."""
    value = resolve_path(document, rule.path)
    from dbomkit.checkers import _MISSING, _numeric_view

    if rule.comparator == "exists":
        return value is not _MISSING
    if value is _MISSING:
        return False
    number = _numeric_view(value)
    if rule.comparator in (">=", "<=", ">", "<"):
        if number is None:
            return False
        return {
            ">=": number >= rule.numeric,
            "<=": number <= rule.numeric,
            ">": number > rule.numeric,
            "<": number < rule.numeric,
        }[rule.comparator]
    both_numeric = number is not None and rule.numeric is not None
    if both_numeric:
        equal = number == rule.numeric
    else:
        equal = isinstance(value, str) and value == rule.literal
    return equal if rule.comparator == "==" else not equal


def test_rule_engine_agrees_with_oracle_on_random_pairs():
    rng = random.Random(8124)
    values = ["0.95", "1", "-3.5", "alpha", 10, 0, -7, True, False, None, [1, "2"], {"k": "v"}]
    paths = ["a", "b", "a.c", "a.c.0", "missing", "a.c.5", "b.k"]
    literals = ["0.95", "1", "-3.5", "alpha", "10", "v"]
    comparators = [">=", "<=", ">", "<", "==", "!=", "exists"]
    checked = 0
    for _ in range(500):
        document = {
            "a": {"c": [rng.choice(values), rng.choice(values)]},
            "b": rng.choice(values),
        }
        comparator = rng.choice(comparators)
        path = rng.choice(paths)
        if comparator == "exists":
            line = f"{path} exists"
        else:
            literal = rng.choice(literals)
            if comparator in (">=", "<=", ">", "<") and not literal.replace("-", "").replace(".", "").isdigit():
                literal = "1"
            line = f"{path} {comparator} {literal}"
        try:
            ruleset = compile_rules(line)
        except RuleSyntaxError:
            continue
        rule = ruleset.rules[0]
        assert rule_satisfied(rule, document) is _oracle(rule, document), line
        checked += 1
    assert checked >= 450
