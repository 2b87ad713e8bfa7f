"""Decision path: strict encoding, exact contribution accounting, what-if
interventions, model pinning, and the signed per-decision record.

The load-bearing invariant: bias plus the sum of every concept contribution
reproduces the recorded logit exactly as decimal text, no tolerance.
"""

import json
from decimal import Decimal

import numpy as np
import pytest

from dbomkit.bom import tbom_link_digest, validate_bom
from dbomkit.canonical import canonicalize, dec9, digest
from dbomkit.data import load_csv_dataset
from dbomkit.envelope import KeyRegistry, verify
from dbomkit.errors import (
    InferenceInputError,
    ModelTamperedError,
    OutOfVocabularyError,
)
from dbomkit.inference import (
    INFERENCE_ROLE,
    concept_contributions,
    predict,
    run_inference_job,
    verify_model_against_tbom,
    what_if,
)


def _raw_features(workspace, row_index=0):
    dataset = load_csv_dataset(workspace.dataset_path)
    row = dataset.rows[row_index]
    return dict(zip(dataset.attributes, row.values)), row.label


# -- predict -----------------------------------------------------------------


def test_logit_is_exact_decimal_sum_of_active_weights(workspace):
    model = workspace.model
    raw, _ = _raw_features(workspace)
    prediction, vector = predict(model, raw)
    expected = Decimal(model.bias)
    for pos in np.flatnonzero(vector):
        expected += Decimal(model.weights[int(pos)])
    assert prediction.logit == dec9(expected)


def test_probability_matches_float_sigmoid(workspace):
    raw, _ = _raw_features(workspace, 3)
    prediction, _ = predict(workspace.model, raw)
    z = float(Decimal(prediction.logit))
    assert float(prediction.probability_poisonous) == pytest.approx(
        1.0 / (1.0 + np.exp(-z)), abs=1e-9
    )


def test_predict_refuses_unknown_and_missing(workspace):
    raw, _ = _raw_features(workspace)
    unknown = dict(raw)
    unknown["odor"] = "?"
    with pytest.raises(OutOfVocabularyError):
        predict(workspace.model, unknown)
    missing = dict(raw)
    del missing["odor"]
    with pytest.raises(InferenceInputError):
        predict(workspace.model, missing)


def test_decisions_match_labels_on_designed_rows(workspace):
    """Odor carries the signal: a foul row must be called poisonous and an
    almond row edible by any accurate model; both exist in the first rows."""
    dataset = load_csv_dataset(workspace.dataset_path)
    odor = dataset.attributes.index("odor")
    checked = {"f": False, "a": False}
    for row in dataset.rows[:200]:
        symbol = row.values[odor]
        if symbol in checked and not checked[symbol]:
            raw = dict(zip(dataset.attributes, row.values))
            prediction, _ = predict(workspace.model, raw)
            assert prediction.decision == row.label
            checked[symbol] = True
    assert all(checked.values())


# -- contributions ------------------------------------------------------------


def test_contribution_identity_holds_exactly(workspace):
    raw, _ = _raw_features(workspace, 17)
    prediction, vector = predict(workspace.model, raw)
    contributions = concept_contributions(workspace.model, vector)
    total = contributions.total() + Decimal(workspace.model.bias)
    assert dec9(total) == prediction.logit


def test_contributions_cover_every_concept_sorted_by_magnitude(workspace):
    raw, _ = _raw_features(workspace, 9)
    _, vector = predict(workspace.model, raw)
    contributions = concept_contributions(workspace.model, vector)
    names = workspace.model.encoding.concept_names()
    assert sorted(e.concept for e in contributions.entries) == sorted(names)
    magnitudes = [abs(Decimal(e.contribution)) for e in contributions.entries]
    assert magnitudes == sorted(magnitudes, reverse=True)
    # inactive concepts contribute the zero text
    active = {names[int(i)] for i in np.flatnonzero(vector)}
    for entry in contributions.entries:
        if entry.concept not in active:
            assert entry.contribution == dec9(0)


def test_contributions_validate_vector(workspace):
    with pytest.raises(InferenceInputError):
        concept_contributions(workspace.model, [0.5] * len(workspace.model.encoding))
    with pytest.raises(InferenceInputError):
        concept_contributions(workspace.model, [1.0])


# -- what-if ------------------------------------------------------------------


def test_what_if_noop_equals_predict(workspace):
    raw, _ = _raw_features(workspace, 4)
    base, vector = predict(workspace.model, raw)
    hypo, contributions = what_if(workspace.model, raw, {})
    assert hypo == base
    assert dec9(contributions.total() + Decimal(workspace.model.bias)) == base.logit


def test_what_if_override_changes_only_the_target_position(workspace):
    raw, _ = _raw_features(workspace, 4)
    model = workspace.model
    _, vector = predict(model, raw)
    names = model.encoding.concept_names()
    target = next(names[int(i)] for i in np.flatnonzero(vector) if names[int(i)].startswith("odor="))
    hypo, contributions = what_if(model, raw, {target: 0})
    by_name = {e.concept: Decimal(e.contribution) for e in contributions.entries}
    assert by_name[target] == 0
    expected = Decimal(model.bias) + sum(
        Decimal(model.weights[int(i)])
        for i in np.flatnonzero(vector)
        if names[int(i)] != target
    )
    assert hypo.logit == dec9(expected)


def test_what_if_accepts_float_zero_one_rejects_else(workspace):
    raw, _ = _raw_features(workspace)
    concept = workspace.model.encoding.concept_names()[0]
    what_if(workspace.model, raw, {concept: 1.0})
    what_if(workspace.model, raw, {concept: 0})
    for bad in (True, False, 2, -1, 0.5, "1"):
        with pytest.raises(InferenceInputError):
            what_if(workspace.model, raw, {concept: bad})
    with pytest.raises((InferenceInputError, OutOfVocabularyError)):
        what_if(workspace.model, raw, {"odor=zzz": 1})


# -- model pinning ------------------------------------------------------------


def test_model_verifies_against_its_record(workspace):
    artifact_bytes = workspace.result.model_path.read_bytes()
    model = verify_model_against_tbom(artifact_bytes, workspace.tbom)
    assert model == workspace.model


def test_tampered_model_is_refused(workspace):
    raw = bytearray(workspace.result.model_path.read_bytes())
    # flip one digit inside some weight's text
    at = raw.index(b"weights")
    probe = raw.index(b"0.", at)
    target = probe + 3
    raw[target] = ord("1") if raw[target] != ord("1") else ord("2")
    with pytest.raises(ModelTamperedError):
        verify_model_against_tbom(bytes(raw), workspace.tbom)


def test_record_without_digest_is_refused(workspace):
    artifact_bytes = workspace.result.model_path.read_bytes()
    gutted = json.loads(json.dumps(workspace.tbom))
    del gutted["output_artifacts"]["model_digest"]
    with pytest.raises(ModelTamperedError):
        verify_model_against_tbom(artifact_bytes, gutted)


# -- signed inference records ---------------------------------------------


def test_inference_record_validates_and_verifies(workspace, inference_run):
    ibom = inference_run.ibom
    assert validate_bom(ibom, "ibom").valid
    registry = KeyRegistry([workspace.serving_record])
    report = verify(inference_run.envelope, registry)
    assert workspace.serving_record.keyid in report.verified_keyids
    assert workspace.serving_record.role_identity == INFERENCE_ROLE


def test_inference_record_links_to_its_tbom(workspace, inference_run):
    link = inference_run.ibom["inference_identification"]["tbom_link"]
    assert link == tbom_link_digest(workspace.tbom).to_doc()


def test_pathway_digests_recompute_from_the_wire(workspace, inference_run):
    """Every step digest must be recomputable from the features, the
    encoded vector, and the prediction document alone."""
    ibom = inference_run.ibom
    steps = {s["step"]: s for s in ibom["decision_pathway"]}
    assert set(steps) >= {"decode-input", "verify-model", "encode", "predict"}

    raw, _ = _raw_features(workspace)
    features_digest = digest(canonicalize(dict(raw)))
    # no separate request bytes were given, so the request digest is the
    # features digest itself
    assert steps["decode-input"]["input_digest"]["hex"] == features_digest.hex
    assert steps["decode-input"]["output_digest"]["hex"] == features_digest.hex

    prediction, vector = predict(workspace.model, raw)
    encoded = [int(v) for v in vector]
    assert steps["encode"]["input_digest"]["hex"] == features_digest.hex
    assert steps["encode"]["output_digest"]["hex"] == digest(canonicalize(encoded)).hex
    assert steps["verify-model"]["output_digest"] == workspace.tbom["output_artifacts"]["model_digest"]
    assert steps["predict"]["input_digest"] == steps["encode"]["output_digest"]
    assert steps["predict"]["output_digest"]["hex"] == digest(canonicalize(prediction.to_doc())).hex


def test_request_bytes_are_hashed_when_given(workspace):
    raw, _ = _raw_features(workspace, 6)
    wire = json.dumps({"features": raw}).encode()
    run = run_inference_job(
        raw, workspace.model, workspace.tbom, workspace.authority, workspace.handle,
        request_bytes=wire,
    )
    steps = {s["step"]: s for s in run.ibom["decision_pathway"]}
    assert steps["decode-input"]["input_digest"]["hex"] == digest(wire).hex
    assert steps["decode-input"]["output_digest"]["hex"] == digest(canonicalize(dict(raw))).hex


def test_inference_results_reproduce_prediction(workspace, inference_run):
    ibom = inference_run.ibom
    raw, _ = _raw_features(workspace)
    prediction, vector = predict(workspace.model, raw)
    results = ibom["inference_results"]
    assert results["raw_model_output"]["logit"] == prediction.logit
    probs = results["raw_model_output"]["probabilities"]
    assert probs["poisonous"] == prediction.probability_poisonous
    assert Decimal(probs["edible"]) + Decimal(probs["poisonous"]) == 1
    metrics = results["decision_metrics"]
    assert metrics["decision"] == prediction.decision
    assert metrics["distance_from_threshold"] == prediction.distance
    assert metrics["certainty_level"] == prediction.certainty
    expected = probs["poisonous"] if metrics["decision"] == "poisonous" else probs["edible"]
    assert metrics["confidence"] == expected

    recorded = {
        e["concept"]: e["contribution"]
        for e in results["feature_analysis"]["concept_contributions"]
    }
    contributions = concept_contributions(workspace.model, vector)
    assert recorded == {e.concept: e.contribution for e in contributions.entries}


def test_fresh_ids_and_nonnegative_duration(workspace):
    raw, _ = _raw_features(workspace, 2)
    runs = [
        run_inference_job(
            raw, workspace.model, workspace.tbom, workspace.authority, workspace.handle
        )
        for _ in range(2)
    ]
    ids = {r.ibom["inference_identification"]["inference_id"] for r in runs}
    assert len(ids) == 2
    for r in runs:
        assert r.ibom["temporal_inference_data"]["duration_micros"] >= 0
        assert r.ibom["input_metadata"]["encoded_dimensions"] == len(workspace.model.encoding)


def test_inference_refuses_wrong_model_for_record(workspace, tmp_path, dataset_csv):
    """A model that does not hash to the record's pinned digest cannot
    produce signed decisions, even if it loads cleanly."""
    from conftest import run_full_training

    other_root = tmp_path / "othertrain"
    other_root.mkdir()
    other = run_full_training(dataset_csv, other_root, seed=43, epochs=5)
    raw, _ = _raw_features(workspace)
    with pytest.raises(ModelTamperedError):
        run_inference_job(
            raw, other.result.artifact, workspace.tbom, workspace.authority, workspace.handle
        )
