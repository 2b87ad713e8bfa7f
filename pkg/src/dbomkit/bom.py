"""Training and inference record documents: construction, validation, linking.

Records are plain dicts shaped exactly like their wire form, so the same
object flows through canonicalization, signing, storage, and checking
without a lossy conversion step. Builders assemble and validate; the
validators re-derive every stored conclusion (decision, distances, metric
arithmetic, index partitions) from the stored primary data, so a record
that validates is internally consistent, not merely well-typed.
"""

from __future__ import annotations

import re
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from decimal import Decimal
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

from .canonical import (
    Digest,
    canonicalize,
    dec9,
    dec9_ratio,
    decimal_mean,
    decimal_std,
    digest,
    is_decimal_text,
)
from .errors import BomConstructionError

TBOM_SECTIONS = (
    "project_metadata",
    "data_summary",
    "model_architecture",
    "training_methodology",
    "performance_metrics",
    "environment",
    "output_artifacts",
    "measurement",
)

IBOM_SECTIONS = (
    "inference_identification",
    "input_metadata",
    "inference_results",
    "decision_pathway",
    "temporal_inference_data",
    "runtime_environment",
)

CLASS_LABELS = ("edible", "poisonous")
CERTAINTY_LEVELS = ("low", "medium", "high")
REQUIRED_PATHWAY_STEPS = ("decode-input", "verify-model", "encode", "predict")
UNDEFINED_METRIC = "undefined"

# Certainty buckets over distance-from-threshold.
HIGH_CERTAINTY_DISTANCE = Decimal("0.400000000")
MEDIUM_CERTAINTY_DISTANCE = Decimal("0.150000000")

_UUID_RE = re.compile(r"^[0-9a-f]{8}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{4}-[0-9a-f]{12}$")
_TIMESTAMP_RE = re.compile(r"^[0-9]{4}-[0-9]{2}-[0-9]{2}T[0-9]{2}:[0-9]{2}:[0-9]{2}\.[0-9]{3}Z$")
_HEX64_RE = re.compile(r"^[0-9a-f]{64}$")

_ONE = Decimal("1")
_ZERO = Decimal("0")


def utc_timestamp() -> str:
    """Current UTC time, RFC 3339, millisecond precision, Z suffix."""
    now = datetime.now(timezone.utc)
    return now.isoformat(timespec="milliseconds").replace("+00:00", "Z")


def decide(probability_poisonous: str, threshold: str) -> Tuple[str, str, str]:
    """(decision, distance, certainty) from stored decimal texts.

    A probability exactly at the threshold decides "poisonous": for a
    toxicity screen the boundary case must fail toward the unsafe class.
    """
    p = Decimal(probability_poisonous)
    t = Decimal(threshold)
    decision = "poisonous" if p >= t else "edible"
    d = abs(p - t)
    distance = dec9(d)
    if d >= HIGH_CERTAINTY_DISTANCE:
        certainty = "high"
    elif d >= MEDIUM_CERTAINTY_DISTANCE:
        certainty = "medium"
    else:
        certainty = "low"
    return decision, distance, certainty


def complement_probability(probability: str) -> str:
    """The other class's probability; the pair sums to 1 exactly."""
    return dec9(_ONE - Decimal(probability))


@dataclass(frozen=True)
class ValidationReport:
    valid: bool
    violations: Tuple[Mapping[str, str], ...]

    def to_doc(self) -> dict:
        return {"valid": self.valid, "violations": [dict(v) for v in self.violations]}


# -- field-level checks -------------------------------------------------
#
# Each helper appends {path, message} entries and returns True when the
# value is usable for later cross-field checks.


def _fail(out: List[dict], path: str, message: str) -> None:
    out.append({"path": path, "message": message})


def _is_seq(value: Any) -> bool:
    return isinstance(value, (list, tuple))


def _need_map(out: List[dict], value: Any, path: str) -> bool:
    if not isinstance(value, Mapping):
        _fail(out, path, "must be an object")
        return False
    return True


def _need_closed(out: List[dict], value: Mapping, allowed: Sequence[str], path: str) -> None:
    for key in value:
        if not isinstance(key, str):
            _fail(out, path, f"non-text key {key!r}")
        elif key not in allowed:
            _fail(out, f"{path}.{key}", "unexpected field")


def _need_text(out: List[dict], value: Any, path: str, allow_empty: bool = False) -> bool:
    if not isinstance(value, str):
        _fail(out, path, "must be text")
        return False
    if not value and not allow_empty:
        _fail(out, path, "must not be empty")
        return False
    return True


def _need_uint(out: List[dict], value: Any, path: str, minimum: int = 0) -> bool:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(out, path, "must be an unsigned integer")
        return False
    if value < minimum:
        _fail(out, path, f"must be at least {minimum}")
        return False
    return True


def _need_dec(
    out: List[dict],
    value: Any,
    path: str,
    low: Optional[Decimal] = None,
    high: Optional[Decimal] = None,
    exclusive: bool = False,
) -> bool:
    if not is_decimal_text(value):
        _fail(out, path, "must be decimal text with nine fractional digits")
        return False
    d = Decimal(value)
    if low is not None and (d <= low if exclusive else d < low):
        _fail(out, path, f"must be {'>' if exclusive else '>='} {low}")
        return False
    if high is not None and (d >= high if exclusive else d > high):
        _fail(out, path, f"must be {'<' if exclusive else '<='} {high}")
        return False
    return True


def _need_metric(out: List[dict], value: Any, path: str) -> bool:
    """Decimal text in [0,1], or the undefined marker for 0/0 rates."""
    if value == UNDEFINED_METRIC:
        return True
    return _need_dec(out, value, path, low=_ZERO, high=_ONE)


def _need_digest(out: List[dict], value: Any, path: str) -> bool:
    if not _need_map(out, value, path):
        return False
    _need_closed(out, value, ("algorithm", "hex"), path)
    ok = True
    if value.get("algorithm") != "sha256":
        _fail(out, f"{path}.algorithm", 'must be "sha256"')
        ok = False
    hex_value = value.get("hex")
    if not isinstance(hex_value, str) or not _HEX64_RE.match(hex_value):
        _fail(out, f"{path}.hex", "must be 64 lowercase hex characters")
        ok = False
    return ok


def _need_index_list(out: List[dict], value: Any, path: str, total: Optional[int]) -> Optional[List[int]]:
    if not _is_seq(value):
        _fail(out, path, "must be a list of indices")
        return None
    ok = True
    previous = -1
    for i, item in enumerate(value):
        if not _need_uint(out, item, f"{path}[{i}]"):
            ok = False
            continue
        if total is not None and item >= total:
            _fail(out, f"{path}[{i}]", f"index {item} out of range for {total} samples")
            ok = False
        if item <= previous:
            _fail(out, f"{path}[{i}]", "indices must be strictly ascending")
            ok = False
        previous = item
    return list(value) if ok else None


# -- TBOM ----------------------------------------------------------------


def _check_project_metadata(out: List[dict], section: Any) -> None:
    path = "project_metadata"
    if not _need_map(out, section, path):
        return
    _need_closed(out, section, ("name", "purpose", "version", "role_identity"), path)
    for key in ("name", "purpose", "version", "role_identity"):
        _need_text(out, section.get(key), f"{path}.{key}")


def _check_data_summary(out: List[dict], section: Any) -> Optional[dict]:
    path = "data_summary"
    if not _need_map(out, section, path):
        return None
    keys = (
        "dataset_name",
        "dataset_digest",
        "total_samples",
        "class_distribution",
        "test_indices",
        "fold_indices",
    )
    _need_closed(out, section, keys, path)
    _need_text(out, section.get("dataset_name"), f"{path}.dataset_name")
    _need_digest(out, section.get("dataset_digest"), f"{path}.dataset_digest")

    total: Optional[int] = None
    if _need_uint(out, section.get("total_samples"), f"{path}.total_samples"):
        total = section["total_samples"]

    distribution = section.get("class_distribution")
    if _need_map(out, distribution, f"{path}.class_distribution"):
        if not distribution:
            _fail(out, f"{path}.class_distribution", "must not be empty")
        counted = 0
        counts_ok = bool(distribution)
        for label, count in distribution.items():
            if label not in CLASS_LABELS:
                _fail(out, f"{path}.class_distribution.{label}", "unknown class label")
                counts_ok = False
            if _need_uint(out, count, f"{path}.class_distribution.{label}"):
                counted += count
            else:
                counts_ok = False
        if counts_ok and total is not None and counted != total:
            _fail(
                out,
                f"{path}.class_distribution",
                f"class counts sum to {counted}, not total_samples {total}",
            )

    test_indices = _need_index_list(out, section.get("test_indices"), f"{path}.test_indices", total)

    folds_raw = section.get("fold_indices")
    folds: Optional[List[List[int]]] = None
    if _is_seq(folds_raw):
        folds = []
        for i, fold in enumerate(folds_raw):
            checked = _need_index_list(out, fold, f"{path}.fold_indices[{i}]", total)
            if checked is None:
                folds = None
                break
            folds.append(checked)
    else:
        _fail(out, f"{path}.fold_indices", "must be a list of index lists")

    # Partition cross-checks need every piece intact.
    if total is not None and test_indices is not None and folds is not None:
        test_set = set(test_indices)
        fold_union: set = set()
        fold_total = 0
        overlap_reported = False
        for i, fold in enumerate(folds):
            fold_set = set(fold)
            if fold_set & test_set and not overlap_reported:
                _fail(out, f"{path}.fold_indices[{i}]", "fold overlaps test_indices")
                overlap_reported = True
            if fold_union & fold_set:
                _fail(out, f"{path}.fold_indices[{i}]", "folds must be pairwise disjoint")
            fold_union |= fold_set
            fold_total += len(fold)
        expected = set(range(total)) - test_set
        if fold_union != expected or fold_total != len(fold_union):
            _fail(out, f"{path}.fold_indices", "folds must partition the non-test indices")
    return section if isinstance(section, Mapping) else None


def _check_model_architecture(out: List[dict], section: Any) -> None:
    path = "model_architecture"
    if not _need_map(out, section, path):
        return
    _need_closed(out, section, ("kind", "layers", "concept_names"), path)
    _need_text(out, section.get("kind"), f"{path}.kind")
    layers = section.get("layers")
    if _is_seq(layers):
        if not layers:
            _fail(out, f"{path}.layers", "must not be empty")
        for i, layer in enumerate(layers):
            layer_path = f"{path}.layers[{i}]"
            if not _need_map(out, layer, layer_path):
                continue
            _need_closed(out, layer, ("name", "input_dim", "output_dim", "activation"), layer_path)
            _need_text(out, layer.get("name"), f"{layer_path}.name")
            _need_uint(out, layer.get("input_dim"), f"{layer_path}.input_dim")
            _need_uint(out, layer.get("output_dim"), f"{layer_path}.output_dim")
            _need_text(out, layer.get("activation"), f"{layer_path}.activation")
    else:
        _fail(out, f"{path}.layers", "must be a list of layer descriptions")
    names = section.get("concept_names")
    if _is_seq(names):
        for i, name in enumerate(names):
            _need_text(out, name, f"{path}.concept_names[{i}]")
    else:
        _fail(out, f"{path}.concept_names", "must be a list of concept names")


def _check_training_methodology(out: List[dict], section: Any) -> Optional[int]:
    path = "training_methodology"
    if not _need_map(out, section, path):
        return None
    keys = ("split_fraction_test", "cv_folds", "hyperparameters", "final_model_trained_on")
    _need_closed(out, section, keys, path)
    _need_dec(out, section.get("split_fraction_test"), f"{path}.split_fraction_test",
              low=_ZERO, high=_ONE, exclusive=True)
    folds: Optional[int] = None
    if _need_uint(out, section.get("cv_folds"), f"{path}.cv_folds"):
        folds = section["cv_folds"]
        if folds < 2:
            _fail(out, f"{path}.cv_folds", "must be at least 2")
    hp = section.get("hyperparameters")
    if _need_map(out, hp, f"{path}.hyperparameters"):
        hp_keys = ("learning_rate", "epochs", "l2_lambda", "seed", "optimizer")
        _need_closed(out, hp, hp_keys, f"{path}.hyperparameters")
        _need_dec(out, hp.get("learning_rate"), f"{path}.hyperparameters.learning_rate",
                  low=_ZERO, exclusive=True)
        _need_uint(out, hp.get("epochs"), f"{path}.hyperparameters.epochs", minimum=1)
        _need_dec(out, hp.get("l2_lambda"), f"{path}.hyperparameters.l2_lambda", low=_ZERO)
        _need_uint(out, hp.get("seed"), f"{path}.hyperparameters.seed")
        _need_text(out, hp.get("optimizer"), f"{path}.hyperparameters.optimizer")
    _need_text(out, section.get("final_model_trained_on"), f"{path}.final_model_trained_on")
    return folds


def _check_performance_metrics(out: List[dict], section: Any, cv_folds: Optional[int]) -> None:
    path = "performance_metrics"
    if not _need_map(out, section, path):
        return
    _need_closed(out, section, ("cv", "final_test"), path)

    cv = section.get("cv")
    if _need_map(out, cv, f"{path}.cv"):
        _need_closed(out, cv, ("mean_accuracy", "std_accuracy", "per_fold_accuracy"), f"{path}.cv")
        per_fold = cv.get("per_fold_accuracy")
        fold_texts: Optional[List[str]] = None
        if _is_seq(per_fold):
            fold_texts = []
            for i, item in enumerate(per_fold):
                if _need_dec(out, item, f"{path}.cv.per_fold_accuracy[{i}]", low=_ZERO, high=_ONE):
                    fold_texts.append(item)
                else:
                    fold_texts = None
                    break
            if fold_texts is not None and cv_folds is not None and len(fold_texts) != cv_folds:
                _fail(out, f"{path}.cv.per_fold_accuracy",
                      f"has {len(fold_texts)} entries for cv_folds={cv_folds}")
        else:
            _fail(out, f"{path}.cv.per_fold_accuracy", "must be a list of decimal texts")
        mean_ok = _need_dec(out, cv.get("mean_accuracy"), f"{path}.cv.mean_accuracy", low=_ZERO, high=_ONE)
        std_ok = _need_dec(out, cv.get("std_accuracy"), f"{path}.cv.std_accuracy", low=_ZERO)
        if fold_texts:
            if mean_ok and cv["mean_accuracy"] != decimal_mean(fold_texts):
                _fail(out, f"{path}.cv.mean_accuracy",
                      "does not equal the mean of per_fold_accuracy at stored precision")
            if std_ok and cv["std_accuracy"] != decimal_std(fold_texts):
                _fail(out, f"{path}.cv.std_accuracy",
                      "does not equal the population standard deviation of per_fold_accuracy")

    ft = section.get("final_test")
    if _need_map(out, ft, f"{path}.final_test"):
        ft_keys = ("accuracy", "sensitivity", "specificity",
                   "true_positives", "false_positives", "true_negatives", "false_negatives")
        _need_closed(out, ft, ft_keys, f"{path}.final_test")
        counts = {}
        for key in ("true_positives", "false_positives", "true_negatives", "false_negatives"):
            if _need_uint(out, ft.get(key), f"{path}.final_test.{key}"):
                counts[key] = ft[key]
        acc_ok = _need_metric(out, ft.get("accuracy"), f"{path}.final_test.accuracy")
        sens_ok = _need_metric(out, ft.get("sensitivity"), f"{path}.final_test.sensitivity")
        spec_ok = _need_metric(out, ft.get("specificity"), f"{path}.final_test.specificity")
        if len(counts) == 4:
            tp, fp = counts["true_positives"], counts["false_positives"]
            tn, fn = counts["true_negatives"], counts["false_negatives"]
            total = tp + fp + tn + fn
            if total == 0:
                _fail(out, f"{path}.final_test", "confusion counts are all zero")
            else:
                if acc_ok and ft["accuracy"] != dec9_ratio(tp + tn, total):
                    _fail(out, f"{path}.final_test.accuracy",
                          "does not equal (tp+tn)/total at stored precision")
                if sens_ok:
                    expected = UNDEFINED_METRIC if tp + fn == 0 else dec9_ratio(tp, tp + fn)
                    if ft["sensitivity"] != expected:
                        _fail(out, f"{path}.final_test.sensitivity",
                              "does not equal tp/(tp+fn) at stored precision")
                if spec_ok:
                    expected = UNDEFINED_METRIC if tn + fp == 0 else dec9_ratio(tn, tn + fp)
                    if ft["specificity"] != expected:
                        _fail(out, f"{path}.final_test.specificity",
                              "does not equal tn/(tn+fp) at stored precision")


def _check_environment(out: List[dict], section: Any) -> None:
    path = "environment"
    if not _need_map(out, section, path):
        return
    _need_closed(out, section, ("os", "cpu", "toolkit_version", "component_versions"), path)
    _need_text(out, section.get("os"), f"{path}.os")
    _need_text(out, section.get("cpu"), f"{path}.cpu", allow_empty=True)
    _need_text(out, section.get("toolkit_version"), f"{path}.toolkit_version")
    versions = section.get("component_versions")
    if _need_map(out, versions, f"{path}.component_versions"):
        if not versions:
            _fail(out, f"{path}.component_versions", "must not be empty")
        for name, version in versions.items():
            _need_text(out, version, f"{path}.component_versions.{name}")


def _check_output_artifacts(out: List[dict], section: Any) -> None:
    path = "output_artifacts"
    if not _need_map(out, section, path):
        return
    _need_closed(out, section, ("model_path", "model_digest", "tbom_path"), path)
    _need_text(out, section.get("model_path"), f"{path}.model_path")
    _need_digest(out, section.get("model_digest"), f"{path}.model_digest")
    _need_text(out, section.get("tbom_path"), f"{path}.tbom_path")


def _validate_tbom(doc: Mapping) -> List[dict]:
    out: List[dict] = []
    for section in TBOM_SECTIONS:
        if section not in doc:
            _fail(out, section, "missing section")
    for key in doc:
        if key not in TBOM_SECTIONS:
            _fail(out, str(key), "unexpected field")
    if "project_metadata" in doc:
        _check_project_metadata(out, doc["project_metadata"])
    if "data_summary" in doc:
        _check_data_summary(out, doc["data_summary"])
    if "model_architecture" in doc:
        _check_model_architecture(out, doc["model_architecture"])
    cv_folds = _check_training_methodology(out, doc["training_methodology"]) if "training_methodology" in doc else None
    if "performance_metrics" in doc:
        _check_performance_metrics(out, doc["performance_metrics"], cv_folds)
    if "environment" in doc:
        _check_environment(out, doc["environment"])
    if "output_artifacts" in doc:
        _check_output_artifacts(out, doc["output_artifacts"])
    if "measurement" in doc:
        _need_digest(out, doc["measurement"], "measurement")
    if "data_summary" in doc and isinstance(doc["data_summary"], Mapping) and cv_folds is not None:
        folds = doc["data_summary"].get("fold_indices")
        if _is_seq(folds) and len(folds) != cv_folds:
            _fail(out, "data_summary.fold_indices", f"has {len(folds)} folds for cv_folds={cv_folds}")
    return out


# -- IBOM ----------------------------------------------------------------


def _check_inference_identification(out: List[dict], section: Any) -> None:
    path = "inference_identification"
    if not _need_map(out, section, path):
        return
    _need_closed(out, section, ("inference_id", "timestamp", "tbom_link"), path)
    inference_id = section.get("inference_id")
    if not isinstance(inference_id, str) or not _UUID_RE.match(inference_id):
        _fail(out, f"{path}.inference_id", "must be a lowercase UUID")
    timestamp = section.get("timestamp")
    if not isinstance(timestamp, str) or not _TIMESTAMP_RE.match(timestamp):
        _fail(out, f"{path}.timestamp", "must be RFC 3339 UTC with millisecond precision")
    _need_digest(out, section.get("tbom_link"), f"{path}.tbom_link")


def _check_input_metadata(out: List[dict], section: Any) -> None:
    path = "input_metadata"
    if not _need_map(out, section, path):
        return
    _need_closed(out, section, ("input_id", "raw_features", "encoded_dimensions", "preprocessing"), path)
    _need_text(out, section.get("input_id"), f"{path}.input_id")
    features = section.get("raw_features")
    if _need_map(out, features, f"{path}.raw_features"):
        if not features:
            _fail(out, f"{path}.raw_features", "must not be empty")
        for name, value in features.items():
            _need_text(out, value, f"{path}.raw_features.{name}")
    _need_uint(out, section.get("encoded_dimensions"), f"{path}.encoded_dimensions")
    _need_text(out, section.get("preprocessing"), f"{path}.preprocessing")


def _check_inference_results(out: List[dict], section: Any) -> None:
    path = "inference_results"
    if not _need_map(out, section, path):
        return
    _need_closed(out, section, ("raw_model_output", "decision_metrics", "feature_analysis"), path)

    probability_poisonous: Optional[str] = None
    raw = section.get("raw_model_output")
    if _need_map(out, raw, f"{path}.raw_model_output"):
        _need_closed(out, raw, ("logit", "probabilities"), f"{path}.raw_model_output")
        _need_dec(out, raw.get("logit"), f"{path}.raw_model_output.logit")
        probs = raw.get("probabilities")
        if _need_map(out, probs, f"{path}.raw_model_output.probabilities"):
            if set(probs.keys()) != set(CLASS_LABELS):
                _fail(out, f"{path}.raw_model_output.probabilities",
                      "must carry exactly the two class labels")
            else:
                both_ok = all(
                    _need_dec(out, probs[label], f"{path}.raw_model_output.probabilities.{label}",
                              low=_ZERO, high=_ONE)
                    for label in CLASS_LABELS
                )
                if both_ok:
                    if Decimal(probs["edible"]) + Decimal(probs["poisonous"]) != _ONE:
                        _fail(out, f"{path}.raw_model_output.probabilities",
                              "class probabilities must sum to 1 at stored precision")
                    probability_poisonous = probs["poisonous"]

    dm = section.get("decision_metrics")
    if _need_map(out, dm, f"{path}.decision_metrics"):
        dm_keys = ("decision", "confidence", "threshold", "distance_from_threshold", "certainty_level")
        _need_closed(out, dm, dm_keys, f"{path}.decision_metrics")
        decision = dm.get("decision")
        if decision not in CLASS_LABELS:
            _fail(out, f"{path}.decision_metrics.decision", "must be one of the two class labels")
            decision = None
        conf_ok = _need_dec(out, dm.get("confidence"), f"{path}.decision_metrics.confidence",
                            low=_ZERO, high=_ONE)
        thr_ok = _need_dec(out, dm.get("threshold"), f"{path}.decision_metrics.threshold",
                           low=_ZERO, high=_ONE, exclusive=True)
        dist_ok = _need_dec(out, dm.get("distance_from_threshold"),
                            f"{path}.decision_metrics.distance_from_threshold", low=_ZERO)
        certainty = dm.get("certainty_level")
        if certainty not in CERTAINTY_LEVELS:
            _fail(out, f"{path}.decision_metrics.certainty_level", "must be low, medium, or high")
            certainty = None
        # The stored conclusions must be recomputable from probability + threshold.
        if probability_poisonous is not None and thr_ok:
            expected_decision, expected_distance, expected_certainty = decide(
                probability_poisonous, dm["threshold"]
            )
            if decision is not None and decision != expected_decision:
                _fail(out, f"{path}.decision_metrics.decision",
                      f"inconsistent with probability vs threshold (expected {expected_decision})")
            if dist_ok and dm["distance_from_threshold"] != expected_distance:
                _fail(out, f"{path}.decision_metrics.distance_from_threshold",
                      f"must equal |probability - threshold| = {expected_distance}")
            if certainty is not None and certainty != expected_certainty:
                _fail(out, f"{path}.decision_metrics.certainty_level",
                      f"inconsistent with distance buckets (expected {expected_certainty})")
            if conf_ok and decision is not None and decision == expected_decision:
                expected_confidence = (
                    probability_poisonous if decision == "poisonous"
                    else complement_probability(probability_poisonous)
                )
                if dm["confidence"] != expected_confidence:
                    _fail(out, f"{path}.decision_metrics.confidence",
                          "must equal the decided class's probability")

    fa = section.get("feature_analysis")
    if _need_map(out, fa, f"{path}.feature_analysis"):
        _need_closed(out, fa, ("concept_contributions",), f"{path}.feature_analysis")
        entries = fa.get("concept_contributions")
        if _is_seq(entries):
            previous_abs: Optional[Decimal] = None
            for i, entry in enumerate(entries):
                entry_path = f"{path}.feature_analysis.concept_contributions[{i}]"
                if not _need_map(out, entry, entry_path):
                    previous_abs = None
                    continue
                _need_closed(out, entry, ("concept", "contribution"), entry_path)
                _need_text(out, entry.get("concept"), f"{entry_path}.concept")
                if _need_dec(out, entry.get("contribution"), f"{entry_path}.contribution"):
                    magnitude = abs(Decimal(entry["contribution"]))
                    if previous_abs is not None and magnitude > previous_abs:
                        _fail(out, entry_path,
                              "contributions must be ordered by decreasing magnitude")
                    previous_abs = magnitude
        else:
            _fail(out, f"{path}.feature_analysis.concept_contributions",
                  "must be a list of concept contributions")


def _check_decision_pathway(out: List[dict], section: Any) -> None:
    path = "decision_pathway"
    if not _is_seq(section):
        _fail(out, path, "must be a list of steps")
        return
    if len(section) < 4:
        _fail(out, path, f"has {len(section)} steps; at least 4 required")
    seen = set()
    for i, step in enumerate(section):
        step_path = f"{path}[{i}]"
        if not _need_map(out, step, step_path):
            continue
        _need_closed(out, step, ("step", "input_digest", "output_digest"), step_path)
        if _need_text(out, step.get("step"), f"{step_path}.step"):
            seen.add(step["step"])
        _need_digest(out, step.get("input_digest"), f"{step_path}.input_digest")
        _need_digest(out, step.get("output_digest"), f"{step_path}.output_digest")
    for required in REQUIRED_PATHWAY_STEPS:
        if required not in seen:
            _fail(out, path, f"missing required step {required!r}")


def _check_temporal(out: List[dict], section: Any) -> None:
    path = "temporal_inference_data"
    if not _need_map(out, section, path):
        return
    _need_closed(out, section, ("duration_micros",), path)
    _need_uint(out, section.get("duration_micros"), f"{path}.duration_micros")


def _check_runtime_environment(out: List[dict], section: Any) -> None:
    path = "runtime_environment"
    if not _need_map(out, section, path):
        return
    _need_closed(out, section, ("os", "cpu", "toolkit_version", "serving_system"), path)
    _need_text(out, section.get("os"), f"{path}.os")
    _need_text(out, section.get("cpu"), f"{path}.cpu", allow_empty=True)
    _need_text(out, section.get("toolkit_version"), f"{path}.toolkit_version")
    _need_text(out, section.get("serving_system"), f"{path}.serving_system")


def _validate_ibom(doc: Mapping) -> List[dict]:
    out: List[dict] = []
    for section in IBOM_SECTIONS:
        if section not in doc:
            _fail(out, section, "missing section")
    for key in doc:
        if key not in IBOM_SECTIONS:
            _fail(out, str(key), "unexpected field")
    if "inference_identification" in doc:
        _check_inference_identification(out, doc["inference_identification"])
    if "input_metadata" in doc:
        _check_input_metadata(out, doc["input_metadata"])
    if "inference_results" in doc:
        _check_inference_results(out, doc["inference_results"])
    if "decision_pathway" in doc:
        _check_decision_pathway(out, doc["decision_pathway"])
    if "temporal_inference_data" in doc:
        _check_temporal(out, doc["temporal_inference_data"])
    if "runtime_environment" in doc:
        _check_runtime_environment(out, doc["runtime_environment"])
    return out


def validate_bom(doc: Any, kind: str) -> ValidationReport:
    """Structural and cross-field validation; problems are reported, not raised."""
    if kind not in ("tbom", "ibom"):
        raise ValueError(f"unknown BOM kind {kind!r}")
    if not isinstance(doc, Mapping):
        return ValidationReport(valid=False, violations=({"path": "$", "message": "document must be an object"},))
    violations = _validate_tbom(doc) if kind == "tbom" else _validate_ibom(doc)
    return ValidationReport(valid=not violations, violations=tuple(violations))


def infer_bom_kind(doc: Any) -> Optional[str]:
    """Best-effort kind detection for documents arriving without context."""
    if isinstance(doc, Mapping):
        if "inference_identification" in doc:
            return "ibom"
        if "project_metadata" in doc:
            return "tbom"
    return None


# -- construction --------------------------------------------------------


def build_tbom(training_output: Mapping[str, Any]) -> dict:
    """Assemble a TBOM from the eight section contents and validate it.

    The result is the document that gets canonicalized and signed; identical
    inputs produce byte-identical canonical forms.
    """
    if not isinstance(training_output, Mapping):
        raise BomConstructionError("training output must be a mapping of sections")
    doc: dict = {}
    for section in TBOM_SECTIONS:
        content = training_output.get(section)
        if content is None or (isinstance(content, (Mapping, list, tuple)) and len(content) == 0):
            raise BomConstructionError(section)
        doc[section] = content
    report = validate_bom(doc, "tbom")
    if not report.valid:
        first = report.violations[0]
        raise BomConstructionError(f"invalid TBOM at {first['path']}: {first['message']}")
    return doc


def build_ibom(
    prediction: Mapping[str, Any],
    contributions: Sequence[Mapping[str, Any]],
    input_meta: Mapping[str, Any],
    pathway: Sequence[Mapping[str, Any]],
    timing: Mapping[str, Any],
    env: Mapping[str, Any],
    tbom_link: Digest,
) -> dict:
    """Assemble an IBOM around one prediction with a fresh id and timestamp.

    prediction must carry logit, probability_poisonous, threshold, decision,
    distance, certainty as decimal/label texts; contributions are
    {concept, contribution} entries already ordered by magnitude.
    """
    if len(pathway) < 4:
        raise BomConstructionError(
            f"decision_pathway has {len(pathway)} steps; at least 4 required"
        )
    probability = prediction["probability_poisonous"]
    decision = prediction["decision"]
    probabilities = {
        "poisonous": probability,
        "edible": complement_probability(probability),
    }
    steps = []
    for step in pathway:
        entry = dict(step)
        for key in ("input_digest", "output_digest"):
            if isinstance(entry.get(key), Digest):
                entry[key] = entry[key].to_doc()
        steps.append(entry)
    doc = {
        "inference_identification": {
            "inference_id": str(uuid.uuid4()),
            "timestamp": utc_timestamp(),
            "tbom_link": tbom_link.to_doc(),
        },
        "input_metadata": dict(input_meta),
        "inference_results": {
            "raw_model_output": {
                "logit": prediction["logit"],
                "probabilities": probabilities,
            },
            "decision_metrics": {
                "decision": decision,
                "confidence": probabilities[decision],
                "threshold": prediction["threshold"],
                "distance_from_threshold": prediction["distance"],
                "certainty_level": prediction["certainty"],
            },
            "feature_analysis": {
                "concept_contributions": [dict(entry) for entry in contributions],
            },
        },
        "decision_pathway": steps,
        "temporal_inference_data": dict(timing),
        "runtime_environment": dict(env),
    }
    report = validate_bom(doc, "ibom")
    if not report.valid:
        first = report.violations[0]
        raise BomConstructionError(f"invalid IBOM at {first['path']}: {first['message']}")
    return doc


def tbom_link_digest(tbom: Mapping) -> Digest:
    """Digest of the canonical TBOM payload; the chain anchor for IBOMs.

    Computed over the payload rather than any envelope, so counter-signing
    a TBOM does not break links already issued against it.
    """
    report = validate_bom(tbom, "tbom")
    if not report.valid:
        first = report.violations[0]
        raise BomConstructionError(f"invalid TBOM at {first['path']}: {first['message']}")
    return digest(canonicalize(tbom))
