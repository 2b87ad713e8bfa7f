"""Deterministic classifier training that ends in a signed training record.

The reference model is a single linear layer over one-hot concept features
trained by full-batch gradient descent on the regularized logistic loss.
Zero initialization, a fixed epoch count, and full batches leave no source
of run-to-run variation, so identical configurations produce byte-identical
artifacts and training records.
"""

from __future__ import annotations

import json
import platform
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import cryptography
import numpy as np

from .bom import build_tbom
from .canonical import (
    Digest,
    canonicalize,
    dec9,
    dec9_ratio,
    decimal_mean,
    decimal_std,
    digest,
    dump_compact,
    is_decimal_text,
)
from .data import Dataset, EncodingMap, load_csv_dataset, one_hot_encode, stratified_holdout_split, stratified_kfold
from .envelope import Envelope, KeyAuthority, KeyRecord, measurement_digest
from .errors import (
    ArtifactFormatError,
    AttestationRefusedError,
    ConfigError,
    DivergenceError,
    PipelineStageError,
)
from .version import VERSION

OPTIMIZER_NAME = "full-batch gradient descent"
ARCHITECTURE_KIND = "logistic-regression"
# The reference head is one linear layer over concept features, which keeps
# per-concept contributions exact; the tag travels with every artifact.
ARCHITECTURE_TAG = "single-linear-layer-logistic-head"
ARTIFACT_VERSION = "1"
UNDEFINED_METRIC = "undefined"

MODEL_FILE_NAME = "model.json"
TBOM_FILE_NAME = "tbom.envelope.json"
MODEL_PROVIDER_ROLE = "model-provider"


@dataclass(frozen=True)
class Hyperparameters:
    learning_rate: float = 0.1
    epochs: int = 300
    l2_lambda: float = 1e-4
    seed: int = 42
    optimizer: str = OPTIMIZER_NAME

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be at least 1")
        if self.l2_lambda < 0 or self.seed < 0:
            raise ConfigError("l2_lambda and seed must not be negative")

    def to_doc(self) -> dict:
        return {
            "learning_rate": dec9(self.learning_rate),
            "epochs": self.epochs,
            "l2_lambda": dec9(self.l2_lambda),
            "seed": self.seed,
            "optimizer": self.optimizer,
        }


def _coerce_hyperparameters(hyperparameters: Union[Hyperparameters, Mapping]) -> Hyperparameters:
    if isinstance(hyperparameters, Hyperparameters):
        return hyperparameters
    required = ("learning_rate", "epochs", "l2_lambda", "seed")
    missing = [key for key in required if key not in hyperparameters]
    if missing:
        raise ConfigError(f"hyperparameters incomplete: missing {', '.join(missing)}")
    return Hyperparameters(
        learning_rate=float(hyperparameters["learning_rate"]),
        epochs=int(hyperparameters["epochs"]),
        l2_lambda=float(hyperparameters["l2_lambda"]),
        seed=int(hyperparameters["seed"]),
        optimizer=str(hyperparameters.get("optimizer", OPTIMIZER_NAME)),
    )


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def logistic_loss(weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray, l2_lambda: float) -> float:
    """Mean regularized negative log-likelihood; bias is not penalized."""
    z = X @ weights + bias
    data_term = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return data_term + 0.5 * l2_lambda * float(weights @ weights)


def logistic_gradients(
    weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray, l2_lambda: float
) -> Tuple[np.ndarray, float]:
    residual = sigmoid(X @ weights + bias) - y
    grad_w = X.T @ residual / len(y) + l2_lambda * weights
    grad_b = float(np.mean(residual))
    return grad_w, grad_b


@dataclass(frozen=True)
class ModelArtifact:
    """Classifier parameters at stored precision plus the encoding layout."""

    weights: Tuple[str, ...]
    bias: str
    threshold: str
    encoding: EncodingMap
    architecture_tag: str
    version: str

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.encoding):
            raise ValueError(
                f"{len(self.weights)} weights for {len(self.encoding)} encoded features"
            )
        for i, weight in enumerate(self.weights):
            if not is_decimal_text(weight):
                raise ValueError(f"weight {i} is not decimal text")
        if not is_decimal_text(self.bias):
            raise ValueError("bias is not decimal text")
        if not is_decimal_text(self.threshold) or not (
            Decimal("0") < Decimal(self.threshold) < Decimal("1")
        ):
            raise ValueError("threshold must be decimal text inside (0,1)")

    def to_doc(self) -> dict:
        return {
            "architecture_tag": self.architecture_tag,
            "bias": self.bias,
            "encoding": self.encoding.to_doc(),
            "threshold": self.threshold,
            "version": self.version,
            "weights": list(self.weights),
        }

    def canonical_bytes(self) -> bytes:
        return canonicalize(self.to_doc())

    def model_digest(self) -> Digest:
        return digest(self.canonical_bytes())

    def weight_vector(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights], dtype=np.float64)

    def bias_value(self) -> float:
        return float(self.bias)

    def threshold_value(self) -> float:
        return float(self.threshold)

    def save(self, path: Union[str, Path]) -> Digest:
        # Stored bytes ARE the canonical bytes: any byte change on disk is
        # a digest change, never a cosmetic one.
        raw = dump_compact(self.to_doc())
        Path(path).write_bytes(raw)
        return digest(raw)

    @classmethod
    def from_doc(cls, doc: Mapping) -> "ModelArtifact":
        try:
            return cls(
                weights=tuple(doc["weights"]),
                bias=doc["bias"],
                threshold=doc["threshold"],
                encoding=EncodingMap.from_doc(doc["encoding"]),
                architecture_tag=doc["architecture_tag"],
                version=doc["version"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ArtifactFormatError(f"artifact document malformed: {exc}") from exc

    @classmethod
    def from_bytes(cls, raw: bytes) -> "ModelArtifact":
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ArtifactFormatError(f"artifact is not UTF-8 JSON: {exc}") from exc
        if not isinstance(doc, Mapping):
            raise ArtifactFormatError("artifact must be a JSON object")
        return cls.from_doc(doc)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ModelArtifact":
        return cls.from_bytes(Path(path).read_bytes())


def train_logistic(
    X: np.ndarray,
    y: np.ndarray,
    hyperparameters: Union[Hyperparameters, Mapping],
    encoding: EncodingMap,
    threshold: Union[str, float] = 0.5,
) -> ModelArtifact:
    """Full-batch gradient descent from zero-initialized parameters."""
    hp = _coerce_hyperparameters(hyperparameters)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("X must be a non-empty 2-d matrix")
    if y.shape != (X.shape[0],):
        raise ValueError("y length must match the number of rows in X")
    if X.shape[1] != len(encoding):
        raise ValueError(f"{X.shape[1]} columns for {len(encoding)} encoded features")
    weights = np.zeros(X.shape[1], dtype=np.float64)
    bias = 0.0
    for epoch in range(hp.epochs):
        if not np.isfinite(logistic_loss(weights, bias, X, y, hp.l2_lambda)):
            raise DivergenceError(epoch)
        grad_w, grad_b = logistic_gradients(weights, bias, X, y, hp.l2_lambda)
        weights -= hp.learning_rate * grad_w
        bias -= hp.learning_rate * grad_b
    if not np.isfinite(logistic_loss(weights, bias, X, y, hp.l2_lambda)):
        raise DivergenceError(hp.epochs)
    return ModelArtifact(
        weights=tuple(dec9(w) for w in weights),
        bias=dec9(bias),
        threshold=dec9(threshold),
        encoding=encoding,
        architecture_tag=ARCHITECTURE_TAG,
        version=ARTIFACT_VERSION,
    )


@dataclass(frozen=True)
class Metrics:
    """Confusion counts and derived rates; the positive class is poisonous."""

    accuracy: str
    sensitivity: str
    specificity: str
    true_positives: int
    false_positives: int
    true_negatives: int
    false_negatives: int

    def to_doc(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "true_negatives": self.true_negatives,
            "false_negatives": self.false_negatives,
        }


def compute_metrics(
    probabilities: Sequence[float],
    labels: Sequence[float],
    threshold: Union[str, float],
) -> Metrics:
    """Threshold probabilities and count the confusion quadrants.

    A rate with a zero denominator is reported as the undefined marker
    rather than silently mapped to a number.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError("probabilities and labels must be 1-d and the same length")
    if len(p) == 0:
        raise ValueError("cannot compute metrics over zero samples")
    thr = float(Decimal(dec9(threshold)))
    predicted = p >= thr
    actual = y == 1.0
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    tn = int(np.sum(~predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    return Metrics(
        accuracy=dec9_ratio(tp + tn, len(p)),
        sensitivity=UNDEFINED_METRIC if tp + fn == 0 else dec9_ratio(tp, tp + fn),
        specificity=UNDEFINED_METRIC if tn + fp == 0 else dec9_ratio(tn, tn + fp),
        true_positives=tp,
        false_positives=fp,
        true_negatives=tn,
        false_negatives=fn,
    )


def environment_doc() -> dict:
    return {
        "os": platform.platform(),
        "cpu": platform.machine(),
        "toolkit_version": VERSION,
        "component_versions": {
            "cryptography": cryptography.__version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }


@dataclass(frozen=True)
class TrainingConfig:
    dataset_path: str
    seed: int
    output_dir: str
    pipeline_id: str
    hyperparameters: Hyperparameters
    test_fraction: str = "0.200000000"
    cv_folds: int = 5
    threshold: str = "0.500000000"
    project_name: str = "mushroom-screen"
    project_purpose: str = "binary edibility screening over categorical mushroom attributes"
    project_version: str = "1"
    raw_bytes: bytes = b""


def load_training_config(path: Union[str, Path]) -> TrainingConfig:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config is not UTF-8 JSON: {exc}") from exc
    if not isinstance(doc, Mapping):
        raise ConfigError("config must be a JSON object")
    missing = [key for key in ("dataset_path", "seed", "output_dir", "pipeline_id") if key not in doc]
    if missing:
        raise ConfigError(f"config missing required fields: {', '.join(missing)}")
    if isinstance(doc["seed"], bool) or not isinstance(doc["seed"], int) or doc["seed"] < 0:
        raise ConfigError("seed must be an unsigned integer")
    hp_doc = doc.get("hyperparameters", {})
    if not isinstance(hp_doc, Mapping):
        raise ConfigError("hyperparameters must be an object")
    if "seed" in hp_doc:
        raise ConfigError("seed belongs at the top level, not inside hyperparameters")
    defaults = Hyperparameters()
    hp = Hyperparameters(
        learning_rate=float(hp_doc.get("learning_rate", defaults.learning_rate)),
        epochs=int(hp_doc.get("epochs", defaults.epochs)),
        l2_lambda=float(hp_doc.get("l2_lambda", defaults.l2_lambda)),
        seed=doc["seed"],
    )
    project = doc.get("project", {})
    if not isinstance(project, Mapping):
        raise ConfigError("project must be an object")
    fields = TrainingConfig.__dataclass_fields__
    return TrainingConfig(
        dataset_path=str(doc["dataset_path"]),
        seed=doc["seed"],
        output_dir=str(doc["output_dir"]),
        pipeline_id=str(doc["pipeline_id"]),
        hyperparameters=hp,
        test_fraction=dec9(doc.get("test_fraction", 0.2)),
        cv_folds=int(doc.get("cv_folds", 5)),
        threshold=dec9(doc.get("threshold", 0.5)),
        project_name=str(project.get("name", fields["project_name"].default)),
        project_purpose=str(project.get("purpose", fields["project_purpose"].default)),
        project_version=str(project.get("version", fields["project_version"].default)),
        raw_bytes=raw,
    )


@dataclass(frozen=True)
class TrainingRunResult:
    artifact: ModelArtifact
    tbom: dict
    envelope: Envelope
    key_record: KeyRecord
    measurement: Digest
    model_path: Path
    tbom_path: Path


def _stage(name: str, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except AttestationRefusedError:
        raise
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(name, exc) from exc


def _accuracy_text(probabilities: np.ndarray, labels: np.ndarray, threshold: float) -> str:
    predicted = (probabilities >= threshold).astype(np.float64)
    return dec9_ratio(int(np.sum(predicted == labels)), len(labels))


def _artifact_probabilities(artifact: ModelArtifact, X: np.ndarray) -> np.ndarray:
    # Evaluate at stored precision so anyone re-running the saved artifact
    # over the recorded indices reproduces the recorded metrics.
    return sigmoid(X @ artifact.weight_vector() + artifact.bias_value())


def run_training_job(
    config: Union[TrainingConfig, str, Path],
    authority: KeyAuthority,
) -> TrainingRunResult:
    """Execute the full pipeline and emit the signed training record.

    load -> encode -> holdout split -> k-fold CV -> final model on all
    non-test rows -> test evaluation -> record assembly -> sign. Key
    issuance comes first: a pipeline whose measurement is not allowlisted
    produces no artifacts at all.
    """
    if not isinstance(config, TrainingConfig):
        config = _stage("config", load_training_config, config)

    measurement = measurement_digest(config.raw_bytes, config.pipeline_id)
    handle, key_record = authority.issue_signing_key(measurement, MODEL_PROVIDER_ROLE)

    dataset: Dataset = _stage("load", load_csv_dataset, config.dataset_path)
    X, y, encoding = _stage("encode", one_hot_encode, dataset)
    labels = dataset.labels()
    train_idx, test_idx = _stage(
        "split", stratified_holdout_split, labels, config.test_fraction, config.seed
    )
    folds = _stage("cv", stratified_kfold, train_idx, labels, config.cv_folds, config.seed)

    def run_cv() -> List[str]:
        accuracies = []
        threshold = float(Decimal(config.threshold))
        for i, held_out in enumerate(folds):
            pool = [idx for j, fold in enumerate(folds) if j != i for idx in fold]
            fold_model = train_logistic(
                X[pool], y[pool], config.hyperparameters, encoding, config.threshold
            )
            probabilities = _artifact_probabilities(fold_model, X[held_out])
            accuracies.append(_accuracy_text(probabilities, y[held_out], threshold))
        return accuracies

    per_fold_accuracy = _stage("cv", run_cv)

    artifact: ModelArtifact = _stage(
        "final",
        train_logistic,
        X[train_idx],
        y[train_idx],
        config.hyperparameters,
        encoding,
        config.threshold,
    )

    def evaluate() -> Metrics:
        probabilities = _artifact_probabilities(artifact, X[test_idx])
        return compute_metrics(probabilities, y[test_idx], config.threshold)

    metrics = _stage("evaluate", evaluate)

    def build_record() -> dict:
        feature_count = len(encoding)
        return build_tbom(
            {
                "project_metadata": {
                    "name": config.project_name,
                    "purpose": config.project_purpose,
                    "version": config.project_version,
                    "role_identity": MODEL_PROVIDER_ROLE,
                },
                "data_summary": {
                    "dataset_name": Path(config.dataset_path).name,
                    "dataset_digest": dataset.source_digest.to_doc(),
                    "total_samples": len(dataset.rows),
                    "class_distribution": dataset.class_counts(),
                    "test_indices": list(test_idx),
                    "fold_indices": [list(fold) for fold in folds],
                },
                "model_architecture": {
                    "kind": ARCHITECTURE_KIND,
                    "layers": [
                        {
                            "name": "concept-linear",
                            "input_dim": feature_count,
                            "output_dim": 1,
                            "activation": "sigmoid",
                        }
                    ],
                    "concept_names": encoding.concept_names(),
                },
                "training_methodology": {
                    "split_fraction_test": config.test_fraction,
                    "cv_folds": config.cv_folds,
                    "hyperparameters": config.hyperparameters.to_doc(),
                    "final_model_trained_on": "all non-test samples (cv folds pooled)",
                },
                "performance_metrics": {
                    "cv": {
                        "mean_accuracy": decimal_mean(per_fold_accuracy),
                        "std_accuracy": decimal_std(per_fold_accuracy),
                        "per_fold_accuracy": list(per_fold_accuracy),
                    },
                    "final_test": metrics.to_doc(),
                },
                "environment": environment_doc(),
                "output_artifacts": {
                    "model_path": MODEL_FILE_NAME,
                    "model_digest": artifact.model_digest().to_doc(),
                    "tbom_path": TBOM_FILE_NAME,
                },
                "measurement": measurement.to_doc(),
            }
        )

    tbom = _stage("record", build_record)
    envelope = _stage("sign", authority.sign, canonicalize(tbom), handle)

    def write_outputs() -> Tuple[Path, Path]:
        output_dir = Path(config.output_dir)
        output_dir.mkdir(parents=True, exist_ok=True)
        model_path = output_dir / MODEL_FILE_NAME
        tbom_path = output_dir / TBOM_FILE_NAME
        artifact.save(model_path)
        tbom_path.write_bytes(envelope.to_bytes())
        return model_path, tbom_path

    model_path, tbom_path = _stage("write", write_outputs)
    return TrainingRunResult(
        artifact=artifact,
        tbom=tbom,
        envelope=envelope,
        key_record=key_record,
        measurement=measurement,
        model_path=model_path,
        tbom_path=tbom_path,
    )
