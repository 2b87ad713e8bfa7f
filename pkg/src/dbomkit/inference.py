"""Model verification, prediction, concept contributions, signed decisions.

The logit is accumulated in decimal arithmetic over the artifact's stored
weight texts, so the contribution identity (sum of active weights plus
bias equals the logit) holds exactly at stored precision, not merely to
float tolerance. Only the final squash to a probability runs in binary
floating point.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from decimal import Decimal
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .bom import build_ibom, decide, tbom_link_digest
from .canonical import Digest, canonicalize, dec9, digest
from .envelope import Envelope, KeyAuthority, KeyHandle
from .errors import InferenceInputError, ModelTamperedError
from .training import ModelArtifact, environment_doc
from .version import VERSION

PREPROCESSING_NOTE = "strict one-hot over training-observed attribute values"
DEFAULT_SERVING_SYSTEM = "dbom-inference"
INFERENCE_ROLE = "inference-service"


@dataclass(frozen=True)
class Prediction:
    """One decision at stored precision; every field is recomputable."""

    logit: str
    probability_poisonous: str
    threshold: str
    decision: str
    distance: str
    certainty: str

    def to_doc(self) -> dict:
        return {
            "logit": self.logit,
            "probability_poisonous": self.probability_poisonous,
            "threshold": self.threshold,
            "decision": self.decision,
            "distance": self.distance,
            "certainty": self.certainty,
        }


@dataclass(frozen=True)
class ContributionEntry:
    concept: str
    contribution: str


@dataclass(frozen=True)
class ContributionList:
    """Per-concept weighted influence, ordered by decreasing magnitude."""

    entries: Tuple[ContributionEntry, ...]

    def to_docs(self) -> List[dict]:
        return [{"concept": e.concept, "contribution": e.contribution} for e in self.entries]

    def total(self) -> Decimal:
        return sum((Decimal(e.contribution) for e in self.entries), Decimal("0"))


def _sigmoid_scalar(z: float) -> float:
    if z >= 0:
        e = math.exp(-z)
        return 1.0 / (1.0 + e)
    e = math.exp(z)
    return e / (1.0 + e)


def _check_binary_vector(model: ModelArtifact, encoded: np.ndarray) -> np.ndarray:
    vector = np.asarray(encoded, dtype=np.float64)
    if vector.shape != (len(model.encoding),):
        raise InferenceInputError(
            f"encoded vector has {vector.shape} entries for {len(model.encoding)} features"
        )
    if not np.all((vector == 0.0) | (vector == 1.0)):
        raise InferenceInputError("encoded vector entries must be 0 or 1")
    return vector


def _decimal_logit(model: ModelArtifact, vector: np.ndarray) -> str:
    total = Decimal(model.bias)
    for position in np.flatnonzero(vector):
        total += Decimal(model.weights[int(position)])
    return dec9(total)


def _predict_from_vector(model: ModelArtifact, vector: np.ndarray) -> Prediction:
    logit = _decimal_logit(model, vector)
    probability = dec9(_sigmoid_scalar(float(Decimal(logit))))
    decision, distance, certainty = decide(probability, model.threshold)
    return Prediction(
        logit=logit,
        probability_poisonous=probability,
        threshold=model.threshold,
        decision=decision,
        distance=distance,
        certainty=certainty,
    )


def predict(model: ModelArtifact, raw_features: Mapping[str, str]) -> Tuple[Prediction, np.ndarray]:
    """Encode strictly and decide; unseen values are refused, not guessed."""
    vector = model.encoding.encode(raw_features)
    return _predict_from_vector(model, vector), vector


def concept_contributions(model: ModelArtifact, encoded: Sequence[float]) -> ContributionList:
    """w_j * x_j for every feature, ordered by magnitude (ties keep layout order)."""
    vector = _check_binary_vector(model, encoded)
    names = model.encoding.concept_names()
    zero = dec9(0)
    entries = []
    for position, name in enumerate(names):
        contribution = model.weights[position] if vector[position] == 1.0 else zero
        entries.append((position, name, contribution))
    entries.sort(key=lambda item: (-abs(Decimal(item[2])), item[0]))
    return ContributionList(
        entries=tuple(ContributionEntry(concept=name, contribution=c) for _, name, c in entries)
    )


def what_if(
    model: ModelArtifact,
    raw_features: Mapping[str, str],
    overrides: Mapping[str, int],
) -> Tuple[Prediction, ContributionList]:
    """Hypothetical re-prediction with concepts forced on or off.

    The result is never signed and never becomes an inference record;
    interventions are exploration, not decisions.
    """
    vector = model.encoding.encode(raw_features)
    for concept, value in overrides.items():
        position = model.encoding.position_of_concept(concept)
        if isinstance(value, bool) or value not in (0, 1):
            raise InferenceInputError(f"override for {concept!r} must be 0 or 1")
        vector[position] = float(value)
    return _predict_from_vector(model, vector), concept_contributions(model, vector)


def verify_model_against_tbom(artifact_bytes: bytes, tbom: Mapping) -> ModelArtifact:
    """Load the artifact only if its canonical digest matches the record."""
    artifact = ModelArtifact.from_bytes(artifact_bytes)
    try:
        pinned = tbom["output_artifacts"]["model_digest"]["hex"]
    except (KeyError, TypeError) as exc:
        raise ModelTamperedError(f"record carries no usable model digest: {exc}") from exc
    actual = artifact.model_digest().hex
    if actual != pinned:
        raise ModelTamperedError(
            f"model digest {actual[:16]}... does not match the recorded {str(pinned)[:16]}..."
        )
    return artifact


def runtime_environment_doc(serving_system: str) -> dict:
    env = environment_doc()
    return {
        "os": env["os"],
        "cpu": env["cpu"],
        "toolkit_version": VERSION,
        "serving_system": serving_system,
    }


@dataclass(frozen=True)
class InferenceRunResult:
    envelope: Envelope
    ibom: dict
    prediction: Prediction
    contributions: ContributionList


def run_inference_job(
    raw_features: Mapping[str, str],
    model: ModelArtifact,
    tbom: Mapping,
    authority: KeyAuthority,
    handle: KeyHandle,
    serving_system: str = DEFAULT_SERVING_SYSTEM,
    request_bytes: Optional[bytes] = None,
) -> InferenceRunResult:
    """Predict and emit the signed per-decision record.

    The pathway hashes each stage's input and output, and the verify-model
    step re-checks the artifact digest against the record: a tampered model
    means no record is produced at all.
    """
    started = time.monotonic_ns()
    link = tbom_link_digest(tbom)

    features_doc = dict(raw_features)
    features_digest = digest(canonicalize(features_doc))
    request_digest = digest(request_bytes) if request_bytes is not None else features_digest

    artifact_digest = model.model_digest()
    pinned_hex = tbom["output_artifacts"]["model_digest"]["hex"]
    if artifact_digest.hex != pinned_hex:
        raise ModelTamperedError(
            f"model digest {artifact_digest.hex[:16]}... does not match the recorded {pinned_hex[:16]}..."
        )

    prediction, vector = predict(model, raw_features)
    contributions = concept_contributions(model, vector)

    encoded_digest = digest(canonicalize([int(v) for v in vector]))
    prediction_digest = digest(canonicalize(prediction.to_doc()))
    pathway = [
        {"step": "decode-input", "input_digest": request_digest, "output_digest": features_digest},
        {
            "step": "verify-model",
            "input_digest": artifact_digest,
            "output_digest": Digest(hex=pinned_hex),
        },
        {"step": "encode", "input_digest": features_digest, "output_digest": encoded_digest},
        {"step": "predict", "input_digest": encoded_digest, "output_digest": prediction_digest},
    ]
    input_meta = {
        "input_id": features_digest.hex[:16],
        "raw_features": features_doc,
        "encoded_dimensions": len(vector),
        "preprocessing": PREPROCESSING_NOTE,
    }
    duration_micros = max(0, (time.monotonic_ns() - started) // 1000)
    ibom = build_ibom(
        prediction=prediction.to_doc(),
        contributions=contributions.to_docs(),
        input_meta=input_meta,
        pathway=pathway,
        timing={"duration_micros": int(duration_micros)},
        env=runtime_environment_doc(serving_system),
        tbom_link=link,
    )
    envelope = authority.sign(canonicalize(ibom), handle)
    return InferenceRunResult(
        envelope=envelope, ibom=ibom, prediction=prediction, contributions=contributions
    )
