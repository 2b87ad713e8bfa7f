"""HTTP serving frontend.

Startup is fail-closed: the app will not be constructed unless the signed
training record verifies against the registry, the model artifact matches
the digest inside that record, and the key authority agrees to issue a
signing key for this workload's measurement. Request bodies are parsed by
hand so malformed JSON is answered with 400 rather than a framework
validation response.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .bom import complement_probability, tbom_link_digest
from .canonical import digest
from .checkers import integrity_check
from .envelope import Envelope, KeyAuthority, KeyRegistry, measurement_digest
from .errors import (
    ConfigError,
    InferenceInputError,
    KeyUnknownError,
    OutOfVocabularyError,
    VigilanceLogError,
)
from .inference import (
    DEFAULT_SERVING_SYSTEM,
    INFERENCE_ROLE,
    run_inference_job,
    verify_model_against_tbom,
    what_if,
)
from .vigilance import vigilance_submit
from .version import VERSION


@dataclass(frozen=True)
class ServiceConfig:
    model_path: Path
    tbom_path: Path
    authority_dir: Path
    vigilance_log_path: Path
    registry_path: Optional[Path] = None
    bind: str = "127.0.0.1:8750"
    pipeline_id: str = "inference"
    serving_system: str = DEFAULT_SERVING_SYSTEM


_REQUIRED_KEYS = ("model_path", "tbom_path", "authority_dir")
_OPTIONAL_KEYS = ("vigilance_log_path", "registry_path", "bind", "pipeline_id", "serving_system")


def load_service_config(path: Union[str, Path]) -> ServiceConfig:
    """Relative paths in the file resolve against the file's directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read service config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"service config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("service config must be a JSON object")
    unknown = set(doc) - set(_REQUIRED_KEYS) - set(_OPTIONAL_KEYS)
    if unknown:
        raise ConfigError(f"service config has unknown keys: {sorted(unknown)}")
    for key in _REQUIRED_KEYS:
        if not isinstance(doc.get(key), str) or not doc[key]:
            raise ConfigError(f"service config needs a non-empty string {key!r}")
    base = path.parent

    def _resolve(value: str) -> Path:
        candidate = Path(value)
        return candidate if candidate.is_absolute() else base / candidate

    registry_value = doc.get("registry_path")
    if registry_value is not None and (not isinstance(registry_value, str) or not registry_value):
        raise ConfigError("registry_path must be a non-empty string when given")
    for key in ("bind", "pipeline_id", "serving_system", "vigilance_log_path"):
        if key in doc and (not isinstance(doc[key], str) or not doc[key]):
            raise ConfigError(f"{key} must be a non-empty string when given")
    return ServiceConfig(
        model_path=_resolve(doc["model_path"]),
        tbom_path=_resolve(doc["tbom_path"]),
        authority_dir=_resolve(doc["authority_dir"]),
        vigilance_log_path=_resolve(doc.get("vigilance_log_path", "vigilance.jsonl")),
        registry_path=_resolve(registry_value) if registry_value else None,
        bind=doc.get("bind", "127.0.0.1:8750"),
        pipeline_id=doc.get("pipeline_id", "inference"),
        serving_system=doc.get("serving_system", DEFAULT_SERVING_SYSTEM),
    )


class ServiceState:
    """Everything verified once at startup, shared by all requests."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.authority = KeyAuthority.load_state(config.authority_dir)
        self.extra_registry = (
            KeyRegistry.load(config.registry_path) if config.registry_path else None
        )
        tbom_bytes = Path(config.tbom_path).read_bytes()
        report = integrity_check(tbom_bytes, self._merged_registry())
        if not report.passed or report.kind != "tbom":
            details = "; ".join(f"[{f['stage']}] {f['message']}" for f in report.failures)
            raise ConfigError(f"training record failed verification, refusing to start: {details}")
        self.tbom = report.payload
        self.tbom_envelope = Envelope.from_bytes(tbom_bytes)
        self.model = verify_model_against_tbom(Path(config.model_path).read_bytes(), self.tbom)
        self.link = tbom_link_digest(self.tbom)
        self.measurement = measurement_digest(tbom_bytes, config.pipeline_id)
        self.handle, self.key_record = self.authority.issue_signing_key(
            self.measurement, INFERENCE_ROLE
        )
        self.authority.save_state(config.authority_dir)
        self.registry = self._merged_registry()
        self.lock = threading.Lock()
        # Served records by the digest of their envelope payload.
        self.store: Dict[str, dict] = {
            digest(self.tbom_envelope.payload).hex: self.tbom_envelope.to_doc()
        }

    def _merged_registry(self) -> KeyRegistry:
        merged = KeyRegistry()
        for record in self.authority.registry.records():
            merged.add(record)
        if self.extra_registry is not None:
            for record in self.extra_registry.records():
                merged.add(record)
        return merged


def _bad_request(message: str) -> JSONResponse:
    return JSONResponse({"error": message}, status_code=400)


async def _read_object(request: Request) -> Tuple[Optional[dict], Optional[bytes], Optional[JSONResponse]]:
    raw = await request.body()
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return None, None, _bad_request("request body is not valid JSON")
    if not isinstance(doc, dict):
        return None, None, _bad_request("request body must be a JSON object")
    return doc, raw, None


def _features_from(doc: Mapping) -> Optional[Dict[str, str]]:
    features = doc.get("features")
    if not isinstance(features, dict):
        return None
    if not all(isinstance(k, str) and isinstance(v, str) for k, v in features.items()):
        return None
    return features


def create_app(config: ServiceConfig) -> FastAPI:
    state = ServiceState(config)
    app = FastAPI(title="decision record service", docs_url=None, redoc_url=None, openapi_url=None)
    # Responses are signed documents and public digests; letting a separately
    # served inspector page read them cross-origin costs nothing.
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["GET", "POST"])

    @app.post("/infer")
    async def infer(request: Request):
        doc, raw, err = await _read_object(request)
        if err is not None:
            return err
        features = _features_from(doc)
        if features is None:
            return _bad_request("'features' must map attribute names to symbol strings")
        try:
            result = run_inference_job(
                features,
                state.model,
                state.tbom,
                state.authority,
                state.handle,
                serving_system=config.serving_system,
                request_bytes=raw,
            )
        except (InferenceInputError, OutOfVocabularyError) as exc:
            return _bad_request(str(exc))
        payload_digest = digest(result.envelope.payload).hex
        envelope_doc = result.envelope.to_doc()
        with state.lock:
            state.store[payload_digest] = envelope_doc
        results = result.ibom["inference_results"]
        return JSONResponse(
            {
                "decision": results["decision_metrics"]["decision"],
                "confidence": results["decision_metrics"]["confidence"],
                "certainty_level": results["decision_metrics"]["certainty_level"],
                "distance_from_threshold": results["decision_metrics"]["distance_from_threshold"],
                "probabilities": results["raw_model_output"]["probabilities"],
                "inference_id": result.ibom["inference_identification"]["inference_id"],
                "payload_digest": payload_digest,
                "envelope": envelope_doc,
            }
        )

    @app.post("/whatif")
    async def whatif(request: Request):
        doc, _, err = await _read_object(request)
        if err is not None:
            return err
        features = _features_from(doc)
        if features is None:
            return _bad_request("'features' must map attribute names to symbol strings")
        overrides = doc.get("overrides", {})
        if not isinstance(overrides, dict) or not all(isinstance(k, str) for k in overrides):
            return _bad_request("'overrides' must map concept names to 0 or 1")
        try:
            prediction, contributions = what_if(state.model, features, overrides)
        except (InferenceInputError, OutOfVocabularyError) as exc:
            return _bad_request(str(exc))
        poisonous = prediction.probability_poisonous
        edible = complement_probability(poisonous)
        confidence = poisonous if prediction.decision == "poisonous" else edible
        return JSONResponse(
            {
                "unsigned": True,
                "decision": prediction.decision,
                "confidence": confidence,
                "certainty_level": prediction.certainty,
                "distance_from_threshold": prediction.distance,
                "probabilities": {"edible": edible, "poisonous": poisonous},
                "concept_contributions": contributions.to_docs(),
                "overrides_applied": {k: int(v) for k, v in overrides.items()},
            }
        )

    @app.post("/verify")
    async def verify_endpoint(request: Request):
        doc, _, err = await _read_object(request)
        if err is not None:
            return err
        report = integrity_check(doc, state.registry)
        return JSONResponse(report.to_doc())

    @app.get("/bom/{payload_digest}")
    async def bom(payload_digest: str):
        with state.lock:
            envelope_doc = state.store.get(payload_digest)
        if envelope_doc is None:
            return JSONResponse({"error": "no record with that payload digest"}, status_code=404)
        return JSONResponse(envelope_doc)

    @app.get("/keys/{keyid}")
    async def keys(keyid: str):
        try:
            record = state.registry.lookup(keyid)
        except KeyUnknownError:
            return JSONResponse({"error": "unknown keyid"}, status_code=404)
        return JSONResponse(record.to_doc())

    @app.post("/vigilance/report")
    async def vigilance_report(request: Request):
        doc, _, err = await _read_object(request)
        if err is not None:
            return err
        try:
            with state.lock:
                receipt = vigilance_submit(config.vigilance_log_path, doc, state.registry)
        except VigilanceLogError as exc:
            return JSONResponse({"error": str(exc)}, status_code=500)
        return JSONResponse(receipt.to_doc())

    @app.get("/health")
    async def health():
        return JSONResponse(
            {
                "status": "ok",
                "toolkit_version": VERSION,
                "keyid": state.handle.keyid,
                "model_digest": state.model.model_digest().hex,
                "tbom_link": state.link.hex,
            }
        )

    app.state.dbom = state
    return app
