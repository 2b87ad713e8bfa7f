"""Signing envelopes and the attestation-gated key authority.

Envelopes bind a canonical BOM payload to one or more Ed25519 signatures
over a pre-authentication encoding of the payload. Keys are issued by a
KeyAuthority that plays the trusted third party: it hands out signing
handles only for allowlisted measurements, keeps signing material
internal, and publishes verify-only records.

The authority simulates hardware-attested key issuance. The allowlist
check stands in for remote attestation; the accountability semantics
(key bound to measurement bound to role) are the same, the hardware
guarantees are not claimed.
"""

from __future__ import annotations

import base64
import binascii
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, Mapping, Optional, Tuple, Union

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .canonical import Digest, digest
from .errors import (
    AttestationRefusedError,
    EnvelopeFormatError,
    KeyUnknownError,
    SignatureMismatchError,
    UnknownHandleError,
)

PAYLOAD_TYPE = "application/vnd.dbom+json"


def pae_encode(payload_type: str, payload: bytes) -> bytes:
    """Pre-authentication encoding: the exact byte string that gets signed.

    "DSSEv1 " + len(type) + " " + type + " " + len(payload) + " " + payload,
    with lengths as decimal byte counts.
    """
    if not payload_type or " " in payload_type or not payload_type.isascii():
        raise ValueError("payload_type must be non-empty ASCII without spaces")
    type_bytes = payload_type.encode("ascii")
    return b" ".join(
        [
            b"DSSEv1",
            str(len(type_bytes)).encode("ascii"),
            type_bytes,
            str(len(payload)).encode("ascii"),
            payload,
        ]
    )


@dataclass(frozen=True)
class Signature:
    keyid: str
    sig: bytes


@dataclass(frozen=True)
class Envelope:
    """A signed carrier for one canonical BOM payload."""

    payload_type: str
    payload: bytes
    signatures: Tuple[Signature, ...]

    def to_doc(self) -> dict:
        return {
            "payloadType": self.payload_type,
            "payload": base64.b64encode(self.payload).decode("ascii"),
            "signatures": [
                {"keyid": s.keyid, "sig": base64.b64encode(s.sig).decode("ascii")}
                for s in self.signatures
            ],
        }

    def to_bytes(self) -> bytes:
        return json.dumps(self.to_doc(), sort_keys=True, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_doc(cls, doc: Mapping) -> "Envelope":
        if not isinstance(doc, Mapping):
            raise EnvelopeFormatError("envelope must be a JSON object")
        try:
            payload_type = doc["payloadType"]
            payload_b64 = doc["payload"]
            raw_sigs = doc["signatures"]
        except (KeyError, TypeError) as exc:
            raise EnvelopeFormatError(f"envelope missing field: {exc}") from exc
        if not isinstance(payload_type, str) or not isinstance(payload_b64, str):
            raise EnvelopeFormatError("payloadType and payload must be text")
        if not isinstance(raw_sigs, list) or not raw_sigs:
            raise EnvelopeFormatError("envelope carries no signatures")
        try:
            payload = base64.b64decode(payload_b64.encode("ascii"), validate=True)
        except (binascii.Error, ValueError, UnicodeEncodeError) as exc:
            raise EnvelopeFormatError(f"payload is not valid base64: {exc}") from exc
        try:
            json.loads(payload.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise EnvelopeFormatError(f"payload is not UTF-8 JSON: {exc}") from exc
        sigs = []
        for i, entry in enumerate(raw_sigs):
            if not isinstance(entry, Mapping) or "keyid" not in entry or "sig" not in entry:
                raise EnvelopeFormatError(f"signature {i} must carry keyid and sig")
            if not isinstance(entry["keyid"], str) or not isinstance(entry["sig"], str):
                raise EnvelopeFormatError(f"signature {i} fields must be text")
            try:
                sig = base64.b64decode(entry["sig"].encode("ascii"), validate=True)
            except (binascii.Error, ValueError, UnicodeEncodeError) as exc:
                raise EnvelopeFormatError(f"signature {i} is not valid base64: {exc}") from exc
            sigs.append(Signature(keyid=entry["keyid"], sig=sig))
        return cls(payload_type=payload_type, payload=payload, signatures=tuple(sigs))

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Envelope":
        try:
            doc = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise EnvelopeFormatError(f"envelope is not UTF-8 JSON: {exc}") from exc
        return cls.from_doc(doc)


@dataclass(frozen=True)
class KeyRecord:
    """Published verify-only side of an issued key."""

    keyid: str
    verifying_key: str  # base64 of the raw 32-byte Ed25519 public key
    bound_measurement: Digest
    role_identity: str
    issued_at: str

    def to_doc(self) -> dict:
        return {
            "keyid": self.keyid,
            "verifying_key": self.verifying_key,
            "bound_measurement": self.bound_measurement.to_doc(),
            "role_identity": self.role_identity,
            "issued_at": self.issued_at,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "KeyRecord":
        return cls(
            keyid=doc["keyid"],
            verifying_key=doc["verifying_key"],
            bound_measurement=Digest.from_doc(doc["bound_measurement"]),
            role_identity=doc["role_identity"],
            issued_at=doc["issued_at"],
        )

    def public_key(self) -> Ed25519PublicKey:
        raw = base64.b64decode(self.verifying_key.encode("ascii"), validate=True)
        return Ed25519PublicKey.from_public_bytes(raw)


@dataclass(frozen=True)
class KeyHandle:
    """Opaque reference to a signing key held by the issuing authority."""

    keyid: str


@dataclass(frozen=True)
class VerifyResult:
    payload: bytes
    verified_keyids: Tuple[str, ...]


def _keyid_for(public_raw: bytes) -> str:
    return digest(public_raw).hex[:16]


def _utc_now_rfc3339() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds").replace("+00:00", "Z")


class KeyRegistry:
    """keyid -> KeyRecord lookup, persistable as JSON lines."""

    def __init__(self, records: Iterable[KeyRecord] = ()):
        self._records: Dict[str, KeyRecord] = {r.keyid: r for r in records}

    def add(self, record: KeyRecord) -> None:
        self._records[record.keyid] = record

    def get(self, keyid: str) -> Optional[KeyRecord]:
        return self._records.get(keyid)

    def lookup(self, keyid: str) -> KeyRecord:
        record = self._records.get(keyid)
        if record is None:
            raise KeyUnknownError(f"no published key record for keyid {keyid!r}")
        return record

    def records(self) -> Tuple[KeyRecord, ...]:
        return tuple(self._records.values())

    def save(self, path: Union[str, Path]) -> None:
        lines = [json.dumps(r.to_doc(), sort_keys=True) for r in self._records.values()]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "KeyRegistry":
        registry = cls()
        text = Path(path).read_text(encoding="utf-8")
        for line in text.splitlines():
            if line.strip():
                registry.add(KeyRecord.from_doc(json.loads(line)))
        return registry


def verify(envelope: Envelope, registry: KeyRegistry) -> VerifyResult:
    """Return the payload iff at least one signature checks out.

    Raises KeyUnknownError when no signature's keyid resolves at all, and
    SignatureMismatchError when keys resolve but every signature fails.
    """
    pae = pae_encode(envelope.payload_type, envelope.payload)
    resolved = [(s, registry.get(s.keyid)) for s in envelope.signatures]
    if all(record is None for _, record in resolved):
        keyids = ", ".join(s.keyid for s in envelope.signatures)
        raise KeyUnknownError(f"no registered key for any signature keyid ({keyids})")
    verified = []
    for sig, record in resolved:
        if record is None:
            continue
        try:
            record.public_key().verify(sig.sig, pae)
        except InvalidSignature:
            continue
        verified.append(sig.keyid)
    if not verified:
        raise SignatureMismatchError("every resolvable signature failed verification")
    return VerifyResult(payload=envelope.payload, verified_keyids=tuple(verified))


class KeyAuthority:
    """Simulated configuration-and-attestation service.

    Holds the allowlist of pipeline measurements, issues fresh Ed25519
    pairs for allowlisted measurements, signs payloads through handles,
    and publishes only verifying keys. Issuance and signing are serialized
    through an internal lock; registry lookups never expose signing bytes.
    """

    def __init__(self, allowlist: Iterable[Union[Digest, str]] = ()):
        self._lock = threading.Lock()
        self._allow: set = set()
        self._signing: Dict[str, Ed25519PrivateKey] = {}
        self.registry = KeyRegistry()
        for m in allowlist:
            self.allow(m)

    @staticmethod
    def _measurement_hex(measurement: Union[Digest, str]) -> str:
        if isinstance(measurement, Digest):
            return measurement.hex
        return Digest(hex=measurement).hex  # validates shape

    def allow(self, measurement: Union[Digest, str]) -> None:
        with self._lock:
            self._allow.add(self._measurement_hex(measurement))

    def allowlisted(self) -> Tuple[str, ...]:
        with self._lock:
            return tuple(sorted(self._allow))

    def issue_signing_key(
        self, measurement: Union[Digest, str], role_identity: str
    ) -> Tuple[KeyHandle, KeyRecord]:
        """Fresh key pair for an allowlisted measurement; record is published."""
        measurement_hex = self._measurement_hex(measurement)
        with self._lock:
            if measurement_hex not in self._allow:
                raise AttestationRefusedError(
                    f"measurement {measurement_hex[:16]}... is not allowlisted; key issuance refused"
                )
            private = Ed25519PrivateKey.generate()
            return self._register_locked(private, measurement_hex, role_identity)

    def import_signing_key(
        self,
        private_bytes: bytes,
        measurement: Union[Digest, str],
        role_identity: str,
    ) -> Tuple[KeyHandle, KeyRecord]:
        """Register an externally generated Ed25519 key under the same gate."""
        measurement_hex = self._measurement_hex(measurement)
        with self._lock:
            if measurement_hex not in self._allow:
                raise AttestationRefusedError(
                    f"measurement {measurement_hex[:16]}... is not allowlisted; key import refused"
                )
            private = Ed25519PrivateKey.from_private_bytes(private_bytes)
            return self._register_locked(private, measurement_hex, role_identity)

    def _register_locked(
        self, private: Ed25519PrivateKey, measurement_hex: str, role_identity: str
    ) -> Tuple[KeyHandle, KeyRecord]:
        public_raw = private.public_key().public_bytes_raw()
        keyid = _keyid_for(public_raw)
        record = KeyRecord(
            keyid=keyid,
            verifying_key=base64.b64encode(public_raw).decode("ascii"),
            bound_measurement=Digest(hex=measurement_hex),
            role_identity=role_identity,
            issued_at=_utc_now_rfc3339(),
        )
        self._signing[keyid] = private
        self.registry.add(record)
        return KeyHandle(keyid=keyid), record

    def lookup_verifying_key(self, keyid: str) -> KeyRecord:
        return self.registry.lookup(keyid)

    def sign(self, payload: bytes, handle: KeyHandle) -> Envelope:
        """Ed25519 over the pre-authentication encoding of the payload."""
        with self._lock:
            private = self._signing.get(handle.keyid)
            if private is None:
                raise UnknownHandleError(f"unknown key {handle.keyid!r}")
            sig = private.sign(pae_encode(PAYLOAD_TYPE, payload))
        return Envelope(
            payload_type=PAYLOAD_TYPE,
            payload=payload,
            signatures=(Signature(keyid=handle.keyid, sig=sig),),
        )

    # -- persistence ---------------------------------------------------
    #
    # The state directory stands in for the authority's sealed storage.
    # Nothing in the public API (KeyRecord, KeyHandle, registry files)
    # ever carries signing bytes; only the authority's own state file does.

    def save_state(self, state_dir: Union[str, Path]) -> None:
        state = Path(state_dir)
        state.mkdir(parents=True, exist_ok=True)
        with self._lock:
            (state / "allowlist.json").write_text(
                json.dumps(sorted(self._allow), indent=2) + "\n", encoding="utf-8"
            )
            sealed = {
                keyid: base64.b64encode(key.private_bytes_raw()).decode("ascii")
                for keyid, key in self._signing.items()
            }
            (state / "sealed_keys.json").write_text(
                json.dumps(sealed, sort_keys=True) + "\n", encoding="utf-8"
            )
        self.registry.save(state / "registry.jsonl")

    @classmethod
    def load_state(cls, state_dir: Union[str, Path]) -> "KeyAuthority":
        state = Path(state_dir)
        authority = cls()
        allow_path = state / "allowlist.json"
        if allow_path.exists():
            for m in json.loads(allow_path.read_text(encoding="utf-8")):
                authority.allow(m)
        registry_path = state / "registry.jsonl"
        if registry_path.exists():
            authority.registry = KeyRegistry.load(registry_path)
        sealed_path = state / "sealed_keys.json"
        if sealed_path.exists():
            sealed = json.loads(sealed_path.read_text(encoding="utf-8"))
            for keyid, b64 in sealed.items():
                raw = base64.b64decode(b64.encode("ascii"), validate=True)
                authority._signing[keyid] = Ed25519PrivateKey.from_private_bytes(raw)
        return authority


def measurement_digest(config_bytes: bytes, pipeline_id: str) -> Digest:
    """Identity of a pipeline: hash of its configuration file plus its id."""
    return digest(config_bytes + b"\n" + pipeline_id.encode("utf-8"))
