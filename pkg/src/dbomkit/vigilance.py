"""Post-deployment vigilance: an append-only submission log plus scans.

Producers submit signed records to a JSONL log; every submission is logged
with a verdict, rejected ones included, so the log is itself an audit trail.
Scans read the whole log and flag anomalies without mutating it.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

from .bom import utc_timestamp
from .canonical import dec9, digest
from .checkers import EnvelopeSource, _coerce_envelope, integrity_check
from .envelope import Envelope, KeyRegistry
from .errors import EnvelopeFormatError, VigilanceLogError


@dataclass(frozen=True)
class Receipt:
    sequence: int
    accepted: bool
    duplicate: bool

    def to_doc(self) -> dict:
        return {"sequence": self.sequence, "accepted": self.accepted, "duplicate": self.duplicate}


@dataclass(frozen=True)
class VigilancePolicy:
    drift_threshold: Decimal = Decimal("0.02")
    low_certainty_threshold: Decimal = Decimal("0.30")
    window: int = 50


@dataclass(frozen=True)
class VigilanceFinding:
    kind: str
    subject: str
    detail: str
    window_from: int
    window_to: int

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "subject": self.subject,
            "detail": self.detail,
            "window": {"from_seq": self.window_from, "to_seq": self.window_to},
        }


def _read_log(log_path: Union[str, Path]) -> List[dict]:
    path = Path(log_path)
    if not path.exists():
        return []
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise VigilanceLogError(f"cannot read vigilance log: {exc}") from exc
    entries: List[dict] = []
    for line_number, line in enumerate(raw.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise VigilanceLogError(f"vigilance log line {line_number} is not JSON: {exc}") from exc
        if not isinstance(entry, dict):
            raise VigilanceLogError(f"vigilance log line {line_number} is not an object")
        entries.append(entry)
    for position, entry in enumerate(entries, start=1):
        if entry.get("sequence") != position:
            raise VigilanceLogError(
                f"vigilance log sequence broken at entry {position}: found {entry.get('sequence')!r}"
            )
    return entries


def _submission_digests(source: EnvelopeSource) -> tuple:
    """(payload digest hex, envelope doc or None).

    Duplicates are detected on the payload, so re-wrapping the same record
    in a fresh envelope still counts as a duplicate. Submissions too broken
    to parse are fingerprinted by their raw bytes instead.
    """
    try:
        envelope = _coerce_envelope(source)
        return digest(envelope.payload).hex, envelope.to_doc()
    except EnvelopeFormatError:
        if isinstance(source, bytes):
            raw = source
        elif isinstance(source, (str, Path)):
            try:
                raw = Path(source).read_bytes()
            except OSError:
                raw = str(source).encode("utf-8")
        else:
            raw = json.dumps(source, sort_keys=True, default=str).encode("utf-8")
        return digest(raw).hex, None


def vigilance_submit(
    log_path: Union[str, Path],
    source: EnvelopeSource,
    registry: KeyRegistry,
) -> Receipt:
    """Verify a submission and append the outcome to the log.

    Rejected submissions are logged too. Raises VigilanceLogError if the
    existing log cannot be read or the append fails; the log is not
    modified in that case.
    """
    entries = _read_log(log_path)
    payload_digest, envelope_doc = _submission_digests(source)
    report = integrity_check(source, registry)

    sequence = len(entries) + 1
    duplicate = any(entry.get("payload_digest") == payload_digest for entry in entries)
    entry = {
        "sequence": sequence,
        "accepted": report.passed,
        "duplicate": duplicate,
        "payload_digest": payload_digest,
        "kind": report.kind,
        "keyid": report.keyid_used,
        "failures": [dict(f) for f in report.failures],
        "envelope": envelope_doc,
        "submitted_at": utc_timestamp(),
    }
    line = json.dumps(entry, sort_keys=True) + "\n"
    try:
        with open(log_path, "a", encoding="utf-8") as handle:
            handle.write(line)
    except OSError as exc:
        raise VigilanceLogError(f"cannot append to vigilance log: {exc}") from exc
    return Receipt(sequence=sequence, accepted=report.passed, duplicate=duplicate)


def _entry_payload(entry: Mapping) -> Optional[dict]:
    envelope_doc = entry.get("envelope")
    if not isinstance(envelope_doc, Mapping):
        return None
    try:
        payload = json.loads(base64.b64decode(envelope_doc["payload"], validate=True))
    except (KeyError, TypeError, ValueError):
        return None
    return payload if isinstance(payload, dict) else None


def _dig(doc: Any, *path: str) -> Any:
    current = doc
    for segment in path:
        if not isinstance(current, Mapping) or segment not in current:
            return None
        current = current[segment]
    return current


def _scan_accuracy_drift(entries: Sequence[Mapping], policy: VigilancePolicy) -> List[VigilanceFinding]:
    findings: List[VigilanceFinding] = []
    # (sequence, accuracy text) of the latest prior training record per project.
    previous: Dict[str, tuple] = {}
    for entry in entries:
        if not entry.get("accepted") or entry.get("kind") != "tbom":
            continue
        payload = _entry_payload(entry)
        if payload is None:
            continue
        project = _dig(payload, "project_metadata", "name")
        accuracy = _dig(payload, "performance_metrics", "final_test", "accuracy")
        if not isinstance(project, str) or not isinstance(accuracy, str):
            continue
        if accuracy == "undefined":
            # No comparable number; the next measurable record starts fresh.
            previous.pop(project, None)
            continue
        sequence = entry["sequence"]
        if project in previous:
            prior_seq, prior_accuracy = previous[project]
            drop = Decimal(prior_accuracy) - Decimal(accuracy)
            if drop > policy.drift_threshold:
                findings.append(
                    VigilanceFinding(
                        kind="accuracy_drift",
                        subject=project,
                        detail=(
                            f"final test accuracy fell from {prior_accuracy} to {accuracy}"
                            f" (drop {dec9(drop)} exceeds {dec9(policy.drift_threshold)})"
                        ),
                        window_from=prior_seq,
                        window_to=sequence,
                    )
                )
        previous[project] = (sequence, accuracy)
    return findings


def _scan_low_certainty(entries: Sequence[Mapping], policy: VigilancePolicy) -> List[VigilanceFinding]:
    findings: List[VigilanceFinding] = []
    groups: Dict[str, List[tuple]] = {}
    for entry in entries:
        if not entry.get("accepted") or entry.get("kind") != "ibom":
            continue
        payload = _entry_payload(entry)
        if payload is None:
            continue
        certainty = _dig(payload, "inference_results", "decision_metrics", "certainty_level")
        if not isinstance(certainty, str):
            continue
        keyid = entry.get("keyid") or "unknown"
        groups.setdefault(keyid, []).append((entry["sequence"], certainty))
    for keyid in sorted(groups):
        window = groups[keyid][-policy.window:]
        lows = sum(1 for _, certainty in window if certainty == "low")
        total = len(window)
        rate = Decimal(lows) / Decimal(total)
        if rate > policy.low_certainty_threshold:
            findings.append(
                VigilanceFinding(
                    kind="low_certainty_rate",
                    subject=keyid,
                    detail=(
                        f"{lows} of the last {total} decisions are low certainty"
                        f" (rate {dec9(rate)} exceeds {dec9(policy.low_certainty_threshold)})"
                    ),
                    window_from=window[0][0],
                    window_to=window[-1][0],
                )
            )
    return findings


def _scan_invalid_reports(entries: Sequence[Mapping]) -> List[VigilanceFinding]:
    findings: List[VigilanceFinding] = []
    for entry in entries:
        if entry.get("accepted"):
            continue
        failures = entry.get("failures") or []
        first = failures[0] if failures else {}
        stage = first.get("stage", "unknown") if isinstance(first, Mapping) else "unknown"
        message = first.get("message", "rejected") if isinstance(first, Mapping) else "rejected"
        findings.append(
            VigilanceFinding(
                kind="invalid_report",
                subject=entry.get("keyid") or "unknown",
                detail=f"submission rejected at {stage} stage: {message}",
                window_from=entry["sequence"],
                window_to=entry["sequence"],
            )
        )
    return findings


def vigilance_scan(
    log_path: Union[str, Path],
    policy: Optional[VigilancePolicy] = None,
) -> List[VigilanceFinding]:
    """Read the log and return findings: accuracy drift between consecutive
    training records of the same project, an excessive low-certainty share
    per signing key over its trailing window, and one finding per rejected
    submission. Ordering is deterministic: drift, then rates, then rejects.
    """
    policy = policy or VigilancePolicy()
    entries = _read_log(log_path)
    findings = _scan_accuracy_drift(entries, policy)
    findings.extend(_scan_low_certainty(entries, policy))
    findings.extend(_scan_invalid_reports(entries))
    return findings
