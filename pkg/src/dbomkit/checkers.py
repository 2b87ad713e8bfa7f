"""Ecosystem checks over signed records: integrity, linkage, compliance.

All checks are pure functions returning reports; nothing here raises on a
failed check. Exit codes, HTTP statuses, and logging belong to frontends.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

from .bom import infer_bom_kind, tbom_link_digest, validate_bom
from .envelope import Envelope, KeyRecord, KeyRegistry, verify
from .errors import (
    BomConstructionError,
    EnvelopeFormatError,
    KeyUnknownError,
    RuleSyntaxError,
    SignatureMismatchError,
)

STAGES = ("parse", "schema", "key", "signature")

EnvelopeSource = Union[str, Path, bytes, Mapping, Envelope]


def _coerce_envelope(source: EnvelopeSource) -> Envelope:
    if isinstance(source, Envelope):
        return source
    if isinstance(source, Mapping):
        return Envelope.from_doc(source)
    if isinstance(source, bytes):
        return Envelope.from_bytes(source)
    try:
        raw = Path(source).read_bytes()
    except OSError as exc:
        raise EnvelopeFormatError(f"cannot read envelope file: {exc}") from exc
    return Envelope.from_bytes(raw)


@dataclass(frozen=True)
class IntegrityReport:
    schema_valid: bool
    signature_valid: bool
    keyid_used: Optional[str]
    failures: Tuple[Mapping[str, str], ...]
    # Parsed payload and its detected kind, for callers that chain further
    # checks; not part of the report document.
    payload: Optional[dict] = None
    kind: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.schema_valid and self.signature_valid

    def to_doc(self) -> dict:
        return {
            "pass": self.passed,
            "schema_valid": self.schema_valid,
            "signature_valid": self.signature_valid,
            "keyid_used": self.keyid_used,
            "failures": [dict(f) for f in self.failures],
        }


def integrity_check(source: EnvelopeSource, registry: KeyRegistry) -> IntegrityReport:
    """parse -> schema -> key -> signature; schema and signature stages are
    independent, so a well-signed but malformed payload reports both truths."""
    failures: List[dict] = []
    try:
        envelope = _coerce_envelope(source)
        payload = json.loads(envelope.payload.decode("utf-8"))
    except EnvelopeFormatError as exc:
        failures.append({"stage": "parse", "message": str(exc)})
        return IntegrityReport(
            schema_valid=False, signature_valid=False, keyid_used=None, failures=tuple(failures)
        )

    kind = infer_bom_kind(payload)
    if kind is None:
        schema_valid = False
        failures.append({"stage": "schema", "message": "payload is neither a training nor an inference record"})
    else:
        report = validate_bom(payload, kind)
        schema_valid = report.valid
        for violation in report.violations:
            failures.append(
                {"stage": "schema", "message": f"{violation['path']}: {violation['message']}"}
            )

    keyid_used: Optional[str] = None
    try:
        result = verify(envelope, registry)
        signature_valid = True
        keyid_used = result.verified_keyids[0]
    except KeyUnknownError as exc:
        signature_valid = False
        failures.append({"stage": "key", "message": str(exc)})
    except SignatureMismatchError as exc:
        signature_valid = False
        failures.append({"stage": "signature", "message": str(exc)})

    return IntegrityReport(
        schema_valid=schema_valid,
        signature_valid=signature_valid,
        keyid_used=keyid_used,
        failures=tuple(failures),
        payload=payload if isinstance(payload, dict) else None,
        kind=kind,
    )


@dataclass(frozen=True)
class ChainReport:
    passed: bool
    reason: Optional[str] = None

    def to_doc(self) -> dict:
        return {"pass": self.passed, "reason": self.reason}


def chain_check(
    ibom: Mapping,
    tbom: Mapping,
    tbom_key_record: Optional[KeyRecord] = None,
) -> ChainReport:
    """Does this decision record descend from this training record?

    Passes iff the stored link digest equals the training payload's digest
    and, when the signer's published record is supplied, the key's bound
    measurement equals the measurement inside the training record.
    """
    try:
        stored_link = ibom["inference_identification"]["tbom_link"]["hex"]
    except (KeyError, TypeError):
        return ChainReport(passed=False, reason="inference record carries no usable link digest")
    try:
        expected = tbom_link_digest(tbom).hex
    except BomConstructionError as exc:
        return ChainReport(passed=False, reason=f"training record does not validate: {exc}")
    if stored_link != expected:
        return ChainReport(
            passed=False,
            reason="link digest does not match the training record payload",
        )
    if tbom_key_record is not None:
        recorded = tbom.get("measurement", {})
        if not isinstance(recorded, Mapping) or tbom_key_record.bound_measurement.hex != recorded.get("hex"):
            return ChainReport(
                passed=False,
                reason="signing key's bound measurement does not match the recorded measurement",
            )
    return ChainReport(passed=True)


# -- compliance rule engine ----------------------------------------------

COMPARATORS = (">=", "<=", ">", "<", "==", "!=", "exists")
_NUMERIC_COMPARATORS = frozenset((">=", "<=", ">", "<"))
_NUMBER_RE = re.compile(r"^-?[0-9]+(\.[0-9]+)?$")

_MISSING = object()


@dataclass(frozen=True)
class Rule:
    path: str
    comparator: str
    literal: Optional[str]
    numeric: Optional[Decimal]
    source: str
    line_number: int


@dataclass(frozen=True)
class RuleSet:
    rules: Tuple[Rule, ...]

    def __len__(self) -> int:
        return len(self.rules)


def compile_rules(text: str) -> RuleSet:
    """One rule per line: PATH COMPARATOR LITERAL ('exists' takes none).

    '#' starts a comment anywhere; blank lines are skipped.
    """
    rules: List[Rule] = []
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        comment = raw_line.find("#")
        body = raw_line[:comment] if comment >= 0 else raw_line
        body = body.strip()
        if not body:
            continue
        tokens = body.split(None, 2)
        if len(tokens) < 2:
            raise RuleSyntaxError(line_number, "rule needs PATH COMPARATOR [LITERAL]")
        path, comparator = tokens[0], tokens[1]
        if comparator not in COMPARATORS:
            raise RuleSyntaxError(line_number, f"unknown comparator {comparator!r}")
        if comparator == "exists":
            if len(tokens) > 2:
                raise RuleSyntaxError(line_number, "'exists' takes no literal")
            rules.append(Rule(path, comparator, None, None, body, line_number))
            continue
        if len(tokens) < 3:
            raise RuleSyntaxError(line_number, f"comparator {comparator!r} needs a literal")
        literal = tokens[2].strip()
        numeric = Decimal(literal) if _NUMBER_RE.match(literal) else None
        if comparator in _NUMERIC_COMPARATORS and numeric is None:
            raise RuleSyntaxError(line_number, f"comparator {comparator!r} needs a numeric literal")
        rules.append(Rule(path, comparator, literal, numeric, body, line_number))
    return RuleSet(rules=tuple(rules))


def resolve_path(document: Any, path: str) -> Any:
    """Dot-separated traversal; digit segments index lists. Returns the
    module-level _MISSING sentinel when any segment fails to resolve."""
    current = document
    for segment in path.split("."):
        if isinstance(current, Mapping) and segment in current:
            current = current[segment]
        elif isinstance(current, (list, tuple)) and segment.isdigit() and int(segment) < len(current):
            current = current[int(segment)]
        else:
            return _MISSING
    return current


def _numeric_view(value: Any) -> Optional[Decimal]:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return Decimal(value)
    if isinstance(value, str) and _NUMBER_RE.match(value):
        return Decimal(value)
    return None


def _render(value: Any) -> str:
    if value is _MISSING:
        return "missing"
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True)


def rule_satisfied(rule: Rule, document: Any) -> bool:
    """Truth of one rule against a document. Absent fields never satisfy a
    rule: in an audit, missing evidence is failing evidence."""
    value = resolve_path(document, rule.path)
    if rule.comparator == "exists":
        return value is not _MISSING
    if value is _MISSING:
        return False
    if rule.comparator in _NUMERIC_COMPARATORS:
        number = _numeric_view(value)
        if number is None:
            return False
        if rule.comparator == ">=":
            return number >= rule.numeric
        if rule.comparator == "<=":
            return number <= rule.numeric
        if rule.comparator == ">":
            return number > rule.numeric
        return number < rule.numeric
    number = _numeric_view(value)
    if rule.comparator == "==":
        if rule.numeric is not None and number is not None:
            return number == rule.numeric
        return isinstance(value, str) and value == rule.literal
    # "!=" is the negation of the same equality view.
    if rule.numeric is not None and number is not None:
        return number != rule.numeric
    return not (isinstance(value, str) and value == rule.literal)


@dataclass(frozen=True)
class ComplianceReport:
    passed: bool
    violations: Tuple[Mapping[str, str], ...]

    def to_doc(self) -> dict:
        return {"pass": self.passed, "violations": [dict(v) for v in self.violations]}


def compliance_check(bom: Mapping, rules: RuleSet) -> ComplianceReport:
    """Evaluate every rule; an empty rule set is vacuously compliant."""
    violations: List[dict] = []
    for rule in rules.rules:
        if not rule_satisfied(rule, bom):
            observed = resolve_path(bom, rule.path)
            violations.append({"rule": rule.source, "observed": _render(observed)})
    return ComplianceReport(passed=not violations, violations=tuple(violations))
