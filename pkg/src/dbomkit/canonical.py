"""Canonical byte serialization, digests, and fixed-precision decimal text.

Every BOM document is hashed and signed over one deterministic byte form:
UTF-8 JSON with code-point-sorted object keys and no insignificant
whitespace. Real-valued fields never appear as JSON numbers; they are
carried as decimal text with exactly nine fractional digits so the bytes
do not depend on any float formatter.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation, localcontext
from typing import Any, Mapping, Sequence, Union

from .errors import CanonicalizationError

_HEX64_RE = re.compile(r"^[0-9a-f]{64}$")
_DECIMAL_TEXT_RE = re.compile(r"^-?[0-9]+\.[0-9]{9}$")
_NINE_PLACES = Decimal("0.000000000")


@dataclass(frozen=True)
class Digest:
    """A SHA-256 digest carried as lowercase hex."""

    hex: str
    algorithm: str = "sha256"

    def __post_init__(self) -> None:
        if self.algorithm != "sha256":
            raise ValueError(f"unsupported digest algorithm {self.algorithm!r}")
        if not _HEX64_RE.match(self.hex):
            raise ValueError("digest hex must be 64 lowercase hex characters")

    def to_doc(self) -> dict:
        return {"algorithm": self.algorithm, "hex": self.hex}

    @classmethod
    def from_doc(cls, doc: Mapping[str, Any]) -> "Digest":
        return cls(hex=doc["hex"], algorithm=doc["algorithm"])


def digest(data: bytes) -> Digest:
    """SHA-256 of raw bytes."""
    return Digest(hex=hashlib.sha256(data).hexdigest())


def dec9(value: Union[int, float, str, Decimal]) -> str:
    """Render a real value as decimal text with exactly nine fractional digits.

    Floats are expanded to their exact binary value before rounding, so the
    result is independent of repr() shortening. Rounding is half-even.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not decimal values")
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"not a finite value: {value!r}")
        d = Decimal(value)
    elif isinstance(value, (int, Decimal)):
        d = Decimal(value)
    elif isinstance(value, str):
        try:
            d = Decimal(value)
        except InvalidOperation as exc:
            raise ValueError(f"not a decimal value: {value!r}") from exc
    else:
        raise TypeError(f"cannot format {type(value).__name__} as decimal text")
    if not d.is_finite():
        raise ValueError(f"not a finite value: {value!r}")
    # Quantize needs room for every integer digit plus the nine fractional
    # ones; the default 28-digit context overflows around 1e19.
    with localcontext() as ctx:
        ctx.prec = max(28, d.adjusted() + 12)
        q = d.quantize(_NINE_PLACES, rounding=ROUND_HALF_EVEN)
    if q == 0:
        q = abs(q)  # never emit -0.000000000
    return format(q, "f")


def is_decimal_text(value: Any) -> bool:
    return isinstance(value, str) and bool(_DECIMAL_TEXT_RE.match(value))


def dec9_ratio(numerator: int, denominator: int) -> str:
    """numerator/denominator as nine-place decimal text, half-even."""
    if denominator == 0:
        raise ZeroDivisionError("ratio denominator is zero")
    return dec9(Decimal(numerator) / Decimal(denominator))


def decimal_mean(texts: Sequence[str]) -> str:
    """Arithmetic mean of decimal texts, carried out in decimal arithmetic.

    Anyone re-deriving the stored mean from the stored per-item values must
    land on identical bytes, so no binary floating point is involved.
    """
    if not texts:
        raise ValueError("mean of empty sequence")
    total = sum(Decimal(t) for t in texts)
    return dec9(total / len(texts))


def decimal_std(texts: Sequence[str]) -> str:
    """Population standard deviation of decimal texts, decimal arithmetic only."""
    if not texts:
        raise ValueError("std of empty sequence")
    values = [Decimal(t) for t in texts]
    mean = sum(values) / len(values)
    variance = sum((v - mean) ** 2 for v in values) / len(values)
    return dec9(variance.sqrt())


def _check_canonical(value: Any, path: str) -> None:
    if isinstance(value, bool):
        return
    if isinstance(value, int):
        return
    if isinstance(value, str):
        return
    if isinstance(value, float):
        raise CanonicalizationError(path, "raw floating-point values are not representable; use decimal text")
    if value is None:
        raise CanonicalizationError(path, "null is not representable in a BOM document")
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise CanonicalizationError(path, f"map key {key!r} is not text")
            _check_canonical(item, f"{path}.{key}")
        return
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check_canonical(item, f"{path}[{i}]")
        return
    raise CanonicalizationError(path, f"value of type {type(value).__name__} is not representable")


def canonicalize(doc: Any) -> bytes:
    """Deterministic UTF-8 bytes of a document.

    Object keys are sorted by code point, arrays keep their order, and no
    insignificant whitespace is emitted. Raw floats, nulls, and non-text
    keys are rejected with the offending path.
    """
    _check_canonical(doc, "$")
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode("utf-8")


def dump_compact(doc: Any) -> bytes:
    """Compact JSON bytes for file storage (same shape as canonical form).

    Storing files byte-identical to their canonical form means any byte
    substitution either breaks the JSON or changes the hashed content.
    """
    return canonicalize(doc)
