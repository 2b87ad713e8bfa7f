"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations


class DbomError(Exception):
    """Base class for all toolkit errors."""


class CanonicalizationError(DbomError):
    """A document contains a value that has no canonical byte form."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class BomConstructionError(DbomError):
    """A BOM cannot be assembled from the inputs given."""


class EnvelopeFormatError(DbomError):
    """An envelope file is structurally broken (base64, UTF-8, or JSON)."""


class KeyUnknownError(DbomError):
    """No signature key id resolves against the registry."""


class SignatureMismatchError(DbomError):
    """Every resolvable signature failed verification."""


class AttestationRefusedError(DbomError):
    """The presented measurement is not allowlisted by the key authority."""


class UnknownHandleError(DbomError):
    """Signing was requested through a handle this authority never issued."""


class ConfigError(DbomError):
    """A run configuration file is missing fields or malformed."""


class DatasetError(DbomError):
    """The dataset file cannot be loaded."""


class SplitError(DbomError):
    """A split or fold request cannot be satisfied by the labels given."""


class DivergenceError(DbomError):
    """Training hit a non-finite loss."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"non-finite loss at epoch {epoch}")


class ModelTamperedError(DbomError):
    """Stored model bytes no longer match the digest pinned in the TBOM."""


class ArtifactFormatError(DbomError):
    """A stored model artifact does not parse as artifact JSON."""


class InferenceInputError(DbomError):
    """The feature map does not fit the model's encoding."""


class OutOfVocabularyError(InferenceInputError):
    """An (attribute, value) pair was never observed at training time."""

    def __init__(self, attribute: str, value: str):
        self.attribute = attribute
        self.value = value
        super().__init__(f"value {value!r} for attribute {attribute!r} was not seen during training")


class RuleSyntaxError(DbomError):
    """A compliance rule line does not parse."""

    def __init__(self, line_number: int, message: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class VigilanceLogError(DbomError):
    """The vigilance log cannot be read or appended to."""


class PipelineStageError(DbomError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r}: {cause}")
