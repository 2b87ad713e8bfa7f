"""Signed, verifiable records for a model's training run and its decisions.

Training produces a signed record of data, method, and measured quality;
each inference produces a signed record linked back to it by digest.
Checks (integrity, chain, compliance, vigilance) are pure functions over
those records. The HTTP frontend lives in dbomkit.service and is imported
on demand so library use never pulls in the web stack.
"""

from . import errors
from .bom import (
    CLASS_LABELS,
    ValidationReport,
    build_ibom,
    build_tbom,
    complement_probability,
    decide,
    infer_bom_kind,
    tbom_link_digest,
    validate_bom,
)
from .canonical import Digest, canonicalize, dec9, digest, dump_compact
from .checkers import (
    ChainReport,
    ComplianceReport,
    IntegrityReport,
    Rule,
    RuleSet,
    chain_check,
    compile_rules,
    compliance_check,
    integrity_check,
)
from .data import (
    ATTRIBUTES,
    Dataset,
    EncodingMap,
    load_csv_dataset,
    one_hot_encode,
    stratified_holdout_split,
    stratified_kfold,
    write_reference_csv,
)
from .envelope import (
    PAYLOAD_TYPE,
    Envelope,
    KeyAuthority,
    KeyHandle,
    KeyRecord,
    KeyRegistry,
    Signature,
    VerifyResult,
    measurement_digest,
    pae_encode,
    verify,
)
from .inference import (
    ContributionList,
    InferenceRunResult,
    Prediction,
    concept_contributions,
    predict,
    run_inference_job,
    verify_model_against_tbom,
    what_if,
)
from .rng import SplitMix64, fisher_yates, shuffled
from .training import (
    Hyperparameters,
    Metrics,
    ModelArtifact,
    TrainingConfig,
    TrainingRunResult,
    compute_metrics,
    load_training_config,
    run_training_job,
    train_logistic,
)
from .version import VERSION
from .vigilance import (
    Receipt,
    VigilanceFinding,
    VigilancePolicy,
    vigilance_scan,
    vigilance_submit,
)

__version__ = VERSION

__all__ = [
    "ATTRIBUTES",
    "CLASS_LABELS",
    "ChainReport",
    "ComplianceReport",
    "ContributionList",
    "Dataset",
    "Digest",
    "EncodingMap",
    "Envelope",
    "Hyperparameters",
    "InferenceRunResult",
    "IntegrityReport",
    "KeyAuthority",
    "KeyHandle",
    "KeyRecord",
    "KeyRegistry",
    "Metrics",
    "ModelArtifact",
    "PAYLOAD_TYPE",
    "Prediction",
    "Receipt",
    "Rule",
    "RuleSet",
    "Signature",
    "SplitMix64",
    "TrainingConfig",
    "TrainingRunResult",
    "VERSION",
    "ValidationReport",
    "VerifyResult",
    "VigilanceFinding",
    "VigilancePolicy",
    "build_ibom",
    "build_tbom",
    "canonicalize",
    "chain_check",
    "compile_rules",
    "compliance_check",
    "complement_probability",
    "compute_metrics",
    "concept_contributions",
    "dec9",
    "decide",
    "digest",
    "dump_compact",
    "errors",
    "fisher_yates",
    "infer_bom_kind",
    "integrity_check",
    "load_csv_dataset",
    "load_training_config",
    "measurement_digest",
    "one_hot_encode",
    "pae_encode",
    "predict",
    "run_inference_job",
    "run_training_job",
    "shuffled",
    "stratified_holdout_split",
    "stratified_kfold",
    "tbom_link_digest",
    "train_logistic",
    "validate_bom",
    "verify",
    "verify_model_against_tbom",
    "vigilance_scan",
    "vigilance_submit",
    "what_if",
    "write_reference_csv",
]
