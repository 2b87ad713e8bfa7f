"""Command line frontend.

Exit codes: 0 when the requested check or action succeeds, 1 when a check
fails (bad signature, refused key, rule violation, scan findings), 2 for
usage, configuration, and file problems. Every leaf command takes --json
for machine-readable output on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from decimal import Decimal
from pathlib import Path
from typing import Any, List, Mapping, Optional

from .bom import tbom_link_digest
from .canonical import Digest
from .checkers import chain_check, compile_rules, compliance_check, integrity_check
from .data import write_reference_csv
from .envelope import Envelope, KeyAuthority, KeyRegistry, measurement_digest
from .errors import (
    ArtifactFormatError,
    AttestationRefusedError,
    ConfigError,
    DatasetError,
    DbomError,
    DivergenceError,
    EnvelopeFormatError,
    InferenceInputError,
    KeyUnknownError,
    ModelTamperedError,
    OutOfVocabularyError,
    PipelineStageError,
    RuleSyntaxError,
    VigilanceLogError,
)
from .inference import DEFAULT_SERVING_SYSTEM, INFERENCE_ROLE, run_inference_job
from .training import ModelArtifact, load_training_config, run_training_job
from .vigilance import VigilancePolicy, vigilance_scan, vigilance_submit

_USAGE_ERRORS = (
    ConfigError,
    DatasetError,
    RuleSyntaxError,
    ArtifactFormatError,
    InferenceInputError,
    OutOfVocabularyError,
    VigilanceLogError,
)


def _emit(args: argparse.Namespace, doc: Mapping, lines: List[str]) -> None:
    if getattr(args, "as_json", False):
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _fail(message: str) -> None:
    print(f"error: {message}", file=sys.stderr)


def _registry_path(value: str) -> Path:
    path = Path(value)
    return path / "registry.jsonl" if path.is_dir() else path


def _load_registry(value: str) -> KeyRegistry:
    path = _registry_path(value)
    if not path.exists():
        raise ConfigError(f"key registry not found: {path}")
    return KeyRegistry.load(path)


def _load_authority(directory: str) -> KeyAuthority:
    path = Path(directory)
    if not (path / "allowlist.json").exists():
        raise ConfigError(f"no authority state in {path}; run 'dbom cas init' first")
    return KeyAuthority.load_state(path)


def _read_json(path_text: str) -> Any:
    if path_text == "-":
        raw = sys.stdin.buffer.read()
    else:
        raw = Path(path_text).read_bytes()
    try:
        return json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"not valid JSON: {path_text}: {exc}") from exc


def _report_lines(report) -> List[str]:
    lines = [f"result: {'PASS' if report.passed else 'FAIL'}"]
    lines.append(f"schema_valid: {str(report.schema_valid).lower()}")
    lines.append(f"signature_valid: {str(report.signature_valid).lower()}")
    if report.keyid_used:
        lines.append(f"keyid: {report.keyid_used}")
    for failure in report.failures:
        lines.append(f"failure [{failure['stage']}]: {failure['message']}")
    return lines


# -- commands --------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    config = load_training_config(args.config)
    authority = _load_authority(args.authority_dir)
    if args.allow:
        authority.allow(measurement_digest(config.raw_bytes, config.pipeline_id))
        authority.save_state(args.authority_dir)
    result = run_training_job(config, authority)
    authority.save_state(args.authority_dir)
    metrics = result.tbom["performance_metrics"]
    doc = {
        "model_path": str(result.model_path),
        "tbom_path": str(result.tbom_path),
        "keyid": result.key_record.keyid,
        "measurement": result.measurement.hex,
        "cv_mean_accuracy": metrics["cv"]["mean_accuracy"],
        "final_test_accuracy": metrics["final_test"]["accuracy"],
    }
    _emit(
        args,
        doc,
        [
            f"model: {doc['model_path']}",
            f"training record: {doc['tbom_path']}",
            f"signing keyid: {doc['keyid']}",
            f"measurement: {doc['measurement']}",
            f"cv mean accuracy: {doc['cv_mean_accuracy']}",
            f"final test accuracy: {doc['final_test_accuracy']}",
        ],
    )
    return 0


def cmd_infer(args: argparse.Namespace) -> int:
    authority = _load_authority(args.authority_dir)
    tbom_bytes = Path(args.tbom).read_bytes()
    report = integrity_check(tbom_bytes, authority.registry)
    if not report.passed or report.kind != "tbom":
        _fail("training record failed verification; refusing to serve")
        for line in _report_lines(report):
            print(line, file=sys.stderr)
        return 1
    measurement = measurement_digest(tbom_bytes, args.pipeline_id)
    if args.allow:
        authority.allow(measurement)
        authority.save_state(args.authority_dir)
    handle, _ = authority.issue_signing_key(measurement, INFERENCE_ROLE)
    authority.save_state(args.authority_dir)

    model = ModelArtifact.load(args.model)
    raw_features = _read_json(args.input)
    if not isinstance(raw_features, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in raw_features.items()
    ):
        raise ConfigError("input must be a JSON object mapping attribute names to symbols")

    result = run_inference_job(
        raw_features,
        model,
        report.payload,
        authority,
        handle,
        serving_system=args.serving_system,
    )
    out_path = Path(args.out)
    out_path.write_bytes(result.envelope.to_bytes())
    metrics = result.ibom["inference_results"]["decision_metrics"]
    doc = {
        "decision": metrics["decision"],
        "confidence": metrics["confidence"],
        "certainty_level": metrics["certainty_level"],
        "ibom_path": str(out_path),
        "keyid": handle.keyid,
        "inference_id": result.ibom["inference_identification"]["inference_id"],
    }
    _emit(
        args,
        doc,
        [
            f"decision: {doc['decision']}",
            f"confidence: {doc['confidence']}",
            f"certainty: {doc['certainty_level']}",
            f"inference record: {doc['ibom_path']}",
            f"signing keyid: {doc['keyid']}",
        ],
    )
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    registry = _load_registry(args.registry)
    report = integrity_check(Path(args.envelope), registry)
    _emit(args, report.to_doc(), _report_lines(report))
    return 0 if report.passed else 1


def cmd_chain(args: argparse.Namespace) -> int:
    registry = _load_registry(args.registry)
    ibom_report = integrity_check(Path(args.ibom), registry)
    tbom_report = integrity_check(Path(args.tbom), registry)
    if not ibom_report.passed or not tbom_report.passed:
        for label, report in (("inference record", ibom_report), ("training record", tbom_report)):
            if not report.passed:
                _fail(f"{label} failed verification")
                for line in _report_lines(report):
                    print(line, file=sys.stderr)
        return 1
    record = registry.get(tbom_report.keyid_used)
    chain = chain_check(ibom_report.payload, tbom_report.payload, record)
    lines = [f"result: {'PASS' if chain.passed else 'FAIL'}"]
    if chain.reason:
        lines.append(f"reason: {chain.reason}")
    _emit(args, chain.to_doc(), lines)
    return 0 if chain.passed else 1


def cmd_comply(args: argparse.Namespace) -> int:
    registry = _load_registry(args.registry)
    report = integrity_check(Path(args.envelope), registry)
    if not report.passed:
        _fail("record failed verification; compliance not evaluated")
        for line in _report_lines(report):
            print(line, file=sys.stderr)
        return 1
    rules = compile_rules(Path(args.rules).read_text(encoding="utf-8"))
    outcome = compliance_check(report.payload, rules)
    lines = [f"result: {'PASS' if outcome.passed else 'FAIL'}", f"rules checked: {len(rules)}"]
    for violation in outcome.violations:
        lines.append(f"violation: {violation['rule']} (observed: {violation['observed']})")
    _emit(args, outcome.to_doc(), lines)
    return 0 if outcome.passed else 1


def cmd_vigilance_submit(args: argparse.Namespace) -> int:
    registry = _load_registry(args.registry)
    receipt = vigilance_submit(args.log, Path(args.envelope), registry)
    lines = [
        f"sequence: {receipt.sequence}",
        f"accepted: {str(receipt.accepted).lower()}",
        f"duplicate: {str(receipt.duplicate).lower()}",
    ]
    _emit(args, receipt.to_doc(), lines)
    return 0 if receipt.accepted else 1


def cmd_vigilance_scan(args: argparse.Namespace) -> int:
    policy = VigilancePolicy(
        drift_threshold=Decimal(args.drift_threshold),
        low_certainty_threshold=Decimal(args.rate_threshold),
        window=args.window,
    )
    findings = vigilance_scan(args.log, policy)
    doc = {"findings": [finding.to_doc() for finding in findings]}
    lines = [f"findings: {len(findings)}"]
    for finding in findings:
        lines.append(
            f"[{finding.kind}] {finding.subject}: {finding.detail}"
            f" (entries {finding.window_from}..{finding.window_to})"
        )
    _emit(args, doc, lines)
    return 1 if findings else 0


def cmd_cas_init(args: argparse.Namespace) -> int:
    path = Path(args.authority_dir)
    if (path / "allowlist.json").exists():
        raise ConfigError(f"authority state already present in {path}")
    authority = KeyAuthority()
    authority.save_state(path)
    _emit(args, {"authority_dir": str(path)}, [f"initialized authority state in {path}"])
    return 0


def _measurement_from_args(args: argparse.Namespace) -> Digest:
    if args.measurement:
        return Digest(algorithm="sha256", hex=args.measurement)
    if args.config and args.pipeline_id:
        return measurement_digest(Path(args.config).read_bytes(), args.pipeline_id)
    raise ConfigError("need either --measurement or --config with --pipeline-id")


def cmd_cas_allow(args: argparse.Namespace) -> int:
    authority = _load_authority(args.authority_dir)
    measurement = _measurement_from_args(args)
    authority.allow(measurement)
    authority.save_state(args.authority_dir)
    _emit(args, {"measurement": measurement.hex}, [f"allowlisted measurement {measurement.hex}"])
    return 0


def cmd_cas_measure(args: argparse.Namespace) -> int:
    measurement = measurement_digest(Path(args.config).read_bytes(), args.pipeline_id)
    _emit(args, {"measurement": measurement.hex}, [measurement.hex])
    return 0


def cmd_cas_issue(args: argparse.Namespace) -> int:
    authority = _load_authority(args.authority_dir)
    measurement = _measurement_from_args(args)
    handle, record = authority.issue_signing_key(measurement, args.role)
    authority.save_state(args.authority_dir)
    doc = {"keyid": handle.keyid, "measurement": measurement.hex, "role_identity": record.role_identity}
    _emit(args, doc, [f"issued signing key {handle.keyid} bound to {measurement.hex}"])
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app, load_service_config

    config = load_service_config(args.config)
    app = create_app(config)
    host, _, port = config.bind.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


def cmd_dataset(args: argparse.Namespace) -> int:
    out = Path(args.out)
    source_digest = write_reference_csv(out)
    doc = {"path": str(out), "digest": source_digest.hex}
    _emit(args, doc, [f"wrote {out}", f"digest: {source_digest.hex}"])
    return 0


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", dest="as_json", action="store_true", help="emit JSON on stdout")

    parser = argparse.ArgumentParser(prog="dbom", description="decision bill of materials toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="run a recorded training job")
    p.add_argument("--config", required=True, help="training config JSON")
    p.add_argument("--authority-dir", required=True, help="key authority state directory")
    p.add_argument("--allow", action="store_true", help="allowlist this config's measurement first")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("infer", parents=[common], help="run one recorded inference")
    p.add_argument("--model", required=True, help="model artifact JSON")
    p.add_argument("--tbom", required=True, help="signed training record envelope")
    p.add_argument("--authority-dir", required=True)
    p.add_argument("--input", required=True, help="JSON object of raw features, or - for stdin")
    p.add_argument("--out", default="ibom.envelope.json", help="where to write the signed record")
    p.add_argument("--pipeline-id", default="inference", help="workload identity for the measurement")
    p.add_argument("--serving-system", default=DEFAULT_SERVING_SYSTEM)
    p.add_argument("--allow", action="store_true", help="allowlist this workload's measurement first")
    p.set_defaults(handler=cmd_infer)

    p = sub.add_parser("verify", parents=[common], help="integrity-check a signed record")
    p.add_argument("--envelope", required=True)
    p.add_argument("--registry", required=True, help="registry JSONL or authority directory")
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("chain", parents=[common], help="check an inference record against its training record")
    p.add_argument("--ibom", required=True)
    p.add_argument("--tbom", required=True)
    p.add_argument("--registry", required=True)
    p.set_defaults(handler=cmd_chain)

    p = sub.add_parser("comply", parents=[common], help="evaluate a rule file against a verified record")
    p.add_argument("--envelope", required=True)
    p.add_argument("--rules", required=True, help="rule file, one PATH COMPARATOR LITERAL per line")
    p.add_argument("--registry", required=True)
    p.set_defaults(handler=cmd_comply)

    vig = sub.add_parser("vigilance", help="submission log operations").add_subparsers(
        dest="action", required=True
    )
    p = vig.add_parser("submit", parents=[common], help="verify and log a record")
    p.add_argument("--log", required=True, help="JSONL log path")
    p.add_argument("--envelope", required=True)
    p.add_argument("--registry", required=True)
    p.set_defaults(handler=cmd_vigilance_submit)
    p = vig.add_parser("scan", parents=[common], help="scan the log for anomalies")
    p.add_argument("--log", required=True)
    p.add_argument("--drift-threshold", default="0.02")
    p.add_argument("--rate-threshold", default="0.30")
    p.add_argument("--window", type=int, default=50)
    p.set_defaults(handler=cmd_vigilance_scan)

    cas = sub.add_parser("cas", help="key authority operations").add_subparsers(
        dest="action", required=True
    )
    p = cas.add_parser("init", parents=[common], help="create empty authority state")
    p.add_argument("--authority-dir", required=True)
    p.set_defaults(handler=cmd_cas_init)
    p = cas.add_parser("allow", parents=[common], help="allowlist a workload measurement")
    p.add_argument("--authority-dir", required=True)
    p.add_argument("--measurement", help="measurement digest hex")
    p.add_argument("--config", help="config file to measure instead")
    p.add_argument("--pipeline-id", help="workload identity, with --config")
    p.set_defaults(handler=cmd_cas_allow)
    p = cas.add_parser("measure", parents=[common], help="print a config's measurement digest")
    p.add_argument("--config", required=True)
    p.add_argument("--pipeline-id", required=True)
    p.set_defaults(handler=cmd_cas_measure)
    p = cas.add_parser("issue", parents=[common], help="request a signing key for a measurement")
    p.add_argument("--authority-dir", required=True)
    p.add_argument("--measurement", help="measurement digest hex")
    p.add_argument("--config", help="config file to measure instead")
    p.add_argument("--pipeline-id", help="workload identity, with --config")
    p.add_argument("--role", default="workload", help="role identity recorded on the key")
    p.set_defaults(handler=cmd_cas_issue)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP inference service")
    p.add_argument("--config", required=True, help="service config JSON")
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("dataset", parents=[common], help="write the bundled reference dataset")
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(handler=cmd_dataset)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except AttestationRefusedError as exc:
        _fail(f"signing key refused: {exc}")
        return 1
    except (ModelTamperedError, KeyUnknownError) as exc:
        _fail(str(exc))
        return 1
    except PipelineStageError as exc:
        _fail(str(exc))
        return 1 if isinstance(exc.cause, DivergenceError) else 2
    except _USAGE_ERRORS as exc:
        _fail(str(exc))
        return 2
    except EnvelopeFormatError as exc:
        _fail(str(exc))
        return 2
    except OSError as exc:
        _fail(str(exc))
        return 2


if __name__ == "__main__":
    sys.exit(main())
