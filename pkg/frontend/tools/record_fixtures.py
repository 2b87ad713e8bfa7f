"""Record real service responses into tests/fixtures/.

Spins up the backend in-process, drives every endpoint the inspector
consumes, and writes each response as {"status": N, "body": ...}. The
inspector's tests replay these files instead of talking to a live server,
so the UI is tested against what the service actually said.

Usage: python3 tools/record_fixtures.py  (from the frontend directory)
"""

import base64
import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from dbomkit import (
    KeyAuthority,
    canonicalize,
    load_csv_dataset,
    load_training_config,
    measurement_digest,
    run_training_job,
    write_reference_csv,
)
from dbomkit.service import create_app, load_service_config

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def build_service(root: Path) -> TestClient:
    csv_path = root / "mushrooms.csv"
    write_reference_csv(csv_path)
    config_path = root / "train.json"
    config_path.write_text(json.dumps({
        "dataset_path": str(csv_path),
        "seed": 42,
        "output_dir": str(root / "out"),
        "pipeline_id": "training",
        "hyperparameters": {
            "learning_rate": 0.1,
            "epochs": 300,
            "l2_lambda": 0.0001,
            "optimizer": "full-batch gradient descent",
        },
    }))
    config = load_training_config(config_path)
    authority = KeyAuthority()
    authority.allow(measurement_digest(config.raw_bytes, config.pipeline_id))
    trained = run_training_job(config, authority)

    service_root = root / "service"
    service_root.mkdir()
    (service_root / "model.json").write_bytes(trained.model_path.read_bytes())
    (service_root / "tbom.envelope.json").write_bytes(trained.tbom_path.read_bytes())
    authority.allow(measurement_digest(trained.tbom_path.read_bytes(), "inference"))
    authority.save_state(service_root / "authority")
    (service_root / "service.json").write_text(json.dumps({
        "model_path": "model.json",
        "tbom_path": "tbom.envelope.json",
        "authority_dir": "authority",
        "vigilance_log_path": "vigilance.jsonl",
    }))
    return TestClient(create_app(load_service_config(service_root / "service.json"))), csv_path


def record(name: str, response) -> dict:
    body = response.json()
    FIXTURES.joinpath(f"{name}.json").write_text(
        json.dumps({"status": response.status_code, "body": body}, indent=2, sort_keys=True) + "\n"
    )
    print(f"  {name}.json  ({response.status_code})")
    return body


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(prefix="dbom-fixtures-") as tmp:
        root = Path(tmp)
        client, csv_path = build_service(root)

        dataset = load_csv_dataset(csv_path)
        features = dict(zip(dataset.attributes, dataset.rows[0].values))
        FIXTURES.joinpath("features.json").write_text(
            json.dumps(features, indent=2, sort_keys=True) + "\n"
        )
        print("  features.json  (request input, row 0)")

        health = record("health", client.get("/health"))
        tbom_digest = health["tbom_link"]

        bom_tbom = record("bom_tbom", client.get(f"/bom/{tbom_digest}"))
        record("verify_tbom", client.post("/verify", json=bom_tbom))
        record("bom_missing", client.get("/bom/" + "0" * 64))
        record("key_record", client.get(f"/keys/{health['keyid']}"))

        # same record with the accuracy inflated and the old signature kept
        payload = json.loads(base64.b64decode(bom_tbom["payload"]))
        payload["performance_metrics"]["final_test"]["accuracy"] = "0.999999999"
        tampered = dict(bom_tbom)
        tampered["payload"] = base64.b64encode(canonicalize(payload)).decode()
        FIXTURES.joinpath("tampered_envelope.json").write_text(
            json.dumps(tampered, indent=2, sort_keys=True) + "\n"
        )
        print("  tampered_envelope.json  (request input)")
        record("verify_tampered", client.post("/verify", json=tampered))

        infer = record("infer", client.post("/infer", json={"features": features}))
        record("bom_ibom", client.get(f"/bom/{infer['payload_digest']}"))
        record("verify_ibom", client.post("/verify", json=infer["envelope"]))

        record("whatif_noop", client.post(
            "/whatif", json={"features": features, "overrides": {}}
        ))
        record("whatif_flip", client.post(
            "/whatif",
            json={"features": features, "overrides": {"odor=" + features["odor"]: 0, "odor=f": 1}},
        ))
        record("whatif_unknown", client.post(
            "/whatif", json={"features": features, "overrides": {"odor=zz": 1}}
        ))
    print("fixtures written to", FIXTURES)
    return 0


if __name__ == "__main__":
    sys.exit(main())
