"""Flip one byte anywhere in the chain and watch which check catches it."""

import base64
import csv
import json
import tempfile
from pathlib import Path

from dbomkit import (
    KeyAuthority,
    KeyRegistry,
    ModelArtifact,
    canonicalize,
    chain_check,
    integrity_check,
    load_training_config,
    measurement_digest,
    run_inference_job,
    run_training_job,
    verify_model_against_tbom,
    write_reference_csv,
)
from dbomkit.errors import ModelTamperedError
from dbomkit.inference import INFERENCE_ROLE

work = Path(tempfile.mkdtemp(prefix="dbom-demo-"))
csv_path = work / "mushrooms.csv"
write_reference_csv(csv_path)
config_path = work / "train.json"
config_path.write_text(json.dumps({
    "dataset_path": str(csv_path),
    "seed": 42,
    "output_dir": str(work / "out"),
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
registry = KeyRegistry([trained.key_record])

# 1. honest artifacts sail through
model_bytes = trained.model_path.read_bytes()
verify_model_against_tbom(model_bytes, trained.tbom)
print("intact model:   accepted")
print("intact record:  pass =", integrity_check(trained.tbom_path, registry).passed)

# 2. swap one weight for a flattering value; the pinned digest catches it
model_doc = json.loads(model_bytes)
model_doc["weights"][0] = "9.999999999"
try:
    verify_model_against_tbom(canonicalize(model_doc), trained.tbom)
except ModelTamperedError as exc:
    print("tampered model: refused,", exc)

# 3. edit the record itself (inflate the accuracy), keep the old signature
envelope_doc = json.loads(trained.tbom_path.read_text())
payload = json.loads(base64.b64decode(envelope_doc["payload"]))
payload["performance_metrics"]["final_test"]["accuracy"] = "0.999999999"
envelope_doc["payload"] = base64.b64encode(canonicalize(payload)).decode()
forged = integrity_check(envelope_doc, registry)
print("forged record:  pass =", forged.passed,
      "| failures:", [f["stage"] for f in forged.failures])

# 4. a decision record only chains to the training record it came from
serving_measurement = measurement_digest(trained.tbom_path.read_bytes(), "inference")
authority.allow(serving_measurement)
handle, _ = authority.issue_signing_key(serving_measurement, INFERENCE_ROLE)

with open(csv_path, newline="") as fh:
    row = next(csv.DictReader(fh))
row.pop("class")
run = run_inference_job(row, ModelArtifact.load(trained.model_path), trained.tbom, authority, handle)
print("genuine chain:  pass =", chain_check(run.ibom, trained.tbom).passed)
print("forged chain:   pass =", chain_check(run.ibom, payload).passed)
