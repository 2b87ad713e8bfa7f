"""
Fleet vigilance over an append-only submission log
==================================================

Every signed record a fleet produces gets submitted to one JSONL log.
A scan over it surfaces three smells: accuracy drift between consecutive
training runs of the same project, a burst of low-certainty decisions
from one signing key, and submissions that failed verification.
"""

import csv
import json
import tempfile
from pathlib import Path

from dbomkit import (
    KeyAuthority,
    KeyRegistry,
    ModelArtifact,
    load_training_config,
    measurement_digest,
    predict,
    run_inference_job,
    run_training_job,
    vigilance_scan,
    vigilance_submit,
    write_reference_csv,
)
from dbomkit.inference import INFERENCE_ROLE

work = Path(tempfile.mkdtemp(prefix="dbom-demo-"))
csv_path = work / "mushrooms.csv"
write_reference_csv(csv_path)


def train(out_name, **hp):
    hyper = {
        "learning_rate": 0.1,
        "epochs": 300,
        "l2_lambda": 0.0001,
        "optimizer": "full-batch gradient descent",
    }
    hyper.update(hp)
    config_path = work / f"{out_name}.json"
    config_path.write_text(json.dumps({
        "dataset_path": str(csv_path),
        "seed": 42,
        "output_dir": str(work / out_name),
        "pipeline_id": "training",
        "hyperparameters": hyper,
    }))
    config = load_training_config(config_path)
    authority = KeyAuthority()
    authority.allow(measurement_digest(config.raw_bytes, config.pipeline_id))
    return authority, run_training_job(config, authority)


authority, strong = train("strong")
_, weak = train("weak", epochs=1, learning_rate=1e-6)  # a botched retrain
print("strong accuracy", strong.tbom["performance_metrics"]["final_test"]["accuracy"])
print("weak accuracy  ", weak.tbom["performance_metrics"]["final_test"]["accuracy"])

serving_measurement = measurement_digest(strong.tbom_path.read_bytes(), "inference")
authority.allow(serving_measurement)
handle, serving_record = authority.issue_signing_key(serving_measurement, INFERENCE_ROLE)

registry = KeyRegistry([strong.key_record, weak.key_record, serving_record])
log = work / "fleet.jsonl"

vigilance_submit(log, strong.tbom_path.read_bytes(), registry)
vigilance_submit(log, weak.tbom_path.read_bytes(), registry)

with open(csv_path, newline="") as fh:
    rows = [dict(r) for r in csv.DictReader(fh)]
for row in rows:
    row.pop("class")

# 30 confident calls from the good model, then a stretch of coin flips
strong_model = ModelArtifact.load(strong.model_path)
weak_model = ModelArtifact.load(weak.model_path)
sent = 0
for row in rows:
    if predict(strong_model, row)[0].certainty != "high":
        continue
    run = run_inference_job(row, strong_model, strong.tbom, authority, handle)
    vigilance_submit(log, run.envelope.to_doc(), registry)
    sent += 1
    if sent == 30:
        break
for row in rows[:20]:
    run = run_inference_job(row, weak_model, weak.tbom, authority, handle)
    vigilance_submit(log, run.envelope.to_doc(), registry)

# and one submission that is pure garbage
receipt = vigilance_submit(log, b"not a record at all", registry)
print("garbage submission accepted?", receipt.accepted)

print("\nscan findings:")
for finding in vigilance_scan(log):
    print(f"  {finding.kind:<20} subject={finding.subject}")
    print(f"    {finding.detail}")
