#!/usr/bin/env python3
# One decision, end to end: train, classify a single mushroom, read the
# signed decision record, and ask a counterfactual.

import csv
import json
import tempfile
from pathlib import Path

from dbomkit import (
    KeyAuthority,
    ModelArtifact,
    load_training_config,
    measurement_digest,
    run_inference_job,
    run_training_job,
    what_if,
    write_reference_csv,
)
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

# serving key: bound to the signed training record itself, not to the model file
serving_measurement = measurement_digest(trained.tbom_path.read_bytes(), "inference")
authority.allow(serving_measurement)
handle, record = authority.issue_signing_key(serving_measurement, INFERENCE_ROLE)

model = ModelArtifact.load(trained.model_path)

with open(csv_path, newline="") as fh:
    row = next(csv.DictReader(fh))
row.pop("class")

run = run_inference_job(row, model, trained.tbom, authority, handle)
doc = run.ibom["inference_results"]
print("decision   ", doc["decision_metrics"]["decision"])
print("confidence ", doc["decision_metrics"]["confidence"])
print("certainty  ", doc["decision_metrics"]["certainty_level"])

print("\ntop concept contributions:")
for entry in doc["feature_analysis"]["concept_contributions"][:5]:
    print(f"  {entry['concept']:<28} {entry['contribution']}")

# counterfactual: same mushroom, but smelling foul instead of what it has
flipped, _ = what_if(model, row, {"odor=" + row["odor"]: 0, "odor=f": 1})
print("\nwhat if the odor were 'f':", flipped.decision,
      "p(poisonous) =", flipped.probability_poisonous)
print("(unsigned exploration, nothing recorded)")
