"""
Train a model and verify its signed record
==========================================

Produces three artifacts in a scratch directory: the dataset, the model,
and a signed record of how the model was made. Then plays auditor and
checks the record's signature and schema from disk, like a stranger would.
"""

import json
import tempfile
from pathlib import Path

from dbomkit import (
    KeyAuthority,
    KeyRegistry,
    integrity_check,
    load_training_config,
    measurement_digest,
    run_training_job,
    write_reference_csv,
)

work = Path(tempfile.mkdtemp(prefix="dbom-demo-"))
print("working in", work)

# a bundled stand-in for the classic mushroom table: 8124 rows, 22 attributes
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

# the authority only issues signing keys to workloads it has measured
authority = KeyAuthority()
authority.allow(measurement_digest(config.raw_bytes, config.pipeline_id))

result = run_training_job(config, authority)
metrics = result.tbom["performance_metrics"]
print("cv mean accuracy   ", metrics["cv"]["mean_accuracy"])
print("final test accuracy", metrics["final_test"]["accuracy"])
print("record written to  ", result.tbom_path)

# now the auditor's side: all they need is the file and the public key record
registry = KeyRegistry([result.key_record])
report = integrity_check(result.tbom_path, registry)
print("schema valid:", report.schema_valid)
print("signature valid:", report.signature_valid, "(key", report.keyid_used + ")")
print("verdict:", "PASS" if report.passed else "FAIL")
