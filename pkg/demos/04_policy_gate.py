# A deployment gate in five lines of policy. Rules are one per line:
#     PATH COMPARATOR LITERAL      ('exists' takes no literal)
# Missing evidence fails the rule; nobody passes an audit by deleting fields.

import json
import tempfile
from pathlib import Path

from dbomkit import (
    KeyAuthority,
    KeyRegistry,
    compile_rules,
    compliance_check,
    integrity_check,
    load_training_config,
    measurement_digest,
    run_training_job,
    write_reference_csv,
)

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

# never evaluate policy against an unverified document
report = integrity_check(trained.tbom_path, KeyRegistry([trained.key_record]))
assert report.passed

policy = compile_rules("""
# minimum bar for shipping this screening model
performance_metrics.final_test.accuracy >= 0.95
performance_metrics.final_test.sensitivity >= 0.90   # catching poison matters most
training_methodology.cv_folds >= 5
data_summary.dataset_digest.hex exists
project_metadata.role_identity == model-provider
""")
outcome = compliance_check(report.payload, policy)
print(f"{len(policy)} rules checked, pass = {outcome.passed}")

# tighten the bar past what the model achieves and read the violation
strict = compile_rules("performance_metrics.final_test.accuracy >= 0.999\n")
failed = compliance_check(report.payload, strict)
print("stricter gate pass =", failed.passed)
for violation in failed.violations:
    print("  violated:", violation["rule"], "| observed:", violation["observed"])
