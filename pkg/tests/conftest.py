"""Shared fixtures: one reference dataset and one complete training run.

The training run is session-scoped and treated as read-only by tests;
anything that mutates authority state or output files builds its own copy.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from types import SimpleNamespace

import pytest

from dbomkit import (
    KeyAuthority,
    ModelArtifact,
    load_training_config,
    measurement_digest,
    run_inference_job,
    run_training_job,
    write_reference_csv,
)
from dbomkit.inference import INFERENCE_ROLE

DEFAULT_HYPERPARAMETERS = {
    "learning_rate": 0.1,
    "epochs": 300,
    "l2_lambda": 0.0001,
    "optimizer": "full-batch gradient descent",
}


def make_train_config_doc(dataset_path, output_dir, seed=42, **overrides) -> dict:
    doc = {
        "dataset_path": str(dataset_path),
        "seed": seed,
        "output_dir": str(output_dir),
        "pipeline_id": "training",
        "hyperparameters": dict(DEFAULT_HYPERPARAMETERS),
    }
    for key, value in overrides.items():
        if key in DEFAULT_HYPERPARAMETERS:
            doc["hyperparameters"][key] = value
        else:
            doc[key] = value
    return doc


def run_full_training(dataset_path, root: Path, seed=42, **overrides) -> SimpleNamespace:
    """Write a config, allowlist its measurement, run the pipeline."""
    config_path = root / "train_config.json"
    config_path.write_text(
        json.dumps(make_train_config_doc(dataset_path, root / "out", seed=seed, **overrides))
    )
    config = load_training_config(config_path)
    authority = KeyAuthority()
    authority.allow(measurement_digest(config.raw_bytes, config.pipeline_id))
    result = run_training_job(config, authority)
    return SimpleNamespace(
        root=root,
        config_path=config_path,
        config=config,
        authority=authority,
        result=result,
    )


@pytest.fixture(scope="session")
def dataset_csv(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "mushrooms.csv"
    write_reference_csv(path)
    return path


@pytest.fixture(scope="session")
def dataset_rows(dataset_csv):
    """(label_symbol, features dict) pairs straight from the CSV."""
    rows = []
    with open(dataset_csv, newline="") as handle:
        for record in csv.DictReader(handle):
            label = record.pop("class")
            rows.append((label, record))
    return rows


@pytest.fixture(scope="session")
def workspace(tmp_path_factory, dataset_csv) -> SimpleNamespace:
    """A finished training run with a serving key already issued."""
    root = tmp_path_factory.mktemp("run")
    ws = run_full_training(dataset_csv, root)
    tbom_bytes = Path(ws.result.tbom_path).read_bytes()
    serving_measurement = measurement_digest(tbom_bytes, "inference")
    ws.authority.allow(serving_measurement)
    handle, record = ws.authority.issue_signing_key(serving_measurement, INFERENCE_ROLE)
    ws.tbom = ws.result.tbom
    ws.tbom_bytes = tbom_bytes
    ws.model = ModelArtifact.load(ws.result.model_path)
    ws.handle = handle
    ws.serving_record = record
    ws.serving_measurement = serving_measurement
    ws.dataset_path = dataset_csv
    return ws


@pytest.fixture(scope="session")
def inference_run(workspace, dataset_rows):
    """One signed decision record over the first dataset row."""
    _, features = dataset_rows[0]
    return run_inference_job(
        features, workspace.model, workspace.tbom, workspace.authority, workspace.handle
    )
