"""Tabular mushroom dataset handling: loading, encoding, and splits.

Also bundles a deterministic generator for a stand-in CSV with the exact
shape of the classic mushroom table (8124 rows, 22 categorical attributes,
4208 edible / 3916 poisonous) for environments where the original file is
not present. The generated labels follow an additive rule over odor,
spore print, gill size, and bruising, so the data is linearly separable
in one-hot space and every row is reproducible byte-for-byte.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from .canonical import Digest, dec9, digest
from .errors import DatasetError, InferenceInputError, OutOfVocabularyError, SplitError
from .rng import SplitMix64, fisher_yates

CLASS_LABELS = ("edible", "poisonous")
_LABEL_SYMBOLS = {"e": "edible", "p": "poisonous"}

ATTRIBUTES = (
    "cap-shape",
    "cap-surface",
    "cap-color",
    "bruises",
    "odor",
    "gill-attachment",
    "gill-spacing",
    "gill-size",
    "gill-color",
    "stalk-shape",
    "stalk-root",
    "stalk-surface-above-ring",
    "stalk-surface-below-ring",
    "stalk-color-above-ring",
    "stalk-color-below-ring",
    "veil-type",
    "veil-color",
    "ring-number",
    "ring-type",
    "spore-print-color",
    "population",
    "habitat",
)


@dataclass(frozen=True)
class Row:
    label: str
    values: Tuple[str, ...]


@dataclass(frozen=True)
class Dataset:
    attributes: Tuple[str, ...]
    rows: Tuple[Row, ...]
    source_digest: Digest

    def __post_init__(self) -> None:
        width = len(self.attributes)
        for i, row in enumerate(self.rows):
            if len(row.values) != width:
                raise DatasetError(f"row {i}: has {len(row.values)} values for {width} attributes")
            if row.label not in CLASS_LABELS:
                raise DatasetError(f"row {i}: unknown class label {row.label!r}")

    def labels(self) -> List[str]:
        return [row.label for row in self.rows]

    def class_counts(self) -> Dict[str, int]:
        counts = {label: 0 for label in CLASS_LABELS}
        for row in self.rows:
            counts[row.label] += 1
        return {label: n for label, n in counts.items() if n}


def load_csv_dataset(path: Union[str, Path]) -> Dataset:
    """Parse a class-first CSV (header row, labels e/p, "?" kept literal)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset file: {exc}") from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DatasetError(f"dataset file is not UTF-8: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DatasetError("dataset file is empty") from None
    if len(header) < 2:
        raise DatasetError("header must name a class column and at least one attribute")
    attributes = tuple(header[1:])
    rows: List[Row] = []
    for line_number, record in enumerate(reader, start=2):
        if not record:
            continue
        if len(record) != len(header):
            raise DatasetError(
                f"row {line_number}: expected {len(header)} columns, found {len(record)}"
            )
        symbol = record[0]
        if symbol not in _LABEL_SYMBOLS:
            raise DatasetError(f"row {line_number}: unknown class symbol {symbol!r}")
        rows.append(Row(label=_LABEL_SYMBOLS[symbol], values=tuple(record[1:])))
    if not rows:
        raise DatasetError("dataset has no data rows")
    return Dataset(attributes=attributes, rows=tuple(rows), source_digest=digest(raw))


@dataclass(frozen=True)
class EncodingMap:
    """One-hot layout over (attribute, value) concepts observed in training.

    Features are sorted by (attribute, value) code points and positions are
    their list indices, so the layout is a pure function of the observed
    value set.
    """

    features: Tuple[Tuple[str, str], ...]
    _index: Dict[Tuple[str, str], int] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        if list(self.features) != sorted(set(self.features)):
            raise ValueError("features must be unique and sorted by (attribute, value)")
        self._index.update({pair: i for i, pair in enumerate(self.features)})

    def __len__(self) -> int:
        return len(self.features)

    def concept_names(self) -> List[str]:
        return [f"{attribute}={value}" for attribute, value in self.features]

    def attribute_names(self) -> List[str]:
        seen = dict.fromkeys(attribute for attribute, _ in self.features)
        return sorted(seen)

    def position(self, attribute: str, value: str) -> int:
        try:
            return self._index[(attribute, value)]
        except KeyError:
            raise OutOfVocabularyError(attribute, value) from None

    def position_of_concept(self, concept: str) -> int:
        attribute, separator, value = concept.partition("=")
        if not separator:
            raise InferenceInputError(f"concept name {concept!r} is not attribute=value")
        return self.position(attribute, value)

    def encode(self, raw_features: Mapping[str, str]) -> np.ndarray:
        """Strict one-hot encoding: every model attribute must be present and
        every value must have been observed at training time."""
        for attribute in raw_features:
            if attribute not in self._attribute_set():
                raise InferenceInputError(f"unknown attribute {attribute!r}")
        vector = np.zeros(len(self.features), dtype=np.float64)
        for attribute in self.attribute_names():
            if attribute not in raw_features:
                raise InferenceInputError(f"missing attribute {attribute!r}")
            value = raw_features[attribute]
            if not isinstance(value, str):
                raise InferenceInputError(f"attribute {attribute!r} value must be text")
            vector[self.position(attribute, value)] = 1.0
        return vector

    def _attribute_set(self) -> set:
        return {attribute for attribute, _ in self.features}

    def to_doc(self) -> dict:
        return {"features": [{"attribute": a, "value": v} for a, v in self.features]}

    @classmethod
    def from_doc(cls, doc: Mapping) -> "EncodingMap":
        return cls(features=tuple((f["attribute"], f["value"]) for f in doc["features"]))


def one_hot_encode(dataset: Dataset) -> Tuple[np.ndarray, np.ndarray, EncodingMap]:
    """Binary design matrix, labels (1 = poisonous), and the encoding map."""
    if not dataset.rows:
        raise DatasetError("cannot encode an empty dataset")
    pairs = sorted(
        {
            (attribute, row.values[j])
            for row in dataset.rows
            for j, attribute in enumerate(dataset.attributes)
        }
    )
    encoding = EncodingMap(features=tuple(pairs))
    matrix = np.zeros((len(dataset.rows), len(pairs)), dtype=np.float64)
    labels = np.zeros(len(dataset.rows), dtype=np.float64)
    for i, row in enumerate(dataset.rows):
        for j, attribute in enumerate(dataset.attributes):
            matrix[i, encoding.position(attribute, row.values[j])] = 1.0
        labels[i] = 1.0 if row.label == "poisonous" else 0.0
    return matrix, labels, encoding


# -- splits ---------------------------------------------------------------


def _fraction_decimal(fraction: Union[str, float, Decimal]) -> Decimal:
    value = Decimal(dec9(fraction))
    if not (Decimal("0") < value < Decimal("1")):
        raise SplitError(f"test fraction must lie in (0,1), got {value}")
    return value


def _class_members(indices: Sequence[int], labels: Sequence[str]) -> Dict[str, List[int]]:
    members: Dict[str, List[int]] = {}
    for i in indices:
        members.setdefault(labels[i], []).append(i)
    return members


def stratified_holdout_split(
    labels: Sequence[str],
    test_fraction: Union[str, float, Decimal],
    seed: int,
) -> Tuple[List[int], List[int]]:
    """Per class, round-half-even(count * fraction) indices go to test.

    Selection is a seeded shuffle per class over one PRNG stream with the
    classes visited in sorted label order; outputs are ascending.
    """
    fraction = _fraction_decimal(test_fraction)
    members = _class_members(range(len(labels)), labels)
    if len(members) < 2:
        raise SplitError("both classes must be present to stratify")
    rng = SplitMix64(seed)
    train: List[int] = []
    test: List[int] = []
    for label in sorted(members):
        pool = members[label]
        fisher_yates(pool, rng)
        quota = int((Decimal(len(pool)) * fraction).to_integral_value(rounding=ROUND_HALF_EVEN))
        if len(pool) - quota <= 0:
            raise SplitError(f"class {label!r} would have no training samples")
        test.extend(pool[:quota])
        train.extend(pool[quota:])
    return sorted(train), sorted(test)


def stratified_kfold(
    train_indices: Sequence[int],
    labels: Sequence[str],
    k: int,
    seed: int,
) -> List[List[int]]:
    """k folds partitioning train_indices; per class, sizes differ by <= 1."""
    if k < 2:
        raise SplitError(f"k must be at least 2, got {k}")
    members = _class_members(train_indices, labels)
    rng = SplitMix64(seed)
    folds: List[List[int]] = [[] for _ in range(k)]
    for label in sorted(members):
        pool = members[label]
        if len(pool) < k:
            raise SplitError(f"class {label!r} has {len(pool)} members, fewer than k={k}")
        fisher_yates(pool, rng)
        for j in range(k):
            folds[j].extend(pool[j::k])
    return [sorted(fold) for fold in folds]


# -- stand-in data generation --------------------------------------------

_ALPHABETS: Dict[str, str] = {
    "cap-shape": "bcxfks",
    "cap-surface": "fgys",
    "cap-color": "nbcgrpuewy",
    "bruises": "tf",
    "odor": "alcyfmnps",
    "gill-attachment": "adfn",
    "gill-spacing": "cwd",
    "gill-size": "bn",
    "gill-color": "knbhgropuewy",
    "stalk-shape": "et",
    "stalk-root": "bcuezr?",
    "stalk-surface-above-ring": "fyks",
    "stalk-surface-below-ring": "fyks",
    "stalk-color-above-ring": "nbcgopewy",
    "stalk-color-below-ring": "nbcgopewy",
    "veil-type": "p",
    "veil-color": "nowy",
    "ring-number": "not",
    "ring-type": "eflnp",
    "spore-print-color": "knbhrouwy",
    "population": "acnsvy",
    "habitat": "glmpuwd",
}

# Additive toxicity score; a row is poisonous iff the score is > 0.
_ODOR_SCORE = {"a": -10, "l": -10, "n": -2, "c": 6, "f": 6, "m": 6, "p": 6, "s": 6, "y": 6}
_SPORE_SCORE = {"r": 5, "h": 2, "w": 1, "u": -1, "n": -1, "k": -1, "b": 0, "o": 0, "y": 0}
_GILL_SIZE_SCORE = {"n": 2, "b": -1}
_BRUISES_SCORE = {"t": -1, "f": 1}

# Odor frequencies of the classic table, so the headline attribute keeps
# its real marginal distribution.
_ODOR_COUNTS = (
    ("n", 3528),
    ("f", 2160),
    ("y", 576),
    ("s", 576),
    ("a", 400),
    ("l", 400),
    ("p", 256),
    ("c", 192),
    ("m", 36),
)

# Neutral-odor rows that must score poisonous: (spore, gill-size, bruises),
# None keeps the sampled value. Counts total 120.
_NEUTRAL_TOXIC_COMBOS = (
    (60, ("r", None, None)),
    (30, ("h", "n", "f")),
    (20, ("w", "n", "f")),
    (10, ("o", "n", "f")),
)

_SAFE_NEUTRAL_SPORES = "hwunkboy"
_SYNTH_SEED = 20240601


def row_score(values: Mapping[str, str]) -> int:
    return (
        _ODOR_SCORE[values["odor"]]
        + _SPORE_SCORE[values["spore-print-color"]]
        + _GILL_SIZE_SCORE[values["gill-size"]]
        + _BRUISES_SCORE[values["bruises"]]
    )


def _choice(rng: SplitMix64, values: str) -> str:
    return values[rng.below(len(values))]


def _sample_values(rng: SplitMix64, odor: str) -> Dict[str, str]:
    values = {attribute: _choice(rng, _ALPHABETS[attribute]) for attribute in ATTRIBUTES}
    values["odor"] = odor
    return values


def _synthesize_rows() -> List[Tuple[str, Dict[str, str]]]:
    rng = SplitMix64(_SYNTH_SEED)
    rows: List[Tuple[str, Dict[str, str]]] = []
    for odor, count in _ODOR_COUNTS:
        if odor != "n":
            for _ in range(count):
                values = _sample_values(rng, odor)
                label = "poisonous" if row_score(values) > 0 else "edible"
                rows.append((label, values))
            continue
        # Neutral odor: exactly 120 poisonous rows from fixed toxic combos.
        for combo_count, (spore, gill, bruises) in _NEUTRAL_TOXIC_COMBOS:
            for _ in range(combo_count):
                values = _sample_values(rng, "n")
                values["spore-print-color"] = spore
                if gill is not None:
                    values["gill-size"] = gill
                if bruises is not None:
                    values["bruises"] = bruises
                rows.append(("poisonous", values))
        for _ in range(count - sum(n for n, _ in _NEUTRAL_TOXIC_COMBOS)):
            values = _sample_values(rng, "n")
            values["spore-print-color"] = _choice(rng, _SAFE_NEUTRAL_SPORES)
            if values["spore-print-color"] == "h":
                values["gill-size"] = "b"
            elif values["gill-size"] == "n" and values["bruises"] == "f":
                values["bruises"] = "t"
            rows.append(("edible", values))
    fisher_yates(rows, rng)
    return rows


def write_reference_csv(path: Union[str, Path]) -> Digest:
    """Write the stand-in CSV; identical bytes on every machine."""
    rows = _synthesize_rows()
    lines = ["class," + ",".join(ATTRIBUTES)]
    symbol = {"edible": "e", "poisonous": "p"}
    for label, values in rows:
        lines.append(symbol[label] + "," + ",".join(values[a] for a in ATTRIBUTES))
    raw = ("\n".join(lines) + "\n").encode("utf-8")
    Path(path).write_bytes(raw)
    return digest(raw)
