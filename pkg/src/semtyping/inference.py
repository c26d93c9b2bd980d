"""Label-embedding index and similarity-based prediction.

The index is built once per checkpoint by encoding every verbalized candidate
label with the shared encoder, then queried with exact full-scan cosine
similarity. Fixed-cardinality tasks take the top-k labels; open-cardinality
tasks take every label scoring at or above a threshold tuned on dev data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .encoder import TextEncoder
from .errors import ValidationError
from .fileio import atomic_write_bytes, atomic_write_text
from .formatting import TypingInstance, format_input, verbalize_label

LABEL_FILE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class LabelIndex:
    """Immutable matrix of label embeddings, one row per candidate label.

    labels holds (raw, verbalized) pairs in row order; checkpoint_id names the
    parameter set the rows were encoded under.
    """

    labels: tuple
    embeddings: np.ndarray
    checkpoint_id: str

    def __post_init__(self) -> None:
        emb = np.asarray(self.embeddings)
        if emb.ndim != 2 or emb.shape[0] != len(self.labels):
            raise ValidationError(
                f"embedding matrix shape {emb.shape} does not match {len(self.labels)} labels"
            )
        if emb.shape[0] == 0:
            raise ValidationError("label index requires at least one label")
        if not np.isfinite(emb).all():
            raise ValidationError("label embeddings must be finite")
        wide = emb.astype(np.float64)
        norms = np.linalg.norm(wide, axis=1)
        zeros = np.nonzero(norms == 0.0)[0]
        if zeros.size:
            raw = self.labels[int(zeros[0])][0]
            raise ValidationError(f"label {raw!r} encoded to a zero vector")
        emb.setflags(write=False)
        object.__setattr__(self, "embeddings", emb)
        unit = wide / norms[:, None]
        unit.setflags(write=False)
        object.__setattr__(self, "_unit_rows", unit)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return int(self.embeddings.shape[1])

    @property
    def raw_labels(self) -> list[str]:
        return [raw for raw, _ in self.labels]

    def similarities(self, query) -> np.ndarray:
        """Cosine similarity of the query against every row, clamped to [-1, 1]."""
        q = np.asarray(query, dtype=np.float64).reshape(-1)
        if q.shape[0] != self.dim:
            raise ValidationError(f"query dim {q.shape[0]} does not match index dim {self.dim}")
        if not np.isfinite(q).all():
            raise ValidationError("query embedding must be finite")
        norm = float(np.linalg.norm(q))
        if norm == 0.0:
            raise ValidationError("query embedding is a zero vector")
        sims = self._unit_rows @ (q / norm)
        return np.clip(sims, -1.0, 1.0)


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    ranked: list  # (raw label, score) pairs, non-increasing score
    selected: list  # raw labels, subset of ranked


def build_label_index(
    labels: Sequence[str], encoder: TextEncoder, checkpoint_id: Optional[str] = None
) -> LabelIndex:
    """Encode every verbalized label under the current checkpoint.

    Any label string is admissible, seen during training or not; duplicates
    are rejected because rows must map one-to-one onto raw labels.
    """
    if not labels:
        raise ValidationError("cannot build an index over an empty label list")
    seen = set()
    for raw in labels:
        if raw in seen:
            raise ValidationError(f"duplicate label {raw!r} in label list")
        seen.add(raw)
    verbalized = [verbalize_label(raw) for raw in labels]
    embeddings = encoder.encode_batch(verbalized, mode="eval")
    return LabelIndex(
        labels=tuple(zip(labels, verbalized)),
        embeddings=embeddings,
        checkpoint_id=checkpoint_id if checkpoint_id is not None else encoder.checkpoint_id,
    )


def rank_labels(query, index: LabelIndex) -> list:
    """All labels sorted by similarity, ties broken by raw label ascending."""
    sims = index.similarities(query)
    order = sorted(range(len(index)), key=lambda i: (-sims[i], index.labels[i][0]))
    return [(index.labels[i][0], float(sims[i])) for i in order]


def embed_instance(
    instance: TypingInstance, encoder: TextEncoder, include_description: bool = True
) -> np.ndarray:
    formatted = format_input(instance, include_description)
    return encoder.encode_batch([formatted.text], mode="eval")[0]


def _check_checkpoint(index: LabelIndex, encoder: TextEncoder) -> None:
    if index.checkpoint_id != encoder.checkpoint_id:
        raise ValidationError(
            f"label index was built under checkpoint {index.checkpoint_id!r} but the "
            f"encoder is at {encoder.checkpoint_id!r}; rebuild the index"
        )


def predict_topk(
    instance: TypingInstance,
    index: LabelIndex,
    k: int,
    *,
    encoder: TextEncoder,
    include_description: bool = True,
) -> Prediction:
    """The k most similar candidate labels for one instance."""
    if not 1 <= k <= len(index):
        raise ValidationError(f"k={k} out of range for {len(index)} candidate labels")
    _check_checkpoint(index, encoder)
    ranked = rank_labels(embed_instance(instance, encoder, include_description), index)
    return Prediction(instance.id, ranked, [raw for raw, _ in ranked[:k]])


def predict_threshold(
    instance: TypingInstance,
    index: LabelIndex,
    tau: float,
    *,
    encoder: TextEncoder,
    include_description: bool = True,
) -> Prediction:
    """Every candidate label with similarity >= tau; may select nothing."""
    _check_checkpoint(index, encoder)
    ranked = rank_labels(embed_instance(instance, encoder, include_description), index)
    return Prediction(instance.id, ranked, [raw for raw, score in ranked if score >= tau])


def tune_threshold(
    dev_instances: Sequence[TypingInstance],
    index: LabelIndex,
    metric: Optional[Callable[[list, list], float]] = None,
    *,
    encoder: TextEncoder,
    include_description: bool = True,
) -> float:
    """Grid-search the decision threshold on dev similarities.

    Candidate cuts are midpoints of consecutive observed similarities plus
    infinite sentinels on both ends; ties prefer the lower threshold (higher
    recall). The default metric is instance-macro F1 against the gold sets.
    """
    if not dev_instances:
        raise ValidationError("tune_threshold requires a non-empty dev set")
    if metric is None:
        from .evaluation import macro_prf

        def metric(gold, pred):
            return macro_prf(gold, pred).f1
    _check_checkpoint(index, encoder)
    golds = [set(inst.gold_labels) for inst in dev_instances]
    sims = np.stack(
        [
            index.similarities(embed_instance(inst, encoder, include_description))
            for inst in dev_instances
        ]
    )
    observed = sorted(set(float(s) for s in sims.ravel()))
    values = [float("-inf")] + observed + [float("inf")]
    candidates = sorted(
        {(lo + hi) / 2.0 for lo, hi in zip(values, values[1:])}
    )
    raw = index.raw_labels
    best_tau = candidates[0]
    best_score = float("-inf")
    for tau in candidates:
        preds = [
            {raw[j] for j in np.nonzero(row >= tau)[0]} for row in sims
        ]
        score = metric(golds, preds)
        if score > best_score:
            best_score = score
            best_tau = tau
    return best_tau


class RestrictedTop1:
    """Top-1 prediction over a per-call candidate set, for episodic evaluation."""

    def __init__(self, encoder: TextEncoder, include_description: bool = True):
        self.encoder = encoder
        self.include_description = include_description

    def __call__(self, instance: TypingInstance, candidates: Sequence[str]) -> str:
        index = build_label_index(list(candidates), self.encoder)
        prediction = predict_topk(
            instance, index, 1, encoder=self.encoder,
            include_description=self.include_description,
        )
        return prediction.selected[0]


def write_label_embeddings(index: LabelIndex, path: str) -> None:
    """Binary label-embedding file: one JSON header line, then f32-le rows."""
    header = {
        "schema_version": LABEL_FILE_SCHEMA_VERSION,
        "dim": index.dim,
        "count": len(index),
        "dtype": "f32-le",
        "checkpoint_id": index.checkpoint_id,
    }
    payload = np.ascontiguousarray(index.embeddings.astype("<f4")).tobytes()
    atomic_write_bytes(path, json.dumps(header).encode("utf-8") + b"\n" + payload)


def write_label_list(index: LabelIndex, path: str) -> None:
    atomic_write_text(path, "".join(raw + "\n" for raw in index.raw_labels))


def read_label_embeddings(path: str) -> tuple:
    """Returns (header dict, float32 matrix) from a label-embedding file."""
    with open(path, "rb") as handle:
        header_line = handle.readline()
        payload = handle.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("schema_version") != LABEL_FILE_SCHEMA_VERSION:
        raise ValidationError(f"unsupported label file schema {header.get('schema_version')!r}")
    if header.get("dtype") != "f32-le":
        raise ValidationError(f"unsupported label file dtype {header.get('dtype')!r}")
    count, dim = int(header["count"]), int(header["dim"])
    expected = count * dim * 4
    if len(payload) != expected:
        raise ValidationError(
            f"label file payload is {len(payload)} bytes, expected {expected}"
        )
    matrix = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    return header, matrix


def load_label_index(embeddings_path: str, labels_path: str) -> LabelIndex:
    """Rebuild a LabelIndex from a label-embedding file and its label list."""
    header, matrix = read_label_embeddings(embeddings_path)
    with open(labels_path, "r", encoding="utf-8") as handle:
        raw_labels = [line.rstrip("\n") for line in handle if line.strip()]
    if len(raw_labels) != len(matrix):
        raise ValidationError(
            f"{len(raw_labels)} labels do not match {len(matrix)} embedding rows"
        )
    labels = tuple((raw, verbalize_label(raw)) for raw in raw_labels)
    return LabelIndex(labels, matrix, header["checkpoint_id"])
