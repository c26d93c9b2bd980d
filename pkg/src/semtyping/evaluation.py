"""Scoring protocols: instance-macro P/R/F1, micro P/R/F1 with an abstain
label, and N-way episodic accuracy for zero-shot relation classification."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Set

from .errors import ValidationError
from .formatting import TypingInstance


@dataclass
class MetricsReport:
    protocol: str
    precision: float
    recall: float
    f1: float
    accuracy: Optional[float] = None
    support_counts: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "support_counts": dict(self.support_counts),
        }


def _f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def macro_prf(gold: Sequence[Set[str]], pred: Sequence[Set[str]]) -> MetricsReport:
    """Instance-macro scores: precision averaged over instances with at least
    one prediction, recall averaged over all instances, F1 their harmonic mean.

    Empty gold sets are invalid under this protocol. When no instance has any
    prediction, precision is reported as 0 and support_counts shows
    instances_with_predictions = 0.
    """
    if len(gold) != len(pred):
        raise ValidationError(f"{len(gold)} gold sets vs {len(pred)} prediction sets")
    if not gold:
        raise ValidationError("macro_prf requires at least one instance")
    for i, g in enumerate(gold):
        if not g:
            raise ValidationError(f"gold set at position {i} is empty")
    precisions = [len(g & p) / len(p) for g, p in zip(gold, pred) if p]
    recalls = [len(g & p) / len(g) for g, p in zip(gold, pred)]
    precision = sum(precisions) / len(precisions) if precisions else 0.0
    recall = sum(recalls) / len(recalls)
    return MetricsReport(
        protocol="macro",
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        support_counts={
            "instances": len(gold),
            "instances_with_predictions": len(precisions),
        },
    )


def micro_prf(
    gold: Sequence[str], pred: Sequence[str], abstain: str = "no_relation"
) -> MetricsReport:
    """Micro scores over single-label predictions, excluding the abstain label
    from both denominators (the relation-classification convention)."""
    if len(gold) != len(pred):
        raise ValidationError(f"{len(gold)} gold labels vs {len(pred)} predictions")
    correct = sum(1 for g, p in zip(gold, pred) if g == p and p != abstain)
    pred_n = sum(1 for p in pred if p != abstain)
    gold_n = sum(1 for g in gold if g != abstain)
    precision = correct / pred_n if pred_n else 0.0
    recall = correct / gold_n if gold_n else 0.0
    return MetricsReport(
        protocol="micro",
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        support_counts={
            "instances": len(gold),
            "predicted_non_abstain": pred_n,
            "gold_non_abstain": gold_n,
            "correct_non_abstain": correct,
        },
    )


@dataclass(frozen=True)
class Episode:
    candidate_relations: tuple
    query: TypingInstance
    gold: str

    def __post_init__(self) -> None:
        if len(set(self.candidate_relations)) != len(self.candidate_relations):
            raise ValidationError("episode candidates must be pairwise distinct")
        if self.gold not in self.candidate_relations:
            raise ValidationError(f"gold relation {self.gold!r} not among the candidates")


def sample_episode(
    pool: Mapping[str, Sequence[TypingInstance]], n: int, rng: random.Random
) -> Episode:
    """Draw N distinct relations uniformly, one of them uniformly as gold, and
    one query instance uniformly from the gold relation's pool."""
    relations = sorted(pool)
    if len(relations) < n:
        raise ValidationError(f"pool has {len(relations)} relations, need {n}")
    for relation in relations:
        if not pool[relation]:
            raise ValidationError(f"relation {relation!r} has no instances")
    candidates = rng.sample(relations, n)
    gold = candidates[rng.randrange(n)]
    query = pool[gold][rng.randrange(len(pool[gold]))]
    return Episode(tuple(candidates), query, gold)


def nway_zeroshot_accuracy(model, episodes: Sequence[Episode]) -> MetricsReport:
    """Fraction of episodes where the model's top-1 pick (restricted to the
    episode's candidates) equals the gold relation.

    model is a callable (instance, candidates) -> label, or an object with a
    predict_top1 method of that shape.
    """
    if not episodes:
        raise ValidationError("nway accuracy requires at least one episode")
    predict = getattr(model, "predict_top1", model)
    correct = sum(
        1
        for episode in episodes
        if predict(episode.query, episode.candidate_relations) == episode.gold
    )
    accuracy = correct / len(episodes)
    return MetricsReport(
        protocol="nway",
        precision=accuracy,
        recall=accuracy,
        f1=accuracy,
        accuracy=accuracy,
        support_counts={"episodes": len(episodes), "correct": correct},
    )


def bucket_labels_by_train_count(
    train_instances: Sequence[TypingInstance],
    labels: Sequence[str],
    boundaries: Sequence = ((0, 0), (1, 5), (6, 10)),
) -> Dict[str, Set[str]]:
    """Bucket labels by how often they occur as gold in the training set.

    Buckets are keyed "lo-hi" (or just "lo" when lo == hi); labels above the
    last boundary are left out. Used to slice scores into zero-shot and
    few-shot label groups.
    """
    counts: Dict[str, int] = {label: 0 for label in labels}
    for instance in train_instances:
        for label in instance.gold_labels:
            if label in counts:
                counts[label] += 1
    buckets: Dict[str, Set[str]] = {}
    for lo, hi in boundaries:
        key = f"{lo}" if lo == hi else f"{lo}-{hi}"
        buckets[key] = {label for label, c in counts.items() if lo <= c <= hi}
    return buckets


def bucket_restricted_f1(
    gold: Sequence[Set[str]], pred: Sequence[Set[str]], bucket: Set[str]
) -> float:
    """Macro F1 after restricting gold and predictions to one label bucket.

    Instances whose restricted gold set is empty are dropped; returns 0.0 when
    nothing remains.
    """
    restricted = [
        (g & bucket, p & bucket) for g, p in zip(gold, pred) if g & bucket
    ]
    if not restricted:
        return 0.0
    gold_r = [g for g, _ in restricted]
    pred_r = [p for _, p in restricted]
    return macro_prf(gold_r, pred_r).f1
