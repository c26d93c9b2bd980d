"""Margin-ranking training: negative sampling, dataset mixing, optimizer loop.

The objective per triple is max(sim_neg - sim_pos + margin, 0) where both
similarities are cosines against the shared encoder's output for the
formatted input. Batches average over triples; one instance contributes one
triple per gold label, each with a fresh uniform negative every epoch.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from typing import IO, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import torch

from .encoder import TextEncoder
from .errors import ValidationError
from .formatting import FormattedInput, TypingInstance, format_input, verbalize_label

logger = logging.getLogger(__name__)


@dataclass
class TrainingConfig:
    margin: float = 0.1
    learning_rate: float = 5e-6
    batch_size: int = 32
    epochs: int = 1
    warmup_ratio: float = 0.1
    gradient_clip_norm: float = 1.0
    seed: int = 0
    upsampling_factors: Dict[str, int] = field(default_factory=dict)
    weight_decay: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-6
    dev_every_epochs: int = 1

    def validate(self) -> None:
        if self.margin < 0:
            raise ValidationError("margin must be non-negative")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if self.batch_size <= 0:
            raise ValidationError("batch_size must be positive")
        if self.epochs < 0:
            raise ValidationError("epochs must be non-negative")
        if not 0.0 <= self.warmup_ratio <= 1.0:
            raise ValidationError("warmup_ratio must be in [0, 1]")
        if self.gradient_clip_norm <= 0:
            raise ValidationError("gradient_clip_norm must be positive")
        if self.dev_every_epochs <= 0:
            raise ValidationError("dev_every_epochs must be positive")
        for task_id, factor in self.upsampling_factors.items():
            if not isinstance(factor, int) or factor < 1:
                raise ValidationError(
                    f"up-sampling factor for {task_id!r} must be a positive integer"
                )


@dataclass(frozen=True)
class TrainingTriple:
    input: FormattedInput
    positive_label: str
    negative_label: str
    task_id: str = ""
    instance_id: str = ""

    def __post_init__(self) -> None:
        if self.positive_label == self.negative_label:
            raise ValidationError(
                f"positive and negative label are both {self.positive_label!r}"
            )


def margin_loss(sim_pos: float, sim_neg: float, margin: float) -> float:
    """Hinge on the similarity gap: max(sim_neg - sim_pos + margin, 0)."""
    if margin < 0:
        raise ValidationError("margin must be non-negative")
    for name, value in (("sim_pos", sim_pos), ("sim_neg", sim_neg)):
        if not -1.0 - 1e-9 <= value <= 1.0 + 1e-9:
            raise ValidationError(f"{name}={value} outside [-1, 1]")
    return max(sim_neg - sim_pos + margin, 0.0)


def batch_margin_loss(
    sim_pos: torch.Tensor, sim_neg: torch.Tensor, margin: float
) -> torch.Tensor:
    """Mean hinge loss over a batch of similarity pairs."""
    if margin < 0:
        raise ValidationError("margin must be non-negative")
    return torch.clamp(sim_neg - sim_pos + margin, min=0.0).mean()


def _batch_cosine(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    # no epsilon guard: a zero embedding should surface as a non-finite loss
    return (a * b).sum(dim=-1) / (a.norm(dim=-1) * b.norm(dim=-1))


def sample_negative(candidates, positives, rng: random.Random) -> str:
    """Uniform draw from the candidate labels minus the gold set."""
    pool = sorted(set(candidates) - set(positives))
    if not pool:
        raise ValidationError("no negative available: gold labels cover every candidate")
    return pool[rng.randrange(len(pool))]


def mix_datasets(
    datasets: Sequence[Tuple[str, Sequence[TypingInstance]]],
    factors: Optional[Mapping[str, int]] = None,
    rng: Optional[random.Random] = None,
) -> List[Tuple[str, TypingInstance]]:
    """One epoch's stream: each instance repeated by its task's up-sampling
    factor, then uniformly shuffled."""
    rng = rng if rng is not None else random.Random(0)
    factors = dict(factors or {})
    stream: List[Tuple[str, TypingInstance]] = []
    for task_id, instances in datasets:
        if not instances:
            raise ValidationError(f"dataset {task_id!r} has no instances")
        factor = factors.get(task_id, 1)
        if not isinstance(factor, int) or factor < 1:
            raise ValidationError(
                f"up-sampling factor for {task_id!r} must be a positive integer"
            )
        for instance in instances:
            stream.extend([(task_id, instance)] * factor)
    rng.shuffle(stream)
    return stream


def make_epoch_triples(
    stream: Sequence[Tuple[str, TypingInstance]],
    label_sets: Mapping[str, Sequence[str]],
    rng: random.Random,
    include_description: bool = True,
) -> List[TrainingTriple]:
    """Expand a mixed stream into triples: one per (emitted instance, gold label),
    each with a freshly sampled negative."""
    triples: List[TrainingTriple] = []
    for task_id, instance in stream:
        if not instance.gold_labels:
            raise ValidationError(f"instance {instance.id!r} has no gold labels to train on")
        formatted = format_input(instance, include_description)
        for positive in sorted(instance.gold_labels):
            negative = sample_negative(label_sets[task_id], instance.gold_labels, rng)
            triples.append(
                TrainingTriple(formatted, positive, negative, task_id, instance.id)
            )
    return triples


class Trainer:
    """Owns the optimizer and schedule for one run; call step() once per batch."""

    def __init__(self, encoder: TextEncoder, config: TrainingConfig, total_steps: int):
        config.validate()
        if total_steps < 0:
            raise ValidationError("total_steps must be non-negative")
        self.encoder = encoder
        self.config = config
        self.total_steps = total_steps
        self.optimizer = torch.optim.AdamW(
            encoder.parameters(),
            lr=config.learning_rate,
            betas=(config.adam_beta1, config.adam_beta2),
            eps=config.adam_epsilon,
            weight_decay=config.weight_decay,
        )
        warmup = int(round(config.warmup_ratio * total_steps))

        def lr_lambda(step: int) -> float:
            if total_steps == 0:
                return 1.0
            if step < warmup:
                return (step + 1) / max(1, warmup)
            return max(0.0, (total_steps - step) / max(1, total_steps - warmup))

        self.scheduler = torch.optim.lr_scheduler.LambdaLR(self.optimizer, lr_lambda)
        self.step_count = 0

    def step(self, batch: Sequence[TrainingTriple]) -> dict:
        """One optimizer step on a batch of triples.

        Returns {loss, grad_norm, lr} where grad_norm is the pre-clip norm and
        lr the rate actually applied this step.
        """
        if not batch:
            raise ValidationError("training step requires a non-empty batch")
        inputs = [t.input.text for t in batch]
        positives = [verbalize_label(t.positive_label) for t in batch]
        negatives = [verbalize_label(t.negative_label) for t in batch]
        u = self.encoder.encode_batch(inputs, mode="train")
        v_pos = self.encoder.encode_batch(positives, mode="train")
        v_neg = self.encoder.encode_batch(negatives, mode="train")
        sim_pos = _batch_cosine(u, v_pos)
        sim_neg = _batch_cosine(u, v_neg)
        per_triple = torch.clamp(sim_neg - sim_pos + self.config.margin, min=0.0)
        loss = per_triple.mean()
        if not torch.isfinite(loss):
            bad = (~torch.isfinite(per_triple)).nonzero()
            triple = batch[int(bad[0])] if len(bad) else batch[0]
            raise RuntimeError(
                "non-finite loss at triple "
                f"(instance={triple.instance_id!r}, positive={triple.positive_label!r}, "
                f"negative={triple.negative_label!r})"
            )
        self.optimizer.zero_grad()
        loss.backward()
        grad_norm = float(
            torch.nn.utils.clip_grad_norm_(
                list(self.encoder.parameters()), self.config.gradient_clip_norm
            )
        )
        lr = float(self.optimizer.param_groups[0]["lr"])
        self.optimizer.step()
        self.scheduler.step()
        self.step_count += 1
        return {"loss": float(loss.detach()), "grad_norm": grad_norm, "lr": lr}


@dataclass
class TrainResult:
    encoder: TextEncoder
    history: List[dict]
    log_records: List[dict]
    best_dev_score: Optional[float]
    checkpoint_dir: Optional[str]


def _batches(items: Sequence, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def train_loop(
    datasets: Sequence[Tuple[str, Sequence[TypingInstance]]],
    label_sets: Mapping[str, Sequence[str]],
    config: TrainingConfig,
    encoder: TextEncoder,
    *,
    include_description: bool = True,
    dev_metric: Optional[Callable[[TextEncoder], float]] = None,
    output_dir: Optional[str] = None,
    log_file: Optional[IO[str]] = None,
) -> TrainResult:
    """Run the full ranking-loss training schedule over one or more tasks.

    Single-task and multi-task are the same code path: the epoch stream mixes
    every dataset (after up-sampling) and every step re-encodes input,
    positive, and negative with the current shared parameters. When a
    dev_metric is given, the best-scoring parameters are the ones persisted;
    otherwise the final parameters are. Checkpoint writes are atomic, so an
    interrupted run leaves the last persisted checkpoint intact.
    """
    config.validate()
    if not datasets:
        raise ValidationError("train_loop requires at least one dataset")
    for task_id, instances in datasets:
        if task_id not in label_sets:
            raise ValidationError(f"no candidate label set for task {task_id!r}")
        labels = set(label_sets[task_id])
        for instance in instances:
            missing = instance.gold_labels - labels
            if missing:
                raise ValidationError(
                    f"instance {instance.id!r} has gold labels outside the "
                    f"candidate set: {sorted(missing)}"
                )

    rng = random.Random(config.seed)
    torch.manual_seed(config.seed)
    factors = {task_id: config.upsampling_factors.get(task_id, 1) for task_id, _ in datasets}
    triples_per_epoch = sum(
        factors[task_id] * sum(len(inst.gold_labels) for inst in instances)
        for task_id, instances in datasets
    )
    steps_per_epoch = math.ceil(triples_per_epoch / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    trainer = Trainer(encoder, config, total_steps)

    history: List[dict] = []
    log_records: List[dict] = []
    best_score: Optional[float] = None
    checkpoint_dir: Optional[str] = None

    def emit(record: dict) -> None:
        log_records.append(record)
        if log_file is not None:
            log_file.write(json.dumps(record) + "\n")

    for epoch in range(config.epochs):
        stream = mix_datasets(datasets, factors, rng)
        triples = make_epoch_triples(stream, label_sets, rng, include_description)
        epoch_losses: List[float] = []
        for batch in _batches(triples, config.batch_size):
            stats = trainer.step(batch)
            tasks = {t.task_id for t in batch}
            emit(
                {
                    "step": trainer.step_count,
                    "epoch": epoch,
                    "task": batch[0].task_id if len(tasks) == 1 else "mixed",
                    "loss": stats["loss"],
                    "grad_norm": stats["grad_norm"],
                    "lr": stats["lr"],
                }
            )
            epoch_losses.append(stats["loss"])
        entry = {"epoch": epoch, "mean_loss": sum(epoch_losses) / len(epoch_losses)}
        if dev_metric is not None and (epoch + 1) % config.dev_every_epochs == 0:
            score = float(dev_metric(encoder))
            entry["dev_score"] = score
            if best_score is None or score > best_score:
                best_score = score
                if output_dir is not None:
                    checkpoint_dir = encoder.save_checkpoint(output_dir)
        history.append(entry)
        logger.info("epoch %d mean_loss=%.6f", epoch, entry["mean_loss"])

    if output_dir is not None and (dev_metric is None or checkpoint_dir is None):
        checkpoint_dir = encoder.save_checkpoint(output_dir)
    return TrainResult(encoder, history, log_records, best_score, checkpoint_dir)
