"""Dataset ingestion, run configuration, artifact persistence, and the CLI.

Instances live in a canonical JSONL schema, one object per line:

    {"id": ..., "task_kind": ..., "tokens": [...],
     "spans": [{"start":, "end":, "role":, "entity_type":?}], "labels": [...]}

Candidate labels live in a plain text file, one raw label per line. Commands:
train, evaluate, predict, embed-labels, tune-threshold. Exit codes: 0 success,
1 validation/usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
from dataclasses import dataclass, field, fields, replace
from typing import Dict, List, Optional, Sequence, Tuple

from . import evaluation, inference, training
from .encoder import EncoderConfig, TextEncoder
from .errors import ValidationError
from .fileio import atomic_write_text
from .formatting import (
    Span,
    SpanRole,
    TaskKind,
    TypingInstance,
    format_input,
    verbalize_label,
)
from .training import TrainingConfig, train_loop

logger = logging.getLogger(__name__)

INSTANCE_SCHEMA_VERSION = 1
PREDICTIONS_SCHEMA_VERSION = 1
RANKED_TOP_N = 10


@dataclass
class DatasetSpec:
    task_id: str
    task_kind: TaskKind
    instances_path: str
    labels_path: str
    selection: str = "topk:1"
    upsampling: int = 1
    dev_instances_path: Optional[str] = None
    eval_instances_path: Optional[str] = None

    def selection_rule(self) -> Tuple[str, Optional[int]]:
        return parse_selection(self.selection)

    def validate(self) -> None:
        if not self.task_id:
            raise ValidationError("dataset task_id must be non-empty")
        if self.upsampling < 1 or not isinstance(self.upsampling, int):
            raise ValidationError(f"upsampling for {self.task_id!r} must be a positive integer")
        self.selection_rule()


def parse_selection(selection: str) -> Tuple[str, Optional[int]]:
    if selection == "threshold":
        return ("threshold", None)
    if selection == "topk":
        return ("topk", 1)
    if selection.startswith("topk:"):
        try:
            k = int(selection.split(":", 1)[1])
        except ValueError:
            raise ValidationError(f"malformed selection {selection!r}") from None
        if k < 1:
            raise ValidationError(f"selection {selection!r} needs a positive k")
        return ("topk", k)
    raise ValidationError(f"unknown selection {selection!r}; use 'topk:K' or 'threshold'")


@dataclass
class RunConfig:
    datasets: List[DatasetSpec] = field(default_factory=list)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    output_dir: str = "semtyping-run"
    seed: int = 0

    def validate(self) -> None:
        ids = [spec.task_id for spec in self.datasets]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"dataset task_ids must be unique, got {ids}")
        for spec in self.datasets:
            spec.validate()

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        return cls.from_dict(data, base_dir=os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_dict(cls, data: dict, base_dir: str = ".") -> "RunConfig":
        _reject_unknown(data, {"datasets", "encoder", "training", "output_dir", "seed"}, "run config")
        encoder_cfg = _build_section(EncoderConfig, data.get("encoder", {}), "encoder")
        training_cfg = _build_section(TrainingConfig, data.get("training", {}), "training")
        specs = []
        for entry in data.get("datasets", []):
            spec = _build_section(DatasetSpec, dict(entry), "dataset")
            spec.task_kind = TaskKind(spec.task_kind)
            for attr in ("instances_path", "labels_path", "dev_instances_path", "eval_instances_path"):
                value = getattr(spec, attr)
                if value is not None and not os.path.isabs(value):
                    setattr(spec, attr, os.path.join(base_dir, value))
            specs.append(spec)
        output_dir = data.get("output_dir", "semtyping-run")
        if not os.path.isabs(output_dir):
            output_dir = os.path.join(base_dir, output_dir)
        cfg = cls(
            datasets=specs,
            encoder=encoder_cfg,
            training=training_cfg,
            output_dir=output_dir,
            seed=int(data.get("seed", 0)),
        )
        cfg.training.seed = cfg.seed
        cfg.validate()
        return cfg


def _reject_unknown(data: dict, allowed: set, where: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(f"unknown {where} keys: {sorted(unknown)}")


def _build_section(cls, data: dict, where: str):
    names = {f.name for f in fields(cls)}
    _reject_unknown(data, names, where)
    try:
        return cls(**data)
    except TypeError as exc:
        raise ValidationError(f"bad {where} section: {exc}") from None


def instance_to_record(instance: TypingInstance) -> dict:
    record = {
        "id": instance.id,
        "task_kind": instance.task.value,
        "tokens": list(instance.tokens),
        "spans": [],
        "labels": sorted(instance.gold_labels),
    }
    for span in instance.spans:
        entry = {"start": span.start, "end": span.end, "role": span.role.value}
        if span.entity_type is not None:
            entry["entity_type"] = span.entity_type
        record["spans"].append(entry)
    return record


def record_to_instance(record: dict) -> TypingInstance:
    _reject_unknown(record, {"id", "task_kind", "tokens", "spans", "labels"}, "instance record")
    try:
        task = TaskKind(record["task_kind"])
    except (KeyError, ValueError):
        raise ValidationError(f"bad or missing task_kind: {record.get('task_kind')!r}") from None
    tokens = record.get("tokens")
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ValidationError("tokens must be a list of strings")
    spans = []
    for entry in record.get("spans", []):
        _reject_unknown(entry, {"start", "end", "role", "entity_type"}, "span")
        try:
            role = SpanRole(entry["role"])
        except (KeyError, ValueError):
            raise ValidationError(f"bad or missing span role: {entry.get('role')!r}") from None
        spans.append(
            Span(int(entry["start"]), int(entry["end"]), role, entry.get("entity_type"))
        )
    labels = record.get("labels", [])
    if not isinstance(labels, list) or not all(isinstance(l, str) for l in labels):
        raise ValidationError("labels must be a list of strings")
    instance = TypingInstance(
        id=str(record.get("id", "")),
        task=task,
        tokens=list(tokens),
        spans=spans,
        gold_labels=set(labels),
    )
    instance.validate()
    return instance


def read_instances(path: str) -> List[TypingInstance]:
    instances = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                instances.append(record_to_instance(record))
            except (json.JSONDecodeError, ValidationError, TypeError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return instances


def write_instances(path: str, instances: Sequence[TypingInstance]) -> None:
    lines = [json.dumps(instance_to_record(inst)) for inst in instances]
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def read_label_file(path: str) -> List[str]:
    with open(path, "r", encoding="utf-8") as handle:
        labels = [line.rstrip("\n") for line in handle if line.strip()]
    if not labels:
        raise ValidationError(f"label file {path} is empty")
    seen = set()
    for label in labels:
        if label in seen:
            raise ValidationError(f"duplicate label {label!r} in {path}")
        seen.add(label)
    return labels


def load_dataset(spec: DatasetSpec) -> Tuple[List[TypingInstance], List[str]]:
    """Read and validate one dataset: instances match the declared task kind
    and every gold label appears in the labels file."""
    spec.validate()
    labels = read_label_file(spec.labels_path)
    label_set = set(labels)
    instances = read_instances(spec.instances_path)
    for instance in instances:
        if instance.task is not spec.task_kind:
            raise ValidationError(
                f"instance {instance.id!r} has task_kind {instance.task.value!r}, "
                f"dataset {spec.task_id!r} expects {spec.task_kind.value!r}"
            )
        missing = instance.gold_labels - label_set
        if missing:
            raise ValidationError(
                f"instance {instance.id!r} has gold labels missing from "
                f"{spec.labels_path}: {sorted(missing)}"
            )
    return instances, labels


@dataclass
class LoadedTask:
    spec: DatasetSpec
    instances: List[TypingInstance]
    labels: List[str]
    dev_instances: List[TypingInstance] = field(default_factory=list)
    eval_instances: List[TypingInstance] = field(default_factory=list)


def load_tasks(cfg: RunConfig) -> List[LoadedTask]:
    cfg.validate()
    if not cfg.datasets:
        raise ValidationError("run config declares no datasets")
    tasks = []
    for spec in cfg.datasets:
        instances, labels = load_dataset(spec)
        dev = read_instances(spec.dev_instances_path) if spec.dev_instances_path else []
        evl = read_instances(spec.eval_instances_path) if spec.eval_instances_path else []
        tasks.append(LoadedTask(spec, instances, labels, dev, evl))
    return tasks


def build_vocab(tasks: Sequence[LoadedTask]) -> List[str]:
    """Whitespace vocabulary over all formatted inputs and verbalized labels."""
    words = set()
    for task in tasks:
        for group in (task.instances, task.dev_instances, task.eval_instances):
            for instance in group:
                words.update(format_input(instance, include_description=True).text.split())
        for label in task.labels:
            words.update(verbalize_label(label).split())
    return sorted(words)


def _pick_task(tasks: Sequence[LoadedTask], task_id: Optional[str]) -> LoadedTask:
    if task_id is None:
        if len(tasks) == 1:
            return tasks[0]
        raise ValidationError(
            f"--task is required with multiple datasets: {[t.spec.task_id for t in tasks]}"
        )
    for task in tasks:
        if task.spec.task_id == task_id:
            return task
    raise ValidationError(f"unknown task {task_id!r}")


def _make_dev_metric(tasks: Sequence[LoadedTask], include_description: bool):
    """Mean dev score across tasks that declare a dev split.

    top-k tasks score the fraction of dev instances whose selected set hits a
    gold label; threshold tasks tune tau on dev and score macro F1 at it.
    """
    with_dev = [task for task in tasks if task.dev_instances]
    if not with_dev:
        return None

    def metric(encoder: TextEncoder) -> float:
        scores = []
        for task in with_dev:
            index = inference.build_label_index(task.labels, encoder)
            kind, k = task.spec.selection_rule()
            if kind == "topk":
                hits = 0
                for instance in task.dev_instances:
                    pred = inference.predict_topk(
                        instance, index, k, encoder=encoder,
                        include_description=include_description,
                    )
                    if set(pred.selected) & instance.gold_labels:
                        hits += 1
                scores.append(hits / len(task.dev_instances))
            else:
                tau = inference.tune_threshold(
                    task.dev_instances, index, encoder=encoder,
                    include_description=include_description,
                )
                golds = [set(inst.gold_labels) for inst in task.dev_instances]
                preds = [
                    set(
                        inference.predict_threshold(
                            inst, index, tau, encoder=encoder,
                            include_description=include_description,
                        ).selected
                    )
                    for inst in task.dev_instances
                ]
                scores.append(evaluation.macro_prf(golds, preds).f1)
        return sum(scores) / len(scores)

    return metric


def _write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")


# ---------------------------------------------------------------------------
# commands


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.training.seed = args.seed
    if getattr(args, "output", None):
        cfg.output_dir = args.output
    return cfg


def cmd_train(args) -> int:
    cfg = _apply_overrides(RunConfig.from_file(args.config), args)
    include_description = not args.no_task_description
    tasks = load_tasks(cfg)
    encoder_cfg = replace(cfg.encoder, vocab_words=build_vocab(tasks))
    encoder = TextEncoder(encoder_cfg, seed=cfg.seed)
    cfg.training.upsampling_factors = {
        task.spec.task_id: task.spec.upsampling for task in tasks
    }
    os.makedirs(cfg.output_dir, exist_ok=True)
    _write_json(
        os.path.join(cfg.output_dir, "run_meta.json"),
        {
            "schema_version": INSTANCE_SCHEMA_VERSION,
            "seed": cfg.seed,
            "include_description": include_description,
            "tasks": [task.spec.task_id for task in tasks],
        },
    )
    log_path = os.path.join(cfg.output_dir, "training_log.jsonl")
    with open(log_path, "w", encoding="utf-8") as log_file:
        log_file.write(json.dumps({"schema_version": 1, "seed": cfg.seed}) + "\n")
        result = train_loop(
            [(task.spec.task_id, task.instances) for task in tasks],
            {task.spec.task_id: task.labels for task in tasks},
            cfg.training,
            encoder,
            include_description=include_description,
            dev_metric=_make_dev_metric(tasks, include_description),
            output_dir=cfg.output_dir,
            log_file=log_file,
        )
    _write_json(
        os.path.join(cfg.output_dir, "dev_history.json"),
        {
            "schema_version": 1,
            "seed": cfg.seed,
            "best_dev_score": result.best_dev_score,
            "history": result.history,
        },
    )
    final_loss = result.history[-1]["mean_loss"] if result.history else None
    print(f"checkpoint: {result.checkpoint_dir}")
    print(f"epochs: {len(result.history)}  final mean loss: {final_loss}")
    if result.best_dev_score is not None:
        print(f"best dev score: {result.best_dev_score:.4f}")
    return 0


def _load_encoder(args, cfg: RunConfig) -> TextEncoder:
    checkpoint = args.checkpoint or cfg.output_dir
    return TextEncoder.load_checkpoint(checkpoint)


def _predict_for_task(
    task: LoadedTask,
    encoder: TextEncoder,
    instances: Sequence[TypingInstance],
    include_description: bool,
    k: Optional[int],
    tau: Optional[float],
) -> List[inference.Prediction]:
    index = inference.build_label_index(task.labels, encoder)
    if k is None and tau is None:
        kind, sel_k = task.spec.selection_rule()
        if kind == "topk":
            k = sel_k
        else:
            raise ValidationError(
                f"task {task.spec.task_id!r} uses threshold selection; pass --tau"
            )
    predictions = []
    for instance in instances:
        if tau is not None:
            pred = inference.predict_threshold(
                instance, index, tau, encoder=encoder,
                include_description=include_description,
            )
        else:
            pred = inference.predict_topk(
                instance, index, k, encoder=encoder,
                include_description=include_description,
            )
        predictions.append(pred)
    return predictions


def cmd_predict(args) -> int:
    cfg = _apply_overrides(RunConfig.from_file(args.config), args)
    include_description = not args.no_task_description
    tasks = load_tasks(cfg)
    task = _pick_task(tasks, args.task)
    encoder = _load_encoder(args, cfg)
    instances = (
        read_instances(args.input)
        if args.input
        else (task.eval_instances or task.instances)
    )
    if args.k is not None and args.tau is not None:
        raise ValidationError("pass either --k or --tau, not both")
    predictions = _predict_for_task(
        task, encoder, instances, include_description, args.k, args.tau
    )
    out_dir = args.output or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "predictions.jsonl")
    cap = max(RANKED_TOP_N, args.k or 0)
    lines = [
        json.dumps(
            {
                "schema_version": PREDICTIONS_SCHEMA_VERSION,
                "kind": "predictions",
                "seed": cfg.seed,
                "task": task.spec.task_id,
                "checkpoint_id": encoder.checkpoint_id,
            }
        )
    ]
    for pred in predictions:
        lines.append(
            json.dumps(
                {
                    "instance_id": pred.instance_id,
                    "selected": list(pred.selected),
                    "ranked": [[label, score] for label, score in pred.ranked[:cap]],
                }
            )
        )
    atomic_write_text(path, "".join(line + "\n" for line in lines))
    print(f"wrote {len(predictions)} predictions to {path}")
    return 0


def read_predictions(path: str) -> Dict[str, List[str]]:
    """instance_id -> selected labels from a predictions JSONL file."""
    selected = {}
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            if record.get("kind") == "predictions":
                continue
            if "instance_id" not in record:
                raise ValidationError(f"{path}:{lineno}: record has no instance_id")
            selected[str(record["instance_id"])] = list(record.get("selected", []))
    return selected


def _single_gold(instance: TypingInstance) -> str:
    if len(instance.gold_labels) != 1:
        raise ValidationError(
            f"instance {instance.id!r} needs exactly one gold label for this "
            f"protocol, has {len(instance.gold_labels)}"
        )
    return next(iter(instance.gold_labels))


def _print_report(report: evaluation.MetricsReport) -> None:
    supports = " ".join(f"{k}={v}" for k, v in report.support_counts.items())
    accuracy = f"{report.accuracy:.4f}" if report.accuracy is not None else "-"
    print(f"{'protocol':<10}{'precision':<12}{'recall':<12}{'f1':<12}{'accuracy':<12}supports")
    print(
        f"{report.protocol:<10}{report.precision:<12.4f}{report.recall:<12.4f}"
        f"{report.f1:<12.4f}{accuracy:<12}{supports}"
    )


def cmd_evaluate(args) -> int:
    cfg = _apply_overrides(RunConfig.from_file(args.config), args)
    include_description = not args.no_task_description
    tasks = load_tasks(cfg)
    task = _pick_task(tasks, args.task)
    instances = (
        read_instances(args.input)
        if args.input
        else (task.eval_instances or task.instances)
    )
    if args.protocol == "nway":
        encoder = _load_encoder(args, cfg)
        pool: Dict[str, List[TypingInstance]] = {}
        for instance in instances:
            pool.setdefault(_single_gold(instance), []).append(instance)
        rng = random.Random(cfg.seed)
        episodes = [
            evaluation.sample_episode(pool, args.n_way, rng) for _ in range(args.episodes)
        ]
        model = inference.RestrictedTop1(encoder, include_description)
        report = evaluation.nway_zeroshot_accuracy(model, episodes)
    else:
        if args.predictions:
            selected = read_predictions(args.predictions)
            missing = [i.id for i in instances if i.id not in selected]
            if missing:
                raise ValidationError(
                    f"predictions file lacks instances: {missing[:5]}"
                )
            per_instance = [selected[i.id] for i in instances]
        else:
            encoder = _load_encoder(args, cfg)
            predictions = _predict_for_task(
                task, encoder, instances, include_description, args.k, args.tau
            )
            per_instance = [list(p.selected) for p in predictions]
        if args.protocol == "macro":
            report = evaluation.macro_prf(
                [set(i.gold_labels) for i in instances],
                [set(sel) for sel in per_instance],
            )
        else:
            gold = [_single_gold(i) for i in instances]
            pred = [sel[0] if sel else args.abstain for sel in per_instance]
            report = evaluation.micro_prf(gold, pred, abstain=args.abstain)
    _print_report(report)
    if args.output:
        os.makedirs(args.output, exist_ok=True)
        _write_json(
            os.path.join(args.output, "metrics.json"),
            {"schema_version": 1, "seed": cfg.seed, "report": report.to_dict()},
        )
    return 0


def cmd_tune_threshold(args) -> int:
    cfg = _apply_overrides(RunConfig.from_file(args.config), args)
    include_description = not args.no_task_description
    tasks = load_tasks(cfg)
    task = _pick_task(tasks, args.task)
    encoder = _load_encoder(args, cfg)
    dev = read_instances(args.input) if args.input else task.dev_instances
    if not dev:
        raise ValidationError(
            f"task {task.spec.task_id!r} has no dev instances; set dev_instances_path "
            "or pass --input"
        )
    index = inference.build_label_index(task.labels, encoder)
    tau = inference.tune_threshold(
        dev, index, encoder=encoder, include_description=include_description
    )
    out_dir = args.output or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "threshold.json")
    _write_json(path, {"schema_version": 1, "seed": cfg.seed, "tau": tau})
    print(f"tau={tau}")
    print(f"wrote {path}")
    return 0


def cmd_embed_labels(args) -> int:
    cfg = _apply_overrides(RunConfig.from_file(args.config), args)
    tasks = load_tasks(cfg)
    task = _pick_task(tasks, args.task)
    encoder = _load_encoder(args, cfg)
    index = inference.build_label_index(task.labels, encoder)
    out_dir = args.output or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    emb_path = os.path.join(out_dir, "label_embeddings.bin")
    list_path = os.path.join(out_dir, "label_embeddings.labels.txt")
    inference.write_label_embeddings(index, emb_path)
    inference.write_label_list(index, list_path)
    print(f"wrote {emb_path}")
    print(f"wrote {list_path}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _CommandLineError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        raise _CommandLineError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="run config JSON")
    parser.add_argument("--seed", type=int, default=None, help="override the run seed")
    parser.add_argument("--output", default=None, help="output directory")
    parser.add_argument(
        "--no-task-description",
        action="store_true",
        help="format inputs without the task description suffix",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semtyping", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p_train = sub.add_parser("train", help="train on the configured datasets")
    _add_common(p_train)
    p_train.set_defaults(func=cmd_train)

    p_predict = sub.add_parser("predict", help="rank candidate labels per instance")
    _add_common(p_predict)
    p_predict.add_argument("--task", default=None)
    p_predict.add_argument("--checkpoint", default=None, help="checkpoint directory")
    p_predict.add_argument("--input", default=None, help="instances JSONL override")
    p_predict.add_argument("--k", type=int, default=None)
    p_predict.add_argument("--tau", type=float, default=None)
    p_predict.set_defaults(func=cmd_predict)

    p_eval = sub.add_parser("evaluate", help="score predictions or a checkpoint")
    _add_common(p_eval)
    p_eval.add_argument("--task", default=None)
    p_eval.add_argument("--protocol", required=True, choices=["macro", "micro", "nway"])
    p_eval.add_argument("--checkpoint", default=None)
    p_eval.add_argument("--input", default=None)
    p_eval.add_argument("--predictions", default=None, help="score an existing predictions file")
    p_eval.add_argument("--abstain", default="no_relation")
    p_eval.add_argument("--k", type=int, default=None)
    p_eval.add_argument("--tau", type=float, default=None)
    p_eval.add_argument("--n-way", type=int, default=5)
    p_eval.add_argument("--episodes", type=int, default=1000)
    p_eval.set_defaults(func=cmd_evaluate)

    p_tune = sub.add_parser("tune-threshold", help="grid-search tau on the dev split")
    _add_common(p_tune)
    p_tune.add_argument("--task", default=None)
    p_tune.add_argument("--checkpoint", default=None)
    p_tune.add_argument("--input", default=None)
    p_tune.set_defaults(func=cmd_tune_threshold)

    p_embed = sub.add_parser("embed-labels", help="write the label-embedding file")
    _add_common(p_embed)
    p_embed.add_argument("--task", default=None)
    p_embed.add_argument("--checkpoint", default=None)
    p_embed.set_defaults(func=cmd_embed_labels)

    return parser


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _CommandLineError as exc:
        sys.stderr.write(parser.format_usage())
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 1
    try:
        return int(args.func(args))
    except (ValidationError, FileNotFoundError, IsADirectoryError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures exit 2
        logger.exception("runtime failure")
        sys.stderr.write(f"runtime failure: {exc}\n")
        return 2


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run_command())
