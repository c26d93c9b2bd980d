"""Turning typing instances into encoder-ready text.

The surface conventions live here: marker tokens around spans of interest,
a natural-language task suffix ("Describe the type of ..."), and label
verbalization (ontology prefixes and underscores rewritten as plain words).
Everything is a pure function over immutable inputs.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import ValidationError


class TaskKind(str, enum.Enum):
    """Lexical typing of one span, or relational typing of a span pair."""

    LEXICAL_ENTITY = "lexical-entity"
    LEXICAL_EVENT = "lexical-event"
    RELATIONAL = "relational"


class SpanRole(str, enum.Enum):
    ENTITY = "entity"
    SUBJECT = "subject"
    OBJECT = "object"
    TRIGGER = "trigger"


MARKER_PAIRS: dict[SpanRole, tuple[str, str]] = {
    SpanRole.ENTITY: ("<E>", "</E>"),
    SpanRole.SUBJECT: ("<SUBJ>", "</SUBJ>"),
    SpanRole.OBJECT: ("<OBJ>", "</OBJ>"),
    SpanRole.TRIGGER: ("<T>", "</T>"),
}

MARKER_TOKENS: tuple[str, ...] = tuple(t for pair in MARKER_PAIRS.values() for t in pair)

ROLES_FOR_KIND: dict[TaskKind, frozenset[SpanRole]] = {
    TaskKind.LEXICAL_ENTITY: frozenset({SpanRole.ENTITY}),
    TaskKind.LEXICAL_EVENT: frozenset({SpanRole.TRIGGER}),
    TaskKind.RELATIONAL: frozenset({SpanRole.SUBJECT, SpanRole.OBJECT}),
}

# Words glued to the preceding word when detokenizing: sentence-final
# punctuation and the possessive clitic, possibly chained ("'s."). Marker
# tokens are always space-separated on both sides, so a clitic right after
# a close marker keeps its leading space.
_ATTACHABLE = re.compile(r"^(?:'s|[.!?])+$")


@dataclass(frozen=True)
class Span:
    """A token span of interest; `end` is exclusive."""

    start: int
    end: int
    role: SpanRole
    entity_type: Optional[str] = None

    def __post_init__(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise ValidationError(
                f"span ({self.start}, {self.end}) must satisfy 0 <= start < end"
            )


def _describe(span: Span) -> str:
    return f"[{span.start}:{span.end} {span.role.value}]"


def _check_spans(tokens: Sequence[str], spans: Sequence[Span]) -> list[Span]:
    """Bounds and overlap checks; returns spans sorted by start."""
    for span in spans:
        if span.end > len(tokens):
            raise ValidationError(
                f"span {_describe(span)} exceeds sentence length {len(tokens)}"
            )
    ordered = sorted(spans, key=lambda s: s.start)
    for left, right in zip(ordered, ordered[1:]):
        if right.start < left.end:
            raise ValidationError(
                f"span {_describe(right)} overlaps span {_describe(left)}"
            )
    return ordered


@dataclass
class TypingInstance:
    """One sentence with role-tagged spans and its gold label set."""

    id: str
    task: TaskKind
    tokens: list[str]
    spans: list[Span]
    gold_labels: set[str] = field(default_factory=set)

    def validate(self) -> None:
        _check_spans(self.tokens, self.spans)
        allowed = ROLES_FOR_KIND[self.task]
        for span in self.spans:
            if span.role not in allowed:
                raise ValidationError(
                    f"span {_describe(span)} has role '{span.role.value}', "
                    f"not valid for task '{self.task.value}'"
                )
        roles = [s.role for s in self.spans]
        if self.task is TaskKind.RELATIONAL:
            if roles.count(SpanRole.SUBJECT) != 1 or roles.count(SpanRole.OBJECT) != 1:
                raise ValidationError(
                    "relational instances need exactly one subject span and one "
                    f"object span, got roles {[r.value for r in roles]}"
                )
        elif len(self.spans) != 1:
            raise ValidationError(
                f"{self.task.value} instances need exactly one span, got {len(self.spans)}"
            )

    def span_with_role(self, role: SpanRole) -> Span:
        for span in self.spans:
            if span.role is role:
                return span
        raise ValidationError(f"instance {self.id!r} has no span with role '{role.value}'")


@dataclass(frozen=True)
class FormattedInput:
    """The final encoder input text for one instance."""

    text: str
    description_included: bool


def _join(items: Sequence[tuple[str, bool]]) -> str:
    """Join (word, is_marker) items; attachable words lose their leading space."""
    parts: list[str] = []
    prev_marker = False
    for i, (word, is_marker) in enumerate(items):
        attach = i > 0 and not is_marker and not prev_marker and _ATTACHABLE.match(word)
        if i > 0 and not attach:
            parts.append(" ")
        parts.append(word)
        prev_marker = is_marker
    return "".join(parts)


def detokenize(tokens: Sequence[str]) -> str:
    """Word tokens back to a surface string, e.g. [.., "OLEDs", "."] -> "... OLEDs."."""
    return _join([(t, False) for t in tokens])


def insert_markers(tokens: Sequence[str], spans: Sequence[Span]) -> str:
    """Detokenized sentence with each span wrapped in its role's marker pair.

    Markers appear in span order; everything outside the spans is the plain
    detokenized sentence. Overlapping or out-of-range spans raise.
    """
    ordered = _check_spans(tokens, spans)
    opens = {s.start: s for s in ordered}
    closes = {s.end: s for s in ordered}
    items: list[tuple[str, bool]] = []
    for i, token in enumerate(tokens):
        if i in closes:
            items.append((MARKER_PAIRS[closes[i].role][1], True))
        if i in opens:
            items.append((MARKER_PAIRS[opens[i].role][0], True))
        items.append((token, False))
    if len(tokens) in closes:
        items.append((MARKER_PAIRS[closes[len(tokens)].role][1], True))
    return _join(items)


def strip_markers(text: str) -> str:
    """Remove marker tokens and restore the plain detokenized sentence."""
    words = [w for w in text.split(" ") if w not in MARKER_TOKENS]
    return _join([(w, False) for w in words])


def render_description(task: TaskKind, spans: Sequence[Span], tokens: Sequence[str]) -> str:
    """The natural-language task suffix for a sentence.

    Lexical tasks: "Describe the type of {mention}." Relational tasks:
    "Describe the relationship between {subject} and {object}.", each
    argument prefixed by its entity type when one is attached.
    """
    _check_spans(tokens, spans)
    if task is TaskKind.RELATIONAL:
        subject = next((s for s in spans if s.role is SpanRole.SUBJECT), None)
        obj = next((s for s in spans if s.role is SpanRole.OBJECT), None)
        if subject is None or obj is None:
            raise ValidationError(
                "relational description needs both a subject span and an object span"
            )
        return (
            "Describe the relationship between "
            f"{_argument(subject, tokens)} and {_argument(obj, tokens)}."
        )
    if len(spans) != 1:
        raise ValidationError(
            f"lexical description needs exactly one span, got {len(spans)}"
        )
    mention = detokenize(tokens[spans[0].start : spans[0].end])
    return f"Describe the type of {mention}."


def _argument(span: Span, tokens: Sequence[str]) -> str:
    mention = detokenize(tokens[span.start : span.end])
    return f"{span.entity_type} {mention}" if span.entity_type else mention


def format_input(instance: TypingInstance, include_description: bool = True) -> FormattedInput:
    """Marker-annotated sentence, optionally followed by the task description."""
    instance.validate()
    text = insert_markers(instance.tokens, instance.spans)
    if include_description:
        text = f"{text} {render_description(instance.task, instance.spans, instance.tokens)}"
    return FormattedInput(text=text, description_included=include_description)


_PREFIX_REWRITES = (("per:", "person "), ("org:", "organization "))


def verbalize_label(raw: str) -> str:
    """Rewrite an ontological label as plain words.

    "per:" and "org:" prefixes become "person " / "organization ", underscores
    become spaces, anything else passes through. Idempotent.
    """
    if not raw:
        raise ValidationError("label must be a non-empty string")
    text = raw
    for prefix, replacement in _PREFIX_REWRITES:
        if text.startswith(prefix):
            text = replacement + text[len(prefix) :]
            break
    text = " ".join(text.replace("_", " ").split())
    if not text:
        raise ValidationError(f"label {raw!r} is empty after verbalization")
    return text
