import random

import pytest

from semtyping.errors import ValidationError
from semtyping.formatting import (
    MARKER_TOKENS,
    Span,
    SpanRole,
    TaskKind,
    TypingInstance,
    detokenize,
    format_input,
    insert_markers,
    render_description,
    strip_markers,
    verbalize_label,
)

from synth import (
    build_compositional_corpus,
    build_event_corpus,
    build_lexical_corpus,
    build_relation_corpus,
)

RITEK_TOKENS = ["Currently", "Ritek", "is", "the", "largest", "producer", "of", "OLEDs", "."]
SIEGE_TOKENS = ["The", "siege", "began", "on", "15", "September", "."]
HERRERA_TOKENS = ["Herrera", "'s", "wife", "Ramona", "died", "in", "1991", "."]


def ritek_instance():
    return TypingInstance(
        id="ritek",
        task=TaskKind.LEXICAL_ENTITY,
        tokens=list(RITEK_TOKENS),
        spans=[Span(1, 2, SpanRole.ENTITY)],
        gold_labels={"company"},
    )


def herrera_instance():
    return TypingInstance(
        id="herrera",
        task=TaskKind.RELATIONAL,
        tokens=list(HERRERA_TOKENS),
        spans=[
            Span(0, 1, SpanRole.SUBJECT, "person"),
            Span(3, 4, SpanRole.OBJECT, "person"),
        ],
        gold_labels={"per:spouse"},
    )


class TestInsertMarkers:
    def test_entity_example(self):
        text = insert_markers(RITEK_TOKENS, [Span(1, 2, SpanRole.ENTITY)])
        assert text == "Currently <E> Ritek </E> is the largest producer of OLEDs."

    def test_trigger_example(self):
        text = insert_markers(SIEGE_TOKENS, [Span(2, 3, SpanRole.TRIGGER)])
        assert text == "The siege <T> began </T> on 15 September."

    def test_no_spans_is_plain_sentence(self):
        assert insert_markers(RITEK_TOKENS, []) == detokenize(RITEK_TOKENS)
        assert detokenize(RITEK_TOKENS) == "Currently Ritek is the largest producer of OLEDs."

    def test_subject_object_pair(self):
        text = insert_markers(HERRERA_TOKENS, herrera_instance().spans)
        assert text == "<SUBJ> Herrera </SUBJ> 's wife <OBJ> Ramona </OBJ> died in 1991."

    def test_span_at_sentence_end(self):
        text = insert_markers(["It", "was", "Ritek"], [Span(2, 3, SpanRole.ENTITY)])
        assert text == "It was <E> Ritek </E>"

    def test_out_of_range_span_names_offender(self):
        with pytest.raises(ValidationError, match=r"\[5:9 entity\]"):
            insert_markers(["a", "b"], [Span(5, 9, SpanRole.ENTITY)])

    def test_overlapping_spans_rejected(self):
        spans = [Span(0, 2, SpanRole.SUBJECT), Span(1, 3, SpanRole.OBJECT)]
        with pytest.raises(ValidationError, match="overlaps"):
            insert_markers(["a", "b", "c", "d"], spans)

    def test_adjacent_spans_allowed(self):
        spans = [Span(0, 1, SpanRole.SUBJECT), Span(1, 2, SpanRole.OBJECT)]
        text = insert_markers(["Alice", "Acme"], spans)
        assert text == "<SUBJ> Alice </SUBJ> <OBJ> Acme </OBJ>"

    def test_negative_or_empty_span_rejected_at_construction(self):
        with pytest.raises(ValidationError):
            Span(-1, 1, SpanRole.ENTITY)
        with pytest.raises(ValidationError):
            Span(2, 2, SpanRole.ENTITY)


class TestRenderDescription:
    def test_lexical_entity(self):
        desc = render_description(
            TaskKind.LEXICAL_ENTITY, [Span(1, 2, SpanRole.ENTITY)], RITEK_TOKENS
        )
        assert desc == "Describe the type of Ritek."

    def test_lexical_event_shares_template(self):
        desc = render_description(
            TaskKind.LEXICAL_EVENT, [Span(2, 3, SpanRole.TRIGGER)], SIEGE_TOKENS
        )
        assert desc == "Describe the type of began."

    def test_relational_with_entity_types(self):
        desc = render_description(
            TaskKind.RELATIONAL, herrera_instance().spans, HERRERA_TOKENS
        )
        assert desc == "Describe the relationship between person Herrera and person Ramona."

    def test_relational_without_entity_types(self):
        spans = [Span(0, 1, SpanRole.SUBJECT), Span(3, 4, SpanRole.OBJECT)]
        desc = render_description(TaskKind.RELATIONAL, spans, HERRERA_TOKENS)
        assert desc == "Describe the relationship between Herrera and Ramona."

    def test_relational_one_typed_argument(self):
        spans = [Span(0, 1, SpanRole.SUBJECT, "person"), Span(3, 4, SpanRole.OBJECT)]
        desc = render_description(TaskKind.RELATIONAL, spans, HERRERA_TOKENS)
        assert desc == "Describe the relationship between person Herrera and Ramona."

    def test_relational_missing_object_rejected(self):
        with pytest.raises(ValidationError, match="subject span and an object span"):
            render_description(
                TaskKind.RELATIONAL, [Span(0, 1, SpanRole.SUBJECT)], HERRERA_TOKENS
            )

    def test_multi_token_mention(self):
        tokens = ["the", "New", "York", "Times", "wrote", "."]
        desc = render_description(
            TaskKind.LEXICAL_ENTITY, [Span(1, 4, SpanRole.ENTITY)], tokens
        )
        assert desc == "Describe the type of New York Times."


class TestFormatInput:
    def test_with_description(self):
        formatted = format_input(ritek_instance(), True)
        assert formatted.text == (
            "Currently <E> Ritek </E> is the largest producer of OLEDs. "
            "Describe the type of Ritek."
        )
        assert formatted.description_included

    def test_without_description(self):
        formatted = format_input(ritek_instance(), False)
        assert formatted.text == "Currently <E> Ritek </E> is the largest producer of OLEDs."
        assert not formatted.description_included

    def test_relational_full_example(self):
        formatted = format_input(herrera_instance(), True)
        assert formatted.text == (
            "<SUBJ> Herrera </SUBJ> 's wife <OBJ> Ramona </OBJ> died in 1991. "
            "Describe the relationship between person Herrera and person Ramona."
        )

    def test_task_kind_role_mismatch_rejected(self):
        instance = ritek_instance()
        instance.spans = [Span(1, 2, SpanRole.TRIGGER)]
        with pytest.raises(ValidationError, match="not valid for task"):
            format_input(instance)

    def test_lexical_needs_exactly_one_span(self):
        instance = ritek_instance()
        instance.spans = [Span(1, 2, SpanRole.ENTITY), Span(4, 5, SpanRole.ENTITY)]
        with pytest.raises(ValidationError, match="exactly one span"):
            format_input(instance)


def all_fixture_instances():
    lexical, _ = build_lexical_corpus(n_per_type=4, seed=1)
    events, _ = build_event_corpus(n_per_type=4, seed=2)
    relations, _ = build_relation_corpus(n_per_relation=2, seed=3)
    comp_train, comp_test, _, _ = build_compositional_corpus(4, 4, seed=4)
    return (
        [ritek_instance(), herrera_instance()]
        + lexical + events + relations + comp_train + comp_test
    )


class TestFormattingProperties:
    def test_round_trip_strip_markers(self):
        for instance in all_fixture_instances():
            marked = insert_markers(instance.tokens, instance.spans)
            assert strip_markers(marked) == detokenize(instance.tokens)

    def test_markers_balanced_and_span_text_verbatim(self):
        for instance in all_fixture_instances():
            text = format_input(instance, True).text
            words = text.split(" ")
            for open_tok, close_tok in (
                ("<E>", "</E>"), ("<SUBJ>", "</SUBJ>"), ("<OBJ>", "</OBJ>"), ("<T>", "</T>")
            ):
                assert words.count(open_tok) == words.count(close_tok)
            for span in instance.spans:
                role_open, role_close = {
                    SpanRole.ENTITY: ("<E>", "</E>"),
                    SpanRole.SUBJECT: ("<SUBJ>", "</SUBJ>"),
                    SpanRole.OBJECT: ("<OBJ>", "</OBJ>"),
                    SpanRole.TRIGGER: ("<T>", "</T>"),
                }[span.role]
                start = words.index(role_open)
                stop = words.index(role_close)
                assert words[start + 1 : stop] == instance.tokens[span.start : span.end]

    def test_no_description_is_strict_prefix(self):
        for instance in all_fixture_instances():
            bare = format_input(instance, False).text
            full = format_input(instance, True).text
            assert full.startswith(bare) and len(full) > len(bare)

    def test_description_ends_with_period(self):
        for instance in all_fixture_instances():
            assert format_input(instance, True).text.endswith(".")


class TestVerbalizeLabel:
    def test_person_prefix(self):
        assert verbalize_label("per:parent") == "person parent"

    def test_organization_prefix_and_underscores(self):
        assert verbalize_label("org:city_of_headquarters") == "organization city of headquarters"

    def test_plain_label_identity(self):
        assert verbalize_label("company") == "company"

    def test_no_relation(self):
        assert verbalize_label("no_relation") == "no relation"

    def test_empty_label_rejected(self):
        with pytest.raises(ValidationError):
            verbalize_label("")

    def test_idempotent(self):
        rng = random.Random(0)
        samples = [
            "per:parent", "org:founded_by", "no_relation", "company",
            "per:cities_of_residence", "living thing", "animal",
        ]
        samples += ["_".join(rng.choices(["per:", "alpha", "beta_gamma", "x"], k=3)) for _ in range(20)]
        for raw in samples:
            once = verbalize_label(raw)
            assert verbalize_label(once) == once
