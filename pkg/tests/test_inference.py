import math

import numpy as np
import pytest
import torch

from semtyping.encoder import EncoderConfig, TextEncoder, cosine_similarity
from semtyping.errors import ValidationError
from semtyping.formatting import Span, SpanRole, TaskKind, TypingInstance
from semtyping.inference import (
    LabelIndex,
    build_label_index,
    embed_instance,
    load_label_index,
    predict_threshold,
    predict_topk,
    rank_labels,
    read_label_embeddings,
    tune_threshold,
    write_label_embeddings,
    write_label_list,
)
from semtyping.training import Trainer, TrainingConfig, TrainingTriple
from semtyping.formatting import FormattedInput


def query_instance(idx=0, gold=()):
    return TypingInstance(
        id=f"q{idx}",
        task=TaskKind.LEXICAL_ENTITY,
        tokens=["the", "thing", "moved", "."],
        spans=[Span(1, 2, SpanRole.ENTITY)],
        gold_labels=set(gold),
    )


class FixedEncoder:
    """Test stub: every encode call pops the next preset query vector."""

    def __init__(self, vectors, checkpoint_id="stub"):
        self.queue = [np.asarray(v, dtype=np.float64) for v in vectors]
        self.checkpoint_id = checkpoint_id
        self.dim = len(self.queue[0])

    def encode_batch(self, texts, mode="eval"):
        assert mode == "eval"
        out = np.stack([self.queue.pop(0) for _ in texts])
        out.setflags(write=False)
        return out


def make_index(rows, labels=None, checkpoint_id="stub"):
    rows = np.asarray(rows, dtype=np.float64)
    labels = labels or [f"label{i}" for i in range(len(rows))]
    return LabelIndex(tuple((l, l) for l in labels), rows, checkpoint_id)


def real_encoder(words=("lion", "wolf", "the", "thing", "moved"), dim=8, seed=0):
    cfg = EncoderConfig(
        dim=dim, max_sequence_length=32, backbone_spec="bag",
        vocab_words=list(words), dropout=0.0,
    )
    return TextEncoder(cfg, seed=seed)


class TestBuildLabelIndex:
    def test_rows_match_individual_encodes_bitwise(self):
        enc = real_encoder()
        index = build_label_index(["lion", "wolf", "no_relation"], enc)
        assert index.embeddings.shape == (3, enc.dim)
        for i, verbalized in enumerate(["lion", "wolf", "no relation"]):
            row = enc.encode_batch([verbalized], mode="eval")[0]
            assert index.embeddings[i].tobytes() == row.tobytes()

    def test_unseen_label_is_rankable(self):
        enc = real_encoder()
        index = build_label_index(["lion", "wolf", "completely unseen thing"], enc)
        ranked = rank_labels(embed_instance(query_instance(), enc), index)
        assert {raw for raw, _ in ranked} == {"lion", "wolf", "completely unseen thing"}

    def test_empty_label_list_rejected(self):
        with pytest.raises(ValidationError):
            build_label_index([], real_encoder())

    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValidationError, match="lion"):
            build_label_index(["lion", "wolf", "lion"], real_encoder())

    def test_index_is_immutable(self):
        enc = real_encoder()
        index = build_label_index(["lion", "wolf"], enc)
        with pytest.raises(ValueError):
            index.embeddings[0, 0] = 9.9

    def test_rebuilding_after_update_changes_checkpoint_id(self):
        enc = real_encoder()
        first = build_label_index(["lion", "wolf"], enc)
        trainer = Trainer(enc, TrainingConfig(learning_rate=0.05), total_steps=1)
        trainer.step(
            [TrainingTriple(FormattedInput("the thing", False), "lion", "wolf")]
        )
        second = build_label_index(["lion", "wolf"], enc)
        assert first.checkpoint_id != second.checkpoint_id
        with pytest.raises(ValidationError, match="rebuild"):
            predict_topk(query_instance(), first, 1, encoder=enc)

    def test_zero_row_rejected(self):
        with pytest.raises(ValidationError, match="zero vector"):
            make_index([[0.0, 0.0], [1.0, 0.0]])


class TestPredictTopk:
    def test_dominant_coordinate(self):
        index = make_index([[1.0, 0.0], [0.0, 1.0]], labels=["one", "two"])
        enc = FixedEncoder([[0.9, 0.1]])
        pred = predict_topk(query_instance(), index, 1, encoder=enc)
        assert pred.selected == ["one"]
        assert [raw for raw, _ in pred.ranked] == ["one", "two"]

    def test_k_equals_label_count_selects_everything(self):
        index = make_index(np.eye(4))
        enc = FixedEncoder([[0.5, 0.1, 0.2, 0.3]])
        pred = predict_topk(query_instance(), index, 4, encoder=enc)
        assert sorted(pred.selected) == sorted(index.raw_labels)

    def test_k_out_of_range_rejected(self):
        index = make_index(np.eye(3))
        for k in (0, 4):
            with pytest.raises(ValidationError):
                predict_topk(query_instance(), index, k, encoder=FixedEncoder([[1, 0, 0]]))

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            rows = rng.normal(size=(20, 8))
            labels = [f"lab{i:02d}" for i in range(20)]
            index = make_index(rows, labels=labels)
            query = rng.normal(size=8)
            # oracle: full sort of per-pair cosines, ties by raw label
            oracle = sorted(
                ((cosine_similarity(row, query), raw) for row, raw in zip(rows, labels)),
                key=lambda pair: (-pair[0], pair[1]),
            )
            for k in (1, 5, 20):
                pred = predict_topk(
                    query_instance(), index, k, encoder=FixedEncoder([query])
                )
                assert pred.selected == [raw for _, raw in oracle[:k]]

    def test_lexicographic_tie_break(self):
        row = np.array([0.6, 0.8])
        index = make_index([row, [1.0, 0.0], row], labels=["zeta", "mid", "alpha"])
        pred = predict_topk(query_instance(), index, 2, encoder=FixedEncoder([row]))
        assert pred.selected == ["alpha", "zeta"]

    def test_ranking_invariant_under_positive_rescaling(self):
        rng = np.random.default_rng(1)
        rows = rng.normal(size=(10, 6))
        query = rng.normal(size=6)
        base = predict_topk(
            query_instance(), make_index(rows), 3, encoder=FixedEncoder([query])
        )
        for alpha in (1e-3, 7.5, 1e4):
            scaled = predict_topk(
                query_instance(),
                make_index(alpha * rows),
                3,
                encoder=FixedEncoder([alpha * query]),
            )
            assert scaled.selected == base.selected

    def test_top1_equals_threshold_rank_head(self):
        rng = np.random.default_rng(2)
        rows = rng.normal(size=(8, 5))
        query = rng.normal(size=5)
        top1 = predict_topk(
            query_instance(), make_index(rows), 1, encoder=FixedEncoder([query])
        )
        thresh = predict_threshold(
            query_instance(), make_index(rows), -2.0, encoder=FixedEncoder([query])
        )
        assert top1.selected[0] == thresh.ranked[0][0]


class TestPredictThreshold:
    def setup_method(self):
        # rows at controlled angles from the query (1, 0)
        self.index = make_index(
            [[0.9, math.sqrt(1 - 0.81)], [0.6, 0.8], [0.2, math.sqrt(1 - 0.04)]],
            labels=["high", "mid", "low"],
        )

    def test_vacuous_threshold_selects_all(self):
        pred = predict_threshold(
            query_instance(), self.index, -1.0, encoder=FixedEncoder([[1.0, 0.0]])
        )
        assert sorted(pred.selected) == ["high", "low", "mid"]

    def test_unattainable_threshold_selects_none(self):
        pred = predict_threshold(
            query_instance(), self.index, 1.0 + 1e-9, encoder=FixedEncoder([[1.0, 0.0]])
        )
        assert pred.selected == []

    def test_midrange_threshold(self):
        pred = predict_threshold(
            query_instance(), self.index, 0.5, encoder=FixedEncoder([[1.0, 0.0]])
        )
        assert pred.selected == ["high", "mid"]

    def test_monotone_nesting(self):
        rng = np.random.default_rng(3)
        rows = rng.normal(size=(12, 6))
        index = make_index(rows)
        for _ in range(20):
            query = rng.normal(size=6)
            taus = sorted(rng.uniform(-1, 1, size=8))
            previous = None
            for tau in taus:
                selected = set(
                    predict_threshold(
                        query_instance(), index, tau, encoder=FixedEncoder([query])
                    ).selected
                )
                if previous is not None:
                    assert selected <= previous
                previous = selected


class TestTuneThreshold:
    def test_separable_dev_reaches_perfect_f1(self):
        index = make_index([[1.0, 0.0], [0.0, 1.0]], labels=["A", "B"])
        queries = [
            [1.0, 0.2],   # gold A: sim_A ~ 0.98, sim_B ~ 0.196
            [0.3, 1.0],   # gold B: sim_A ~ 0.287, sim_B ~ 0.958
            [1.0, 0.15],  # gold A
        ]
        dev = [
            query_instance(0, gold={"A"}),
            query_instance(1, gold={"B"}),
            query_instance(2, gold={"A"}),
        ]
        encoder = FixedEncoder(list(queries) * 3)
        tau = tune_threshold(dev, index, encoder=encoder)
        sims = []
        for q in queries:
            sims.append([cosine_similarity(q, [1, 0]), cosine_similarity(q, [0, 1])])
        positives = [sims[0][0], sims[1][1], sims[2][0]]
        negatives = [sims[0][1], sims[1][0], sims[2][1]]
        assert max(negatives) < tau <= min(positives)
        from semtyping.evaluation import macro_prf

        preds = [
            {lab for lab, s in zip(["A", "B"], row) if s >= tau} for row in sims
        ]
        report = macro_prf([{"A"}, {"B"}, {"A"}], preds)
        assert report.f1 == 1.0

    def test_single_instance_single_candidate_gold_positive(self):
        index = make_index([[1.0, 0.0]], labels=["A"])
        query = [0.7, 0.7]
        score = cosine_similarity(query, [1.0, 0.0])
        tau = tune_threshold(
            [query_instance(0, gold={"A"})], index, encoder=FixedEncoder([query])
        )
        assert tau <= score

    def test_all_negative_dev_returns_infinite_sentinel(self):
        index = make_index([[1.0, 0.0], [0.0, 1.0]], labels=["A", "B"])
        dev = [query_instance(0, gold=()), query_instance(1, gold=())]
        encoder = FixedEncoder([[0.9, 0.4], [0.2, 0.8]])

        def exact_match(gold, pred):
            return sum(g == p for g, p in zip(gold, pred)) / len(gold)

        tau = tune_threshold(dev, index, metric=exact_match, encoder=encoder)
        assert tau == float("inf")

    def test_empty_dev_rejected(self):
        index = make_index([[1.0, 0.0]], labels=["A"])
        with pytest.raises(ValidationError):
            tune_threshold([], index, encoder=FixedEncoder([[1, 0]]))

    def test_ties_prefer_lower_threshold(self):
        # both gaps give the same metric; the lower cut must win
        index = make_index([[1.0, 0.0]], labels=["A"])
        dev = [query_instance(0, gold={"A"}), query_instance(1, gold={"A"})]
        encoder = FixedEncoder([[1.0, 0.1], [1.0, 0.3]])

        def hit_rate(gold, pred):
            return sum(bool(g & p) for g, p in zip(gold, pred)) / len(gold)

        tau = tune_threshold(dev, index, metric=hit_rate, encoder=encoder)
        assert tau == float("-inf")


class TestLabelEmbeddingFile:
    def test_round_trip_is_bit_exact(self, tmp_path):
        enc = real_encoder()
        index = build_label_index(["lion", "wolf", "no_relation"], enc)
        emb_path = str(tmp_path / "labels.bin")
        list_path = str(tmp_path / "labels.txt")
        write_label_embeddings(index, emb_path)
        write_label_list(index, list_path)

        header, matrix = read_label_embeddings(emb_path)
        assert header == {
            "schema_version": 1,
            "dim": enc.dim,
            "count": 3,
            "dtype": "f32-le",
            "checkpoint_id": enc.checkpoint_id,
        }
        expected = index.embeddings.astype("<f4")
        assert matrix.tobytes() == expected.tobytes()

        reloaded = load_label_index(emb_path, list_path)
        assert reloaded.raw_labels == ["lion", "wolf", "no_relation"]
        assert reloaded.checkpoint_id == enc.checkpoint_id
        assert np.asarray(reloaded.embeddings).tobytes() == expected.tobytes()

    def test_header_is_first_line_json(self, tmp_path):
        enc = real_encoder()
        index = build_label_index(["lion"], enc)
        path = str(tmp_path / "labels.bin")
        write_label_embeddings(index, path)
        with open(path, "rb") as handle:
            first = handle.readline()
        import json

        header = json.loads(first)
        assert header["dtype"] == "f32-le"

    def test_truncated_payload_rejected(self, tmp_path):
        enc = real_encoder()
        index = build_label_index(["lion", "wolf"], enc)
        path = str(tmp_path / "labels.bin")
        write_label_embeddings(index, path)
        data = open(path, "rb").read()
        open(path, "wb").write(data[:-4])
        with pytest.raises(ValidationError, match="payload"):
            read_label_embeddings(path)

    def test_label_count_mismatch_rejected(self, tmp_path):
        enc = real_encoder()
        index = build_label_index(["lion", "wolf"], enc)
        emb_path = str(tmp_path / "labels.bin")
        list_path = str(tmp_path / "labels.txt")
        write_label_embeddings(index, emb_path)
        with open(list_path, "w") as handle:
            handle.write("lion\n")
        with pytest.raises(ValidationError):
            load_label_index(emb_path, list_path)
