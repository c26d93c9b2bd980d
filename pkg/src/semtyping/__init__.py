"""Semantic typing by ranking label embeddings in a shared input/label space.

Context sentences (with marker tokens and a natural-language task suffix) and
candidate labels are encoded by one shared model; training pulls gold labels
toward their inputs with a cosine margin-ranking loss, and prediction ranks
candidates by similarity, either top-k or above a tuned threshold.
"""

from .errors import ValidationError
from .formatting import (
    MARKER_TOKENS,
    FormattedInput,
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
from .encoder import (
    EncoderConfig,
    TextEncoder,
    Vocabulary,
    BagBackbone,
    TransformerBackbone,
    cosine_similarity,
)
from .training import (
    Trainer,
    TrainingConfig,
    TrainingTriple,
    TrainResult,
    batch_margin_loss,
    make_epoch_triples,
    margin_loss,
    mix_datasets,
    sample_negative,
    train_loop,
)
from .inference import (
    LabelIndex,
    Prediction,
    RestrictedTop1,
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
from .evaluation import (
    Episode,
    MetricsReport,
    bucket_labels_by_train_count,
    bucket_restricted_f1,
    macro_prf,
    micro_prf,
    nway_zeroshot_accuracy,
    sample_episode,
)
from .pipeline import DatasetSpec, RunConfig, load_dataset, run_command

__version__ = "0.1.0"
