"""Cross-lingual question-pair matching toolkit.

Mints labeled Spanish training pairs from unlabeled parallel data via a
bag-of-words normalization hash, trains a siamese conv/LSTM/BiLSTM
matcher with a difference/product MLP head, and evaluates predictions
with log loss and classification metrics.

The heavyweight model module (torch) is imported lazily; ``import
xlmatch`` stays cheap for mining and evaluation work.
"""

from .corpus import (
    Corpus,
    Lang,
    MintedPair,
    PairRecord,
    Provenance,
    UnlabeledRecord,
    parse_minted_file,
    parse_pair_file,
    parse_unlabeled_file,
    write_minted_file,
    write_pair_file,
)
from .embeddings import (
    EmbeddingTable,
    EncodedSequence,
    OovStats,
    compute_oov_stats,
    encode_sequence,
    load_embedding_table,
)
from .errors import (
    AlignmentError,
    CalibrationError,
    ConfigError,
    DataFormatError,
    ModelIOError,
    ParseError,
    UsageError,
    ValidationError,
    XlmatchError,
)
from .evalkit import (
    MetricsReport,
    PredictionRecord,
    classification_metrics,
    ensemble_average,
    log_loss,
    read_predictions,
    write_predictions,
)
from .miner import (
    MiningReport,
    NormalizedKey,
    audit_relative_precision,
    build_training_set,
    count_minted,
    mine_stage1,
    mine_stage2,
    normalize_key,
)
from .textprep import (
    RepairTable,
    StopwordList,
    TokenSequence,
    consolidate_stopwords,
    is_negation,
    load_stopwords,
    repair_token,
    tokenize,
)

__version__ = "0.1.0"
