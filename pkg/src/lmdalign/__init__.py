"""Tools for learning and judging mappings between word-embedding spaces.

The package trains small monolingual CBOW spaces, fits maps between them
(closed-form orthogonal Procrustes or a gradient-trained mapper), and scores
predictions by set inclusion in the target model's k-nearest-neighbourhood
(`lmd_acc@k`) next to plain mean cosine similarity.
"""

from .cbow import CbowConfig, UnigramTable, build_vocab, sample_negative, tokenize, train_cbow
from .embeddings import (
    EmbeddingFormatError,
    EmbeddingSpace,
    OOVError,
    Vocabulary,
    load_word2vec_text,
    normalize_rows,
    save_word2vec_text,
)
from .experiments import (
    BaselineResult,
    ExperimentConfig,
    ExperimentResult,
    emit_csv,
    emit_plot,
    plot_csv,
    read_csv,
    run_experiment,
)
from .lexicon import (
    BilingualLexicon,
    DroppedPair,
    LexiconFormatError,
    PairedMatrices,
    filter_by_vocab,
    load_lexicon,
    split,
    to_matrices,
)
from .mapper import (
    Mapper,
    MapperConfig,
    cosine_loss,
    forward,
    grad_check,
    gradient,
    init_mapper,
    load_mapper,
    save_mapper,
    train_epoch,
)
from .metrics import (
    MetricRecord,
    NeighborIndex,
    NeighborSet,
    knn,
    lmd,
    lmd_accuracy,
    mean_cosine,
    rolling_ols_slope,
    row_cosines,
    truth_ranks,
)
from .procrustes import (
    ProcrustesResult,
    SvdConvergenceError,
    SvdResult,
    apply_map,
    frobenius_error,
    orthogonal_procrustes,
    svd,
)

__all__ = [name for name in dir() if not name.startswith("_")]
