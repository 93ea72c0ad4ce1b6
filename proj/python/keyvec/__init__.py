"""Document embeddings from salient sentences."""

from ._keyvec import (
    CorruptFile,
    DimMismatch,
    Embedder,
    EmptyDocument,
    EmptyIndex,
    EmptyKeywordSet,
    EmptyTrainingSet,
    Error,
    FormatVersionMismatch,
    IndexOutOfRange,
    InvalidConfig,
    IoError,
    LabelMismatch,
    MissingSummary,
    NotScalar,
    ParseError,
    QueryWithoutRelevants,
    ShapeMismatch,
    TooFewPoints,
    __version__,
    adjusted_rand_index,
    best_match_f1,
    gradient_suite,
    ingest,
    kmeans,
    label,
    pairwise_f1,
    planted,
    retrieval_metrics,
    tokenize,
    train,
    v_measure,
)
