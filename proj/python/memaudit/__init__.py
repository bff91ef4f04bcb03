"""Memorization audit toolkit.

Thin Python layer over the C++ core: corpus splitting, BM25 retrieval,
alignment-based memorization detection, taxonomy classification, rate
aggregation with bootstrap intervals, attention density analysis and the
sparse-coding simulator. See docs/FORMATS.md for the file formats.
"""

from memaudit._core import (  # noqa: F401
    AlignConfig,
    AttentionForward,
    AttentionMap,
    AttentionToyParams,
    AuditConfig,
    AuditOutcome,
    AuditResult,
    Bm25Params,
    ClassifierConfig,
    ClosedFormSolution,
    CommandScorer,
    ConfidenceInterval,
    DensityProfile,
    DirectionalConfig,
    DirectionalOutcome,
    DirectionalRunRecord,
    FormatError,
    FragmentMatch,
    GeneratedOutput,
    IoError,
    LexicalScorer,
    MemorizationCase,
    MemorizationType,
    NotFoundError,
    ParaphraseScorer,
    PrefixSuffixPair,
    ReportFormat,
    ScoredCandidate,
    SentenceSpan,
    ShortInputFallback,
    SimpleTaskSpec,
    SparseInstance,
    SuffixIndex,
    TrainingError,
    TrainingExample,
    TrainOptions,
    TrainResult,
    ValidationError,
    aggregate,
    attention_forward,
    audit_config_echo,
    average_heatmap,
    bootstrap_ci,
    build_case,
    classify_case,
    closed_form_complex,
    closed_form_simple,
    default_paraphrase_score,
    density_score,
    detect,
    expected_support_overlap,
    generate_instance,
    indicator_vector,
    init_params,
    invert_model,
    is_verbatim,
    load_attention,
    load_audit_config,
    load_corpus,
    load_generations,
    make_selection_instance,
    make_task,
    parse_audit_config,
    recover_x,
    render_report,
    resample_x,
    row_entropy,
    run_audit,
    run_directional_experiment,
    save_heatmap_csv,
    segment_sentences,
    simple_task_prediction,
    simple_task_target,
    split_prefix_suffix,
    train_attention_toy,
)

__version__ = "0.1.0"
