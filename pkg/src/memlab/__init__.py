"""memlab: a desk-scale language-model training lab instrumented for
exact-memorization and forgetting dynamics."""

from .errors import (
    CheckpointError,
    ConfigError,
    IngestionError,
    InputError,
    MemlabError,
    NumericError,
    SetupError,
    UndefinedLossError,
    UsageError,
)
from .tensor import (
    GradTape,
    Tensor,
    backward,
    cross_entropy,
    finite_difference_check,
    gelu,
    layer_norm,
    softmax,
)
from .model import (
    DESK_GRID,
    PRESETS,
    ModelState,
    TransformerConfig,
    build_model,
    config_from_preset,
    forward,
    max_lr_for_params,
)
from .optim import AdamState, LrSchedule, adam_step, default_schedule, lr_at
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import (
    PosLexicon,
    PosTag,
    Vocabulary,
    apply_mlm_mask,
    build_vocab,
    ingest_pos_annotations,
    load_corpus,
    pack_sequences,
    prepend_doc_ids,
)
from .metrics import (
    ContextSet,
    MemorizationHistory,
    MemoryUnitStats,
    PosMemorizationRecord,
    ThresholdCrossing,
    detect_overfit_epoch,
    evaluate,
    exact_memorization,
    extract_contexts,
    memory_unit_lengths,
    perplexity,
    pos_ratios,
    rolling_average,
    threshold_crossing,
    update_memorization,
)
from .harness import (
    ForgettingCurve,
    RunConfig,
    forgetting_baseline_vs_scale,
    run_docid_experiment,
    run_forgetting,
    run_lr_sweep,
    run_scaling_sweep,
    run_training,
)
from .figures import emit_figure_data
from .datagen import CorpusSpec, write_corpus

__version__ = "0.1.0"
