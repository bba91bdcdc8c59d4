"""Quantitative instruments: exact memorization, per-update memorization,
threshold crossings, perplexity, overfit detection, POS-stratified ratios,
and memory-unit lengths.

A context is a (sequence prefix | masked position, ground-truth token) pair.
A context counts as memorized when the model's argmax logit equals the
ground-truth id (ties break toward the lowest index). All reductions are
integer counts in fixed sequence order, so results are invariant to
evaluation batch size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .corpus import PackedSequence, PosTag, apply_mlm_mask, masked_input_ids, Vocabulary
from .errors import InputError, UsageError
from .model import ModelState, forward

CAUSAL = "causal"
MASKED = "masked"


@dataclass
class ContextSet:
    """Evaluation set: one record per scorable position.

    Causal task: every position t >= 1 of every sequence (t >= prefix_len
    when a docid prefix is present), context = prefix up to t-1. Masked
    task: every masked position under one fixed seeded layout, so the
    metric is comparable across a whole training run.
    """

    sequences: list[PackedSequence]
    task: str
    seq_idx: np.ndarray          # int32, context -> sequence
    pos: np.ndarray              # int32, target position within the sequence
    target: np.ndarray           # int32 ground-truth ids
    seq_starts: np.ndarray       # int64, contexts of sequence i occupy [starts[i], starts[i+1])
    tags: np.ndarray | None = None     # int8 PosTag of each target, if annotated
    eval_inputs: list[np.ndarray] | None = None  # masked task: corrupted input ids
    eval_mask_seed: int | None = None

    def __len__(self):
        return len(self.target)


def extract_contexts(
    sequences: list[PackedSequence],
    task: str,
    vocab: Vocabulary | None = None,
    eval_mask_seed: int | None = None,
) -> ContextSet:
    if not sequences:
        raise InputError("extract_contexts: empty dataset")
    seq_idx: list[np.ndarray] = []
    pos: list[np.ndarray] = []
    target: list[np.ndarray] = []
    tags: list[np.ndarray] = []
    starts = [0]
    have_tags = all(s.pos_tags is not None for s in sequences)
    eval_inputs = None

    if task == CAUSAL:
        for i, s in enumerate(sequences):
            p = np.arange(max(1, s.prefix_len), len(s), dtype=np.int32)
            seq_idx.append(np.full(len(p), i, dtype=np.int32))
            pos.append(p)
            target.append(s.ids[p])
            if have_tags:
                tags.append(s.pos_tags[p])
            starts.append(starts[-1] + len(p))
    elif task == MASKED:
        if vocab is None or eval_mask_seed is None:
            raise UsageError("masked contexts need a vocabulary and eval_mask_seed")
        eval_inputs = []
        for i, s in enumerate(sequences):
            layout_seq = apply_mlm_mask(s, vocab, seed=eval_mask_seed)
            p = layout_seq.mask_layout.positions
            eval_inputs.append(masked_input_ids(layout_seq))
            seq_idx.append(np.full(len(p), i, dtype=np.int32))
            pos.append(p.astype(np.int32))
            target.append(layout_seq.mask_layout.original_ids)
            if have_tags:
                tags.append(s.pos_tags[p])
            starts.append(starts[-1] + len(p))
    else:
        raise UsageError(f"unknown task {task!r}")

    ctx = ContextSet(
        sequences=sequences,
        task=task,
        seq_idx=np.concatenate(seq_idx) if seq_idx else np.zeros(0, np.int32),
        pos=np.concatenate(pos) if pos else np.zeros(0, np.int32),
        target=np.concatenate(target) if target else np.zeros(0, np.int32),
        seq_starts=np.asarray(starts, dtype=np.int64),
        tags=np.concatenate(tags) if (have_tags and tags) else None,
        eval_inputs=eval_inputs,
        eval_mask_seed=eval_mask_seed,
    )
    if len(ctx) == 0:
        raise InputError("extract_contexts: no scorable positions")
    return ctx


@dataclass
class EvalResult:
    """Per-context predictions from one frozen-model pass."""

    pred: np.ndarray              # int32 argmax ids
    correct: np.ndarray           # bool
    nll: np.ndarray | None        # float64 NLL of the target, when requested

    @property
    def m(self) -> float:
        return float(self.correct.mean())

    @property
    def ppl(self) -> float:
        if self.nll is None:
            raise UsageError("evaluation ran without NLL; pass want_nll=True")
        return float(np.exp(self.nll.mean()))


def evaluate(model: ModelState, contexts: ContextSet, batch_tokens: int = 8192,
             want_nll: bool = False) -> EvalResult:
    """Teacher-forced scoring of every context; model parameters are frozen.

    One forward pass per micro-batch of whole sequences scores all their
    contexts. Counting is exact and order-fixed, so the memorized count does
    not depend on batch_tokens.
    """
    seqs = contexts.sequences
    n = len(contexts)
    pred = np.empty(n, dtype=np.int32)
    nll = np.empty(n, dtype=np.float64) if want_nll else None

    i = 0
    while i < len(seqs):
        j = i
        tok = 0
        while j < len(seqs) and (j == i or tok + len(seqs[j]) <= batch_tokens):
            tok += len(seqs[j])
            j += 1
        batch = seqs[i:j]
        tmax = max(len(s) for s in batch)
        ids = np.zeros((len(batch), tmax), dtype=np.int32)
        lengths = np.empty(len(batch), dtype=np.int64)
        for r, s in enumerate(batch):
            row = s.ids if contexts.eval_inputs is None else contexts.eval_inputs[i + r]
            ids[r, : len(s)] = row
            lengths[r] = len(s)
        logits = forward(model, ids, lengths=lengths).data

        for r, s in enumerate(batch):
            lo, hi = contexts.seq_starts[i + r], contexts.seq_starts[i + r + 1]
            if lo == hi:
                continue
            p = contexts.pos[lo:hi]
            rows = logits[r, p - 1 if contexts.task == CAUSAL else p]  # (m, V)
            pred[lo:hi] = rows.argmax(axis=1)
            if want_nll:
                mx = rows.max(axis=1)
                lse = mx + np.log(np.exp(rows - mx[:, None]).sum(axis=1))
                nll[lo:hi] = (lse - rows[np.arange(len(p)), contexts.target[lo:hi]]).astype(np.float64)
        i = j

    return EvalResult(pred=pred, correct=pred == contexts.target, nll=nll)


def exact_memorization(model: ModelState, contexts: ContextSet, batch_tokens: int = 8192) -> float:
    """Fraction of contexts whose argmax prediction equals the ground truth."""
    return evaluate(model, contexts, batch_tokens=batch_tokens).m


def perplexity(model: ModelState, contexts: ContextSet, batch_tokens: int = 8192) -> float:
    """exp(mean token-level cross entropy) over the scored positions."""
    return evaluate(model, contexts, batch_tokens=batch_tokens, want_nll=True).ppl


def update_memorization(batch_logits: np.ndarray, batch_targets: np.ndarray,
                        scored_mask: np.ndarray | None = None) -> float:
    """Memorized fraction of one training batch, from its own forward logits."""
    flat = batch_logits.reshape(-1, batch_logits.shape[-1])
    targets = np.asarray(batch_targets).reshape(-1)
    pred = flat.argmax(axis=1)
    hit = pred == targets
    if scored_mask is not None:
        sm = np.asarray(scored_mask).reshape(-1)
        if not sm.any():
            raise InputError("update_memorization: no scored positions")
        hit = hit[sm]
    return float(hit.mean())


@dataclass
class ThresholdCrossing:
    tau: float
    index: int | None       # 1-based epoch (or update number), None if never reached
    reached: bool
    budget: int             # length of the series examined
    kind: str = "epoch"

    def __post_init__(self):
        if not (0.0 < self.tau < 1.0):
            raise UsageError("tau must lie in (0, 1)")


def _m_series(history_or_series, kind: str):
    if isinstance(history_or_series, MemorizationHistory):
        recs = history_or_series.epochs if kind == "epoch" else history_or_series.updates
        return [r["M"] for r in recs]
    return list(history_or_series)


def threshold_crossing(history_or_series, tau: float, kind: str = "epoch") -> ThresholdCrossing:
    """First 1-based index with M >= tau; reached=False if never attained."""
    series = _m_series(history_or_series, kind)
    if not series:
        raise InputError("threshold_crossing: empty history")
    for i, m in enumerate(series, start=1):
        if m >= tau:
            return ThresholdCrossing(tau=tau, index=i, reached=True, budget=len(series), kind=kind)
    return ThresholdCrossing(tau=tau, index=None, reached=False, budget=len(series), kind=kind)


def rolling_average(series, window: int = 5) -> np.ndarray:
    """Trailing mean over min(window, i+1) points (partial windows at the start)."""
    if window < 1:
        raise UsageError("window must be >= 1")
    x = np.asarray(series, dtype=np.float64)
    out = np.empty_like(x)
    c = np.concatenate([[0.0], np.cumsum(x)])
    for i in range(len(x)):
        lo = max(0, i + 1 - window)
        out[i] = (c[i + 1] - c[lo]) / (i + 1 - lo)
    return out


def detect_overfit_epoch(history_or_ppls) -> int | None:
    """Smallest epoch e >= 2 whose validation perplexity strictly rises."""
    if isinstance(history_or_ppls, MemorizationHistory):
        ppls = [r["ppl_val"] for r in history_or_ppls.epochs]
    else:
        ppls = list(history_or_ppls)
    for e in range(1, len(ppls)):
        if ppls[e] > ppls[e - 1]:
            return e + 1
    return None


@dataclass
class PosMemorizationRecord:
    """Per-POS prediction quality at one evaluation point.

    r[p] is the fraction of ground-truth-p contexts whose *predicted* token
    carries tag p; r_mem[p] additionally requires exact match, so
    r_mem[p] <= r[p] whenever exact match implies an identical lexicon tag.
    """

    r: dict[str, float]
    r_mem: dict[str, float]
    counts: dict[str, int]
    epoch: int | None = None


def pos_ratios_from_eval(contexts: ContextSet, result: EvalResult,
                         tag_table: np.ndarray) -> PosMemorizationRecord:
    if contexts.tags is None:
        raise InputError("pos_ratios: contexts carry no POS tags")
    pred_tags = tag_table[result.pred]
    r, r_mem, counts = {}, {}, {}
    for tag in PosTag:
        sel = contexts.tags == tag
        denom = int(sel.sum())
        counts[tag.name] = denom
        if denom == 0:
            continue
        r[tag.name] = float((pred_tags[sel] == tag).sum() / denom)
        r_mem[tag.name] = float(result.correct[sel].sum() / denom)
    return PosMemorizationRecord(r=r, r_mem=r_mem, counts=counts)


def pos_ratios(model: ModelState, contexts: ContextSet,
               tag_table: np.ndarray, batch_tokens: int = 8192) -> PosMemorizationRecord:
    return pos_ratios_from_eval(contexts, evaluate(model, contexts, batch_tokens), tag_table)


@dataclass
class MemoryUnitStats:
    """Run-length statistics of consecutively memorized positions."""

    mean_len_runs: float          # mean over runs (headline)
    mean_len_tokens: float        # token-weighted mean
    histogram: dict[int, int]     # run length -> count
    n_runs: int
    total_memorized: int
    epoch: int | None = None


def _run_lengths(bitmap: np.ndarray) -> np.ndarray:
    b = np.asarray(bitmap, dtype=bool)
    if not b.any():
        return np.zeros(0, dtype=np.int64)
    padded = np.concatenate([[0], b.astype(np.int8), [0]])
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return (ends - starts).astype(np.int64)


def memory_unit_lengths(bitmaps: Sequence[np.ndarray]) -> MemoryUnitStats:
    """Maximal runs of memorized positions; runs never cross sequence bounds."""
    lengths = [_run_lengths(b) for b in bitmaps]
    all_runs = np.concatenate(lengths) if lengths else np.zeros(0, dtype=np.int64)
    hist: dict[int, int] = {}
    for l in all_runs:
        hist[int(l)] = hist.get(int(l), 0) + 1
    total = int(all_runs.sum())
    if len(all_runs) == 0:
        return MemoryUnitStats(0.0, 0.0, {}, 0, 0)
    return MemoryUnitStats(
        mean_len_runs=float(all_runs.mean()),
        mean_len_tokens=float((all_runs.astype(np.float64) ** 2).sum() / total),
        histogram=hist,
        n_runs=int(len(all_runs)),
        total_memorized=total,
    )


def unit_bitmaps(contexts: ContextSet, correct: np.ndarray) -> list[np.ndarray]:
    """Per-sequence correctness bitmaps over the scored positions, in order."""
    out = []
    for i in range(len(contexts.sequences)):
        lo, hi = contexts.seq_starts[i], contexts.seq_starts[i + 1]
        out.append(correct[lo:hi])
    return out


@dataclass
class MemorizationHistory:
    """Per-epoch and per-update metric records of one training run."""

    run_id: str = ""
    n_params: int = 0
    epochs: list[dict] = field(default_factory=list)
    updates: list[dict] = field(default_factory=list)

    def append_epoch(self, rec: dict):
        if self.epochs and rec["index"] <= self.epochs[-1]["index"]:
            raise UsageError("epoch indices must strictly increase")
        if not (0.0 <= rec["M"] <= 1.0):
            raise UsageError("M out of [0, 1]")
        self.epochs.append(rec)

    def append_update(self, rec: dict):
        if self.updates and rec["index"] <= self.updates[-1]["index"]:
            raise UsageError("update indices must strictly increase")
        self.updates.append(rec)

    def m_series(self) -> list[float]:
        return [r["M"] for r in self.epochs]

    def ppl_series(self) -> list[float]:
        return [r["ppl_val"] for r in self.epochs]

    def update_m_series(self) -> list[float]:
        return [r["M"] for r in self.updates]
