"""Run configuration, training loop, checkpointing, and the experiment
families: scaling sweeps, LR sweeps, unique-identifier arms, and
forgetting-curve protocols.

Every run is fully determined by (config, seed, build): data order, MLM
masks, and initialization all derive from seeded generators keyed by
(seed, epoch, sequence), so interrupted runs resumed from a checkpoint
reproduce the uninterrupted metric stream exactly. Completed runs are
identified by the hash of their canonical config and reused from disk.

Log directory layout: <run_id>/{config.resolved.json, metrics.jsonl,
timings.jsonl, status.json, checkpoints/, figures/}. metrics.jsonl is
byte-deterministic; wall times live in the timings sidecar.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import corpus as C
from . import metrics as M
from . import tensor as T
from .checkpoint import canonical_json, load_checkpoint, save_checkpoint
from .errors import ConfigError, NumericError, SetupError
from .model import (
    ModelState,
    TransformerConfig,
    build_model,
    config_from_preset,
    forward,
    max_lr_for_params,
)
from .optim import WARMUP_FRACTION, AdamState, LrSchedule, adam_step, lr_at

LOG_ROOT_ENV = "MEMLAB_LOG_ROOT"

_ALLOCATOR_TUNED = False

_DIGEST_MEMO: dict[tuple, str] = {}


def _file_digest(path) -> str:
    p = Path(path)
    stat = p.stat()
    key = (str(p), stat.st_mtime_ns, stat.st_size)
    if key not in _DIGEST_MEMO:
        _DIGEST_MEMO[key] = hashlib.sha256(p.read_bytes()).hexdigest()[:24]
    return "sha256:" + _DIGEST_MEMO[key]


def _tune_allocator():
    """Keep large numpy temporaries on the heap instead of mmap.

    Training allocates multi-MB scratch arrays every op; glibc's default
    mmap threshold makes each one page-fault from scratch. Raising the
    threshold lets buffers be reused, which is worth >2x on this workload.
    Safe no-op on non-glibc platforms.
    """
    global _ALLOCATOR_TUNED
    if _ALLOCATOR_TUNED:
        return
    _ALLOCATOR_TUNED = True
    try:
        import ctypes

        libc = ctypes.CDLL("libc.so.6", use_errno=True)
        libc.mallopt(-3, 1 << 30)        # M_MMAP_THRESHOLD
        libc.mallopt(-1, 256 << 20)      # M_TRIM_THRESHOLD
    except Exception:
        pass


@dataclass
class RunConfig:
    """One training run. Exactly one stopping criterion must be set."""

    corpus_path: str
    preset: str | None = None
    model: dict | None = None            # explicit TransformerConfig fields
    task: str = "causal"
    tie_embeddings: bool = True
    max_seq_len: int = 512
    pack_len: int | None = None          # packing budget; defaults to max_seq_len

    annotations_path: str | None = None
    vocab_max_size: int = 8192
    vocab_min_freq: int = 1
    val_fraction: float = 0.1
    data_seed: int = 0

    seed: int = 0
    max_epochs: int | None = None
    max_updates: int | None = None
    batch_tokens: int = 16384
    lr: float | None = None              # None: interpolate from the scale table
    warmup_fraction: float = WARMUP_FRACTION
    mask_prob: float = 0.15
    mlm_split_corruption: bool = False
    eval_mask_seed: int = 1234

    eval_cadence: int = 1
    update_log_cadence: int = 1          # log every k-th update record
    checkpoint_cadence: int = 0          # in epochs; 0 = final only
    checkpoint_epochs: tuple = ()        # explicit extra checkpoint epochs
    stop_at_m: float | None = None
    eval_batch_tokens: int = 8192

    experiment: str = "train"
    tau_list: tuple = (0.4, 0.6, 0.8, 0.9)
    docid_mode: str = "control"
    inject_epoch: int | None = None
    repetitions: int = 1
    spacing_period: int | None = None
    interleave_repetitions: bool = False
    reset_schedule_on_inject: bool = False
    allow_paper_scale: bool = False

    log_root: str | None = None

    def __post_init__(self):
        if (self.max_epochs is None) == (self.max_updates is None):
            raise ConfigError("set exactly one of max_epochs / max_updates")
        if (self.preset is None) == (self.model is None):
            raise ConfigError("set exactly one of preset / model")
        if self.preset is not None and self.preset.startswith("paper-") and not self.allow_paper_scale:
            raise ConfigError(
                f"preset {self.preset!r} is paper-scale; pass allow_paper_scale=True to train it"
            )
        if self.docid_mode not in C.DOCID_MODES:
            raise ConfigError(f"docid_mode must be one of {C.DOCID_MODES}")
        if self.experiment == "forget" and self.inject_epoch is None:
            raise ConfigError("forget experiment needs inject_epoch")

    def identity_dict(self) -> dict:
        """Location-independent identity: data files enter by content digest,
        so a cached run stays valid when the tree moves."""
        d = dataclasses.asdict(self)
        d.pop("log_root")
        for key in ("corpus_path", "annotations_path"):
            if d.get(key):
                d[key] = _file_digest(d[key])
        for k, v in list(d.items()):
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @property
    def run_id(self) -> str:
        return hashlib.sha256(canonical_json(self.identity_dict()).encode()).hexdigest()[:16]

    def resolved_log_root(self) -> Path:
        root = self.log_root or os.environ.get(LOG_ROOT_ENV) or "runs"
        return Path(root)

    def run_dir(self) -> Path:
        return self.resolved_log_root() / self.run_id


@dataclass
class DatasetBundle:
    vocab: C.Vocabulary
    train: list[C.PackedSequence]
    val: list[C.PackedSequence]
    train_contexts: M.ContextSet
    val_contexts: M.ContextSet
    tag_table: np.ndarray | None
    mean_packed_len: float

    @property
    def train_tokens(self) -> int:
        return sum(len(s) for s in self.train)

    @property
    def val_tokens(self) -> int:
        return sum(len(s) for s in self.val)


def build_dataset(config: RunConfig) -> DatasetBundle:
    docs = C.load_corpus(config.corpus_path)
    tag_table = None
    if config.annotations_path:
        docs = C.ingest_pos_annotations(docs, config.annotations_path)
    vocab = C.build_vocab(docs, config.vocab_max_size, config.vocab_min_freq)

    pack_len = config.pack_len or config.max_seq_len
    seqs = C.pack_sequences(docs, vocab, max_len=pack_len)

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((config.data_seed, 77))))
    doc_order = rng.permutation(len(docs))
    n_val_docs = max(1, int(round(config.val_fraction * len(docs))))
    val_docs = set(int(i) for i in doc_order[:n_val_docs])
    train = [s for s in seqs if s.doc_id not in val_docs]
    val = [s for s in seqs if s.doc_id in val_docs]
    if not train or not val:
        raise ConfigError("train/val split left one side empty; adjust val_fraction")

    if config.docid_mode != "control":
        train, vocab = C.prepend_doc_ids(train, vocab, config.docid_mode)

    if config.annotations_path:
        lexicon = C.PosLexicon.from_documents(docs)
        tag_table = lexicon.tag_table(vocab)

    mkw = {}
    if config.task == "masked":
        mkw = dict(vocab=vocab, eval_mask_seed=config.eval_mask_seed)
    train_ctx = M.extract_contexts(train, config.task, **mkw)
    val_ctx = M.extract_contexts(val, config.task, **mkw)
    return DatasetBundle(
        vocab=vocab,
        train=train,
        val=val,
        train_contexts=train_ctx,
        val_contexts=val_ctx,
        tag_table=tag_table,
        mean_packed_len=C.mean_packed_length(seqs),
    )


def model_config_for(config: RunConfig, vocab_size: int) -> TransformerConfig:
    if config.preset is not None:
        return config_from_preset(
            config.preset,
            vocab_size=vocab_size,
            task=config.task,
            max_seq_len=config.max_seq_len,
            tie_embeddings=config.tie_embeddings,
        )
    fields = dict(config.model)
    fields.setdefault("max_seq_len", config.max_seq_len)
    fields.setdefault("task", config.task)
    fields.setdefault("tie_embeddings", config.tie_embeddings)
    fields["vocab_size"] = vocab_size
    return TransformerConfig(**fields)


class MetricsLogger:
    """Append-only JSONL metric log plus a wall-time sidecar."""

    def __init__(self, run_dir: Path, run_id: str):
        self.run_dir = Path(run_dir)
        self.run_id = run_id
        self._fh = open(self.run_dir / "metrics.jsonl", "a", encoding="utf-8")
        self._th = open(self.run_dir / "timings.jsonl", "a", encoding="utf-8")

    def log(self, kind: str, index: int, m: float, ppl_val=None, per_pos=None,
            mean_l=None, tokens_processed=0, batch=None):
        rec = {
            "run_id": self.run_id,
            "kind": kind,
            "index": index,
            "M": float(m),
            "ppl_val": None if ppl_val is None else float(ppl_val),
            "per_pos": per_pos,
            "mean_L": None if mean_l is None else float(mean_l),
            "tokens_processed": int(tokens_processed),
        }
        if batch is not None:
            rec["batch"] = batch
        self._fh.write(canonical_json(rec) + "\n")
        self._fh.flush()
        self._th.write(canonical_json(
            {"run_id": self.run_id, "kind": kind, "index": index, "wall_time": time.time()}
        ) + "\n")
        self._th.flush()
        return rec

    def close(self):
        self._fh.close()
        self._th.close()


def load_history(run_dir) -> M.MemorizationHistory:
    run_dir = Path(run_dir)
    status = json.loads((run_dir / "status.json").read_text())
    hist = M.MemorizationHistory(run_id=status["run_id"], n_params=status["n_params"])
    with open(run_dir / "metrics.jsonl", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["kind"] == "epoch":
                hist.append_epoch(rec)
            elif rec["kind"] == "update":
                hist.append_update(rec)
    return hist


def load_special_curve(run_dir) -> "ForgettingCurve":
    run_dir = Path(run_dir)
    status = json.loads((run_dir / "status.json").read_text())
    epochs, ms = [], []
    with open(run_dir / "metrics.jsonl", encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if rec["kind"] == "special_epoch":
                epochs.append(rec["index"])
                ms.append(rec["M"])
    return ForgettingCurve(
        inject_epochs=tuple(status.get("inject_epochs", ())),
        epochs=epochs,
        m_values=ms,
    )


@dataclass
class ForgettingCurve:
    """Special-batch memorization after injection, and its derived stats."""

    inject_epochs: tuple
    epochs: list[int]
    m_values: list[float]

    @property
    def baseline(self) -> float:
        return float(min(self.m_values))

    @property
    def diffs(self) -> list[float]:
        return [b - a for a, b in zip(self.m_values, self.m_values[1:])]


class _Trainer:
    def __init__(self, config: RunConfig, bundle: DatasetBundle, logger: MetricsLogger,
                 model: ModelState | None = None, opt: AdamState | None = None,
                 epoch: int = 0, update: int = 0, tokens: int = 0,
                 extra_schedule_tokens: int = 0):
        self.config = config
        self.bundle = bundle
        self.logger = logger
        mcfg = model_config_for(config, bundle.vocab.size)
        self.model = model if model is not None else build_model(mcfg, config.seed)
        self.opt = opt if opt is not None else AdamState.for_params(self.model.params)
        self.epoch = epoch
        self.update = update
        self.tokens = tokens

        if config.max_epochs is not None:
            budget = config.max_epochs * bundle.train_tokens
        else:
            budget = config.max_updates * config.batch_tokens
        budget += extra_schedule_tokens
        max_lr = config.lr if config.lr is not None else max_lr_for_params(mcfg.param_count)
        self.schedule = LrSchedule(
            max_lr=max_lr,
            warmup_tokens=config.warmup_fraction * budget,
            total_tokens=budget,
        )

    # -- batching ---------------------------------------------------------

    def _epoch_batches(self, seqs: list[C.PackedSequence], order: np.ndarray):
        batches, cur, tok = [], [], 0
        for idx in order:
            s = seqs[int(idx)]
            if cur and tok + len(s) > self.config.batch_tokens:
                batches.append(cur)
                cur, tok = [], 0
            cur.append(s)
            tok += len(s)
        if cur:
            batches.append(cur)
        return batches

    def _step(self, batch: list[C.PackedSequence], epoch: int, batch_tag: str):
        cfg = self.config
        b = len(batch)
        tmax = max(len(s) for s in batch)
        ids = np.zeros((b, tmax), dtype=np.int32)
        lengths = np.empty(b, dtype=np.int64)
        for r, s in enumerate(batch):
            ids[r, : len(s)] = s.ids
            lengths[r] = len(s)

        if cfg.task == "causal":
            inputs = ids
            targets = np.zeros(b * tmax, dtype=np.int32)
            scored = np.zeros((b, tmax), dtype=bool)
            for r, s in enumerate(batch):
                lo = max(0, s.prefix_len - 1)
                scored[r, lo: len(s) - 1] = True
            tg = np.zeros((b, tmax), dtype=np.int32)
            tg[:, :-1] = ids[:, 1:]
            targets = tg.reshape(-1)
            scored = scored.reshape(-1)
        else:
            inputs = ids.copy()
            scored = np.zeros((b, tmax), dtype=bool)
            tg = np.zeros((b, tmax), dtype=np.int32)
            for r, s in enumerate(batch):
                masked = C.apply_mlm_mask(
                    s, self.bundle.vocab, p=cfg.mask_prob,
                    seed=(cfg.seed, epoch), split_corruption=cfg.mlm_split_corruption,
                )
                layout = masked.mask_layout
                inputs[r, layout.positions] = layout.corrupt_ids
                scored[r, layout.positions] = True
                tg[r, layout.positions] = layout.original_ids
            targets = tg.reshape(-1)
            scored = scored.reshape(-1)
            if not scored.any():
                return  # a tiny batch may draw no masked positions; skip it

        with T.GradTape() as tape:
            logits = forward(self.model, inputs, lengths=lengths)
            flat = T.reshape(logits, (b * tmax, self.bundle.vocab.size))
            loss = T.cross_entropy(flat, targets, ignore_mask=~scored)
        m_update = M.update_memorization(flat.data, targets, scored)
        T.backward(loss, tape)
        self.tokens += int(lengths.sum())
        adam_step(self.model.params, self.opt, lr_at(self.schedule, self.tokens))
        self.update += 1
        if self.update % self.config.update_log_cadence == 0:
            self.logger.log("update", self.update, m_update,
                            tokens_processed=self.tokens, batch=batch_tag)

    def run_epoch(self, epoch: int, seqs: list[C.PackedSequence] | None = None,
                  tag: str = "e") -> bool:
        """One seeded-shuffle pass; returns False once the update budget is hit."""
        cfg = self.config
        seqs = seqs if seqs is not None else self.bundle.train
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, epoch))))
        order = rng.permutation(len(seqs))
        for bi, batch in enumerate(self._epoch_batches(seqs, order)):
            if cfg.max_updates is not None and self.update >= cfg.max_updates:
                return False
            self._step(batch, epoch, f"{tag}{epoch}b{bi}")
        return cfg.max_updates is None or self.update < cfg.max_updates

    def inject_pass(self, seqs: list[C.PackedSequence], rep: int, epoch: int):
        """One pass over the special batch at the current schedule LR."""
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((self.config.seed, 0x1337, epoch, rep)))
        )
        order = rng.permutation(len(seqs))
        for bi, batch in enumerate(self._epoch_batches(seqs, order)):
            self._step(batch, epoch, f"inject{epoch}r{rep}b{bi}")

    # -- evaluation -------------------------------------------------------

    def eval_epoch(self, epoch: int) -> dict:
        cfg, bundle = self.config, self.bundle
        res = M.evaluate(self.model, bundle.train_contexts, cfg.eval_batch_tokens)
        ppl_val = M.evaluate(self.model, bundle.val_contexts, cfg.eval_batch_tokens,
                             want_nll=True).ppl
        per_pos = None
        if bundle.tag_table is not None:
            record = M.pos_ratios_from_eval(bundle.train_contexts, res, bundle.tag_table)
            per_pos = {
                tag: [record.r.get(tag), record.r_mem.get(tag)]
                for tag in record.counts
                if record.counts[tag] > 0
            }
        mean_l = None
        if cfg.task == "causal":
            stats = M.memory_unit_lengths(M.unit_bitmaps(bundle.train_contexts, res.correct))
            mean_l = stats.mean_len_runs
        return self.logger.log("epoch", epoch, res.m, ppl_val=ppl_val,
                               per_pos=per_pos, mean_l=mean_l,
                               tokens_processed=self.tokens)

    def eval_special(self, epoch: int, special_ctx: M.ContextSet):
        res = M.evaluate(self.model, special_ctx, self.config.eval_batch_tokens)
        return self.logger.log("special_epoch", epoch, res.m, tokens_processed=self.tokens)

    def save(self, path, epoch: int):
        save_checkpoint(path, self.model, self.opt, epoch=epoch,
                        update=self.update, tokens_processed=self.tokens)


def _prepare_run_dir(config: RunConfig) -> Path:
    run_dir = config.run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "checkpoints").mkdir(exist_ok=True)
    (run_dir / "figures").mkdir(exist_ok=True)
    resolved = config.identity_dict()
    resolved["run_id"] = config.run_id
    (run_dir / "config.resolved.json").write_text(canonical_json(resolved), encoding="utf-8")
    return run_dir


def _is_complete(run_dir: Path) -> bool:
    status = run_dir / "status.json"
    if not status.exists():
        return False
    try:
        return bool(json.loads(status.read_text()).get("complete"))
    except json.JSONDecodeError:
        return False


def _write_status(run_dir: Path, payload: dict):
    (run_dir / "status.json").write_text(canonical_json(payload), encoding="utf-8")


def _checkpoint_epochs(config: RunConfig, last_epoch: int) -> set[int]:
    eps = set(int(e) for e in config.checkpoint_epochs)
    if config.checkpoint_cadence:
        eps.update(range(config.checkpoint_cadence, last_epoch + 1, config.checkpoint_cadence))
    eps.add(last_epoch)
    return eps


def run_training(config: RunConfig, reuse: bool = True,
                 resume_from=None) -> tuple[M.MemorizationHistory, Path]:
    """Epoch loop with per-epoch M(f) + validation perplexity and per-update
    memorization logging. Completed runs found on disk are reused.

    ``resume_from`` continues from a checkpoint path; the continuation's
    metric stream is identical to the uninterrupted run's.
    """
    _tune_allocator()
    run_dir = config.run_dir()
    if reuse and resume_from is None and _is_complete(run_dir):
        return load_history(run_dir), run_dir

    for f in ("metrics.jsonl", "timings.jsonl", "status.json"):
        p = run_dir / f
        if p.exists():
            p.unlink()
    run_dir = _prepare_run_dir(config)
    bundle = build_dataset(config)
    C.write_manifest(bundle.train, bundle.vocab, run_dir / "dataset.manifest.json",
                     mask_seed=config.eval_mask_seed)
    logger = MetricsLogger(run_dir, config.run_id)

    if resume_from is not None:
        snap = load_checkpoint(resume_from)
        trainer = _Trainer(config, bundle, logger, model=snap["model"],
                           opt=snap["optimizer"], epoch=snap["epoch"],
                           update=snap["update"], tokens=snap["tokens_processed"])
    else:
        trainer = _Trainer(config, bundle, logger)

    max_epochs = config.max_epochs
    if max_epochs is None:
        per_epoch = max(1, int(np.ceil(bundle.train_tokens / config.batch_tokens)))
        max_epochs = int(np.ceil(config.max_updates / per_epoch)) + 1

    ckpt_eps = _checkpoint_epochs(config, max_epochs)
    stopped_early = False
    error = None
    try:
        for epoch in range(trainer.epoch + 1, max_epochs + 1):
            budget_left = trainer.run_epoch(epoch)
            trainer.epoch = epoch
            rec = None
            if epoch % config.eval_cadence == 0 or not budget_left or epoch == max_epochs:
                rec = trainer.eval_epoch(epoch)
            if epoch in ckpt_eps:
                trainer.save(run_dir / "checkpoints" / f"ep{epoch}.ckpt", epoch)
            if rec and config.stop_at_m is not None and rec["M"] >= config.stop_at_m:
                stopped_early = True
            if stopped_early or not budget_left:
                if epoch not in ckpt_eps:
                    trainer.save(run_dir / "checkpoints" / f"ep{epoch}.ckpt", epoch)
                break
    except Exception as exc:  # noqa: BLE001 - recorded, then re-raised
        error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        logger.close()
        _write_status(run_dir, {
            "run_id": config.run_id,
            "complete": error is None,
            "error": error,
            "final_epoch": trainer.epoch,
            "final_update": trainer.update,
            "tokens_processed": trainer.tokens,
            "n_params": model_config_for(config, bundle.vocab.size).param_count,
            "stopped_early": stopped_early,
            "mean_packed_len": bundle.mean_packed_len,
        })

    return load_history(run_dir), run_dir


def run_forgetting(config: RunConfig, base_checkpoint,
                   reuse: bool = True) -> tuple[ForgettingCurve, Path]:
    """Resume from a checkpoint, inject the validation set as the special
    batch (k consecutive passes, or spaced re-injection), then continue
    normal training while tracking special-batch memorization each epoch.
    """
    if config.experiment != "forget":
        raise ConfigError("config.experiment must be 'forget'")
    _tune_allocator()
    run_dir = config.run_dir()
    if reuse and _is_complete(run_dir):
        return load_special_curve(run_dir), run_dir

    for f in ("metrics.jsonl", "timings.jsonl", "status.json"):
        p = run_dir / f
        if p.exists():
            p.unlink()
    run_dir = _prepare_run_dir(config)
    bundle = build_dataset(config)
    C.write_manifest(bundle.train, bundle.vocab, run_dir / "dataset.manifest.json",
                     mask_seed=config.eval_mask_seed)

    train_hashes = {s.content_hash() for s in bundle.train}
    for s in bundle.val:
        if s.content_hash() in train_hashes:
            raise SetupError("special batch overlaps the training data")

    snap = load_checkpoint(base_checkpoint)
    if snap["epoch"] != config.inject_epoch:
        raise SetupError(
            f"checkpoint is at epoch {snap['epoch']}, expected inject_epoch {config.inject_epoch}"
        )

    special = bundle.val
    special_ctx = bundle.val_contexts
    n_spaced = 0
    if config.spacing_period:
        n_spaced = max(0, (config.max_epochs - config.inject_epoch - 1) // config.spacing_period)
    extra = bundle.val_tokens * (config.repetitions + n_spaced)
    if config.reset_schedule_on_inject:
        extra = 0

    logger = MetricsLogger(run_dir, config.run_id)
    trainer = _Trainer(config, bundle, logger, model=snap["model"], opt=snap["optimizer"],
                       epoch=snap["epoch"], update=snap["update"],
                       tokens=snap["tokens_processed"], extra_schedule_tokens=extra)
    if config.reset_schedule_on_inject:
        trainer.tokens = 0

    inject_epochs = [config.inject_epoch]
    error = None
    try:
        inject = config.inject_epoch
        for rep in range(config.repetitions):
            trainer.inject_pass(special, rep, inject)
        trainer.eval_special(inject, special_ctx)

        for epoch in range(inject + 1, config.max_epochs + 1):
            if config.spacing_period and (epoch - inject) % config.spacing_period == 0 and epoch < config.max_epochs:
                trainer.inject_pass(special, 0, epoch)
                inject_epochs.append(epoch)
            trainer.run_epoch(epoch)
            trainer.epoch = epoch
            trainer.eval_special(epoch, special_ctx)
            if epoch % config.eval_cadence == 0 or epoch == config.max_epochs:
                trainer.eval_epoch(epoch)
        trainer.save(run_dir / "checkpoints" / f"ep{config.max_epochs}.ckpt", config.max_epochs)
    except Exception as exc:  # noqa: BLE001
        error = f"{type(exc).__name__}: {exc}"
        raise
    finally:
        logger.close()
        _write_status(run_dir, {
            "run_id": config.run_id,
            "complete": error is None,
            "error": error,
            "final_epoch": trainer.epoch,
            "final_update": trainer.update,
            "tokens_processed": trainer.tokens,
            "n_params": model_config_for(config, bundle.vocab.size).param_count,
            "stopped_early": False,
            "inject_epochs": inject_epochs,
            "mean_packed_len": bundle.mean_packed_len,
        })

    return load_special_curve(run_dir), run_dir


# ---------------------------------------------------------------------------
# experiment families
# ---------------------------------------------------------------------------

@dataclass
class SweepCell:
    preset: str
    n_params: int
    tau: float
    t_epochs: int | None
    reached: bool
    run_id: str


def run_scaling_sweep(sizes: list[str], taus, template: RunConfig,
                      lrs: dict[str, float] | None = None) -> tuple[list[SweepCell], dict]:
    """T(N, tau) for each (size, tau); unreached cells are recorded, not errors."""
    cells: list[SweepCell] = []
    runs: dict[str, tuple[M.MemorizationHistory, Path]] = {}
    for preset in sizes:
        cfg = replace(template, preset=preset, model=None, experiment="train",
                      stop_at_m=max(taus),
                      lr=(lrs or {}).get(preset, template.lr))
        hist, run_dir = run_training(cfg)
        runs[preset] = (hist, run_dir)
        status = json.loads((run_dir / "status.json").read_text())
        for tau in taus:
            cross = M.threshold_crossing(hist, tau)
            cells.append(SweepCell(
                preset=preset, n_params=status["n_params"], tau=tau,
                t_epochs=cross.index, reached=cross.reached, run_id=cfg.run_id,
            ))
    return cells, runs


def run_lr_sweep(sizes: list[str], lr_grid, template: RunConfig,
                 tau: float = 0.9) -> tuple[list[dict], dict]:
    """T(N, tau) per (size, LR); divergent or stalled runs record unreached."""
    rows: list[dict] = []
    runs: dict[tuple, tuple] = {}
    for preset in sizes:
        for lr in lr_grid:
            cfg = replace(template, preset=preset, model=None, lr=float(lr),
                          experiment="train", stop_at_m=tau)
            try:
                hist, run_dir = run_training(cfg)
                cross = M.threshold_crossing(hist, tau)
                status = json.loads((run_dir / "status.json").read_text())
                rows.append({
                    "preset": preset, "n_params": status["n_params"], "lr": float(lr),
                    "tau": tau, "t_epochs": cross.index, "reached": cross.reached,
                    "run_id": cfg.run_id,
                })
                runs[(preset, float(lr))] = (hist, run_dir)
            except NumericError:
                rows.append({
                    "preset": preset, "n_params": None, "lr": float(lr), "tau": tau,
                    "t_epochs": None, "reached": False, "run_id": cfg.run_id,
                    "diverged": True,
                })
    return rows, runs


def run_docid_experiment(template: RunConfig) -> dict[str, tuple[M.MemorizationHistory, Path]]:
    """Three aligned arms from one corpus and seed: control / vocab-only / prepend."""
    pack_len = (template.pack_len or template.max_seq_len)
    arms = {}
    for mode in C.DOCID_MODES:
        cfg = replace(template, docid_mode=mode, experiment="train",
                      pack_len=min(pack_len, template.max_seq_len - 3))
        arms[mode] = run_training(cfg)
    return arms


def forgetting_baseline_vs_scale(sizes: list[str], template: RunConfig,
                                 base_template: RunConfig) -> list[dict]:
    """Per-size forgetting baseline with a matched injection-epoch fraction."""
    out = []
    for preset in sizes:
        base_cfg = replace(base_template, preset=preset, model=None)
        _, base_dir = run_training(base_cfg)
        ckpt = base_dir / "checkpoints" / f"ep{template.inject_epoch}.ckpt"
        cfg = replace(template, preset=preset, model=None)
        curve, run_dir = run_forgetting(cfg, ckpt)
        status = json.loads((run_dir / "status.json").read_text())
        out.append({
            "preset": preset,
            "n_params": status["n_params"],
            "baseline": curve.baseline,
            "run_id": cfg.run_id,
            "curve": curve,
        })
    return out
