"""Forgetting-curve protocol on a micro run: train, checkpoint, inject the
validation set as the special batch, continue training, and read off the
forgetting baseline (the curve minimum) and the diff series.

Run:  python demos/demo_05_forgetting_curve.py   (~3 minutes on one core)
"""

import tempfile
from pathlib import Path

from memlab.datagen import CorpusSpec, write_corpus
from memlab.harness import RunConfig, run_forgetting, run_training

work = Path(tempfile.mkdtemp(prefix="memlab_forget_"))
spec = CorpusSpec(seed=4, target_tokens=10_000, n_nouns=80, n_propn=50, n_nums=40,
                  n_verbs=24, n_adjs=18, nouns_per_doc=4, propn_per_doc=2,
                  nums_per_doc=2, verbs_per_doc=2, adjs_per_doc=2,
                  verb_locality=0.8, adj_locality=0.8,
                  sentence_pool_size=4, pool_use_prob=0.7)
paths = write_corpus(spec, work)

common = dict(
    corpus_path=str(paths["text"]),
    model=dict(n_layers=1, n_heads=2, d_model=32),
    max_seq_len=64,
    vocab_max_size=512,
    max_epochs=10,
    batch_tokens=1024,
    seed=2,
)

base = RunConfig(**common, checkpoint_epochs=(2,), log_root=str(work / "base"))
_, base_dir = run_training(base)
print(f"base run complete; checkpoint at epoch 2: {base_dir}")

forget = RunConfig(**common, experiment="forget", inject_epoch=2,
                   log_root=str(work / "forget"))
curve, run_dir = run_forgetting(forget, base_dir / "checkpoints" / "ep2.ckpt")

print("\nepoch  special-batch M(f)")
for e, m in zip(curve.epochs, curve.m_values):
    marker = "  <- injection" if e == curve.inject_epochs[0] else ""
    print(f"{e:>5}  {m:.4f}{marker}")
print(f"\nforgetting baseline (curve minimum): {curve.baseline:.4f}")
print("diff series:", [round(d, 4) for d in curve.diffs])
print("sum of diffs == last - first:",
      round(sum(curve.diffs), 6) == round(curve.m_values[-1] - curve.m_values[0], 6))
