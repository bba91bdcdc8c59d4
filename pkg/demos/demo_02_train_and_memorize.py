"""Train a micro language model and watch exact memorization M(f) rise.

Generates a small synthetic corpus, trains a 1-layer causal model for a few
epochs, and prints the per-epoch metric records: M(f) on the training set,
validation perplexity, and the mean memory-unit length L.

Run:  python demos/demo_02_train_and_memorize.py   (~2 minutes on one core)
"""

import tempfile
from pathlib import Path

from memlab.datagen import CorpusSpec, write_corpus
from memlab.harness import RunConfig, run_training

work = Path(tempfile.mkdtemp(prefix="memlab_demo_"))
spec = CorpusSpec(seed=5, target_tokens=8_000, n_nouns=60, n_propn=40, n_nums=30,
                  n_verbs=20, n_adjs=15, nouns_per_doc=4, propn_per_doc=2,
                  nums_per_doc=2, verbs_per_doc=2, adjs_per_doc=2,
                  verb_locality=0.8, adj_locality=0.8,
                  sentence_pool_size=4, pool_use_prob=0.7)
paths = write_corpus(spec, work)
print(f"corpus: {paths['text']}")

config = RunConfig(
    corpus_path=str(paths["text"]),
    annotations_path=str(paths["annotations"]),
    model=dict(n_layers=1, n_heads=2, d_model=32),
    max_seq_len=64,
    vocab_max_size=512,
    max_epochs=8,
    batch_tokens=1024,
    seed=0,
    log_root=str(work / "runs"),
)
history, run_dir = run_training(config)

print(f"\nrun id {config.run_id}; logs in {run_dir}\n")
print("epoch   M(f)    val ppl   mean L")
for rec in history.epochs:
    print(f"{rec['index']:>5}  {rec['M']:.4f}  {rec['ppl_val']:8.2f}  {rec['mean_L']:.2f}")

print("\nper-update memorization of the last few training batches:")
for rec in history.updates[-5:]:
    print(f"  update {rec['index']:>3}  M_update={rec['M']:.4f}  ({rec['batch']})")
