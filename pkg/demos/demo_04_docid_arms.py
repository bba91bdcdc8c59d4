"""Unique-identifier experiment on a micro corpus: control vs vocab-only vs
prepend. The prepend arm gives every training sequence the 3-token prefix
["document", "ID", <uid>], the vocab-only arm grows the vocabulary by the
same fresh ids without using them, and control is untouched.

Run:  python demos/demo_04_docid_arms.py   (~3 minutes on one core)
"""

import json
import tempfile
from pathlib import Path

from memlab.datagen import CorpusSpec, write_corpus
from memlab.harness import RunConfig, run_docid_experiment

work = Path(tempfile.mkdtemp(prefix="memlab_docid_"))
spec = CorpusSpec(seed=9, target_tokens=10_000, n_nouns=80, n_propn=50, n_nums=40,
                  n_verbs=24, n_adjs=18, nouns_per_doc=4, propn_per_doc=2,
                  nums_per_doc=2, verbs_per_doc=2, adjs_per_doc=2,
                  verb_locality=0.8, adj_locality=0.8,
                  sentence_pool_size=4, pool_use_prob=0.7)
paths = write_corpus(spec, work)

template = RunConfig(
    corpus_path=str(paths["text"]),
    model=dict(n_layers=1, n_heads=2, d_model=32),
    max_seq_len=64,
    vocab_max_size=512,
    max_epochs=6,
    batch_tokens=1024,
    seed=1,
    log_root=str(work / "runs"),
)
arms = run_docid_experiment(template)

print("arm         V-growth   final M(f)   M(f) per epoch")
for mode in ("control", "vocab-only", "prepend"):
    hist, run_dir = arms[mode]
    status = json.loads((run_dir / "status.json").read_text())
    ms = [round(r["M"], 3) for r in hist.epochs]
    print(f"{mode:10s}  N={status['n_params']:<8d} {ms[-1]:.4f}      {ms}")
print("\nThe prepend arm sees each sequence tagged by a unique token, the "
      "mechanism that speeds up memorization; vocab-only controls for the "
      "parameter growth that the bigger dictionary causes.")
