"""Micro scaling sweep: same corpus, two model sizes, T(N, tau) table.

A real sweep uses a 1M+ token corpus and four sizes (see the acceptance
suite); this demo shrinks everything so it finishes in a few minutes.

Run:  python demos/demo_06_scaling_sweep.py
"""

import tempfile
from pathlib import Path

from memlab.datagen import CorpusSpec, write_corpus
from memlab.figures import emit_figure_data
from memlab.harness import RunConfig, run_scaling_sweep

work = Path(tempfile.mkdtemp(prefix="memlab_sweep_"))
spec = CorpusSpec(seed=13, target_tokens=12_000, n_nouns=80, n_propn=50, n_nums=40,
                  n_verbs=24, n_adjs=18, nouns_per_doc=4, propn_per_doc=2,
                  nums_per_doc=2, verbs_per_doc=2, adjs_per_doc=2,
                  verb_locality=0.85, adj_locality=0.85,
                  sentence_pool_size=3, pool_use_prob=0.8)
paths = write_corpus(spec, work)

template = RunConfig(
    corpus_path=str(paths["text"]),
    preset="desk-tiny",          # replaced per size by the sweep
    max_seq_len=64,
    vocab_max_size=512,
    max_epochs=10,
    batch_tokens=512,
    seed=0,
    stop_at_m=0.92,
    log_root=str(work / "runs"),
)
taus = (0.3, 0.5, 0.7)
cells, runs = run_scaling_sweep(["desk-tiny", "desk-mini"], taus, template)

print("preset        N           tau    T (epochs to M >= tau)")
for c in cells:
    t = c.t_epochs if c.reached else f"unreached within {template.max_epochs}"
    print(f"{c.preset:12s}  {c.n_params:<10d}  {c.tau:.2f}   {t}")

out = emit_figure_data("fig1_t_vs_n", [d for _, d in runs.values()], work / "figures",
                       taus=taus)
print(f"\nfigure data written to {out}")
