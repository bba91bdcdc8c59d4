"""Build the acceptance-run cache.

Usage:
    python tests/acceptance_runs.py --all
    python tests/acceptance_runs.py --stage sweep     # criteria 6/7 runs
    python tests/acceptance_runs.py --stage cheap     # all other trend runs
    python tests/acceptance_runs.py --seeds 0         # restrict seeds

Completed runs are found by config hash and skipped, so the script is safe
to re-run and to interrupt. Everything lands under the acceptance root
(MEMLAB_ACCEPT_DIR, default <repo>/.acceptance).
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

from acceptance_defs import (  # noqa: E402
    FORGET_INJECTS,
    FORGET_SIZES,
    LR_GRID,
    LR_SWEEP_SIZES,
    METRIC_SIZES,
    SEEDS,
    SWEEP_SIZES,
    SWEEP_TAUS,
    docid_template,
    forget_base_config,
    forget_config,
    lr_sweep_template,
    metric_config,
    sweep_template,
)
from memlab.harness import (  # noqa: E402
    run_docid_experiment,
    run_forgetting,
    run_lr_sweep,
    run_scaling_sweep,
    run_training,
)


def log(msg: str):
    print(f"[{time.strftime('%H:%M:%S')}] {msg}", flush=True)


def stage_sweep(seeds):
    for seed in seeds:
        template = sweep_template(seed)
        log(f"scaling sweep seed={seed}: sizes {SWEEP_SIZES}")
        cells, _ = run_scaling_sweep(list(SWEEP_SIZES), SWEEP_TAUS, template)
        for c in cells:
            log(f"  {c.preset} tau={c.tau}: "
                f"{'T=' + str(c.t_epochs) if c.reached else 'unreached'}")


def stage_cheap(seeds):
    for seed in seeds:
        log(f"metric runs seed={seed}: sizes {METRIC_SIZES}")
        for preset in METRIC_SIZES:
            _, d = run_training(metric_config(preset, seed))
            log(f"  {preset}: {d.name}")

        log(f"docid arms seed={seed}")
        arms = run_docid_experiment(docid_template(seed))
        for mode, (hist, _) in arms.items():
            log(f"  {mode}: final M={hist.epochs[-1]['M']:.3f}")

        log(f"LR sweep seed={seed}: sizes {LR_SWEEP_SIZES}, grid {LR_GRID}")
        rows, _ = run_lr_sweep(list(LR_SWEEP_SIZES), LR_GRID,
                               lr_sweep_template(seed), tau=0.9)
        for r in rows:
            log(f"  {r['preset']} lr={r['lr']:.1e}: "
                f"{'T=' + str(r['t_epochs']) if r['reached'] else 'unreached'}")

        log(f"forgetting family seed={seed}")
        for preset in FORGET_SIZES:
            base_cfg = forget_base_config(preset, seed)
            _, base_dir = run_training(base_cfg)
            ckpt = base_dir / "checkpoints" / f"ep{FORGET_INJECTS[0]}.ckpt"
            curve, _ = run_forgetting(forget_config(preset, seed, FORGET_INJECTS[0]), ckpt)
            log(f"  {preset} k=1 inject@{FORGET_INJECTS[0]}: baseline={curve.baseline:.3f}")
        # repetition / spacing / order arms on desk-mini
        base_dir = run_training(forget_base_config("desk-mini", seed))[1]
        for kw, tag in ((dict(repetitions=2), "k=2"),
                        (dict(repetitions=4), "k=4"),
                        (dict(spacing=3), "spaced p=3"),
                        (dict(spacing=6), "spaced p=6")):
            cfg = forget_config("desk-mini", seed, FORGET_INJECTS[0], **kw)
            ckpt = base_dir / "checkpoints" / f"ep{FORGET_INJECTS[0]}.ckpt"
            curve, _ = run_forgetting(cfg, ckpt)
            log(f"  desk-mini {tag}: baseline={curve.baseline:.3f}")
        for inject in FORGET_INJECTS[1:]:
            cfg = forget_config("desk-mini", seed, inject)
            ckpt = base_dir / "checkpoints" / f"ep{inject}.ckpt"
            curve, _ = run_forgetting(cfg, ckpt)
            log(f"  desk-mini inject@{inject}: baseline={curve.baseline:.3f}")


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--stage", choices=("sweep", "cheap", "all"), default="all")
    ap.add_argument("--seeds", type=int, nargs="+", default=list(SEEDS))
    args = ap.parse_args(argv)
    t0 = time.time()
    if args.stage in ("cheap", "all"):
        stage_cheap(args.seeds)
    if args.stage in ("sweep", "all"):
        stage_sweep(args.seeds)
    log(f"done in {(time.time() - t0) / 60:.1f} min")


if __name__ == "__main__":
    main()
