"""Command-line interface.

Subcommands: train, sweep-scale, sweep-lr, docid, forget, emit-figures,
verify. Every run accepts --config <file> with canonical-JSON RunConfig
fields; explicit flags override file values. The log root comes from
--log-root, else $MEMLAB_LOG_ROOT, else ./runs.

Exit codes: 0 success, 2 configuration error, 3 numeric abort,
4 threshold unreached in --strict mode.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, MemlabError, NumericError
from .harness import RunConfig, run_docid_experiment, run_forgetting, run_scaling_sweep, \
    run_lr_sweep, run_training
from .figures import FIGURE_IDS, emit_figure_data

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_UNREACHED = 4


def _add_run_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="canonical JSON file of RunConfig fields")
    p.add_argument("--corpus", help="corpus text file (UTF-8, blank-line documents)")
    p.add_argument("--annotations", help="token<TAB>TAG sidecar aligned with the corpus")
    p.add_argument("--preset", help="model preset name (e.g. desk-tiny)")
    p.add_argument("--task", choices=("causal", "masked"))
    p.add_argument("--seed", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--max-updates", type=int)
    p.add_argument("--batch-tokens", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--vocab-max-size", type=int)
    p.add_argument("--max-seq-len", type=int)
    p.add_argument("--eval-cadence", type=int)
    p.add_argument("--checkpoint-cadence", type=int)
    p.add_argument("--stop-at-m", type=float)
    p.add_argument("--log-root")


_FLAG_TO_FIELD = {
    "corpus": "corpus_path",
    "annotations": "annotations_path",
    "preset": "preset",
    "task": "task",
    "seed": "seed",
    "max_epochs": "max_epochs",
    "max_updates": "max_updates",
    "batch_tokens": "batch_tokens",
    "lr": "lr",
    "vocab_max_size": "vocab_max_size",
    "max_seq_len": "max_seq_len",
    "eval_cadence": "eval_cadence",
    "checkpoint_cadence": "checkpoint_cadence",
    "stop_at_m": "stop_at_m",
    "log_root": "log_root",
}


def _config_from_args(args, extra: dict | None = None) -> RunConfig:
    fields: dict = {}
    if args.config:
        fields.update(json.loads(Path(args.config).read_text()))
    for flag, field in _FLAG_TO_FIELD.items():
        v = getattr(args, flag, None)
        if v is not None:
            fields[field] = v
    if extra:
        fields.update(extra)
    fields.pop("run_id", None)
    for key in ("tau_list", "checkpoint_epochs"):
        if key in fields and isinstance(fields[key], list):
            fields[key] = tuple(fields[key])
    return RunConfig(**fields)


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    hist, run_dir = run_training(cfg)
    last = hist.epochs[-1] if hist.epochs else {}
    print(f"run {cfg.run_id} complete: {len(hist.epochs)} epochs, "
          f"final M={last.get('M'):.4f} ppl_val={last.get('ppl_val'):.3f}")
    print(f"logs: {run_dir}")
    return EXIT_OK


def cmd_sweep_scale(args) -> int:
    template = _config_from_args(args)
    taus = tuple(float(t) for t in args.tau)
    cells, runs = run_scaling_sweep(args.sizes, taus, template)
    for c in cells:
        t = c.t_epochs if c.reached else f"unreached at budget {template.max_epochs}"
        print(f"{c.preset:14s} N={c.n_params:<10d} tau={c.tau:.2f} T={t}")
    if args.figures_dir:
        emit_figure_data("fig1_t_vs_n", [runs[p][1] for p in args.sizes],
                         args.figures_dir, taus=taus)
    if args.strict and any(not c.reached for c in cells):
        return EXIT_UNREACHED
    return EXIT_OK


def cmd_sweep_lr(args) -> int:
    template = _config_from_args(args)
    rows, runs = run_lr_sweep(args.sizes, [float(x) for x in args.lr_grid],
                              template, tau=args.tau_target)
    for r in rows:
        t = r["t_epochs"] if r["reached"] else "unreached"
        print(f"{r['preset']:14s} lr={r['lr']:.2e} T({args.tau_target})={t}")
    if args.figures_dir and runs:
        emit_figure_data("fig7_lr", [d for _, d in runs.values()], args.figures_dir)
    if args.strict and any(not r["reached"] for r in rows):
        return EXIT_UNREACHED
    return EXIT_OK


def cmd_docid(args) -> int:
    template = _config_from_args(args)
    arms = run_docid_experiment(template)
    for mode, (hist, run_dir) in arms.items():
        final = hist.epochs[-1]["M"] if hist.epochs else float("nan")
        print(f"{mode:10s} final M={final:.4f}  ({run_dir})")
    if args.figures_dir:
        emit_figure_data("fig8_docid", [d for _, d in arms.values()], args.figures_dir)
    return EXIT_OK


def cmd_forget(args) -> int:
    extra = {
        "experiment": "forget",
        "inject_epoch": args.inject_epoch,
        "repetitions": args.repetitions,
        "spacing_period": args.spacing_period,
    }
    cfg = _config_from_args(args, extra)
    curve, run_dir = run_forgetting(cfg, args.base_checkpoint)
    print(f"forgetting curve over epochs {curve.epochs[0]}..{curve.epochs[-1]}: "
          f"baseline={curve.baseline:.4f}")
    print(f"logs: {run_dir}")
    return EXIT_OK


def cmd_emit_figures(args) -> int:
    out = emit_figure_data(args.figure, args.run_dirs, args.out_dir)
    print(out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_property_checks

    ok = run_property_checks(verbose=True)
    return EXIT_OK if ok else EXIT_NUMERIC


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="memlab",
        description="Train small causal/masked transformer LMs with exact-memorization "
                    "and forgetting instrumentation.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("train", help="one training run with metric logging")
    _add_run_args(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("sweep-scale", help="T(N, tau) over model presets")
    _add_run_args(p)
    p.add_argument("--sizes", nargs="+", required=True)
    p.add_argument("--tau", nargs="+", default=["0.4", "0.6", "0.8", "0.9"])
    p.add_argument("--figures-dir")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(fn=cmd_sweep_scale)

    p = sub.add_parser("sweep-lr", help="T(N, tau) over a learning-rate grid")
    _add_run_args(p)
    p.add_argument("--sizes", nargs="+", required=True)
    p.add_argument("--lr-grid", nargs="+", required=True)
    p.add_argument("--tau-target", type=float, default=0.9)
    p.add_argument("--figures-dir")
    p.add_argument("--strict", action="store_true")
    p.set_defaults(fn=cmd_sweep_lr)

    p = sub.add_parser("docid", help="control / vocab-only / prepend arms")
    _add_run_args(p)
    p.add_argument("--figures-dir")
    p.set_defaults(fn=cmd_docid)

    p = sub.add_parser("forget", help="special-batch injection and forgetting curve")
    _add_run_args(p)
    p.add_argument("--base-checkpoint", required=True)
    p.add_argument("--inject-epoch", type=int, required=True)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--spacing-period", type=int)
    p.set_defaults(fn=cmd_forget)

    p = sub.add_parser("emit-figures", help="write one figure CSV from run logs")
    p.add_argument("--figure", required=True, choices=FIGURE_IDS)
    p.add_argument("--run-dirs", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_emit_figures)

    p = sub.add_parser("verify", help="run the fast property suites")
    p.set_defaults(fn=cmd_verify)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MemlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
