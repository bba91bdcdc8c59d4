"""CSV emission for the standard figure set.

Each emitter reads completed run directories (metrics.jsonl + status.json +
config.resolved.json), so every CSV value traces back to a JSONL record by
(run_id, kind, index). Emission is deterministic: fixed column order, fixed
row ordering, no timestamps; re-emitting from unchanged logs is
byte-identical.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .errors import UsageError

FIGURE_IDS = (
    "fig1_t_vs_n",
    "fig4_mem_before_overfit",
    "fig7_lr",
    "fig8_docid",
    "fig9_pos",
    "fig10_forgetting",
    "fig12_repetition",
    "fig16_diff",
    "fig17_mul",
)


def _check_runs(run_dirs) -> list[Path]:
    dirs = [Path(d) for d in run_dirs]
    missing = []
    for d in dirs:
        status = d / "status.json"
        if not status.exists() or not json.loads(status.read_text()).get("complete"):
            missing.append(d.name)
    if missing:
        raise UsageError(f"runs missing or incomplete: {sorted(missing)}")
    return dirs


def _read(run_dir: Path):
    status = json.loads((run_dir / "status.json").read_text())
    config = json.loads((run_dir / "config.resolved.json").read_text())
    records = [json.loads(l) for l in (run_dir / "metrics.jsonl").read_text().splitlines()]
    return status, config, records


def _epochs(records):
    return [r for r in records if r["kind"] == "epoch"]


def _specials(records):
    return [r for r in records if r["kind"] == "special_epoch"]


def _write(out_path: Path, header: list[str], rows: list[list]):
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return out_path


def emit_figure_data(figure_id: str, run_dirs, out_dir, taus=(0.4, 0.6, 0.8, 0.9)) -> Path:
    """One CSV per figure id; `run_dirs` are the completed runs it draws on."""
    if figure_id not in FIGURE_IDS:
        raise UsageError(f"unknown figure id {figure_id!r}; known: {FIGURE_IDS}")
    dirs = _check_runs(run_dirs)
    out_path = Path(out_dir) / f"{figure_id}.csv"
    sized = []
    for d in dirs:
        status, config, records = _read(d)
        sized.append((status["n_params"], status["run_id"], status, config, records))
    sized.sort(key=lambda x: (x[0], x[1]))

    if figure_id == "fig1_t_vs_n":
        from .metrics import threshold_crossing
        rows = []
        for n, rid, status, config, records in sized:
            ms = [r["M"] for r in _epochs(records)]
            for tau in taus:
                c = threshold_crossing(ms, tau)
                rows.append([config.get("preset"), n, tau,
                             c.index if c.reached else "", int(c.reached), rid])
        return _write(out_path, ["preset", "n_params", "tau", "t_epochs", "reached", "run_id"], rows)

    if figure_id == "fig4_mem_before_overfit":
        from .metrics import detect_overfit_epoch
        rows = []
        for n, rid, status, config, records in sized:
            eps = _epochs(records)
            e = detect_overfit_epoch([r["ppl_val"] for r in eps])
            m_before = eps[e - 2]["M"] if e is not None else ""
            rows.append([config.get("preset"), n, e if e is not None else "", m_before, rid])
        return _write(out_path, ["preset", "n_params", "overfit_epoch", "m_before_overfit", "run_id"], rows)

    if figure_id == "fig7_lr":
        from .metrics import threshold_crossing
        rows = []
        for n, rid, status, config, records in sized:
            ms = [r["M"] for r in _epochs(records)]
            c = threshold_crossing(ms, max(taus))
            rows.append([config.get("preset"), n, config.get("lr"),
                         c.index if c.reached else "", int(c.reached), rid])
        rows.sort(key=lambda r: (r[1], r[2]))
        return _write(out_path, ["preset", "n_params", "lr", "t_epochs", "reached", "run_id"], rows)

    if figure_id == "fig8_docid":
        rows = []
        for n, rid, status, config, records in sized:
            for r in _epochs(records):
                rows.append([config.get("docid_mode"), r["index"], r["M"], rid])
        rows.sort(key=lambda r: (r[0], r[1]))
        return _write(out_path, ["arm", "epoch", "m", "run_id"], rows)

    if figure_id == "fig9_pos":
        rows = []
        for n, rid, status, config, records in sized:
            for r in _epochs(records):
                if not r.get("per_pos"):
                    continue
                for tag in sorted(r["per_pos"]):
                    rr, rmem = r["per_pos"][tag]
                    rows.append([r["index"], tag, rr, rmem, rid])
        return _write(out_path, ["epoch", "tag", "r", "r_mem", "run_id"], rows)

    if figure_id in ("fig10_forgetting", "fig12_repetition"):
        rows = []
        for n, rid, status, config, records in sized:
            sp = _specials(records)
            baseline = min(r["M"] for r in sp) if sp else ""
            arm = f"k{config.get('repetitions')}"
            if config.get("spacing_period"):
                arm = f"spaced-p{config['spacing_period']}"
            for r in sp:
                rows.append([arm, config.get("preset"), n, r["index"], r["M"], baseline, rid])
        return _write(out_path,
                      ["arm", "preset", "n_params", "epoch", "m_special", "baseline", "run_id"],
                      rows)

    if figure_id == "fig16_diff":
        rows = []
        for n, rid, status, config, records in sized:
            sp = _specials(records)
            for prev, cur in zip(sp, sp[1:]):
                rows.append([config.get("preset"), n, cur["index"],
                             cur["M"] - prev["M"], rid])
        return _write(out_path, ["preset", "n_params", "epoch", "diff", "run_id"], rows)

    if figure_id == "fig17_mul":
        rows = []
        for n, rid, status, config, records in sized:
            for r in _epochs(records):
                if r.get("mean_L") is not None:
                    rows.append([config.get("preset"), n, r["index"],
                                 r["mean_L"], r["M"], rid])
        return _write(out_path, ["preset", "n_params", "epoch", "mean_l", "m", "run_id"], rows)

    raise AssertionError("unreachable")
