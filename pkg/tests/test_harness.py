import json
from pathlib import Path

import numpy as np
import pytest

from memlab.datagen import CorpusSpec, write_corpus
from memlab.errors import ConfigError, SetupError
from memlab.harness import (
    RunConfig,
    build_dataset,
    forgetting_baseline_vs_scale,
    load_history,
    load_special_curve,
    run_docid_experiment,
    run_forgetting,
    run_scaling_sweep,
    run_training,
    ForgettingCurve,
)
from memlab.metrics import threshold_crossing

MICRO_MODEL = dict(n_layers=1, n_heads=2, d_model=32)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    spec = CorpusSpec(seed=5, target_tokens=6000, n_nouns=60, n_propn=40, n_nums=30,
                      n_verbs=20, n_adjs=15, nouns_per_doc=4, propn_per_doc=2,
                      nums_per_doc=2, verbs_per_doc=2, adjs_per_doc=2,
                      verb_locality=0.8, adj_locality=0.8,
                      sentence_pool_size=4, pool_use_prob=0.6)
    return write_corpus(spec, root, stem="micro")


def micro_config(corpus, tmp_path, **kw):
    base = dict(
        corpus_path=str(corpus["text"]),
        annotations_path=str(corpus["annotations"]),
        model=dict(MICRO_MODEL),
        max_seq_len=64,
        vocab_max_size=512,
        max_epochs=2,
        batch_tokens=1024,
        seed=3,
        log_root=str(tmp_path / "runs"),
    )
    base.update(kw)
    return RunConfig(**base)


class TestRunConfig:
    def test_exactly_one_stopping_criterion(self, corpus, tmp_path):
        with pytest.raises(ConfigError):
            micro_config(corpus, tmp_path, max_epochs=None, max_updates=None)
        with pytest.raises(ConfigError):
            micro_config(corpus, tmp_path, max_epochs=2, max_updates=10)

    def test_run_id_stable_and_ignores_log_root(self, corpus, tmp_path):
        a = micro_config(corpus, tmp_path)
        b = micro_config(corpus, tmp_path, log_root=str(tmp_path / "elsewhere"))
        assert a.run_id == b.run_id
        c = micro_config(corpus, tmp_path, seed=4)
        assert a.run_id != c.run_id

    def test_paper_preset_refused_without_override(self, corpus, tmp_path):
        with pytest.raises(ConfigError):
            micro_config(corpus, tmp_path, model=None, preset="paper-125M")
        cfg = micro_config(corpus, tmp_path, model=None, preset="paper-125M",
                           allow_paper_scale=True)
        assert cfg.preset == "paper-125M"


class TestRunTraining:
    def test_logs_and_layout(self, corpus, tmp_path):
        cfg = micro_config(corpus, tmp_path)
        hist, run_dir = run_training(cfg)
        assert (run_dir / "config.resolved.json").exists()
        assert (run_dir / "metrics.jsonl").exists()
        assert (run_dir / "timings.jsonl").exists()
        assert (run_dir / "checkpoints").is_dir()
        assert (run_dir / "figures").is_dir()
        manifest = json.loads((run_dir / "dataset.manifest.json").read_text())
        assert manifest["vocab_hash"] and manifest["sequences"]
        assert all("hash" in s and "doc_id" in s for s in manifest["sequences"])
        assert len(hist.epochs) == 2
        assert [r["index"] for r in hist.epochs] == [1, 2]
        assert all(0 <= r["M"] <= 1 for r in hist.epochs)
        assert all(r["ppl_val"] > 0 for r in hist.epochs)
        assert hist.epochs[0]["per_pos"] is not None
        assert len(hist.updates) > 0

    def test_metrics_jsonl_has_schema_fields_no_wall_time(self, corpus, tmp_path):
        cfg = micro_config(corpus, tmp_path)
        _, run_dir = run_training(cfg)
        for line in (run_dir / "metrics.jsonl").read_text().splitlines():
            rec = json.loads(line)
            for key in ("run_id", "kind", "index", "M", "ppl_val", "per_pos",
                        "mean_L", "tokens_processed"):
                assert key in rec
            assert "wall_time" not in rec
        timing = json.loads((run_dir / "timings.jsonl").read_text().splitlines()[0])
        assert "wall_time" in timing

    def test_byte_identical_rerun(self, corpus, tmp_path):
        cfg1 = micro_config(corpus, tmp_path, log_root=str(tmp_path / "r1"))
        cfg2 = micro_config(corpus, tmp_path, log_root=str(tmp_path / "r2"))
        _, d1 = run_training(cfg1)
        _, d2 = run_training(cfg2)
        assert (d1 / "metrics.jsonl").read_bytes() == (d2 / "metrics.jsonl").read_bytes()

    def test_resume_matches_uninterrupted(self, corpus, tmp_path):
        full_cfg = micro_config(corpus, tmp_path, max_epochs=4,
                                checkpoint_epochs=(2,), log_root=str(tmp_path / "full"))
        _, full_dir = run_training(full_cfg)
        resumed_cfg = micro_config(corpus, tmp_path, max_epochs=4,
                                   checkpoint_epochs=(2,),
                                   log_root=str(tmp_path / "resumed"))
        _, res_dir = run_training(resumed_cfg,
                                  resume_from=full_dir / "checkpoints" / "ep2.ckpt")
        full_lines = (full_dir / "metrics.jsonl").read_text().splitlines()
        res_lines = (res_dir / "metrics.jsonl").read_text().splitlines()
        tail_full = [l for l in full_lines if json.loads(l)["tokens_processed"] >
                     json.loads(res_lines[0])["tokens_processed"] - 1]
        # every continuation record matches the uninterrupted run byte for byte
        assert res_lines == tail_full

    def test_reuse_from_disk(self, corpus, tmp_path):
        cfg = micro_config(corpus, tmp_path)
        _, d1 = run_training(cfg)
        stamp = (d1 / "metrics.jsonl").stat().st_mtime_ns
        hist, d2 = run_training(cfg)
        assert d2 == d1
        assert (d1 / "metrics.jsonl").stat().st_mtime_ns == stamp
        assert len(hist.epochs) == 2

    def test_stop_at_m_early_stop(self, corpus, tmp_path):
        cfg = micro_config(corpus, tmp_path, max_epochs=50, stop_at_m=0.01)
        hist, run_dir = run_training(cfg)
        status = json.loads((run_dir / "status.json").read_text())
        assert status["stopped_early"]
        assert len(hist.epochs) < 50

    def test_max_updates_stopping(self, corpus, tmp_path):
        cfg = micro_config(corpus, tmp_path, max_epochs=None, max_updates=3)
        hist, run_dir = run_training(cfg)
        assert len(hist.updates) == 3

    def test_masked_task_runs(self, corpus, tmp_path):
        cfg = micro_config(corpus, tmp_path, task="masked")
        hist, _ = run_training(cfg)
        assert len(hist.epochs) == 2
        assert hist.epochs[0]["mean_L"] is None  # unit lengths are causal-only


class TestDatasetBundle:
    def test_split_is_disjoint_and_deterministic(self, corpus, tmp_path):
        cfg = micro_config(corpus, tmp_path)
        b1 = build_dataset(cfg)
        b2 = build_dataset(cfg)
        assert [s.uid for s in b1.train] == [s.uid for s in b2.train]
        train_docs = {s.doc_id for s in b1.train}
        val_docs = {s.doc_id for s in b1.val}
        assert not (train_docs & val_docs)

    def test_mean_packed_length_reported(self, corpus, tmp_path):
        # reference scale for packed-length context: published mean was 430.12
        cfg = micro_config(corpus, tmp_path)
        b = build_dataset(cfg)
        assert 0 < b.mean_packed_len <= 64


class TestDocidExperiment:
    def test_three_arms_aligned(self, corpus, tmp_path):
        cfg = micro_config(corpus, tmp_path, max_epochs=1)
        arms = run_docid_experiment(cfg)
        assert set(arms) == {"control", "vocab-only", "prepend"}
        # vocab-only strictly grows params over control
        n = {mode: json.loads((d / "status.json").read_text())["n_params"]
             for mode, (_, d) in arms.items()}
        assert n["vocab-only"] > n["control"]
        assert n["prepend"] == n["vocab-only"]

    def test_control_arm_equals_plain_run(self, corpus, tmp_path):
        cfg = micro_config(corpus, tmp_path, max_epochs=1,
                           pack_len=64 - 3)
        arms = run_docid_experiment(cfg)
        plain_cfg = micro_config(corpus, tmp_path, max_epochs=1,
                                 pack_len=64 - 3)
        _, plain_dir = run_training(plain_cfg)
        control_dir = arms["control"][1]
        assert (control_dir / "metrics.jsonl").read_bytes() == \
            (plain_dir / "metrics.jsonl").read_bytes()


class TestForgetting:
    def run_pair(self, corpus, tmp_path, **kw):
        base = micro_config(corpus, tmp_path, max_epochs=4, checkpoint_epochs=(1,),
                            log_root=str(tmp_path / "base"))
        _, base_dir = run_training(base)
        kw.setdefault("log_root", str(tmp_path / "forget"))
        forget_cfg = micro_config(
            corpus, tmp_path, max_epochs=4, experiment="forget", inject_epoch=1, **kw)
        curve, run_dir = run_forgetting(forget_cfg,
                                        base_dir / "checkpoints" / "ep1.ckpt")
        return curve, run_dir

    def test_curve_shape_and_baseline(self, corpus, tmp_path):
        curve, run_dir = self.run_pair(corpus, tmp_path)
        assert curve.epochs[0] == 1            # first point right after injection
        assert len(curve.epochs) == 4          # inject + 3 continued epochs
        assert curve.baseline == min(curve.m_values)
        assert len(curve.diffs) == len(curve.m_values) - 1
        # telescoping: sum of diffs equals last - first exactly
        assert sum(curve.diffs) == pytest.approx(curve.m_values[-1] - curve.m_values[0])
        reloaded = load_special_curve(run_dir)
        assert reloaded.m_values == curve.m_values

    def test_wrong_checkpoint_epoch_rejected(self, corpus, tmp_path):
        base = micro_config(corpus, tmp_path, max_epochs=4, checkpoint_epochs=(2,),
                            log_root=str(tmp_path / "b2"))
        _, base_dir = run_training(base)
        forget_cfg = micro_config(corpus, tmp_path, max_epochs=4,
                                  experiment="forget", inject_epoch=1,
                                  log_root=str(tmp_path / "f2"))
        with pytest.raises(SetupError):
            run_forgetting(forget_cfg, base_dir / "checkpoints" / "ep2.ckpt")

    def test_baseline_example_values(self):
        c = ForgettingCurve(inject_epochs=(1,), epochs=[1, 2, 3, 4, 5],
                            m_values=[0.9, 0.5, 0.42, 0.40, 0.41])
        assert c.baseline == 0.40
        d = ForgettingCurve(inject_epochs=(1,), epochs=[1, 2, 3],
                            m_values=[0.5, 0.4, 0.35])
        assert np.allclose(d.diffs, [-0.10, -0.05])

    def test_repetition_arm_counts_updates(self, corpus, tmp_path):
        c1, d1 = self.run_pair(corpus, tmp_path)
        c4, d4 = self.run_pair(corpus, tmp_path, repetitions=4,
                               log_root=str(tmp_path / "forget4"))
        u1 = json.loads((d1 / "status.json").read_text())["final_update"]
        u4 = json.loads((d4 / "status.json").read_text())["final_update"]
        assert u4 > u1


class TestBaselineVsScale:
    def test_each_entry_is_curve_minimum(self, corpus, tmp_path):
        base_template = micro_config(corpus, tmp_path, model=None, preset="desk-tiny",
                                     max_epochs=3, checkpoint_epochs=(1,),
                                     log_root=str(tmp_path / "bases"))
        template = micro_config(corpus, tmp_path, model=None, preset="desk-tiny",
                                max_epochs=3, experiment="forget", inject_epoch=1,
                                log_root=str(tmp_path / "forgets"))
        rows = forgetting_baseline_vs_scale(["desk-tiny", "desk-mini"],
                                            template, base_template)
        assert [r["preset"] for r in rows] == ["desk-tiny", "desk-mini"]
        for r in rows:
            assert r["baseline"] == min(r["curve"].m_values)
        assert rows[1]["n_params"] > rows[0]["n_params"]


class TestScalingSweep:
    def test_cells_consistent_with_histories(self, corpus, tmp_path):
        template = micro_config(corpus, tmp_path, model=None, preset="desk-tiny",
                                max_epochs=2)
        cells, runs = run_scaling_sweep(["desk-tiny", "desk-mini"], (0.05, 0.5),
                                        template)
        assert len(cells) == 4
        for cell in cells:
            hist, _ = runs[cell.preset]
            cross = threshold_crossing(hist, cell.tau)
            assert (cell.t_epochs, cell.reached) == (cross.index, cross.reached)
        ns = {c.preset: c.n_params for c in cells}
        assert ns["desk-mini"] > ns["desk-tiny"]
