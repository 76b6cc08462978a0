import json
import sys

import numpy as np
import pytest

from qtt import predictors, space, synth, tuner
from qtt.synth import MockWorker, SurrogateTask
from qtt.tuner import LodoViolation, TuneRequest


def target_ref(dataset_id: str) -> str:
    return f"synth:{dataset_id.split('-')[1]}"


def check_result_invariants(result, budget):
    # hard overshoot bound: elapsed <= budget + duration of the final step
    last = result.trace[-1].cost_s if result.trace else 0.0
    assert result.ledger["total_s"] <= budget + last + 1e-9
    ledger = result.ledger
    assert abs(ledger["selection_overhead_s"] + ledger["worker_time_s"] + ledger["idle_s"]
               - ledger["total_s"]) <= 1e-3
    # monotone incumbent and contiguous epochs per config
    best = -1.0
    per_config = {}
    for step in result.trace:
        assert step.epoch == per_config.get(step.config_id, 0) + 1
        per_config[step.config_id] = step.epoch
        best = max(best, step.val_iou)
    if result.incumbent is not None:
        assert result.incumbent["val_iou"] == best


class TestTune:
    def test_budget_regime_fixed_two_second_steps(self, small_ckpt, monkeypatch):
        monkeypatch.setattr(SurrogateTask, "cost", lambda self, config: 2.0)
        result = tuner.tune(TuneRequest(dataset="synth:31", budget_s=60,
                                        checkpoint=small_ckpt, pool_size=64, seed=0))
        assert 0 < len(result.trace) <= 30
        check_result_invariants(result, 60)

    def test_degenerate_budget_empty_trace(self, small_ckpt):
        result = tuner.tune(TuneRequest(dataset="synth:31", budget_s=0.05,
                                        checkpoint=small_ckpt, pool_size=8, seed=0))
        assert result.trace == [] and result.incumbent is None
        assert result.ledger["total_s"] == 0.0

    def test_pool_exhaustion(self, small_ckpt):
        result = tuner.tune(TuneRequest(dataset="synth:31", budget_s=1e6,
                                        checkpoint=small_ckpt, pool_size=2, seed=0))
        assert result.stop_reason == "pool_exhausted"
        assert len(result.trace) == 20  # 2 configs x 10 epochs
        check_result_invariants(result, 1e6)

    def test_randomized_budgets_respect_bound(self, small_ckpt):
        rng = np.random.default_rng(0)
        for i in range(10):
            budget = float(rng.uniform(3, 40))
            result = tuner.tune(TuneRequest(dataset=f"synth:{40 + i}", budget_s=budget,
                                            checkpoint=small_ckpt, pool_size=16, seed=i))
            check_result_invariants(result, budget)

    def test_deterministic_result_json(self, small_ckpt):
        req = dict(dataset="synth:55", budget_s=25, checkpoint=small_ckpt,
                   pool_size=16, seed=3)
        a = tuner.tune(TuneRequest(**req))
        b = tuner.tune(TuneRequest(**req))
        assert a.to_json() == b.to_json()

    def test_lodo_violation_and_pass(self, small_meta, small_ckpt, tmp_path):
        store, features, stats = small_meta
        target = store.dataset_ids()[0]
        # checkpoint trained including the target: hard failure
        with pytest.raises(LodoViolation):
            tuner.tune(TuneRequest(dataset=target_ref(target), budget_s=5,
                                   checkpoint=small_ckpt, pool_size=4, seed=0))
        # excluded: succeeds
        train, _ = store.lodo_split(target)
        excluded = tmp_path / "excluded.json"
        tuner.meta_train(train, features, excluded, steps=5, seed=0)
        result = tuner.tune(TuneRequest(dataset=target_ref(target), budget_s=5,
                                        checkpoint=str(excluded), pool_size=4, seed=0))
        assert result.stop_reason in ("budget", "pool_exhausted")

    def test_worker_failure_quarantines_config_only(self, small_ckpt, monkeypatch):
        pool = space.sample(6, 6)
        poisoned = space.config_id(pool[2])

        class FaultyWorker(MockWorker):
            def request(self, req):
                if req.get("cmd") == "step":
                    cfg = space.from_json_dict(req["config"])
                    if space.config_id(cfg) == poisoned:
                        return {"status": "error", "message": "boom"}
                return super().request(req)

        monkeypatch.setattr(tuner, "make_worker", lambda spec: FaultyWorker())
        result = tuner.tune(TuneRequest(dataset="synth:77", budget_s=1e6,
                                        checkpoint=small_ckpt, pool_size=6, seed=6))
        assert result.quarantined == [poisoned]
        assert result.stop_reason == "pool_exhausted"
        assert len(result.trace) == 50  # remaining 5 configs x 10 epochs
        assert all(t.config_id != poisoned for t in result.trace)

    def test_subprocess_worker_protocol(self, small_ckpt):
        cmd = f"{sys.executable} -m qtt.cli mock-worker"
        result = tuner.tune(TuneRequest(dataset="synth:31", budget_s=15,
                                        checkpoint=small_ckpt, pool_size=8, seed=1,
                                        worker=cmd, clock="simulated"))
        in_process = tuner.tune(TuneRequest(dataset="synth:31", budget_s=15,
                                            checkpoint=small_ckpt, pool_size=8, seed=1))
        assert result.to_json() == in_process.to_json()

    def test_result_json_round_trip(self, small_ckpt, tmp_path):
        result = tuner.tune(TuneRequest(dataset="synth:55", budget_s=10,
                                        checkpoint=small_ckpt, pool_size=8, seed=2))
        path = tmp_path / "result.json"
        result.save(path)
        loaded = json.loads(path.read_text())
        assert loaded["dataset"] == "synth:55"
        assert loaded["incumbent"]["val_iou"] == result.incumbent["val_iou"]
        assert len(loaded["trace"]) == len(result.trace)

    def test_request_validation(self, small_ckpt):
        with pytest.raises(ValueError):
            TuneRequest(dataset="synth:1", budget_s=0, checkpoint=small_ckpt)
        with pytest.raises(ValueError):
            TuneRequest(dataset="synth:1", budget_s=5, checkpoint=small_ckpt, pool_size=0)


class TestMetaTrain:
    def test_checkpoint_metadata(self, small_meta, tmp_path):
        store, features, _ = small_meta
        path = tmp_path / "ck.json"
        metrics = tuner.meta_train(store, features, path, steps=5, seed=0)
        perf, cost, stats, meta = predictors.load_checkpoint(path)
        assert set(meta["dataset_ids"]) == set(store.dataset_ids())
        assert "perf_val_nll_per_point" in meta["metrics"]
        assert metrics == meta["metrics"]

    def test_byte_identical_reruns(self, small_meta, tmp_path):
        store, features, _ = small_meta
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        tuner.meta_train(store, features, p1, steps=8, seed=1)
        tuner.meta_train(store, features, p2, steps=8, seed=1)
        assert p1.read_bytes() == p2.read_bytes()

    def test_single_record_store(self, tmp_path):
        task = SurrogateTask(3)
        store = synth.CurveStore()
        store.append(synth.make_record(task.dataset_id, space.sample(0, 1)[0], 1, 0.5, 1.0))
        tuner.meta_train(store, {task.dataset_id: task.meta_features()},
                         tmp_path / "one.json", steps=3, seed=0)
        assert (tmp_path / "one.json").exists()

    def test_unwritable_path(self, small_meta, tmp_path):
        store, features, _ = small_meta
        with pytest.raises(OSError):
            tuner.meta_train(store, features, tmp_path / "no" / "dir" / "ck.json",
                             steps=2, seed=0)

    def test_empty_store_rejected(self, small_meta):
        _, features, _ = small_meta
        with pytest.raises(ValueError):
            tuner.meta_train(synth.CurveStore(), features, "/tmp/x.json")

    def test_meta_dataset_scale_completes(self, paper_scale_store, tmp_path):
        # ~2000 (config, dataset) pairs as full 10-epoch curves
        store, features = paper_scale_store
        path = tmp_path / "big.ckpt.json"
        tuner.meta_train(store, features, path, steps=5, seed=0)
        perf, cost, _, meta = predictors.load_checkpoint(path)
        assert len(meta["dataset_ids"]) == 13
        assert perf.reservoir_x.shape == (256, predictors.INPUT_DIM)


class TestBenchmark:
    def test_mean_std_cell_rendering(self):
        values = {("polyp", 0): 0.881, ("polyp", 1): 0.819}
        rows = tuner.run_benchmark(
            ["polyp"], [60.0], [0, 1],
            lambda ds, b, s: values[(ds, s)], {"polyp": 0.495})
        table = tuner.render_markdown(rows, [60.0])
        assert "0.850_{0.031}" in table
        assert "| polyp | 0.495 |" in table

    def test_single_seed_zero_std(self):
        rows = tuner.run_benchmark(["a"], [60.0], [0], lambda ds, b, s: 0.7, {"a": 0.1})
        assert rows[0]["cells"][60.0] == (0.7, 0.0)

    def test_constant_mock_zero_std(self):
        rows = tuner.run_benchmark(["a"], [60.0], list(range(5)),
                                   lambda ds, b, s: 0.42, {"a": 0.1})
        mean, std = rows[0]["cells"][60.0]
        assert mean == pytest.approx(0.42) and std == 0.0

    def test_sorted_by_gain_and_failures_marked(self):
        def tune_fn(ds, b, s):
            if ds == "bad":
                raise RuntimeError("worker died")
            return {"hi": 0.9, "lo": 0.3}[ds]

        rows = tuner.run_benchmark(["lo", "bad", "hi"], [60.0], [0], tune_fn,
                                   {"hi": 0.2, "lo": 0.2, "bad": 0.2})
        assert [r["dataset"] for r in rows] == ["hi", "lo", "bad"]
        table = tuner.render_markdown(rows, [60.0])
        assert "failed" in table

    def test_none_incumbent_counts_as_zero(self):
        rows = tuner.run_benchmark(["a"], [60.0], [0, 1],
                                   lambda ds, b, s: None if s == 0 else 0.5, {"a": 0.0})
        assert rows[0]["cells"][60.0] == (0.25, 0.25)


class TestTargetMetaFeatures:
    def test_synth_ref(self):
        req = TuneRequest(dataset="synth:123", budget_s=1, checkpoint="x")
        assert tuner.target_meta_features(req) == SurrogateTask(123).meta_features()

    def test_image_directory(self, tmp_path):
        from PIL import Image

        (tmp_path / "images").mkdir()
        (tmp_path / "masks").mkdir()
        rng = np.random.default_rng(0)
        for i in range(6):
            img = rng.integers(0, 255, size=(16, 16, 3), dtype=np.uint8)
            mask = np.zeros((16, 16), dtype=np.uint8)
            mask[4:8, 4:8] = 255
            Image.fromarray(img).save(tmp_path / "images" / f"{i:02d}.png")
            Image.fromarray(mask).save(tmp_path / "masks" / f"{i:02d}.png")
        req = TuneRequest(dataset=str(tmp_path), budget_s=1, checkpoint="x",
                          subsample_n=4, seed=0)
        features = tuner.target_meta_features(req)
        assert features.n_images == 4
        assert features.n_classes == 2
        assert features.mean_foreground_fraction == pytest.approx(16 / 256)

    def test_dataset_ref_to_id(self):
        assert tuner.dataset_ref_to_id("synth:9") == "synth-9"
        assert tuner.dataset_ref_to_id("/data/polyp") == "polyp"
