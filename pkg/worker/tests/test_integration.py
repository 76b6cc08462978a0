"""End-to-end wiring: the tuner CLI drives this worker over the JSONL
protocol against the toy dataset. Needs the qtt package installed."""

import json
import shutil
import subprocess
import sys

import pytest

qtt_missing = shutil.which("qtt") is None


@pytest.mark.skipif(qtt_missing, reason="qtt CLI not installed")
def test_tune_through_real_worker(toy_dataset, tmp_path):
    bench = tmp_path / "bench"
    run = subprocess.run(["qtt", "gen-bench", "--tasks", "3", "--pairs", "5",
                          "--seed", "2", "--out", str(bench)],
                         capture_output=True, text=True)
    assert run.returncode == 0, run.stderr
    ckpt = tmp_path / "ckpt.json"
    run = subprocess.run(["qtt", "meta-train", "--curves", str(bench / "curves.jsonl"),
                          "--out", str(ckpt), "--steps", "10", "--seed", "0"],
                         capture_output=True, text=True)
    assert run.returncode == 0, run.stderr

    result_path = tmp_path / "result.json"
    worker_cmd = f"{sys.executable} -m segworker.cli --backbone toy --deterministic"
    run = subprocess.run(
        ["qtt", "tune", "--dataset", toy_dataset, "--budget-s", "20",
         "--pool", "6", "--seed", "0", "--checkpoint", str(ckpt),
         "--worker", worker_cmd, "--subsample-n", "20",
         "--out", str(result_path)],
        capture_output=True, text=True, timeout=300)
    assert run.returncode == 0, run.stderr

    result = json.loads(result_path.read_text())
    assert result["trace"], "no training steps were dispatched"
    assert result["incumbent"] is not None
    assert 0.0 <= result["incumbent"]["val_iou"] <= 1.0
    assert result["ledger"]["worker_time_s"] > 0
    # epochs per config arrive contiguously through the wire
    per_config = {}
    for step in result["trace"]:
        assert step["epoch"] == per_config.get(step["config_id"], 0) + 1
        per_config[step["config_id"]] = step["epoch"]
