"""The JSONL protocol loop: one request per stdin line, one response per
stdout line; protocol errors return {"status":"error",...} without killing
the process."""

from __future__ import annotations

import json

from .engine import Engine


def handle(engine: Engine, req) -> dict:
    """One request object -> one response object."""
    try:
        if not isinstance(req, dict):
            return {"status": "error", "message": "request must be a JSON object"}
        cmd = req.get("cmd")
        if cmd == "init":
            engine.init(str(req["dataset_path"]),
                        int(req["subsample_n"]) if "subsample_n" in req else None,
                        int(req.get("seed", 0)))
            return {"status": "ok"}
        if cmd == "step":
            miou, wall = engine.step(req["config"], int(req["epoch"]),
                                     str(req.get("run_id", "")))
            return {"status": "ok", "val_iou": miou, "wall_clock_s": wall}
        if cmd == "zero_shot":
            miou, wall = engine.zero_shot()
            return {"status": "ok", "val_iou": miou, "wall_clock_s": wall}
        if cmd == "shutdown":
            return {"status": "ok"}
        return {"status": "error", "message": f"unknown cmd {cmd!r}"}
    except Exception as exc:  # training or protocol failure: report, keep serving
        return {"status": "error", "message": f"{type(exc).__name__}: {exc}"}


def serve(engine: Engine, stdin=None, stdout=None) -> int:
    import sys

    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        req = None
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            resp = {"status": "error", "message": f"malformed request: {exc}"}
        else:
            resp = handle(engine, req)
        stdout.write(json.dumps(resp, sort_keys=True) + "\n")
        stdout.flush()
        if isinstance(req, dict) and req.get("cmd") == "shutdown":
            break
    return 0
