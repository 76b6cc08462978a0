"""Command-line surface: count-space, sample, gen-bench, meta-train, tune,
bench, report, mock-worker.

Exit codes: 0 success, 1 usage error, 2 runtime failure. QTT_SEED provides
the default --seed everywhere.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import meta_features, predictors, space, synth, tuner
from .curves import CurveStore
from .meta_features import MetaFeatures


def _env_seed() -> int:
    return int(os.environ.get("QTT_SEED", "0"))


def _load_features(path: Path) -> dict[str, MetaFeatures]:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return {ds: MetaFeatures.from_json_dict(d) for ds, d in raw.items()}


def _cmd_count_space(args) -> int:
    print(space.enumerate_size())
    return 0


def _cmd_sample(args) -> int:
    for config in space.sample(args.seed, args.n):
        print(space.canonical_json(config))
    return 0


def _cmd_gen_bench(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store, features = synth.generate_meta_dataset(args.tasks, args.pairs, args.seed)
    store.save(out / "curves.jsonl")
    with open(out / "meta_features.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump({ds: f.to_json_dict() for ds, f in features.items()}, fh,
                  sort_keys=True, indent=1)
        fh.write("\n")
    print(f"wrote {len(store)} records for {len(features)} datasets to {out}")
    return 0


def _cmd_meta_train(args) -> int:
    curves = Path(args.curves)
    store = CurveStore.load(curves)
    features_path = Path(args.features) if args.features else curves.parent / "meta_features.json"
    features = _load_features(features_path)
    if args.exclude:
        store, _ = store.lodo_split(args.exclude)
        if len(store) == 0:
            raise RuntimeError(f"excluding {args.exclude!r} left no training curves")
    metrics = tuner.meta_train(store, features, args.out, steps=args.steps,
                               lr=args.lr, seed=args.seed)
    print(f"checkpoint {args.out}: " + ", ".join(f"{k}={v:.4f}" for k, v in metrics.items()))
    return 0


def _cmd_tune(args) -> int:
    req = tuner.TuneRequest(
        dataset=args.dataset, budget_s=args.budget_s, checkpoint=args.checkpoint,
        pool_size=args.pool, seed=args.seed, worker=args.worker,
        subsample_n=args.subsample_n, clock=args.clock)
    result = tuner.tune(req)
    result.save(args.out)
    best = "none" if result.incumbent is None else f"{result.incumbent['val_iou']:.4f}"
    print(f"incumbent val_iou {best} after {len(result.trace)} steps "
          f"({result.ledger['total_s']:.1f}s, stop: {result.stop_reason}) -> {args.out}")
    return 0


def _cmd_bench(args) -> int:
    datasets = args.datasets.split(",")
    budgets = [float(b) for b in args.budgets.split(",")]
    seeds = list(range(args.seeds))

    def tune_fn(dataset: str, budget: float, seed: int):
        req = tuner.TuneRequest(dataset=dataset, budget_s=budget, checkpoint=args.checkpoint,
                                pool_size=args.pool, seed=seed, worker=args.worker,
                                clock=args.clock)
        return tuner.tune(req).incumbent_val_iou

    if args.zero_shot:
        with open(args.zero_shot, "r", encoding="utf-8") as fh:
            zero_shot = {k: float(v) for k, v in json.load(fh).items()}
    else:
        zero_shot = {}
        for dataset in datasets:
            worker = tuner.make_worker(args.worker)
            worker.request({"cmd": "init", "dataset_path": dataset,
                            "subsample_n": 100, "seed": seeds[0]})
            resp = worker.request({"cmd": "zero_shot"})
            worker.close()
            zero_shot[dataset] = float(resp.get("val_iou", 0.0))

    rows = tuner.run_benchmark(datasets, budgets, seeds, tune_fn, zero_shot)
    table = tuner.render_markdown(rows, budgets)
    with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table)
    print(table, end="")
    return 0


def _cmd_report(args) -> int:
    results_dir = Path(args.results)
    with open(args.zero_shot, "r", encoding="utf-8") as fh:
        zero_shot = {k: float(v) for k, v in json.load(fh).items()}
    by_cell: dict[tuple[str, float], list[float]] = {}
    for path in sorted(results_dir.glob("*.json")):
        with open(path, "r", encoding="utf-8") as fh:
            r = json.load(fh)
        value = 0.0 if r.get("incumbent") is None else float(r["incumbent"]["val_iou"])
        by_cell.setdefault((r["dataset"], float(r["budget_s"])), []).append(value)
    if not by_cell:
        raise RuntimeError(f"no result files under {results_dir}")
    datasets = sorted({ds for ds, _ in by_cell})
    budgets = sorted({b for _, b in by_cell})
    seen = {}

    def tune_fn(dataset, budget, seed):
        values = by_cell.get((dataset, budget))
        if values is None:
            raise RuntimeError("missing cell")
        key = (dataset, budget)
        seen[key] = seen.get(key, 0) + 1
        return values[seen[key] - 1]

    n_seeds = max(len(v) for v in by_cell.values())
    rows = tuner.run_benchmark(datasets, budgets, list(range(n_seeds)), tune_fn, zero_shot)
    print(tuner.render_markdown(rows, budgets), end="")
    return 0


def _cmd_mock_worker(args) -> int:
    return synth.run_stdio_worker()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qtt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count-space", help="print the exact configuration-space size")
    p.set_defaults(fn=_cmd_count_space)

    p = sub.add_parser("sample", help="print sampled configurations as JSON lines")
    p.add_argument("--n", type=int, default=128)
    p.add_argument("--seed", type=int, default=_env_seed())
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("gen-bench", help="generate a surrogate meta-dataset")
    p.add_argument("--tasks", type=int, default=13)
    p.add_argument("--pairs", type=int, default=154)
    p.add_argument("--seed", type=int, default=_env_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen_bench)

    p = sub.add_parser("meta-train", help="pre-train the predictors on a curve store")
    p.add_argument("--curves", required=True)
    p.add_argument("--features", default=None,
                   help="meta-features JSON (default: meta_features.json next to --curves)")
    p.add_argument("--exclude", default=None, metavar="DATASET_ID",
                   help="drop this dataset's curves before training (leave-one-dataset-out)")
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=_env_seed())
    p.set_defaults(fn=_cmd_meta_train)

    p = sub.add_parser("tune", help="run one budgeted tuning run")
    p.add_argument("--dataset", required=True, help='"synth:<seed>" or a dataset directory')
    p.add_argument("--budget-s", type=float, required=True)
    p.add_argument("--pool", type=int, default=128)
    p.add_argument("--seed", type=int, default=_env_seed())
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--worker", default="mock", help='"mock" or a worker command line')
    p.add_argument("--subsample-n", type=int, default=100)
    p.add_argument("--clock", choices=("simulated", "wall"), default=None)
    p.add_argument("--out", default="result.json")
    p.set_defaults(fn=_cmd_tune)

    p = sub.add_parser("bench", help="tune a grid of datasets x budgets x seeds")
    p.add_argument("--datasets", required=True, help="comma-separated dataset refs")
    p.add_argument("--budgets", default="60,120,180")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (0..n-1)")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--worker", default="mock")
    p.add_argument("--pool", type=int, default=128)
    p.add_argument("--clock", choices=("simulated", "wall"), default=None)
    p.add_argument("--zero-shot", default=None, help="JSON file {dataset: val_iou}")
    p.add_argument("--report", default="report.md")
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("report", help="render a results directory as a table")
    p.add_argument("--results", required=True)
    p.add_argument("--zero-shot", required=True)
    p.set_defaults(fn=_cmd_report)

    p = sub.add_parser("mock-worker", help="serve the surrogate worker over stdio")
    p.set_defaults(fn=_cmd_mock_worker)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.fn(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
