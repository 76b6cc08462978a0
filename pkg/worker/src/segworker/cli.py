"""segworker CLI: serve the JSONL protocol on stdio (default), or generate
the bundled toy dataset with `segworker gen-toy`."""

from __future__ import annotations

import argparse
import sys

from .data import generate_toy_dataset
from .engine import Engine
from .server import serve


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["gen-toy"]:
        parser = argparse.ArgumentParser(prog="segworker gen-toy")
        parser.add_argument("--out", required=True)
        parser.add_argument("--n", type=int, default=20)
        parser.add_argument("--size", type=int, default=64)
        parser.add_argument("--seed", type=int, default=0)
        args = parser.parse_args(argv[1:])
        out = generate_toy_dataset(args.out, args.n, args.size, args.seed)
        print(f"wrote {args.n} image/mask pairs to {out}")
        return 0

    parser = argparse.ArgumentParser(prog="segworker", description=__doc__)
    parser.add_argument("--backbone", choices=("toy", "sam"), default="toy")
    parser.add_argument("--sam-checkpoint", default=None,
                        help="model weights for --backbone sam")
    parser.add_argument("--deterministic", action="store_true",
                        help="single-threaded, fully seeded runs")
    args = parser.parse_args(argv)
    engine = Engine(backbone=args.backbone, deterministic=args.deterministic,
                    sam_checkpoint=args.sam_checkpoint)
    return serve(engine)


if __name__ == "__main__":
    sys.exit(main())
