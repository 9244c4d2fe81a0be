"""CLI: export encoder hidden states for a generated dataset.

    qpexport --model bert-trained --dataset d/train.jsonl --out embs/<sha>.qpemb
    qpexport --list-models
"""

from __future__ import annotations

import argparse
import sys

from .datasets import DatasetError
from .export import ExportError, ExportJob, export
from .qpemb import QpembError
from .registry import RegistryError, available_models


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qpexport",
                                description="Export per-token encoder states to QPEMB")
    p.add_argument("--model", help="registry name (e.g. pegasus-xsum) or local:PATH")
    p.add_argument("--dataset", help="dataset .jsonl file produced by the harness")
    p.add_argument("--out", help="output .qpemb path")
    p.add_argument("--device", default="cpu")
    p.add_argument("--batch", type=int, default=32, help="inference batch size")
    p.add_argument("--seed", type=int, default=0,
                   help="init seed for randomly initialized models")
    p.add_argument("--tokenizer", default=None,
                   help="override tokenizer path (offline use)")
    p.add_argument("--list-models", action="store_true", help="print registry and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_models:
        for name in available_models():
            print(name)
        return 0
    if not (args.model and args.dataset and args.out):
        print("error: --model, --dataset and --out are required", file=sys.stderr)
        return 2
    job = ExportJob(model=args.model, dataset=args.dataset, out=args.out,
                    device=args.device, batch_size=args.batch, seed=args.seed,
                    tokenizer_path=args.tokenizer)
    try:
        summary = export(job)
    except (DatasetError, RegistryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ExportError, QpembError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {summary['records']} records (dim {summary['dim']}) to {summary['out']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
