"""Command-line entry point: ``flowemb <stage> [options]``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .embed import EMBEDDER_KINDS
from .pipeline import (
    PipelineConfig,
    PipelineError,
    stage_cluster,
    stage_eval,
    stage_extract,
    stage_repro,
    stage_score,
    stage_synth,
    stage_train,
)

logger = logging.getLogger(__name__)

_STAGE_HELP = {
    "synth": "generate a synthetic flows/labels benchmark",
    "extract": "parse flows into labelled weekly window sequences",
    "cluster": "segment users by their typical behaviour profile",
    "train": "fit the embedder on each cluster's training users",
    "score": "kNN-score every held-out user-week",
    "eval": "precision-recall curves, AUC and snapshot scatters",
    "repro": "run every stage for all embedders and summarise",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowemb",
        description="Cluster users, embed their weekly activity, flag outliers.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="JSON config file")
    common.add_argument("--workdir", metavar="DIR", help="artifact directory")
    common.add_argument("--seed", type=int, metavar="N", help="master seed")
    common.add_argument(
        "--embedder", choices=EMBEDDER_KINDS, help="which embedder to use"
    )
    common.add_argument(
        "--strict", action="store_true", default=None,
        help="abort on malformed input rows instead of skipping them",
    )
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="stage", required=True)
    for name, blurb in _STAGE_HELP.items():
        sub.add_parser(name, parents=[common], help=blurb, description=blurb)
    return parser


def _resolve_config(args: argparse.Namespace) -> PipelineConfig:
    config = (
        PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    )
    overrides = {}
    for name in ("workdir", "seed", "embedder", "strict"):
        value = getattr(args, name)
        if value is not None:
            overrides[name] = value
    return dataclasses.replace(config, **overrides) if overrides else config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = _resolve_config(args)
        if args.stage == "synth":
            stage_synth(config)
        elif args.stage == "extract":
            stage_extract(config)
        elif args.stage == "cluster":
            stage_cluster(config)
        elif args.stage == "train":
            stage_train(config)
        elif args.stage == "score":
            stage_score(config)
        elif args.stage == "eval":
            summary = stage_eval(config)
            print(f"{summary['embedder']} pooled pr_auc {summary['pooled_area']:.6f}")
        else:
            result = stage_repro(config)
            print("embedder  pr_auc")
            for emb, area in result["areas"].items():
                print(f"{emb:<8}  {area:.6f}")
            print(f"summary: {result['summary_path']}")
    except (PipelineError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
