"""Command-line entry point.

Exit codes: 0 success, 2 configuration/validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import ConfigError, load_config
from .iodata import FULL, FormatError


def _parse_windows(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if part.lower() == FULL:
            out.append(FULL)
        else:
            try:
                value = int(part)
            except ValueError:
                raise ConfigError(f"bad context window {part!r}")
            if value < 1:
                raise ConfigError(f"context windows must be >= 1, got {value}")
            out.append(value)
    if not out:
        raise ConfigError("empty context window list")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="brainalign",
        description="Batch analysis aligning language-model embeddings with neural responses",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="pipeline config YAML")
        p.add_argument("--out", help="override output directory")
        p.add_argument("--seed", type=int, help="override random seed")
        p.add_argument("--jobs", type=int, help="worker threads for independent tasks")

    p = sub.add_parser("preprocess", help="envelope extraction, word responses, responsiveness")
    add_common(p)

    p = sub.add_parser("encode", help="PCA + ridge encoding scores per model")
    add_common(p)
    p.add_argument("--models", help="comma-separated model filter")

    p = sub.add_parser("hierarchy", help="binning, center of mass, alignment scores")
    add_common(p)
    p.add_argument("--models", help="comma-separated model filter")

    p = sub.add_parser("cka", help="layer-pair CKA matrices, group averages, diagonals")
    add_common(p)
    p.add_argument("--models", help="comma-separated model filter")

    p = sub.add_parser("context", help="context-window sweep, contextual content, context effects")
    add_common(p)
    p.add_argument("--models", help="comma-separated model filter")
    p.add_argument("--context", help="comma-separated windows, e.g. 1,10,full")

    p = sub.add_parser("synth", help="generate a synthetic ground-truth world")
    p.add_argument("--out", required=True, help="world output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--context", help="comma-separated windows for generated tensors")
    p.add_argument("--n-models", type=int, default=4)
    p.add_argument("--layers", type=int, default=32)
    p.add_argument("--words", type=int, default=2000)
    p.add_argument("--dims", type=int, default=128)
    p.add_argument("--electrodes", type=int, default=200)
    p.add_argument("--noise-sigma", type=float, default=0.0)

    p = sub.add_parser("report", help="combine stage summaries into one report")
    add_common(p)

    return parser


def _load(args) -> object:
    cfg = load_config(args.config)
    if args.out:
        cfg.output_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "jobs", None):
        cfg.jobs = args.jobs
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            windows = _parse_windows(args.context) if args.context else None
            plant = pipeline.cmd_synth(
                args.out,
                seed=args.seed,
                n_models=args.n_models,
                n_layers=args.layers,
                n_words=args.words,
                n_dims=args.dims,
                n_electrodes=args.electrodes,
                noise_sigma=args.noise_sigma,
                context_windows=windows,
            )
            print(f"synth world written to {args.out} ({len(plant['models'])} models)")
            return 0
        cfg = _load(args)
        if args.command == "preprocess":
            s = pipeline.cmd_preprocess(cfg)
            print(f"preprocess: {s['n_responsive']}/{s['n_electrodes']} electrodes responsive")
        elif args.command == "encode":
            s = pipeline.cmd_encode(cfg, models=args.models)
            print(f"encode: {len(s['models'])} models scored")
        elif args.command == "hierarchy":
            s = pipeline.cmd_hierarchy(cfg, models=args.models)
            print(f"hierarchy: {len(s['models'])} models aligned")
        elif args.command == "cka":
            s = pipeline.cmd_cka(cfg, models=args.models)
            print(f"cka: {s['n_matrices']} similarity matrices")
        elif args.command == "context":
            windows = _parse_windows(args.context) if args.context else None
            s = pipeline.cmd_context(cfg, models=args.models, windows=windows)
            print(f"context: {len(s['windows'])} windows analyzed")
        elif args.command == "report":
            s = pipeline.cmd_report(cfg)
            print(f"report: combined {len(s['stages'])} stages")
        else:  # pragma: no cover
            raise ConfigError(f"unknown command {args.command}")
        return 0
    except (ConfigError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
