"""Command-line interface.

Subcommands: evaluate (layer-wise correlation report), finetune (fit channel
weights), split (deterministic train/val partition), scatter
(accuracy-vs-correlation table), validate (archive integrity).

Exit codes: 0 success, 1 usage error, 2 data/validation error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from . import archive as arc
from . import datasets, finetune, harness, registry
from .distances import ReadoutConfig, STRATEGIES
from .errors import FeatIQError
from .rankstats import POLARITIES


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="featiq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ev = sub.add_parser("evaluate", help="layer-wise correlation against MOS")
    ev.add_argument("--features", required=True, help="feature archive directory")
    ev.add_argument("--pairs", required=True, help="pair file (canonical CSV, KADID CSV, or TID mos text)")
    ev.add_argument("--readout", required=True, choices=STRATEGIES)
    ev.add_argument("--layers", required=True, help="comma-separated layer names, or 'all'")
    ev.add_argument("--concat", action="store_true", help="concatenate layers into one distance")
    ev.add_argument("--weights", default=None, help="fitted channel-weights file")
    ev.add_argument("--polarity", choices=POLARITIES, default="higher_is_better")
    ev.add_argument("--database", choices=("TID2008", "TID2013"), default="TID2013",
                    help="database label when --pairs is a raw TID mos file")
    ev.add_argument("--gram-unnormalized", action="store_true",
                    help="use raw co-activation sums instead of Gram/(H*W)")
    ev.add_argument("--normalize-layers", action="store_true",
                    help="divide each layer's squared distance by its summary length")
    ev.add_argument("--format", choices=harness.REPORT_FORMATS, default="csv")
    ev.add_argument("--out", required=True, help="report output path")

    ft = sub.add_parser("finetune", help="fit nonnegative channel weights on a training database")
    ft.add_argument("--features", required=True)
    ft.add_argument("--pairs", required=True)
    ft.add_argument("--layers", required=True, help="comma-separated layer names, or 'all'")
    ft.add_argument("--concat", action="store_true",
                    help="fit one joint weighting over the concatenated layers")
    ft.add_argument("--iterations", type=int, default=200)
    ft.add_argument("--step", type=float, default=0.25)
    ft.add_argument("--seed", type=int, default=0)
    ft.add_argument("--surrogate", choices=finetune.SURROGATES, default="pearson_on_distance")
    ft.add_argument("--polarity", choices=POLARITIES, default="higher_is_better")
    ft.add_argument("--database", choices=("TID2008", "TID2013"), default="TID2013")
    ft.add_argument("--out", required=True, help="weights output path")

    sp = sub.add_parser("split", help="deterministic train/val partition")
    sp.add_argument("--pairs", required=True)
    sp.add_argument("--fraction", type=float, default=0.7)
    sp.add_argument("--seed", type=int, default=2013)
    sp.add_argument("--granularity", choices=datasets.GRANULARITIES, default="by_pair")
    sp.add_argument("--database", choices=("TID2008", "TID2013"), default="TID2013")
    sp.add_argument("--out-train", required=True)
    sp.add_argument("--out-val", required=True)

    sc = sub.add_parser("scatter", help="accuracy vs max correlation score per model")
    sc.add_argument("--registry", required=True,
                    help="registry CSV, or 'default' for the built-in table")
    sc.add_argument("--reports", required=True, nargs="+", help="report CSV files")
    sc.add_argument("--out", required=True)

    va = sub.add_parser("validate", help="archive manifest and payload integrity")
    va.add_argument("--features", required=True)

    return parser


def _resolve_layers(spec: str, manifest: arc.ArchiveManifest) -> List[str]:
    if spec.strip().lower() == "all":
        return manifest.layer_names()
    names = [name.strip() for name in spec.split(",") if name.strip()]
    if not names:
        raise FeatIQError(f"no layer names in {spec!r}")
    return names


def _cmd_evaluate(args) -> int:
    manifest, reader = arc.read_archive(args.features)
    records = datasets.load_pairs(args.pairs, database=args.database)
    layers = _resolve_layers(args.layers, manifest)
    weights = finetune.read_weights(args.weights) if args.weights else None
    config = ReadoutConfig(
        strategy=args.readout,
        layers=tuple(layers),
        concatenate=args.concat,
        weights=weights,
        gram_normalize=not args.gram_unnormalized,
        normalize_layers=args.normalize_layers,
    )
    report = harness.evaluate_layerwise(reader, records, config, args.polarity)
    harness.emit_report(report, args.out, fmt=args.format)
    sys.stdout.write(harness.report_to_text(report))
    print(f"wrote {args.out}")
    return 0


def _cmd_finetune(args) -> int:
    manifest, reader = arc.read_archive(args.features)
    records = datasets.load_pairs(args.pairs, database=args.database)
    layers = _resolve_layers(args.layers, manifest)
    config = finetune.FitConfig(
        iterations=args.iterations,
        step_size=args.step,
        seed=args.seed,
        surrogate=args.surrogate,
    )
    training_database = "+".join(sorted({rec.database for rec in records}))
    if args.concat:
        table = finetune.build_contribution_table(reader, records, layers)
        weights, report = finetune.fit_channel_weights(table, args.polarity, config)
        print(
            f"concat fit: spearman {report.spearman_initial:.6f} -> "
            f"{report.spearman_final:.6f} ({report.accepted_steps} accepted steps)"
        )
    else:
        merged = {}
        for layer in layers:
            table = finetune.build_contribution_table(reader, records, [layer])
            fitted, report = finetune.fit_channel_weights(table, args.polarity, config)
            merged[layer] = fitted.for_layer(layer)
            print(
                f"{layer}: spearman {report.spearman_initial:.6f} -> "
                f"{report.spearman_final:.6f} ({report.accepted_steps} accepted steps)"
            )
        from .distances import ChannelWeights

        weights = ChannelWeights(merged)
    finetune.write_weights(
        args.out,
        weights,
        fit_config=config,
        training_database=training_database,
        model_id=manifest.model_id,
    )
    print(f"wrote {args.out}")
    return 0


def _cmd_split(args) -> int:
    records = datasets.load_pairs(args.pairs, database=args.database)
    spec = datasets.SplitSpec(
        train_fraction=args.fraction, seed=args.seed, granularity=args.granularity
    )
    train, val = datasets.split_records(records, spec)
    datasets.write_records(args.out_train, train)
    datasets.write_records(args.out_val, val)
    print(f"{len(train)} train / {len(val)} val (seed {args.seed}, {args.granularity})")
    return 0


def _cmd_scatter(args) -> int:
    if args.registry == "default":
        entries = list(registry.DEFAULT_REGISTRY)
    else:
        entries = registry.read_registry(args.registry)
    reports = [harness.parse_report(path) for path in args.reports]
    rows = harness.accuracy_correlation_table(entries, reports)
    Path(args.out).write_text(harness.scatter_to_csv(rows), encoding="utf-8")
    print(f"wrote {args.out} ({len(rows)} models)")
    return 0


def _cmd_validate(args) -> int:
    violations = arc.validate_archive(args.features)
    if violations:
        for violation in violations:
            print(violation, file=sys.stderr)
        print(f"{len(violations)} violation(s)", file=sys.stderr)
        return 2
    manifest, _ = arc.read_archive(args.features)
    print(
        f"archive OK: {len(manifest.images)} images x {len(manifest.layers)} layers "
        f"({manifest.model_id})"
    )
    return 0


_COMMANDS = {
    "evaluate": _cmd_evaluate,
    "finetune": _cmd_finetune,
    "split": _cmd_split,
    "scatter": _cmd_scatter,
    "validate": _cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (FeatIQError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
