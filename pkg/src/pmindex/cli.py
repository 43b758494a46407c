"""Command line entry point: ``pmindex {indices,fit,score,report,synth}``.

Stages exchange JSON reports, so ``indices | fit | score | report`` can be
run one at a time. Config-file values are overridden by explicit flags.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import AR_VARIANTS, CHI_SQUARE_MULTIPLIERS, G_VARIANTS, OUTPUT_FORMATS, RANK_METHODS, RunConfig, load_config
from .dataset import load_csv_pair, load_population, save_csv_pair, save_json
from .errors import ConfigError, OutputError, PmError
from .pipeline import (
    Report,
    analyze_report,
    compute_indices,
    emit_report,
    fit_report,
    load_manifest_csv,
    load_report,
    load_weights,
    run_pipeline,
    score_report,
)
from .synth import SynthConfig, generate_synthetic

log = logging.getLogger("pmindex")


def _config_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="JSON config file; flags override its values")
    g.add_argument("--reference-year", type=int)
    g.add_argument("--g-variant", choices=G_VARIANTS)
    g.add_argument("--ar-variant", choices=AR_VARIANTS)
    g.add_argument("--citation-alpha", type=float)
    g.add_argument("--chi-square-multiplier", choices=CHI_SQUARE_MULTIPLIERS)
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iter", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--rank-method", choices=RANK_METHODS)


def _dataset_flags(p: argparse.ArgumentParser, required: bool = True):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--dataset", help="dataset JSON file or a directory holding authors.csv + publications.csv")
    g.add_argument("--authors", help="authors.csv (use with --publications)")
    p.add_argument("--publications", help="publications.csv")


def resolve_config(args, base: RunConfig | None = None) -> RunConfig:
    config = base or RunConfig()
    if getattr(args, "config", None):
        config = load_config(args.config)
    return config.replace(
        reference_year=args.reference_year,
        g_variant=args.g_variant,
        ar_variant=args.ar_variant,
        citation_alpha=args.citation_alpha,
        chi_square_multiplier=args.chi_square_multiplier,
        tol=args.tol,
        max_iter=args.max_iter,
        seed=args.seed,
        rank_method=args.rank_method,
        output_format=getattr(args, "format", None),
    )


def _load_dataset(args, config: RunConfig):
    if args.authors:
        if not args.publications:
            raise ConfigError("--authors needs --publications")
        return load_csv_pair(args.authors, args.publications, config.reference_year)
    return load_population(args.dataset, reference_year=config.reference_year)


def _write_report(report: Report, out):
    if out in (None, "-"):
        sys.stdout.write(report.to_json())
        return
    try:
        Path(out).write_text(report.to_json(), encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {out}: {exc}") from exc
    log.info("wrote %s", out)


def _input_report(args) -> Report:
    report = load_report(args.input)
    report.config = resolve_config(args, report.config)
    return report


def cmd_indices(args):
    config = resolve_config(args)
    report = compute_indices(_load_dataset(args, config), config)
    _write_report(report, args.output)


def cmd_fit(args):
    report = fit_report(_input_report(args))
    _write_report(report, args.output)


def cmd_score(args):
    if args.manifest_csv:
        report = load_manifest_csv(args.manifest_csv, resolve_config(args))
    elif args.input:
        report = _input_report(args)
    else:
        raise ConfigError("score needs an input report or --manifest-csv")
    if args.weights_file:
        report = score_report(report, load_weights(args.weights_file), source=str(args.weights_file))
    else:
        report = score_report(report)
    analyze_report(report)
    _write_report(report, args.output)


def cmd_report(args):
    if args.input:
        report = _input_report(args)
    elif args.dataset or args.authors:
        config = resolve_config(args)
        report = run_pipeline(_load_dataset(args, config), config)
    else:
        raise ConfigError("report needs an input report or a dataset")
    for path in emit_report(report, args.out_dir, report.config.output_format):
        print(path)


def cmd_synth(args):
    cfg = SynthConfig(n=args.n, seed=args.seed, reference_year=args.reference_year)
    dataset = generate_synthetic(cfg)
    if args.csv_dir:
        for path in save_csv_pair(dataset, args.csv_dir):
            print(path)
    if args.output:
        print(save_json(dataset, args.output))
    if not args.csv_dir and not args.output:
        import json
        sys.stdout.write(json.dumps(dataset.to_dict(), indent=1) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmindex", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("indices", help="compute per-author indices and manifest vectors")
    _dataset_flags(p)
    _config_flags(p)
    p.add_argument("-o", "--output", help="report JSON (default stdout)")
    p.set_defaults(func=cmd_indices)

    p = sub.add_parser("fit", help="fit the one-factor CFA to an indices report")
    p.add_argument("input", help="report JSON from 'indices'")
    _config_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="P-M scores and rankings")
    p.add_argument("input", nargs="?", help="report JSON from 'fit' (or 'indices' with --weights-file)")
    p.add_argument("--manifest-csv", help="score manifest rows directly (author_id,name,department + 6 columns)")
    p.add_argument("--weights-file", help="JSON with loadings and standard_errors; skips the fitted CFA")
    _config_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="write json, csv-tables or markdown output")
    p.add_argument("input", nargs="?", help="report JSON from any stage")
    _dataset_flags(p, required=False)
    _config_flags(p)
    p.add_argument("--format", choices=OUTPUT_FORMATS)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a seeded synthetic population")
    p.add_argument("--n", type=int, default=238)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reference-year", type=int, default=2008)
    p.add_argument("-o", "--output", help="dataset JSON path")
    p.add_argument("--csv-dir", help="also write authors.csv + publications.csv here")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PmError as exc:
        print(f"pmindex: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
