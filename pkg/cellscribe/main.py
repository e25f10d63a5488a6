#!/usr/bin/env python
import argparse
import json
import sys
import tomllib
from pathlib import Path

from .colors import foreground as fg
from .commands import (
    cmd_describe,
    cmd_evaluate,
    cmd_ontology,
    cmd_pathways,
    cmd_pipeline,
    cmd_sample,
    cmd_similarity,
    cmd_split,
)
from .formats import CLASSIFY_TASK_COLUMNS, EVALUATION_TASKS, ScribeFormats
from .scribe_exceptions import ScribeArgumentException, ScribeException, ScribeIOException
from .utils.docs.doc import prep_doc
from .utils.log.loger import get_logger, set_verbosity
from .validators import (
    validate_fraction,
    validate_named_path,
    validate_positive,
    validate_probability,
    validate_ratios,
)

logger = get_logger()

RESET = fg.RESET

SEEDED_COMMANDS = ("sample", "split", "pipeline")


class ScribeArgumentParser(argparse.ArgumentParser):
    """Usage errors raise instead of exiting so they map to exit code 1."""

    def error(self, message):
        raise ScribeArgumentException(message)


def load_config(path) -> dict:
    """Read a TOML or JSON run file."""
    path = Path(path)
    suffix = path.suffix.lstrip(".").lower()
    if suffix not in ScribeFormats().config:
        raise ScribeArgumentException(f"Unsupported config format: {path.name}")
    try:
        with open(path, "rb") as handle:
            if suffix == "toml":
                return tomllib.load(handle)
            return json.load(handle)
    except FileNotFoundError:
        raise ScribeIOException(f"File not found: {path}")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as e:
        raise ScribeArgumentException(f"Invalid config {path}: {e}")


def apply_config(subparser: argparse.ArgumentParser, command: str, config: dict):
    """Config keys become defaults; a ``[command]`` table overrides top-level keys."""
    dests = {action.dest for action in subparser._actions}
    defaults = {}
    scoped = config.get(command, {})
    for source in (config, scoped if isinstance(scoped, dict) else {}):
        for key, value in source.items():
            if isinstance(value, dict):
                continue
            dest = key.replace("-", "_")
            if dest in dests:
                defaults[dest] = value
            else:
                logger.debug(f"Config key {key} is not an option of {command}")
    subparser.set_defaults(**defaults)


def _add_common(parser):
    parser.add_argument("-O", "--output", help="Directory the results are written to.")
    parser.add_argument("--workers", default=1, help="Threads for per-row work.")


def build_parser():
    parser = ScribeArgumentParser(
        prog="cellscribe",
        description="Cell ontology similarity, structured cell descriptions and their evaluation.",
        add_help=False,
    )
    parser.add_argument("-h", "--help", action="store_true", help="Show this help message and exit.")
    parser.add_argument("--config", help="TOML/JSON run file whose keys become option defaults.")
    parser.add_argument("--verbose", action="store_true", help="Debug logging.")
    parser.add_argument("--quiet", action="store_true", help="Warnings and errors only.")
    sub = parser.add_subparsers(dest="command")

    ontology = sub.add_parser("ontology", help="OBO file to edge list and term table.")
    ontology.add_argument("obo", nargs="?", help="Cell Ontology OBO file.")
    ontology.add_argument("--prefixes", nargs="+", help="Keep only these id prefixes (eg CL).")
    ontology.add_argument("--include_obsolete", action="store_true", help="Keep obsolete terms as nodes.")
    _add_common(ontology)

    similarity = sub.add_parser("similarity", help="PageRank similarity matrix of a graph.")
    similarity.add_argument("graph", nargs="?", help="edges.tsv from `ontology` or an OBO file.")
    similarity.add_argument("--tau", default=0.1, help="Log-transform scale.")
    similarity.add_argument("--damping", default=0.85, help="Walk continuation probability.")
    similarity.add_argument("--tolerance", default=1e-10, help="L1 convergence tolerance.")
    similarity.add_argument("--max_iterations", default=10_000, help="Power-iteration cap.")
    similarity.add_argument("--symmetrize", action="store_true", help="Average S and its transpose.")
    similarity.add_argument("--cdf", action="store_true", help="Also write the off-diagonal CDF.")
    similarity.add_argument("--report", action="store_true", help="Also write the heavy-tail report.")
    similarity.add_argument("--prefixes", nargs="+", help="Id prefixes kept when reading an OBO file.")
    _add_common(similarity)

    evaluate = sub.add_parser("evaluate", help="Score predictions against references.")
    evaluate.add_argument("predictions", nargs="?", help="JSON-lines {cell_id, text} or a label TSV.")
    evaluate.add_argument("--references", help="JSON-lines {cell_id, text} or a metadata table.")
    evaluate.add_argument("--task", choices=EVALUATION_TASKS, default="generation")
    evaluate.add_argument("--matrix", help="similarity.ppr file, required by task ps.")
    evaluate.add_argument("--ontology", help="OBO file for label resolution.")
    evaluate.add_argument("--catalog", help="Pathway catalog TSV.")
    evaluate.add_argument("--gene_sets", help="GMT file used as the catalog when no TSV is given.")
    evaluate.add_argument("--canonicalize_labels", action="store_true",
                          help="Also report labels mapped onto the reference vocabulary.")
    evaluate.add_argument("--drop_unparsed", action="store_true",
                          help="Leave unresolvable predictions out of the PS average.")
    evaluate.add_argument("--pooling", choices=["sentence", "corpus"], default="sentence",
                          help="BLEU averaging mode.")
    evaluate.add_argument("--embeddings", action="append", default=[],
                          help="LABEL=embeddings.jsonl, repeatable (eg RBT=roberta.jsonl).")
    _add_common(evaluate)

    pathways = sub.add_parser("pathways", help="AUCell activity, top pathways and prevalence filter.")
    pathways.add_argument("expression", nargs="?", help="MatrixMarket file or dense CSV.")
    pathways.add_argument("--gene_sets", help="GMT file.")
    pathways.add_argument("--top_fraction", default=0.05, help="Ranking window, eg 0.05 or 5%%.")
    pathways.add_argument("--hvg", default=None, help="Score on this many highly variable genes.")
    pathways.add_argument("--k", default=2, help="Pathways kept per cell.")
    pathways.add_argument("--prevalence", default=0.005, help="Minimum active fraction, eg 0.5%%.")
    _add_common(pathways)

    sample = sub.add_parser("sample", help="Diversity-maximizing subsample of a cohort table.")
    sample.add_argument("cohort", nargs="?", help="Cohort CSV/TSV.")
    sample.add_argument("--target_n", help="Cells to keep.")
    sample.add_argument("--columns", nargs="+", choices=CLASSIFY_TASK_COLUMNS,
                        default=list(CLASSIFY_TASK_COLUMNS), help="Objective columns.")
    sample.add_argument("--keep_assays", action="store_true", help="Skip the assay exclusion.")
    sample.add_argument("--seed", default=None, help="Random seed (required).")
    _add_common(sample)

    split = sub.add_parser("split", help="Donor-level train/val/test split.")
    split.add_argument("cohort", nargs="?", help="Cohort CSV/TSV with donor_id.")
    split.add_argument("--ratios", default="80/10/10", help="eg 80/10/10 or 0.8,0.1,0.1")
    split.add_argument("--seed", default=None, help="Random seed (required).")
    _add_common(split)

    describe = sub.add_parser("describe", help="Render structured descriptions.")
    describe.add_argument("cohort", nargs="?", help="Cohort CSV/TSV.")
    describe.add_argument("--ontology", help="OBO file providing cell-type definitions.")
    describe.add_argument("--catalog", help="Pathway catalog TSV.")
    describe.add_argument("--gene_sets", help="GMT file used as the catalog when no TSV is given.")
    describe.add_argument("--top_pathways", help="top_pathways.tsv from `pathways`.")
    _add_common(describe)

    pipeline = sub.add_parser("pipeline", help="Cohort + expression to descriptions and splits.")
    pipeline.add_argument("cohort", nargs="?", help="Cohort CSV/TSV.")
    pipeline.add_argument("--expression", help="MatrixMarket file or dense CSV.")
    pipeline.add_argument("--gene_sets", help="GMT file.")
    pipeline.add_argument("--ontology", help="OBO file providing cell-type definitions.")
    pipeline.add_argument("--catalog", help="Pathway catalog TSV.")
    pipeline.add_argument("--target_n", default=None, help="Cells to sample; all when omitted.")
    pipeline.add_argument("--columns", nargs="+", choices=CLASSIFY_TASK_COLUMNS,
                          default=list(CLASSIFY_TASK_COLUMNS))
    pipeline.add_argument("--ratios", default="80/10/10")
    pipeline.add_argument("--top_fraction", default=0.05)
    pipeline.add_argument("--hvg", default=None)
    pipeline.add_argument("--k", default=2)
    pipeline.add_argument("--prevalence", default=0.005)
    pipeline.add_argument("--seed", default=None, help="Random seed (required).")
    _add_common(pipeline)

    return parser, sub.choices


def _required(value, flag: str):
    if value is None or value == "":
        raise ScribeArgumentException(f"argument {flag}: is required")
    return value


def _seed(value) -> int:
    _required(value, "--seed")
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ScribeArgumentException(f"Invalid seed: {value!r}")


def _optional_int(value, name):
    return None if value in (None, "") else validate_positive(value, name, integer=True)


def dispatch(args) -> dict:
    workers = validate_positive(args.workers, "workers", integer=True)
    output = _required(args.output, "-O/--output")

    if args.command == "ontology":
        return cmd_ontology(_required(args.obo, "obo"), output, args.prefixes, args.include_obsolete)

    if args.command == "similarity":
        return cmd_similarity(
            _required(args.graph, "graph"), output,
            tau=validate_positive(args.tau, "tau"),
            damping=validate_probability(args.damping, "damping"),
            tolerance=float(args.tolerance),
            max_iterations=validate_positive(args.max_iterations, "max_iterations", integer=True),
            symmetrize=args.symmetrize, workers=workers, cdf=args.cdf, report=args.report,
            prefixes=args.prefixes,
        )

    if args.command == "evaluate":
        return cmd_evaluate(
            _required(args.predictions, "predictions"), args.references, args.task, output,
            matrix=args.matrix, ontology=args.ontology, catalog=args.catalog,
            gene_sets=args.gene_sets, canonicalize=args.canonicalize_labels,
            drop_unparsed=args.drop_unparsed, pooled=args.pooling == "corpus",
            embeddings=[validate_named_path(value) for value in args.embeddings],
        )

    if args.command == "pathways":
        return cmd_pathways(
            _required(args.expression, "expression"), _required(args.gene_sets, "--gene_sets"), output,
            top_fraction=validate_fraction(args.top_fraction, "top_fraction", allow_zero=False),
            n_hvg=_optional_int(args.hvg, "hvg"),
            k=validate_positive(args.k, "k", integer=True),
            prevalence=validate_fraction(args.prevalence, "prevalence"),
            workers=workers,
        )

    if args.command == "sample":
        return cmd_sample(
            _required(args.cohort, "cohort"), output,
            target_n=validate_positive(_required(args.target_n, "--target_n"), "target_n", integer=True),
            seed=_seed(args.seed), columns=args.columns, exclude_assays=not args.keep_assays,
        )

    if args.command == "split":
        return cmd_split(_required(args.cohort, "cohort"), output, seed=_seed(args.seed),
                         ratios=validate_ratios(args.ratios))

    if args.command == "describe":
        return cmd_describe(_required(args.cohort, "cohort"), output, ontology=args.ontology,
                            catalog=args.catalog, gene_sets=args.gene_sets,
                            top_pathways=args.top_pathways)

    if args.command == "pipeline":
        return cmd_pipeline(
            _required(args.cohort, "cohort"), _required(args.expression, "--expression"),
            _required(args.gene_sets, "--gene_sets"), output, seed=_seed(args.seed),
            ontology=args.ontology, catalog=args.catalog,
            target_n=_optional_int(args.target_n, "target_n"),
            ratios=validate_ratios(args.ratios), columns=args.columns,
            top_fraction=validate_fraction(args.top_fraction, "top_fraction", allow_zero=False),
            n_hvg=_optional_int(args.hvg, "hvg"),
            k=validate_positive(args.k, "k", integer=True),
            prevalence=validate_fraction(args.prevalence, "prevalence"),
            workers=workers,
        )

    raise ScribeArgumentException(f"Unknown command {args.command}")


def run(argv=None) -> int:
    """Parse ``argv``, run one subcommand and return the process exit code."""
    parser, subparsers = build_parser()
    try:
        known, _ = parser.parse_known_args(argv)
        if known.help or not known.command:
            parser.print_help()
            prep_doc()
            return 0 if known.help else 1
        if known.config:
            apply_config(subparsers[known.command], known.command, load_config(known.config))
        args = parser.parse_args(argv)
        set_verbosity(args.verbose, args.quiet)
        if args.command in SEEDED_COMMANDS:
            _seed(args.seed)
        summary = dispatch(args)
    except ScribeException as e:
        print(f"cellscribe: {fg.BRED_FG}error{RESET}: {e}", file=sys.stderr)
        return e.exit_code

    print(f"{fg.GREEN_FG}{args.command}{RESET} done -> {fg.BLUE_FG}{args.output}{RESET}")
    logger.debug(json.dumps(summary, indent=2, sort_keys=True, default=str))
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
