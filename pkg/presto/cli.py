"""Command-line interface for presto.

Every subcommand loads its inputs, runs one analysis, optionally writes the
result with its run provenance to --out, and prints a one-line summary.
"""

from __future__ import annotations

import argparse
import asyncio
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, NoReturn

from .analysis import (
    COMPARE_MMS_METHOD,
    cluster_universes,
    compare_mms,
    compress_search_space,
    detect_outliers,
    evaluate_representatives,
    mantel_test,
    resolve_epsilon,
)
from .config import resolve_jobs, validate_presto_config
from .const import (
    COMPLEXES,
    COMPRESSION_GREEDY,
    COMPRESSION_LINKAGE,
    CONF_CAP_ESSENTIAL,
    CONF_COMPLEX,
    CONF_GRID_STEP,
    CONF_H_MAX,
    CONF_K,
    CONF_METHOD,
    CONF_N_PROJECTIONS,
    CONF_NORMALIZE,
    CONF_P,
    CONF_PROJECTION,
    CONF_SAMPLE_SIZE,
    CONF_SEED,
    DEFAULT_PERMUTATIONS,
    DEFAULT_SEED,
    DOMAIN,
    EXIT_DOMAIN_ERROR,
    EXIT_OK,
    EXIT_USAGE_ERROR,
    METRIC_BOTTLENECK,
    METRIC_WASSERSTEIN,
    OUTLIER_IQR,
    OUTLIER_ZSCORE,
    PROJECTOR_GAUSSIAN,
    PROJECTOR_MMDS,
    PROJECTOR_PCA,
    VERSION,
    format_p,
)
from .exceptions import DomainError, PrestoException
from .ingest import load_embedding, load_landscape, load_landscape_dir, load_manifest, load_mms, save_artifact
from .measures import landscape_norms, presto_distance, presto_variance, sensitivity_table, total_norm
from .models import LandscapeSet, MultiverseManifest, PersistenceLandscape, PrestoConfig, p_from_text
from .pipeline import MultiversePipeline, ProjectionPipeline, embedding_landscape
from .provenance import StageTimer, build_provenance

_LOGGER = logging.getLogger(__name__)

PROJECTOR_ALIASES = {"gauss": PROJECTOR_GAUSSIAN, PROJECTOR_GAUSSIAN: PROJECTOR_GAUSSIAN}
PROJECTOR_CHOICES = (PROJECTOR_PCA, "gauss", PROJECTOR_GAUSSIAN, PROJECTOR_MMDS)
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Arguments that do not change the result of a run
_NON_RESULT_ARGS = frozenset({"handler", "verbose", "out", "jobs"})


class PrestoArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the usage-error code."""

    def error(self, message: str) -> NoReturn:
        """Print usage and exit 64."""
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _p_argument(value: str) -> float:
    try:
        return p_from_text(value)
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"invalid norm exponent {value!r}") from err


def _add_common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, default=None, help="Write the result (JSON, or CSV for tables)")
    parser.add_argument("--verbose", action="store_true", help="Log debug output to stderr")


def _add_p_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--p", type=_p_argument, default=2.0, help="Landscape norm exponent: 1, 2 or inf")


def _add_pipeline_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=2, help="Projection dimension")
    parser.add_argument("--h", type=int, default=2, help="Maximal homology dimension (0-2)")
    parser.add_argument("--projector", choices=PROJECTOR_CHOICES, default=PROJECTOR_PCA, help="Projection method")
    parser.add_argument("--n-projections", type=int, default=1, help="Gaussian projections to average over")
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Seed for projections and subsampling")
    parser.add_argument("--normalize", action="store_true", help="Scale embeddings by their approximate diameter")
    parser.add_argument("--grid-step", type=float, default=None, help="Round births and deaths to this grid")
    parser.add_argument("--complex", choices=COMPLEXES, default=None, help="Filtration (alpha for k <= 3)")
    parser.add_argument("--cap-essential", action="store_true", help="Keep infinite bars, capped at the maximum")
    parser.add_argument("--sample-size", type=int, default=None, help="Subsample embeddings to this many rows")
    _add_p_arg(parser)


def _add_epsilon_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--epsilon", type=float, default=None, help="Distance threshold")
    group.add_argument("--quantile", type=float, default=None, help="Threshold as a quantile of all distances")


def _pipeline_config(args: argparse.Namespace) -> PrestoConfig:
    """Resolve pipeline flags into a validated configuration."""
    raw: dict[str, Any] = {
        CONF_P: args.p,
        CONF_H_MAX: args.h,
        CONF_NORMALIZE: args.normalize,
        CONF_PROJECTION: {
            CONF_METHOD: PROJECTOR_ALIASES.get(args.projector, args.projector),
            CONF_K: args.k,
            CONF_N_PROJECTIONS: args.n_projections,
            CONF_SEED: args.seed,
        },
        CONF_GRID_STEP: args.grid_step,
        CONF_CAP_ESSENTIAL: args.cap_essential,
        CONF_SAMPLE_SIZE: args.sample_size,
    }
    if args.complex is not None:
        raw[CONF_COMPLEX] = args.complex
    return validate_presto_config(raw)


def _landscape_config(p: float, landscapes: Sequence[PersistenceLandscape]) -> PrestoConfig:
    """Return a configuration matching loaded landscapes."""
    return validate_presto_config({CONF_P: p, CONF_H_MAX: landscapes[0].h_max})


def _load_landscape_set(directory: Path) -> LandscapeSet:
    landscapes = load_landscape_dir(directory)
    if not landscapes:
        raise DomainError(f"No landscape files in {directory}")
    return LandscapeSet.from_mapping(landscapes)


def _run_config(args: argparse.Namespace, cfg: PrestoConfig | None = None) -> dict[str, Any]:
    """Return the arguments that determine a result, as recorded in provenance."""
    arguments = {
        key: str(value) if isinstance(value, Path) else value
        for key, value in sorted(vars(args).items())
        if key not in _NON_RESULT_ARGS
    }
    if isinstance(arguments.get("p"), float):
        arguments["p"] = format_p(arguments["p"])
    return {"arguments": arguments, "presto": cfg.to_dict() if cfg else None}


def _manifest_inputs(manifest_path: Path, manifest: MultiverseManifest) -> list[Path]:
    return [manifest_path, *(universe.embedding_path for universe in manifest.universes)]


def _emit(
    args: argparse.Namespace,
    value: Any,
    summary: str,
    cfg: PrestoConfig | None = None,
    inputs: Sequence[Path] = (),
    timer: StageTimer | None = None,
    notes: dict[str, Any] | None = None,
) -> int:
    """Write the result with provenance when --out is given and print the summary."""
    if args.out is not None:
        provenance = build_provenance(args.command, _run_config(args, cfg), inputs, timer, notes)
        save_artifact(value, args.out, provenance)
        summary = f"{summary} -> {args.out}"
    print(summary)
    return EXIT_OK


def cmd_landscape(args: argparse.Namespace) -> int:
    """Compute the landscape of one embedding."""
    cfg = _pipeline_config(args)
    timer = StageTimer()
    with timer.stage("load"):
        embedding = load_embedding(args.input, args.format)
    landscape = embedding_landscape(embedding, cfg, timer)
    layers = {h: len(landscape.layers(h)) for h in range(cfg.h_max + 1)}
    summary = f"landscape {landscape.source_id}: layers per dimension {layers}"
    return _emit(args, landscape, summary, cfg, [args.input], timer)


def cmd_distance(args: argparse.Namespace) -> int:
    """Print the PRESTO distance between two landscapes."""
    a, b = load_landscape(args.a), load_landscape(args.b)
    cfg = _landscape_config(args.p, [a, b])
    value = presto_distance(a, b, cfg)
    return _emit(args, {"distance": value}, repr(value), cfg, [args.a, args.b])


def cmd_variance(args: argparse.Namespace) -> int:
    """Print the PRESTO variance of a directory of landscapes."""
    ls = _load_landscape_set(args.landscapes)
    cfg = _landscape_config(args.p, ls.landscapes)
    value = presto_variance(ls, cfg)
    summary = f"variance over {len(ls)} landscapes: {value!r}"
    return _emit(args, {"variance": value, "n": len(ls)}, summary, cfg, sorted(args.landscapes.glob("*.json")))


def cmd_norms(args: argparse.Namespace) -> int:
    """Report per-dimension and total landscape norms."""
    ls = _load_landscape_set(args.landscapes)
    cfg = _landscape_config(args.p, ls.landscapes)
    norms = {
        uid: {"by_dim": landscape_norms(landscape, cfg), "total": total_norm(landscape, cfg)}
        for uid, landscape in zip(ls.ids, ls.landscapes)
    }
    largest = max(norms, key=lambda uid: norms[uid]["total"])
    summary = f"norms of {len(ls)} landscapes, largest {largest} ({norms[largest]['total']!r})"
    return _emit(args, norms, summary, cfg, sorted(args.landscapes.glob("*.json")))


def _manifest_landscapes(
    args: argparse.Namespace, manifest: MultiverseManifest
) -> tuple[dict[str, PersistenceLandscape], PrestoConfig, StageTimer, list[Path]]:
    """Load landscapes from --landscapes, or compute them from the manifest's embeddings."""
    if args.landscapes is not None:
        landscapes = load_landscape_dir(args.landscapes)
        if not landscapes:
            raise DomainError(f"No landscape files in {args.landscapes}")
        cfg = _landscape_config(args.p, list(landscapes.values()))
        return landscapes, cfg, StageTimer(), [args.manifest, *sorted(args.landscapes.glob("*.json"))]

    cfg = _pipeline_config(args)
    pipeline = MultiversePipeline(manifest, cfg, resolve_jobs(args.jobs))
    landscapes = asyncio.run(pipeline.async_landscapes())
    return landscapes, cfg, pipeline.timer, _manifest_inputs(args.manifest, manifest)


def cmd_sensitivity(args: argparse.Namespace) -> int:
    """Report how strongly each hyperparameter moves the landscapes."""
    manifest = load_manifest(args.manifest)
    landscapes, cfg, timer, inputs = _manifest_landscapes(args, manifest)
    report = sensitivity_table(manifest, landscapes, cfg)

    if args.dimension is not None:
        if args.dimension not in report.local:
            raise DomainError(f"Unknown parameter dimension {args.dimension!r}; known: {list(report.local)}")
        payload = report.to_dict()
        value: Any = {
            "dimension": args.dimension,
            "local": report.local[args.dimension],
            "individual": [row for row in payload["individual"] if row["dimension"] == args.dimension],
        }
        summary = f"sensitivity of {args.dimension}: {report.local[args.dimension]!r}"
    elif args.global_only:
        value = {"global": report.global_sensitivity}
        summary = f"global sensitivity: {report.global_sensitivity!r}"
    else:
        value = report
        summary = f"global sensitivity {report.global_sensitivity!r} over {len(report.local)} dimensions"
    return _emit(args, value, summary, cfg, inputs, timer)


def cmd_outliers(args: argparse.Namespace) -> int:
    """Flag universes whose landscape norm is anomalous."""
    ls = _load_landscape_set(args.landscapes)
    cfg = _landscape_config(args.p, ls.landscapes)
    report = detect_outliers(ls, args.method, args.threshold, cfg)
    summary = f"{len(report.flagged)} of {len(ls)} flagged ({report.method}, threshold {report.threshold:g})"
    if report.flagged:
        summary = f"{summary}: {', '.join(report.flagged)}"
    return _emit(args, report, summary, cfg, sorted(args.landscapes.glob("*.json")))


def cmd_cluster(args: argparse.Namespace) -> int:
    """Cluster universes by complete linkage cut at epsilon."""
    mms = load_mms(args.mms)
    epsilon = resolve_epsilon(mms, args.epsilon, args.quantile)
    labels = cluster_universes(mms, epsilon)
    summary = f"{len(set(labels.values()))} clusters of {mms.m} universes at epsilon {epsilon!r}"
    return _emit(args, labels, summary, inputs=[args.mms], notes={"epsilon": epsilon})


def cmd_compress(args: argparse.Namespace) -> int:
    """Select representative universes covering the multiverse within epsilon."""
    mms = load_mms(args.mms)
    result = compress_search_space(mms, args.epsilon, args.quantile, args.method)
    inputs = [args.mms]
    value: Any = result
    summary = f"{len(result.representatives)} of {mms.m} representatives at epsilon {result.epsilon!r}"
    if args.target is not None:
        target = evaluate_representatives(load_mms(args.target), result)
        value = {"compression": result.to_dict(), "target": target}
        inputs.append(args.target)
        summary = f"{summary}; target max distance {target['max']!r}"
    return _emit(args, value, summary, inputs=inputs)


def cmd_mantel(args: argparse.Namespace) -> int:
    """Test the correlation of two distance matrices over the same universes."""
    a, b = load_mms(args.a), load_mms(args.b)
    if a.ids != b.ids:
        raise DomainError(f"{args.a} and {args.b} list different universes")
    result = mantel_test(a, b, args.permutations, args.seed, args.comparisons)
    summary = f"mantel r={result.r!r} p={result.p_value!r} ({result.permutations} permutations)"
    return _emit(args, result, summary, inputs=[args.a, args.b])


def cmd_compare_mms(args: argparse.Namespace) -> int:
    """Compare two distance matrices through their persistence diagrams."""
    value = compare_mms(load_mms(args.a), load_mms(args.b), args.metric, args.p)
    return _emit(
        args,
        {"distance": value, "metric": args.metric},
        f"{args.metric} distance {value!r}",
        inputs=[args.a, args.b],
        notes={"method": COMPARE_MMS_METHOD},
    )


def cmd_build_mms(args: argparse.Namespace) -> int:
    """Compute the pairwise distance matrix of a multiverse."""
    manifest = load_manifest(args.manifest)
    cfg = _pipeline_config(args)
    pipeline = MultiversePipeline(manifest, cfg, resolve_jobs(args.jobs))
    mms = asyncio.run(pipeline.async_build_mms())
    summary = f"{mms.m}x{mms.m} distance matrix, max {float(mms.dist.max())!r}"
    return _emit(
        args,
        mms,
        summary,
        cfg,
        _manifest_inputs(args.manifest, manifest),
        pipeline.timer,
        {"statistics": pipeline.statistics},
    )


def cmd_loss(args: argparse.Namespace) -> int:
    """Measure the topological loss of projecting a multiverse, with its bound checks."""
    manifest = load_manifest(args.manifest)
    pipeline = ProjectionPipeline(manifest, _pipeline_config(args), resolve_jobs(args.jobs))
    report = asyncio.run(pipeline.async_evaluate())
    verdict = "passed" if report.metric.passed and report.variance.sandwich_passed else "FAILED"
    summary = f"topological loss {report.loss.loss!r}; bound checks {verdict}"
    return _emit(
        args,
        report,
        summary,
        pipeline.cfg,
        _manifest_inputs(args.manifest, manifest),
        pipeline.timer,
        {"statistics": pipeline.statistics},
    )


def _subcommand(
    subparsers: Any, name: str, handler: Callable[[argparse.Namespace], int], help_text: str
) -> argparse.ArgumentParser:
    parser: argparse.ArgumentParser = subparsers.add_parser(name, help=help_text, description=help_text)
    parser.set_defaults(handler=handler)
    _add_common_args(parser)
    return parser


def build_parser() -> argparse.ArgumentParser:
    """Return the presto argument parser."""
    parser = PrestoArgumentParser(prog=DOMAIN, description="Topological comparison of latent-space multiverses")
    parser.add_argument("--version", action="version", version=f"{DOMAIN} {VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=PrestoArgumentParser)

    landscape = _subcommand(subparsers, "landscape", cmd_landscape, "Compute the landscape of one embedding")
    landscape.add_argument("--input", type=Path, required=True, help="Embedding file (.csv or .npy)")
    landscape.add_argument("--format", choices=("csv", "npy"), default=None, help="Override the suffix")
    _add_pipeline_args(landscape)

    distance = _subcommand(subparsers, "distance", cmd_distance, "PRESTO distance between two landscapes")
    distance.add_argument("--a", type=Path, required=True, help="First landscape file")
    distance.add_argument("--b", type=Path, required=True, help="Second landscape file")
    _add_p_arg(distance)

    for name, handler, help_text in (
        ("variance", cmd_variance, "PRESTO variance of a directory of landscapes"),
        ("norms", cmd_norms, "Per-dimension landscape norms of a directory of landscapes"),
    ):
        sub = _subcommand(subparsers, name, handler, help_text)
        sub.add_argument("--landscapes", type=Path, required=True, help="Directory of landscape files")
        _add_p_arg(sub)

    outliers = _subcommand(subparsers, "outliers", cmd_outliers, "Flag universes with anomalous landscape norms")
    outliers.add_argument("--landscapes", type=Path, required=True, help="Directory of landscape files")
    outliers.add_argument("--method", choices=(OUTLIER_ZSCORE, OUTLIER_IQR), default=OUTLIER_ZSCORE)
    outliers.add_argument("--threshold", type=float, default=None, help="Method threshold (default 3.0 / 1.5)")
    _add_p_arg(outliers)

    sensitivity = _subcommand(subparsers, "sensitivity", cmd_sensitivity, "Hyperparameter sensitivity")
    sensitivity.add_argument("--manifest", type=Path, required=True, help="Multiverse manifest (JSON)")
    sensitivity.add_argument("--landscapes", type=Path, default=None, help="Precomputed landscapes by universe id")
    scope = sensitivity.add_mutually_exclusive_group()
    scope.add_argument("--dimension", default=None, help="Report one parameter dimension")
    scope.add_argument("--global", dest="global_only", action="store_true", help="Report global sensitivity only")
    sensitivity.add_argument("--jobs", type=int, default=None, help="Parallel universes (default PRESTO_JOBS or 1)")
    _add_pipeline_args(sensitivity)

    cluster = _subcommand(subparsers, "cluster", cmd_cluster, "Complete-linkage clusters of a distance matrix")
    cluster.add_argument("--mms", type=Path, required=True, help="Distance matrix (CSV or JSON)")
    _add_epsilon_args(cluster)

    compress = _subcommand(subparsers, "compress", cmd_compress, "Representatives covering a multiverse")
    compress.add_argument("--mms", type=Path, required=True, help="Distance matrix (CSV or JSON)")
    _add_epsilon_args(compress)
    compress.add_argument("--method", choices=(COMPRESSION_GREEDY, COMPRESSION_LINKAGE), default=COMPRESSION_GREEDY)
    compress.add_argument("--target", type=Path, default=None, help="Distance matrix to evaluate the choice on")

    mantel = _subcommand(subparsers, "mantel", cmd_mantel, "Mantel test between two distance matrices")
    mantel.add_argument("--a", type=Path, required=True, help="First distance matrix")
    mantel.add_argument("--b", type=Path, required=True, help="Second distance matrix")
    mantel.add_argument("--permutations", type=int, default=DEFAULT_PERMUTATIONS)
    mantel.add_argument("--seed", type=int, default=DEFAULT_SEED)
    mantel.add_argument("--comparisons", type=int, default=1, help="Bonferroni factor for the corrected p-value")

    compare = _subcommand(subparsers, "compare-mms", cmd_compare_mms, "Topological distance of two matrices")
    compare.add_argument("--a", type=Path, required=True, help="First distance matrix")
    compare.add_argument("--b", type=Path, required=True, help="Second distance matrix")
    compare.add_argument("--metric", choices=(METRIC_BOTTLENECK, METRIC_WASSERSTEIN), default=METRIC_BOTTLENECK)
    _add_p_arg(compare)

    for name, handler, help_text in (
        ("build-mms", cmd_build_mms, "Pairwise distance matrix of a multiverse"),
        ("loss", cmd_loss, "Topological loss of projecting a multiverse"),
    ):
        sub = _subcommand(subparsers, name, handler, help_text)
        sub.add_argument("--manifest", type=Path, required=True, help="Multiverse manifest (JSON)")
        sub.add_argument("--jobs", type=int, default=None, help="Parallel universes (default PRESTO_JOBS or 1)")
        _add_pipeline_args(sub)
        if name == "loss":
            # Rips references through H2 are refused above about a hundred points
            sub.set_defaults(h=1)

    return parser


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format=LOG_FORMAT, stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the presto command line.

    Returns:
        0 on success, 2 on a domain or data error, 64 on a usage error
    """
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return int(args.handler(args))
    except PrestoException as err:
        _LOGGER.debug("Command %s failed", args.command, exc_info=True)
        print(f"{DOMAIN}: error: {err}", file=sys.stderr)
        return EXIT_DOMAIN_ERROR
