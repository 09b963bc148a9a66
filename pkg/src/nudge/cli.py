"""Command-line surface: finetune, eval, split, normalize."""

from __future__ import annotations

import os

# BLAS pools must be sized before numpy first loads, or the fixed-chunk
# scoring path cannot guarantee identical results across --threads values.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import functools
import json

import click

from .api import METHODS, finetune as run_finetune
from .core import LabelSet, normalize_rows
from .fileio import EmbeddingFile, FormatError, read_labels, split_parts, write_labels
from .iterative import IterativeConfig
from .metrics import evaluate as run_evaluate

_IN_PATH = click.Path(exists=True, dir_okay=False)
_OUT_PATH = click.Path(dir_okay=False, writable=True)


def _friendly(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (FormatError, ValueError, OSError) as exc:
            raise click.ClickException(str(exc)) from exc

    return wrapper


def _resolve_threads(threads: int | None) -> int:
    if threads is None:
        env = os.environ.get("NUDGE_THREADS")
        if env is None:
            return 1
        try:
            threads = int(env)
        except ValueError:
            raise click.ClickException(f"NUDGE_THREADS must be an integer, got {env!r}")
    if threads < 1:
        raise click.ClickException(f"--threads must be >= 1, got {threads}")
    return threads


def _load_labels(path: str, n_queries: int, n_records: int) -> LabelSet:
    return LabelSet.from_entries(n_queries, n_records, read_labels(path))


@click.group()
@click.version_option(package_name="nudge")
def main() -> None:
    """Fine-tune pre-computed embeddings for k-NN retrieval and evaluate them."""


@main.command(name="finetune")
@click.option("--embeddings", required=True, type=_IN_PATH, help="Data record embeddings.")
@click.option("--train-queries", required=True, type=_IN_PATH)
@click.option("--train-labels", required=True, type=_IN_PATH)
@click.option("--val-queries", required=True, type=_IN_PATH)
@click.option("--val-labels", required=True, type=_IN_PATH)
@click.option("--method", required=True, type=click.Choice(METHODS))
@click.option("--out", required=True, type=_OUT_PATH, help="Tuned embeddings destination.")
@click.option("--report", "report_path", required=True, type=_OUT_PATH, help="JSON report destination.")
@click.option("--grid-points", type=int, default=None, help="Grid resolution for --method n (default 1024).")
@click.option("--alpha", type=float, default=None, help="Step size for --method im/in.")
@click.option("--iters", type=int, default=None, help="Step count for --method im/in.")
@click.option("--checkpoint-every", type=int, default=None, help="Checkpoint stride for --method im/in (default 1).")
@click.option("--weighted-labels", is_flag=True, help="Scale training contributions by label relevance.")
@click.option("--threads", type=int, default=None, help="Worker threads (default NUDGE_THREADS or 1).")
@_friendly
def finetune_cmd(
    embeddings,
    train_queries,
    train_labels,
    val_queries,
    val_labels,
    method,
    out,
    report_path,
    grid_points,
    alpha,
    iters,
    checkpoint_every,
    weighted_labels,
    threads,
):
    """Move record embeddings to maximize validation top-1 accuracy."""
    threads = _resolve_threads(threads)
    iterative = None
    if method in ("im", "in"):
        if alpha is None:
            raise click.UsageError(f"--alpha is required for --method {method}")
        if iters is None:
            raise click.UsageError(f"--iters is required for --method {method}")
        iterative = IterativeConfig(
            alpha=alpha,
            iters=iters,
            checkpoint_every=1 if checkpoint_every is None else checkpoint_every,
        )
    else:
        for name, value in (
            ("--alpha", alpha),
            ("--iters", iters),
            ("--checkpoint-every", checkpoint_every),
        ):
            if value is not None:
                raise click.UsageError(f"{name} only applies to --method im or in")
    if grid_points is not None and method != "n":
        raise click.UsageError("--grid-points only applies to --method n")

    emb = EmbeddingFile.read(embeddings)
    tq = EmbeddingFile.read(train_queries).values
    vq = EmbeddingFile.read(val_queries).values
    tl = _load_labels(train_labels, tq.shape[0], emb.values.shape[0])
    vl = _load_labels(val_labels, vq.shape[0], emb.values.shape[0])
    tuned, rep = run_finetune(
        method,
        emb.values,
        tq,
        tl,
        vq,
        vl,
        grid_points=1024 if grid_points is None else grid_points,
        iterative=iterative,
        weighted=weighted_labels,
        threads=threads,
    )
    EmbeddingFile(tuned, emb.dtype).write(out)
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(rep.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(
        f"{method}: gamma_star={rep.gamma_star:.6g} "
        f"val_correct {rep.val_correct_before} -> {rep.val_correct_after}"
    )


@main.command(name="eval")
@click.option("--embeddings", required=True, type=_IN_PATH)
@click.option("--queries", required=True, type=_IN_PATH)
@click.option("--labels", required=True, type=_IN_PATH)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--metrics", "metric_names", default=None, help="Comma-separated subset of recall,ndcg,recall_at_1.")
@click.option("--threads", type=int, default=None, help="Worker threads (default NUDGE_THREADS or 1).")
@_friendly
def eval_cmd(embeddings, queries, labels, k, metric_names, threads):
    """Report mean retrieval metrics for a labeled query set."""
    threads = _resolve_threads(threads)
    emb = EmbeddingFile.read(embeddings)
    q = EmbeddingFile.read(queries).values
    labelset = _load_labels(labels, q.shape[0], emb.values.shape[0])
    report = run_evaluate(q, emb.values, labelset, k=k, threads=threads).to_dict()
    if metric_names is not None:
        wanted = [name.strip() for name in metric_names.split(",") if name.strip()]
        unknown = [name for name in wanted if name not in ("recall", "ndcg", "recall_at_1")]
        if unknown:
            raise click.UsageError(
                f"--metrics must list recall, ndcg, or recall_at_1; got {', '.join(unknown)}"
            )
        if not wanted:
            raise click.UsageError("--metrics must name at least one metric")
        report = {
            key: value
            for key, value in report.items()
            if key in ("k", "n_queries") or key in wanted
        }
    click.echo(json.dumps(report, indent=2, sort_keys=True))


@main.command(name="split")
@click.option("--queries", required=True, type=_IN_PATH)
@click.option("--labels", required=True, type=_IN_PATH)
@click.option("--fractions", default="0.7,0.1,0.2", show_default=True, help="Three comma-separated positive fractions.")
@click.option("--seed", type=int, required=True)
@click.option("--out-prefix", required=True)
@_friendly
def split_cmd(queries, labels, fractions, seed, out_prefix):
    """Shuffle queries into train/val/test parts, labels traveling along."""
    try:
        parsed = tuple(float(part) for part in fractions.split(","))
    except ValueError:
        raise click.UsageError(f"--fractions must be comma-separated numbers, got {fractions!r}")
    if len(parsed) != 3:
        raise click.UsageError(f"--fractions needs exactly three values, got {len(parsed)}")
    source = EmbeddingFile.read(queries)
    entries = read_labels(labels)
    parts = split_parts(source.values, entries, parsed, seed)
    for name, (part_queries, part_entries) in zip(("train", "val", "test"), parts):
        emb_path = f"{out_prefix}.{name}.emb"
        tsv_path = f"{out_prefix}.{name}.tsv"
        EmbeddingFile(part_queries, source.dtype).write(emb_path)
        write_labels(tsv_path, part_entries)
        click.echo(f"{name}: {part_queries.shape[0]} queries -> {emb_path}, {tsv_path}")


@main.command(name="normalize")
@click.option("--in", "in_path", required=True, type=_IN_PATH)
@click.option("--out", required=True, type=_OUT_PATH)
@_friendly
def normalize_cmd(in_path, out):
    """Rescale every embedding row to unit norm (zero rows stay zero)."""
    emb = EmbeddingFile.read(in_path)
    EmbeddingFile(normalize_rows(emb.values), emb.dtype).write(out)
    click.echo(f"wrote {out} ({emb.values.shape[0]} x {emb.values.shape[1]})")


if __name__ == "__main__":
    main()
