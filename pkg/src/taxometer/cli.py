"""Command line interface: scoring, degradation, and study orchestration."""

from __future__ import annotations

import json
import math
from pathlib import Path

import click

from .adequacy import JudgmentCache, nliv
from .errors import DegenerateInputError
from .mutation import Degradation, write_trace
from .providers import (
    FilesFillMaskProvider,
    FilesNLIProvider,
    FilesSimilarityProvider,
    HttpFillMaskProvider,
    HttpNLIProvider,
    HttpSimilarityProvider,
    MockFillMaskProvider,
    MockNLIProvider,
    MockSimilarityProvider,
)
from .reference import triplet_prf
from .robustness import PairSample, csc, semantic_proximity
from .study import (
    StudyConfig,
    correlation_report,
    nli_verification,
    plot_data,
    read_records,
    run_study,
)
from .taxonomy import load_taxonomy, save_taxonomy_json

_METRICS = ("csc", "sp", "nliv-s", "nliv-w")


def _emit(payload: dict) -> None:
    click.echo(json.dumps(_jsonable(payload), ensure_ascii=False, indent=2))


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _load(path: str, format: str, glosses: str | None):
    return load_taxonomy(path, format, glosses=glosses)


def _similarity_provider(provider: str, seed: int, embeddings: str | None, endpoint: str | None):
    if provider == "mock":
        return MockSimilarityProvider(seed=seed)
    if provider == "files":
        if not embeddings:
            raise click.UsageError("--provider files needs --embeddings <store>")
        return FilesSimilarityProvider(embeddings)
    return HttpSimilarityProvider(endpoint)


def _nli_provider(provider: str, nli_store: str | None, endpoint: str | None):
    if provider == "mock":
        return MockNLIProvider()
    if provider == "files":
        if not nli_store:
            raise click.UsageError("--provider files needs --nli-store <store>")
        return FilesNLIProvider(nli_store)
    return HttpNLIProvider(endpoint)


taxonomy_options = [
    click.option("--format", "format_", default="json", type=click.Choice(["json", "tsv-edges"]), show_default=True),
    click.option("--glosses", default=None, help="Companion gloss TSV for tsv-edges files."),
]


def _add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@click.group()
def main() -> None:
    """Reference-free taxonomy quality metrics."""


@main.command()
@click.option("--predicted", type=click.Path(exists=True), default=None, help="Taxonomy to score against --gold.")
@click.option("--gold", type=click.Path(exists=True), default=None, help="Gold-standard taxonomy.")
@click.option("--metric", type=click.Choice(_METRICS), default=None, help="Reference-free metric to compute.")
@click.option("--taxonomy", "taxonomy_path", type=click.Path(exists=True), default=None)
@_add_options(taxonomy_options)
@click.option("--provider", type=click.Choice(["mock", "files", "http"]), default="mock", show_default=True)
@click.option("--embeddings", default=None, help="Embedding store (files provider).")
@click.option("--nli-store", default=None, help="NLI judgment store (files provider).")
@click.option("--endpoint", default=None, help="Sidecar URL (http provider); defaults to $TAXOMETER_SIDECAR_URL.")
@click.option("--seed", default=0, show_default=True, help="Mock-embedding / pair-sampling seed.")
@click.option("--cache-dir", default=None, help="Directory for the NLI edge cache (else $TAXOMETER_CACHE_DIR).")
def score(predicted, gold, metric, taxonomy_path, format_, glosses, provider, embeddings, nli_store, endpoint, seed, cache_dir):
    """Score a taxonomy: triplet F1 against a gold standard, or a
    reference-free metric (csc, sp, nliv-s, nliv-w)."""
    if predicted and gold:
        prf = triplet_prf(_load(predicted, format_, glosses), _load(gold, format_, glosses))
        _emit(
            {
                "precision": prf.precision,
                "recall": prf.recall,
                "f1": prf.f1,
                "tp": prf.tp,
                "fp": prf.fp,
                "fn": prf.fn,
            }
        )
        return
    if not metric or not taxonomy_path:
        raise click.UsageError("either --predicted/--gold or --metric/--taxonomy is required")

    taxonomy = _load(taxonomy_path, format_, glosses)
    if metric == "csc":
        sim = _similarity_provider(provider, seed, embeddings, endpoint)
        try:
            result = csc(taxonomy, sim, PairSample.for_taxonomy(taxonomy, seed=seed))
        except DegenerateInputError as exc:
            _emit({"metric": "csc", "tau": None, "p": None, "stars": "", "n": None, "reason": str(exc)})
            return
        _emit({"metric": "csc", "tau": result.tau, "p": result.p_value, "stars": result.stars, "n": result.n})
    elif metric == "sp":
        sim = _similarity_provider(provider, seed, embeddings, endpoint)
        result = semantic_proximity(taxonomy, sim)
        _emit({"metric": "sp", "ratio": result.ratio, "groups": result.groups})
    else:
        nli = _nli_provider(provider, nli_store, endpoint)
        cache = JudgmentCache(Path(cache_dir) / "nli_judgments.jsonl") if cache_dir else JudgmentCache.from_env()
        mode = "strong" if metric == "nliv-s" else "weak"
        result = nliv(taxonomy, nli, mode, cache)
        _emit(
            {
                "metric": metric,
                "score": result.score,
                "scored_concepts": result.scored_concepts,
                "scored_edges": result.scored_edges,
                "cache_hits": result.cache_hits,
            }
        )


@main.command()
@click.option("--taxonomy", "taxonomy_path", type=click.Path(exists=True), required=True)
@_add_options(taxonomy_options)
@click.option("--kind", type=click.Choice(["any", "leaf", "non-leaf"]), default="any", show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--schedule", default="1,8,64,512,4096", show_default=True, help="Comma-separated checkpoint counts.")
@click.option("--out", type=click.Path(), required=True, help="Output directory for trace and checkpoints.")
def degrade(taxonomy_path, format_, glosses, kind, seed, schedule, out):
    """Degrade a taxonomy with seeded random relocations, writing the trace
    and a checkpoint taxonomy per schedule entry."""
    taxonomy = _load(taxonomy_path, format_, glosses)
    checkpoints = tuple(int(c) for c in schedule.split(","))
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)

    run = Degradation(taxonomy, checkpoints, kind.replace("-", "_"), seed)
    reached = []
    for count, snapshot in run.checkpoints():
        snapshot.validate()
        save_taxonomy_json(snapshot, out_dir / f"checkpoint_{count}.json")
        reached.append(count)
    write_trace(run.trace, out_dir / "trace.jsonl")
    _emit(
        {
            "seed": seed,
            "kind": kind,
            "checkpoints": reached,
            "mutations_applied": len(run.trace.ops),
            "truncated": run.trace.truncated,
            "trace": str(out_dir / "trace.jsonl"),
        }
    )


@main.group()
def study() -> None:
    """Degradation studies: run, correlate, verify the NLI approximation."""


@study.command(name="run")
@click.option("--config", "config_path", type=click.Path(exists=True), required=True, help="JSON or TOML study config.")
@click.option("--records", type=click.Path(), required=True, help="Records CSV (appended; resumable).")
def study_run(config_path, records):
    """Run or resume the configured degradation study."""
    cfg = StudyConfig.from_file(config_path)
    all_records = run_study(cfg, records)
    _emit({"records": len(all_records), "path": records})


@study.command(name="correlate")
@click.option("--records", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), default=None, help="Write the JSON report here instead of stdout.")
def study_correlate(records, out):
    """Correlate every metric column with F1, per dataset."""
    report = correlation_report(read_records(records))
    if out:
        Path(out).write_text(json.dumps(_jsonable(report), indent=2) + "\n", encoding="utf-8")
        click.echo(out)
    else:
        _emit(report)


@study.command(name="verify-nli")
@click.option("--taxonomy", "taxonomy_path", type=click.Path(exists=True), required=True)
@_add_options(taxonomy_options)
@click.option("--mode", type=click.Choice(["s", "w"]), default="s", show_default=True)
@click.option("--provider", type=click.Choice(["mock", "files", "http"]), default="mock", show_default=True)
@click.option("--nli-store", default=None)
@click.option("--endpoint", default=None)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--window", default=0.1, show_default=True)
@click.option("--seed", default=0, show_default=True)
def study_verify_nli(taxonomy_path, format_, glosses, mode, provider, nli_store, endpoint, threshold, window, seed):
    """Check how well thresholded NLI separates true edges from unrelated
    pairs, reported per Wu-Palmer window."""
    taxonomy = _load(taxonomy_path, format_, glosses)
    nli = _nli_provider(provider, nli_store, endpoint)
    windows = nli_verification(
        taxonomy,
        nli,
        "strong" if mode == "s" else "weak",
        window=window,
        threshold=threshold,
        seed=seed,
    )
    _emit(
        {
            "mode": mode,
            "threshold": threshold,
            "window_policy": "disjoint windows, one global negative sample",
            "windows": [
                {
                    "lo": w.lo,
                    "hi": w.hi,
                    "precision": w.prf.precision if w.prf else None,
                    "recall": w.prf.recall if w.prf else None,
                    "f1": w.prf.f1 if w.prf else None,
                    "positives": w.positives,
                    "negatives": w.negatives,
                }
                for w in windows
            ],
        }
    )


@study.command(name="plot-data")
@click.option("--records", type=click.Path(exists=True), required=True)
@click.option("--out", type=click.Path(), required=True, help="Long-format CSV for external plotting.")
def study_plot_data(records, out):
    """Export (metric, mutations, normalized_score) rows for plotting."""
    rows = plot_data(read_records(records))
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("metric,mutations,normalized_score\n")
        for metric, mutations, score in rows:
            fh.write(f"{metric},{mutations},{score!r}\n")
    click.echo(out)


if __name__ == "__main__":
    main()
