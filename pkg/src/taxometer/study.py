"""Degradation-study orchestration: score, record, resume, correlate.

A study degrades each benchmark taxonomy with seeded random relocations,
scores every checkpoint with the full metric battery (F1 against the
original, CSC, NLIV strong/weak, SP, and optionally the fill-mask RaTE
baseline), and persists the records incrementally as CSV. Runs are
resumable by (dataset, seed, mutation count) and byte-identical across
repeats and kill/resume cycles. Correlating any metric column against F1
over the pooled records reproduces the validation the metrics are built on:
a good reference-free metric must rank degraded taxonomies like F1 does.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .adequacy import JudgmentCache, Mode, nliv, relation_probability, relation_prompt
from .correlation import kendall_tau_b
from .errors import (
    AllNAError,
    BackendUnavailableError,
    DegenerateInputError,
    MissingPromptError,
    ParseError,
    TaxometerError,
)
from .mutation import DEFAULT_SCHEDULE, KINDS, Degradation
from .providers import (
    FillMaskProvider,
    MASK_TOKEN,
    NLIProvider,
    SimilarityProvider,
    build_fill_mask_provider,
    build_nli_provider,
    build_similarity_provider,
)
from .reference import PRF, triplet_prf
from .robustness import PairSample, csc, semantic_proximity
from .taxonomy import Taxonomy, load_taxonomy
from .text import lemma

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ("dataset", "seed", "kind", "mutations", "f1", "csc", "csc_p", "nliv_s", "nliv_w", "sp", "rate")
METRIC_COLUMNS = ("csc", "nliv_s", "nliv_w", "sp", "rate")

# Datasets larger than this many concepts get 50 degradations per kind by
# default, smaller ones 100.
LARGE_DATASET_CUTOFF = 2000


@dataclass(frozen=True)
class StudyRecord:
    """Scores of one degraded taxonomy at one checkpoint; None means NA."""

    dataset: str
    seed: int
    kind: str
    mutations: int
    f1: float | None
    csc: float | None
    csc_p: float | None
    nliv_s: float | None
    nliv_w: float | None
    sp: float | None
    rate: float | None

    @property
    def key(self) -> tuple[str, int, int]:
        return (self.dataset, self.seed, self.mutations)

    def to_row(self) -> str:
        def fmt(value: float | int | str | None) -> str:
            if value is None:
                return "NA"
            if isinstance(value, float):
                return repr(value)
            return str(value)

        return ",".join(fmt(getattr(self, column)) for column in RECORD_COLUMNS)

    @classmethod
    def from_row(cls, row: str) -> "StudyRecord":
        fields = row.split(",")
        if len(fields) != len(RECORD_COLUMNS):
            raise ParseError(f"record row has {len(fields)} fields, expected {len(RECORD_COLUMNS)}")

        def parse(value: str) -> float | None:
            return None if value == "NA" else float(value)

        return cls(
            dataset=fields[0],
            seed=int(fields[1]),
            kind=fields[2],
            mutations=int(fields[3]),
            f1=parse(fields[4]),
            csc=parse(fields[5]),
            csc_p=parse(fields[6]),
            nliv_s=parse(fields[7]),
            nliv_w=parse(fields[8]),
            sp=parse(fields[9]),
            rate=parse(fields[10]),
        )


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    format: str = "json"
    glosses: str | None = None


@dataclass
class StudyConfig:
    """Everything a study run needs; loadable from JSON or TOML."""

    datasets: dict[str, DatasetSpec]
    kinds: tuple[str, ...] = ("any", "non_leaf")
    schedule: tuple[int, ...] = DEFAULT_SCHEDULE
    degradations: int | None = None  # None: 100 small / 50 large datasets
    base_seed: int = 0
    similarity: dict = field(default_factory=lambda: {"backend": "mock"})
    nli: dict = field(default_factory=lambda: {"backend": "mock"})
    fill_mask: dict = field(default_factory=lambda: {"backend": "none"})
    rate_k: int = 10
    cache_path: str | None = None

    def __post_init__(self) -> None:
        self.kinds = tuple(_normalize_kind(k) for k in self.kinds)
        for kind in self.kinds:
            if kind not in KINDS:
                raise ValueError(f"unknown mutation kind {kind!r}")
        self.schedule = tuple(int(c) for c in self.schedule)

    @classmethod
    def from_file(cls, path: str | Path) -> "StudyConfig":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError:  # Python 3.10
                try:
                    import tomli as tomllib  # type: ignore[no-redef]
                except ImportError as exc:
                    raise ParseError("TOML configs need Python >= 3.11 or the tomli package") from exc
            raw = tomllib.loads(text)
        else:
            raw = json.loads(text)
        return cls.from_mapping(raw)

    @classmethod
    def from_mapping(cls, raw: dict) -> "StudyConfig":
        datasets = {}
        for name, entry in raw.get("datasets", {}).items():
            if isinstance(entry, str):
                datasets[name] = DatasetSpec(path=entry)
            else:
                datasets[name] = DatasetSpec(
                    path=entry["path"],
                    format=entry.get("format", "json"),
                    glosses=entry.get("glosses"),
                )
        if not datasets:
            raise ParseError("study config declares no datasets")
        kwargs = {k: v for k, v in raw.items() if k != "datasets"}
        known = {
            "kinds", "schedule", "degradations", "base_seed",
            "similarity", "nli", "fill_mask", "rate_k", "cache_path",
        }
        unknown = set(kwargs) - known
        if unknown:
            raise ParseError(f"unknown study config keys: {sorted(unknown)}")
        if "kinds" in kwargs:
            kwargs["kinds"] = tuple(kwargs["kinds"])
        if "schedule" in kwargs:
            kwargs["schedule"] = tuple(kwargs["schedule"])
        return cls(datasets=datasets, **kwargs)

    def degradations_for(self, taxonomy: Taxonomy) -> int:
        if self.degradations is not None:
            return self.degradations
        return 50 if len(taxonomy.concept_ids) > LARGE_DATASET_CUTOFF else 100


def _normalize_kind(kind: str) -> str:
    return kind.replace("-", "_")


def task_seed(base_seed: int, dataset: str, kind: str, index: int) -> int:
    """Stable 63-bit seed per (dataset, kind, degradation index)."""
    src = f"{base_seed}:{dataset}:{kind}:{index}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(src).digest()[:8], "big") >> 1


# -- scoring --------------------------------------------------------------------


@dataclass
class MetricProviders:
    similarity: SimilarityProvider
    nli: NLIProvider
    fill_mask: FillMaskProvider | None = None
    cache: JudgmentCache | None = None

    @classmethod
    def from_config(cls, cfg: StudyConfig) -> "MetricProviders":
        return cls(
            similarity=build_similarity_provider(cfg.similarity),
            nli=build_nli_provider(cfg.nli),
            fill_mask=build_fill_mask_provider(cfg.fill_mask),
            cache=JudgmentCache(cfg.cache_path) if cfg.cache_path else JudgmentCache(None),
        )


def score_taxonomy(
    degraded: Taxonomy,
    original: Taxonomy,
    providers: MetricProviders,
    *,
    dataset: str,
    seed: int,
    kind: str,
    mutations: int,
    rate_k: int = 10,
    pair_seed: int = 0,
) -> StudyRecord:
    """Score one checkpoint with every metric; failures become NA fields."""

    def guarded(name: str, fn):
        try:
            return fn()
        except TaxometerError as exc:
            logger.warning("%s @ %s/%d/%d: %s -> NA (%s)", name, dataset, seed, mutations, type(exc).__name__, exc)
            return None

    f1 = guarded("f1", lambda: triplet_prf(degraded, original).f1)
    correlation = guarded(
        "csc", lambda: csc(degraded, providers.similarity, PairSample.for_taxonomy(degraded, seed=pair_seed))
    )
    sp_result = guarded("sp", lambda: semantic_proximity(degraded, providers.similarity))
    nliv_s = guarded("nliv_s", lambda: nliv(degraded, providers.nli, "strong", providers.cache).score)
    nliv_w = guarded("nliv_w", lambda: nliv(degraded, providers.nli, "weak", providers.cache).score)
    rate = None
    if providers.fill_mask is not None:
        rate_result = guarded("rate", lambda: rate_score(degraded, providers.fill_mask, rate_k))
        rate = rate_result.score if rate_result is not None else None

    return StudyRecord(
        dataset=dataset,
        seed=seed,
        kind=kind,
        mutations=mutations,
        f1=f1,
        csc=correlation.tau if correlation is not None else None,
        csc_p=correlation.p_value if correlation is not None else None,
        nliv_s=nliv_s,
        nliv_w=nliv_w,
        sp=sp_result.ratio if sp_result is not None else None,
        rate=rate,
    )


# -- record persistence -----------------------------------------------------


def write_records_header(path: Path) -> None:
    path.write_text(",".join(RECORD_COLUMNS) + "\n", encoding="utf-8")


def read_records(path: str | Path) -> list[StudyRecord]:
    """Load a records CSV, ignoring a torn trailing line from a killed run."""
    path = Path(path)
    if not path.exists():
        return []
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    else:
        lines.pop()  # no trailing newline: the final line is torn
    records = []
    for line in lines[1:]:  # skip header
        try:
            records.append(StudyRecord.from_row(line))
        except (ParseError, ValueError):
            logger.warning("dropping malformed record row: %r", line[:80])
    return records


def run_study(
    cfg: StudyConfig,
    records_path: str | Path,
    *,
    stop_after: int | None = None,
) -> list[StudyRecord]:
    """Run (or resume) a study, appending records to ``records_path``.

    Tasks run in a deterministic order (dataset, kind, degradation index,
    checkpoint); each task's seed is derived from the config's base seed, so
    the record file is byte-identical across repeated and resumed runs.
    ``stop_after`` stops after writing that many new records (used to
    exercise kill/resume behavior).

    A checkpoint the mutation sampler cannot reach (trace truncated) gets no
    record; per-metric failures are logged and recorded as NA.
    """
    records_path = Path(records_path)
    providers = MetricProviders.from_config(cfg)

    existing = read_records(records_path)
    done = {r.key for r in existing}
    # Rewrite complete rows only, so a torn final line never corrupts resume.
    records_path.parent.mkdir(parents=True, exist_ok=True)
    with open(records_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        for record in existing:
            fh.write(record.to_row() + "\n")

    all_records = list(existing)
    written = 0
    with open(records_path, "a", encoding="utf-8") as fh:
        for dataset_name in sorted(cfg.datasets):
            spec = cfg.datasets[dataset_name]
            original = load_taxonomy(spec.path, spec.format, glosses=spec.glosses)
            n_degradations = cfg.degradations_for(original)
            for kind in cfg.kinds:
                for index in range(n_degradations):
                    seed = task_seed(cfg.base_seed, dataset_name, kind, index)
                    wanted = [c for c in cfg.schedule if (dataset_name, seed, c) not in done]
                    if not wanted:
                        continue
                    run = Degradation(original, cfg.schedule, kind, seed)
                    for count, snapshot in run.checkpoints():
                        if (dataset_name, seed, count) in done:
                            continue
                        record = score_taxonomy(
                            snapshot,
                            original,
                            providers,
                            dataset=dataset_name,
                            seed=seed,
                            kind=kind,
                            mutations=count,
                            rate_k=cfg.rate_k,
                        )
                        fh.write(record.to_row() + "\n")
                        fh.flush()
                        all_records.append(record)
                        done.add(record.key)
                        written += 1
                        if stop_after is not None and written >= stop_after:
                            return all_records
                    if run.trace.truncated:
                        logger.warning(
                            "degradation truncated at %d ops (%s, kind=%s, seed=%d)",
                            len(run.trace.ops), dataset_name, kind, seed,
                        )
    return all_records


# -- correlation reporting ----------------------------------------------------


@dataclass(frozen=True)
class CorrelationEntry:
    """Per-dataset correlation of one metric with F1; tau None when NA."""

    tau: float | None
    p_value: float | None
    stars: str
    n: int
    dropped: int

    def to_json(self) -> dict:
        return {"tau": self.tau, "p": self.p_value, "stars": self.stars, "n": self.n, "dropped": self.dropped}


def correlate(records: Iterable[StudyRecord], metric: str) -> dict[str, CorrelationEntry]:
    """Kendall tau-b between F1 and a metric column, per dataset.

    Records where either side is NA are dropped pairwise; datasets whose
    remaining pairs are too few or constant report an NA entry (mirroring
    the undefined correlations a constant metric produces).
    """
    if metric not in METRIC_COLUMNS and metric != "f1":
        raise ValueError(f"unknown metric column {metric!r} (expected one of {METRIC_COLUMNS})")
    by_dataset: dict[str, list[StudyRecord]] = {}
    for record in records:
        by_dataset.setdefault(record.dataset, []).append(record)

    report: dict[str, CorrelationEntry] = {}
    for dataset in sorted(by_dataset):
        rows = by_dataset[dataset]
        pairs = [
            (row.f1, getattr(row, metric))
            for row in rows
            if row.f1 is not None and getattr(row, metric) is not None
        ]
        dropped = len(rows) - len(pairs)
        if len(pairs) < 2:
            report[dataset] = CorrelationEntry(None, None, "", n=len(pairs), dropped=dropped)
            continue
        try:
            result = kendall_tau_b([p[0] for p in pairs], [p[1] for p in pairs])
        except DegenerateInputError:
            report[dataset] = CorrelationEntry(None, None, "", n=len(pairs), dropped=dropped)
            continue
        report[dataset] = CorrelationEntry(
            tau=result.tau, p_value=result.p_value, stars=result.stars, n=result.n, dropped=dropped
        )
    return report


def correlation_report(records: Iterable[StudyRecord], metrics: Sequence[str] = METRIC_COLUMNS) -> dict:
    """{dataset: {metric: {tau, p, stars, n, dropped}}} over all datasets."""
    records = list(records)
    if not records:
        raise AllNAError("no records to correlate")
    report: dict[str, dict[str, dict]] = {}
    for metric in metrics:
        for dataset, entry in correlate(records, metric).items():
            report.setdefault(dataset, {})[metric] = entry.to_json()
    return report


# -- RaTE baseline ---------------------------------------------------------------


@dataclass(frozen=True)
class RateResult:
    """Hit rate of true parents among top-k mask candidates; None when NA."""

    score: float | None
    hits: int
    edges: int
    provider_calls: int


def rate_score(taxonomy: Taxonomy, provider: FillMaskProvider | None, k: int = 10) -> RateResult:
    """Fraction of edges whose true parent appears in the child's top-k
    predicted parents.

    One provider call per distinct prompt; prompts repeat only for children
    with several parents, so on trees the call count equals the edge count.
    Returns an NA result when no provider is configured or the backend is
    unavailable (the baseline is optional).
    """
    if provider is None:
        return RateResult(score=None, hits=0, edges=0, provider_calls=0)
    edges = taxonomy.natural_edges()
    if not edges:
        return RateResult(score=None, hits=0, edges=0, provider_calls=0)

    cache: dict[str, set[str]] = {}
    hits = 0
    calls = 0
    try:
        for parent_id, child_id in edges:
            prompt = f"{lemma(taxonomy.concepts[child_id].name)} is a kind of {MASK_TOKEN}."
            candidates = cache.get(prompt)
            if candidates is None:
                calls += 1
                candidates = {lemma(c.token) for c in provider.fill_mask(prompt, k)}
                cache[prompt] = candidates
            if lemma(taxonomy.concepts[parent_id].name) in candidates:
                hits += 1
    except (BackendUnavailableError, MissingPromptError) as exc:
        logger.warning("RaTE unavailable: %s", exc)
        return RateResult(score=None, hits=0, edges=len(edges), provider_calls=calls)
    return RateResult(score=hits / len(edges), hits=hits, edges=len(edges), provider_calls=calls)


# -- NLI verification ----------------------------------------------------------


@dataclass(frozen=True)
class WindowPrf:
    """Binary PRF of edge-adequacy prediction within one similarity window."""

    lo: float
    hi: float
    prf: PRF | None
    positives: int
    negatives: int


def nli_verification(
    taxonomy: Taxonomy,
    provider: NLIProvider,
    mode: Mode,
    *,
    window: float = 0.1,
    threshold: float = 0.5,
    seed: int = 0,
    cache: JudgmentCache | None = None,
) -> list[WindowPrf]:
    """How well thresholded NLI separates true edges from unrelated pairs.

    Positives are the natural edges; negatives are up to |E| uniformly
    sampled ordered pairs of mutually unrelated concepts (one global sample,
    not resampled per window). Each pair counts as predicted-adequate when
    its relation probability reaches ``threshold``, and is assigned to the
    disjoint Wu-Palmer window its similarity falls into. Windows with no
    pairs report no PRF.
    """
    if not 0.0 < window <= 1.0:
        raise ValueError(f"window width must be in (0, 1], got {window!r}")
    positives = [(p, c) for p, c in taxonomy.natural_edges()]
    rng = random.Random(seed)
    ids = taxonomy.concept_ids
    negatives: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set(positives)
    budget = 50 * max(len(positives), 1)
    while len(negatives) < len(positives) and budget > 0:
        budget -= 1
        u = ids[rng.randrange(len(ids))]
        v = ids[rng.randrange(len(ids))]
        if (u, v) in seen:
            continue
        if u in taxonomy.ancestor_closure(v) or v in taxonomy.ancestor_closure(u):
            continue
        negatives.append((u, v))
        seen.add((u, v))

    labelled = [(pair, True) for pair in positives] + [(pair, False) for pair in negatives]
    prompts = [relation_prompt(taxonomy.concepts[p], taxonomy.concepts[c]) for (p, c), _ in labelled]
    judgments = provider.judge_batch([(pr.premise, pr.hypothesis) for pr in prompts])

    n_windows = math.ceil(round(1.0 / window, 9))
    counts = [[0, 0, 0, 0] for _ in range(n_windows)]  # tp, fp, fn, tn
    for ((parent_id, child_id), is_edge), judgment in zip(labelled, judgments):
        predicted = relation_probability(judgment, mode) >= threshold
        wps = taxonomy.wu_palmer(parent_id, child_id)
        index = min(n_windows - 1, max(0, math.ceil(wps / window - 1e-9) - 1))
        if is_edge and predicted:
            counts[index][0] += 1
        elif not is_edge and predicted:
            counts[index][1] += 1
        elif is_edge and not predicted:
            counts[index][2] += 1
        else:
            counts[index][3] += 1

    out = []
    for i, (tp, fp, fn, tn) in enumerate(counts):
        n_pos = tp + fn
        n_neg = fp + tn
        prf = PRF.from_counts(tp, fp, fn) if n_pos + n_neg else None
        out.append(WindowPrf(lo=i * window, hi=min(1.0, (i + 1) * window), prf=prf, positives=n_pos, negatives=n_neg))
    return out


# -- plot-data export -----------------------------------------------------------


def plot_data(records: Iterable[StudyRecord]) -> list[tuple[str, int, float]]:
    """Long-format (metric, mutations, normalized_score) rows for plotting.

    Scores are averaged per (metric, mutation count) over all datasets and
    seeds with NA dropped, then min-max normalized per metric across
    mutation counts.
    """
    sums: dict[str, dict[int, list[float]]] = {}
    for record in records:
        for metric in ("f1",) + METRIC_COLUMNS:
            value = getattr(record, metric)
            if value is None:
                continue
            sums.setdefault(metric, {}).setdefault(record.mutations, []).append(value)

    rows: list[tuple[str, int, float]] = []
    for metric in sorted(sums):
        means = {m: sum(vs) / len(vs) for m, vs in sums[metric].items()}
        lo, hi = min(means.values()), max(means.values())
        for mutations in sorted(means):
            normalized = 0.0 if hi == lo else (means[mutations] - lo) / (hi - lo)
            rows.append((metric, mutations, normalized))
    return rows
