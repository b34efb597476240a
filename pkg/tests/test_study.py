"""Study orchestration: records, resume determinism, correlation, baselines."""

from __future__ import annotations

import json
import random

import pytest

from taxometer import (
    MockFillMaskProvider,
    MockNLIProvider,
    MockSimilarityProvider,
    StudyConfig,
    StudyRecord,
    Taxonomy,
    correlate,
    correlation_report,
    nli_verification,
    rate_score,
    run_study,
    save_taxonomy_json,
)
from taxometer.errors import AllNAError
from taxometer.study import (
    DatasetSpec,
    MetricProviders,
    RECORD_COLUMNS,
    plot_data,
    read_records,
    score_taxonomy,
    task_seed,
)

from generators import bushy_tree_taxonomy, random_tree_taxonomy


def _records(values, dataset="d", kind="any"):
    """StudyRecords with (f1, metric-dict) pairs for correlation tests."""
    rows = []
    for i, (f1, metrics) in enumerate(values):
        rows.append(
            StudyRecord(
                dataset=dataset,
                seed=i,
                kind=kind,
                mutations=1,
                f1=f1,
                csc=metrics.get("csc"),
                csc_p=None,
                nliv_s=metrics.get("nliv_s"),
                nliv_w=metrics.get("nliv_w"),
                sp=metrics.get("sp"),
                rate=metrics.get("rate"),
            )
        )
    return rows


class TestCorrelate:
    def test_metric_equal_to_f1(self):
        rows = _records([(x / 10, {"csc": x / 10}) for x in range(8)])
        entry = correlate(rows, "csc")["d"]
        assert entry.tau == 1.0

    def test_metric_negated(self):
        rows = _records([(x / 10, {"csc": -x / 10}) for x in range(8)])
        assert correlate(rows, "csc")["d"].tau == -1.0

    def test_constant_metric_is_na(self):
        rows = _records([(x / 10, {"csc": 0.5}) for x in range(8)])
        entry = correlate(rows, "csc")["d"]
        assert entry.tau is None
        assert entry.stars == ""

    def test_na_rows_dropped_pairwise(self):
        rows = _records(
            [(0.1, {"csc": 0.2}), (0.5, {"csc": None}), (0.9, {"csc": 0.8}), (None, {"csc": 0.5})]
        )
        entry = correlate(rows, "csc")["d"]
        assert entry.n == 2
        assert entry.dropped == 2
        assert entry.n + entry.dropped == len(rows)

    def test_unknown_metric(self):
        with pytest.raises(ValueError):
            correlate([], "bogus")

    def test_report_covers_all_metrics(self):
        rows = _records([(x / 10, {"csc": x / 10, "sp": 0.5}) for x in range(5)])
        report = correlation_report(rows)
        assert set(report["d"]) == {"csc", "nliv_s", "nliv_w", "sp", "rate"}
        assert report["d"]["csc"]["tau"] == 1.0
        assert report["d"]["sp"]["tau"] is None

    def test_empty_records_rejected(self):
        with pytest.raises(AllNAError):
            correlation_report([])


class TestRateScore:
    def test_vocabulary_containing_all_parents_scores_one(self, chain3):
        names = [c.name for c in chain3.concepts.values() if not c.is_pseudo]
        provider = MockFillMaskProvider({name: 1.0 for name in names})
        result = rate_score(chain3, provider, k=len(names))
        assert result.score == 1.0

    def test_unrelated_vocabulary_scores_zero(self, chain3):
        provider = MockFillMaskProvider({"zebra": 0.9, "cloud": 0.8})
        result = rate_score(chain3, provider, k=5)
        assert result.score == 0.0

    def test_no_provider_is_na(self, chain3):
        assert rate_score(chain3, None).score is None

    def test_one_call_per_edge_on_trees(self):
        rng = random.Random(14)
        t = random_tree_taxonomy(rng, 20)
        provider = MockFillMaskProvider({"concept 0": 1.0})
        result = rate_score(t, provider, k=3)
        assert result.provider_calls == result.edges == len(t.natural_edges())

    def test_score_non_decreasing_in_k(self):
        rng = random.Random(15)
        t = random_tree_taxonomy(rng, 15)
        vocab = {f"concept {i}": rng.random() for i in range(15)}
        vocab.update({f"junk{i}": 2.0 for i in range(3)})  # crowd out low ranks
        provider = MockFillMaskProvider(vocab)
        scores = [rate_score(t, provider, k=k).score for k in (1, 3, 5, 10, 20)]
        assert all(a <= b for a, b in zip(scores, scores[1:]))


class TestNliVerification:
    def test_threshold_zero_maximizes_recall(self, star4):
        provider = MockNLIProvider(default=(0.4, 0.3, 0.3))
        windows = nli_verification(star4, provider, "strong", threshold=0.0, seed=1)
        for w in windows:
            if w.positives:
                assert w.prf.recall == 1.0

    def test_threshold_above_one_kills_recall(self, star4):
        provider = MockNLIProvider(default=(0.4, 0.3, 0.3))
        windows = nli_verification(star4, provider, "strong", threshold=1.01, seed=1)
        for w in windows:
            if w.positives:
                assert w.prf.recall == 0.0

    def test_perfect_oracle(self):
        rng = random.Random(16)
        t = bushy_tree_taxonomy(rng, 18)
        true_edges = set(t.natural_edges())
        prompts_of_edges = set()
        from taxometer import relation_prompt

        for p, c in true_edges:
            pr = relation_prompt(t.concepts[p], t.concepts[c])
            prompts_of_edges.add((pr.premise, pr.hypothesis))

        def fn(premise, hypothesis):
            if (premise, hypothesis) in prompts_of_edges:
                return (0.0, 0.0, 1.0)
            return (1.0, 0.0, 0.0)

        windows = nli_verification(t, MockNLIProvider(fn=fn), "strong", seed=2)
        for w in windows:
            if w.positives or w.negatives:
                if w.positives:
                    assert w.prf.recall == 1.0
                    assert w.prf.precision == 1.0
                    assert w.prf.f1 == 1.0

    def test_negatives_are_unrelated_non_edges(self, star4):
        provider = MockNLIProvider()
        windows = nli_verification(star4, provider, "strong", seed=3)
        total_negatives = sum(w.negatives for w in windows)
        assert total_negatives <= len(star4.natural_edges())

    def test_window_partition_covers_unit_interval(self, star4):
        windows = nli_verification(star4, MockNLIProvider(), "strong", seed=4, window=0.25)
        assert len(windows) == 4
        assert windows[0].lo == 0.0
        assert windows[-1].hi == 1.0


@pytest.fixture
def study_setup(tmp_path):
    rng = random.Random(20)
    t = bushy_tree_taxonomy(rng, 24)
    dataset_path = tmp_path / "toy.json"
    save_taxonomy_json(t, dataset_path)
    cfg = StudyConfig(
        datasets={"toy": DatasetSpec(path=str(dataset_path))},
        kinds=("any",),
        schedule=(1, 4, 16),
        degradations=3,
        base_seed=7,
        fill_mask={"backend": "mock", "vocabulary": {"concept 0": 1.0, "concept 1": 0.9}},
    )
    return cfg, tmp_path


class TestRunStudy:
    def test_record_cardinality_and_columns(self, study_setup):
        cfg, tmp_path = study_setup
        records_path = tmp_path / "records.csv"
        records = run_study(cfg, records_path)
        assert len(records) == 3 * 3  # degradations x checkpoints
        header = records_path.read_text().splitlines()[0]
        assert header == ",".join(RECORD_COLUMNS)
        assert {r.mutations for r in records} == {1, 4, 16}

    def test_reruns_are_byte_identical(self, study_setup):
        cfg, tmp_path = study_setup
        first = tmp_path / "a.csv"
        second = tmp_path / "b.csv"
        run_study(cfg, first)
        run_study(cfg, second)
        assert first.read_bytes() == second.read_bytes()

    def test_kill_and_resume_is_byte_identical(self, study_setup):
        cfg, tmp_path = study_setup
        full = tmp_path / "full.csv"
        broken = tmp_path / "resumed.csv"
        run_study(cfg, full)
        run_study(cfg, broken, stop_after=4)
        assert len(read_records(broken)) == 4
        run_study(cfg, broken)
        assert broken.read_bytes() == full.read_bytes()

    def test_resume_tolerates_torn_final_line(self, study_setup):
        cfg, tmp_path = study_setup
        full = tmp_path / "full.csv"
        torn = tmp_path / "torn.csv"
        run_study(cfg, full)
        run_study(cfg, torn, stop_after=4)
        content = torn.read_bytes()
        torn.write_bytes(content[:-7])  # cut mid-row, no trailing newline
        run_study(cfg, torn)
        assert torn.read_bytes() == full.read_bytes()

    def test_rate_column_present_with_mock_vocab(self, study_setup):
        cfg, tmp_path = study_setup
        records = run_study(cfg, tmp_path / "records.csv")
        assert all(r.rate is not None for r in records)

    def test_records_round_trip_through_csv(self, study_setup):
        cfg, tmp_path = study_setup
        records_path = tmp_path / "records.csv"
        records = run_study(cfg, records_path)
        assert read_records(records_path) == records


class TestStudyConfig:
    def test_from_json_file(self, tmp_path):
        config_path = tmp_path / "study.json"
        config_path.write_text(
            json.dumps(
                {
                    "datasets": {"toy": {"path": "toy.json"}},
                    "kinds": ["any", "non-leaf"],
                    "schedule": [1, 8],
                    "degradations": 2,
                }
            )
        )
        cfg = StudyConfig.from_file(config_path)
        assert cfg.kinds == ("any", "non_leaf")
        assert cfg.schedule == (1, 8)

    def test_unknown_keys_rejected(self, tmp_path):
        config_path = tmp_path / "study.json"
        config_path.write_text(json.dumps({"datasets": {"t": "x.json"}, "typo_key": 1}))
        from taxometer.errors import ParseError

        with pytest.raises(ParseError):
            StudyConfig.from_file(config_path)

    def test_degradation_default_by_size(self):
        from taxometer import Concept

        rng = random.Random(30)
        small = bushy_tree_taxonomy(rng, 20)
        big = Taxonomy.build(
            [Concept(f"c{i}", f"c{i}") for i in range(2101)],
            [("c0", f"c{i}") for i in range(1, 2101)],
        )
        cfg = StudyConfig(datasets={"d": DatasetSpec(path="x")})
        assert cfg.degradations_for(small) == 100
        assert cfg.degradations_for(big) == 50
        assert StudyConfig(datasets={"d": DatasetSpec(path="x")}, degradations=7).degradations_for(small) == 7

    def test_task_seed_stability(self):
        assert task_seed(0, "sf", "any", 3) == task_seed(0, "sf", "any", 3)
        assert task_seed(0, "sf", "any", 3) != task_seed(0, "sf", "any", 4)
        assert task_seed(0, "sf", "any", 3) != task_seed(1, "sf", "any", 3)
        assert task_seed(0, "sf", "any", 3) != task_seed(0, "me", "any", 3)


class TestPlotData:
    def test_long_format_min_max_normalized(self):
        rows = _records(
            [(1.0, {"csc": 0.9}), (0.6, {"csc": 0.5}), (0.2, {"csc": 0.3})],
        )
        rows[0] = StudyRecord(**{**rows[0].__dict__, "mutations": 1})
        rows[1] = StudyRecord(**{**rows[1].__dict__, "mutations": 8})
        rows[2] = StudyRecord(**{**rows[2].__dict__, "mutations": 64})
        data = plot_data(rows)
        by_metric = {}
        for metric, mutations, score in data:
            by_metric.setdefault(metric, {})[mutations] = score
        assert by_metric["f1"][1] == 1.0
        assert by_metric["f1"][64] == 0.0
        assert by_metric["csc"][1] == 1.0
        assert by_metric["csc"][64] == 0.0
        assert 0.0 < by_metric["csc"][8] < 1.0


class TestScoreTaxonomy:
    def test_failures_become_na(self, chain3):
        providers = MetricProviders(
            similarity=MockSimilarityProvider(override=lambda a, b: 0.5),  # constant: CSC degenerate
            nli=MockNLIProvider(),
            fill_mask=None,
        )
        record = score_taxonomy(
            chain3, chain3, providers, dataset="d", seed=1, kind="any", mutations=1
        )
        assert record.f1 == 1.0
        assert record.csc is None  # degenerate similarity
        assert record.sp is None  # chain has no sibling groups
        assert record.nliv_s is not None
        assert record.rate is None
