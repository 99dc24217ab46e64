"""Corpus evaluation: generator recipes, metrics, parallel equivalence."""

import pytest

from flsolve import (
    DatasetFile,
    EvalReport,
    GeneratorSpec,
    bundled_examples,
    evaluate_corpus,
    strip_computed_comments,
)


@pytest.fixture(scope="module")
def fixture_ds():
    return bundled_examples()


class TestGeneratorSpec:
    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            GeneratorSpec("replay")

    def test_gold_replay_strips_computed_comments(self, fixture_ds):
        record = fixture_ds.records[0]
        gen = GeneratorSpec("gold-replay").build(record)
        assert gen.text == strip_computed_comments(record.gold_program)

    def test_scripted_ignores_the_record(self, fixture_ds):
        spec = GeneratorSpec("scripted", text="var1 = [find](a) # 1\n[return](var1)")
        texts = {spec.build(r).text for r in fixture_ds.records}
        assert texts == {"var1 = [find](a) # 1\n[return](var1)"}

    def test_empty_produces_nothing(self, fixture_ds):
        gen = GeneratorSpec("empty").build(fixture_ds.records[0])
        assert gen.next_chunk("anything") == ""


class TestGoldReplayEvaluation:
    def test_full_marks(self, fixture_ds):
        report = evaluate_corpus(fixture_ds, GeneratorSpec("gold-replay"))
        assert report.total == 5
        assert report.correct == 5
        assert report.accuracy == 100.0
        assert report.syntax_error_rate == 0.0
        assert all(r.correct and r.compiled for r in report.per_problem)
        assert all(r.error_kind is None for r in report.per_problem)

    def test_step_buckets(self, fixture_ds):
        report = evaluate_corpus(fixture_ds, GeneratorSpec("gold-replay"))
        assert report.error_rate_by_steps == {6: (0, 1), 3: (0, 1), 5: (0, 3)}

    def test_chunked_replay_is_equivalent(self, fixture_ds):
        whole = evaluate_corpus(fixture_ds, GeneratorSpec("gold-replay"))
        chunked = evaluate_corpus(fixture_ds, GeneratorSpec("gold-replay", chunk_size=3))
        assert chunked == whole

    def test_worker_pool_matches_serial(self, fixture_ds):
        spec = GeneratorSpec("gold-replay")
        assert evaluate_corpus(fixture_ds, spec, workers=2) == evaluate_corpus(
            fixture_ds, spec, workers=1
        )


class TestDegenerateGenerators:
    def test_empty_generator_is_all_syntax_errors(self, fixture_ds):
        report = evaluate_corpus(fixture_ds, GeneratorSpec("empty"))
        assert report.accuracy == 0.0
        assert report.syntax_error_rate == 100.0
        assert all(r.error_kind == "generator-stalled" for r in report.per_problem)
        assert all(not r.compiled for r in report.per_problem)

    def test_scripted_answer_matches_one_problem(self, fixture_ds):
        goal = next(r for r in fixture_ds.records if r.id == "goal-count")
        spec = GeneratorSpec("scripted", text=strip_computed_comments(goal.gold_program))
        report = evaluate_corpus(fixture_ds, spec)
        assert report.syntax_error_rate == 0.0  # it always compiles
        assert report.correct == 1
        assert report.accuracy == 20.0
        by_id = {r.id: r for r in report.per_problem}
        assert by_id["goal-count"].correct
        assert not by_id["road-repair"].correct


class TestReportShape:
    def test_json_layout(self, fixture_ds):
        payload = evaluate_corpus(fixture_ds, GeneratorSpec("gold-replay")).to_json()
        assert payload["accuracy"] == 100.0
        assert payload["error_rate_by_steps"]["5"] == {"errors": 0, "total": 3, "rate": 0.0}
        assert len(payload["per_problem"]) == 5
        first = payload["per_problem"][0]
        assert first["id"] == "action-figures"
        assert first["answer"] == "11"
        assert first["reward"]["total"] == "5"

    def test_empty_dataset(self):
        report = evaluate_corpus(DatasetFile((), "inline"), GeneratorSpec("empty"))
        assert isinstance(report, EvalReport)
        assert report.total == 0
        assert report.accuracy == 0.0
        assert report.syntax_error_rate == 0.0
