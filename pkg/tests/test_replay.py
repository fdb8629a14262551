"""Session replay: determinism, record/lift conservation, aggregation,
and the synthetic-session generator."""

import json

import numpy as np
import pytest

from exoadapt.config import Config
from exoadapt.errors import InsufficientDataError, SchemaError
from exoadapt.replay import (
    SessionLog,
    aggregate,
    run_session,
    synth_cohort,
    synth_session,
)


def report_bytes(report):
    return json.dumps(report.to_dict(), sort_keys=True).encode()


class TestSynthSession:
    def test_seed_reproducibility(self):
        a = synth_session(seed=42)
        b = synth_session(seed=42)
        assert a.subject == b.subject
        assert a.events == b.events

    def test_different_seeds_differ(self):
        assert synth_session(seed=1).events != synth_session(seed=2).events

    def test_nine_lifts_three_rounds(self):
        log = synth_session(seed=5)
        assert log.n_lifts == 9
        truths = [ev["truth"] for ev in log.events if ev["type"] == "lift_onset"]
        assert sorted(truths[:3]) == ["heavy", "light", "medium"]  # one of each per round

    def test_cohort_partition(self):
        logs = synth_cohort(3, seed=9)
        assert [log.subject for log in logs] == ["S01", "S02", "S03"]
        assert logs[0].events != logs[1].events


class TestRunSession:
    def test_clean_session_fully_timely(self):
        report = run_session(synth_session(seed=11))
        assert report.metrics.accuracy == 1.0
        assert len(report.records) == 9
        assert all(m > 0 for m in report.latency_margins)
        assert len(report.commands) == 9
        assert all(c.source == "classified" for c in report.commands)

    def test_oracle_backend_fixes_flipped_outputs(self):
        cfg = Config()
        cfg.replay.backend = "oracle"
        noisy = synth_session(seed=13, flip_prob=0.9)
        report = run_session(noisy, cfg)
        assert report.metrics.accuracy == 1.0

    def test_one_delayed_classification(self):
        log = synth_session(seed=17, late_lifts=(4,))
        report = run_session(log)
        assert report.metrics.accuracy == pytest.approx(8 / 9)
        assert report.raw_accuracy == pytest.approx(1.0)  # late prediction is correct
        late_margins = [m for m in report.latency_margins if m <= 0]
        assert len(late_margins) == 1

    def test_replay_is_deterministic(self):
        log = synth_session(seed=23, flip_prob=0.3)
        assert report_bytes(run_session(log)) == report_bytes(run_session(log))

    def test_margin_sign_matches_timeliness(self):
        log = synth_session(seed=29, late_lifts=(0, 5))
        report = run_session(log)
        for record, margin in zip(report.records, report.latency_margins):
            assert (margin > 0) == record.timely

    def test_conservation(self):
        log = synth_session(seed=31, flip_prob=0.4, late_lifts=(2,))
        report = run_session(log)
        total = int(report.metrics.confusion.sum() + report.metrics.late.sum())
        assert total == log.n_lifts == len(report.records)

    def test_flip_probability_drives_accuracy(self):
        accs = []
        for seed in range(1000):
            rep = run_session(synth_session(seed=seed, flip_prob=0.2))
            accs.append(rep.metrics.accuracy)
        assert np.mean(accs) == pytest.approx(0.8, abs=0.03)

    def test_malformed_log_names_first_bad_event(self):
        events = [
            {"type": "frame", "t": 0.1, "detections": []},
            {"type": "lift_onset", "t": 0.2, "truth": "granite"},
        ]
        with pytest.raises(SchemaError, match="event 1"):
            SessionLog(subject="S01", events=events).validate()

    def test_decreasing_timestamps_rejected(self):
        events = [
            {"type": "lift_onset", "t": 2.0, "truth": "light"},
            {"type": "lift_end", "t": 1.0},
        ]
        with pytest.raises(SchemaError, match="event 1"):
            SessionLog(subject="S01", events=events).validate()

    def test_unclosed_lift_rejected(self):
        events = [{"type": "lift_onset", "t": 1.0, "truth": "light"}]
        with pytest.raises(SchemaError, match="unclosed"):
            SessionLog(subject="S01", events=events).validate()

    def test_liftless_session_rejected(self):
        log = SessionLog(subject="S01", events=[{"type": "distance", "t": 0.1, "distance_m": 2.0}])
        with pytest.raises(InsufficientDataError):
            run_session(log)


class TestAggregate:
    def test_mean_accuracy(self):
        r1 = run_session(synth_session(subject="S01", seed=41))
        r2 = run_session(synth_session(subject="S02", seed=43, flip_prob=1.0))
        cohort = aggregate([r1, r2])
        assert cohort.mean_accuracy == pytest.approx(
            (r1.metrics.accuracy + r2.metrics.accuracy) / 2
        )
        assert cohort.per_subject["S01"] == r1.metrics.accuracy

    def test_pooled_matrix_is_entrywise_sum(self):
        reports = [
            run_session(synth_session(subject=f"S{i:02d}", seed=i, flip_prob=0.5))
            for i in range(4)
        ]
        cohort = aggregate(reports)
        expected = sum(r.metrics.confusion for r in reports)
        np.testing.assert_array_equal(cohort.pooled_confusion, expected)

    def test_empty_rejected(self):
        with pytest.raises(SchemaError):
            aggregate([])

    def test_cohort_constructed_to_pool_to_paper_accuracy(self):
        # 12 subjects x 9 lifts with 19 deterministic misclassifications:
        # 89/108 correct pools to 82.41% within a hundredth
        flips = [(0, 5)] * 7 + [(4,)] * 5
        reports = [
            run_session(synth_session(subject=f"S{i + 1:02d}", seed=100 + i, flip_lifts=f))
            for i, f in enumerate(flips)
        ]
        cohort = aggregate(reports)
        total = int(cohort.pooled_confusion.sum() + cohort.pooled_late.sum())
        assert total == 108
        assert int(np.trace(cohort.pooled_confusion)) == 89
        assert cohort.pooled_accuracy == pytest.approx(0.8241, abs=0.01)
