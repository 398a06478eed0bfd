import io

import pytest

from fronsim.errors import ConfigurationError, UndefinedMetricError
from fronsim.metrics import (
    EpisodeMetrics,
    EpisodeRecord,
    RobotStepLog,
    StepLog,
    count_recoveries,
    episode_metrics,
    objective,
    overlap,
    planner_fraction,
    read_jsonl,
    summarize,
    write_jsonl,
)


def robot_log(pose, switch=1, recovering=False, risk=0, contact=False, ok=True, p=0.5, action=4):
    return RobotStepLog(
        pose=pose, action=action, switch=switch, p=p, recovering=recovering,
        risk_events=risk, contact=contact, planner_ok=ok,
    )


def make_record(paths, t_star=None, success=False, horizon=100, newly=None):
    """paths[i] is robot i's pose sequence; all must share a length."""
    n_steps = len(paths[0])
    steps = []
    for t in range(n_steps):
        steps.append(
            StepLog(
                t=t,
                robots=tuple(robot_log(paths[i][t]) for i in range(len(paths))),
                newly_known=newly[t] if newly else 0,
            )
        )
    return EpisodeRecord(
        width=10, height=10, n_robots=len(paths), seed=0, variant="full",
        horizon=horizon, steps=steps, t_star=t_star, success=success,
    )


class TestOverlap:
    def test_hand_computed_example(self):
        # A visits {x}, B visits {x, y}, C visits {z}: one of three cells shared.
        record = make_record(
            [[(0, 0), (0, 0)], [(0, 0), (0, 1)], [(5, 5), (5, 5)]],
            t_star=2, success=True,
        )
        assert overlap(record) == pytest.approx(1 / 3)

    def test_disjoint_paths_zero(self):
        record = make_record(
            [[(0, 0), (0, 1)], [(9, 9), (9, 8)]], t_star=2, success=True
        )
        assert overlap(record) == 0.0

    def test_visits_at_or_after_t_star_excluded(self):
        record = make_record(
            [[(0, 0), (5, 5)], [(1, 1), (5, 5)]], t_star=1, success=True
        )
        # Only step 0 counts; the shared (5,5) visit is at t = t_star.
        assert overlap(record) == 0.0

    def test_failed_episode_uses_horizon(self):
        record = make_record([[(0, 0)], [(0, 0)]], t_star=None, success=False)
        assert overlap(record) == 1.0

    def test_zero_visits_undefined(self):
        record = make_record([[]], t_star=0, success=True)
        with pytest.raises(UndefinedMetricError):
            overlap(record)

    def test_matches_bruteforce_tabulation(self, rng):
        for _ in range(30):
            n_robots = int(rng.integers(1, 5))
            n_steps = int(rng.integers(1, 30))
            paths = [
                [(int(rng.integers(6)), int(rng.integers(6))) for _ in range(n_steps)]
                for _ in range(n_robots)
            ]
            t_star = int(rng.integers(1, n_steps + 1))
            record = make_record(paths, t_star=t_star, success=True)

            kappa = {}
            for i, path in enumerate(paths):
                for t, cell in enumerate(path):
                    if t < t_star:
                        kappa.setdefault(cell, set()).add(i)
            expected = sum(1 for s in kappa.values() if len(s) >= 2) / len(kappa)
            assert overlap(record) == pytest.approx(expected)

    def test_monotone_under_extra_shared_visits(self, rng):
        base_paths = [[(0, 0), (0, 1), (0, 2)], [(3, 3), (3, 4), (3, 5)]]
        record = make_record(base_paths, t_star=3, success=True)
        before = overlap(record)
        shared_paths = [p + [(7, 7)] for p in base_paths]
        record2 = make_record(shared_paths, t_star=4, success=True)
        assert overlap(record2) >= before


class TestObjective:
    def test_pure_time(self):
        assert objective(100, 0.5, alpha=1.0, lambda_omega=0.0) == 100.0

    def test_degenerate_start(self):
        assert objective(0, 0.0, alpha=1.0, lambda_omega=0.1) == 0.0

    def test_linear_form(self, rng):
        for _ in range(20):
            t_star = int(rng.integers(0, 500))
            omega = float(rng.random())
            assert objective(t_star, omega, 1.0, 0.1) == pytest.approx(t_star + 0.1 * omega)

    def test_requires_ordering(self):
        with pytest.raises(ConfigurationError):
            objective(10, 0.5, alpha=1.0, lambda_omega=2.0)


class TestEpisodeMetricsAndSummary:
    def test_success_failure_mix(self):
        good = make_record([[(0, 0)] * 10], t_star=10, success=True)
        bad = make_record([[(0, 0)] * 12], t_star=None, success=False)
        m = [episode_metrics(good), episode_metrics(bad)]
        agg = summarize(m)
        assert agg.sr == 0.5
        assert agg.el_mean == 10.0

    def test_identical_episodes_zero_std(self):
        rec = make_record([[(0, 0)] * 5], t_star=5, success=True)
        agg = summarize([episode_metrics(rec)] * 4)
        assert agg.overlap_std == 0.0
        assert agg.el_std == 0.0

    def test_matches_independent_aggregation(self, rng):
        batch = []
        for _ in range(20):
            n = int(rng.integers(2, 20))
            success = bool(rng.integers(2))
            rec = make_record(
                [[(int(rng.integers(4)), int(rng.integers(4))) for _ in range(n)]],
                t_star=n if success else None,
                success=success,
            )
            batch.append(episode_metrics(rec))
        agg = summarize(batch)

        els = [m.el for m in batch if m.success]
        assert agg.sr == pytest.approx(sum(m.success for m in batch) / len(batch))
        if els:
            mean = sum(els) / len(els)
            assert agg.el_mean == pytest.approx(mean)
            if len(els) > 1:
                var = sum((e - mean) ** 2 for e in els) / (len(els) - 1)
                assert agg.el_std == pytest.approx(var**0.5)
        fractions = [m.planner_fraction for m in batch]
        assert agg.planner_fraction_mean == pytest.approx(sum(fractions) / len(fractions))

    def test_recovery_activation_counting(self):
        steps = []
        flags = [False, True, True, False, True]
        for t, f in enumerate(flags):
            steps.append(StepLog(t=t, robots=(robot_log((0, 0), recovering=f),), newly_known=0))
        record = EpisodeRecord(
            width=5, height=5, n_robots=1, seed=0, variant="full", horizon=10, steps=steps
        )
        assert count_recoveries(record) == 2

    def test_planner_fraction(self):
        steps = [
            StepLog(t=0, robots=(robot_log((0, 0), switch=1), robot_log((1, 1), switch=0)), newly_known=0),
            StepLog(t=1, robots=(robot_log((0, 0), switch=1), robot_log((1, 1), switch=1)), newly_known=0),
        ]
        record = EpisodeRecord(
            width=5, height=5, n_robots=2, seed=0, variant="full", horizon=10, steps=steps
        )
        assert planner_fraction(record) == pytest.approx(3 / 4)

    def test_empty_record_planner_fraction_zero(self):
        record = make_record([[]], t_star=0, success=True)
        assert planner_fraction(record) == 0.0


class TestJsonlRoundTrip:
    def test_bit_exact_metrics_after_round_trip(self, rng):
        paths = [
            [(int(rng.integers(8)), int(rng.integers(8))) for _ in range(15)]
            for _ in range(3)
        ]
        record = make_record(paths, t_star=12, success=True, newly=list(range(15)))
        buf = io.StringIO()
        write_jsonl(record, buf)
        buf.seek(0)
        loaded = read_jsonl(buf)
        assert loaded == record
        assert episode_metrics(loaded) == episode_metrics(record)

    def test_serialization_is_stable(self):
        record = make_record([[(1, 2), (1, 3)]], t_star=2, success=True)
        a, b = io.StringIO(), io.StringIO()
        write_jsonl(record, a)
        write_jsonl(record, b)
        assert a.getvalue() == b.getvalue()
