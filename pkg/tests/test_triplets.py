import numpy as np
import pytest

from orderembed.orders import WINDOW, build_all_windows
from orderembed.triplets import (
    DaySplit,
    load_triplets,
    sample_triplets,
    save_triplets,
    split_days,
    validate_triplets,
)

from conftest import random_log


class TestDaySplit:
    def test_ratio_4_to_1(self):
        split = split_days(range(300), seed=0)
        assert len(split.test_days) == 60
        assert len(split.train_days) == 240
        split.validate(range(300))

    def test_five_days_min(self):
        split = split_days(range(5), seed=1)
        assert len(split.test_days) == 1
        assert len(split.train_days) == 4
        with pytest.raises(ValueError, match="at least 5"):
            split_days(range(4), seed=1)

    def test_deterministic_but_seed_dependent(self):
        a = split_days(range(25), seed=3)
        b = split_days(range(25), seed=3)
        assert a.test_days == b.test_days
        seen = {frozenset(split_days(range(25), seed=s).test_days)
                for s in range(20)}
        assert len(seen) > 1

    def test_test_share_never_empty_or_full(self):
        for n in range(5, 30):
            split = split_days(range(n), seed=0)
            assert 1 <= len(split.test_days) <= n - 1
            assert split.train_days | split.test_days == set(range(n))

    def test_overlap_rejected(self):
        with pytest.raises(ValueError, match="overlap"):
            DaySplit({1, 2}, {2, 3}).validate()

    def test_round_trip(self):
        split = split_days(range(10), seed=4)
        back = DaySplit.from_dict(split.to_dict())
        assert back.train_days == split.train_days
        assert back.test_days == split.test_days


class TestSampling:
    def setup_method(self):
        self.log = random_log(31, n_agents=3, n_days=2,
                              orders_per_agent_day=400)
        self.windows = build_all_windows(self.log)

    def test_shape_and_range(self):
        trips = sample_triplets(self.windows, count=500, seed=0)
        assert trips.shape == (500, 3)
        assert trips.min() >= 0 and trips.max() < len(self.windows)

    def test_invariants_hold(self):
        trips = sample_triplets(self.windows, count=500, seed=0)
        validate_triplets(self.windows, trips)
        agent = self.windows.agent
        day = self.windows.day
        start = self.windows.start_time
        a, p, n = trips.T
        assert (agent[a] == agent[p]).all()
        assert (agent[a] != agent[n]).all()
        assert (day[a] == day[p]).all() and (day[a] == day[n]).all()
        assert (np.abs(start[p] - start[a]) <= 7200.0).all()
        assert (np.abs(start[n] - start[a]) <= 7200.0).all()

    def test_anchor_positive_never_share_orders(self):
        # overlapping windows exist at stride < 50, so this is the
        # stressful configuration for the no-shared-order rule
        windows = build_all_windows(self.log, stride=10)
        trips = sample_triplets(windows, count=400, seed=1)
        for a, p, _ in trips:
            assert len(np.intersect1d(windows.rows[a], windows.rows[p])) == 0

    def test_deterministic(self):
        a = sample_triplets(self.windows, count=100, seed=7)
        b = sample_triplets(self.windows, count=100, seed=7)
        assert np.array_equal(a, b)
        c = sample_triplets(self.windows, count=100, seed=8)
        assert not np.array_equal(a, c)

    def test_single_agent_has_no_negatives(self):
        log = random_log(32, n_agents=1, n_days=1, orders_per_agent_day=500)
        windows = build_all_windows(log)
        with pytest.raises(ValueError, match="no window admits"):
            sample_triplets(windows, count=10, seed=0)

    def test_tight_horizon_limits_candidates(self):
        # dense log so same-agent windows exist within 600s of each other
        log = random_log(33, n_agents=3, n_days=1, orders_per_agent_day=4000)
        windows = build_all_windows(log)
        trips = sample_triplets(windows, count=200, seed=2, horizon_s=600.0)
        start = windows.start_time
        a, p, n = trips.T
        assert (np.abs(start[p] - start[a]) <= 600.0).all()
        assert (np.abs(start[n] - start[a]) <= 600.0).all()
        validate_triplets(windows, trips, horizon_s=600.0)

    def test_local_windows_rejected_when_horizon_too_small(self):
        # stride-50 windows of a slow agent are farther apart than 1s
        with pytest.raises(ValueError):
            sample_triplets(self.windows, count=10, seed=0, horizon_s=1e-6)

    def test_validate_catches_corruption(self):
        trips = sample_triplets(self.windows, count=50, seed=3)
        agent = self.windows.agent
        bad = trips.copy()
        # swap in a negative from the anchor's own agent
        a0 = bad[0, 0]
        same = np.flatnonzero(agent == agent[a0])
        bad[0, 2] = same[0]
        with pytest.raises(ValueError, match="negative from the anchor"):
            validate_triplets(self.windows, bad)

    def test_validate_catches_shared_orders(self):
        windows = build_all_windows(self.log, stride=10)
        trips = sample_triplets(windows, count=50, seed=4)
        group, pos = windows.group_positions()
        a0 = trips[0, 0]
        overlapping = np.flatnonzero(
            (group == group[a0]) & (np.abs(pos - pos[a0]) < WINDOW)
            & (np.arange(len(windows)) != a0))
        assert len(overlapping) > 0
        bad = trips.copy()
        bad[0, 1] = overlapping[0]
        with pytest.raises(ValueError, match="share orders"):
            validate_triplets(windows, bad)

    def test_csv_round_trip(self, tmp_path):
        trips = sample_triplets(self.windows, count=120, seed=5)
        path = tmp_path / "trips.csv"
        save_triplets(path, trips)
        assert np.array_equal(load_triplets(path), trips)

    def test_anchor_coverage(self):
        """With many draws, most eligible anchors should appear."""
        trips = sample_triplets(self.windows, count=2000, seed=6)
        unique_anchors = len(np.unique(trips[:, 0]))
        assert unique_anchors > 0.5 * len(self.windows)
