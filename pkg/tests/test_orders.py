import numpy as np
import pytest

from orderembed.orders import (
    WINDOW,
    MarketOrder,
    OrderLog,
    Sample,
    WindowSet,
    build_all_windows,
    build_windows,
)

from conftest import random_log


def make_order(**overrides) -> MarketOrder:
    base = dict(t=100.0, q_filled=5, q_intended=8, side=1, modif=0,
                best_bid=10_000, best_ask=10_002, bid_qty=40, ask_qty=55,
                agent=3, day=1)
    base.update(overrides)
    return MarketOrder(**base)


class TestMarketOrder:
    def test_valid_order_passes(self):
        make_order().validate()

    @pytest.mark.parametrize("bad", [
        dict(t=-1.0), dict(t=28801.0), dict(q_filled=0),
        dict(q_filled=9, q_intended=8), dict(side=0), dict(side=2),
        dict(modif=2), dict(best_ask=10_000), dict(best_ask=9_999),
        dict(bid_qty=-1), dict(ask_qty=-1),
    ])
    def test_invalid_order_raises(self, bad):
        with pytest.raises(ValueError):
            make_order(**bad).validate()

    def test_full_fill_allowed(self):
        make_order(q_filled=8, q_intended=8).validate()


class TestOrderLog:
    def test_round_trip_via_orders(self):
        orders = [make_order(t=float(i), agent=i % 2) for i in range(5)]
        log = OrderLog.from_orders(orders)
        assert len(log) == 5
        assert log.order(3) == orders[3]

    def test_vectorized_validate_matches_per_order(self):
        log = random_log(0)
        log.validate()
        for i in range(0, len(log), 97):
            log.order(i).validate()

    def test_vectorized_validate_catches_bad_row(self):
        log = random_log(1)
        log.q_filled[7] = log.q_intended[7] + 1
        with pytest.raises(ValueError):
            log.validate()
        with pytest.raises(ValueError):
            log.order(7).validate()

    def test_sort_chronological(self):
        log = random_log(2)
        shuffled = log.take(np.random.default_rng(0).permutation(len(log)))
        restored = shuffled.sort_chronological()
        key = np.lexsort((restored.agent, restored.t, restored.day))
        assert np.array_equal(key, np.arange(len(log)))
        assert np.array_equal(np.sort(restored.t), np.sort(log.t))

    def test_groups_partition_in_time_order(self):
        log = random_log(3, n_agents=4, n_days=3)
        seen = np.zeros(len(log), dtype=bool)
        for agent, day, rows in log.groups():
            assert not seen[rows].any()
            seen[rows] = True
            assert (log.agent[rows] == agent).all()
            assert (log.day[rows] == day).all()
            assert (np.diff(log.t[rows]) >= 0).all()
        assert seen.all()

    def test_csv_round_trip_exact(self, tmp_path):
        log = random_log(4)
        path = tmp_path / "orders.csv"
        log.to_csv(path)
        back = OrderLog.from_csv(path)
        for name in OrderLog.FIELDS:
            assert np.array_equal(getattr(log, name), getattr(back, name))

    def test_from_csv_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("day,t,agent\n1,2.0,3\n")
        with pytest.raises(ValueError, match="missing"):
            OrderLog.from_csv(path)


class TestSampleAndWindows:
    def test_build_windows_counts_and_offsets(self):
        log = random_log(5, n_agents=1, n_days=1, orders_per_agent_day=125)
        wins = build_windows(log)
        assert len(wins) == 2
        assert wins[0].rows[0] == 0 and wins[1].rows[0] == 50
        wins = build_windows(log, stride=25)
        assert [w.rows[0] for w in wins] == [0, 25, 50, 75]
        for w in wins:
            w.validate()

    def test_build_windows_too_short(self):
        log = random_log(6, n_agents=1, n_days=1, orders_per_agent_day=49)
        assert build_windows(log) == []

    def test_build_windows_rejects_mixed_log(self):
        log = random_log(7, n_agents=2, n_days=1)
        with pytest.raises(ValueError, match="single agent-day"):
            build_windows(log)

    def test_sample_validate_rejects_wrong_length(self):
        log = random_log(8, n_agents=1, n_days=1)
        s = Sample(log, np.arange(WINDOW - 1), agent=0, day=0)
        with pytest.raises(ValueError):
            s.validate()

    def test_sample_validate_rejects_mixed_agent(self):
        log = random_log(9, n_agents=2, n_days=1).sort_chronological()
        s = Sample(log, np.arange(WINDOW), agent=int(log.agent[0]),
                   day=int(log.day[0]))
        with pytest.raises(ValueError):
            s.validate()

    def test_build_all_windows_counts(self):
        log = random_log(10, n_agents=3, n_days=2, orders_per_agent_day=130)
        ws = build_all_windows(log)
        # 130 orders -> floor((130-50)/50)+1 = 2 windows per agent-day
        assert len(ws) == 3 * 2 * 2
        for i in range(len(ws)):
            ws.sample(i).validate()

    def test_build_all_windows_never_mixes(self):
        log = random_log(11, n_agents=4, n_days=2)
        ws = build_all_windows(log, stride=13)
        agents = ws.column("agent")
        days = ws.column("day")
        assert (agents == agents[:, :1]).all()
        assert (days == days[:, :1]).all()
        assert (np.diff(ws.column("t"), axis=1) >= 0).all()

    def test_manifest_round_trip(self, tmp_path):
        log = random_log(12, n_agents=3, n_days=2, orders_per_agent_day=140)
        ws = build_all_windows(log, stride=17)
        path = tmp_path / "windows.csv"
        ws.to_csv(path)
        back = WindowSet.from_csv(path, log)
        assert np.array_equal(back.rows, ws.rows)
        assert np.array_equal(back.agent, ws.agent)
        assert np.array_equal(back.day, ws.day)

    def test_take_subsets(self):
        log = random_log(13, n_agents=2, n_days=2, orders_per_agent_day=150)
        ws = build_all_windows(log, stride=10)
        idx = np.array([0, 5, 2])
        sub = ws.take(idx)
        assert np.array_equal(sub.rows, ws.rows[idx])
        assert np.array_equal(sub.agent, ws.agent[idx])

    def test_group_positions_match_row_overlap(self):
        # Dual route: the (group, pos) overlap rule must agree with a
        # direct row-set intersection check.
        log = random_log(14, n_agents=2, n_days=2, orders_per_agent_day=160)
        ws = build_all_windows(log, stride=20)
        group, pos = ws.group_positions()
        for i in range(len(ws)):
            for j in range(len(ws)):
                shares = len(np.intersect1d(ws.rows[i], ws.rows[j])) > 0
                predicted = (group[i] == group[j]
                             and abs(int(pos[i]) - int(pos[j])) < WINDOW)
                assert shares == predicted

    def test_start_time_is_first_order_time(self):
        log = random_log(15, n_agents=1, n_days=1)
        ws = build_all_windows(log, stride=30)
        assert np.array_equal(ws.start_time, log.t[ws.rows[:, 0]])
