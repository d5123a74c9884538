import json

import numpy as np
import pytest

from orderembed.orders import SESSION_SECONDS, OrderLog
from orderembed.synth import (
    AgentArchetype,
    MarketConfig,
    archetype_of_agent,
    default_archetypes,
    default_market_config,
    generate,
    generate_tape,
    select_active_agents,
)


def one_agent_config(arch: AgentArchetype, n_days: int = 1,
                     seed: int = 5) -> MarketConfig:
    return MarketConfig(n_days=n_days, agents=[(0, arch)], seed=seed)


class TestGenerate:
    def test_deterministic(self):
        config = default_market_config(seed=3, n_days=2,
                                       agents_per_archetype=1)
        a, b = generate(config), generate(config)
        for name in OrderLog.FIELDS:
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_agent_substreams_independent(self):
        """Adding an agent must not perturb the others' orders."""
        archs = default_archetypes()
        base = MarketConfig(n_days=2, agents=[(0, archs[0]), (1, archs[1])],
                            seed=9)
        bigger = MarketConfig(n_days=2, agents=[(0, archs[0]),
                                                (1, archs[1]),
                                                (2, archs[2])], seed=9)
        a = generate(base)
        b = generate(bigger)
        keep = b.take(np.flatnonzero(b.agent <= 1))
        for name in OrderLog.FIELDS:
            assert np.array_equal(getattr(a, name), getattr(keep, name))

    def test_min_orders_floor(self):
        # rate 0.1/min -> Poisson mean 48 for the day, well under the floor
        arch = AgentArchetype(trade_rate=0.1)
        log = generate(one_agent_config(arch, n_days=3))
        for day in range(3):
            assert (log.day == day).sum() >= 200

    def test_small_hourly_rate_still_meets_floor(self):
        # 200 orders expected over the 8h session
        arch = AgentArchetype(trade_rate=200.0 / 480.0)
        log = generate(one_agent_config(arch))
        assert len(log) >= 200
        assert (log.agent == 0).all()

    def test_output_is_valid_and_sorted(self):
        config = default_market_config(seed=2, n_days=2,
                                       agents_per_archetype=1)
        log = generate(config)
        log.validate()
        key = np.lexsort((log.agent, log.t, log.day))
        assert np.array_equal(key, np.arange(len(log)))
        assert log.t.min() >= 0.0 and log.t.max() <= SESSION_SECONDS

    def test_direction_bias_one_means_all_buys(self):
        arch = AgentArchetype(trade_rate=2.0, direction_bias=1.0)
        log = generate(one_agent_config(arch))
        assert (log.side == 1).all()

    def test_full_fill_ratio_copies_quantity(self):
        arch = AgentArchetype(trade_rate=2.0, fill_ratio_mean=1.0)
        log = generate(one_agent_config(arch))
        assert np.array_equal(log.q_filled, log.q_intended)

    def test_partial_fills_bounded(self):
        arch = AgentArchetype(trade_rate=2.0, size_mean=20.0,
                              fill_ratio_mean=0.5)
        log = generate(one_agent_config(arch))
        assert (log.q_filled >= 1).all()
        assert (log.q_filled <= log.q_intended).all()
        assert (log.q_filled < log.q_intended).any()
        ratio = log.q_filled.sum() / log.q_intended.sum()
        assert 0.4 < ratio < 0.65

    def test_modif_prob_extremes(self):
        assert (generate(one_agent_config(
            AgentArchetype(trade_rate=2.0, modif_prob=0.0))).modif == 0).all()
        assert (generate(one_agent_config(
            AgentArchetype(trade_rate=2.0, modif_prob=1.0))).modif == 1).all()

    def test_session_phase_confines_timestamps(self):
        arch = AgentArchetype(trade_rate=4.0, session_phase=(0.0, 14400.0))
        log = generate(one_agent_config(arch))
        assert log.t.max() <= 14400.0

    def test_archetype_separability(self):
        """hf_taker and block_trader sizes/gaps must not even overlap in
        IQR; the downstream clustering tests rely on this margin."""
        config = default_market_config(seed=4, n_days=2,
                                       agents_per_archetype=1)
        log = generate(config)
        names = archetype_of_agent(config)
        by_name = {v: k for k, v in names.items()}
        hf = log.take(np.flatnonzero(log.agent == by_name["hf_taker"]))
        block = log.take(np.flatnonzero(log.agent == by_name["block_trader"]))
        assert np.quantile(hf.q_filled, 0.75) < np.quantile(block.q_filled,
                                                            0.25)
        gaps_hf = np.diff(hf.t[hf.day == 0])
        gaps_block = np.diff(block.t[block.day == 0])
        assert np.quantile(gaps_hf, 0.75) < np.quantile(gaps_block, 0.25)


class TestPassiveFills:
    def test_tape_matches_generate(self):
        config = default_market_config(seed=6, n_days=1,
                                       agents_per_archetype=1)
        log0 = generate(config)
        log1, _ = generate_tape(config)
        for name in OrderLog.FIELDS:
            assert np.array_equal(getattr(log0, name), getattr(log1, name))

    def test_volume_conserved(self):
        config = default_market_config(seed=6, n_days=2,
                                       agents_per_archetype=1)
        log, passive = generate_tape(config)
        assert passive.q.sum() == log.q_filled.sum()
        for day in range(2):
            assert (passive.q[passive.day == day].sum()
                    == log.q_filled[log.day == day].sum())

    def test_two_agents_fill_each_other(self):
        archs = default_archetypes()
        config = MarketConfig(n_days=1, agents=[(0, archs[0]),
                                                (1, archs[3])], seed=2)
        log, passive = generate_tape(config)
        counts = passive.counts_by_agent()
        assert counts[0] == int((log.agent == 1).sum())
        assert counts[1] == int((log.agent == 0).sum())

    def test_single_agent_rejected(self):
        config = one_agent_config(AgentArchetype(trade_rate=1.0))
        with pytest.raises(ValueError, match="two agents"):
            generate_tape(config)

    def test_csv_round_trip(self, tmp_path):
        config = default_market_config(seed=6, n_days=1,
                                       agents_per_archetype=1)
        _, passive = generate_tape(config)
        path = tmp_path / "passive.csv"
        passive.to_csv(path)
        back = type(passive).from_csv(path)
        assert np.array_equal(back.day, passive.day)
        assert np.array_equal(back.t, passive.t)
        assert np.array_equal(back.agent, passive.agent)
        assert np.array_equal(back.q, passive.q)


class TestSelection:
    @staticmethod
    def _log_with(agent_days: dict[int, dict[int, int]]) -> OrderLog:
        cols = {name: [] for name in OrderLog.FIELDS}
        for agent, days in agent_days.items():
            for day, n in days.items():
                cols["day"].append(np.full(n, day))
                cols["t"].append(np.linspace(0, 28000, n))
                cols["agent"].append(np.full(n, agent))
                cols["side"].append(np.ones(n, dtype=np.int64))
                cols["q_filled"].append(np.ones(n, dtype=np.int64))
                cols["q_intended"].append(np.ones(n, dtype=np.int64))
                cols["modif"].append(np.zeros(n, dtype=np.int64))
                cols["best_bid"].append(np.full(n, 100))
                cols["best_ask"].append(np.full(n, 101))
                cols["bid_qty"].append(np.full(n, 10))
                cols["ask_qty"].append(np.full(n, 10))
        return OrderLog(**{k: np.concatenate(v) for k, v in cols.items()})

    def test_strictly_more_than_min_days(self):
        log = self._log_with({
            5: {0: 250, 1: 250, 2: 250},   # 3 qualifying days
            9: {0: 250, 1: 250},           # exactly min_days: excluded
            7: {0: 150, 1: 150, 2: 150},   # never reaches the order floor
        })
        assert select_active_agents(log, 200, 2) == {5}
        assert select_active_agents(log, 200, 1) == {5, 9}
        assert select_active_agents(log, 100, 2) == {5, 7}

    def test_empty_log(self):
        log = self._log_with({1: {0: 10}}).take(np.array([], dtype=np.int64))
        assert select_active_agents(log, 1, 0) == set()

    def test_default_corpus_all_selected(self, small_market):
        _, log, _ = small_market
        assert select_active_agents(log, 200, 4) == set(range(6))


class TestConfig:
    def test_round_trip(self):
        config = default_market_config(seed=12, n_days=3,
                                       agents_per_archetype=2)
        doc = json.loads(json.dumps(config.to_dict()))
        back = MarketConfig.from_dict(doc)
        assert back.n_days == config.n_days
        assert back.seed == config.seed
        assert [a for a, _ in back.agents] == [a for a, _ in config.agents]
        assert all(b_arch == arch for (_, b_arch), (_, arch)
                   in zip(back.agents, config.agents))
        for name in OrderLog.FIELDS:
            assert np.array_equal(getattr(generate(config), name),
                                  getattr(generate(back), name))

    def test_duplicate_ids_rejected(self):
        arch = AgentArchetype(trade_rate=1.0)
        config = MarketConfig(n_days=1, agents=[(0, arch), (0, arch)], seed=1)
        with pytest.raises(ValueError, match="unique"):
            config.validate()

    @pytest.mark.parametrize("bad", [
        dict(trade_rate=0.0), dict(trade_rate=1.0, size_mean=0.5),
        dict(trade_rate=1.0, fill_ratio_mean=0.0),
        dict(trade_rate=1.0, fill_ratio_mean=1.2),
        dict(trade_rate=1.0, direction_bias=-0.1),
        dict(trade_rate=1.0, spread_regime=0.5),
        dict(trade_rate=1.0, queue_scale=0.0),
        dict(trade_rate=1.0, impatience=0.0),
        dict(trade_rate=1.0, session_phase=(5.0, 4.0)),
        dict(trade_rate=1.0, session_phase=(0.0, 30000.0)),
    ])
    def test_bad_archetype_rejected(self, bad):
        with pytest.raises(ValueError):
            AgentArchetype(**bad).validate()

    def test_archetype_map(self):
        config = default_market_config(agents_per_archetype=2)
        names = archetype_of_agent(config)
        assert names[0] == names[1] == "hf_taker"
        assert names[8] == names[9] == "patient_mm"
        assert len(names) == 12
