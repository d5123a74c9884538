import numpy as np
import pytest

from orderembed.orders import OrderLog
from orderembed import synth


def random_log(seed: int, n_agents: int = 3, n_days: int = 2,
               orders_per_agent_day: int = 120) -> OrderLog:
    """Hand-rolled valid order log, independent of the market generator."""
    rng = np.random.default_rng(seed)
    cols = {name: [] for name in OrderLog.FIELDS}
    for day in range(n_days):
        for agent in range(n_agents):
            n = orders_per_agent_day
            t = np.sort(rng.uniform(0.0, 28800.0, size=n))
            q_int = rng.integers(1, 30, size=n)
            q_fill = np.minimum(q_int, rng.integers(1, 30, size=n))
            bid = 10_000 + rng.integers(-40, 40, size=n)
            cols["day"].append(np.full(n, day))
            cols["t"].append(t)
            cols["agent"].append(np.full(n, agent))
            cols["side"].append(rng.choice([-1, 1], size=n))
            cols["q_filled"].append(q_fill)
            cols["q_intended"].append(q_int)
            cols["modif"].append(rng.integers(0, 2, size=n))
            cols["best_bid"].append(bid)
            cols["best_ask"].append(bid + rng.integers(1, 4, size=n))
            cols["bid_qty"].append(rng.integers(0, 300, size=n))
            cols["ask_qty"].append(rng.integers(0, 300, size=n))
    log = OrderLog(**{k: np.concatenate(v) for k, v in cols.items()})
    log.validate()
    return log.sort_chronological()


@pytest.fixture(scope="session")
def small_market():
    """One agent per archetype, 6 days; enough for pipeline-level tests."""
    config = synth.default_market_config(seed=11, n_days=6,
                                         agents_per_archetype=1)
    log, passive = synth.generate_tape(config)
    return config, log, passive
