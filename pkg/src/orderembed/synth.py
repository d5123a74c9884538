"""Synthetic multi-agent order flow with controllable behavioral archetypes.

Each agent follows an archetype whose parameter axes line up with the
behavioral indicators computed downstream (trading frequency, sizes,
fill ratio, direction persistence, modification rate, spread and queue
regimes), so generated corpora carry recoverable ground-truth labels.

Every (day, agent) pair draws from its own seeded substream, which makes
generation deterministic and embarrassingly parallel across days.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .orders import SESSION_SECONDS, OrderLog

MIN_ORDERS_PER_DAY = 200    # selection floor every synthetic agent must meet
SIDE_RUN_MEAN = 20.0        # mean length of persistent same-side episodes
QUEUE_SIGMA = 0.6           # lognormal shape for best-level queue sizes
START_PRICE = 10_000        # mid price at the open, in ticks


@dataclass
class AgentArchetype:
    """Behavioral parameter bundle for one agent population."""

    trade_rate: float                 # mean trades per minute
    size_mean: float = 5.0            # mean intended order size
    fill_ratio_mean: float = 1.0      # mean q_filled / q_intended, in (0, 1]
    direction_bias: float = 0.0       # buy/sell probability mass imbalance
    modif_prob: float = 0.0
    spread_regime: float = 1.0        # mean spread in ticks, >= 1
    queue_scale: float = 50.0         # mean best-level queue size
    impatience: float = 1.0           # opposite-queue / same-side-queue scale
    session_phase: tuple[float, float] | None = None
    name: str = ""

    def validate(self) -> None:
        if self.trade_rate <= 0:
            raise ValueError("trade_rate must be positive")
        if self.size_mean < 1:
            raise ValueError("size_mean must be >= 1")
        if not 0 < self.fill_ratio_mean <= 1:
            raise ValueError("fill_ratio_mean must be in (0, 1]")
        if not 0 <= self.direction_bias <= 1:
            raise ValueError("direction_bias must be in [0, 1]")
        if not 0 <= self.modif_prob <= 1:
            raise ValueError("modif_prob must be in [0, 1]")
        if self.spread_regime < 1:
            raise ValueError("spread_regime must be >= 1 tick")
        if self.queue_scale <= 0:
            raise ValueError("queue_scale must be positive")
        if self.impatience <= 0:
            raise ValueError("impatience must be positive")
        if self.session_phase is not None:
            lo, hi = self.session_phase
            if not 0 <= lo < hi <= SESSION_SECONDS:
                raise ValueError("session_phase must satisfy "
                                 f"0 <= lo < hi <= {SESSION_SECONDS}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "trade_rate", "size_mean", "fill_ratio_mean", "direction_bias",
            "modif_prob", "spread_regime", "queue_scale", "impatience",
            "name")}
        d["session_phase"] = (list(self.session_phase)
                              if self.session_phase is not None else None)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AgentArchetype":
        d = dict(d)
        phase = d.get("session_phase")
        d["session_phase"] = tuple(phase) if phase is not None else None
        return cls(**d)


@dataclass
class MarketConfig:
    n_days: int
    agents: list[tuple[int, AgentArchetype]]
    seed: int
    tick_size: int = 1

    def validate(self) -> None:
        if self.n_days < 1:
            raise ValueError("n_days must be >= 1")
        if not self.agents:
            raise ValueError("at least one agent required")
        ids = [a for a, _ in self.agents]
        if len(set(ids)) != len(ids):
            raise ValueError("agent ids must be unique")
        if self.tick_size != 1:
            raise ValueError("prices are in integer ticks (tick_size = 1)")
        for _, arch in self.agents:
            arch.validate()

    def to_dict(self) -> dict:
        return {"n_days": self.n_days, "seed": self.seed,
                "tick_size": self.tick_size,
                "agents": [[a, arch.to_dict()] for a, arch in self.agents]}

    @classmethod
    def from_dict(cls, d: dict) -> "MarketConfig":
        agents = [(int(a), AgentArchetype.from_dict(arch))
                  for a, arch in d["agents"]]
        return cls(n_days=int(d["n_days"]), agents=agents,
                   seed=int(d["seed"]), tick_size=int(d.get("tick_size", 1)))


@dataclass
class PassiveFills:
    """Executions of resting orders, attributed to the passive counterparty."""

    day: np.ndarray
    t: np.ndarray
    agent: np.ndarray
    q: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def counts_by_agent(self) -> dict[int, int]:
        ids, counts = np.unique(self.agent, return_counts=True)
        return {int(a): int(c) for a, c in zip(ids, counts)}

    def to_csv(self, path) -> None:
        pd.DataFrame({"day": self.day, "t": self.t, "agent": self.agent,
                      "q": self.q}).to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path) -> "PassiveFills":
        df = pd.read_csv(path, float_precision="round_trip")
        return cls(day=df["day"].to_numpy(np.int64),
                   t=df["t"].to_numpy(np.float64),
                   agent=df["agent"].to_numpy(np.int64),
                   q=df["q"].to_numpy(np.int64))


def _agent_day_stream(arch: AgentArchetype, rng: np.random.Generator):
    """Draw one agent-day of market orders; returns a dict of columns."""
    lo, hi = arch.session_phase or (0.0, SESSION_SECONDS)
    span = hi - lo
    n = max(MIN_ORDERS_PER_DAY, int(rng.poisson(arch.trade_rate * span / 60.0)))

    # Arrival times: exponential gaps rescaled to land n orders in the
    # phase window, preserving the archetype's mean interevent time.
    gaps = rng.exponential(1.0, n + 1)
    t = lo + span * (np.cumsum(gaps[:-1]) / gaps.sum())

    q_intended = rng.geometric(1.0 / arch.size_mean, n).astype(np.int64)
    if arch.fill_ratio_mean >= 1.0:
        q_filled = q_intended.copy()
    else:
        q_filled = np.maximum(1, rng.binomial(q_intended,
                                              arch.fill_ratio_mean))

    # Persistent side episodes: each order resamples its side with
    # probability 1/run_mean, otherwise inherits the previous side.
    buy_p = 0.5 + arch.direction_bias / 2.0
    switch = rng.random(n) < 1.0 / SIDE_RUN_MEAN
    switch[0] = True
    fresh = np.where(rng.random(n) < buy_p, 1, -1).astype(np.int64)
    last_switch = np.maximum.accumulate(np.where(switch, np.arange(n), 0))
    side = fresh[last_switch]

    spread = 1 + rng.poisson(arch.spread_regime - 1.0, n)
    mid = START_PRICE + np.cumsum(rng.integers(-1, 2, n))
    mid = np.maximum(mid, 100)
    best_bid = mid - (spread + 1) // 2
    best_ask = best_bid + spread

    # Queue sizes: lognormal around the archetype scales; the same-side
    # queue is damped for fast traders (queue-reactive flavor), the
    # opposite queue carries the impatience ratio.
    same_scale = arch.queue_scale / (1.0 + 0.05 * arch.trade_rate)
    opp_scale = arch.queue_scale * arch.impatience
    mu_same = np.log(same_scale) - QUEUE_SIGMA ** 2 / 2.0
    mu_opp = np.log(opp_scale) - QUEUE_SIGMA ** 2 / 2.0
    same_q = np.maximum(1, np.rint(rng.lognormal(mu_same, QUEUE_SIGMA, n)))
    opp_q = np.maximum(1, np.rint(rng.lognormal(mu_opp, QUEUE_SIGMA, n)))
    buys = side == 1
    ask_qty = np.where(buys, same_q, opp_q).astype(np.int64)
    bid_qty = np.where(buys, opp_q, same_q).astype(np.int64)

    modif = (rng.random(n) < arch.modif_prob).astype(np.int64)

    return {"t": t, "side": side, "q_filled": q_filled,
            "q_intended": q_intended, "modif": modif, "best_bid": best_bid,
            "best_ask": best_ask, "bid_qty": bid_qty, "ask_qty": ask_qty}


def generate(config: MarketConfig) -> OrderLog:
    """Generate the full aggressive-order tape for ``config``.

    Deterministic: each (day, agent) pair uses the substream seeded by
    (config.seed, day, agent), so adding or removing agents never
    perturbs the others' orders.
    """
    config.validate()
    columns = {name: [] for name in OrderLog.FIELDS}
    for day in range(config.n_days):
        for agent_id, arch in config.agents:
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence((config.seed, day, agent_id))))
            cols = _agent_day_stream(arch, rng)
            n = len(cols["t"])
            cols["day"] = np.full(n, day, dtype=np.int64)
            cols["agent"] = np.full(n, agent_id, dtype=np.int64)
            for name in OrderLog.FIELDS:
                columns[name].append(cols[name])
    log = OrderLog(**{name: np.concatenate(columns[name])
                      for name in OrderLog.FIELDS})
    log = log.sort_chronological()
    log.validate()
    return log


def generate_tape(config: MarketConfig) -> tuple[OrderLog, PassiveFills]:
    """Generate orders plus passive-fill attributions.

    Every aggressive order fills exactly one resting order belonging to
    another agent; the counterparty is drawn with probability
    proportional to queue_scale (agents with deep standing quotes get
    filled more often). The order tape is identical to
    ``generate(config)``: passive draws use their own substreams.
    """
    config.validate()
    if len(config.agents) < 2:
        raise ValueError("passive fills need at least two agents")
    log = generate(config)

    ids = np.array([a for a, _ in config.agents], dtype=np.int64)
    weights = np.array([arch.queue_scale for _, arch in config.agents])
    days, ts, agents, qs = [], [], [], []
    for day in range(config.n_days):
        for agent_id, _ in config.agents:
            mask = (log.day == day) & (log.agent == agent_id)
            n = int(mask.sum())
            if n == 0:
                continue
            others = ids != agent_id
            p = weights[others] / weights[others].sum()
            rng = np.random.Generator(np.random.PCG64(
                np.random.SeedSequence((config.seed, day, agent_id, 1))))
            counterparty = rng.choice(ids[others], size=n, p=p)
            days.append(np.full(n, day, dtype=np.int64))
            ts.append(log.t[mask])
            agents.append(counterparty)
            qs.append(log.q_filled[mask])
    passive = PassiveFills(day=np.concatenate(days), t=np.concatenate(ts),
                           agent=np.concatenate(agents),
                           q=np.concatenate(qs))
    return log, passive


def select_active_agents(log: OrderLog, min_orders_per_day: int,
                         min_days: int) -> set[int]:
    """Agents with >= min_orders_per_day orders on more than min_days days."""
    if len(log) == 0:
        return set()
    day_span = int(log.day.max()) + 1
    key = log.agent * day_span + log.day
    uniq, counts = np.unique(key, return_counts=True)
    qualifying = uniq[counts >= min_orders_per_day]
    agents, day_counts = np.unique(qualifying // day_span, return_counts=True)
    return {int(a) for a, c in zip(agents, day_counts) if c > min_days}


# ---------------------------------------------------------------------------
# Ready-made corpora
# ---------------------------------------------------------------------------

def default_archetypes() -> list[AgentArchetype]:
    """Six behavioral archetypes spread across every indicator axis."""
    return [
        AgentArchetype(name="hf_taker", trade_rate=8.0, size_mean=3.0,
                       fill_ratio_mean=1.0, direction_bias=0.1,
                       modif_prob=0.05, spread_regime=2.0, queue_scale=60.0,
                       impatience=1.0),
        AgentArchetype(name="block_trader", trade_rate=0.8, size_mean=40.0,
                       fill_ratio_mean=0.7, direction_bias=0.2,
                       modif_prob=0.1, spread_regime=2.0, queue_scale=80.0,
                       impatience=1.0),
        AgentArchetype(name="directional", trade_rate=2.0, size_mean=8.0,
                       fill_ratio_mean=0.95, direction_bias=0.9,
                       modif_prob=0.05, spread_regime=2.0, queue_scale=60.0,
                       impatience=1.0),
        AgentArchetype(name="speculator", trade_rate=1.5, size_mean=5.0,
                       fill_ratio_mean=1.0, direction_bias=0.3,
                       modif_prob=0.0, spread_regime=1.0, queue_scale=25.0,
                       impatience=0.8),
        AgentArchetype(name="patient_mm", trade_rate=3.0, size_mean=6.0,
                       fill_ratio_mean=0.85, direction_bias=0.05,
                       modif_prob=0.5, spread_regime=3.0, queue_scale=200.0,
                       impatience=3.0),
        AgentArchetype(name="morning_scalper", trade_rate=4.0, size_mean=4.0,
                       fill_ratio_mean=0.9, direction_bias=0.15,
                       modif_prob=0.15, spread_regime=2.0, queue_scale=60.0,
                       impatience=1.5, session_phase=(0.0, 14400.0)),
    ]


def default_market_config(seed: int = 7, n_days: int = 25,
                          agents_per_archetype: int = 5) -> MarketConfig:
    """The ship-with corpus: 6 archetypes x 5 agents x 25 days."""
    agents = []
    for i, arch in enumerate(default_archetypes()):
        for j in range(agents_per_archetype):
            agents.append((i * agents_per_archetype + j, arch))
    return MarketConfig(n_days=n_days, agents=agents, seed=seed)


def archetype_of_agent(config: MarketConfig) -> dict[int, str]:
    """Ground-truth map agent id -> archetype name (or its index)."""
    out = {}
    for idx, (agent_id, arch) in enumerate(config.agents):
        out[agent_id] = arch.name or str(idx)
    return out
