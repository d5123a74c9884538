"""Domain types for aggressive market orders and 50-order windows.

The unit of analysis everywhere in this package is a window of 50
consecutive market orders executed by a single agent on a single day.
Order logs are kept columnar (one numpy array per field) so that
million-row corpora stay cheap to slice, window and featurize.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

# Trading session: 9:00 to 17:00, timestamps in seconds from the open.
SESSION_SECONDS = 28800.0
SESSION_OPEN_HOUR = 9

# Windows are exactly 50 orders long; indicator formulas (1/50, 1/49
# normalizations) assume this.
WINDOW = 50

CSV_COLUMNS = [
    "day", "t", "agent", "side", "q_filled", "q_intended",
    "modif", "best_bid", "best_ask", "bid_qty", "ask_qty",
]


@dataclass
class MarketOrder:
    """One executed aggressive trade with its quote context.

    ``t`` is seconds since the session open; prices are integer ticks;
    ``best_bid``/``best_ask`` and the queue sizes are the state of the
    best level immediately before execution.
    """

    t: float
    q_filled: int
    q_intended: int
    side: int          # +1 buy, -1 sell
    modif: int         # 1 if a resting limit order was modified into a trade
    best_bid: int
    best_ask: int
    bid_qty: int
    ask_qty: int
    agent: int
    day: int

    def validate(self) -> None:
        if not 0.0 <= self.t <= SESSION_SECONDS:
            raise ValueError(f"timestamp {self.t} outside the trading session")
        if self.q_filled <= 0:
            raise ValueError("q_filled must be positive")
        if self.q_filled > self.q_intended:
            raise ValueError("q_filled cannot exceed q_intended")
        if self.side not in (-1, 1):
            raise ValueError(f"side must be +1 or -1, got {self.side}")
        if self.modif not in (0, 1):
            raise ValueError(f"modif must be 0 or 1, got {self.modif}")
        if self.best_ask <= self.best_bid:
            raise ValueError("best_ask must exceed best_bid")
        if self.bid_qty < 0 or self.ask_qty < 0:
            raise ValueError("queue sizes must be non-negative")


class OrderLog:
    """Columnar store of market orders, one numpy array per field."""

    FIELDS = CSV_COLUMNS

    def __init__(self, day, t, agent, side, q_filled, q_intended, modif,
                 best_bid, best_ask, bid_qty, ask_qty):
        self.day = np.asarray(day, dtype=np.int64)
        self.t = np.asarray(t, dtype=np.float64)
        self.agent = np.asarray(agent, dtype=np.int64)
        self.side = np.asarray(side, dtype=np.int64)
        self.q_filled = np.asarray(q_filled, dtype=np.int64)
        self.q_intended = np.asarray(q_intended, dtype=np.int64)
        self.modif = np.asarray(modif, dtype=np.int64)
        self.best_bid = np.asarray(best_bid, dtype=np.int64)
        self.best_ask = np.asarray(best_ask, dtype=np.int64)
        self.bid_qty = np.asarray(bid_qty, dtype=np.int64)
        self.ask_qty = np.asarray(ask_qty, dtype=np.int64)
        n = len(self.t)
        for name in self.FIELDS:
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has mismatched length")

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_orders(cls, orders: list[MarketOrder]) -> "OrderLog":
        cols = {name: [getattr(o, name) for o in orders] for name in cls.FIELDS}
        return cls(**cols)

    def order(self, i: int) -> MarketOrder:
        """Materialize row ``i`` as a MarketOrder record."""
        return MarketOrder(
            t=float(self.t[i]), q_filled=int(self.q_filled[i]),
            q_intended=int(self.q_intended[i]), side=int(self.side[i]),
            modif=int(self.modif[i]), best_bid=int(self.best_bid[i]),
            best_ask=int(self.best_ask[i]), bid_qty=int(self.bid_qty[i]),
            ask_qty=int(self.ask_qty[i]), agent=int(self.agent[i]),
            day=int(self.day[i]),
        )

    def take(self, rows) -> "OrderLog":
        return OrderLog(**{name: getattr(self, name)[rows] for name in self.FIELDS})

    def validate(self) -> None:
        """Vectorized check of the per-order invariants."""
        if np.any((self.t < 0) | (self.t > SESSION_SECONDS)):
            raise ValueError("timestamps outside the trading session")
        if np.any(self.q_filled <= 0):
            raise ValueError("non-positive filled quantity")
        if np.any(self.q_filled > self.q_intended):
            raise ValueError("q_filled exceeds q_intended")
        if np.any(~np.isin(self.side, (-1, 1))):
            raise ValueError("side must be +1 or -1")
        if np.any(~np.isin(self.modif, (0, 1))):
            raise ValueError("modif must be 0 or 1")
        if np.any(self.best_ask <= self.best_bid):
            raise ValueError("non-positive spread")
        if np.any(self.bid_qty < 0) or np.any(self.ask_qty < 0):
            raise ValueError("negative queue size")

    def sort_chronological(self) -> "OrderLog":
        """Stable sort by (day, t, agent); the canonical tape order."""
        order = np.lexsort((self.agent, self.t, self.day))
        return self.take(order)

    def groups(self):
        """Yield (agent, day, row_indices) per agent-day, rows in time order."""
        key = np.lexsort((self.t, self.day, self.agent))
        agent_s, day_s = self.agent[key], self.day[key]
        boundaries = np.flatnonzero(
            (np.diff(agent_s) != 0) | (np.diff(day_s) != 0)) + 1
        for chunk in np.split(key, boundaries):
            if len(chunk):
                yield int(self.agent[chunk[0]]), int(self.day[chunk[0]]), chunk

    def to_csv(self, path) -> None:
        df = pd.DataFrame({name: getattr(self, name) for name in self.FIELDS})
        df.to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path) -> "OrderLog":
        # round_trip parsing keeps timestamps bit-exact across save/load
        df = pd.read_csv(path, float_precision="round_trip")
        missing = [c for c in cls.FIELDS if c not in df.columns]
        if missing:
            raise ValueError(f"order CSV missing columns: {missing}")
        return cls(**{name: df[name].to_numpy() for name in cls.FIELDS})


@dataclass
class Sample:
    """A window of 50 consecutive same-agent, same-day orders.

    ``rows`` indexes into the backing log; the window's time is the
    timestamp of its first order.
    """

    log: OrderLog
    rows: np.ndarray
    agent: int
    day: int

    @property
    def start_time(self) -> float:
        return float(self.log.t[self.rows[0]])

    @property
    def orders(self) -> list[MarketOrder]:
        return [self.log.order(int(i)) for i in self.rows]

    def column(self, name: str) -> np.ndarray:
        return getattr(self.log, name)[self.rows]

    def validate(self) -> None:
        if len(self.rows) != WINDOW:
            raise ValueError(f"window must hold exactly {WINDOW} orders")
        t = self.column("t")
        if np.any(np.diff(t) < 0):
            raise ValueError("orders in a window must be non-decreasing in t")
        if np.any(self.column("agent") != self.agent):
            raise ValueError("window mixes agents")
        if np.any(self.column("day") != self.day):
            raise ValueError("window mixes days")
        self.log.take(self.rows).validate()


class WindowSet:
    """All windows cut from a log, with a CSV manifest round-trip.

    The manifest records (window_id, agent, day, start_row, start_time)
    where start_row is the global row of the window's first order, so a
    window set is exactly reconstructible from the order log plus the
    manifest.
    """

    def __init__(self, log: OrderLog, rows: np.ndarray,
                 agent: np.ndarray, day: np.ndarray):
        self.log = log
        self.rows = np.asarray(rows, dtype=np.int64).reshape(-1, WINDOW)
        self.agent = np.asarray(agent, dtype=np.int64)
        self.day = np.asarray(day, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def start_row(self) -> np.ndarray:
        return self.rows[:, 0]

    @property
    def start_time(self) -> np.ndarray:
        return self.log.t[self.rows[:, 0]]

    def sample(self, i: int) -> Sample:
        return Sample(log=self.log, rows=self.rows[i],
                      agent=int(self.agent[i]), day=int(self.day[i]))

    def column(self, name: str) -> np.ndarray:
        """Window-shaped view of a log column, (n_windows, 50)."""
        return getattr(self.log, name)[self.rows]

    def take(self, idx) -> "WindowSet":
        """Subset of windows (same underlying log)."""
        return WindowSet(self.log, self.rows[idx], self.agent[idx],
                         self.day[idx])

    def group_positions(self) -> tuple[np.ndarray, np.ndarray]:
        """Per window: an agent-day group id and the position of the
        window's first order within that group's time-ordered rows.

        Two windows share an order exactly when they have the same group
        id and their positions differ by less than 50.
        """
        group_of = np.full(len(self.log), -1, dtype=np.int64)
        pos_of = np.zeros(len(self.log), dtype=np.int64)
        n_groups = 0
        for _agent, _day, rows in self.log.groups():
            group_of[rows] = n_groups
            pos_of[rows] = np.arange(len(rows))
            n_groups += 1
        starts = self.rows[:, 0]
        return group_of[starts], pos_of[starts]

    def to_csv(self, path) -> None:
        pd.DataFrame({
            "window_id": np.arange(len(self), dtype=np.int64),
            "agent": self.agent,
            "day": self.day,
            "start_row": self.start_row,
            "start_time": self.start_time,
        }).to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path, log: OrderLog) -> "WindowSet":
        df = pd.read_csv(path, float_precision="round_trip")
        start_rows = df["start_row"].to_numpy(dtype=np.int64)
        # Map every log row to (its group, position within the group) so a
        # window is group[pos:pos+50] regardless of how rows interleave.
        groups = []
        group_of = np.full(len(log), -1, dtype=np.int64)
        pos_of = np.zeros(len(log), dtype=np.int64)
        for agent, day, rows in log.groups():
            group_of[rows] = len(groups)
            pos_of[rows] = np.arange(len(rows))
            groups.append(rows)
        all_rows = np.empty((len(df), WINDOW), dtype=np.int64)
        for i, start in enumerate(start_rows):
            rows = groups[group_of[start]]
            pos = pos_of[start]
            if pos + WINDOW > len(rows):
                raise ValueError(f"manifest row {i}: window overruns its group")
            all_rows[i] = rows[pos:pos + WINDOW]
        return cls(log, all_rows,
                   df["agent"].to_numpy(dtype=np.int64),
                   df["day"].to_numpy(dtype=np.int64))


def build_windows(log: OrderLog, stride: int = WINDOW) -> list[Sample]:
    """Cut one agent-day's orders into 50-order windows.

    The log must hold a single agent-day sorted by time. Windows start
    at offsets 0, stride, 2*stride, ...; a trailing partial window is
    dropped. Returns an empty list when fewer than 50 orders exist.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if len(log) == 0:
        return []
    if len(np.unique(log.agent)) > 1 or len(np.unique(log.day)) > 1:
        raise ValueError("build_windows expects a single agent-day")
    if np.any(np.diff(log.t) < 0):
        raise ValueError("orders must be sorted by t")
    agent, day = int(log.agent[0]), int(log.day[0])
    out = []
    for start in range(0, len(log) - WINDOW + 1, stride):
        rows = np.arange(start, start + WINDOW, dtype=np.int64)
        out.append(Sample(log=log, rows=rows, agent=agent, day=day))
    return out


def build_all_windows(log: OrderLog, stride: int = WINDOW) -> WindowSet:
    """Cut every agent-day of a mixed log into windows.

    Groups rows by (agent, day) keeping time order within each group;
    windows never span two agents or two days.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    rows_list, agents, days = [], [], []
    for agent, day, rows in log.groups():
        n_starts = (len(rows) - WINDOW) // stride + 1 if len(rows) >= WINDOW else 0
        for k in range(n_starts):
            rows_list.append(rows[k * stride:k * stride + WINDOW])
            agents.append(agent)
            days.append(day)
    if not rows_list:
        return WindowSet(log, np.empty((0, WINDOW), dtype=np.int64),
                         np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))
    return WindowSet(log, np.stack(rows_list),
                     np.asarray(agents), np.asarray(days))
