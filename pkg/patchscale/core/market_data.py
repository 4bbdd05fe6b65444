from collections.abc import Iterable, Iterator, Sequence
from pathlib import Path
from typing import TextIO, Union, overload

import numpy as np
import pandas as pd

from patchscale.config import constant
from patchscale.config.state import State
from patchscale.enums.enums import ActivityMode, ActivityYears, Side
from patchscale.schema.trade import FirmActivity, SignedSeries, Trade
from patchscale.utils.trade_csv import (
    Source,
    empty_trade_frame,
    read_trade_frame,
    write_trade_frame,
)

SECONDS_PER_DAY = 86_400


class TradeTape(Sequence):
    """Immutable, pandas-backed sequence of Trade.

    Iterating or indexing yields `Trade` records; `frame` exposes the typed
    columns for bulk work and must be treated as read-only.
    """

    def __init__(self, frame: pd.DataFrame):
        self._frame = frame.reset_index(drop=True)

    @classmethod
    def from_trades(cls, trades: Iterable[Trade]) -> "TradeTape":
        rows = [
            (t.timestamp, t.firm_id, t.stock_id, t.side.value, t.value) for t in trades
        ]
        if not rows:
            return cls(empty_trade_frame())
        frame = pd.DataFrame(rows, columns=list(constant.TRADE_CSV_HEADER))
        frame["timestamp"] = frame["timestamp"].astype(np.int64)
        frame["value"] = frame["value"].astype(np.float64)
        return cls(frame)

    @property
    def frame(self) -> pd.DataFrame:
        return self._frame

    def __len__(self) -> int:
        return len(self._frame)

    @overload
    def __getitem__(self, index: int) -> Trade: ...

    @overload
    def __getitem__(self, index: slice) -> "TradeTape": ...

    def __getitem__(self, index):
        if isinstance(index, slice):
            return TradeTape(self._frame.iloc[index])
        row = self._frame.iloc[index]
        return self._row_to_trade(row.timestamp, row.firm_id, row.stock_id, row.side, row.value)

    def __iter__(self) -> Iterator[Trade]:
        for row in self._frame.itertuples(index=False):
            yield self._row_to_trade(row.timestamp, row.firm_id, row.stock_id, row.side, row.value)

    @staticmethod
    def _row_to_trade(timestamp, firm_id, stock_id, side, value) -> Trade:
        return Trade(
            timestamp=int(timestamp),
            firm_id=str(firm_id),
            stock_id=str(stock_id),
            side=Side(side),
            value=float(value),
        )


TradesLike = Union[TradeTape, pd.DataFrame, Iterable[Trade]]


def as_frame(trades: TradesLike) -> pd.DataFrame:
    if isinstance(trades, TradeTape):
        return trades.frame
    if isinstance(trades, pd.DataFrame):
        return trades
    return TradeTape.from_trades(trades).frame


def parse_trades(source: Source) -> TradeTape:
    """Parse a trade-CSV byte stream or path into a TradeTape, in file order."""
    frame = read_trade_frame(source)
    State.logger.info(f"Parsed {len(frame)} trades")
    return TradeTape(frame)


def write_trades(trades: TradesLike, dest: Union[str, Path, TextIO]) -> None:
    write_trade_frame(as_frame(trades), dest)


def _years(timestamps: pd.Series) -> pd.Series:
    return pd.to_datetime(timestamps, unit="s", utc=True).dt.year


def firm_activity(trades: TradesLike) -> dict[str, FirmActivity]:
    """Trades and distinct active days per UTC calendar year, per firm."""
    frame = as_frame(trades)
    if frame.empty:
        return {}
    work = pd.DataFrame(
        {
            "firm_id": frame["firm_id"],
            "year": _years(frame["timestamp"]),
            "day": frame["timestamp"] // SECONDS_PER_DAY,
        }
    )
    grouped = work.groupby(["firm_id", "year"], sort=True).agg(
        trades=("day", "size"), days=("day", "nunique")
    )
    activity: dict[str, FirmActivity] = {}
    for firm_id, per_firm in grouped.groupby(level=0, sort=True):
        years = per_firm.index.get_level_values(1)
        activity[str(firm_id)] = FirmActivity(
            firm_id=str(firm_id),
            trades_per_year={int(y): int(c) for y, c in zip(years, per_firm["trades"])},
            active_days_per_year={int(y): int(d) for y, d in zip(years, per_firm["days"])},
        )
    return activity


def _year_coverage(first_ts: int, last_ts: int, year: int) -> float:
    """Fraction of calendar `year` spanned by the dataset's first and last trade days."""
    start = pd.Timestamp(year=year, month=1, day=1, tz="UTC")
    end = pd.Timestamp(year=year, month=12, day=31, tz="UTC")
    first = pd.Timestamp(first_ts, unit="s", tz="UTC").normalize()
    last = pd.Timestamp(last_ts, unit="s", tz="UTC").normalize()
    covered = (min(end, last) - max(start, first)).days + 1
    days_in_year = (end - start).days + 1
    return min(max(covered, 0) / days_in_year, 1.0)


def filter_active_firms(
    trades: TradesLike,
    min_trades_per_year: int = constant.MIN_TRADES_PER_YEAR,
    min_active_days: int = constant.MIN_ACTIVE_DAYS,
    mode: ActivityMode = ActivityMode.STRICT,
    years: ActivityYears = ActivityYears.EVERY,
) -> set[str]:
    """Firms meeting both activity thresholds in the dataset's calendar years.

    With `years=EVERY` a firm must qualify in every year the dataset has
    trades in; `ANY` asks for one qualifying year. `PRORATED` scales both
    thresholds by the share of each year the dataset actually covers.
    """
    if min_trades_per_year < 0 or min_active_days < 0:
        raise ValueError("activity thresholds must be non-negative")
    frame = as_frame(trades)
    if frame.empty:
        return set()

    dataset_years = sorted(int(y) for y in _years(frame["timestamp"]).unique())
    first_ts, last_ts = int(frame["timestamp"].min()), int(frame["timestamp"].max())
    scale = {
        year: _year_coverage(first_ts, last_ts, year) if mode is ActivityMode.PRORATED else 1.0
        for year in dataset_years
    }

    active = set()
    for firm_id, activity in firm_activity(frame).items():
        verdicts = [
            activity.trades_per_year.get(year, 0) >= min_trades_per_year * scale[year]
            and activity.active_days_per_year.get(year, 0) >= min_active_days * scale[year]
            for year in dataset_years
        ]
        qualifies = all(verdicts) if years is ActivityYears.EVERY else any(verdicts)
        if qualifies:
            active.add(firm_id)
    State.logger.info(
        f"Activity filter kept {len(active)} firms over years {dataset_years} "
        f"({min_trades_per_year} trades, {min_active_days} days, {mode.value}/{years.value})"
    )
    return active


def restrict_to_firms(trades: TradesLike, firms: set[str]) -> TradeTape:
    frame = as_frame(trades)
    return TradeTape(frame[frame["firm_id"].isin(firms)])


def _series_from_frame(frame: pd.DataFrame, firm_id: str, stock_id: str) -> SignedSeries:
    order = np.argsort(frame["timestamp"].to_numpy(), kind="stable")
    timestamps = frame["timestamp"].to_numpy()[order]
    values = frame["value"].to_numpy(dtype=np.float64)[order]
    buys = frame["side"].to_numpy()[order] == Side.BUY.value
    return SignedSeries(firm_id, stock_id, timestamps, np.where(buys, values, -values))


def build_series(trades: TradesLike, firm_id: str, stock_id: str) -> SignedSeries:
    """Signed traded-value series of one firm in one stock, time ordered.

    Buys carry +value and sells -value; equal timestamps keep input order.
    """
    frame = as_frame(trades)
    mask = (frame["firm_id"] == firm_id) & (frame["stock_id"] == stock_id)
    if not mask.any():
        return SignedSeries.empty(firm_id, stock_id)
    return _series_from_frame(frame[mask], firm_id, stock_id)


def build_all_series(trades: TradesLike) -> dict[tuple[str, str], SignedSeries]:
    """Every (firm, stock) series of the tape, keyed and ordered by (firm, stock)."""
    frame = as_frame(trades)
    out: dict[tuple[str, str], SignedSeries] = {}
    for (firm_id, stock_id), group in frame.groupby(["firm_id", "stock_id"], sort=True):
        out[(str(firm_id), str(stock_id))] = _series_from_frame(group, str(firm_id), str(stock_id))
    return out


def series_keys(trades: TradesLike) -> list[tuple[str, str]]:
    frame = as_frame(trades)
    pairs = frame[["firm_id", "stock_id"]].drop_duplicates()
    return sorted((str(f), str(s)) for f, s in pairs.itertuples(index=False))


def inventory(series: SignedSeries) -> list[tuple[int, float]]:
    """Cumulative signed traded value after each trade."""
    if len(series) == 0:
        return []
    cumulative = np.cumsum(series.values)
    return list(zip(series.timestamps.tolist(), cumulative.tolist()))
