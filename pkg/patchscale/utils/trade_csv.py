import re
from pathlib import Path
from typing import BinaryIO, TextIO, Union

import numpy as np
import pandas as pd

from patchscale.config import constant
from patchscale.config.state import State
from patchscale.core.errors import TradeParseError, TradeRejectedError

Source = Union[str, Path, BinaryIO, TextIO]

_PARSER_LINE = re.compile(r"line (\d+)")
COLUMNS = list(constant.TRADE_CSV_HEADER)


def _first_bad(mask: pd.Series) -> int | None:
    bad = np.flatnonzero(mask.to_numpy())
    return int(bad[0]) if bad.size else None


def read_trade_frame(source: Source) -> pd.DataFrame:
    """Read and validate a trade-CSV into a typed DataFrame.

    Raises TradeParseError for malformed rows, blank lines included, and
    TradeRejectedError for rows that parse but carry a non-positive value;
    both report the 1-based file line number (the header is line 1).
    """
    try:
        raw = pd.read_csv(
            source,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            encoding="utf-8",
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError:
        raise TradeParseError(1, "missing header")
    except pd.errors.ParserError as e:
        match = _PARSER_LINE.search(str(e))
        raise TradeParseError(int(match.group(1)) if match else 0, str(e).strip())

    if [c.strip() for c in raw.columns] != COLUMNS:
        raise TradeParseError(1, f"expected header {','.join(COLUMNS)}, got {','.join(map(str, raw.columns))}")
    raw.columns = COLUMNS
    raw = raw.fillna("")

    if raw.empty:
        return empty_trade_frame()

    timestamp = raw["timestamp"].str.strip()
    firm = raw["firm_id"].str.strip()
    stock = raw["stock_id"].str.strip()
    side = raw["side"].str.strip()
    value_text = raw["value"].str.strip()
    value = pd.to_numeric(value_text, errors="coerce")

    blank = (timestamp == "") & (firm == "") & (stock == "") & (side == "") & (value_text == "")
    checks = [
        (blank, "blank line"),
        (~timestamp.str.fullmatch(r"\d+"), "timestamp must be a non-negative integer"),
        (firm == "", "empty firm_id"),
        (stock == "", "empty stock_id"),
        (~side.isin(["B", "S"]), "side must be B or S"),
        (value.isna() | ~np.isfinite(value.fillna(0.0)), "value is not a finite decimal"),
    ]
    first = None
    for mask, reason in checks:
        row = _first_bad(mask)
        if row is not None and (first is None or row < first[0]):
            first = (row, reason)
    rejected = _first_bad(value <= 0)
    if rejected is not None and (first is None or rejected < first[0]):
        raise TradeRejectedError(rejected + 2, f"non-positive value {value_text.iloc[rejected]!r}")
    if first is not None:
        row, reason = first
        raise TradeParseError(row + 2, f"{reason}: {raw.iloc[row].tolist()}")

    frame = pd.DataFrame(
        {
            "timestamp": timestamp.astype(np.int64),
            "firm_id": firm,
            "stock_id": stock,
            "side": side,
            # float() per cell keeps repr-written values exact
            "value": value_text.astype(np.float64),
        }
    )
    State.logger.debug(f"Parsed {len(frame)} trade rows")
    return frame.reset_index(drop=True)


def empty_trade_frame() -> pd.DataFrame:
    return pd.DataFrame(
        {
            "timestamp": pd.Series(dtype=np.int64),
            "firm_id": pd.Series(dtype=object),
            "stock_id": pd.Series(dtype=object),
            "side": pd.Series(dtype=object),
            "value": pd.Series(dtype=np.float64),
        }
    )


def write_trade_frame(frame: pd.DataFrame, dest: Union[str, Path, TextIO]) -> None:
    """Write a trade frame as trade-CSV (UTF-8, LF, shortest round-trip floats)."""
    out = frame.loc[:, COLUMNS].copy()
    out["value"] = [repr(float(v)) for v in out["value"].to_numpy()]
    out.to_csv(dest, index=False, lineterminator="\n", encoding="utf-8")
