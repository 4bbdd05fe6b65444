import os

os.environ.setdefault("PATCHSCALE_PROGRESS", "false")
os.environ.setdefault("PATCHSCALE_LOG_LEVEL", "WARNING")

import io

import numpy as np
import pytest

from patchscale.config import constant
from patchscale.enums.enums import PatchDirection
from patchscale.schema.patch import DirectionalPatch, Patch
from patchscale.schema.trade import SignedSeries

HEADER = ",".join(constant.TRADE_CSV_HEADER)


def tape_bytes(rows: list[str]) -> io.BytesIO:
    """A trade-CSV byte stream with the standard header and the given data rows."""
    return io.BytesIO(("\n".join([HEADER, *rows]) + "\n").encode("utf-8"))


def make_series(values, timestamps=None, firm_id="F1", stock_id="S1") -> SignedSeries:
    values = np.asarray(values, dtype=np.float64)
    if timestamps is None:
        timestamps = np.arange(values.size)
    return SignedSeries(firm_id, stock_id, np.asarray(timestamps), values)


def make_directional(
    T: int, N_m: int, V_m: float, firm_id="F1", stock_id="S1", start=0
) -> DirectionalPatch:
    """An all-buy directional patch with the given variables."""
    patch = Patch(
        firm_id=firm_id,
        stock_id=stock_id,
        start=start,
        end=start + N_m,
        V_b=V_m,
        V_s=0.0,
        V=V_m,
        n_buy=N_m,
        n_sell=0,
        t_first=1_000,
        t_last=1_000 + T,
    )
    return DirectionalPatch(patch=patch, direction=PatchDirection.BUY, T=T, N_m=N_m, V_m=V_m)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def step_series(rng):
    """Three levels (0, 8, 0) of 300 unit-variance points each."""
    levels = np.repeat([0.0, 8.0, 0.0], 300)
    return levels + rng.standard_normal(levels.size)
