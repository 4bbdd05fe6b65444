from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from patchscale.enums.enums import Side


class Trade(BaseModel):
    """One transaction record of the trade tape."""

    model_config = ConfigDict(frozen=True)

    timestamp: int = Field(..., ge=0, description="Seconds since epoch")
    firm_id: str = Field(..., min_length=1, description="Opaque firm identifier")
    stock_id: str = Field(..., min_length=1, description="Opaque stock identifier")
    side: Side = Field(..., description="B or S")
    value: float = Field(..., gt=0, allow_inf_nan=False, description="Traded value in Euros")

    @property
    def signed_value(self) -> float:
        return self.value if self.side is Side.BUY else -self.value


class FirmActivity(BaseModel):
    model_config = ConfigDict(frozen=True)

    firm_id: str
    trades_per_year: dict[int, int] = Field(default_factory=dict)
    active_days_per_year: dict[int, int] = Field(default_factory=dict)


@dataclass(frozen=True, slots=True)
class SignedSeries:
    """Time-ordered signed traded values of one (firm, stock) pair.

    `timestamps` and `values` are read-only numpy arrays of equal length;
    buys are positive and sells negative.
    """

    firm_id: str
    stock_id: str
    timestamps: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        ts = np.array(self.timestamps, dtype=np.int64, copy=True)
        vs = np.array(self.values, dtype=np.float64, copy=True)
        if ts.shape != vs.shape or ts.ndim != 1:
            raise ValueError("timestamps and values must be 1-d arrays of equal length")
        if np.any(np.diff(ts) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if np.any(vs == 0) or not np.all(np.isfinite(vs)):
            raise ValueError("signed values must be finite and non-zero")
        ts.flags.writeable = False
        vs.flags.writeable = False
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vs)

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def key(self) -> tuple[str, str]:
        return (self.firm_id, self.stock_id)

    @property
    def entries(self) -> list[tuple[int, float]]:
        return list(zip(self.timestamps.tolist(), self.values.tolist()))

    @classmethod
    def empty(cls, firm_id: str, stock_id: str) -> "SignedSeries":
        return cls(firm_id, stock_id, np.empty(0, dtype=np.int64), np.empty(0))
