import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from patchscale.enums.enums import PatchDirection


class Patch(BaseModel):
    """Aggregates of one segment [start, end) of a SignedSeries."""

    model_config = ConfigDict(frozen=True)

    firm_id: str
    stock_id: str
    start: int = Field(..., ge=0)
    end: int = Field(..., ge=0)
    V_b: float = Field(..., ge=0)
    V_s: float = Field(..., ge=0)
    V: float = Field(..., ge=0)
    n_buy: int = Field(..., ge=0)
    n_sell: int = Field(..., ge=0)
    t_first: int
    t_last: int

    @model_validator(mode="after")
    def _check(self):
        if self.end < self.start:
            raise ValueError("end must not precede start")
        if self.V != self.V_b + self.V_s:
            raise ValueError("V must equal V_b + V_s")
        if self.t_last < self.t_first:
            raise ValueError("t_last must not precede t_first")
        return self

    @property
    def n_trades(self) -> int:
        return self.n_buy + self.n_sell

    @property
    def series_ref(self) -> tuple[str, str]:
        return (self.firm_id, self.stock_id)


class DirectionalPatch(BaseModel):
    model_config = ConfigDict(frozen=True)

    patch: Patch
    direction: PatchDirection
    T: int = Field(..., ge=0, description="Seconds from first to last trade")
    N_m: int = Field(..., ge=0, description="Dominant-side trade count")
    V_m: float = Field(..., ge=0, description="Dominant-side traded value")

    @model_validator(mode="after")
    def _check(self):
        if self.direction is PatchDirection.NON_DIRECTIONAL:
            raise ValueError("a directional patch must be Buy or Sell")
        if self.T != self.patch.t_last - self.patch.t_first:
            raise ValueError("T must equal t_last - t_first")
        return self

    @property
    def firm_id(self) -> str:
        return self.patch.firm_id

    @property
    def stock_id(self) -> str:
        return self.patch.stock_id

    def value_of(self, variable: str) -> float:
        """Patch variable by name: "T", "N_m" or "V_m"."""
        return float(getattr(self, variable))

    def log_coordinates(self) -> tuple[float, float, float] | None:
        if self.T <= 0 or self.N_m <= 0 or self.V_m <= 0:
            return None
        return (math.log(self.T), math.log(self.N_m), math.log(self.V_m))
